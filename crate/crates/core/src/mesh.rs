//! Structured curvilinear hexahedral meshes with prescribed corner motion.
//!
//! Geometry is recomputed analytically at any requested time: the static
//! curved shape of an element is stored at its nodes, and the motion of the
//! corners that start on the moving plane is spread through the element by
//! trilinear blending. Metric terms use the conservative curl form so that
//! the discrete metric identities hold to roundoff.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::QuadratureRule;
use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Real};
use crate::tensor::{apply_along, face_node, node_coords};

pub type Vec3<T> = [T; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeshConfig {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub elements: [usize; 3],
    pub periodic: [bool; 3],
    /// Amplitude of the sinusoidal displacement that curves the grid planes.
    pub sinusoid_amplitude: f64,
    /// Integer wavenumber of that displacement in the transverse directions.
    pub sinusoid_wavenumber: u32,
    pub moving: bool,
    /// Corners whose undisplaced `y` equals this value follow the motion.
    pub moving_plane_y: f64,
    pub motion_amplitude: f64,
    pub motion_frequency: f64,
    pub degree: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            lower: [-2.0, -2.0, 0.0],
            upper: [2.0, 2.0, 3.0],
            elements: [4, 4, 3],
            periodic: [true; 3],
            sinusoid_amplitude: 0.15,
            sinusoid_wavenumber: 1,
            moving: true,
            moving_plane_y: 0.0,
            motion_amplitude: 0.25,
            motion_frequency: 1.0,
            degree: 4,
        }
    }
}

impl MeshConfig {
    /// Flat, static, single element on `[-1, 1]^3`.
    pub fn reference_cube(degree: usize) -> Self {
        Self {
            lower: [-1.0; 3],
            upper: [1.0; 3],
            elements: [1, 1, 1],
            sinusoid_amplitude: 0.0,
            moving: false,
            degree,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements.iter().any(|&n| n == 0) {
            return Err(Error::InvalidConfig("element counts must be >= 1".into()));
        }
        if (0..3).any(|d| !(self.upper[d] > self.lower[d])) {
            return Err(Error::InvalidConfig("domain bounds must satisfy lower < upper".into()));
        }
        if self.degree < 1 {
            return Err(Error::InvalidDegree(self.degree));
        }
        if self.moving && self.motion_frequency.is_nan() {
            return Err(Error::InvalidConfig("motion frequency must be finite".into()));
        }
        Ok(())
    }
}

/// Periodic translation applied to the corners on the moving plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerMotion<T> {
    pub amplitude: T,
    pub frequency: T,
    pub direction: Vec3<T>,
}

impl<T: Real> CornerMotion<T> {
    pub fn new(amplitude: T, frequency: T) -> Self {
        Self {
            amplitude,
            frequency,
            direction: [-T::one(), T::one(), T::one()],
        }
    }

    /// Scalar factor `s(t)` of the displacement `s(t) direction`.
    pub fn amplitude_at(&self, t: T) -> T {
        self.amplitude * (lit::<T>(2.0) * T::PI() * self.frequency * t).sin()
    }

    pub fn displacement(&self, t: T) -> Vec3<T> {
        let s = self.amplitude_at(t);
        self.direction.map(|d| d * s)
    }

    pub fn velocity(&self, t: T) -> Vec3<T> {
        let omega = lit::<T>(2.0) * T::PI() * self.frequency;
        let s = self.amplitude * omega * (omega * t).cos();
        self.direction.map(|d| d * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner<T> {
    pub position: Vec3<T>,
    pub moving: bool,
}

/// What lies across a face of an element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceLink<T> {
    /// Neighbor element and its face; neighbor positions equal local ones
    /// plus `offset` (nonzero across periodic boundaries).
    Interior {
        element: usize,
        face: usize,
        offset: Vec3<T>,
    },
    Boundary,
}

/// A unique face of the mesh. For interior faces `minus` is the element
/// whose positive face it is; fluxes are oriented along its reference axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshFace<T> {
    Interior {
        minus: (usize, usize),
        plus: (usize, usize),
        offset: Vec3<T>,
    },
    Boundary {
        element: usize,
        face: usize,
    },
}

#[derive(Debug, Clone)]
pub struct HexElement<T> {
    pub id: usize,
    pub grid_index: [usize; 3],
    /// Corner `c` sits at reference corner `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
    pub corners: [Corner<T>; 8],
    pub initial_positions: Vec<Vec3<T>>,
    /// Trilinear blending weight of each corner at each node, `[node][corner]`.
    blend: Vec<[T; 8]>,
    pub neighbors: [FaceLink<T>; 6],
    expansion: Option<Box<MotionExpansion<T>>>,
}

impl<T: Real> HexElement<T> {
    pub fn is_moving(&self) -> bool {
        self.corners.iter().any(|c| c.moving)
    }

    pub fn blend_weights(&self) -> &[[T; 8]] {
        &self.blend
    }
}

/// Nodal geometry of one element at one instant.
#[derive(Debug, Clone)]
pub struct GeometryAtTime<T> {
    pub time: T,
    pub positions: Vec<Vec3<T>>,
    pub velocities: Vec<Vec3<T>>,
    /// `contravariant[node][i]` is the vector `J a^i` at the node.
    pub contravariant: Vec<[Vec3<T>; 3]>,
    /// Jacobian from the covariant basis, `a_1 . (a_2 x a_3)`.
    pub jacobian: Vec<T>,
}

impl<T: Real> GeometryAtTime<T> {
    /// Outward scaled normal `+-J a^i` at face node `(a, b)`.
    pub fn scaled_normal(&self, n: usize, face: usize, a: usize, b: usize) -> Vec3<T> {
        let v = self.contravariant[face_node(n, face, a, b)][face / 2];
        if face % 2 == 0 {
            v.map(|x| -x)
        } else {
            v
        }
    }

    pub fn surface_jacobian(&self, n: usize, face: usize, a: usize, b: usize) -> T {
        norm(self.scaled_normal(n, face, a, b))
    }

    /// Largest nodal value of `|sum_i D_i (J a^i)|` over all components.
    pub fn metric_identity_residual(&self, rule: &QuadratureRule<T>) -> T {
        let n = rule.n_points();
        let nn = n * n * n;
        let mut worst = T::zero();
        let mut total = vec![T::zero(); nn];
        let mut input = vec![T::zero(); nn];
        let mut tmp = vec![T::zero(); nn];
        for comp in 0..3 {
            total.fill(T::zero());
            for dir in 0..3 {
                for (v, ja) in input.iter_mut().zip(&self.contravariant) {
                    *v = ja[dir][comp];
                }
                apply_along(rule.d(), n, dir, 1, &input, &mut tmp);
                for (t, d) in total.iter_mut().zip(&tmp) {
                    *t = *t + *d;
                }
            }
            worst = total.iter().fold(worst, |m, v| m.max(v.abs()));
        }
        worst
    }
}

#[inline]
pub fn dot<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm<T: Real>(a: Vec3<T>) -> T {
    dot(a, a).sqrt()
}

/// Copies the normal metric component `J a^i` on face `sf` of `src` onto the
/// paired face `df` of `dst`. The analytic values agree; this removes the
/// roundoff difference so fluxes see one geometry on both sides.
pub fn copy_face_normals<T: Real>(src: &GeometryAtTime<T>, sf: usize, dst: &mut GeometryAtTime<T>, df: usize, n: usize) {
    let dir = sf / 2;
    for b in 0..n {
        for a in 0..n {
            let v = src.contravariant[face_node(n, sf, a, b)][dir];
            dst.contravariant[face_node(n, df, a, b)][dir] = v;
        }
    }
}

/// Mean of nodal positions, summed in node order.
pub fn centroid<T: Real>(positions: &[Vec3<T>]) -> Vec3<T> {
    let inv = T::one() / from_usize(positions.len());
    std::array::from_fn(|c| positions.iter().fold(T::zero(), |s, p| s + p[c]) * inv)
}

/// Metric terms from nodal positions on the `(N+1)^3` LGL grid.
///
/// `J a^i_n = -e_i . curl_xi( I^N( X_l grad_xi X_m ) )` with `(n, m, l)`
/// cyclic, every derivative taken with the nodal operator `D`. Coordinates
/// are measured from `origin`; the result is shift invariant analytically
/// and an origin near the element keeps roundoff small.
pub fn metric_terms<T: Real>(
    positions: &[Vec3<T>],
    origin: Vec3<T>,
    rule: &QuadratureRule<T>,
) -> (Vec<[Vec3<T>; 3]>, Vec<T>) {
    let n = rule.n_points();
    assert_eq!(positions.len(), n * n * n, "positions must live on the element grid");
    let coord = packed(positions, origin);
    let grad = packed_gradients(&coord, rule);
    let contravariant = curl_form(&[(&coord, &grad)], rule);
    let jacobian = jacobians(&grad, None);
    (contravariant, jacobian)
}

/// `[node][m]` coordinates relative to `origin`.
fn packed<T: Real>(positions: &[Vec3<T>], origin: Vec3<T>) -> Vec<T> {
    positions
        .iter()
        .flat_map(|p| (0..3).map(move |c| p[c] - origin[c]))
        .collect()
}

/// `grad[i][3 node + m] = d X_m / d xi^i`.
fn packed_gradients<T: Real>(coord: &[T], rule: &QuadratureRule<T>) -> [Vec<T>; 3] {
    let n = rule.n_points();
    std::array::from_fn(|i| {
        let mut g = vec![T::zero(); coord.len()];
        apply_along(rule.d(), n, i, 3, coord, &mut g);
        g
    })
}

/// Curl-form metrics of the bilinear sum `sum_terms X_l grad Y_m`.
fn curl_form<T: Real>(terms: &[(&[T], &[Vec<T>; 3])], rule: &QuadratureRule<T>) -> Vec<[Vec3<T>; 3]> {
    let n = rule.n_points();
    let nn = n * n * n;
    let d = rule.d();
    // v[node][3 comp + i] = sum X_l d Y_m / d xi^i with (comp, m, l) cyclic.
    let mut v = vec![T::zero(); 9 * nn];
    for (x, grad) in terms {
        for node in 0..nn {
            for comp in 0..3 {
                let m = (comp + 1) % 3;
                let l = (comp + 2) % 3;
                for i in 0..3 {
                    let e = &mut v[node * 9 + comp * 3 + i];
                    *e = *e + x[node * 3 + l] * grad[i][node * 3 + m];
                }
            }
        }
    }
    let dv: [Vec<T>; 3] = std::array::from_fn(|p| {
        let mut out = vec![T::zero(); 9 * nn];
        apply_along(d, n, p, 9, &v, &mut out);
        out
    });
    (0..nn)
        .map(|node| {
            std::array::from_fn(|i| {
                // (curl V)_i = D_{i+1} V_{i+2} - D_{i+2} V_{i+1}
                let p = (i + 1) % 3;
                let q = (i + 2) % 3;
                std::array::from_fn(|comp| dv[q][node * 9 + comp * 3 + p] - dv[p][node * 9 + comp * 3 + q])
            })
        })
        .collect()
}

/// `a_1 . (a_2 x a_3)` from packed gradients, optionally `grad + s extra`.
fn jacobians<T: Real>(grad: &[Vec<T>; 3], extra: Option<(T, &[Vec<T>; 3])>) -> Vec<T> {
    let nn = grad[0].len() / 3;
    (0..nn)
        .map(|node| {
            let a: [Vec3<T>; 3] = std::array::from_fn(|i| {
                std::array::from_fn(|m| match extra {
                    Some((s, e)) => grad[i][node * 3 + m] + s * e[i][node * 3 + m],
                    None => grad[i][node * 3 + m],
                })
            });
            dot(a[0], cross(a[1], a[2]))
        })
        .collect()
}

/// Metric terms of a moving element as a polynomial in the motion amplitude.
///
/// Moving corners all follow `s(t) dir`, so nodal positions are
/// `X0 + s W dir` with the blended weight `W`. The curl-form metrics are
/// bilinear in the coordinates, hence exactly `M0 + s M1 + s^2 M2`.
#[derive(Debug, Clone)]
struct MotionExpansion<T> {
    direction: Vec3<T>,
    grad0: [Vec<T>; 3],
    grad1: [Vec<T>; 3],
    metric: [Vec<[Vec3<T>; 3]>; 3],
}

impl<T: Real> MotionExpansion<T> {
    fn new(initial: &[Vec3<T>], weight: &[T], direction: Vec3<T>, rule: &QuadratureRule<T>) -> Self {
        let x0 = packed(initial, centroid(initial));
        let shape: Vec<T> = weight.iter().flat_map(|&w| direction.map(|d| w * d)).collect();
        let grad0 = packed_gradients(&x0, rule);
        let grad1 = packed_gradients(&shape, rule);
        let metric = [
            curl_form(&[(&x0, &grad0)], rule),
            curl_form(&[(&x0, &grad1), (&shape, &grad0)], rule),
            curl_form(&[(&shape, &grad1)], rule),
        ];
        Self {
            direction,
            grad0,
            grad1,
            metric,
        }
    }

    fn evaluate(&self, s: T) -> (Vec<[Vec3<T>; 3]>, Vec<T>) {
        let [m0, m1, m2] = &self.metric;
        let contravariant = m0
            .iter()
            .zip(m1)
            .zip(m2)
            .map(|((a, b), c)| std::array::from_fn(|i| std::array::from_fn(|k| a[i][k] + s * (b[i][k] + s * c[i][k]))))
            .collect();
        (contravariant, jacobians(&self.grad0, Some((s, &self.grad1))))
    }
}

/// Relative tolerance for matching coordinates, loose enough for `f32`.
fn matching_tolerance<T: Real>() -> T {
    (T::epsilon() * lit(1e4)).max(lit(1e-10))
}

/// Displacement of a corner at time `t`; static corners never move.
pub fn corner_displacement<T: Real>(corner: &Corner<T>, motion: &CornerMotion<T>, t: T) -> Vec3<T> {
    if corner.moving {
        motion.displacement(t)
    } else {
        [T::zero(); 3]
    }
}

pub fn corner_velocity<T: Real>(corner: &Corner<T>, motion: &CornerMotion<T>, t: T) -> Vec3<T> {
    if corner.moving {
        motion.velocity(t)
    } else {
        [T::zero(); 3]
    }
}

/// Geometry of `element` at time `t`.
pub fn geometry_at<T: Real>(
    element: &HexElement<T>,
    motion: &CornerMotion<T>,
    t: T,
    rule: &QuadratureRule<T>,
) -> Result<GeometryAtTime<T>> {
    let disp: [Vec3<T>; 8] =
        std::array::from_fn(|c| corner_displacement(&element.corners[c], motion, t));
    let vel: [Vec3<T>; 8] = std::array::from_fn(|c| corner_velocity(&element.corners[c], motion, t));
    let mut positions = element.initial_positions.clone();
    let mut velocities = vec![[T::zero(); 3]; positions.len()];
    if element.is_moving() {
        for ((p, v), w) in positions.iter_mut().zip(&mut velocities).zip(&element.blend) {
            for c in 0..8 {
                for d in 0..3 {
                    p[d] = p[d] + w[c] * disp[c][d];
                    v[d] = v[d] + w[c] * vel[c][d];
                }
            }
        }
    }
    let (contravariant, jacobian) = match &element.expansion {
        Some(x) if x.direction == motion.direction => x.evaluate(motion.amplitude_at(t)),
        _ => metric_terms(&positions, centroid(&positions), rule),
    };
    if let Some((node, &value)) = jacobian
        .iter()
        .enumerate()
        .find(|(_, &j)| !(j > T::zero()))
    {
        return Err(Error::NonPositiveJacobian {
            element: element.id,
            node,
            time: t.to_f64().unwrap_or(f64::NAN),
            value: value.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(GeometryAtTime {
        time: t,
        positions,
        velocities,
        contravariant,
        jacobian,
    })
}

#[derive(Debug, Clone)]
pub struct Mesh<T> {
    config: MeshConfig,
    rule: Arc<QuadratureRule<T>>,
    motion: CornerMotion<T>,
    elements: Vec<HexElement<T>>,
    faces: Vec<MeshFace<T>>,
}

/// Builds the structured mesh described by `config` and checks it.
pub fn build_mesh<T: Real>(config: &MeshConfig) -> Result<Mesh<T>> {
    config.validate()?;
    let rule = Arc::new(QuadratureRule::<T>::lgl(config.degree)?);
    let n = rule.n_points();
    let nn = n * n * n;
    let ne = config.elements;
    let lower: Vec3<T> = config.lower.map(lit);
    let upper: Vec3<T> = config.upper.map(lit);
    let length: Vec3<T> = std::array::from_fn(|d| upper[d] - lower[d]);
    let h: Vec3<T> = std::array::from_fn(|d| length[d] / from_usize(ne[d]));
    let amp: T = lit(config.sinusoid_amplitude);
    let k: T = from_usize(config.sinusoid_wavenumber as usize);
    let half: T = lit(0.5);

    let warp = |x: Vec3<T>| -> Vec3<T> {
        let s: Vec3<T> = std::array::from_fn(|d| (x[d] - lower[d]) / length[d]);
        std::array::from_fn(|d| {
            let mut v = amp * (T::PI() * s[d]).sin();
            for e in 0..3 {
                if e != d {
                    v = v * (k * T::PI() * s[e]).sin();
                }
            }
            x[d] + v
        })
    };

    let motion = CornerMotion::new(lit(config.motion_amplitude), lit(config.motion_frequency));
    let plane_y: T = lit(config.moving_plane_y);
    let plane_tol = matching_tolerance::<T>() * h[1];
    let xi = rule.nodes();
    let elem_id = |i: usize, j: usize, k: usize| i + ne[0] * (j + ne[1] * k);

    let blend: Vec<[T; 8]> = (0..nn)
        .map(|node| {
            let c = node_coords(n, node);
            std::array::from_fn(|corner| {
                let mut w = T::one();
                for d in 0..3 {
                    let bit = (corner >> d) & 1;
                    let x = xi[c[d]];
                    w = w * if bit == 1 { half * (T::one() + x) } else { half * (T::one() - x) };
                }
                w
            })
        })
        .collect();

    let mut elements = Vec::with_capacity(ne[0] * ne[1] * ne[2]);
    for gk in 0..ne[2] {
        for gj in 0..ne[1] {
            for gi in 0..ne[0] {
                let g = [gi, gj, gk];
                let id = elem_id(gi, gj, gk);
                let logical = |r: Vec3<T>| -> Vec3<T> {
                    std::array::from_fn(|d| {
                        lower[d] + (from_usize::<T>(g[d]) + half * (r[d] + T::one())) * h[d]
                    })
                };
                let corners: [Corner<T>; 8] = std::array::from_fn(|c| {
                    let r: Vec3<T> =
                        std::array::from_fn(|d| if (c >> d) & 1 == 1 { T::one() } else { -T::one() });
                    let x = logical(r);
                    Corner {
                        position: warp(x),
                        moving: config.moving && (x[1] - plane_y).abs() <= plane_tol,
                    }
                });
                let initial_positions: Vec<Vec3<T>> = (0..nn)
                    .map(|node| {
                        let c = node_coords(n, node);
                        warp(logical([xi[c[0]], xi[c[1]], xi[c[2]]]))
                    })
                    .collect();
                let neighbors = std::array::from_fn(|face| {
                    let dir = face / 2;
                    let positive = face % 2 == 1;
                    let mut gn = g;
                    let mut offset = [T::zero(); 3];
                    if positive {
                        if g[dir] + 1 == ne[dir] {
                            if !config.periodic[dir] {
                                return FaceLink::Boundary;
                            }
                            gn[dir] = 0;
                            offset[dir] = -length[dir];
                        } else {
                            gn[dir] += 1;
                        }
                    } else if g[dir] == 0 {
                        if !config.periodic[dir] {
                            return FaceLink::Boundary;
                        }
                        gn[dir] = ne[dir] - 1;
                        offset[dir] = length[dir];
                    } else {
                        gn[dir] -= 1;
                    }
                    FaceLink::Interior {
                        element: elem_id(gn[0], gn[1], gn[2]),
                        face: face ^ 1,
                        offset,
                    }
                });
                let expansion = corners.iter().any(|c| c.moving).then(|| {
                    let weight: Vec<T> = blend
                        .iter()
                        .map(|w| (0..8).filter(|&c| corners[c].moving).fold(T::zero(), |s, c| s + w[c]))
                        .collect();
                    Box::new(MotionExpansion::new(&initial_positions, &weight, motion.direction, &rule))
                });
                elements.push(HexElement {
                    id,
                    grid_index: g,
                    corners,
                    initial_positions,
                    blend: blend.clone(),
                    neighbors,
                    expansion,
                });
            }
        }
    }

    let mut faces = Vec::new();
    for el in &elements {
        for face in 0..6 {
            match el.neighbors[face] {
                FaceLink::Interior {
                    element,
                    face: nf,
                    offset,
                } if face % 2 == 1 => faces.push(MeshFace::Interior {
                    minus: (el.id, face),
                    plus: (element, nf),
                    offset,
                }),
                FaceLink::Interior { .. } => {}
                FaceLink::Boundary => faces.push(MeshFace::Boundary {
                    element: el.id,
                    face,
                }),
            }
        }
    }

    let mesh = Mesh {
        config: config.clone(),
        rule,
        motion,
        elements,
        faces,
    };
    mesh.check_connectivity()?;
    for el in &mesh.elements {
        geometry_at(el, &mesh.motion, T::zero(), &mesh.rule)?;
    }
    Ok(mesh)
}

impl<T: Real> Mesh<T> {
    pub fn config(&self) -> &MeshConfig {
        &self.config
    }

    pub fn rule(&self) -> &QuadratureRule<T> {
        &self.rule
    }

    pub fn shared_rule(&self) -> Arc<QuadratureRule<T>> {
        Arc::clone(&self.rule)
    }

    pub fn motion(&self) -> &CornerMotion<T> {
        &self.motion
    }

    pub fn elements(&self) -> &[HexElement<T>] {
        &self.elements
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.rule.n_points().pow(3)
    }

    pub fn faces(&self) -> &[MeshFace<T>] {
        &self.faces
    }

    pub fn n_interior_faces(&self) -> usize {
        self.faces
            .iter()
            .filter(|f| matches!(f, MeshFace::Interior { .. }))
            .count()
    }

    pub fn n_boundary_faces(&self) -> usize {
        self.faces.len() - self.n_interior_faces()
    }

    pub fn geometry_at(&self, element: usize, t: T) -> Result<GeometryAtTime<T>> {
        geometry_at(&self.elements[element], &self.motion, t, &self.rule)
    }

    /// `(source, target)` element/face pairs for making face metrics
    /// watertight: one per interior face, sourced from a static side when
    /// there is one so static elements are never overwritten by moving ones.
    pub fn watertight_pairs(&self) -> Vec<((usize, usize), (usize, usize))> {
        self.faces
            .iter()
            .filter_map(|f| match *f {
                MeshFace::Interior { minus, plus, .. } => {
                    let minus_moving = self.elements[minus.0].is_moving();
                    let plus_moving = self.elements[plus.0].is_moving();
                    if minus_moving && !plus_moving {
                        Some((plus, minus))
                    } else {
                        Some((minus, plus))
                    }
                }
                MeshFace::Boundary { .. } => None,
            })
            .collect()
    }

    /// Geometry of every element at `t`, with watertight face metrics.
    pub fn geometry_all(&self, t: T) -> Result<Vec<GeometryAtTime<T>>> {
        let mut geos = (0..self.n_elements())
            .map(|e| self.geometry_at(e, t))
            .collect::<Result<Vec<_>>>()?;
        let n = self.rule.n_points();
        for ((se, sf), (de, df)) in self.watertight_pairs() {
            let src = geos[se].clone();
            copy_face_normals(&src, sf, &mut geos[de], df, n);
        }
        Ok(geos)
    }

    /// Cross-checks face pairing against initial coordinates.
    pub fn check_connectivity(&self) -> Result<()> {
        let n = self.rule.n_points();
        let scale = self
            .config
            .upper
            .iter()
            .zip(&self.config.lower)
            .fold(1.0_f64, |m, (u, l)| m.max((u - l).abs()));
        let tol: T = matching_tolerance::<T>() * lit(scale);
        for face in &self.faces {
            if let MeshFace::Interior {
                minus: (em, fm),
                plus: (ep, fp),
                offset,
            } = *face
            {
                if fm / 2 != fp / 2 || fm % 2 != 1 || fp % 2 != 0 {
                    return Err(Error::Connectivity(format!(
                        "faces {fm} of element {em} and {fp} of element {ep} do not oppose"
                    )));
                }
                for a in 0..n {
                    for b in 0..n {
                        let xm = self.elements[em].initial_positions[face_node(n, fm, a, b)];
                        let xp = self.elements[ep].initial_positions[face_node(n, fp, a, b)];
                        let gap = (0..3).fold(T::zero(), |g, d| g.max((xm[d] + offset[d] - xp[d]).abs()));
                        if gap > tol {
                            return Err(Error::Connectivity(format!(
                                "face node ({a},{b}) of element {em} face {fm} misses element {ep} face {fp} by {gap:e}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Plain-text dump: one `element` block per element, columns `i j k x y z`.
    pub fn write_nodal_dump<W: Write>(&self, t: T, mut out: W) -> Result<()> {
        let n = self.rule.n_points();
        for el in &self.elements {
            let geo = self.geometry_at(el.id, t)?;
            writeln!(out, "element {}", el.id)?;
            for (node, p) in geo.positions.iter().enumerate() {
                let [i, j, k] = node_coords(n, node);
                writeln!(out, "{i} {j} {k} {:.12e} {:.12e} {:.12e}", p[0], p[1], p[2])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_cube(degree: usize) -> Mesh<f64> {
        build_mesh(&MeshConfig::reference_cube(degree)).unwrap()
    }

    #[test]
    fn identity_mapping_has_unit_metrics() {
        let mesh = flat_cube(3);
        let geo = mesh.geometry_at(0, 0.0).unwrap();
        for (ja, j) in geo.contravariant.iter().zip(&geo.jacobian) {
            assert!((j - 1.0).abs() < 1e-14);
            for i in 0..3 {
                for c in 0..3 {
                    let e = if i == c { 1.0 } else { 0.0 };
                    assert!((ja[i][c] - e).abs() < 1e-14);
                }
            }
        }
        assert!(geo.velocities.iter().all(|v| *v == [0.0; 3]));
    }

    #[test]
    fn affine_stretch_metrics() {
        let rule = QuadratureRule::<f64>::lgl(3).unwrap();
        let n = 4;
        let x: Vec<Vec3<f64>> = (0..64)
            .map(|node| {
                let c = node_coords(n, node);
                let r = rule.nodes();
                [2.0 * r[c[0]], r[c[1]], r[c[2]]]
            })
            .collect();
        let (ja, j) = metric_terms(&x, [0.0; 3], &rule);
        let expect = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]];
        for node in 0..64 {
            assert!((j[node] - 2.0).abs() < 1e-13);
            for i in 0..3 {
                for c in 0..3 {
                    assert!((ja[node][i][c] - expect[i][c]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn corner_motion_values() {
        let m = CornerMotion::new(0.25_f64, 1.0);
        assert_eq!(m.displacement(0.0), [0.0, 0.0, 0.0]);
        let d = m.displacement(0.25);
        for (a, b) in d.iter().zip([-0.25, 0.25, 0.25]) {
            assert!((a - b).abs() < 1e-16);
        }
        let v = m.velocity(0.0);
        let hp = std::f64::consts::FRAC_PI_2;
        for (a, b) in v.iter().zip([-hp, hp, hp]) {
            assert!((a - b).abs() < 1e-15);
        }
        let still = Corner {
            position: [0.0; 3],
            moving: false,
        };
        assert_eq!(corner_displacement(&still, &m, 0.3), [0.0; 3]);
        assert_eq!(corner_velocity(&still, &m, 0.3), [0.0; 3]);
    }

    #[test]
    fn default_mesh_counts_and_positive_jacobian() {
        let mesh: Mesh<f64> = build_mesh(&MeshConfig::default()).unwrap();
        assert_eq!(mesh.n_elements(), 48);
        assert_eq!(mesh.n_interior_faces(), 144);
        assert_eq!(mesh.n_boundary_faces(), 0);
        let min_j = (0..48)
            .map(|e| mesh.geometry_at(e, 0.0).unwrap())
            .flat_map(|g| g.jacobian)
            .fold(f64::INFINITY, f64::min);
        assert!(min_j > 0.0);
        let moving = mesh.elements().iter().filter(|e| e.is_moving()).count();
        assert_eq!(moving, 24);
    }

    #[test]
    fn single_periodic_element_pairs_with_itself() {
        let mut cfg = MeshConfig::reference_cube(2);
        cfg.periodic = [true; 3];
        let mesh: Mesh<f64> = build_mesh(&cfg).unwrap();
        assert_eq!(mesh.n_interior_faces(), 3);
        for f in mesh.faces() {
            if let MeshFace::Interior { minus, plus, .. } = f {
                assert_eq!(minus.0, 0);
                assert_eq!(plus.0, 0);
            }
        }
    }

    #[test]
    fn non_periodic_mesh_has_boundary_faces() {
        let cfg = MeshConfig {
            elements: [2, 2, 2],
            periodic: [false; 3],
            ..MeshConfig::default()
        };
        let mesh: Mesh<f64> = build_mesh(&cfg).unwrap();
        assert_eq!(mesh.n_boundary_faces(), 24);
        assert_eq!(mesh.n_interior_faces(), 12);
    }

    #[test]
    fn rigid_translation_keeps_jacobian() {
        let mut mesh = flat_cube(3);
        for c in mesh.elements[0].corners.iter_mut() {
            c.moving = true;
        }
        let g0 = mesh.geometry_at(0, 0.0).unwrap();
        let g1 = mesh.geometry_at(0, 0.25).unwrap();
        for node in 0..64 {
            assert!((g1.jacobian[node] - g0.jacobian[node]).abs() < 1e-14);
            let d = [-0.25, 0.25, 0.25];
            for c in 0..3 {
                assert!((g1.positions[node][c] - g0.positions[node][c] - d[c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn single_moving_corner_blend_at_face_center() {
        let mut mesh = flat_cube(2);
        mesh.elements[0].corners[7].moving = true;
        let g0 = mesh.geometry_at(0, 0.0).unwrap();
        let g = mesh.geometry_at(0, 0.25).unwrap();
        let n = 3;
        // Corner node (1,1,1) carries the full displacement.
        let c = crate::tensor::node_index(n, 2, 2, 2);
        let d = [-0.25, 0.25, 0.25];
        for k in 0..3 {
            assert!((g.positions[c][k] - g0.positions[c][k] - d[k]).abs() < 1e-15);
        }
        // Center of the +xi face sees a quarter of it.
        let f = crate::tensor::node_index(n, 2, 1, 1);
        for k in 0..3 {
            assert!((g.positions[f][k] - g0.positions[f][k] - 0.25 * d[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn motion_expansion_matches_direct_metrics() {
        let mesh: Mesh<f64> = build_mesh(&MeshConfig::default()).unwrap();
        let moving: Vec<_> = mesh.elements().iter().filter(|e| e.is_moving()).collect();
        assert!(!moving.is_empty());
        for el in moving {
            for t in [0.0, 0.13, 0.25, 0.61] {
                let geo = mesh.geometry_at(el.id, t).unwrap();
                let (ja, jac) = metric_terms(&geo.positions, centroid(&geo.positions), mesh.rule());
                for node in 0..ja.len() {
                    assert!((geo.jacobian[node] - jac[node]).abs() < 1e-13);
                    for i in 0..3 {
                        for k in 0..3 {
                            assert!((geo.contravariant[node][i][k] - ja[node][i][k]).abs() < 1e-13);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn metric_identities_on_curved_moving_mesh() {
        let mesh: Mesh<f64> = build_mesh(&MeshConfig::default()).unwrap();
        for &t in &[0.0, 0.13, 0.61] {
            for e in 0..mesh.n_elements() {
                let g = mesh.geometry_at(e, t).unwrap();
                let r = g.metric_identity_residual(mesh.rule());
                assert!(r <= 1e-12, "element {e} t={t}: {r:e}");
            }
        }
    }

    #[test]
    fn geometry_is_periodic_in_time() {
        let mesh: Mesh<f64> = build_mesh(&MeshConfig::default()).unwrap();
        for e in [0, 17, 30] {
            let a = mesh.geometry_at(e, 0.3).unwrap();
            let b = mesh.geometry_at(e, 1.3).unwrap();
            for (p, q) in a.positions.iter().zip(&b.positions) {
                for c in 0..3 {
                    assert!((p[c] - q[c]).abs() <= 1e-13);
                }
            }
        }
    }

    #[test]
    fn analytic_velocity_matches_finite_difference() {
        let mesh: Mesh<f64> = build_mesh(&MeshConfig::default()).unwrap();
        let dt = 1e-6;
        let t = 0.37;
        let e = mesh
            .elements()
            .iter()
            .position(|el| el.is_moving())
            .unwrap();
        let gp = mesh.geometry_at(e, t + dt).unwrap();
        let gm = mesh.geometry_at(e, t - dt).unwrap();
        let g = mesh.geometry_at(e, t).unwrap();
        for node in 0..g.positions.len() {
            for c in 0..3 {
                let fd = (gp.positions[node][c] - gm.positions[node][c]) / (2.0 * dt);
                assert!((fd - g.velocities[node][c]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rejects_bad_config_and_folded_elements() {
        let mut cfg = MeshConfig::default();
        cfg.elements = [0, 1, 1];
        assert!(build_mesh::<f64>(&cfg).is_err());
        let mut cfg = MeshConfig::default();
        cfg.sinusoid_amplitude = 3.0;
        match build_mesh::<f64>(&cfg) {
            Err(Error::NonPositiveJacobian { .. }) => {}
            other => panic!("expected Jacobian failure, got {other:?}"),
        }
    }

    #[test]
    fn nodal_dump_has_one_block_per_element() {
        let mesh: Mesh<f64> = build_mesh(&MeshConfig {
            elements: [2, 1, 1],
            degree: 1,
            ..MeshConfig::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        mesh.write_nodal_dump(0.0, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("element")).count(), 2);
        assert_eq!(text.lines().count(), 2 * (1 + 8));
    }
}
