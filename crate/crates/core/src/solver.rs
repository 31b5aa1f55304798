//! Spatial discretisation: skew-symmetric and conservative DGSEM-ALE
//! right-hand sides, Riemann fluxes, boundary traces and recovery of `Q_t`.

use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::QuadratureRule;
use crate::error::{Error, Result};
use crate::gcl::{gcl_flux, jdot_pointwise};
use crate::mesh::{copy_face_normals, GeometryAtTime, Mesh, MeshFace, Vec3};
use crate::physics::{AleMatrices, StateFunction, SymmetricSystem};
use crate::scalar::{lit, Real};
use crate::tensor::{apply_along, face_node, node_coords};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    #[default]
    Skew,
    Standard,
}

impl Formulation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Skew => "skew",
            Self::Standard => "standard",
        }
    }
}

impl FromStr for Formulation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skew" => Ok(Self::Skew),
            "standard" => Ok(Self::Standard),
            other => Err(Error::UnknownName {
                kind: "formulation",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluxKind {
    #[default]
    Upwind,
    Central,
}

impl FluxKind {
    pub fn lambda<T: Real>(&self) -> T {
        match self {
            Self::Upwind => T::one(),
            Self::Central => T::zero(),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Upwind => "upwind",
            Self::Central => "central",
        }
    }
}

impl FromStr for FluxKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upwind" => Ok(Self::Upwind),
            "central" => Ok(Self::Central),
            other => Err(Error::UnknownName {
                kind: "flux",
                name: other.to_string(),
            }),
        }
    }
}

/// Exterior state at physical boundary faces.
#[derive(Clone)]
pub enum BoundaryCondition<T> {
    Zero,
    Exact(Arc<dyn StateFunction<T>>),
}

impl<T> std::fmt::Debug for BoundaryCondition<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Zero => f.write_str("Zero"),
            Self::Exact(_) => f.write_str("Exact(..)"),
        }
    }
}

/// `F* = S (QL + QR) / 2 - lambda |S| (QR - QL) / 2`.
pub fn riemann_flux<T: Real>(ql: &[T], qr: &[T], s: &[T], abs_s: &[T], lambda: T, out: &mut [T]) {
    let n = ql.len();
    let half = lit::<T>(0.5);
    for r in 0..n {
        let mut acc = T::zero();
        for c in 0..n {
            acc = acc + half * (s[r * n + c] * (ql[c] + qr[c]) - lambda * abs_s[r * n + c] * (qr[c] - ql[c]));
        }
        out[r] = acc;
    }
}

/// `G = sum_r A~^1_{rkl} D_{jr} + A~^2_{jrl} D_{kr} + A~^3_{jkr} D_{lr}`,
/// laid out `[node][n_eq * n_eq]`.
pub fn precompute_g<T: Real>(ale: &AleMatrices<T>, rule: &QuadratureRule<T>) -> Vec<T> {
    let n = rule.n_points();
    let nn = n * n * n;
    let mm = ale.n_eq * ale.n_eq;
    let mut g = vec![T::zero(); nn * mm];
    let mut comp = vec![T::zero(); nn * mm];
    let mut tmp = vec![T::zero(); nn * mm];
    for dir in 0..3 {
        for node in 0..nn {
            comp[node * mm..(node + 1) * mm].copy_from_slice(ale.contravariant_at(node, dir));
        }
        apply_along(rule.d(), n, dir, mm, &comp, &mut tmp);
        for (a, b) in g.iter_mut().zip(&tmp) {
            *a = *a + *b;
        }
    }
    g
}

/// [`precompute_g`] for constant coefficient matrices `a` (three row-major
/// blocks): `G = sum_j (sum_i D_i J a^i_j) A_j`, differentiating only the
/// metric terms.
pub fn precompute_g_constant<T: Real>(geometry: &GeometryAtTime<T>, a: &[T], n_eq: usize, rule: &QuadratureRule<T>) -> Vec<T> {
    let n = rule.n_points();
    let nn = n * n * n;
    let mm = n_eq * n_eq;
    let mut div = vec![T::zero(); nn * 3];
    let mut comp = vec![T::zero(); nn * 3];
    let mut tmp = vec![T::zero(); nn * 3];
    for dir in 0..3 {
        for (c, ja) in comp.chunks_exact_mut(3).zip(&geometry.contravariant) {
            c.copy_from_slice(&ja[dir]);
        }
        apply_along(rule.d(), n, dir, 3, &comp, &mut tmp);
        for (a, b) in div.iter_mut().zip(&tmp) {
            *a = *a + *b;
        }
    }
    let mut g = vec![T::zero(); nn * mm];
    for (gn, d) in g.chunks_exact_mut(mm).zip(div.chunks_exact(3)) {
        for (e, v) in gn.iter_mut().enumerate() {
            *v = d[0] * a[e] + d[1] * a[mm + e] + d[2] * a[2 * mm + e];
        }
    }
    g
}

/// Skew-form recovery: `Q_t = (H_t - J_t Q / 2) / J`, `(JQ)_t = H_t + J_t Q / 2`.
#[allow(clippy::too_many_arguments)]
pub fn recover_qdot<T: Real>(
    hdot: &[T],
    jdot: &[T],
    q: &[T],
    j: &[T],
    n_eq: usize,
    qdot: &mut [T],
    jq_dot: &mut [T],
    element: usize,
    t: T,
) -> Result<()> {
    let half = lit::<T>(0.5);
    for node in 0..j.len() {
        check_jacobian(j[node], element, node, t)?;
        for c in 0..n_eq {
            let i = node * n_eq + c;
            let corr = half * jdot[node] * q[i];
            qdot[i] = (hdot[i] - corr) / j[node];
            jq_dot[i] = hdot[i] + corr;
        }
    }
    Ok(())
}

/// Conservative-form recovery: `Q_t = ((JQ)_t - J_t Q) / J`.
#[allow(clippy::too_many_arguments)]
pub fn recover_qdot_conservative<T: Real>(
    jq_dot: &[T],
    jdot: &[T],
    q: &[T],
    j: &[T],
    n_eq: usize,
    qdot: &mut [T],
    element: usize,
    t: T,
) -> Result<()> {
    for node in 0..j.len() {
        check_jacobian(j[node], element, node, t)?;
        for c in 0..n_eq {
            let i = node * n_eq + c;
            qdot[i] = (jq_dot[i] - jdot[node] * q[i]) / j[node];
        }
    }
    Ok(())
}

fn check_jacobian<T: Real>(j: T, element: usize, node: usize, t: T) -> Result<()> {
    if j > T::zero() {
        Ok(())
    } else {
        Err(Error::NonPositiveJacobian {
            element,
            node,
            time: t.to_f64().unwrap_or(f64::NAN),
            value: j.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// Nodal states and the evolved Jacobian of every element, stored flat as
/// `[Q of all elements | J of all elements]` so it can be integrated directly.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField<T> {
    n_eq: usize,
    nodes: usize,
    elements: usize,
    data: Vec<T>,
}

impl<T: Real> SolutionField<T> {
    pub fn zeros(n_eq: usize, nodes: usize, elements: usize) -> Self {
        Self {
            n_eq,
            nodes,
            elements,
            data: vec![T::zero(); elements * nodes * (n_eq + 1)],
        }
    }

    pub fn from_data(n_eq: usize, nodes: usize, elements: usize, data: Vec<T>) -> Result<Self> {
        let expected = elements * nodes * (n_eq + 1);
        if data.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            n_eq,
            nodes,
            elements,
            data,
        })
    }

    pub fn n_eq(&self) -> usize {
        self.n_eq
    }

    pub fn nodes_per_element(&self) -> usize {
        self.nodes
    }

    pub fn n_elements(&self) -> usize {
        self.elements
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    fn q_len(&self) -> usize {
        self.elements * self.nodes * self.n_eq
    }

    pub fn q_all(&self) -> &[T] {
        &self.data[..self.q_len()]
    }

    pub fn j_all(&self) -> &[T] {
        &self.data[self.q_len()..]
    }

    pub fn q(&self, e: usize) -> &[T] {
        let s = self.nodes * self.n_eq;
        &self.data[e * s..(e + 1) * s]
    }

    pub fn q_mut(&mut self, e: usize) -> &mut [T] {
        let s = self.nodes * self.n_eq;
        &mut self.data[e * s..(e + 1) * s]
    }

    pub fn j(&self, e: usize) -> &[T] {
        let off = self.q_len();
        &self.data[off + e * self.nodes..off + (e + 1) * self.nodes]
    }

    pub fn j_mut(&mut self, e: usize) -> &mut [T] {
        let off = self.q_len();
        &mut self.data[off + e * self.nodes..off + (e + 1) * self.nodes]
    }

    /// `[JQ | J]`: the flat state with every `Q` weighted by its node's `J`.
    pub fn volume_weighted(&self) -> Vec<T> {
        let mut out = self.data.clone();
        let (jq, j) = out.split_at_mut(self.q_len());
        scale_by_jacobian(jq, j, self.n_eq, |a, b| a * b);
        out
    }

    /// Inverse of [`Self::volume_weighted`].
    pub fn from_volume_weighted(n_eq: usize, nodes: usize, elements: usize, data: Vec<T>) -> Result<Self> {
        let mut field = Self::from_data(n_eq, nodes, elements, data)?;
        let (q, j) = field.data.split_at_mut(elements * nodes * n_eq);
        scale_by_jacobian(q, j, n_eq, |a, b| a / b);
        Ok(field)
    }
}

fn scale_by_jacobian<T: Real>(q: &mut [T], j: &[T], n_eq: usize, op: impl Fn(T, T) -> T) {
    for (qn, &jn) in q.chunks_exact_mut(n_eq).zip(j) {
        for v in qn {
            *v = op(*v, jn);
        }
    }
}

/// Traces and numerical flux on one unique face, indexed by face node
/// `a + n b`. Left is the minus side along the face's reference axis.
#[derive(Debug, Clone, Default)]
pub struct FaceTrace<T> {
    pub ql: Vec<T>,
    pub qr: Vec<T>,
    /// `J a^i` of the reference direction normal to the face.
    pub normal: Vec<Vec3<T>>,
    /// `J a^i . x_t`.
    pub beta: Vec<T>,
    pub flux: Vec<T>,
}

/// Geometry-dependent data of one element at the current stage time.
#[derive(Debug, Clone)]
pub struct ElementGeometry<T> {
    pub geometry: GeometryAtTime<T>,
    pub ale: AleMatrices<T>,
    pub g: Vec<T>,
    pub jdot: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct DiscretizationOptions<T> {
    pub flux: FluxKind,
    pub formulation: Formulation,
    pub boundary: BoundaryCondition<T>,
}

impl<T> Default for DiscretizationOptions<T> {
    fn default() -> Self {
        Self {
            flux: FluxKind::Upwind,
            formulation: Formulation::Skew,
            boundary: BoundaryCondition::Zero,
        }
    }
}

/// The semidiscrete DGSEM-ALE operator on a mesh.
pub struct Discretization<T, S> {
    mesh: Mesh<T>,
    system: S,
    options: DiscretizationOptions<T>,
    element_faces: Vec<[usize; 6]>,
    watertight: Vec<((usize, usize), (usize, usize))>,
    geometry: Vec<Option<ElementGeometry<T>>>,
    traces: Vec<FaceTrace<T>>,
    hdot: Vec<T>,
    jq_dot: Vec<T>,
    state_buffer: Vec<T>,
}

struct Scratch<T> {
    flux: Vec<T>,
    dq: Vec<T>,
    tmp: Vec<T>,
    acc: Vec<T>,
}

impl<T: Real, S: SymmetricSystem<T>> Discretization<T, S> {
    pub fn new(mesh: Mesh<T>, system: S, options: DiscretizationOptions<T>) -> Self {
        let mut element_faces = vec![[usize::MAX; 6]; mesh.n_elements()];
        for (f, face) in mesh.faces().iter().enumerate() {
            match *face {
                MeshFace::Interior {
                    minus: (em, fm),
                    plus: (ep, fp),
                    ..
                } => {
                    element_faces[em][fm] = f;
                    element_faces[ep][fp] = f;
                }
                MeshFace::Boundary { element, face } => element_faces[element][face] = f,
            }
        }
        let n = mesh.rule().n_points();
        let m = system.n_eq();
        let traces = vec![
            FaceTrace {
                ql: vec![T::zero(); n * n * m],
                qr: vec![T::zero(); n * n * m],
                normal: vec![[T::zero(); 3]; n * n],
                beta: vec![T::zero(); n * n],
                flux: vec![T::zero(); n * n * m],
            };
            mesh.faces().len()
        ];
        let total = mesh.n_elements() * mesh.nodes_per_element() * m;
        let geometry = (0..mesh.n_elements()).map(|_| None).collect();
        let watertight = mesh.watertight_pairs();
        Self {
            mesh,
            system,
            options,
            element_faces,
            watertight,
            geometry,
            traces,
            hdot: vec![T::zero(); total],
            jq_dot: vec![T::zero(); total],
            state_buffer: Vec::new(),
        }
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn system(&self) -> &S {
        &self.system
    }

    pub fn options(&self) -> &DiscretizationOptions<T> {
        &self.options
    }

    pub fn rule(&self) -> &QuadratureRule<T> {
        self.mesh.rule()
    }

    pub fn n_eq(&self) -> usize {
        self.system.n_eq()
    }

    /// State sampled from `f` at the nodal positions at `t`, with `J` from geometry.
    pub fn project(&self, f: &dyn StateFunction<T>, t: T) -> Result<SolutionField<T>> {
        let m = self.n_eq();
        let nn = self.mesh.nodes_per_element();
        let mut field = SolutionField::zeros(m, nn, self.mesh.n_elements());
        for e in 0..self.mesh.n_elements() {
            let geo = self.mesh.geometry_at(e, t)?;
            for (node, x) in geo.positions.iter().enumerate() {
                f.evaluate(*x, t, &mut field.q_mut(e)[node * m..(node + 1) * m]);
            }
            field.j_mut(e).copy_from_slice(&geo.jacobian);
        }
        Ok(field)
    }

    /// Geometry of every element at `t`; static elements are computed once.
    /// Face metrics are made watertight before the ALE matrices, `G` and
    /// `J_t` are derived from them.
    pub fn update_geometry(&mut self, t: T) -> Result<()> {
        let mesh = &self.mesh;
        let system = &self.system;
        let rule = mesh.rule();
        let n = rule.n_points();
        let cached = &self.geometry;
        let constant = system.has_constant_coefficients().then(|| {
            let m = system.n_eq();
            let mut a = vec![T::zero(); 3 * m * m];
            system.coefficient_matrices([T::zero(); 3], &mut a);
            a
        });
        let mut fresh: Vec<Option<GeometryAtTime<T>>> = (0..mesh.n_elements())
            .into_par_iter()
            .map(|e| {
                if cached[e].is_some() && !mesh.elements()[e].is_moving() {
                    Ok(None)
                } else {
                    mesh.geometry_at(e, t).map(Some)
                }
            })
            .collect::<Result<_>>()?;
        for &((se, sf), (de, df)) in &self.watertight {
            if fresh[de].is_none() {
                continue;
            }
            let mut dst = fresh[de].take().expect("checked");
            let src = fresh[se]
                .as_ref()
                .or_else(|| cached[se].as_ref().map(|g| &g.geometry))
                .expect("source geometry evaluated");
            copy_face_normals(src, sf, &mut dst, df, n);
            fresh[de] = Some(dst);
        }
        self.geometry
            .par_iter_mut()
            .zip(fresh.into_par_iter())
            .enumerate()
            .for_each(|(e, (slot, geo))| {
                let Some(geometry) = geo else { return };
                let mut ale = slot.take().map(|g| g.ale).unwrap_or_default();
                ale.fill(&geometry, system);
                let g = match &constant {
                    Some(a) => precompute_g_constant(&geometry, a, system.n_eq(), rule),
                    None => precompute_g(&ale, rule),
                };
                let jdot = if mesh.elements()[e].is_moving() {
                    jdot_pointwise(&gcl_flux(&geometry), rule)
                } else {
                    vec![T::zero(); geometry.jacobian.len()]
                };
                *slot = Some(ElementGeometry {
                    geometry,
                    ale,
                    g,
                    jdot,
                });
            });
        Ok(())
    }

    pub fn element_geometry(&self, e: usize) -> Option<&ElementGeometry<T>> {
        self.geometry[e].as_ref()
    }

    /// Face traces and numerical fluxes for `state` at `t`. Requires
    /// [`Self::update_geometry`] at the same time.
    pub fn gather_traces(&mut self, state: &[T], t: T) -> Result<()> {
        let n = self.rule().n_points();
        let m = self.n_eq();
        let nn = self.mesh.nodes_per_element();
        let lambda: T = self.options.flux.lambda();
        let geometry = &self.geometry;
        let system = &self.system;
        let faces = self.mesh.faces();
        let boundary = &self.options.boundary;
        self.traces
            .par_iter_mut()
            .zip(faces.par_iter())
            .try_for_each(|(tr, face)| -> Result<()> {
                let (owner, owner_face, interior) = match *face {
                    MeshFace::Interior {
                        minus: (em, fm),
                        plus: (ep, fp),
                        ..
                    } => (em, fm, Some((ep, fp))),
                    MeshFace::Boundary { element, face } => (element, face, None),
                };
                let og = geometry[owner]
                    .as_ref()
                    .ok_or_else(|| Error::Geometry("geometry not evaluated".into()))?;
                let dir = owner_face / 2;
                let q_owner = &state[owner * nn * m..(owner + 1) * nn * m];
                let mut abs_s = vec![T::zero(); m * m];
                let mut ext = vec![T::zero(); m];
                let mut out = vec![T::zero(); m];
                for b in 0..n {
                    for a in 0..n {
                        let fnode = a + n * b;
                        let node = face_node(n, owner_face, a, b);
                        let alpha = og.geometry.contravariant[node][dir];
                        let beta = og.ale.beta[node][dir];
                        let x = og.geometry.positions[node];
                        tr.normal[fnode] = alpha;
                        tr.beta[fnode] = beta;
                        let local = &q_owner[node * m..(node + 1) * m];
                        let lam = match interior {
                            Some((ep, fp)) => {
                                let pnode = face_node(n, fp, a, b);
                                tr.ql[fnode * m..(fnode + 1) * m].copy_from_slice(local);
                                tr.qr[fnode * m..(fnode + 1) * m]
                                    .copy_from_slice(&state[(ep * nn + pnode) * m..(ep * nn + pnode + 1) * m]);
                                lambda
                            }
                            None => {
                                match boundary {
                                    BoundaryCondition::Zero => ext.fill(T::zero()),
                                    BoundaryCondition::Exact(f) => f.evaluate(x, t, &mut ext),
                                }
                                let (l, r) = if owner_face % 2 == 1 { (local, &ext[..]) } else { (&ext[..], local) };
                                tr.ql[fnode * m..(fnode + 1) * m].copy_from_slice(l);
                                tr.qr[fnode * m..(fnode + 1) * m].copy_from_slice(r);
                                T::one()
                            }
                        };
                        system.abs_normal_matrix(x, alpha, beta, &mut abs_s)?;
                        let s = og.ale.moving_at(node, dir);
                        let (ql, qr) = (&tr.ql[fnode * m..(fnode + 1) * m], &tr.qr[fnode * m..(fnode + 1) * m]);
                        riemann_flux(ql, qr, s, &abs_s, lam, &mut out);
                        tr.flux[fnode * m..(fnode + 1) * m].copy_from_slice(&out);
                    }
                }
                Ok(())
            })
    }

    pub fn traces(&self) -> &[FaceTrace<T>] {
        &self.traces
    }

    /// `H_t` (skew) or `(JQ)_t` (standard) from the last evaluation.
    pub fn last_hdot(&self) -> &[T] {
        &self.hdot
    }

    /// `(JQ)_t` from the last evaluation.
    pub fn last_jq_dot(&self) -> &[T] {
        &self.jq_dot
    }

    /// Right-hand side for the volume-weighted state `[JQ | J]`, giving
    /// `[(JQ)_t | J_t]`. Advancing `JQ` keeps the totals `sum W JQ` linear in
    /// the state, so a Runge-Kutta step conserves them to roundoff.
    pub fn evaluate_volume_weighted(&mut self, t: T, state: &[T], rate: &mut [T]) -> Result<()> {
        let nq = self.jq_dot.len();
        if state.len() != nq + nq / self.n_eq() || rate.len() != state.len() {
            return Err(Error::SizeMismatch {
                expected: nq + nq / self.n_eq(),
                found: state.len().min(rate.len()),
            });
        }
        let mut q = std::mem::take(&mut self.state_buffer);
        q.clear();
        q.extend_from_slice(state);
        let (qs, js) = q.split_at_mut(nq);
        scale_by_jacobian(qs, js, self.n_eq(), |a, b| a / b);
        let outcome = self.evaluate(t, &q, rate);
        self.state_buffer = q;
        outcome?;
        rate[..nq].copy_from_slice(&self.jq_dot);
        Ok(())
    }

    /// Full semidiscrete right-hand side for the flat `[Q | J]` state.
    pub fn evaluate(&mut self, t: T, state: &[T], rate: &mut [T]) -> Result<()> {
        let m = self.n_eq();
        let nn = self.mesh.nodes_per_element();
        let ne = self.mesh.n_elements();
        if state.len() != ne * nn * (m + 1) || rate.len() != state.len() {
            return Err(Error::SizeMismatch {
                expected: ne * nn * (m + 1),
                found: state.len().min(rate.len()),
            });
        }
        self.update_geometry(t)?;
        self.gather_traces(state, t)?;

        let n = self.rule().n_points();
        let rule = self.mesh.rule();
        let formulation = self.options.formulation;
        let geometry = &self.geometry;
        let traces = &self.traces;
        let element_faces = &self.element_faces;
        let (q_state, j_state) = state.split_at(ne * nn * m);
        let (q_rate, j_rate) = rate.split_at_mut(ne * nn * m);

        q_rate
            .par_chunks_mut(nn * m)
            .zip(j_rate.par_chunks_mut(nn))
            .zip(self.hdot.par_chunks_mut(nn * m))
            .zip(self.jq_dot.par_chunks_mut(nn * m))
            .enumerate()
            .try_for_each_init(
                || Scratch {
                    flux: vec![T::zero(); nn * m],
                    dq: vec![T::zero(); nn * m],
                    tmp: vec![T::zero(); nn * m],
                    acc: vec![T::zero(); nn * m],
                },
                |sc, (e, (((qd, jd), hd), jqd))| -> Result<()> {
                    let eg = geometry[e].as_ref().expect("geometry evaluated");
                    let q = &q_state[e * nn * m..(e + 1) * nn * m];
                    let j = &j_state[e * nn..(e + 1) * nn];
                    let faces = &element_faces[e];
                    element_volume(formulation, n, m, rule, eg, q, sc, hd);
                    add_surface(n, m, rule, faces, traces, hd);
                    jd.copy_from_slice(&eg.jdot);
                    match formulation {
                        Formulation::Skew => recover_qdot(hd, &eg.jdot, q, j, m, qd, jqd, e, t),
                        Formulation::Standard => {
                            jqd.copy_from_slice(hd);
                            recover_qdot_conservative(hd, &eg.jdot, q, j, m, qd, e, t)
                        }
                    }
                },
            )
    }
}

/// `y = A x` for a row-major square block `a`.
#[inline(always)]
fn matvec<T: Real>(a: &[T], x: &[T], y: &mut [T]) {
    for (yr, row) in y.iter_mut().zip(a.chunks_exact(x.len())) {
        *yr = row.iter().zip(x).fold(T::zero(), |s, (&a, &b)| s + a * b);
    }
}

/// Volume terms into `out`; `out` is overwritten.
#[allow(clippy::too_many_arguments)]
fn element_volume<T: Real>(
    formulation: Formulation,
    n: usize,
    m: usize,
    rule: &QuadratureRule<T>,
    eg: &ElementGeometry<T>,
    q: &[T],
    sc: &mut Scratch<T>,
    out: &mut [T],
) {
    let dhat = rule.dhat();
    let half = lit::<T>(0.5);
    let mm = m * m;
    sc.acc.fill(T::zero());
    for dir in 0..3 {
        let blocks = || eg.ale.moving.chunks_exact(3 * mm).map(|b| &b[dir * mm..(dir + 1) * mm]);
        // Contravariant ALE flux A^dir Q at every node.
        for ((f, qn), a) in sc.flux.chunks_exact_mut(m).zip(q.chunks_exact(m)).zip(blocks()) {
            matvec(a, qn, f);
        }
        apply_along(dhat, n, dir, m, &sc.flux, &mut sc.tmp);
        for (acc, v) in sc.acc.iter_mut().zip(&sc.tmp) {
            *acc = *acc + *v;
        }
        if formulation == Formulation::Skew {
            // Non-conservative part: A^dir at the target node times Dhat Q.
            apply_along(dhat, n, dir, m, q, &mut sc.dq);
            for ((f, dqn), a) in sc.tmp.chunks_exact_mut(m).zip(sc.dq.chunks_exact(m)).zip(blocks()) {
                matvec(a, dqn, f);
            }
            for (acc, v) in sc.acc.iter_mut().zip(&sc.tmp) {
                *acc = *acc + *v;
            }
        }
    }
    match formulation {
        Formulation::Standard => {
            for (o, a) in out.iter_mut().zip(&sc.acc) {
                *o = -*a;
            }
        }
        Formulation::Skew => {
            for (((o, acc), g), qn) in out
                .chunks_exact_mut(m)
                .zip(sc.acc.chunks_exact(m))
                .zip(eg.g.chunks_exact(mm))
                .zip(q.chunks_exact(m))
            {
                matvec(g, qn, o);
                for (o, a) in o.iter_mut().zip(acc) {
                    *o = -half * (*a + *o);
                }
            }
        }
    }
}

/// Adds `-(F*(+1) l(+1) - F*(-1) l(-1)) / w` in each direction.
fn add_surface<T: Real>(
    n: usize,
    m: usize,
    rule: &QuadratureRule<T>,
    faces: &[usize; 6],
    traces: &[FaceTrace<T>],
    out: &mut [T],
) {
    let w = rule.weights();
    let (w0, wn) = (w[0], w[n - 1]);
    for dir in 0..3 {
        for b in 0..n {
            for a in 0..n {
                let fnode = a + n * b;
                let lo = face_node(n, 2 * dir, a, b);
                let hi = face_node(n, 2 * dir + 1, a, b);
                let flo = &traces[faces[2 * dir]].flux[fnode * m..(fnode + 1) * m];
                let fhi = &traces[faces[2 * dir + 1]].flux[fnode * m..(fnode + 1) * m];
                for c in 0..m {
                    out[lo * m + c] = out[lo * m + c] + flo[c] / w0;
                    out[hi * m + c] = out[hi * m + c] - fhi[c] / wn;
                }
            }
        }
    }
}

/// Index helper used by diagnostics and tests: weight of node in an element.
pub fn node_weight<T: Real>(rule: &QuadratureRule<T>, node: usize) -> T {
    let w = rule.weights();
    let [i, j, k] = node_coords(rule.n_points(), node);
    w[i] * w[j] * w[k]
}
