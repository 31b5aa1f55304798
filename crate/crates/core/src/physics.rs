//! Symmetric hyperbolic systems, their contravariant and ALE coefficient
//! matrices, normal-matrix eigenstructure and analytic states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{dot, norm, GeometryAtTime, Vec3};
use crate::scalar::{lit, Real};

/// A linear system `q_t + sum_i (A_i(x) q)_{x_i} = 0` with symmetric `A_i`.
pub trait SymmetricSystem<T: Real>: Send + Sync {
    fn n_eq(&self) -> usize;

    /// Writes `A_1, A_2, A_3` at `x` into `out`, each row-major `n_eq x n_eq`.
    fn coefficient_matrices(&self, x: Vec3<T>, out: &mut [T]);

    fn has_constant_coefficients(&self) -> bool {
        false
    }

    /// Eigensystem of `S = sum_j alpha_j A_j(x) - beta I`.
    fn normal_eigensystem(&self, x: Vec3<T>, alpha: Vec3<T>, beta: T) -> Result<NormalEigensystem<T>> {
        let s = self.normal_matrix(x, alpha, beta);
        jacobi_eigensystem(&s, self.n_eq())
    }

    fn normal_matrix(&self, x: Vec3<T>, alpha: Vec3<T>, beta: T) -> Vec<T> {
        let n = self.n_eq();
        let mut a = vec![T::zero(); 3 * n * n];
        self.coefficient_matrices(x, &mut a);
        let mut s = vec![T::zero(); n * n];
        for (j, &aj) in alpha.iter().enumerate() {
            for (dst, &src) in s.iter_mut().zip(&a[j * n * n..(j + 1) * n * n]) {
                *dst = *dst + aj * src;
            }
        }
        for i in 0..n {
            s[i * n + i] = s[i * n + i] - beta;
        }
        s
    }

    /// Writes `|S|` into `out`.
    fn abs_normal_matrix(&self, x: Vec3<T>, alpha: Vec3<T>, beta: T, out: &mut [T]) -> Result<()> {
        out.copy_from_slice(&self.normal_eigensystem(x, alpha, beta)?.abs());
        Ok(())
    }
}

/// The four-variable acoustic wave system in `(p, u, v, w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSystem<T> {
    pub c: T,
}

/// Builds the wave system with speed `c`.
pub fn wave_system<T: Real>(c: T) -> Result<WaveSystem<T>> {
    if !(c > T::zero()) {
        return Err(Error::InvalidConfig(format!("wave speed must be positive, got {c}")));
    }
    Ok(WaveSystem { c })
}

impl<T: Real> WaveSystem<T> {
    /// Closed form for `S = alpha . A - beta I`: eigenvalues `-beta` (twice)
    /// and `-beta +- c |alpha|`.
    pub fn analytic_eigensystem(&self, alpha: Vec3<T>, beta: T) -> NormalEigensystem<T> {
        let n = 4;
        let a = norm(alpha);
        let half = lit::<T>(0.5);
        let r = half.sqrt();
        let unit = if a > T::zero() {
            alpha.map(|v| v / a)
        } else {
            [T::one(), T::zero(), T::zero()]
        };
        let (t1, t2) = orthonormal_complement(unit);
        let eigenvalues = vec![-beta + self.c * a, -beta - self.c * a, -beta, -beta];
        let columns: [[T; 4]; 4] = [
            [r, r * unit[0], r * unit[1], r * unit[2]],
            [r, -r * unit[0], -r * unit[1], -r * unit[2]],
            [T::zero(), t1[0], t1[1], t1[2]],
            [T::zero(), t2[0], t2[1], t2[2]],
        ];
        let mut vectors = vec![T::zero(); n * n];
        let mut inverse = vec![T::zero(); n * n];
        for (col, v) in columns.iter().enumerate() {
            for row in 0..n {
                vectors[row * n + col] = v[row];
                inverse[col * n + row] = v[row];
            }
        }
        NormalEigensystem {
            n,
            eigenvalues,
            vectors,
            inverse,
        }
    }
}

fn orthonormal_complement<T: Real>(u: Vec3<T>) -> (Vec3<T>, Vec3<T>) {
    let pick = if u[0].abs() < lit(0.9) {
        [T::one(), T::zero(), T::zero()]
    } else {
        [T::zero(), T::one(), T::zero()]
    };
    let d = dot(pick, u);
    let t: Vec3<T> = std::array::from_fn(|i| pick[i] - d * u[i]);
    let tn = norm(t);
    let t1 = t.map(|v| v / tn);
    let t2 = crate::mesh::cross(u, t1);
    (t1, t2)
}

impl<T: Real> SymmetricSystem<T> for WaveSystem<T> {
    fn n_eq(&self) -> usize {
        4
    }

    fn coefficient_matrices(&self, _x: Vec3<T>, out: &mut [T]) {
        out[..48].fill(T::zero());
        for i in 0..3 {
            let m = &mut out[16 * i..16 * (i + 1)];
            m[i + 1] = self.c;
            m[(i + 1) * 4] = self.c;
        }
    }

    fn has_constant_coefficients(&self) -> bool {
        true
    }

    fn normal_eigensystem(&self, _x: Vec3<T>, alpha: Vec3<T>, beta: T) -> Result<NormalEigensystem<T>> {
        Ok(self.analytic_eigensystem(alpha, beta))
    }

    fn abs_normal_matrix(&self, _x: Vec3<T>, alpha: Vec3<T>, beta: T, out: &mut [T]) -> Result<()> {
        // |S| = |l+| P+ + |l-| P- + |beta| P0 with the spectral projectors.
        let a = norm(alpha);
        let half = lit::<T>(0.5);
        let lp = (-beta + self.c * a).abs();
        let lm = (-beta - self.c * a).abs();
        let l0 = beta.abs();
        let unit = if a > T::zero() {
            alpha.map(|v| v / a)
        } else {
            [T::zero(); 3]
        };
        let sum = half * (lp + lm);
        let diff = half * (lp - lm);
        out[0] = sum;
        for i in 0..3 {
            out[i + 1] = diff * unit[i];
            out[(i + 1) * 4] = diff * unit[i];
            for j in 0..3 {
                let uu = unit[i] * unit[j];
                let id = if i == j { T::one() } else { T::zero() };
                out[(i + 1) * 4 + j + 1] = sum * uu + l0 * (id - uu);
            }
        }
        if a == T::zero() {
            for i in 1..4 {
                out[i * 4 + i] = l0;
            }
        }
        Ok(())
    }
}

/// Eigen-decomposition `S = P diag(lambda) P^{-1}` of a symmetric normal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEigensystem<T> {
    pub n: usize,
    pub eigenvalues: Vec<T>,
    /// Row-major; column `k` is the eigenvector of `eigenvalues[k]`.
    pub vectors: Vec<T>,
    pub inverse: Vec<T>,
}

impl<T: Real> NormalEigensystem<T> {
    fn assemble(&self, f: impl Fn(T) -> T) -> Vec<T> {
        let n = self.n;
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = T::zero();
                for k in 0..n {
                    acc = acc + self.vectors[i * n + k] * f(self.eigenvalues[k]) * self.inverse[k * n + j];
                }
                out[i * n + j] = acc;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Vec<T> {
        self.assemble(|l| l)
    }

    pub fn abs(&self) -> Vec<T> {
        self.assemble(|l| l.abs())
    }

    pub fn positive(&self) -> Vec<T> {
        self.assemble(|l| l.max(T::zero()))
    }

    pub fn negative(&self) -> Vec<T> {
        self.assemble(|l| l.min(T::zero()))
    }
}

/// Cyclic Jacobi eigensolver for a symmetric row-major `n x n` matrix.
pub fn jacobi_eigensystem<T: Real>(s: &[T], n: usize) -> Result<NormalEigensystem<T>> {
    if s.len() != n * n {
        return Err(Error::SizeMismatch {
            expected: n * n,
            found: s.len(),
        });
    }
    let mut a = s.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let scale = a.iter().fold(T::zero(), |m, x| m.max(x.abs())).max(T::min_positive_value());
    let tol = T::epsilon() * scale * lit(1e-2);
    let off = |a: &[T]| {
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc = acc + a[i * n + j] * a[i * n + j];
                }
            }
        }
        acc.sqrt()
    };
    let mut converged = false;
    for _sweep in 0..100 {
        if off(&a) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (lit::<T>(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - sn * akq;
                    a[k * n + q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - sn * aqk;
                    a[q * n + k] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - sn * vkq;
                    v[k * n + q] = sn * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let residual = off(&a);
        // Roundoff floor: accept anything within a few ulps of the scale.
        if residual > T::epsilon() * scale * lit(16.0) {
            return Err(Error::Eigen {
                residual: residual.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    let eigenvalues = (0..n).map(|i| a[i * n + i]).collect();
    let mut inverse = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            inverse[j * n + i] = v[i * n + j];
        }
    }
    Ok(NormalEigensystem {
        n,
        eigenvalues,
        vectors: v,
        inverse,
    })
}

/// Per-node contravariant and ALE coefficient matrices of one element.
#[derive(Debug, Clone, Default)]
pub struct AleMatrices<T> {
    pub n_eq: usize,
    /// `A~^i = sum_j (J a^i)_j A_j`, indexed `[node][i][n_eq * n_eq]`.
    pub contravariant: Vec<T>,
    /// `A^i = A~^i - (J a^i . x_t) I`, same layout.
    pub moving: Vec<T>,
    /// `beta^i = J a^i . x_t`.
    pub beta: Vec<Vec3<T>>,
}

impl<T: Real> AleMatrices<T> {
    #[inline(always)]
    pub fn contravariant_at(&self, node: usize, dir: usize) -> &[T] {
        let nn = self.n_eq * self.n_eq;
        let off = (node * 3 + dir) * nn;
        &self.contravariant[off..off + nn]
    }

    #[inline(always)]
    pub fn moving_at(&self, node: usize, dir: usize) -> &[T] {
        let nn = self.n_eq * self.n_eq;
        let off = (node * 3 + dir) * nn;
        &self.moving[off..off + nn]
    }

    /// Refills from `geometry`, reusing storage.
    pub fn fill<S: SymmetricSystem<T> + ?Sized>(&mut self, geometry: &GeometryAtTime<T>, system: &S) {
        let n = system.n_eq();
        let nn = n * n;
        let nodes = geometry.positions.len();
        self.n_eq = n;
        self.contravariant.resize(nodes * 3 * nn, T::zero());
        self.moving.resize(nodes * 3 * nn, T::zero());
        self.beta.resize(nodes, [T::zero(); 3]);
        let mut a = vec![T::zero(); 3 * nn];
        let constant = system.has_constant_coefficients();
        if constant {
            system.coefficient_matrices(geometry.positions[0], &mut a);
        }
        for node in 0..nodes {
            if !constant {
                system.coefficient_matrices(geometry.positions[node], &mut a);
            }
            let ja = &geometry.contravariant[node];
            let xt = geometry.velocities[node];
            for i in 0..3 {
                let off = (node * 3 + i) * nn;
                let beta = dot(ja[i], xt);
                self.beta[node][i] = beta;
                let ct = &mut self.contravariant[off..off + nn];
                for (e, dst) in ct.iter_mut().enumerate() {
                    *dst = ja[i][0] * a[e] + ja[i][1] * a[nn + e] + ja[i][2] * a[2 * nn + e];
                }
                let mv = &mut self.moving[off..off + nn];
                mv.copy_from_slice(&self.contravariant[off..off + nn]);
                for r in 0..n {
                    mv[r * n + r] = mv[r * n + r] - beta;
                }
            }
        }
    }
}

/// Contravariant and ALE matrices at every node of `geometry`.
pub fn ale_matrices<T: Real, S: SymmetricSystem<T> + ?Sized>(
    geometry: &GeometryAtTime<T>,
    system: &S,
) -> AleMatrices<T> {
    let mut m = AleMatrices::default();
    m.fill(geometry, system);
    m
}

/// Eigensystem of a symmetric normal matrix given explicitly.
pub fn normal_eigensystem<T: Real>(s: &[T], n: usize) -> Result<NormalEigensystem<T>> {
    jacobi_eigensystem(s, n)
}

/// A state known everywhere in space and time (initial, boundary or exact data).
pub trait StateFunction<T: Real>: Send + Sync {
    fn evaluate(&self, x: Vec3<T>, t: T, out: &mut [T]);
}

/// How the Gaussian argument of the plane wave is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseForm {
    /// `k . (x - x0) - c t`.
    #[default]
    Linear,
    /// `k_x (x - x0)^2 + k_y (y - y0)^2 + k_z (z - z0)^2 - c t`.
    SquaredCoordinates,
}

/// Gaussian plane wave with amplitude `(1, k/c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave<T> {
    pub k: Vec3<T>,
    pub x0: Vec3<T>,
    pub width: T,
    pub c: T,
    pub phase_form: PhaseForm,
}

impl<T: Real> PlaneWave<T> {
    pub fn new(k: Vec3<T>, x0: Vec3<T>, width: T, c: T) -> Result<Self> {
        let kk = dot(k, k);
        if (kk - T::one()).abs() > lit(1e-12) {
            return Err(Error::InvalidConfig(format!("wave vector must be unit length, |k|^2 = {kk}")));
        }
        if !(width > T::zero()) || !(c > T::zero()) {
            return Err(Error::InvalidConfig("plane wave width and speed must be positive".into()));
        }
        Ok(Self {
            k,
            x0,
            width,
            c,
            phase_form: PhaseForm::Linear,
        })
    }

    pub fn with_phase_form(mut self, form: PhaseForm) -> Self {
        self.phase_form = form;
        self
    }

    pub fn phase(&self, x: Vec3<T>, t: T) -> T {
        let r: Vec3<T> = std::array::from_fn(|i| x[i] - self.x0[i]);
        let spatial = match self.phase_form {
            PhaseForm::Linear => dot(self.k, r),
            PhaseForm::SquaredCoordinates => dot(self.k, r.map(|v| v * v)),
        };
        spatial - self.c * t
    }

    pub fn state(&self, x: Vec3<T>, t: T) -> [T; 4] {
        let phi = self.phase(x, t) / self.width;
        let g = (-phi * phi).exp();
        [g, g * self.k[0] / self.c, g * self.k[1] / self.c, g * self.k[2] / self.c]
    }
}

/// Exact plane-wave state at `x`, `t`.
pub fn exact_plane_wave<T: Real>(wave: &PlaneWave<T>, x: Vec3<T>, t: T) -> [T; 4] {
    wave.state(x, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition<T> {
    PlaneWave(PlaneWave<T>),
    /// `p = exp(-ln 2 |x|^2 / width)`, velocities zero.
    SphericalPulse { width: T },
    ConstantPi,
    Zero,
}

impl<T: Real> InitialCondition<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::PlaneWave(_) => "plane_wave",
            Self::SphericalPulse { .. } => "spherical_pulse",
            Self::ConstantPi => "constant_pi",
            Self::Zero => "zero",
        }
    }
}

impl<T: Real> StateFunction<T> for InitialCondition<T> {
    fn evaluate(&self, x: Vec3<T>, t: T, out: &mut [T]) {
        match self {
            Self::PlaneWave(w) => out[..4].copy_from_slice(&w.state(x, t)),
            Self::SphericalPulse { width } => {
                let r2 = dot(x, x);
                out[0] = (-lit::<T>(2.0).ln() * r2 / *width).exp();
                out[1..4].fill(T::zero());
            }
            Self::ConstantPi => out[..4].fill(T::PI()),
            Self::Zero => out.fill(T::zero()),
        }
    }
}

/// Default parameterisation of a named initial condition.
pub fn initial_conditions<T: Real>(name: &str) -> Result<InitialCondition<T>> {
    match name {
        "plane_wave" => Ok(InitialCondition::PlaneWave(PlaneWave::new(
            [T::one(), T::zero(), T::zero()],
            [-T::one(), T::zero(), T::zero()],
            T::one(),
            T::one(),
        )?)),
        "spherical_pulse" => Ok(InitialCondition::SphericalPulse {
            width: lit(2.3_f64.powi(3)),
        }),
        "constant_pi" => Ok(InitialCondition::ConstantPi),
        "zero" => Ok(InitialCondition::Zero),
        other => Err(Error::UnknownName {
            kind: "initial condition",
            name: other.to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::QuadratureRule;
    use crate::mesh::{build_mesh, MeshConfig};
    use crate::tensor::{apply_along, node_coords};

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn wave_matrices_are_symmetric_couplings() {
        let sys = wave_system(1.0_f64).unwrap();
        let mut a = vec![0.0; 48];
        sys.coefficient_matrices([0.3, 0.1, -0.2], &mut a);
        assert_eq!(a[1], 1.0);
        assert_eq!(a[4], 1.0);
        assert_eq!(a.iter().filter(|v| **v != 0.0).count(), 6);
        for m in 0..3 {
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(a[16 * m + 4 * i + j], a[16 * m + 4 * j + i]);
                }
            }
        }
        assert!(wave_system(0.0_f64).is_err());
        assert!(wave_system(-1.0_f64).is_err());
    }

    #[test]
    fn unit_normal_eigenvalues_are_plus_minus_c_and_zero() {
        let sys = wave_system(1.0_f64).unwrap();
        let n = [0.48, 0.6, 0.64];
        let s = sys.normal_matrix([0.0; 3], n, 0.0);
        let mut ev = jacobi_eigensystem(&s, 4).unwrap().eigenvalues;
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [-1.0, 0.0, 0.0, 1.0];
        assert!(max_diff(&ev, &expect) < 1e-14);
    }

    #[test]
    fn abs_of_aligned_wave_matrix() {
        let sys = wave_system(2.0_f64).unwrap();
        let mut abs = vec![0.0; 16];
        sys.abs_normal_matrix([0.0; 3], [1.0, 0.0, 0.0], 0.0, &mut abs).unwrap();
        // c A_1 has eigenvectors (1, +-1, 0, 0)/sqrt 2 with values +-c.
        let expect = [2.0, 0., 0., 0., 0., 2.0, 0., 0., 0., 0., 0., 0., 0., 0., 0., 0.];
        assert!(max_diff(&abs, &expect) < 1e-15);
    }

    #[test]
    fn pure_mesh_velocity_normal_matrix() {
        let sys = wave_system(1.0_f64).unwrap();
        let beta = 0.7;
        let es = sys.normal_eigensystem([0.0; 3], [0.0; 3], beta).unwrap();
        let id: Vec<f64> = (0..16).map(|i| if i % 5 == 0 { 1.0 } else { 0.0 }).collect();
        assert!(max_diff(&es.abs(), &id.iter().map(|v| v * beta).collect::<Vec<_>>()) < 1e-15);
        assert!(max_diff(&es.positive(), &[0.0; 16]) < 1e-15);
        assert!(max_diff(&es.negative(), &id.iter().map(|v| -v * beta).collect::<Vec<_>>()) < 1e-15);
        let mut abs = vec![0.0; 16];
        sys.abs_normal_matrix([0.0; 3], [0.0; 3], beta, &mut abs).unwrap();
        assert!(max_diff(&abs, &es.abs()) < 1e-15);
    }

    #[test]
    fn analytic_and_jacobi_agree() {
        let sys = wave_system(1.3_f64).unwrap();
        for (alpha, beta) in [([0.3, -1.2, 0.5], 0.4), ([2.0, 0.1, 0.0], -1.9), ([0.0, 0.0, 0.7], 0.0)] {
            let s = sys.normal_matrix([0.0; 3], alpha, beta);
            let analytic = sys.analytic_eigensystem(alpha, beta);
            let jacobi = jacobi_eigensystem(&s, 4).unwrap();
            assert!(max_diff(&analytic.reconstruct(), &s) < 1e-13);
            assert!(max_diff(&jacobi.reconstruct(), &s) < 1e-13);
            assert!(max_diff(&analytic.abs(), &jacobi.abs()) < 1e-13);
            let mut fast = vec![0.0; 16];
            sys.abs_normal_matrix([0.0; 3], alpha, beta, &mut fast).unwrap();
            assert!(max_diff(&fast, &jacobi.abs()) < 1e-13);
            let split: Vec<f64> = analytic
                .positive()
                .iter()
                .zip(analytic.negative())
                .map(|(p, m)| p - m)
                .collect();
            assert!(max_diff(&split, &analytic.abs()) < 1e-13);
        }
    }

    #[test]
    fn ale_matrices_identity_and_translation() {
        let mesh: crate::mesh::Mesh<f64> = build_mesh(&MeshConfig::reference_cube(2)).unwrap();
        let sys = wave_system(1.0).unwrap();
        let mut geo = mesh.geometry_at(0, 0.0).unwrap();
        let ale = ale_matrices(&geo, &sys);
        let mut a = vec![0.0; 48];
        sys.coefficient_matrices([0.0; 3], &mut a);
        for node in 0..27 {
            for i in 0..3 {
                assert!(max_diff(ale.contravariant_at(node, i), &a[16 * i..16 * (i + 1)]) < 1e-14);
                assert!(max_diff(ale.moving_at(node, i), &a[16 * i..16 * (i + 1)]) < 1e-14);
            }
        }
        for v in geo.velocities.iter_mut() {
            *v = [1.0, 0.0, 0.0];
        }
        let ale = ale_matrices(&geo, &sys);
        let mut shifted = a[..16].to_vec();
        for r in 0..4 {
            shifted[r * 5] -= 1.0;
        }
        for node in 0..27 {
            assert!(max_diff(ale.moving_at(node, 0), &shifted) < 1e-14);
            assert!(max_diff(ale.moving_at(node, 1), &a[16..32]) < 1e-14);
            assert!(max_diff(ale.moving_at(node, 2), &a[32..48]) < 1e-14);
        }
    }

    #[test]
    fn ale_matrices_affine_stretch() {
        let cfg = MeshConfig {
            lower: [-2.0, -1.0, -1.0],
            upper: [2.0, 1.0, 1.0],
            ..MeshConfig::reference_cube(2)
        };
        let mesh: crate::mesh::Mesh<f64> = build_mesh(&cfg).unwrap();
        let sys = wave_system(1.0).unwrap();
        let ale = ale_matrices(&mesh.geometry_at(0, 0.0).unwrap(), &sys);
        let mut a = vec![0.0; 48];
        sys.coefficient_matrices([0.0; 3], &mut a);
        let scale = [1.0, 2.0, 2.0];
        for i in 0..3 {
            let want: Vec<f64> = a[16 * i..16 * (i + 1)].iter().map(|v| v * scale[i]).collect();
            assert!(max_diff(ale.contravariant_at(5, i), &want) < 1e-14);
        }
    }

    #[test]
    fn plane_wave_peak_decay_and_validation() {
        let k: [f64; 3] = [0.6, 0.8, 0.0];
        let w = PlaneWave::<f64>::new(k, [-1.0, 0.0, 0.0], 1.0, 1.0).unwrap();
        let s = w.state([-1.0, 0.0, 0.0], 0.0);
        assert_eq!(s, [1.0, 0.6, 0.8, 0.0]);
        let far = w.state([40.0, 30.0, 0.0], 0.0);
        assert!(far.iter().all(|v| v.abs() < 1e-300));
        assert!(PlaneWave::new([1.0, 1.0, 0.0], [0.0; 3], 1.0, 1.0).is_err());
        let printed = w.with_phase_form(PhaseForm::SquaredCoordinates);
        assert!((printed.phase([0.0, 1.0, 0.0], 0.5) - (0.6 + 0.8 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn plane_wave_solves_wave_equation_spectrally() {
        // Residual p_t + c div u and u_t + c grad p, spatial derivatives by D
        // at N = 12 on a small box, time derivatives analytic.
        let n_deg = 12;
        let rule = QuadratureRule::<f64>::lgl(n_deg).unwrap();
        let n = n_deg + 1;
        let half = 0.25;
        let k = [0.6, 0.0, 0.8];
        let w = PlaneWave::new(k, [-0.2, 0.0, 0.1], 1.0, 1.0).unwrap();
        let t = 0.3;
        let nodes: Vec<[f64; 3]> = (0..n * n * n)
            .map(|node| {
                let c = node_coords(n, node);
                std::array::from_fn(|d| half * rule.nodes()[c[d]])
            })
            .collect();
        let states: Vec<[f64; 4]> = nodes.iter().map(|x| w.state(*x, t)).collect();
        let comp = |c: usize| -> Vec<f64> { states.iter().map(|s| s[c]).collect() };
        let deriv = |f: &[f64], dir: usize| -> Vec<f64> {
            let mut out = vec![0.0; f.len()];
            apply_along(rule.d(), n, dir, 1, f, &mut out);
            out.iter().map(|v| v / half).collect()
        };
        let eps = 1e-6;
        let mut worst: f64 = 0.0;
        let dp = [deriv(&comp(0), 0), deriv(&comp(0), 1), deriv(&comp(0), 2)];
        let div: Vec<f64> = (0..nodes.len())
            .map(|i| deriv(&comp(1), 0)[i] + deriv(&comp(2), 1)[i] + deriv(&comp(3), 2)[i])
            .collect();
        for (i, x) in nodes.iter().enumerate() {
            let sp = w.state(*x, t + eps);
            let sm = w.state(*x, t - eps);
            let pt = (sp[0] - sm[0]) / (2.0 * eps);
            worst = worst.max((pt + div[i]).abs());
            for d in 0..3 {
                let ut = (sp[d + 1] - sm[d + 1]) / (2.0 * eps);
                worst = worst.max((ut + dp[d][i]).abs());
            }
        }
        // Central differences in time contribute O(eps^2) and roundoff/eps.
        assert!(worst < 1e-8, "residual {worst:e}");
    }

    #[test]
    fn named_initial_conditions() {
        let mut out = [0.0; 4];
        let pulse = initial_conditions::<f64>("spherical_pulse").unwrap();
        pulse.evaluate([0.0; 3], 0.0, &mut out);
        assert_eq!(out, [1.0, 0.0, 0.0, 0.0]);
        let r = 2.3_f64.powi(3).sqrt();
        pulse.evaluate([r, 0.0, 0.0], 0.0, &mut out);
        assert!((out[0] - 0.5).abs() < 1e-15);
        initial_conditions::<f64>("constant_pi")
            .unwrap()
            .evaluate([1.0, 2.0, 3.0], 5.0, &mut out);
        assert_eq!(out, [std::f64::consts::PI; 4]);
        assert!(matches!(
            initial_conditions::<f64>("vortex"),
            Err(Error::UnknownName { .. })
        ));
    }
}
