//! Williamson's low-storage third-order Runge-Kutta scheme.

use crate::error::{Error, Result};
use crate::physics::SymmetricSystem;
use crate::scalar::{lit, Real};
use crate::solver::Discretization;

/// A first-order system `y' = f(t, y)` on a flat state vector.
pub trait OdeSystem<T> {
    fn rhs(&mut self, t: T, y: &[T], dydt: &mut [T]) -> Result<()>;
}

impl<T: Real, S: SymmetricSystem<T>> OdeSystem<T> for Discretization<T, S> {
    fn rhs(&mut self, t: T, y: &[T], dydt: &mut [T]) -> Result<()> {
        self.evaluate(t, y, dydt)
    }
}

/// A discretisation advanced in the volume-weighted variables `[JQ | J]`.
pub struct VolumeWeighted<'a, T, S>(pub &'a mut Discretization<T, S>);

impl<T: Real, S: SymmetricSystem<T>> OdeSystem<T> for VolumeWeighted<'_, T, S> {
    fn rhs(&mut self, t: T, y: &[T], dydt: &mut [T]) -> Result<()> {
        self.0.evaluate_volume_weighted(t, y, dydt)
    }
}

impl<T, F> OdeSystem<T> for F
where
    F: FnMut(T, &[T], &mut [T]) -> Result<()>,
{
    fn rhs(&mut self, t: T, y: &[T], dydt: &mut [T]) -> Result<()> {
        self(t, y, dydt)
    }
}

/// 2N-storage scheme: `k = A_s k + dt f(t + c_s dt, y)`, `y += B_s k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RkScheme<T> {
    pub a: Vec<T>,
    pub b: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Real> RkScheme<T> {
    pub fn williamson3() -> Self {
        Self {
            a: vec![T::zero(), lit(-5.0 / 9.0), lit(-153.0 / 128.0)],
            b: vec![lit(1.0 / 3.0), lit(15.0 / 16.0), lit(8.0 / 15.0)],
            c: vec![T::zero(), lit(1.0 / 3.0), lit(3.0 / 4.0)],
        }
    }

    pub fn stages(&self) -> usize {
        self.a.len()
    }

    /// Equivalent Butcher tableau `(A, b, c)` of the low-storage scheme.
    pub fn butcher(&self) -> (Vec<Vec<T>>, Vec<T>, Vec<T>) {
        // Stage s uses y_s = y0 + sum_{j<s} a_sj dt f_j where the 2N update
        // unrolls to a_sj = sum over the k/y recursions.
        let s = self.stages();
        // beta[i][j]: coefficient of f_j in register k after stage i.
        let mut kcoef = vec![vec![T::zero(); s]; s];
        let mut ycoef = vec![vec![T::zero(); s]; s + 1];
        for i in 0..s {
            for j in 0..s {
                let prev = if i > 0 { kcoef[i - 1][j] } else { T::zero() };
                kcoef[i][j] = self.a[i] * prev + if i == j { T::one() } else { T::zero() };
            }
            for j in 0..s {
                ycoef[i + 1][j] = ycoef[i][j] + self.b[i] * kcoef[i][j];
            }
        }
        let big_a = (0..s).map(|i| ycoef[i].clone()).collect();
        (big_a, ycoef[s].clone(), self.c.clone())
    }

    /// Largest violation of the order conditions up to third order, and of
    /// the stage-time consistency `c_i = sum_j A_ij`.
    pub fn order_condition_defect(&self) -> T {
        let (a, b, c) = self.butcher();
        let s = self.stages();
        let sum = |f: &dyn Fn(usize) -> T| (0..s).fold(T::zero(), |acc, i| acc + f(i));
        let half = lit::<T>(0.5);
        let third = lit::<T>(1.0 / 3.0);
        let sixth = lit::<T>(1.0 / 6.0);
        let mut worst = (sum(&|i| b[i]) - T::one()).abs();
        worst = worst.max((sum(&|i| b[i] * c[i]) - half).abs());
        worst = worst.max((sum(&|i| b[i] * c[i] * c[i]) - third).abs());
        worst = worst.max((sum(&|i| b[i] * sum(&|j| a[i][j] * c[j])) - sixth).abs());
        for i in 0..s {
            worst = worst.max((sum(&|j| a[i][j]) - c[i]).abs());
        }
        worst
    }
}

/// Integrator with its stage register.
#[derive(Debug, Clone)]
pub struct LowStorageRk<T> {
    scheme: RkScheme<T>,
    k: Vec<T>,
    f: Vec<T>,
    steps: usize,
}

impl<T: Real> LowStorageRk<T> {
    pub fn new(scheme: RkScheme<T>, len: usize) -> Self {
        Self {
            scheme,
            k: vec![T::zero(); len],
            f: vec![T::zero(); len],
            steps: 0,
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Advances `y` from `t` to `t + dt`.
    pub fn step<F: OdeSystem<T> + ?Sized>(&mut self, system: &mut F, t: T, dt: T, y: &mut [T]) -> Result<()> {
        if !(dt > T::zero()) {
            return Err(Error::InvalidConfig(format!("time step must be positive, got {dt}")));
        }
        self.k.fill(T::zero());
        for s in 0..self.scheme.stages() {
            system.rhs(t + self.scheme.c[s] * dt, y, &mut self.f)?;
            let (a, b) = (self.scheme.a[s], self.scheme.b[s]);
            for ((k, f), yv) in self.k.iter_mut().zip(&self.f).zip(y.iter_mut()) {
                *k = a * *k + dt * *f;
                *yv = *yv + b * *k;
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integration { step: self.steps + 1 });
            }
        }
        self.steps += 1;
        Ok(())
    }
}

/// Number of fixed steps of size close to `dt` that land exactly on `t_final`.
pub fn step_count<T: Real>(t_final: T, dt: T) -> usize {
    (t_final / dt).round().to_usize().unwrap_or(0).max(1)
}

/// Integrates from `t0` over `steps` fixed steps, calling `observe(step, t, y)`
/// after each one (and once with step 0 before the first).
pub fn integrate<T, F, O>(system: &mut F, y: &mut [T], t0: T, dt: T, steps: usize, mut observe: O) -> Result<T>
where
    T: Real,
    F: OdeSystem<T> + ?Sized,
    O: FnMut(usize, T, &[T]) -> Result<()>,
{
    let mut rk = LowStorageRk::new(RkScheme::williamson3(), y.len());
    observe(0, t0, y)?;
    let mut t = t0;
    for n in 1..=steps {
        rk.step(system, t, dt, y)?;
        t = t0 + dt * T::from_usize(n).unwrap();
        observe(n, t, y)?;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, MeshConfig};
    use crate::physics::{wave_system, InitialCondition};
    use crate::solver::{Discretization, DiscretizationOptions};

    #[test]
    fn williamson_coefficients_satisfy_order_conditions() {
        let rk = RkScheme::<f64>::williamson3();
        assert_eq!(rk.a[0], 0.0);
        assert!(rk.order_condition_defect() < 1e-15, "{:e}", rk.order_condition_defect());
        let mut broken = rk.clone();
        broken.b[2] = 0.5;
        assert!(broken.order_condition_defect() > 1e-3);
    }

    fn decay_error(steps: usize) -> f64 {
        let mut y = [1.0];
        let dt = 1.0 / steps as f64;
        let mut f = |_t: f64, y: &[f64], d: &mut [f64]| -> Result<()> {
            d[0] = -y[0];
            Ok(())
        };
        integrate(&mut f, &mut y, 0.0, dt, steps, |_, _, _| Ok(())).unwrap();
        (y[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn third_order_on_scalar_decay() {
        for steps in [10, 20, 40] {
            let r = decay_error(steps) / decay_error(2 * steps);
            assert!((7.0..=9.0).contains(&r), "steps {steps}: ratio {r}");
        }
    }

    #[test]
    fn time_dependent_forcing_uses_stage_times() {
        // y' = 3 t^2 integrates exactly for a third-order scheme.
        let mut y = [0.0];
        let mut f = |t: f64, _y: &[f64], d: &mut [f64]| -> Result<()> {
            d[0] = 3.0 * t * t;
            Ok(())
        };
        let t = integrate(&mut f, &mut y, 0.0, 0.1, 10, |_, _, _| Ok(())).unwrap();
        assert!((t - 1.0).abs() < 1e-15);
        assert!((y[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_rhs_leaves_state_unchanged() {
        let mut y = vec![0.25, -3.0, 7.5];
        let before = y.clone();
        let mut f = |_t: f64, _y: &[f64], d: &mut [f64]| -> Result<()> {
            d.fill(0.0);
            Ok(())
        };
        integrate(&mut f, &mut y, 0.0, 0.01, 50, |_, _, _| Ok(())).unwrap();
        assert_eq!(y, before);
    }

    #[test]
    fn non_finite_state_reports_step() {
        let mut y = [1.0];
        let mut f = |t: f64, _y: &[f64], d: &mut [f64]| -> Result<()> {
            d[0] = if t > 0.25 { f64::INFINITY } else { 0.0 };
            Ok(())
        };
        let err = integrate(&mut f, &mut y, 0.0, 0.1, 10, |_, _, _| Ok(())).unwrap_err();
        assert!(matches!(err, Error::Integration { step: 3 }), "{err:?}");
        let mut rk = LowStorageRk::new(RkScheme::williamson3(), 1);
        assert!(rk.step(&mut f, 0.0, 0.0, &mut y).is_err());
    }

    #[test]
    fn static_mesh_keeps_jacobian() {
        let mesh = build_mesh::<f64>(&MeshConfig {
            elements: [2, 2, 2],
            degree: 3,
            moving: false,
            ..MeshConfig::default()
        })
        .unwrap();
        let mut d = Discretization::new(mesh, wave_system(1.0).unwrap(), DiscretizationOptions::default());
        let field = d.project(&InitialCondition::SphericalPulse { width: 12.167 }, 0.0).unwrap();
        let mut y = field.data().to_vec();
        integrate(&mut d, &mut y, 0.0, 1e-3, 20, |_, _, _| Ok(())).unwrap();
        let n = field.q_all().len();
        assert_eq!(&y[n..], field.j_all());
    }

    #[test]
    fn step_count_rounds() {
        assert_eq!(step_count(2.0, 1e-3), 2000);
        assert_eq!(step_count(6.0, 6.0 / 20000.0), 20000);
    }
}
