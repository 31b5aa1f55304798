//! Energy norm, conserved totals, residuals and error norms over a whole
//! solution. Sums run in element order, then node order (`k, j, i`), with
//! compensation so results do not depend on thread scheduling.

use crate::basis::QuadratureRule;
use crate::error::{Error, Result};
use crate::physics::{StateFunction, SymmetricSystem};
use crate::scalar::{CompensatedSum, Real};
use crate::solver::{node_weight, Discretization, SolutionField};

/// One row of run diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord<T> {
    pub time: T,
    pub energy: T,
    pub totals: Vec<T>,
    pub normalized_residual: Option<T>,
    pub linf_error: Option<T>,
}

impl<T: Real> DiagnosticsRecord<T> {
    /// Energy, totals and optional error for `field` at `t`.
    pub fn new(field: &SolutionField<T>, rule: &QuadratureRule<T>, t: T) -> Self {
        Self {
            time: t,
            energy: energy(field, rule),
            totals: conserved_totals(field, rule),
            normalized_residual: None,
            linf_error: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite()
            && self.energy.is_finite()
            && self.totals.iter().all(|v| v.is_finite())
            && self.normalized_residual.map_or(true, |v| v.is_finite())
            && self.linf_error.map_or(true, |v| v.is_finite())
    }
}

/// Quadrature weights of one element in node order.
fn weights<T: Real>(rule: &QuadratureRule<T>) -> Vec<T> {
    let n = rule.n_points();
    (0..n * n * n).map(|node| node_weight(rule, node)).collect()
}

/// `||Q||^2_{J,N} = sum W J Q . Q` over every element and equation.
pub fn energy<T: Real>(field: &SolutionField<T>, rule: &QuadratureRule<T>) -> T {
    let m = field.n_eq();
    let w = weights(rule);
    let mut acc = CompensatedSum::new();
    for e in 0..field.n_elements() {
        let (q, j) = (field.q(e), field.j(e));
        for (node, (&wn, &jn)) in w.iter().zip(j).enumerate() {
            let qq = q[node * m..(node + 1) * m].iter().fold(T::zero(), |s, &v| s + v * v);
            acc.add(wn * jn * qq);
        }
    }
    acc.value()
}

/// Totals `sum W J Q_m` of every equation.
pub fn conserved_totals<T: Real>(field: &SolutionField<T>, rule: &QuadratureRule<T>) -> Vec<T> {
    let m = field.n_eq();
    let w = weights(rule);
    let mut acc = vec![CompensatedSum::new(); m];
    for e in 0..field.n_elements() {
        let (q, j) = (field.q(e), field.j(e));
        for (node, (&wn, &jn)) in w.iter().zip(j).enumerate() {
            for (a, &v) in acc.iter_mut().zip(&q[node * m..(node + 1) * m]) {
                a.add(wn * jn * v);
            }
        }
    }
    acc.iter().map(|a| a.value()).collect()
}

/// `d/dt ||Q||^2_{J,N} = sum W (J_t Q . Q + 2 J Q . Q_t)` for a state and
/// its rate, both in the flat `[Q | J]` layout.
pub fn energy_rate<T: Real>(state: &SolutionField<T>, rate: &SolutionField<T>, rule: &QuadratureRule<T>) -> T {
    let m = state.n_eq();
    let w = weights(rule);
    let two = T::one() + T::one();
    let mut acc = CompensatedSum::new();
    for e in 0..state.n_elements() {
        let (q, j, qd, jd) = (state.q(e), state.j(e), rate.q(e), rate.j(e));
        for (node, &wn) in w.iter().enumerate() {
            let r = node * m..(node + 1) * m;
            let qq = q[r.clone()].iter().fold(T::zero(), |s, &v| s + v * v);
            let qqd = q[r.clone()].iter().zip(&qd[r]).fold(T::zero(), |s, (&a, &b)| s + a * b);
            acc.add(wn * (jd[node] * qq + two * j[node] * qqd));
        }
    }
    acc.value()
}

/// `d/dt sum W J Q_m = sum W (J Q_t + J_t Q)_m` for every equation.
pub fn totals_rate<T: Real>(state: &SolutionField<T>, rate: &SolutionField<T>, rule: &QuadratureRule<T>) -> Vec<T> {
    let m = state.n_eq();
    let w = weights(rule);
    let mut acc = vec![CompensatedSum::new(); m];
    for e in 0..state.n_elements() {
        let (q, j, qd, jd) = (state.q(e), state.j(e), rate.q(e), rate.j(e));
        for (node, &wn) in w.iter().enumerate() {
            for c in 0..m {
                let i = node * m + c;
                acc[c].add(wn * (j[node] * qd[i] + jd[node] * q[i]));
            }
        }
    }
    acc.iter().map(|a| a.value()).collect()
}

/// Largest `|(JQ)_t|` divided by `normalizer`.
pub fn residual_norm<T: Real>(jq_dot: &[T], normalizer: T) -> Result<T> {
    if !(normalizer > T::zero()) {
        return Err(Error::InvalidConfig(format!("residual normalizer must be positive, got {normalizer}")));
    }
    Ok(max_abs(jq_dot) / normalizer)
}

/// Max norm; NaN anywhere makes the result NaN.
pub fn max_abs<T: Real>(values: &[T]) -> T {
    values.iter().fold(T::zero(), |m, &v| if v.is_nan() || m.is_nan() { T::nan() } else { m.max(v.abs()) })
}

/// Max over nodes and equations of `|Q - reference|` at the nodal positions
/// of time `t`.
pub fn linf_error<T: Real, S: SymmetricSystem<T>>(
    disc: &Discretization<T, S>,
    q: &[T],
    reference: &dyn StateFunction<T>,
    t: T,
) -> Result<T> {
    let exact = disc.project(reference, t)?;
    if exact.q_all().len() != q.len() {
        return Err(Error::SizeMismatch {
            expected: exact.q_all().len(),
            found: q.len(),
        });
    }
    let diff: Vec<T> = q.iter().zip(exact.q_all()).map(|(&a, &b)| a - b).collect();
    Ok(max_abs(&diff))
}
