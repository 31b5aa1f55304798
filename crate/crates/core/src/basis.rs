//! Legendre-Gauss-Lobatto quadrature, Lagrange interpolation and the
//! summation-by-parts derivative operators built on them.

use crate::error::{Error, Result};
use crate::scalar::{from_usize, lit, Real};

/// Nodes, weights and derivative operators for one polynomial degree.
///
/// Matrices are stored row-major with `n_points()` columns. Immutable after
/// construction so a single instance is shared by every element.
#[derive(Debug, Clone)]
pub struct QuadratureRule<T> {
    degree: usize,
    nodes: Vec<T>,
    weights: Vec<T>,
    barycentric: Vec<T>,
    d: Vec<T>,
    dhat: Vec<T>,
}

/// Builds the Legendre-Gauss-Lobatto rule of degree `degree`.
pub fn lgl_rule<T: Real>(degree: usize) -> Result<QuadratureRule<T>> {
    QuadratureRule::lgl(degree)
}

/// Returns copies of the nodal derivative matrix `D` and of `Dhat`.
pub fn derivative_matrices<T: Real>(rule: &QuadratureRule<T>) -> (Vec<T>, Vec<T>) {
    (rule.d.clone(), rule.dhat.clone())
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
pub fn legendre_and_derivative<T: Real>(n: usize, x: T) -> (T, T) {
    if n == 0 {
        return (T::one(), T::zero());
    }
    let mut p_prev = T::one();
    let mut p = x;
    let mut dp_prev = T::zero();
    let mut dp = T::one();
    for k in 2..=n {
        let kf = from_usize::<T>(k);
        let a = (lit::<T>(2.0) * kf - T::one()) / kf;
        let b = (kf - T::one()) / kf;
        let p_next = a * x * p - b * p_prev;
        let dp_next = dp_prev + (lit::<T>(2.0) * kf - T::one()) * p;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp)
}

impl<T: Real> QuadratureRule<T> {
    pub fn lgl(degree: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidDegree(degree));
        }
        let n = degree;
        let np = n + 1;
        let mut nodes = vec![T::zero(); np];
        nodes[0] = -T::one();
        nodes[n] = T::one();

        // Interior nodes are the roots of P'_N; Newton from Chebyshev-Lobatto guesses.
        let nn1 = from_usize::<T>(n * (n + 1));
        let tol = lit::<T>(4.0) * T::epsilon();
        for j in 1..=(n - 1) / 2 {
            let mut x = -(T::PI() * from_usize::<T>(j) / from_usize::<T>(n)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_and_derivative(n, x);
                let d2p = (lit::<T>(2.0) * x * dp - nn1 * p) / (T::one() - x * x);
                let delta = dp / d2p;
                x = x - delta;
                if delta.abs() <= tol {
                    break;
                }
            }
            nodes[j] = x;
            nodes[n - j] = -x;
        }
        if n % 2 == 0 {
            nodes[n / 2] = T::zero();
        }

        let weights: Vec<T> = nodes
            .iter()
            .map(|&x| {
                let (p, _) = legendre_and_derivative(n, x);
                lit::<T>(2.0) / (nn1 * p * p)
            })
            .collect();

        let barycentric: Vec<T> = (0..np)
            .map(|j| {
                let prod = (0..np)
                    .filter(|&k| k != j)
                    .fold(T::one(), |acc, k| acc * (nodes[j] - nodes[k]));
                T::one() / prod
            })
            .collect();

        let mut d = vec![T::zero(); np * np];
        for i in 0..np {
            let mut diag = T::zero();
            for j in 0..np {
                if i != j {
                    let v = (barycentric[j] / barycentric[i]) / (nodes[i] - nodes[j]);
                    d[i * np + j] = v;
                    diag = diag - v;
                }
            }
            d[i * np + i] = diag;
        }

        let mut dhat = vec![T::zero(); np * np];
        for j in 0..np {
            for m in 0..np {
                dhat[j * np + m] = -d[m * np + j] * weights[m] / weights[j];
            }
        }

        Ok(Self {
            degree: n,
            nodes,
            weights,
            barycentric,
            d,
            dhat,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of nodes per direction, `N + 1`.
    pub fn n_points(&self) -> usize {
        self.degree + 1
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn barycentric_weights(&self) -> &[T] {
        &self.barycentric
    }

    /// Row-major `D`, with `D[n][j] = l'_j(xi_n)`.
    pub fn d(&self) -> &[T] {
        &self.d
    }

    /// Row-major `Dhat`, with `Dhat[j][n] = -D[n][j] W_n / W_j`.
    pub fn dhat(&self) -> &[T] {
        &self.dhat
    }

    #[inline(always)]
    pub fn d_at(&self, row: usize, col: usize) -> T {
        self.d[row * self.n_points() + col]
    }

    #[inline(always)]
    pub fn dhat_at(&self, row: usize, col: usize) -> T {
        self.dhat[row * self.n_points() + col]
    }

    /// Values of every Lagrange basis polynomial at `x`.
    pub fn lagrange_values(&self, x: T) -> Vec<T> {
        let np = self.n_points();
        if let Some(hit) = self.nodes.iter().position(|&xj| xj == x) {
            let mut out = vec![T::zero(); np];
            out[hit] = T::one();
            return out;
        }
        let terms: Vec<T> = (0..np)
            .map(|j| self.barycentric[j] / (x - self.nodes[j]))
            .collect();
        let denom: T = terms.iter().copied().sum();
        terms.into_iter().map(|t| t / denom).collect()
    }

    /// Evaluates the 1D interpolant through `values` at `x`.
    pub fn interpolate_1d(&self, values: &[T], x: T) -> T {
        self.lagrange_values(x)
            .iter()
            .zip(values)
            .map(|(&l, &v)| l * v)
            .sum()
    }
}

/// Samples on a tensor-product LGL grid in one, two or three dimensions.
///
/// Node `(i, j, k)` lives at `node_index(n, i, j, k)`; components are stored
/// contiguously per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField<T> {
    points: usize,
    dim: usize,
    components: usize,
    data: Vec<T>,
}

impl<T: Real> NodalField<T> {
    pub fn new(points: usize, dim: usize, components: usize, data: Vec<T>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidConfig(format!("field dimension {dim}")));
        }
        let expected = points.pow(dim as u32) * components;
        if data.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            points,
            dim,
            components,
            data,
        })
    }

    pub fn zeros(points: usize, dim: usize, components: usize) -> Self {
        let len = points.pow(dim as u32) * components;
        Self {
            points,
            dim,
            components,
            data: vec![T::zero(); len],
        }
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_nodes(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn node(&self, node: usize) -> &[T] {
        &self.data[node * self.components..(node + 1) * self.components]
    }

    /// Product quadrature weight of a node.
    pub fn weight(&self, rule: &QuadratureRule<T>, node: usize) -> T {
        let n = self.points;
        let w = rule.weights();
        let mut rem = node;
        let mut prod = T::one();
        for _ in 0..self.dim {
            prod = prod * w[rem % n];
            rem /= n;
        }
        prod
    }
}

/// Tensor-product LGL quadrature of `U^T V`.
pub fn discrete_inner_product<T: Real>(
    u: &NodalField<T>,
    v: &NodalField<T>,
    rule: &QuadratureRule<T>,
) -> Result<T> {
    if u.points != rule.n_points() || v.points != rule.n_points() {
        return Err(Error::SizeMismatch {
            expected: rule.n_points(),
            found: if u.points != rule.n_points() {
                u.points
            } else {
                v.points
            },
        });
    }
    if u.dim != v.dim || u.components != v.components {
        return Err(Error::SizeMismatch {
            expected: u.data.len(),
            found: v.data.len(),
        });
    }
    let c = u.components;
    Ok((0..u.n_nodes())
        .map(|node| {
            let dot: T = u.data[node * c..(node + 1) * c]
                .iter()
                .zip(&v.data[node * c..(node + 1) * c])
                .map(|(&a, &b)| a * b)
                .sum();
            dot * u.weight(rule, node)
        })
        .sum())
}

/// Samples `f` at the tensor-product nodes, giving the nodal values of the
/// interpolant. `f` receives the reference coordinates (length `dim`) and
/// writes `components` values.
pub fn interpolate<T, F>(
    rule: &QuadratureRule<T>,
    dim: usize,
    components: usize,
    f: F,
) -> Result<NodalField<T>>
where
    T: Real,
    F: Fn(&[T], &mut [T]),
{
    let mut field = NodalField::zeros(rule.n_points(), dim, components);
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidConfig(format!("field dimension {dim}")));
    }
    let n = rule.n_points();
    let xi = rule.nodes();
    let mut coords = [T::zero(); 3];
    for node in 0..field.n_nodes() {
        let mut rem = node;
        for c in coords.iter_mut().take(dim) {
            *c = xi[rem % n];
            rem /= n;
        }
        f(
            &coords[..dim],
            &mut field.data[node * components..(node + 1) * components],
        );
    }
    Ok(field)
}
