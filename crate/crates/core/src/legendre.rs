//! Shifted Legendre polynomials on `[0, 1]` and the structural matrices of
//! the LMI hierarchy.
//!
//! `l_k` is evaluated with Bonnet's three-term recursion,
//! `(k+1) l_{k+1}(θ) = (2k+1)(2θ−1) l_k(θ) − k l_{k−1}(θ)`, and its
//! derivative with the differentiated recursion. The explicit binomial sum is
//! never used: it cancels catastrophically for large `k`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::{kron, Matrix};

// Inputs like (θ + h)/h drift a few ulps outside [0, 1].
const DOMAIN_SLACK: f64 = 1e-12;

fn check_domain(theta: f64) -> Result<f64> {
    if !(-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&theta) {
        return Err(Error::OutOfRange(format!(
            "Legendre argument {theta} outside [0, 1]"
        )));
    }
    Ok(theta.clamp(0.0, 1.0))
}

/// Fills `out[k] = l_k(θ)` for `k < out.len()`. No domain check.
pub(crate) fn values_into(theta: f64, out: &mut [f64]) {
    let x = 2.0 * theta - 1.0;
    let mut prev = 1.0;
    let mut cur = x;
    for (k, slot) in out.iter_mut().enumerate() {
        match k {
            0 => *slot = 1.0,
            1 => *slot = x,
            _ => {
                let kk = (k - 1) as f64;
                let next = ((2.0 * kk + 1.0) * x * cur - kk * prev) / (kk + 1.0);
                prev = cur;
                cur = next;
                *slot = next;
            }
        }
    }
}

/// Fills `vals[k] = l_k(θ)` and `ders[k] = l_k'(θ)`.
pub(crate) fn values_and_derivs(theta: f64, vals: &mut [f64], ders: &mut [f64]) {
    values_into(theta, vals);
    let x = 2.0 * theta - 1.0;
    for k in 0..ders.len() {
        ders[k] = match k {
            0 => 0.0,
            1 => 2.0,
            _ => {
                let kk = (k - 1) as f64;
                ((2.0 * kk + 1.0) * (2.0 * vals[k - 1] + x * ders[k - 1]) - kk * ders[k - 2])
                    / (kk + 1.0)
            }
        };
    }
}

/// `l_k(θ)` for θ in `[0, 1]`.
pub fn legendre_eval(k: usize, theta: f64) -> Result<f64> {
    let t = check_domain(theta)?;
    let mut v = vec![0.0; k + 1];
    values_into(t, &mut v);
    Ok(v[k])
}

/// `l_k'(θ)` for θ in `[0, 1]`.
pub fn legendre_deriv(k: usize, theta: f64) -> Result<f64> {
    let t = check_domain(theta)?;
    let mut v = vec![0.0; k + 1];
    let mut d = vec![0.0; k + 1];
    values_and_derivs(t, &mut v, &mut d);
    Ok(d[k])
}

/// The first `n` shifted Legendre polynomials, each tensored with `I_block`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LegendreBasis {
    n: usize,
    block: usize,
}

impl LegendreBasis {
    pub fn new(n: usize, block: usize) -> Result<Self> {
        if n == 0 || block == 0 {
            return Err(Error::OutOfRange(format!(
                "Legendre basis needs n >= 1 and block >= 1 (got n = {n}, block = {block})"
            )));
        }
        Ok(Self { n, block })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block(&self) -> usize {
        self.block
    }

    /// Row dimension of the stacked vector, `n · block`.
    pub fn dim(&self) -> usize {
        self.n * self.block
    }

    /// Scalar values `[l_0(θ), …, l_{n−1}(θ)]`.
    pub fn values(&self, theta: f64) -> Result<Vec<f64>> {
        let t = check_domain(theta)?;
        let mut v = vec![0.0; self.n];
        values_into(t, &mut v);
        Ok(v)
    }

    /// `ℓ_n(θ) = [l_0(θ) … l_{n−1}(θ)]ᵀ ⊗ I`, of size `(n·m) × m`.
    pub fn ell_vector(&self, theta: f64) -> Result<Matrix> {
        let v = self.values(theta)?;
        Ok(self.stack(&v))
    }

    pub(crate) fn stack(&self, v: &[f64]) -> Matrix {
        let m = self.block;
        let mut out = Matrix::zeros(self.n * m, m);
        for (k, &val) in v.iter().enumerate() {
            for i in 0..m {
                out[(k * m + i, i)] = val;
            }
        }
        out
    }

    /// Scalar weights `2k + 1`, `k = 0..n−1`.
    pub fn gram_weights(&self) -> Vec<f64> {
        (0..self.n).map(|k| (2 * k + 1) as f64).collect()
    }

    /// `𝓘_n = diag(1, 3, 5, …) ⊗ I`: the inverse Gram matrix of `ℓ_n` on `[0, 1]`.
    pub fn gram_inverse(&self) -> Matrix {
        let mut d = Vec::with_capacity(self.dim());
        for w in self.gram_weights() {
            d.extend(std::iter::repeat_n(w, self.block));
        }
        Matrix::from_diagonal(&nalgebra::DVector::from_vec(d))
    }

    /// Scalar part of [`Self::differentiation_matrix`]: entry `(p, q)`
    /// (1-based) is `(2q−1)(1 − (−1)^{p+q})` for `p ≥ q`, zero otherwise, so
    /// that `d/dθ ℓ_n(θ) = ℒ_n ℓ_n(θ)`.
    pub fn differentiation_scalar(&self) -> Matrix {
        // 0-based (i, j) has the parity of (p, q); the diagonal always vanishes.
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if i > j && (i + j) % 2 == 1 {
                2.0 * (2 * j + 1) as f64
            } else {
                0.0
            }
        })
    }

    /// `ℒ_n ⊗ I_block`.
    pub fn differentiation_matrix(&self) -> Matrix {
        kron(
            &self.differentiation_scalar(),
            &Matrix::identity(self.block, self.block),
        )
    }
}

/// Gauss–Legendre rule mapped to `[0, 1]`; weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(node, weight)` pairs rescaled to `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let len = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (a + len * x, len * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `points`-point Gauss–Legendre rule on `[0, 1]`, exact up to degree
/// `2·points − 1`. Nodes are found by Newton iteration on the standard
/// Legendre polynomial from Chebyshev-like initial guesses.
pub fn gauss_rule(points: usize) -> QuadratureRule {
    let q = points.max(1);
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let qf = q as f64;
    for i in 0..q.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_standard(q, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_standard(q, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is in (0, 1) of [-1, 1]; mirror pairs
        nodes[i] = (1.0 - x) / 2.0;
        nodes[q - 1 - i] = (1.0 + x) / 2.0;
        weights[i] = w / 2.0;
        weights[q - 1 - i] = w / 2.0;
    }
    QuadratureRule { nodes, weights }
}

/// `P_q(x)` and `P_q'(x)` on `[-1, 1]`.
fn legendre_standard(q: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if q == 0 {
        return (1.0, 0.0);
    }
    for k in 1..q {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let qf = q as f64;
    (p1, qf * (x * p1 - p0) / (x * x - 1.0))
}

/// `ζ_n(z) = ∫_{−h}^{0} ℓ_n((θ+h)/h) z(θ) dθ` for a vector-valued `z`
/// (each call returns a `block × 1` column).
pub fn bessel_projection(
    z: impl Fn(f64) -> Matrix,
    basis: &LegendreBasis,
    h: f64,
    rule: &QuadratureRule,
) -> Result<Matrix> {
    if !(h > 0.0) {
        return Err(Error::OutOfRange(format!("delay must be positive, got {h}")));
    }
    let m = basis.block();
    let mut out = Matrix::zeros(basis.dim(), 1);
    let mut vals = vec![0.0; basis.n()];
    for (s, w) in rule.on(0.0, 1.0) {
        let zv = z(h * (s - 1.0));
        if zv.nrows() != m || zv.ncols() != 1 {
            return Err(Error::Dimension(format!(
                "z must return a {m}x1 column, got {}x{}",
                zv.nrows(),
                zv.ncols()
            )));
        }
        values_into(s, &mut vals);
        for (k, &l) in vals.iter().enumerate() {
            for i in 0..m {
                out[(k * m + i, 0)] += h * w * l * zv[(i, 0)];
            }
        }
    }
    Ok(out)
}

/// Slack of the Bessel–Legendre inequality,
/// `∫ zᵀ S z dθ − (1/h) ζ_nᵀ (𝓘_n ⊗ S) ζ_n ≥ 0`, zero when `z` is a polynomial of
/// degree below `n`.
pub fn bessel_gap(
    z: impl Fn(f64) -> Matrix,
    s: &Matrix,
    basis: &LegendreBasis,
    h: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let zeta = bessel_projection(&z, basis, h, rule)?;
    let lhs: f64 = rule
        .on(-h, 0.0)
        .map(|(t, w)| {
            let v = z(t);
            w * (v.transpose() * s * &v)[(0, 0)]
        })
        .sum();
    let weight = kron(
        &Matrix::from_diagonal(&nalgebra::DVector::from_vec(basis.gram_weights())),
        s,
    );
    let rhs = (zeta.transpose() * weight * &zeta)[(0, 0)] / h;
    Ok(lhs - rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_values() {
        for k in 0..30 {
            assert!((legendre_eval(k, 1.0).unwrap() - 1.0).abs() < 1e-13);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((legendre_eval(k, 0.0).unwrap() - sign).abs() < 1e-13);
            let kk = k as f64;
            let d1 = legendre_deriv(k, 1.0).unwrap();
            assert!((d1 - kk * (kk + 1.0)).abs() < 1e-9 * (1.0 + kk * kk));
        }
    }

    #[test]
    fn degree_two_against_binomial_form() {
        // l_2(θ) = 6θ² − 6θ + 1
        for (t, want) in [(0.0, 1.0), (0.5, -0.5), (1.0, 1.0)] {
            assert!((legendre_eval(2, t).unwrap() - want).abs() < 1e-15);
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let e = 1e-6;
        let fd = (legendre_eval(3, 0.3 + e).unwrap() - legendre_eval(3, 0.3 - e).unwrap()) / (2.0 * e);
        assert!((legendre_deriv(3, 0.3).unwrap() - fd).abs() < 1e-6);
        assert_eq!(legendre_deriv(0, 0.42).unwrap(), 0.0);
    }

    #[test]
    fn domain_is_checked() {
        assert!(legendre_eval(1, 1.1).is_err());
        assert!(legendre_deriv(1, -0.2).is_err());
    }

    #[test]
    fn ell_vector_stacks() {
        let b = LegendreBasis::new(3, 2).unwrap();
        let one = b.ell_vector(1.0).unwrap();
        let zero = b.ell_vector(0.0).unwrap();
        let i2 = Matrix::identity(2, 2);
        for k in 0..3 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((one.rows(2 * k, 2) - &i2).norm() < 1e-15);
            assert!((zero.rows(2 * k, 2) - &i2 * sign).norm() < 1e-15);
        }
        let b1 = LegendreBasis::new(1, 2).unwrap();
        assert_eq!(b1.ell_vector(0.37).unwrap(), i2);
    }

    #[test]
    fn gram_inverse_diagonal() {
        let b = LegendreBasis::new(3, 1).unwrap();
        assert_eq!(
            b.gram_inverse(),
            Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 3.0, 5.0]))
        );
        assert_eq!(LegendreBasis::new(1, 2).unwrap().gram_inverse(), Matrix::identity(2, 2));
    }

    #[test]
    fn differentiation_matrix_small_cases() {
        let b = LegendreBasis::new(1, 3).unwrap();
        assert_eq!(b.differentiation_matrix(), Matrix::zeros(3, 3));
        let l = LegendreBasis::new(3, 1).unwrap().differentiation_matrix();
        let want = Matrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 6.0, 0.0]);
        assert_eq!(l, want);
    }

    #[test]
    fn differentiation_matrix_entry_formula() {
        let n = 7;
        let l = LegendreBasis::new(n, 1).unwrap().differentiation_scalar();
        for p in 1..=n {
            for q in 1..=n {
                let want = if p >= q {
                    (2 * q - 1) as f64 * (1.0 - (-1f64).powi((p + q) as i32))
                } else {
                    0.0
                };
                assert_eq!(l[(p - 1, q - 1)], want, "entry ({p},{q})");
            }
        }
    }

    #[test]
    fn gauss_rule_basics() {
        let r = gauss_rule(1);
        assert_eq!(r.nodes, vec![0.5]);
        assert_eq!(r.weights, vec![1.0]);
        let r2 = gauss_rule(2);
        assert!((r2.integrate(0.0, 1.0, |t| t.powi(3)) - 0.25).abs() < 1e-15);
        let r5 = gauss_rule(5);
        let v = r5.integrate(0.0, 1.0, |t| legendre_eval(4, t).unwrap().powi(2));
        assert!((v - 1.0 / 9.0).abs() < 1e-14);
        let r40 = gauss_rule(40);
        assert!((r40.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(r40.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn projection_of_constant() {
        let b = LegendreBasis::new(4, 2).unwrap();
        let c = Matrix::from_column_slice(2, 1, &[1.5, -0.5]);
        let h = 0.7;
        let zeta = bessel_projection(|_| c.clone(), &b, h, &gauss_rule(32)).unwrap();
        assert!((zeta.rows(0, 2) - &c * h).norm() < 1e-14);
        assert!(zeta.rows(2, 6).norm() < 1e-14);
    }
}
