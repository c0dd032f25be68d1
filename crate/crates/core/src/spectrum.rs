//! Rightmost characteristic roots of `det(sI − A − A_d e^{−sh}) = 0`.
//!
//! The solution operator's generator is discretised by Chebyshev collocation
//! on `[−h, 0]`; its eigenvalues seed a Newton iteration on the determinant,
//! and only seeds that land on a genuine root (small `σ_min(Δ(s))`) are kept.
//! Nothing here shares code with the Legendre machinery it is meant to check.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::TdsSystem;
use crate::numerics::Matrix;

pub const DEFAULT_ORDER: usize = 32;
pub const MAX_ORDER: usize = 256;
const CONVERGENCE_STEP: usize = 8;
const CONVERGENCE_TOL: f64 = 1e-6;
const ROOT_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumEstimate {
    /// Largest real part among retained roots (`−∞` if none survived).
    pub abscissa: f64,
    /// Sorted by decreasing real part, then decreasing imaginary part.
    pub roots: Vec<(f64, f64)>,
    pub collocation_order: usize,
    pub converged: bool,
}

impl SpectrumEstimate {
    pub fn top(&self, k: usize) -> &[(f64, f64)] {
        &self.roots[..k.min(self.roots.len())]
    }
}

/// Chebyshev points `cos(jπ/N)` and the differentiation matrix on them.
fn cheb(order: usize) -> (Vec<f64>, Matrix) {
    let n = order;
    let x: Vec<f64> = (0..=n)
        .map(|j| (std::f64::consts::PI * j as f64 / n as f64).cos())
        .collect();
    let c = |j: usize| if j == 0 || j == n { 2.0 } else { 1.0 } * if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut d = Matrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
            }
        }
    }
    for i in 0..=n {
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    (x, d)
}

/// The collocated generator, of size `n_x (order + 1)`. Node 0 is `θ = 0`,
/// node `order` is `θ = −h`.
fn generator(sys: &TdsSystem, order: usize) -> Matrix {
    let nx = sys.nx;
    let (_, d) = cheb(order);
    let scale = 2.0 / sys.h;
    let dim = nx * (order + 1);
    let mut m = Matrix::zeros(dim, dim);
    m.view_mut((0, 0), (nx, nx)).copy_from(&sys.a);
    let mut last = m.view_mut((0, order * nx), (nx, nx));
    last += &sys.ad;
    for i in 1..=order {
        for j in 0..=order {
            let v = scale * d[(i, j)];
            if v != 0.0 {
                for k in 0..nx {
                    m[(i * nx + k, j * nx + k)] = v;
                }
            }
        }
    }
    m
}

fn complexify(m: &Matrix) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `Δ(s) = sI − A − A_d e^{−sh}`.
pub fn characteristic_matrix(sys: &TdsSystem, s: Complex64) -> DMatrix<Complex64> {
    let e = (-s * sys.h).exp();
    let mut m = complexify(&sys.a) * Complex64::new(-1.0, 0.0) - complexify(&sys.ad) * e;
    for i in 0..sys.nx {
        m[(i, i)] += s;
    }
    m
}

/// `σ_min(Δ(s)) = min_{‖v‖=1} ‖Δ(s)v‖`.
pub fn root_residual(sys: &TdsSystem, s: Complex64) -> f64 {
    let m = characteristic_matrix(sys, s);
    m.singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

fn newton(sys: &TdsSystem, mut s: Complex64) -> Option<Complex64> {
    let ad = complexify(&sys.ad);
    for _ in 0..40 {
        let delta = characteristic_matrix(sys, s);
        let Some(inv) = delta.clone().try_inverse() else {
            return Some(s);
        };
        let mut dd = &ad * ((-s * sys.h).exp() * sys.h);
        for i in 0..sys.nx {
            dd[(i, i)] += 1.0;
        }
        let tr = (inv * dd).trace();
        if !tr.is_finite() || tr.norm() == 0.0 {
            return None;
        }
        let step = tr.inv();
        s -= step;
        if !s.is_finite() {
            return None;
        }
        if step.norm() <= 1e-14 * (1.0 + s.norm()) {
            break;
        }
    }
    Some(s)
}

pub fn rightmost_roots(sys: &TdsSystem, order: usize) -> Result<SpectrumEstimate> {
    if order < 8 {
        return Err(Error::OutOfRange(format!("collocation order {order} < 8")));
    }
    let m = generator(sys, order);
    let schur = Schur::try_new(m, 1e-14, 10_000)
        .ok_or_else(|| Error::Eigen("collocation eigenproblem did not converge".into()))?;
    let mut found: Vec<Complex64> = Vec::new();
    for seed in schur.complex_eigenvalues().iter() {
        // conjugate seeds converge to conjugate roots
        if !seed.is_finite() || seed.im < 0.0 {
            continue;
        }
        let Some(mut s) = newton(sys, *seed) else { continue };
        if s.im.abs() <= 1e-10 * (1.0 + s.norm()) {
            s.im = 0.0;
        }
        if s.im < 0.0 {
            s = s.conj();
        }
        if root_residual(sys, s) > ROOT_RESIDUAL {
            continue;
        }
        if found.iter().all(|r| (r - s).norm() > 1e-8 * (1.0 + s.norm())) {
            found.push(s);
        }
    }
    let mut roots: Vec<(f64, f64)> = Vec::with_capacity(2 * found.len());
    for s in &found {
        roots.push((s.re, s.im));
        if s.im > 0.0 {
            roots.push((s.re, -s.im));
        }
    }
    roots.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    let abscissa = roots.first().map_or(f64::NEG_INFINITY, |r| r.0);
    Ok(SpectrumEstimate {
        abscissa,
        roots,
        collocation_order: order,
        converged: false,
    })
}

/// Doubles the order from [`DEFAULT_ORDER`] until the abscissa moves by less
/// than `1e-6` when the order is raised by 8, or [`MAX_ORDER`] is reached.
pub fn converged_roots(sys: &TdsSystem) -> Result<SpectrumEstimate> {
    let mut order = DEFAULT_ORDER;
    loop {
        let mut est = rightmost_roots(sys, order)?;
        let next = rightmost_roots(sys, order + CONVERGENCE_STEP)?;
        let same = if est.abscissa.is_finite() {
            (est.abscissa - next.abscissa).abs() < CONVERGENCE_TOL
        } else {
            est.abscissa == next.abscissa
        };
        if same || order >= MAX_ORDER {
            est.converged = same;
            return Ok(est);
        }
        order *= 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Boundary,
}

impl Stability {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityCheck {
    pub verdict: Stability,
    pub estimate: SpectrumEstimate,
    /// Set when the verdict is `Boundary` only because the abscissa did not settle.
    pub diagnostic: Option<String>,
}

pub fn is_stable(sys: &TdsSystem, margin: f64) -> Result<StabilityCheck> {
    let estimate = converged_roots(sys)?;
    let (verdict, diagnostic) = if !estimate.converged {
        (
            Stability::Boundary,
            Some(format!(
                "abscissa not converged at order {}",
                estimate.collocation_order
            )),
        )
    } else if estimate.abscissa < -margin {
        (Stability::Stable, None)
    } else if estimate.abscissa > margin {
        (Stability::Unstable, None)
    } else {
        (Stability::Boundary, None)
    };
    Ok(StabilityCheck {
        verdict,
        estimate,
        diagnostic,
    })
}

/// Delay in `[lo, hi]` at which the abscissa changes sign, by bisection.
/// `None` if the signs at the ends agree.
pub fn crossing_delay(sys: &TdsSystem, lo: f64, hi: f64, tol: f64) -> Result<Option<f64>> {
    let abscissa = |h: f64| -> Result<f64> { Ok(converged_roots(&sys.with_delay(h)?)?.abscissa) };
    let (mut a, mut b) = (lo, hi);
    let fa = abscissa(a)?;
    let fb = abscissa(b)?;
    if fa.signum() == fb.signum() {
        return Ok(None);
    }
    let neg_at_lo = fa < 0.0;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if (abscissa(mid)? < 0.0) == neg_at_lo {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Some(0.5 * (a + b)))
}
