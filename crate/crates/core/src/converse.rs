//! Necessity side: certificates of the order-`n` LMIs built from the delay
//! Lyapunov matrix, the uniform error bounds of its Legendre projections, and
//! the explicit order `N*` beyond which such a certificate must work for a
//! stable system.
//!
//! With `s = (θ+h)/h`, the projections are
//!
//! ```text
//! 𝐔₁ = ∫₀¹ U(hs) B ℓ_nᵀ(s) ds · 𝓘_n                 (of U(θ+h)B on [−h, 0])
//! 𝐔₂ = ∫₀¹ BᵀU(h(2s−1))B ℓ_nᵀ(s) ds · 𝓘_n          (of BᵀU(θ)B on [−h, h])
//! ```
//!
//! and the certificate is `P = [[U(0), 𝐔₁], [∗, 𝐓]]`, `R = W₂`, `S = W₃`, where
//! `𝐓` re-expands `𝐔₂ ℓ_n((θ₂−θ₁+h)/2h)` in the tensor basis
//! `ℓ_n((θ₁+h)/h) ⊗ ℓ_n((θ₂+h)/h)`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{sweep_pool, Tolerances};
use crate::error::{Error, Result};
use crate::format::fmt_num;
use crate::legendre::{gauss_rule, values_and_derivs, values_into, LegendreBasis, QuadratureRule};
use crate::lmi::{certificate_margins, Certificate, Margins, Provenance, RegionGrid};
use crate::lyapunov::{build_kernel, LyapunovKernel, WeightTriple};
use crate::model::{builtin_example, TdsSystem};
use crate::numerics::{herm, norm2, sym_eig, symmetrize, Matrix};

#[derive(Debug, Clone)]
pub struct ProjectionSet {
    pub n: usize,
    /// `n_x × n·n_z`
    pub u1n: Matrix,
    /// `n_z × n·n_z`
    pub u2n: Matrix,
    /// `n·n_z × n·n_z`, as computed (symmetric up to rounding).
    pub tn: Matrix,
}

fn weights_row(n: usize, nz: usize) -> Vec<f64> {
    (0..n * nz).map(|i| (2 * (i / nz) + 1) as f64).collect()
}

/// Coefficient matrix `F · [l_0 I, …, l_{n−1} I]` with Legendre values `v`.
fn times_ell_t(f: &Matrix, v: &[f64], nz: usize) -> Matrix {
    let mut out = Matrix::zeros(f.nrows(), v.len() * nz);
    for (k, &l) in v.iter().enumerate() {
        out.view_mut((0, k * nz), (f.nrows(), nz)).copy_from(&(f * l));
    }
    out
}

/// `coeffs · ℓ_n(s)` for coefficients laid out as `[c_0, …, c_{n−1}]`.
fn apply_ell(coeffs: &Matrix, v: &[f64], nz: usize) -> Matrix {
    let mut out = Matrix::zeros(coeffs.nrows(), nz);
    for (k, &l) in v.iter().enumerate() {
        out += coeffs.view((0, k * nz), (coeffs.nrows(), nz)) * l;
    }
    out
}

fn scale_columns(m: &mut Matrix, w: &[f64]) {
    for (j, &wj) in w.iter().enumerate() {
        m.column_mut(j).scale_mut(wj);
    }
}

/// Legendre projections of `U(θ+h)B` and `BᵀU(θ)B`. `rule` is used on
/// `[0, 1]` for `𝐔₁` and on each half of the split at `θ = 0` for `𝐔₂`;
/// `𝐓` uses an `(n+1)`-point rule, exact for its polynomial integrand.
pub fn project_u(kernel: &LyapunovKernel, n: usize, rule: &QuadratureRule) -> Result<ProjectionSet> {
    let sys = &kernel.sys;
    let (nx, nz, h) = (sys.nx, sys.nz, sys.h);
    LegendreBasis::new(n, nz)?;
    let gw = weights_row(n, nz);
    let mut v = vec![0.0; n];

    let mut u1n = Matrix::zeros(nx, n * nz);
    for (s, w) in rule.on(0.0, 1.0) {
        let f = kernel.eval_u_right(h * s, 0)? * &sys.b;
        values_into(s, &mut v);
        u1n += times_ell_t(&f, &v, nz) * w;
    }
    scale_columns(&mut u1n, &gw);

    let mut u2n = Matrix::zeros(nz, n * nz);
    for (s, w) in rule.on(0.0, 0.5) {
        let f = sys.b.transpose() * kernel.u(h * (2.0 * s - 1.0))? * &sys.b;
        values_into(s, &mut v);
        u2n += times_ell_t(&f, &v, nz) * w;
    }
    for (s, w) in rule.on(0.5, 1.0) {
        let f = sys.b.transpose() * kernel.eval_u_right(h * (2.0 * s - 1.0), 0)? * &sys.b;
        values_into(s, &mut v);
        u2n += times_ell_t(&f, &v, nz) * w;
    }
    scale_columns(&mut u2n, &gw);

    let tn = tensor_coefficients(&u2n, n, nz);
    Ok(ProjectionSet { n, u1n, u2n, tn })
}

fn tensor_coefficients(u2n: &Matrix, n: usize, nz: usize) -> Matrix {
    let rule = gauss_rule(n + 1);
    let q = rule.len();
    let vals: Vec<Vec<f64>> = rule
        .nodes
        .iter()
        .map(|&s| {
            let mut v = vec![0.0; n];
            values_into(s, &mut v);
            v
        })
        .collect();
    let mut tn = Matrix::zeros(n * nz, n * nz);
    let mut v = vec![0.0; n];
    for a in 0..q {
        for b in 0..q {
            let arg = 0.5 * (rule.nodes[b] - rule.nodes[a] + 1.0);
            values_into(arg, &mut v);
            let kernel_ab = apply_ell(u2n, &v, nz) * (rule.weights[a] * rule.weights[b]);
            for p in 0..n {
                let lp = vals[a][p] * (2 * p + 1) as f64;
                for r in 0..n {
                    let lr = vals[b][r] * (2 * r + 1) as f64;
                    let mut blk = tn.view_mut((p * nz, r * nz), (nz, nz));
                    blk += &kernel_ab * (lp * lr);
                }
            }
        }
    }
    tn
}

impl ProjectionSet {
    fn ell(&self, s: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        values_into(s.clamp(0.0, 1.0), &mut v);
        v
    }

    fn nz(&self) -> usize {
        self.u2n.nrows()
    }

    /// `𝐔₁ ℓ_n((θ+h)/h)`, `θ ∈ [−h, 0]`.
    pub fn approx1(&self, theta: f64, h: f64) -> Matrix {
        apply_ell(&self.u1n, &self.ell((theta + h) / h), self.nz())
    }

    /// `(1/h) 𝐔₁ ℓ_n'((θ+h)/h)`.
    pub fn approx1_deriv(&self, theta: f64, h: f64) -> Matrix {
        let mut v = vec![0.0; self.n];
        let mut d = vec![0.0; self.n];
        values_and_derivs(((theta + h) / h).clamp(0.0, 1.0), &mut v, &mut d);
        apply_ell(&self.u1n, &d, self.nz()) / h
    }

    /// `𝐔₂ ℓ_n((θ+h)/2h)`, `θ ∈ [−h, h]`.
    pub fn approx2(&self, theta: f64, h: f64) -> Matrix {
        apply_ell(&self.u2n, &self.ell((theta + h) / (2.0 * h)), self.nz())
    }

    /// `Ũ₁(θ) = U(θ+h)B − 𝐔₁ ℓ_n((θ+h)/h)`.
    pub fn error1(&self, kernel: &LyapunovKernel, theta: f64) -> Result<Matrix> {
        let h = kernel.h();
        Ok(kernel.eval_u_right(theta + h, 0)? * &kernel.sys.b - self.approx1(theta, h))
    }

    /// `Ũ₁'(θ)`, using the right derivative of `U` at the origin.
    pub fn error1_deriv(&self, kernel: &LyapunovKernel, theta: f64) -> Result<Matrix> {
        let h = kernel.h();
        Ok(kernel.eval_u_right(theta + h, 1)? * &kernel.sys.b - self.approx1_deriv(theta, h))
    }

    /// `Ũ₂(θ) = BᵀU(θ)B − 𝐔₂ ℓ_n((θ+h)/2h)`.
    pub fn error2(&self, kernel: &LyapunovKernel, theta: f64) -> Result<Matrix> {
        let b = &kernel.sys.b;
        let u = if theta >= 0.0 {
            kernel.eval_u_right(theta, 0)?
        } else {
            kernel.u(theta)?
        };
        Ok(b.transpose() * u * b - self.approx2(theta, kernel.h()))
    }

    pub fn tn_asymmetry(&self) -> f64 {
        (&self.tn - self.tn.transpose()).amax()
    }
}

/// `(P_n, W₂, W₃)` assembled from the projections.
pub fn certificate_from_projection(kernel: &LyapunovKernel, proj: &ProjectionSet) -> Result<Certificate> {
    let sys = &kernel.sys;
    let d = sys.nx + proj.n * sys.nz;
    let mut p = Matrix::zeros(d, d);
    p.view_mut((0, 0), (sys.nx, sys.nx)).copy_from(&kernel.u(0.0)?);
    p.view_mut((0, sys.nx), proj.u1n.shape()).copy_from(&proj.u1n);
    p.view_mut((sys.nx, 0), (proj.u1n.ncols(), sys.nx))
        .copy_from(&proj.u1n.transpose());
    p.view_mut((sys.nx, sys.nx), proj.tn.shape()).copy_from(&proj.tn);
    Ok(Certificate {
        n: proj.n,
        p: symmetrize(&p),
        r: kernel.weights.w2.clone(),
        s: kernel.weights.w3.clone(),
        provenance: Provenance::Converse,
    })
}

pub fn build_certificate(kernel: &LyapunovKernel, n: usize, tol: &Tolerances) -> Result<Certificate> {
    let rule = gauss_rule(tol.quad_points_for(n));
    let proj = project_u(kernel, n, &rule)?;
    certificate_from_projection(kernel, &proj)
}

/// Margins of the converse certificate at order `n`.
pub fn converse_margins(kernel: &LyapunovKernel, n: usize, tol: &Tolerances) -> Result<Margins> {
    let cert = build_certificate(kernel, n, tol)?;
    certificate_margins(&kernel.sys, &cert)
}

/// First `n ≤ n_max` at which the converse certificate satisfies both LMIs.
pub fn empirical_order(kernel: &LyapunovKernel, n_max: usize, tol: &Tolerances) -> Result<Option<usize>> {
    for n in 1..=n_max {
        if converse_margins(kernel, n, tol)?.min() > tol.definiteness_tol {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// `Ψ_n(θ)` for `θ ∈ [−h, 0]`: the kernel of `−h·V̇_n` along trajectories,
/// in the variables `[x(0); hCx(θ); Cx(−h)]`.
pub fn psi_n(kernel: &LyapunovKernel, proj: &ProjectionSet, theta: f64) -> Result<Matrix> {
    let sys = &kernel.sys;
    let (nx, nz, h) = (sys.nx, sys.nz, sys.h);
    let w = &kernel.weights;
    let e1 = proj.error1(kernel, theta)?;
    let e1_0 = proj.error1(kernel, 0.0)?;
    let e1_h = proj.error1(kernel, -h)?;
    let e1d = proj.error1_deriv(kernel, theta)?;
    let e2 = proj.error2(kernel, theta)?;
    let e2_shift = proj.error2(kernel, theta + h)?;

    let psi1 = sys.a.transpose() * &e1 - e1d + sys.c.transpose() * e2;
    let psi2 = e1.transpose() * &sys.b - e2_shift.transpose();
    let top = &w.w1 + herm(&(&e1_0 * &sys.c));

    let d = nx + 2 * nz;
    let mut out = Matrix::zeros(d, d);
    out.view_mut((0, 0), (nx, nx)).copy_from(&top);
    out.view_mut((0, nx), (nx, nz)).copy_from(&psi1);
    out.view_mut((nx, 0), (nz, nx)).copy_from(&psi1.transpose());
    out.view_mut((0, nx + nz), (nx, nz)).copy_from(&(-&e1_h));
    out.view_mut((nx + nz, 0), (nz, nx)).copy_from(&(-e1_h.transpose()));
    out.view_mut((nx, nx), (nz, nz)).copy_from(&(&w.w2 / h));
    out.view_mut((nx, nx + nz), (nz, nz)).copy_from(&psi2);
    out.view_mut((nx + nz, nx), (nz, nz)).copy_from(&psi2.transpose());
    out.view_mut((nx + nz, nx + nz), (nz, nz)).copy_from(&w.w3);
    Ok(out)
}

/// `ζ_n(Cφ) = ∫_{−h}^0 ℓ_n((θ+h)/h) Cφ(θ) dθ`.
fn zeta(sys: &TdsSystem, n: usize, phi: &impl Fn(f64) -> Matrix, rule: &QuadratureRule) -> Result<Matrix> {
    let basis = LegendreBasis::new(n, sys.nz)?;
    crate::legendre::bessel_projection(|t| &sys.c * phi(t), &basis, sys.h, rule)
}

/// The order-`n` functional `ξᵀPξ + ∫ φᵀCᵀ((θ+h)R + S)Cφ` with
/// `ξ = [φ(0); ζ_n(Cφ)]`.
pub fn certificate_functional_value(
    sys: &TdsSystem,
    cert: &Certificate,
    phi: impl Fn(f64) -> Matrix,
    rule: &QuadratureRule,
) -> Result<f64> {
    let z = zeta(sys, cert.n, &phi, rule)?;
    let x0 = phi(0.0);
    let mut xi = Matrix::zeros(sys.nx + z.nrows(), 1);
    xi.view_mut((0, 0), (sys.nx, 1)).copy_from(&x0);
    xi.view_mut((sys.nx, 0), z.shape()).copy_from(&z);
    let mut v = (xi.transpose() * &cert.p * &xi)[(0, 0)];
    for (t, w) in rule.on(-sys.h, 0.0) {
        let cx = &sys.c * phi(t);
        v += w * (cx.transpose() * (&cert.r * (t + sys.h) + &cert.s) * &cx)[(0, 0)];
    }
    Ok(v)
}

/// `2φ(0)ᵀ∫Ũ₁Cφ + ∬ (Cφ₁)ᵀ Ũ₂(θ₂−θ₁) Cφ₂`: the part of the complete
/// functional not captured by the order-`n` certificate.
pub fn projection_residual_terms(
    kernel: &LyapunovKernel,
    proj: &ProjectionSet,
    phi: impl Fn(f64) -> Matrix,
    rule: &QuadratureRule,
) -> Result<f64> {
    let sys = &kernel.sys;
    let h = sys.h;
    let x0 = phi(0.0);
    let mut v = 0.0;
    for (t, w) in rule.on(-h, 0.0) {
        v += 2.0 * w * (x0.transpose() * proj.error1(kernel, t)? * &sys.c * phi(t))[(0, 0)];
    }
    for (t1, w1) in rule.on(-h, 0.0) {
        let y1 = &sys.c * phi(t1);
        for (t2, w2) in rule.on(t1, 0.0).chain(rule.on(-h, t1)) {
            let y2 = &sys.c * phi(t2);
            v += w1 * w2 * (y1.transpose() * proj.error2(kernel, t2 - t1)? * y2)[(0, 0)];
        }
    }
    Ok(v)
}

/// Constants of the uniform projection-error bounds and the bounds at order `n`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorBounds {
    pub n: usize,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    /// `sup ‖Ũ₁‖ ≤ ū₁ = ϱ₁‖W‖/√(n−3)`, `n ≥ 4`.
    pub u1bar: f64,
    /// `sup ‖Ũ₁'‖ ≤ ū₂ = ϱ₂‖W‖/√(n−5)`, `n ≥ 6`.
    pub u2bar: f64,
    /// `sup ‖Ũ₂‖ ≤ ū₃ = ϱ₃‖W‖/√(n−3)`, `n ≥ 4`.
    pub u3bar: f64,
}

pub const U1_VALID_FROM: usize = 4;
pub const U2_VALID_FROM: usize = 6;
pub const U3_VALID_FROM: usize = 4;

/// `(ϱ₁, ϱ₂, ϱ₃)`; independent of the weights.
pub fn rho_constants(kernel: &LyapunovKernel) -> (f64, f64, f64) {
    let sys = &kernel.sys;
    let h = sys.h;
    let (nm, m2n, m4n) = kernel.norms();
    let e = (h * nm).exp();
    let sqrt_nx = (sys.nx as f64).sqrt();
    let nb = sys.norm_b();
    let c = (std::f64::consts::PI / 2.0).powf(1.5);
    let rho1 = sqrt_nx * c * e * m2n * h * h * nb;
    let rho2 = 0.5 * sqrt_nx * c * e * m4n * h.powi(3) * nb;
    let rho3 = (2.0 * std::f64::consts::PI).sqrt()
        * (1.0 + sqrt_nx * std::f64::consts::PI * h * e * m2n)
        * h
        * nb
        * nb;
    (rho1, rho2, rho3)
}

pub fn error_bounds(kernel: &LyapunovKernel, n: usize) -> ErrorBounds {
    let (rho1, rho2, rho3) = rho_constants(kernel);
    let wn = norm2(&kernel.w);
    let bound = |rho: f64, from: usize, shift: usize| {
        if n >= from {
            rho * wn / ((n - shift) as f64).sqrt()
        } else {
            f64::INFINITY
        }
    };
    ErrorBounds {
        n,
        rho1,
        rho2,
        rho3,
        u1bar: bound(rho1, U1_VALID_FROM, 3),
        u2bar: bound(rho2, U2_VALID_FROM, 5),
        u3bar: bound(rho3, U3_VALID_FROM, 3),
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MuMargins {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
}

impl MuMargins {
    /// All three positive: the converse certificate is guaranteed to satisfy
    /// `Φ_n⁻ ≺ 0`.
    pub fn all_positive(&self) -> bool {
        self.mu1 > 0.0 && self.mu2 > 0.0 && self.mu3 > 0.0
    }
}

/// ```text
/// μ₁ = σ̲(W₁) − (3 + ‖A‖)ū₁ − ū₂ − ū₃
/// μ₂ = σ̲(W₂)/h − (‖A‖ + ‖B‖)ū₁ − ū₂ − 2ū₃
/// μ₃ = σ̲(W₃) − (1 + ‖B‖)ū₁ − ū₃
/// ```
pub fn mu_margins(bounds: &ErrorBounds, sys: &TdsSystem, w: &WeightTriple) -> Result<MuMargins> {
    let na = sys.norm_a();
    let nb = sys.norm_b();
    let (u1, u2, u3) = (bounds.u1bar, bounds.u2bar, bounds.u3bar);
    Ok(MuMargins {
        mu1: sym_eig(&w.w1)?.min - (3.0 + na) * u1 - u2 - u3,
        mu2: sym_eig(&w.w2)?.min / sys.h - (na + nb) * u1 - u2 - 2.0 * u3,
        mu3: sym_eig(&w.w3)?.min - (1.0 + nb) * u1 - u3,
    })
}

/// The explicit order and the weight split behind it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NStar {
    /// `N*` as a float: it routinely exceeds any integer type.
    pub value: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    /// Shares `(η₁, η₂, η₃)` of `‖W‖` for `W₁ = λη₁I`, `hW₂ = λη₂I`, `W₃ = λη₃I`
    /// at which all three μ margins are non-negative at order `N*`.
    pub eta: [f64; 3],
}

/// ```text
/// N* = 5 + ⌈((4/(1+h²) + ‖A‖ + ‖B‖)ϱ₁ + ϱ₂ + 2ϱ₃)² (1+h²)²⌉
/// ```
pub fn estimate_n_star(sys: &TdsSystem, tol: &Tolerances) -> Result<NStar> {
    let kernel = build_kernel(sys, &WeightTriple::identity(sys.nx, sys.nz), tol)?;
    let (r1, r2, r3) = rho_constants(&kernel);
    let h2 = sys.h * sys.h;
    let (na, nb) = (sys.norm_a(), sys.norm_b());
    let inner = (4.0 / (1.0 + h2) + na + nb) * r1 + r2 + 2.0 * r3;
    let x = inner * inner * (1.0 + h2) * (1.0 + h2);
    if !x.is_finite() || x > 1e300 {
        return Err(Error::Overflow(format!("N* argument {x:e}")));
    }
    let value = 5.0 + x.ceil();
    let root = (value - 5.0).sqrt();
    let eta = [
        (r1 * (3.0 + na) + r2 + r3) / root,
        (r1 * (na + nb) + r2 + 2.0 * r3) * h2 / root,
        (r1 * (1.0 + nb) + r3) / root,
    ];
    Ok(NStar {
        value,
        rho1: r1,
        rho2: r2,
        rho3: r3,
        eta,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NStarCell {
    pub lambda: f64,
    pub h: f64,
    /// `None` when the Lyapunov matrix is ill-posed or `N*` overflows.
    pub nstar: Option<f64>,
    pub illposed: bool,
}

/// `N*` over a `(λ, h)` grid of the third example, in [`RegionGrid::cells`]
/// order.
pub fn nstar_sweep(grid: &RegionGrid, tol: &Tolerances) -> Vec<NStarCell> {
    let cells = grid.cells();
    let eval = |&(lambda, h): &(f64, f64)| {
        let r = builtin_example(3, Some(lambda), h).and_then(|s| estimate_n_star(&s, tol));
        match r {
            Ok(ns) => NStarCell {
                lambda,
                h,
                nstar: Some(ns.value),
                illposed: false,
            },
            Err(_) => NStarCell {
                lambda,
                h,
                nstar: None,
                illposed: true,
            },
        }
    };
    sweep_pool().install(|| cells.par_iter().map(eval).collect())
}

pub fn write_nstar_csv(cells: &[NStarCell], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "lambda,h,Nstar,illposed")?;
    for c in cells {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_num(c.lambda),
            fmt_num(c.h),
            c.nstar.map(fmt_num).unwrap_or_default(),
            c.illposed
        )?;
    }
    Ok(())
}
