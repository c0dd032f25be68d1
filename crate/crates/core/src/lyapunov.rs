//! Delay Lyapunov matrix `U(θ)`, `θ ∈ [−h, h]`, in closed form.
//!
//! For `θ ≤ 0`,
//!
//! ```text
//! vec U(θ) = [I 0] e^{θℳ} 𝒩⁻¹ [0; −vec W],
//! ℳ = [[−Aᵀ⊗I, −A_dᵀ⊗I], [I⊗A_dᵀ, I⊗Aᵀ]],
//! 𝒩 = [[I, 0], [Aᵀ⊗I + I⊗Aᵀ, A_dᵀ⊗I]] + [[0, −I], [I⊗A_dᵀ, 0]] e^{−hℳ},
//! ```
//!
//! and `U(θ) = Uᵀ(−θ)` for `θ > 0`. The weight is
//! `W = W₁ + Cᵀ(hW₂ + W₃)C`.
//!
//! `U` solves `U'(θ) = −U(θ)A − U(θ+h)A_d` on `[−h, 0)` with
//! `AᵀU(0) + A_dᵀU(−h) + U(0)A + U(h)A_d = −W`, and its derivative jumps by
//! `U'(0⁺) − U'(0⁻) = −W` at the origin.

use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::legendre::QuadratureRule;
use crate::model::TdsSystem;
use crate::numerics::{expm, kron, norm2, sym_eig, unvec, vec, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightTriple {
    pub w1: Matrix,
    pub w2: Matrix,
    pub w3: Matrix,
}

impl WeightTriple {
    pub fn identity(nx: usize, nz: usize) -> Self {
        Self {
            w1: Matrix::identity(nx, nx),
            w2: Matrix::identity(nz, nz),
            w3: Matrix::identity(nz, nz),
        }
    }

    /// `W₁ = I`, `W₂ = I/h`, `W₃ = I`: the three margins of the converse
    /// construction then start from comparable values.
    pub fn balanced(sys: &TdsSystem) -> Self {
        Self {
            w1: Matrix::identity(sys.nx, sys.nx),
            w2: Matrix::identity(sys.nz, sys.nz) / sys.h,
            w3: Matrix::identity(sys.nz, sys.nz),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            w1: &self.w1 * alpha,
            w2: &self.w2 * alpha,
            w3: &self.w3 * alpha,
        }
    }

    pub fn validate(&self, sys: &TdsSystem) -> Result<()> {
        let shapes = [
            ("W1", &self.w1, sys.nx),
            ("W2", &self.w2, sys.nz),
            ("W3", &self.w3, sys.nz),
        ];
        for (name, w, k) in shapes {
            if w.shape() != (k, k) {
                return Err(Error::Dimension(format!("{name} must be {k}x{k}")));
            }
            if (w - w.transpose()).norm() > 1e-12 * (1.0 + w.norm()) {
                return Err(Error::InvalidSystem(format!("{name} is not symmetric")));
            }
            if sym_eig(w)?.min <= 0.0 {
                return Err(Error::InvalidSystem(format!("{name} is not positive definite")));
            }
        }
        Ok(())
    }

    /// `W = W₁ + Cᵀ(hW₂ + W₃)C`.
    pub fn combined(&self, sys: &TdsSystem) -> Matrix {
        &self.w1 + sys.c.transpose() * (&self.w2 * sys.h + &self.w3) * &sys.c
    }
}

#[derive(Debug, Clone)]
pub struct LyapunovKernel {
    pub sys: TdsSystem,
    pub weights: WeightTriple,
    /// `ℳ`, size `2n_x²`.
    pub m: Matrix,
    /// `𝒩`, size `2n_x²`.
    pub n_mat: Matrix,
    pub n_inv: Matrix,
    pub w: Matrix,
    /// `𝒩⁻¹ [0; −vec W]`
    pub n_inv_w: Matrix,
    /// 1-norm condition number of `𝒩`.
    pub cond_n: f64,
}

/// Value of `U` or one of its derivatives.
#[derive(Debug, Clone)]
pub struct UEval {
    pub value: Matrix,
    /// Set for derivatives at `θ = 0`, where only the left limit is returned.
    pub one_sided: bool,
}

fn one_norm(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `ℳ` and `𝒩` of the closed-form solution.
pub fn boundary_matrices(sys: &TdsSystem) -> Result<(Matrix, Matrix)> {
    let nx = sys.nx;
    let i = Matrix::identity(nx, nx);
    let k = nx * nx;
    let at = sys.a.transpose();
    let adt = sys.ad.transpose();

    let mut m = Matrix::zeros(2 * k, 2 * k);
    m.view_mut((0, 0), (k, k)).copy_from(&(-kron(&at, &i)));
    m.view_mut((0, k), (k, k)).copy_from(&(-kron(&adt, &i)));
    m.view_mut((k, 0), (k, k)).copy_from(&kron(&i, &adt));
    m.view_mut((k, k), (k, k)).copy_from(&kron(&i, &at));

    let mut n0 = Matrix::zeros(2 * k, 2 * k);
    n0.view_mut((0, 0), (k, k)).fill_with_identity();
    n0.view_mut((k, 0), (k, k))
        .copy_from(&(kron(&at, &i) + kron(&i, &at)));
    n0.view_mut((k, k), (k, k)).copy_from(&kron(&adt, &i));

    let mut n1 = Matrix::zeros(2 * k, 2 * k);
    n1.view_mut((0, k), (k, k)).copy_from(&(-Matrix::identity(k, k)));
    n1.view_mut((k, 0), (k, k)).copy_from(&kron(&i, &adt));

    let n = n0 + n1 * expm(&(&m * -sys.h))?;
    Ok((m, n))
}

pub fn build_kernel(sys: &TdsSystem, weights: &WeightTriple, tol: &Tolerances) -> Result<LyapunovKernel> {
    weights.validate(sys)?;
    let (m, n_mat) = boundary_matrices(sys)?;
    let k = sys.nx * sys.nx;
    let n_inv = n_mat
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::IllPosed { cond: f64::INFINITY })?;
    let cond_n = one_norm(&n_mat) * one_norm(&n_inv);
    if !cond_n.is_finite() || cond_n > tol.cond_limit {
        return Err(Error::IllPosed { cond: cond_n });
    }
    let w = weights.combined(sys);
    let mut rhs = Matrix::zeros(2 * k, 1);
    rhs.view_mut((k, 0), (k, 1)).copy_from(&(-vec(&w)));
    let lu = n_mat.clone().lu();
    let mut z = lu.solve(&rhs).ok_or(Error::IllPosed { cond: cond_n })?;
    // one step of iterative refinement
    let r = &rhs - &n_mat * &z;
    if let Some(dz) = lu.solve(&r) {
        z += dz;
    }
    let resid = (&n_mat * &z - &rhs).norm();
    if resid > 1e-8 * w.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::IllPosed { cond: cond_n });
    }
    Ok(LyapunovKernel {
        sys: sys.clone(),
        weights: weights.clone(),
        m,
        n_mat,
        n_inv,
        w,
        n_inv_w: z,
        cond_n,
    })
}

impl LyapunovKernel {
    pub fn h(&self) -> f64 {
        self.sys.h
    }

    fn left(&self, theta: f64, derivative: u32) -> Result<Matrix> {
        let nx = self.sys.nx;
        let mut v = expm(&(&self.m * theta))? * &self.n_inv_w;
        for _ in 0..derivative {
            v = &self.m * v;
        }
        unvec(&v.rows(0, nx * nx).clone_owned(), nx, nx)
    }

    /// `U^{(k)}(θ)` for `k ∈ {0, 1, 2, 4}` (any `k` is accepted).
    pub fn eval_u(&self, theta: f64, derivative: u32) -> Result<UEval> {
        let h = self.h();
        if !(theta.abs() <= h * (1.0 + 1e-12)) {
            return Err(Error::OutOfRange(format!("θ = {theta} outside [−{h}, {h}]")));
        }
        let theta = theta.clamp(-h, h);
        if theta <= 0.0 {
            return Ok(UEval {
                value: self.left(theta, derivative)?,
                one_sided: theta == 0.0 && derivative > 0,
            });
        }
        let sign = if derivative.is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(UEval {
            value: self.left(-theta, derivative)?.transpose() * sign,
            one_sided: false,
        })
    }

    /// Right-hand branch `U^{(k)}(θ) = (−1)^k (U^{(k)}(−θ))ᵀ` for `θ ∈ [0, h]`;
    /// at `θ = 0` this is the right limit.
    pub fn eval_u_right(&self, theta: f64, derivative: u32) -> Result<Matrix> {
        let h = self.h();
        if !(-1e-12 * h..=h * (1.0 + 1e-12)).contains(&theta) {
            return Err(Error::OutOfRange(format!("θ = {theta} outside [0, {h}]")));
        }
        let sign = if derivative.is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(self.left(-theta.clamp(0.0, h), derivative)?.transpose() * sign)
    }

    /// `U(θ)`.
    pub fn u(&self, theta: f64) -> Result<Matrix> {
        Ok(self.eval_u(theta, 0)?.value)
    }

    /// `U'(0⁺) − U'(0⁻)`.
    pub fn derivative_jump(&self) -> Result<Matrix> {
        let left = self.left(0.0, 1)?;
        Ok(-left.transpose() - left)
    }

    /// `‖AᵀU(0) + A_dᵀU(−h) + U(0)A + U(h)A_d + W‖`.
    pub fn algebraic_boundary_check(&self) -> Result<f64> {
        let s = &self.sys;
        let u0 = self.u(0.0)?;
        let um = self.u(-s.h)?;
        let up = self.u(s.h)?;
        let r = s.a.transpose() * &u0 + s.ad.transpose() * um + &u0 * &s.a + up * &s.ad + &self.w;
        Ok(norm2(&r))
    }

    /// `(ρ, ρ')` with `ρ = √n_x e^{h‖ℳ‖} ‖ℳ²𝒩⁻¹‖`, `ρ' = √n_x e^{h‖ℳ‖} ‖ℳ⁴𝒩⁻¹‖`;
    /// `‖U''‖ ≤ ρ‖W‖` and `‖U''''‖ ≤ ρ'‖W‖` on `[−h, h]`.
    pub fn derivative_bounds(&self) -> (f64, f64) {
        let m2 = &self.m * &self.m;
        let m4 = &m2 * &m2;
        let base = (self.sys.nx as f64).sqrt() * (self.h() * norm2(&self.m)).exp();
        (base * norm2(&(m2 * &self.n_inv)), base * norm2(&(m4 * &self.n_inv)))
    }

    /// `‖ℳ‖`, `‖ℳ²𝒩⁻¹‖`, `‖ℳ⁴𝒩⁻¹‖`.
    pub fn norms(&self) -> (f64, f64, f64) {
        let m2 = &self.m * &self.m;
        let m4 = &m2 * &m2;
        (
            norm2(&self.m),
            norm2(&(m2 * &self.n_inv)),
            norm2(&(m4 * &self.n_inv)),
        )
    }

    /// The complete functional evaluated at an initial function
    /// `φ: [−h, 0] → ℝ^{n_x}` (returned as a column):
    ///
    /// ```text
    /// φ(0)ᵀU(0)φ(0) + 2φ(0)ᵀ∫U(θ+h)A_dφ(θ)dθ
    ///   + ∬φ(θ₁)ᵀA_dᵀU(θ₂−θ₁)A_dφ(θ₂) + ∫φᵀCᵀ((θ+h)W₂ + W₃)Cφ.
    /// ```
    ///
    /// The double integral is split along `θ₁ = θ₂`, where the kernel has a
    /// derivative kink, and each triangle is integrated with a collapsed
    /// tensor rule.
    pub fn complete_functional_value(
        &self,
        phi: impl Fn(f64) -> Matrix,
        rule: &QuadratureRule,
    ) -> Result<f64> {
        let s = &self.sys;
        let h = s.h;
        let x0 = phi(0.0);
        let mut v = (x0.transpose() * self.u(0.0)? * &x0)[(0, 0)];

        let mut cross = 0.0;
        let mut local = 0.0;
        for (t, w) in rule.on(-h, 0.0) {
            let x = phi(t);
            cross += w * (x0.transpose() * self.u(t + h)? * &s.ad * &x)[(0, 0)];
            let cx = &s.c * &x;
            let wt = &self.weights.w2 * (t + h) + &self.weights.w3;
            local += w * (cx.transpose() * wt * &cx)[(0, 0)];
        }
        v += 2.0 * cross + local;

        // ∫_{−h}^0 dθ₁ [∫_{θ₁}^0 + ∫_{−h}^{θ₁}] f(θ₁, θ₂) dθ₂
        let mut double = 0.0;
        for (t1, w1) in rule.on(-h, 0.0) {
            let y1 = &s.ad * phi(t1);
            for (t2, w2) in rule.on(t1, 0.0).chain(rule.on(-h, t1)) {
                let y2 = &s.ad * phi(t2);
                double += w1 * w2 * (y1.transpose() * self.u(t2 - t1)? * y2)[(0, 0)];
            }
        }
        Ok(v + double)
    }
}

/// Residuals of the defining conditions of `U`, all relative to `‖W‖`.
/// Matrix residuals are divided by `‖W‖`; the slacks are in the units of
/// `ρ`, `ρ'` (already per unit `‖W‖`).
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovResiduals {
    /// `sup ‖U'(θ) + U(θ)A + U(θ+h)A_d‖` over a grid of `[−h, 0)`.
    pub ode: f64,
    /// Algebraic boundary condition.
    pub boundary: f64,
    /// `‖U(0) − U(0)ᵀ‖`.
    pub symmetry: f64,
    /// `‖ΔU'(0) + W‖`.
    pub jump: f64,
    /// `‖ΔU'(0) − W‖`, the opposite sign convention, for reference.
    pub jump_opposite_sign: f64,
    /// `min_θ (ρ − ‖U''(θ)‖/‖W‖)` over the grid.
    pub rho_slack: f64,
    /// `min_θ (ρ' − ‖U''''(θ)‖/‖W‖)` over the grid.
    pub rho_prime_slack: f64,
    pub rho: f64,
    pub rho_prime: f64,
    pub cond_n: f64,
    pub grid_points: usize,
}

/// Evaluates every residual on a `grid_points`-point uniform grid.
pub fn residuals(kernel: &LyapunovKernel, grid_points: usize) -> Result<LyapunovResiduals> {
    let s = &kernel.sys;
    let h = s.h;
    let wn = norm2(&kernel.w);
    let g = grid_points.max(2);

    let mut ode: f64 = 0.0;
    for i in 0..g {
        let t = -h + h * i as f64 / g as f64; // [−h, 0)
        let d = kernel.eval_u(t, 1)?.value;
        let r = d + kernel.u(t)? * &s.a + kernel.u(t + h)? * &s.ad;
        ode = ode.max(norm2(&r));
    }

    let u0 = kernel.u(0.0)?;
    let jump = kernel.derivative_jump()?;
    let (rho, rho_p) = kernel.derivative_bounds();
    let mut rho_slack = f64::INFINITY;
    let mut rho_p_slack = f64::INFINITY;
    for i in 0..g {
        let t = -h + 2.0 * h * i as f64 / (g - 1) as f64;
        let u2 = norm2(&kernel.eval_u(t, 2)?.value) / wn;
        let u4 = norm2(&kernel.eval_u(t, 4)?.value) / wn;
        rho_slack = rho_slack.min(rho - u2);
        rho_p_slack = rho_p_slack.min(rho_p - u4);
    }

    Ok(LyapunovResiduals {
        ode: ode / wn,
        boundary: kernel.algebraic_boundary_check()? / wn,
        symmetry: norm2(&(&u0 - u0.transpose())) / wn,
        jump: norm2(&(&jump + &kernel.w)) / wn,
        jump_opposite_sign: norm2(&(&jump - &kernel.w)) / wn,
        rho_slack,
        rho_prime_slack: rho_p_slack,
        rho,
        rho_prime: rho_p,
        cond_n: kernel.cond_n,
        grid_points: g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_example;

    fn kernel(id: u8, h: f64) -> LyapunovKernel {
        let sys = builtin_example(id, Some(2.0), h).unwrap();
        let w = WeightTriple::identity(sys.nx, sys.nz);
        build_kernel(&sys, &w, &Tolerances::default()).unwrap()
    }

    #[test]
    fn scalar_block_matrix() {
        let k = kernel(1, 0.3);
        assert_eq!(k.m, Matrix::from_row_slice(2, 2, &[-1.0, 2.0, -2.0, 1.0]));
    }

    #[test]
    fn delay_free_closed_form() {
        // A_d = 0 through a zero B factor; U(θ) = w e^{θ}/2 for θ ≤ 0.
        let sys = TdsSystem::from_factors(
            Matrix::from_element(1, 1, -1.0),
            Matrix::zeros(1, 1),
            Matrix::identity(1, 1),
            0.8,
        )
        .unwrap();
        let w = WeightTriple {
            w1: Matrix::from_element(1, 1, 1.5),
            w2: Matrix::from_element(1, 1, 0.5),
            w3: Matrix::from_element(1, 1, 0.25),
        };
        let k = build_kernel(&sys, &w, &Tolerances::default()).unwrap();
        let wv = 1.5 + 0.8 * 0.5 + 0.25;
        for t in [-0.8, -0.3, 0.0] {
            let u = k.u(t).unwrap()[(0, 0)];
            assert!((u - wv * t.exp() / 2.0).abs() < 1e-13, "θ = {t}");
        }
    }

    #[test]
    fn residuals_small_on_examples() {
        for (id, h) in [(1u8, 0.3), (2, 0.5), (3, 0.4)] {
            let r = residuals(&kernel(id, h), 101).unwrap();
            assert!(r.ode < 1e-9, "ex{id}: ode {}", r.ode);
            assert!(r.boundary < 1e-9, "ex{id}: boundary {}", r.boundary);
            assert!(r.symmetry < 1e-9, "ex{id}: symmetry {}", r.symmetry);
            assert!(r.jump < 1e-9, "ex{id}: jump {}", r.jump);
            assert!(r.rho_slack >= 0.0 && r.rho_prime_slack >= 0.0);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let k = kernel(2, 0.5);
        let e = 1e-5;
        for t in [-0.45, -0.2, -0.05] {
            let fd = (k.u(t + e).unwrap() - k.u(t - e).unwrap()) / (2.0 * e);
            let d = k.eval_u(t, 1).unwrap().value;
            assert!((fd - &d).norm() <= 1e-6 * d.norm().max(1.0));
        }
        let at0 = k.eval_u(0.0, 1).unwrap();
        assert!(at0.one_sided);
        assert!(k.eval_u(0.6, 0).is_err());
    }

    #[test]
    fn linear_in_weights() {
        let sys = builtin_example(2, None, 0.5).unwrap();
        let w = WeightTriple::balanced(&sys);
        let tol = Tolerances::default();
        let k1 = build_kernel(&sys, &w, &tol).unwrap();
        let k2 = build_kernel(&sys, &w.scaled(2.0), &tol).unwrap();
        for t in [-0.5, -0.1, 0.2] {
            let u1 = k1.u(t).unwrap();
            assert!((k2.u(t).unwrap() - &u1 * 2.0).norm() <= 1e-10 * u1.norm());
        }
    }

    #[test]
    fn rejects_bad_weights() {
        let sys = builtin_example(1, None, 0.3).unwrap();
        let mut w = WeightTriple::identity(1, 1);
        w.w2[(0, 0)] = -1.0;
        assert!(build_kernel(&sys, &w, &Tolerances::default()).is_err());
    }
}
