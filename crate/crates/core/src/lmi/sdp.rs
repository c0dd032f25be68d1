//! Semidefinite programs in LMI form and the backends that solve them.
//!
//! A problem is
//!
//! ```text
//! maximize  bᵀy   subject to   Z(y) = C − Σᵢ yᵢ Aᵢ ⪰ 0,
//! ```
//!
//! where `C` and every `Aᵢ` are block diagonal with symmetric blocks (a
//! scalar inequality is a 1×1 block). The interior-point backend solves this
//! together with its primal `min ⟨C, X⟩ s.t. ⟨Aᵢ, X⟩ = bᵢ, X ⪰ 0`.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::numerics::{sym_eig, symmetrize, Matrix};

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub block_sizes: Vec<usize>,
    pub c: Vec<Matrix>,
    /// `a[i][k]`: block `k` of `Aᵢ`; `None` means a zero block.
    pub a: Vec<Vec<Option<Matrix>>>,
    pub b: Vec<f64>,
}

impl SdpProblem {
    pub fn num_vars(&self) -> usize {
        self.b.len()
    }

    fn validate(&self) -> Result<()> {
        let nb = self.block_sizes.len();
        let bad = |msg: String| Err(Error::Dimension(msg));
        if self.c.len() != nb {
            return bad(format!("{} constant blocks for {nb} block sizes", self.c.len()));
        }
        if self.a.len() != self.b.len() {
            return bad(format!("{} constraint matrices for {} variables", self.a.len(), self.b.len()));
        }
        for (k, (&s, c)) in self.block_sizes.iter().zip(&self.c).enumerate() {
            if c.shape() != (s, s) {
                return bad(format!("constant block {k} is not {s}x{s}"));
            }
        }
        for (i, ai) in self.a.iter().enumerate() {
            if ai.len() != nb {
                return bad(format!("constraint {i} has {} blocks, expected {nb}", ai.len()));
            }
            for (k, blk) in ai.iter().enumerate() {
                if let Some(m) = blk {
                    let s = self.block_sizes[k];
                    if m.shape() != (s, s) {
                        return bad(format!("constraint {i}, block {k} is not {s}x{s}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// `Z(y) = C − Σ yᵢ Aᵢ`, block by block.
    pub fn slack(&self, y: &[f64]) -> Vec<Matrix> {
        let mut z = self.c.clone();
        for (ai, &yi) in self.a.iter().zip(y) {
            if yi == 0.0 {
                continue;
            }
            for (zk, blk) in z.iter_mut().zip(ai) {
                if let Some(m) = blk {
                    *zk -= m * yi;
                }
            }
        }
        z
    }

    /// Smallest eigenvalue of `Z(y)` over all blocks.
    pub fn min_slack(&self, y: &[f64]) -> Result<f64> {
        let mut min = f64::INFINITY;
        for z in self.slack(y) {
            min = min.min(sym_eig(&z)?.min);
        }
        Ok(min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    /// Converged to the requested accuracy.
    Optimal,
    /// Stopped early but with small residuals; the point is usable.
    Inaccurate,
    /// No usable point.
    Failed,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub y: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub message: String,
}

/// Anything that can produce a candidate `y` for an [`SdpProblem`].
pub trait SdpBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, problem: &SdpProblem) -> Result<SdpSolution>;
}

/// Primal–dual interior-point method: HKM search direction, Mehrotra
/// predictor–corrector, infeasible start.
#[derive(Debug, Clone, Copy)]
pub struct InteriorPoint {
    pub max_iter: usize,
    /// Relative tolerance on primal/dual residuals and duality gap.
    pub tol: f64,
    /// Fraction of the step to the cone boundary actually taken.
    pub step_fraction: f64,
}

impl Default for InteriorPoint {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-9,
            step_fraction: 0.95,
        }
    }
}

type Blocks = Vec<Matrix>;

fn inner(a: &[Matrix], b: &[Matrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn fro(a: &[Matrix]) -> f64 {
    inner(a, a).sqrt()
}

/// `tr(A K)`; `K` need not be symmetric.
fn trace_prod(a: &Matrix, k: &Matrix) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)] * k[(j, i)];
        }
    }
    s
}

/// Largest `α ≤ cap` keeping `X + α ΔX ⪰ 0`, given `X ≻ 0`.
fn max_step(x: &[Matrix], dx: &[Matrix], cap: f64) -> Result<f64> {
    let mut alpha = cap;
    for (xk, dk) in x.iter().zip(dx) {
        let chol = Cholesky::new(xk.clone())
            .ok_or_else(|| Error::Backend("iterate left the cone".into()))?;
        let l = chol.l();
        let linv = l
            .solve_lower_triangular(&Matrix::identity(xk.nrows(), xk.nrows()))
            .ok_or_else(|| Error::Backend("singular Cholesky factor".into()))?;
        let m = &linv * dk * linv.transpose();
        let lmin = sym_eig(&m)?.min;
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    Ok(alpha)
}

fn inverse_spd(m: &Matrix) -> Option<Matrix> {
    Cholesky::new(m.clone()).map(|c| c.inverse())
}

struct State {
    x: Blocks,
    y: Vec<f64>,
    z: Blocks,
}

impl InteriorPoint {
    fn operator(&self, p: &SdpProblem, k: &[Matrix]) -> Vec<f64> {
        p.a.iter()
            .map(|ai| {
                ai.iter()
                    .zip(k)
                    .map(|(blk, kk)| blk.as_ref().map_or(0.0, |m| trace_prod(m, kk)))
                    .sum()
            })
            .collect()
    }

    fn adjoint(&self, p: &SdpProblem, y: &[f64]) -> Blocks {
        let mut out: Blocks = p.block_sizes.iter().map(|&s| Matrix::zeros(s, s)).collect();
        for (ai, &yi) in p.a.iter().zip(y) {
            if yi == 0.0 {
                continue;
            }
            for (o, blk) in out.iter_mut().zip(ai) {
                if let Some(m) = blk {
                    *o += m * yi;
                }
            }
        }
        out
    }

    fn initial_point(&self, p: &SdpProblem) -> State {
        let n_total: usize = p.block_sizes.iter().sum();
        let sqrt_n = (n_total as f64).sqrt();
        let mut xi: f64 = 10.0f64.max(sqrt_n);
        let mut eta: f64 = 10.0f64.max(sqrt_n).max(fro(&p.c));
        for (ai, &bi) in p.a.iter().zip(&p.b) {
            let na = ai
                .iter()
                .flatten()
                .map(|m| m.norm_squared())
                .sum::<f64>()
                .sqrt();
            xi = xi.max(n_total as f64 * (1.0 + bi.abs()) / (1.0 + na));
            eta = eta.max(na);
        }
        State {
            x: p.block_sizes.iter().map(|&s| Matrix::identity(s, s) * xi).collect(),
            y: vec![0.0; p.num_vars()],
            z: p.block_sizes.iter().map(|&s| Matrix::identity(s, s) * eta).collect(),
        }
    }

    fn run(&self, p: &SdpProblem) -> Result<SdpSolution> {
        p.validate()?;
        let m = p.num_vars();
        let n_total: f64 = p.block_sizes.iter().sum::<usize>() as f64;
        let norm_b = p.b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm_c = fro(&p.c);
        let mut st = self.initial_point(p);
        let mut last = (f64::INFINITY, f64::INFINITY, f64::INFINITY);

        for iter in 0..self.max_iter {
            let ax = self.operator(p, &st.x);
            let rp: Vec<f64> = p.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let aty = self.adjoint(p, &st.y);
            let rd: Blocks = p
                .c
                .iter()
                .zip(&st.z)
                .zip(&aty)
                .map(|((c, z), a)| c - z - a)
                .collect();
            let pobj = inner(&p.c, &st.x);
            let dobj: f64 = p.b.iter().zip(&st.y).map(|(b, y)| b * y).sum();
            let mu = inner(&st.x, &st.z) / n_total;
            let pinf = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + norm_b);
            let dinf = fro(&rd) / (1.0 + norm_c);
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            last = (pinf, dinf, gap);
            if !(pinf.is_finite() && dinf.is_finite() && gap.is_finite()) {
                return Ok(self.finish(p, st, iter, last, false));
            }
            if pinf < self.tol && dinf < self.tol && gap < self.tol {
                return Ok(self.finish(p, st, iter, last, true));
            }
            if st.y.iter().any(|v| v.abs() > 1e12) {
                return Ok(self.finish(p, st, iter, last, false));
            }

            let zinv: Blocks = match st.z.iter().map(inverse_spd).collect::<Option<Vec<_>>>() {
                Some(v) => v,
                None => return Ok(self.finish(p, st, iter, last, false)),
            };

            // Schur complement M_ij = tr(A_i X A_j Z⁻¹).
            let g: Vec<Vec<Option<Matrix>>> = p
                .a
                .iter()
                .map(|aj| {
                    aj.iter()
                        .enumerate()
                        .map(|(k, blk)| blk.as_ref().map(|a| &st.x[k] * a * &zinv[k]))
                        .collect()
                })
                .collect();
            let mut schur = Matrix::zeros(m, m);
            for j in 0..m {
                for i in 0..=j {
                    let mut s = 0.0;
                    for k in 0..p.block_sizes.len() {
                        if let (Some(ai), Some(gj)) = (&p.a[i][k], &g[j][k]) {
                            s += trace_prod(ai, gj);
                        }
                    }
                    schur[(i, j)] = s;
                    schur[(j, i)] = s;
                }
            }
            let scale = (0..m).map(|i| schur[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
            let chol = match Cholesky::new(schur.clone()) {
                Some(c) => c,
                None => {
                    let mut reg = schur;
                    for i in 0..m {
                        reg[(i, i)] += 1e-13 * scale;
                    }
                    match Cholesky::new(reg) {
                        Some(c) => c,
                        None => return Ok(self.finish(p, st, iter, last, false)),
                    }
                }
            };

            let direction = |target: &Blocks| -> (Vec<f64>, Blocks, Blocks) {
                // ΔX Z + X ΔZ = T − X Z, A(ΔX) = Rp, ΔZ = Rd − A*(Δy)
                let k: Blocks = (0..p.block_sizes.len())
                    .map(|b| &target[b] * &zinv[b] - &st.x[b] - &st.x[b] * &rd[b] * &zinv[b])
                    .collect();
                let ak = self.operator(p, &k);
                let rhs = Matrix::from_iterator(m, 1, rp.iter().zip(&ak).map(|(r, a)| r - a));
                let dy = chol.solve(&rhs);
                let dy: Vec<f64> = dy.iter().copied().collect();
                let atdy = self.adjoint(p, &dy);
                let dz: Blocks = rd.iter().zip(&atdy).map(|(r, a)| r - a).collect();
                let dx: Blocks = (0..p.block_sizes.len())
                    .map(|b| {
                        let raw = &target[b] * &zinv[b] - &st.x[b] - &st.x[b] * &dz[b] * &zinv[b];
                        symmetrize(&raw)
                    })
                    .collect();
                (dy, dx, dz)
            };

            let zero_target: Blocks = p.block_sizes.iter().map(|&s| Matrix::zeros(s, s)).collect();
            let (_, dxa, dza) = direction(&zero_target);
            let ap = max_step(&st.x, &dxa, 1.0)?;
            let ad = max_step(&st.z, &dza, 1.0)?;
            let x_aff: Blocks = st.x.iter().zip(&dxa).map(|(x, d)| x + d * ap).collect();
            let z_aff: Blocks = st.z.iter().zip(&dza).map(|(z, d)| z + d * ad).collect();
            let mu_aff = inner(&x_aff, &z_aff) / n_total;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            let target: Blocks = (0..p.block_sizes.len())
                .map(|b| {
                    let s = p.block_sizes[b];
                    Matrix::identity(s, s) * (sigma * mu) - &dxa[b] * &dza[b]
                })
                .collect();
            let (dy, dx, dz) = direction(&target);
            let ap = (self.step_fraction * max_step(&st.x, &dx, f64::INFINITY)?).min(1.0);
            let ad = (self.step_fraction * max_step(&st.z, &dz, f64::INFINITY)?).min(1.0);
            for b in 0..p.block_sizes.len() {
                st.x[b] = symmetrize(&(&st.x[b] + &dx[b] * ap));
                st.z[b] = symmetrize(&(&st.z[b] + &dz[b] * ad));
            }
            for (y, d) in st.y.iter_mut().zip(&dy) {
                *y += d * ad;
            }
        }
        Ok(self.finish(p, st, self.max_iter, last, false))
    }

    fn finish(
        &self,
        p: &SdpProblem,
        st: State,
        iterations: usize,
        (pinf, dinf, gap): (f64, f64, f64),
        converged: bool,
    ) -> SdpSolution {
        let usable = pinf.max(dinf).max(gap) < 1e-6;
        let status = if converged {
            SdpStatus::Optimal
        } else if usable {
            SdpStatus::Inaccurate
        } else {
            SdpStatus::Failed
        };
        let objective = p.b.iter().zip(&st.y).map(|(b, y)| b * y).sum();
        SdpSolution {
            status,
            y: st.y,
            objective,
            iterations,
            message: format!("pinf {pinf:.2e}, dinf {dinf:.2e}, gap {gap:.2e}"),
        }
    }
}

impl SdpBackend for InteriorPoint {
    fn name(&self) -> &'static str {
        "ipm"
    }

    fn solve(&self, problem: &SdpProblem) -> Result<SdpSolution> {
        self.run(problem)
    }
}

/// Does no optimization: evaluates an externally supplied `y` and reports the
/// smallest eigenvalue of `Z(y)` in the message.
#[derive(Debug, Clone)]
pub struct EigenCheck {
    pub candidate: Vec<f64>,
}

impl SdpBackend for EigenCheck {
    fn name(&self) -> &'static str {
        "eigen-check"
    }

    fn solve(&self, problem: &SdpProblem) -> Result<SdpSolution> {
        problem.validate()?;
        if self.candidate.len() != problem.num_vars() {
            return Err(Error::Dimension(format!(
                "candidate has {} entries, problem has {} variables",
                self.candidate.len(),
                problem.num_vars()
            )));
        }
        let min = problem.min_slack(&self.candidate)?;
        let objective = problem.b.iter().zip(&self.candidate).map(|(b, y)| b * y).sum();
        Ok(SdpSolution {
            status: if min >= 0.0 {
                SdpStatus::Optimal
            } else {
                SdpStatus::Failed
            },
            y: self.candidate.clone(),
            objective,
            iterations: 0,
            message: format!("min slack eigenvalue {min:.6e}"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> Matrix {
        Matrix::from_diagonal(&nalgebra::DVector::from_row_slice(v))
    }

    #[test]
    fn largest_eigenvalue_as_sdp() {
        // max -t s.t. tI - M ⪰ 0  →  t* = λ_max(M)
        let m = Matrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let p = SdpProblem {
            block_sizes: vec![3],
            c: vec![-m.clone()],
            a: vec![vec![Some(-Matrix::identity(3, 3))]],
            b: vec![-1.0],
        };
        let sol = InteriorPoint::default().solve(&p).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        let want = sym_eig(&m).unwrap().max;
        assert!((sol.y[0] - want).abs() < 1e-7, "{} vs {want}", sol.y[0]);
    }

    #[test]
    fn linear_program_in_diagonal_blocks() {
        // max y1 + y2 s.t. y1 ≤ 1, y2 ≤ 2, y1 + y2 ≤ 2.5
        let p = SdpProblem {
            block_sizes: vec![3],
            c: vec![diag(&[1.0, 2.0, 2.5])],
            a: vec![
                vec![Some(diag(&[1.0, 0.0, 1.0]))],
                vec![Some(diag(&[0.0, 1.0, 1.0]))],
            ],
            b: vec![1.0, 1.0],
        };
        let sol = InteriorPoint::default().solve(&p).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.objective - 2.5).abs() < 1e-7);
    }

    #[test]
    fn eigen_check_reports_slack() {
        let p = SdpProblem {
            block_sizes: vec![1, 2],
            c: vec![diag(&[1.0]), diag(&[1.0, 1.0])],
            a: vec![vec![Some(diag(&[1.0])), Some(diag(&[0.5, 0.0]))]],
            b: vec![1.0],
        };
        let ok = EigenCheck { candidate: vec![0.5] }.solve(&p).unwrap();
        assert_eq!(ok.status, SdpStatus::Optimal);
        assert!((p.min_slack(&[0.5]).unwrap() - 0.5).abs() < 1e-15);
        let bad = EigenCheck { candidate: vec![3.0] }.solve(&p).unwrap();
        assert_eq!(bad.status, SdpStatus::Failed);
        assert!(EigenCheck { candidate: vec![] }.solve(&p).is_err());
    }
}
