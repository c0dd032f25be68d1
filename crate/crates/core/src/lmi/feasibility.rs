//! Margin maximization for the order-`n` LMIs, certificate verification and
//! delay bisection.
//!
//! The strict LMIs are decided through
//!
//! ```text
//! maximize t  s.t.  Φ_n⁺ ⪰ tI,  −Φ_n⁻ ⪰ tI,  R ⪰ tI,  S ⪰ tI,
//!                   tr Φ_n⁺ + tr R + tr S ≤ scale_bound,
//! ```
//!
//! The trace bound makes the problem bounded (`t ≤ 1` at the default bound)
//! and fixes the scale of the otherwise cone-invariant certificate.

use serde::{Deserialize, Serialize};

use super::blocks::{assemble_blocks, phi_minus, phi_plus, LmiBlocks};
use super::sdp::{SdpBackend, SdpProblem, SdpStatus};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::model::{matrix_to_rows, TdsSystem};
use crate::numerics::{sym_eig, symmetrize, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Solver,
    Converse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub n: usize,
    pub p: Matrix,
    pub r: Matrix,
    pub s: Matrix,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct CertificateJson {
    n: usize,
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
    #[serde(rename = "S")]
    s: Vec<Vec<f64>>,
    provenance: Provenance,
}

fn rows_to_matrix(rows: &[Vec<f64>], name: &str) -> Result<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) || r != c {
        return Err(Error::Input(format!("{name} must be a square matrix")));
    }
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl Certificate {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(CertificateJson {
            n: self.n,
            p: matrix_to_rows(&self.p),
            r: matrix_to_rows(&self.r),
            s: matrix_to_rows(&self.s),
            provenance: self.provenance,
        })
        .expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: CertificateJson = serde_json::from_str(text)?;
        Ok(Self {
            n: c.n,
            p: rows_to_matrix(&c.p, "P")?,
            r: rows_to_matrix(&c.r, "R")?,
            s: rows_to_matrix(&c.s, "S")?,
            provenance: c.provenance,
        })
    }

    /// The same certificate scaled by `alpha`; all margins scale with it.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            p: &self.p * alpha,
            r: &self.r * alpha,
            s: &self.s * alpha,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Feasible,
    Infeasible,
    /// The backend failed to produce a usable point; says nothing about the
    /// system.
    Indeterminate,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Feasible => "feasible",
            Verdict::Infeasible => "infeasible",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

/// Smallest eigenvalues of the four definiteness conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Margins {
    pub phi_plus: f64,
    /// `λ_min(−Φ_n⁻)`
    pub phi_minus: f64,
    pub r: f64,
    pub s: f64,
}

impl Margins {
    pub fn min(&self) -> f64 {
        self.phi_plus.min(self.phi_minus).min(self.r).min(self.s)
    }
}

#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub n: usize,
    pub verdict: Verdict,
    /// `min(margins)`; `NaN` when no point is available.
    pub margin: f64,
    pub margins: Option<Margins>,
    /// Optimal `t` reported by the backend, when one ran.
    pub solver_margin: Option<f64>,
    pub certificate: Option<Certificate>,
    pub iterations: usize,
    pub backend_status: String,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.verdict == Verdict::Feasible
    }
}

/// Eigenvalue margins of a given certificate; no solver involved.
pub fn certificate_margins(sys: &TdsSystem, cert: &Certificate) -> Result<Margins> {
    let blocks = assemble_blocks(sys, cert.n)?;
    let plus = phi_plus(&blocks, &cert.p, &cert.s)?;
    let minus = phi_minus(&blocks, &cert.p, &cert.r, &cert.s)?;
    Ok(Margins {
        phi_plus: sym_eig(&plus)?.min,
        phi_minus: sym_eig(&(-minus))?.min,
        r: sym_eig(&cert.r)?.min,
        s: sym_eig(&cert.s)?.min,
    })
}

pub fn verify_certificate(
    sys: &TdsSystem,
    cert: &Certificate,
    tol: &Tolerances,
) -> Result<FeasibilityReport> {
    let margins = certificate_margins(sys, cert)?;
    let margin = margins.min();
    Ok(FeasibilityReport {
        n: cert.n,
        verdict: if margin > tol.definiteness_tol {
            Verdict::Feasible
        } else {
            Verdict::Infeasible
        },
        margin,
        margins: Some(margins),
        solver_margin: None,
        certificate: Some(cert.clone()),
        iterations: 0,
        backend_status: "eigen-check".into(),
    })
}

/// Position of `(P, R, S, t)` inside the SDP variable vector. Symmetric
/// matrices are stored by their upper triangle, column by column.
#[derive(Debug, Clone, Copy)]
pub struct VarLayout {
    pub dim: usize,
    pub nz: usize,
}

fn tri(k: usize) -> usize {
    k * (k + 1) / 2
}

impl VarLayout {
    pub fn new(blocks: &LmiBlocks) -> Self {
        Self {
            dim: blocks.dim(),
            nz: blocks.nz,
        }
    }

    pub fn len(&self) -> usize {
        tri(self.dim) + 2 * tri(self.nz) + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_index(&self) -> usize {
        self.len() - 1
    }

    fn unit(k: usize, idx: usize) -> Matrix {
        let mut m = Matrix::zeros(k, k);
        let (i, j) = Self::pair(idx);
        m[(i, j)] = 1.0;
        m[(j, i)] = 1.0;
        m
    }

    fn pair(idx: usize) -> (usize, usize) {
        let mut j = 0;
        while tri(j + 1) <= idx {
            j += 1;
        }
        (idx - tri(j), j)
    }

    fn unpack(k: usize, y: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(k, k);
        for (idx, &v) in y.iter().enumerate() {
            let (i, j) = Self::pair(idx);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    fn pack(m: &Matrix, out: &mut Vec<f64>) {
        let s = symmetrize(m);
        for j in 0..s.ncols() {
            for i in 0..=j {
                out.push(s[(i, j)]);
            }
        }
    }

    pub fn decode(&self, y: &[f64]) -> (Matrix, Matrix, Matrix, f64) {
        let a = tri(self.dim);
        let b = a + tri(self.nz);
        let c = b + tri(self.nz);
        (
            Self::unpack(self.dim, &y[..a]),
            Self::unpack(self.nz, &y[a..b]),
            Self::unpack(self.nz, &y[b..c]),
            y[c],
        )
    }

    pub fn encode(&self, p: &Matrix, r: &Matrix, s: &Matrix, t: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        Self::pack(p, &mut out);
        Self::pack(r, &mut out);
        Self::pack(s, &mut out);
        out.push(t);
        out
    }
}

/// Default trace bound `n_x + n·n_z + 2 n_z`.
pub fn default_scale_bound(blocks: &LmiBlocks) -> f64 {
    (blocks.dim() + 2 * blocks.nz) as f64
}

/// The margin-maximization SDP for `blocks`.
pub fn margin_problem(blocks: &LmiBlocks, scale_bound: f64) -> SdpProblem {
    let layout = VarLayout::new(blocks);
    let (d, nz) = (layout.dim, layout.nz);
    let zd = Matrix::zeros(d, d);
    let zz = Matrix::zeros(nz, nz);
    let sizes = vec![d, d + nz, nz, nz, 1];
    let c = vec![
        Matrix::zeros(d, d),
        Matrix::zeros(d + nz, d + nz),
        zz.clone(),
        zz.clone(),
        Matrix::from_element(1, 1, scale_bound),
    ];

    let nonzero = |m: Matrix| if m.iter().all(|&v| v == 0.0) { None } else { Some(m) };
    let gram_trace: f64 = (0..blocks.n).map(|k| (2 * k + 1) as f64).sum::<f64>() / blocks.h;
    let mut a = Vec::with_capacity(layout.len());

    // Constraint matrices: Z = C − Σ yᵢ Aᵢ, so each linear map enters with a
    // minus sign where the block must grow with the variable.
    for idx in 0..tri(d) {
        let e = VarLayout::unit(d, idx);
        let plus = phi_plus(blocks, &e, &zz).expect("shapes");
        let minus = phi_minus(blocks, &e, &zz, &zz).expect("shapes");
        let tr = e.trace();
        a.push(vec![
            nonzero(-plus),
            nonzero(minus),
            None,
            None,
            nonzero(Matrix::from_element(1, 1, tr)),
        ]);
    }
    for idx in 0..tri(nz) {
        let e = VarLayout::unit(nz, idx);
        let minus = phi_minus(blocks, &zd, &e, &zz).expect("shapes");
        a.push(vec![
            None,
            nonzero(minus),
            Some(-e.clone()),
            None,
            nonzero(Matrix::from_element(1, 1, e.trace())),
        ]);
    }
    for idx in 0..tri(nz) {
        let e = VarLayout::unit(nz, idx);
        let plus = phi_plus(blocks, &zd, &e).expect("shapes");
        let minus = phi_minus(blocks, &zd, &zz, &e).expect("shapes");
        a.push(vec![
            nonzero(-plus),
            nonzero(minus),
            None,
            Some(-e.clone()),
            nonzero(Matrix::from_element(1, 1, e.trace() * (1.0 + gram_trace))),
        ]);
    }
    a.push(vec![
        Some(Matrix::identity(d, d)),
        Some(Matrix::identity(d + nz, d + nz)),
        Some(Matrix::identity(nz, nz)),
        Some(Matrix::identity(nz, nz)),
        None,
    ]);

    let mut b = vec![0.0; layout.len()];
    b[layout.t_index()] = 1.0;
    SdpProblem {
        block_sizes: sizes,
        c,
        a,
        b,
    }
}

/// Solves the order-`n` margin problem. A returned certificate is always
/// re-verified by direct eigenvalue computation; the verdict comes from that
/// check, not from the solver's objective.
pub fn solve_feasibility(
    sys: &TdsSystem,
    n: usize,
    backend: &dyn SdpBackend,
    tol: &Tolerances,
) -> Result<FeasibilityReport> {
    let blocks = assemble_blocks(sys, n)?;
    let problem = margin_problem(&blocks, default_scale_bound(&blocks));
    let layout = VarLayout::new(&blocks);
    let sol = match backend.solve(&problem) {
        Ok(s) => s,
        Err(e) => {
            return Ok(indeterminate(n, 0, format!("{}: {e}", backend.name())));
        }
    };
    if sol.y.len() != layout.len() || sol.y.iter().any(|v| !v.is_finite()) {
        return Ok(indeterminate(
            n,
            sol.iterations,
            format!("{}: no usable point ({})", backend.name(), sol.message),
        ));
    }
    let (p, r, s, t) = layout.decode(&sol.y);
    let cert = Certificate {
        n,
        p,
        r,
        s,
        provenance: Provenance::Solver,
    };
    let margins = certificate_margins(sys, &cert)?;
    let margin = margins.min();
    let status = format!("{} {:?}: {}", backend.name(), sol.status, sol.message);
    let verdict = if margin > tol.definiteness_tol {
        Verdict::Feasible
    } else if sol.status == SdpStatus::Failed {
        Verdict::Indeterminate
    } else {
        Verdict::Infeasible
    };
    Ok(FeasibilityReport {
        n,
        verdict,
        margin,
        margins: Some(margins),
        solver_margin: Some(t),
        certificate: (verdict == Verdict::Feasible).then_some(cert),
        iterations: sol.iterations,
        backend_status: status,
    })
}

fn indeterminate(n: usize, iterations: usize, status: String) -> FeasibilityReport {
    FeasibilityReport {
        n,
        verdict: Verdict::Indeterminate,
        margin: f64::NAN,
        margins: None,
        solver_margin: None,
        certificate: None,
        iterations,
        backend_status: status,
    }
}

#[derive(Debug, Clone)]
pub struct MaxDelay {
    pub h_max: f64,
    /// Solver iterations summed over all evaluations.
    pub iterations: usize,
    pub evaluations: usize,
    /// Evaluations that came back indeterminate (treated as infeasible).
    pub indeterminate: usize,
    /// True when the upper end of the bracket was itself feasible.
    pub hit_upper: bool,
}

struct Probe<'a> {
    sys: &'a TdsSystem,
    n: usize,
    backend: &'a dyn SdpBackend,
    tol: &'a Tolerances,
    out: MaxDelay,
}

impl Probe<'_> {
    fn feasible(&mut self, h: f64) -> Result<bool> {
        let rep = solve_feasibility(&self.sys.with_delay(h)?, self.n, self.backend, self.tol)?;
        self.out.evaluations += 1;
        self.out.iterations += rep.iterations;
        if rep.verdict == Verdict::Indeterminate {
            self.out.indeterminate += 1;
        }
        Ok(rep.feasible())
    }

    fn bisect(&mut self, mut lo: f64, mut hi: f64) -> Result<f64> {
        while hi - lo > self.tol.bisection_tol {
            let mid = 0.5 * (lo + hi);
            if self.feasible(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

/// Largest delay in `[h_lo, h_hi]` for which the order-`n` LMIs are feasible,
/// by bisection to `tol.bisection_tol`.
///
/// Assumes feasibility is monotone in `h` inside the bracket — true on every
/// example we know of, but not guaranteed in general. [`max_delay_scan`] is the
/// safer alternative when in doubt.
pub fn max_delay(
    sys: &TdsSystem,
    n: usize,
    h_lo: f64,
    h_hi: f64,
    backend: &dyn SdpBackend,
    tol: &Tolerances,
) -> Result<MaxDelay> {
    if !(h_lo > 0.0 && h_lo < h_hi) {
        return Err(Error::OutOfRange(format!(
            "need 0 < h_lo < h_hi, got [{h_lo}, {h_hi}]"
        )));
    }
    let mut probe = new_probe(sys, n, backend, tol);
    if !probe.feasible(h_lo)? {
        return Err(Error::InfeasibleAtLowerBound { h: h_lo });
    }
    if probe.feasible(h_hi)? {
        probe.out.h_max = h_hi;
        probe.out.hit_upper = true;
        return Ok(probe.out);
    }
    probe.out.h_max = probe.bisect(h_lo, h_hi)?;
    Ok(probe.out)
}

fn new_probe<'a>(
    sys: &'a TdsSystem,
    n: usize,
    backend: &'a dyn SdpBackend,
    tol: &'a Tolerances,
) -> Probe<'a> {
    Probe {
        sys,
        n,
        backend,
        tol,
        out: MaxDelay {
            h_max: f64::NAN,
            iterations: 0,
            evaluations: 0,
            indeterminate: 0,
            hit_upper: false,
        },
    }
}

/// Grid-scan variant of [`max_delay`]: walks the increasing grid `hs` until
/// the first infeasible point, then bisects between it and its predecessor.
/// Returns `Ok(None)` when the first grid point is already infeasible.
pub fn max_delay_scan(
    sys: &TdsSystem,
    n: usize,
    hs: &[f64],
    backend: &dyn SdpBackend,
    tol: &Tolerances,
) -> Result<Option<MaxDelay>> {
    if hs.is_empty() || hs.windows(2).any(|w| w[0] >= w[1]) || hs[0] <= 0.0 {
        return Err(Error::OutOfRange(
            "scan grid must be positive and strictly increasing".into(),
        ));
    }
    let mut probe = new_probe(sys, n, backend, tol);
    let mut last_ok = None;
    for &h in hs {
        if probe.feasible(h)? {
            last_ok = Some(h);
            continue;
        }
        return match last_ok {
            None => Ok(None),
            Some(lo) => {
                probe.out.h_max = probe.bisect(lo, h)?;
                Ok(Some(probe.out))
            }
        };
    }
    probe.out.h_max = *hs.last().unwrap();
    probe.out.hit_upper = true;
    Ok(Some(probe.out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::sdp::InteriorPoint;
    use crate::model::builtin_example;

    #[test]
    fn layout_round_trip() {
        let sys = builtin_example(2, None, 1.0).unwrap();
        let blk = assemble_blocks(&sys, 2).unwrap();
        let lay = VarLayout::new(&blk);
        let p = Matrix::from_fn(6, 6, |i, j| (i + j) as f64 + 0.5 * (i * j) as f64);
        let r = Matrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 3.0]);
        let s = Matrix::from_row_slice(2, 2, &[2.0, -0.1, -0.1, 1.0]);
        let y = lay.encode(&p, &r, &s, 0.25);
        assert_eq!(y.len(), lay.len());
        let (p2, r2, s2, t) = lay.decode(&y);
        assert_eq!((p2, r2, s2, t), (p, r, s, 0.25));
    }

    #[test]
    fn zero_certificate_is_infeasible() {
        let sys = builtin_example(1, None, 0.5).unwrap();
        let cert = Certificate {
            n: 1,
            p: Matrix::zeros(2, 2),
            r: Matrix::zeros(1, 1),
            s: Matrix::zeros(1, 1),
            provenance: Provenance::Solver,
        };
        let rep = verify_certificate(&sys, &cert, &Tolerances::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Infeasible);
        assert_eq!(rep.margin, 0.0);
    }

    #[test]
    fn example_one_order_one() {
        let tol = Tolerances::default();
        let ipm = InteriorPoint::default();
        let sys = builtin_example(1, None, 0.5).unwrap();
        let rep = solve_feasibility(&sys, 1, &ipm, &tol).unwrap();
        assert!(rep.feasible(), "{rep:?}");
        let cert = rep.certificate.clone().unwrap();
        let again = verify_certificate(&sys, &cert, &tol).unwrap();
        assert!(again.margin >= 0.5 * rep.solver_margin.unwrap());

        let sys = sys.with_delay(0.59).unwrap();
        assert_eq!(solve_feasibility(&sys, 1, &ipm, &tol).unwrap().verdict, Verdict::Infeasible);
        assert!(solve_feasibility(&sys, 2, &ipm, &tol).unwrap().feasible());
    }

    #[test]
    fn certificate_json_round_trip() {
        let cert = Certificate {
            n: 1,
            p: Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]),
            r: Matrix::from_element(1, 1, 0.3),
            s: Matrix::from_element(1, 1, 0.7),
            provenance: Provenance::Converse,
        };
        let text = serde_json::to_string(&cert.to_json_value()).unwrap();
        assert!(text.contains("\"provenance\":\"converse\""));
        assert_eq!(Certificate::from_json(&text).unwrap(), cert);
    }
}
