//! Time-delay system `ẋ = A x + A_d x(t − h)` with the rank factorization
//! `A_d = B C`, `‖C‖ = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{norm2, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct TdsSystem {
    pub a: Matrix,
    pub ad: Matrix,
    /// `n_x × n_z`
    pub b: Matrix,
    /// `n_z × n_x` with orthonormal rows.
    pub c: Matrix,
    pub h: f64,
    pub nx: usize,
    pub nz: usize,
}

/// Rank factorization `A_d = B C` from the SVD `A_d = U Σ Vᵀ`: `C` holds the
/// leading right singular vectors (so `‖C‖ = 1` exactly), `B = U_r Σ_r`.
///
/// Singular vectors are only defined up to sign; each row of `C` is flipped so
/// its largest-magnitude entry is positive, which makes the result
/// reproducible across platforms.
pub fn factor_delay_matrix(ad: &Matrix, rank_tol: f64) -> Result<(Matrix, Matrix, usize)> {
    if ad.nrows() != ad.ncols() {
        return Err(Error::NotSquare {
            rows: ad.nrows(),
            cols: ad.ncols(),
        });
    }
    if ad.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSystem("A_d has non-finite entries".into()));
    }
    if ad.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroDelayMatrix);
    }
    let n = ad.nrows();
    let svd = ad.clone().svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Eigen("SVD did not return U".into()))?;
    let vt = svd
        .v_t
        .ok_or_else(|| Error::Eigen("SVD did not return Vᵀ".into()))?;
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let smax = sv[order[0]];
    let rank = order.iter().filter(|&&i| sv[i] > rank_tol * smax).count();
    if rank == 0 {
        return Err(Error::ZeroDelayMatrix);
    }
    let mut b = Matrix::zeros(n, rank);
    let mut c = Matrix::zeros(rank, n);
    for (r, &i) in order.iter().take(rank).enumerate() {
        let row = vt.row(i);
        let pivot = row
            .iter()
            .copied()
            .max_by(|x, y| x.abs().total_cmp(&y.abs()))
            .unwrap_or(1.0);
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        c.set_row(r, &(row * sign));
        b.set_column(r, &(u.column(i) * (sv[i] * sign)));
    }
    Ok((b, c, rank))
}

impl TdsSystem {
    /// Builds and factors a system.
    pub fn new(a: Matrix, ad: Matrix, h: f64, rank_tol: f64) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if a.shape() != ad.shape() {
            return Err(Error::Dimension(format!(
                "A is {}x{} but A_d is {}x{}",
                a.nrows(),
                a.ncols(),
                ad.nrows(),
                ad.ncols()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::InvalidSystem("empty state".into()));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSystem("A has non-finite entries".into()));
        }
        check_delay(h)?;
        let (b, c, nz) = factor_delay_matrix(&ad, rank_tol)?;
        Ok(Self {
            nx: a.nrows(),
            a,
            ad,
            b,
            c,
            h,
            nz,
        })
    }

    /// Uses a caller-supplied factorization (e.g. `(B Q, Qᵀ C)` for an
    /// orthogonal `Q`). `C` must have orthonormal rows.
    pub fn from_factors(a: Matrix, b: Matrix, c: Matrix, h: f64) -> Result<Self> {
        let nx = a.nrows();
        let nz = c.nrows();
        if a.ncols() != nx || b.nrows() != nx || b.ncols() != nz || c.ncols() != nx || nz == 0 {
            return Err(Error::Dimension("inconsistent A, B, C shapes".into()));
        }
        check_delay(h)?;
        let gram = &c * c.transpose();
        if (gram - Matrix::identity(nz, nz)).norm() > 1e-10 {
            return Err(Error::InvalidSystem("C must have orthonormal rows".into()));
        }
        let ad = &b * &c;
        Ok(Self {
            a,
            ad,
            b,
            c,
            h,
            nx,
            nz,
        })
    }

    /// Same matrices, different delay.
    pub fn with_delay(&self, h: f64) -> Result<Self> {
        check_delay(h)?;
        Ok(Self { h, ..self.clone() })
    }

    pub fn norm_a(&self) -> f64 {
        norm2(&self.a)
    }

    pub fn norm_b(&self) -> f64 {
        norm2(&self.b)
    }

    /// Parses the JSON system format `{"A": [[…]], "Ad": [[…]], "h": …}`.
    pub fn from_json(text: &str, default_rank_tol: f64) -> Result<Self> {
        let spec: SystemJson = serde_json::from_str(text)?;
        spec.into_system(default_rank_tol)
    }
}

fn check_delay(h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidSystem(format!(
            "delay must be positive and finite, got {h}"
        )));
    }
    Ok(())
}

/// On-disk system description; matrices are row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemJson {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "Ad")]
    pub ad: Vec<Vec<f64>>,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
}

impl SystemJson {
    pub fn into_system(self, default_rank_tol: f64) -> Result<TdsSystem> {
        let a = matrix_from_rows(&self.a, "A")?;
        let ad = matrix_from_rows(&self.ad, "Ad")?;
        TdsSystem::new(a, ad, self.h, self.rank_tol.unwrap_or(default_rank_tol))
    }
}

pub fn matrix_from_rows(rows: &[Vec<f64>], name: &str) -> Result<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 {
        return Err(Error::Input(format!("{name} is empty")));
    }
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Input(format!("{name} has ragged rows")));
    }
    if r != c {
        return Err(Error::Input(format!("{name} must be square, got {r}x{c}")));
    }
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Matrices of the three worked examples. `lambda` is needed for the third.
pub fn example_matrices(id: u8, lambda: Option<f64>) -> Result<(Matrix, Matrix)> {
    match id {
        1 => Ok((
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, -2.0),
        )),
        2 => Ok((
            Matrix::zeros(2, 2),
            Matrix::from_row_slice(2, 2, &[-1.0, 0.2, -0.1, 0.0]),
        )),
        3 => {
            let l = lambda.ok_or_else(|| Error::Input("example 3 requires --lambda".into()))?;
            #[rustfmt::skip]
            let a = Matrix::from_row_slice(4, 4, &[
                0.0, 0.0, 1.0, 0.0,
                0.0, 0.0, 0.0, 1.0,
                -10.0 - l, 10.0, 0.0, 0.0,
                5.0, -15.0, 0.0, -0.25,
            ]);
            let mut ad = Matrix::zeros(4, 4);
            ad[(2, 0)] = l;
            Ok((a, ad))
        }
        _ => Err(Error::Input(format!("unknown example {id} (expected 1, 2 or 3)"))),
    }
}

pub fn builtin_example(id: u8, lambda: Option<f64>, h: f64) -> Result<TdsSystem> {
    let (a, ad) = example_matrices(id, lambda)?;
    TdsSystem::new(a, ad, h, crate::config::Tolerances::default().rank_tol)
}
