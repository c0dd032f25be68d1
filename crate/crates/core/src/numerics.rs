//! Dense real matrix kernel.
//!
//! Everything here works on [`Matrix`], a plain column-major `DMatrix<f64>`.
//! Problem sizes stay in the low hundreds, so no sparse or blocked storage.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Spectrum of a symmetric matrix, ascending.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, ordered like `eigenvalues`.
    pub eigenvectors: Matrix,
    pub min: f64,
    pub max: f64,
}

fn ensure_square(m: &Matrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

/// Kronecker product `a ⊗ b`: block (i, j) of the result is `a[(i, j)] * b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            for q in 0..bc {
                for p in 0..br {
                    out[(i * br + p, j * bc + q)] = s * b[(p, q)];
                }
            }
        }
    }
    out
}

/// Stacks the columns of `m` top to bottom.
pub fn vec(m: &Matrix) -> Matrix {
    Matrix::from_column_slice(m.len(), 1, m.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &Matrix, rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "cannot reshape {} entries into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(Matrix::from_column_slice(rows, cols, v.as_slice()))
}

/// `(m + mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// `m + mᵀ`.
pub fn herm(m: &Matrix) -> Matrix {
    m + m.transpose()
}

pub fn block_diag(blocks: &[&Matrix]) -> Matrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

fn one_norm(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

// Padé coefficients b_0..b_m of the diagonal [m/m] approximant of exp.
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Backward-error thresholds on the 1-norm for each degree.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a diagonal Padé approximant
/// (degrees 3 to 13, chosen from the 1-norm).
pub fn expm(m: &Matrix) -> Result<Matrix> {
    ensure_square(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let ident = Matrix::identity(n, n);
    let norm = one_norm(m);

    for &(deg, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match deg {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let (u, v) = pade_low(m, coeffs, &ident);
            return solve_pade(&u, &v);
        }
    }

    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = m / 2f64.powi(s);
    let (u, v) = pade13(&scaled, &ident);
    let mut r = solve_pade(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_low(a: &Matrix, b: &[f64], ident: &Matrix) -> (Matrix, Matrix) {
    let a2 = a * a;
    // odd part: a * (b1 I + b3 a² + ...), even part: b0 I + b2 a² + ...
    let mut power = ident.clone();
    let mut odd = ident * b[1];
    let mut even = ident * b[0];
    for k in 1..b.len() / 2 {
        power = &power * &a2;
        odd += &power * b[2 * k + 1];
        even += &power * b[2 * k];
    }
    (a * odd, even)
}

fn pade13(a: &Matrix, ident: &Matrix) -> (Matrix, Matrix) {
    let b = &PADE13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (u_inner + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + ident * b[1]);
    let v_inner = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = v_inner + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + ident * b[0];
    (u, v)
}

fn solve_pade(u: &Matrix, v: &Matrix) -> Result<Matrix> {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::Eigen("singular Padé denominator".into()))
}

/// Eigen-decomposition of the symmetric part of `m`, ascending.
pub fn sym_eig(m: &Matrix) -> Result<SymEig> {
    ensure_square(m)?;
    if m.nrows() == 0 {
        return Ok(SymEig {
            eigenvalues: Vec::new(),
            eigenvectors: Matrix::zeros(0, 0),
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        });
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    let mut eigenvectors = Matrix::zeros(m.nrows(), m.ncols());
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEig {
        min: eigenvalues[0],
        max: *eigenvalues.last().unwrap(),
        eigenvalues,
        eigenvectors,
    })
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn lambda_min(m: &Matrix) -> Result<f64> {
    Ok(sym_eig(m)?.min)
}

/// Spectral norm, `sqrt(λ_max(mᵀm))`.
pub fn norm2(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = if m.nrows() >= m.ncols() {
        m.transpose() * m
    } else {
        m * m.transpose()
    };
    match sym_eig(&gram) {
        Ok(e) => e.max.max(0.0).sqrt(),
        Err(_) => f64::NAN,
    }
}
