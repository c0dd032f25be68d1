//! The structured matrices `𝐀_n`, `𝐁_n`, `Ψ(R, S)` and the two LMIs `Φ_n⁺ ≻ 0`,
//! `Φ_n⁻ ≺ 0` of the order-`n` Bessel–Legendre stability test.

use crate::error::{Error, Result};
use crate::legendre::LegendreBasis;
use crate::model::TdsSystem;
use crate::numerics::{herm, kron, Matrix};

#[derive(Debug, Clone)]
pub struct LmiBlocks {
    pub n: usize,
    pub h: f64,
    pub nx: usize,
    pub nz: usize,
    /// `[[A, 0], [ℓ_n(1) C, −ℒ_n / h]]`
    pub an: Matrix,
    /// `[B; −ℓ_n(0)]`
    pub bn: Matrix,
    /// `𝓘_n ⊗ I_{n_z}`; the weight of `S` and `R` in the Legendre block.
    pub gram: Matrix,
    pub c: Matrix,
}

impl LmiBlocks {
    /// Size of `P_n` (and of `Φ_n⁺`).
    pub fn dim(&self) -> usize {
        self.nx + self.n * self.nz
    }

    /// `𝓘_n ⊗ M` for an `n_z × n_z` matrix `M`.
    pub fn gram_kron(&self, m: &Matrix) -> Matrix {
        let weights = Matrix::from_diagonal(&nalgebra::DVector::from_fn(self.n, |k, _| {
            (2 * k + 1) as f64
        }));
        kron(&weights, m)
    }

    /// `Ψ(R, S) = diag(Cᵀ(hR + S)C, −(𝓘_n ⊗ R)/h)`.
    pub fn psi(&self, r: &Matrix, s: &Matrix) -> Matrix {
        let d = self.dim();
        let mut out = Matrix::zeros(d, d);
        let top = self.c.transpose() * (r * self.h + s) * &self.c;
        out.view_mut((0, 0), (self.nx, self.nx)).copy_from(&top);
        let low = self.gram_kron(r) * (-1.0 / self.h);
        out.view_mut((self.nx, self.nx), low.shape()).copy_from(&low);
        out
    }

    fn check(&self, p: &Matrix, r: Option<&Matrix>, s: &Matrix) -> Result<()> {
        let d = self.dim();
        if p.shape() != (d, d) {
            return Err(Error::Dimension(format!(
                "P must be {d}x{d}, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        for (name, m) in [("S", Some(s)), ("R", r)] {
            if let Some(m) = m {
                if m.shape() != (self.nz, self.nz) {
                    return Err(Error::Dimension(format!(
                        "{name} must be {0}x{0}, got {1}x{2}",
                        self.nz,
                        m.nrows(),
                        m.ncols()
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn assemble_blocks(sys: &TdsSystem, n: usize) -> Result<LmiBlocks> {
    let basis = LegendreBasis::new(n, sys.nz)?;
    let (nx, nz, h) = (sys.nx, sys.nz, sys.h);
    let d = nx + n * nz;

    let mut an = Matrix::zeros(d, d);
    an.view_mut((0, 0), (nx, nx)).copy_from(&sys.a);
    let ell1 = basis.ell_vector(1.0)?;
    an.view_mut((nx, 0), (n * nz, nx)).copy_from(&(&ell1 * &sys.c));
    let l = basis.differentiation_matrix() * (-1.0 / h);
    an.view_mut((nx, nx), (n * nz, n * nz)).copy_from(&l);

    let mut bn = Matrix::zeros(d, nz);
    bn.view_mut((0, 0), (nx, nz)).copy_from(&sys.b);
    let ell0 = basis.ell_vector(0.0)?;
    bn.view_mut((nx, 0), (n * nz, nz)).copy_from(&(-ell0));

    Ok(LmiBlocks {
        n,
        h,
        nx,
        nz,
        an,
        bn,
        gram: basis.gram_inverse(),
        c: sys.c.clone(),
    })
}

/// `Φ_n⁺ = P + diag(0, (𝓘_n ⊗ S)/h)`.
pub fn phi_plus(blocks: &LmiBlocks, p: &Matrix, s: &Matrix) -> Result<Matrix> {
    blocks.check(p, None, s)?;
    let mut out = p.clone();
    let low = blocks.gram_kron(s) / blocks.h;
    let k = blocks.nx;
    let mut view = out.view_mut((k, k), low.shape());
    view += &low;
    Ok(out)
}

/// `Φ_n⁻ = [[ℋ(P 𝐀_n) + Ψ(R, S), P 𝐁_n], [∗, −S]]`.
pub fn phi_minus(blocks: &LmiBlocks, p: &Matrix, r: &Matrix, s: &Matrix) -> Result<Matrix> {
    blocks.check(p, Some(r), s)?;
    let d = blocks.dim();
    let nz = blocks.nz;
    let mut out = Matrix::zeros(d + nz, d + nz);
    let top = herm(&(p * &blocks.an)) + blocks.psi(r, s);
    out.view_mut((0, 0), (d, d)).copy_from(&top);
    let pb = p * &blocks.bn;
    out.view_mut((0, d), (d, nz)).copy_from(&pb);
    out.view_mut((d, 0), (nz, d)).copy_from(&pb.transpose());
    out.view_mut((d, d), (nz, nz)).copy_from(&(-s));
    Ok(out)
}
