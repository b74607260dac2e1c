//! Exact decomposition from the block shift. With `A = R^* R` and `E_j` the
//! `j`-th block column of `R`, Toeplitz structure makes `E_j -> E_{j+1}` an
//! isometry; any unitary extension `U` gives `tau_l = E_0^* U^{-l} E_0`, and
//! the spectral decomposition of `U` yields at most `rank T` rank-one atoms.

use std::f64::consts::TAU;

use num_complex::Complex64;

use super::{merge_atoms, Atom, AtomicDecomposition};
use crate::error::{Error, Result};
use crate::matcore::{herm_eig, kernel_basis, psd_factor, CMatrix, DEFAULT_RANK_TOL};
use crate::positivity::{check_toeplitz_psd, Verdict, DEFAULT_TOL};
use crate::toeplitz::BlockToeplitz;

/// Columns `from..to` (in blocks of `p`) of `r`.
fn block_cols(r: &CMatrix, p: usize, from: usize, to: usize) -> CMatrix {
    r.block(0, from * p, r.rows(), (to - from) * p)
}

/// A unitary `U` on `C^r` with `U x = y` for the columns of `x`, `y`
/// (which must share a Gram matrix).
fn unitary_extension(x: &CMatrix, y: &CMatrix) -> Result<CMatrix> {
    let r = x.rows();
    let g = (&x.adjoint() * x).hermitian_part();
    let eig = herm_eig(&g)?;
    let top = eig.max().max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..g.rows()).filter(|&k| eig.values[k] > DEFAULT_RANK_TOL * top).collect();
    let q = CMatrix::from_fn(g.rows(), keep.len(), |i, j| eig.vectors[(i, keep[j])] / eig.values[keep[j]].sqrt());
    let alpha = x * &q;
    let beta = y * &q;
    let alpha_perp = kernel_basis(&(&alpha * &alpha.adjoint()).hermitian_part(), 1e-8)?;
    let beta_perp = kernel_basis(&(&beta * &beta.adjoint()).hermitian_part(), 1e-8)?;
    if alpha.cols() + alpha_perp.cols() != r || alpha_perp.cols() != beta_perp.cols() {
        return Err(Error::DecompositionFailed { residual: f64::NAN });
    }
    Ok(&(&beta * &alpha.adjoint()) + &(&beta_perp * &alpha_perp.adjoint()))
}

/// Eigenpairs of a unitary matrix through the Cayley transform
/// `H = i (I - V)(I + V)^{-1}`, `V = e^{i phi} U`, with `phi` chosen to keep
/// the spectrum of `V` away from `-1`.
fn unitary_eig(u: &CMatrix) -> Result<Vec<(Complex64, Vec<Complex64>)>> {
    let r = u.rows();
    let id = CMatrix::identity(r);
    let candidates = (2 * r + 1).min(64);
    let mut best: Option<(f64, CMatrix, crate::matcore::HermEig)> = None;
    for k in 0..candidates {
        let v = u.scale(Complex64::from_polar(1.0, TAU * k as f64 / candidates as f64));
        let m = (&(&(&id + &v) + &v.adjoint()) + &id).hermitian_part();
        let eig = herm_eig(&m)?;
        if best.as_ref().map_or(true, |(gap, _, _)| eig.min() > *gap) {
            best = Some((eig.min(), v, eig));
        }
    }
    let (gap, v, m_eig) = best.expect("at least one candidate");
    if gap <= 0.0 {
        return Err(Error::DecompositionFailed { residual: f64::NAN });
    }
    let m_inv = CMatrix::from_fn(r, r, |i, j| {
        (0..r).map(|k| m_eig.vectors[(i, k)] * m_eig.vectors[(j, k)].conj() / m_eig.values[k]).sum()
    });
    let h = (&(&(&id - &v) * &(&id + &v).adjoint()) * &m_inv).scale(Complex64::i()).hermitian_part();
    let eig = herm_eig(&h)?;
    Ok((0..r)
        .map(|k| {
            let vec = eig.vector(k);
            let lam = u.quadratic_form(&vec);
            (lam / lam.norm().max(f64::MIN_POSITIVE), vec)
        })
        .collect())
}

/// Decomposition of a PSD block-Toeplitz matrix into at most `rank T`
/// rank-one atoms. The residual is reported, not enforced.
pub fn decompose_shift(t: &BlockToeplitz) -> Result<AtomicDecomposition> {
    let cert = check_toeplitz_psd(t, DEFAULT_TOL)?;
    if cert.verdict == Verdict::NotPositive {
        return Err(Error::NotPositive { margin: cert.margin });
    }
    let (n, p) = (t.n(), t.p());
    let h = t.hermitian_part();
    let r = psd_factor(&h.assemble(), DEFAULT_RANK_TOL)?;
    if r.rows() == 0 {
        return Ok(AtomicDecomposition { n, p, atoms: Vec::new(), residual: t.frobenius_norm() });
    }
    let e0 = block_cols(&r, p, 0, 1);
    let atoms = if n == 1 {
        vec![Atom { lambda: Complex64::new(1.0, 0.0), b: h.coeff(0).clone() }]
    } else {
        let u = unitary_extension(&block_cols(&r, p, 0, n - 1), &block_cols(&r, p, 1, n))?;
        let e0a = e0.adjoint();
        unitary_eig(&u)?
            .into_iter()
            .map(|(lam, v)| {
                let w = e0a.mul_vec(&v);
                Atom { lambda: lam.conj(), b: CMatrix::outer(&w, &w) }
            })
            .filter(|a| a.b.max_abs() > 0.0)
            .collect()
    };
    let mut dec = AtomicDecomposition { n, p, atoms: merge_atoms(atoms), residual: 0.0 };
    dec.residual = dec.residual_against(t);
    Ok(dec)
}
