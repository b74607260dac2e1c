//! Finite-spectrum dilations `T = (1_n (x) w)^* T_n(u) (1_n (x) w)` built
//! from atomic decompositions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{psd_factor, CMatrix, DEFAULT_RANK_TOL, ZERO};
use crate::separability::AtomicDecomposition;
use crate::toeplitz::BlockToeplitz;

const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub lambda: Complex64,
    pub mult: usize,
}

/// `u` (`q x q`, diagonal in the standard basis) and `w` (`q x p`). The
/// spectral projections are the coordinate projections onto consecutive
/// runs of `mult` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilationFactorization {
    pub q: usize,
    pub u: CMatrix,
    pub w: CMatrix,
    pub spectrum: Vec<SpectrumEntry>,
}

impl DilationFactorization {
    /// `(lambda_j, p_j)` with `p_j` the coordinate projection of slot `j`.
    pub fn projections(&self) -> Vec<(Complex64, CMatrix)> {
        let mut start = 0;
        self.spectrum
            .iter()
            .map(|e| {
                let s = start;
                start += e.mult;
                let p = CMatrix::from_fn(self.q, self.q, |i, j| {
                    if i == j && (s..s + e.mult).contains(&i) {
                        Complex64::new(1.0, 0.0)
                    } else {
                        ZERO
                    }
                });
                (e.lambda, p)
            })
            .collect()
    }
}

/// Factors every block as `b_j = c_j^* c_j` and stacks the factors into `w`;
/// `u` carries `lambda_j` on the rows of `c_j`. Numerically zero blocks are
/// dropped with a warning.
pub fn naimark_from_atoms(dec: &AtomicDecomposition) -> Result<DilationFactorization> {
    let p = dec.p;
    let mut factors: Vec<(Complex64, CMatrix)> = Vec::new();
    for (j, atom) in dec.atoms.iter().enumerate() {
        let c = psd_factor(&atom.b.hermitian_part(), DEFAULT_RANK_TOL)?;
        if c.rows() == 0 {
            log::warn!("atom {j} has a numerically zero block and is dropped");
            continue;
        }
        factors.push((atom.lambda, c));
    }
    if factors.is_empty() {
        return Err(Error::DegenerateAtom);
    }
    let q: usize = factors.iter().map(|(_, c)| c.rows()).sum();
    let mut w = CMatrix::zeros(q, p);
    let mut diag = Vec::with_capacity(q);
    let mut spectrum = Vec::with_capacity(factors.len());
    let mut row = 0;
    for (lambda, c) in &factors {
        w.set_block(row, 0, c);
        row += c.rows();
        diag.extend(std::iter::repeat(*lambda).take(c.rows()));
        spectrum.push(SpectrumEntry { lambda: *lambda, mult: c.rows() });
    }
    let u = CMatrix::from_fn(q, q, |i, j| if i == j { diag[i] } else { ZERO });
    Ok(DilationFactorization { q, u, w, spectrum })
}

pub fn unitary_defect(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    (&(&u.adjoint() * u) - &CMatrix::identity(u.rows())).max_abs()
}

/// `T_n(u)`: coefficients `u^l`, with `(u^*)^{|l|}` for negative `l`.
pub fn universal_at_unitary(n: usize, u: &CMatrix) -> Result<BlockToeplitz> {
    let defect = unitary_defect(u);
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary { defect });
    }
    let q = u.rows();
    let ua = u.adjoint();
    let mut pos = vec![CMatrix::identity(q)];
    let mut neg = vec![CMatrix::identity(q)];
    for k in 1..n {
        pos.push(&pos[k - 1] * u);
        neg.push(&neg[k - 1] * &ua);
    }
    BlockToeplitz::from_fn(n, q, |l| if l >= 0 { pos[l as usize].clone() } else { neg[(-l) as usize].clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizationCheck {
    /// `||T - (1 (x) w)^* T_n(u) (1 (x) w)||_F` on assembled matrices.
    pub residual: f64,
    /// `max_l ||tau_l - w^* u^l w||_max`.
    pub coefficient_defect: f64,
}

pub fn verify_factorization(t: &BlockToeplitz, fac: &DilationFactorization) -> Result<FactorizationCheck> {
    let (n, p, q) = (t.n(), t.p(), fac.q);
    if fac.w.rows() != q || fac.w.cols() != p || fac.u.rows() != q || fac.u.cols() != q {
        return Err(Error::DimensionMismatch(format!(
            "factorization has u {}x{}, w {}x{}, element has p = {p}",
            fac.u.rows(),
            fac.u.cols(),
            fac.w.rows(),
            fac.w.cols()
        )));
    }
    let tu = universal_at_unitary(n, &fac.u)?;
    let big_w = CMatrix::identity(n).kron(&fac.w);
    let dilated = &(&big_w.adjoint() * &tu.assemble()) * &big_w;
    let residual = (&t.assemble() - &dilated).frobenius_norm();
    let wa = fac.w.adjoint();
    let n_i = n as isize;
    let coefficient_defect = (-n_i + 1..n_i)
        .map(|l| (t.coeff(l) - &(&(&wa * tu.coeff(l)) * &fac.w)).max_abs())
        .fold(0.0, f64::max);
    Ok(FactorizationCheck { residual, coefficient_defect })
}
