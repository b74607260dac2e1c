//! Separable (atomic) decompositions `T = sum_j T_n(lambda_j) (x) b_j` of
//! positive block-Toeplitz matrices.

mod caratheodory;
mod greedy;
mod grid2d;
mod purity;
mod refine;
mod shift;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use caratheodory::{caratheodory_scalar, decompose_identity};
pub use greedy::{decompose_block, GreedyOptions};
pub use grid2d::{decompose_toeplitz_toeplitz, is_toeplitz_tensor, Grid2dOptions, ProductAtom, ProductDecomposition};
pub use purity::{purity_check, Purity};
pub use shift::decompose_shift;
pub(crate) use grid2d::product_element;

use crate::matcore::{herm_eigvals, CMatrix};
use crate::toeplitz::{BlockToeplitz, UNIT_CIRCLE_TOL};

/// Atoms closer than this (radians) are merged.
pub const MERGE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub lambda: Complex64,
    pub b: CMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicDecomposition {
    pub n: usize,
    pub p: usize,
    pub atoms: Vec<Atom>,
    /// Frobenius distance between the reconstruction and the target.
    pub residual: f64,
}

impl AtomicDecomposition {
    /// `sum_j T_n(lambda_j) (x) b_j`, built coefficientwise.
    pub fn reconstruct(&self) -> BlockToeplitz {
        let n = self.n as isize;
        BlockToeplitz::from_fn(self.n, self.p, |l| {
            let mut acc = CMatrix::zeros(self.p, self.p);
            for a in &self.atoms {
                acc.axpy(a.lambda.powi(l as i32), &a.b);
            }
            acc
        })
        .unwrap_or_else(|_| BlockToeplitz::zeros(n as usize, self.p))
    }

    /// `||assemble(reconstruction) - assemble(target)||_F`.
    pub fn residual_against(&self, target: &BlockToeplitz) -> f64 {
        self.reconstruct().sub(target).frobenius_norm()
    }

    /// Checks unit moduli, PSD blocks and the merge separation.
    pub fn check_atoms(&self, psd_tol: f64) -> Result<(), String> {
        for (i, a) in self.atoms.iter().enumerate() {
            if (a.lambda.norm() - 1.0).abs() > UNIT_CIRCLE_TOL {
                return Err(format!("atom {i} is off the unit circle"));
            }
            if a.b.rows() != self.p || a.b.cols() != self.p {
                return Err(format!("atom {i} block has the wrong shape"));
            }
            let scale = a.b.max_abs().max(1.0);
            let min = herm_eigvals(&a.b).map_err(|e| e.to_string())?[0];
            if min < -psd_tol * scale {
                return Err(format!("atom {i} block has eigenvalue {min:.3e}"));
            }
            for (j, c) in self.atoms.iter().enumerate().skip(i + 1) {
                if angle_distance(a.lambda, c.lambda) <= MERGE_TOL {
                    return Err(format!("atoms {i} and {j} are closer than the merge tolerance"));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn angle_distance(a: Complex64, b: Complex64) -> f64 {
    (a * b.conj()).arg().abs()
}

/// Merges atoms within `MERGE_TOL`, placing the merged atom at the
/// trace-weighted mean angle.
pub(crate) fn merge_atoms(atoms: Vec<Atom>) -> Vec<Atom> {
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        if let Some(existing) = out.iter_mut().find(|e| angle_distance(e.lambda, a.lambda) <= MERGE_TOL) {
            let w1 = existing.b.trace().re.max(0.0);
            let w2 = a.b.trace().re.max(0.0);
            if w1 + w2 > 0.0 {
                let d = (a.lambda * existing.lambda.conj()).arg();
                existing.lambda *= Complex64::from_polar(1.0, d * w2 / (w1 + w2));
            }
            existing.b += &a.b;
        } else {
            out.push(a);
        }
    }
    out
}
