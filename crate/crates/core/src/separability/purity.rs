use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{herm_eig, CMatrix, DEFAULT_RANK_TOL};
use crate::positivity::{check_toeplitz_psd, Verdict, DEFAULT_TOL};
use crate::toeplitz::BlockToeplitz;

/// Relative tolerance for the geometric and product structure of the top
/// eigenvector.
const STRUCTURE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Purity {
    /// `T = T_n(lambda^{-1}) (x) alpha Q` with `Q` a rank-one projection.
    Pure { lambda: Complex64, alpha: f64, q: CMatrix },
    NotPure { reason: String },
}

fn not_pure(reason: impl Into<String>) -> Purity {
    Purity::NotPure { reason: reason.into() }
}

/// Decides whether a PSD element generates an extreme ray.
pub fn purity_check(t: &BlockToeplitz, tol: f64) -> Result<Purity> {
    let cert = check_toeplitz_psd(t, DEFAULT_TOL)?;
    if cert.verdict == Verdict::NotPositive {
        return Err(Error::NotPositive { margin: cert.margin });
    }
    let (n, p) = (t.n(), t.p());
    let a = t.assemble();
    let eig = herm_eig(&a)?;
    let top = eig.max();
    if top <= tol * a.max_abs().max(1.0) || a.max_abs() == 0.0 {
        return Ok(not_pure("zero"));
    }
    let dim = n * p;
    if dim > 1 && eig.values[dim - 2] > tol.max(DEFAULT_RANK_TOL) * top {
        let rank = eig.values.iter().filter(|&&v| v > tol.max(DEFAULT_RANK_TOL) * top).count();
        return Ok(not_pure(format!("rank {rank}")));
    }
    let v = eig.vector(dim - 1);
    // Reshape to n x p: row k is the k-th block of v.
    let rows: Vec<&[Complex64]> = (0..n).map(|k| &v[k * p..(k + 1) * p]).collect();
    let pivot = (0..n)
        .max_by(|&i, &j| block_norm(rows[i]).total_cmp(&block_norm(rows[j])))
        .expect("n is positive");
    let xi_norm = block_norm(rows[pivot]);
    let xi: Vec<Complex64> = rows[pivot].iter().map(|z| z / xi_norm).collect();
    let u: Vec<Complex64> = rows.iter().map(|r| r.iter().zip(&xi).map(|(a, b)| a * b.conj()).sum()).collect();
    let defect: f64 = rows
        .iter()
        .zip(&u)
        .map(|(r, uk)| r.iter().zip(&xi).map(|(a, b)| (a - uk * b).norm_sqr()).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if defect > STRUCTURE_TOL {
        return Ok(not_pure("eigenvector is not a product vector"));
    }
    let ratio = if n == 1 {
        Complex64::new(1.0, 0.0)
    } else {
        let num: Complex64 = (0..n - 1).map(|k| u[k].conj() * u[k + 1]).sum();
        let den: f64 = (0..n - 1).map(|k| u[k].norm_sqr()).sum();
        num / den
    };
    if (ratio.norm() - 1.0).abs() > STRUCTURE_TOL {
        return Ok(not_pure("left factor is not geometric on the circle"));
    }
    let geo: f64 = (0..n.saturating_sub(1)).map(|k| (u[k + 1] - ratio * u[k]).norm_sqr()).sum::<f64>().sqrt();
    if geo > STRUCTURE_TOL {
        return Ok(not_pure("left factor is not geometric"));
    }
    let ratio = ratio / ratio.norm();
    Ok(Purity::Pure { lambda: ratio.conj(), alpha: top / n as f64, q: CMatrix::outer(&xi, &xi) })
}

fn block_norm(r: &[Complex64]) -> f64 {
    r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toeplitz::universal_toeplitz;

    fn unit(t: f64) -> Complex64 {
        Complex64::from_polar(1.0, t)
    }

    #[test]
    fn pure_element_detected() {
        let lam = unit(1.2);
        let xi = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
        let q = CMatrix::outer(&xi, &xi);
        let t = universal_toeplitz(4, lam.inv()).unwrap().tensor(&q.scale_real(2.5));
        match purity_check(&t, 1e-9).unwrap() {
            Purity::Pure { lambda, alpha, q: got } => {
                assert!((lambda - lam).norm() < 1e-12);
                assert!((alpha - 2.5).abs() < 1e-12);
                assert!((&got - &q).max_abs() < 1e-12);
            }
            other => panic!("expected pure, got {other:?}"),
        }
    }

    #[test]
    fn sums_and_units_are_not_pure() {
        let e1 = CMatrix::outer(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let e2 = CMatrix::outer(&[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)], &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        let mut t = universal_toeplitz(3, unit(0.0)).unwrap().tensor(&e1);
        t.axpy(1.0, &universal_toeplitz(3, unit(std::f64::consts::PI)).unwrap().tensor(&e2));
        assert!(matches!(purity_check(&t, 1e-9).unwrap(), Purity::NotPure { .. }));
        assert!(matches!(purity_check(&BlockToeplitz::order_unit(3, 1), 1e-9).unwrap(), Purity::NotPure { .. }));
        assert!(matches!(purity_check(&BlockToeplitz::zeros(2, 2), 1e-9).unwrap(), Purity::NotPure { .. }));
    }

    #[test]
    fn indefinite_rejected() {
        let t = BlockToeplitz::new(2, 1, vec![CMatrix::from_real(1, 1, &[2.0]), CMatrix::identity(1), CMatrix::from_real(1, 1, &[2.0])]).unwrap();
        assert!(matches!(purity_check(&t, 1e-9), Err(Error::NotPositive { .. })));
    }
}
