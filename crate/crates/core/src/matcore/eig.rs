use num_complex::Complex64;

use super::{CMatrix, ZERO};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 64;
const OFF_DIAGONAL_TOL: f64 = 1e-15;
/// Accepted once sweeps stop making progress.
const STALL_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;

/// Eigendecomposition `A = V diag(values) V*` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermEig {
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        self.vectors.column(k)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn reconstruct(&self) -> CMatrix {
        let d = CMatrix::diag_real(&self.values);
        &(&self.vectors * &d) * &self.vectors.adjoint()
    }
}

fn check_hermitian(a: &CMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::NotHermitian { defect: f64::INFINITY });
    }
    let defect = a.hermitian_defect();
    if defect > HERMITIAN_TOL * a.max_abs() {
        return Err(Error::NotHermitian { defect });
    }
    Ok(())
}

/// Cyclic complex Jacobi on a Hermitian matrix, stored row-major in `w`.
/// When `v` is given it accumulates the rotations.
fn jacobi(n: usize, w: &mut [Complex64], mut v: Option<&mut [Complex64]>) -> Result<()> {
    let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(());
    }
    let target = OFF_DIAGONAL_TOL * norm;
    let mut prev = f64::INFINITY;
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += w[i * n + j].norm_sqr();
                }
            }
        }
        let off = off.sqrt();
        if off <= target || (off <= STALL_TOL * norm && off >= 0.5 * prev) {
            return Ok(());
        }
        prev = off;
        for p in 0..n {
            for q in p + 1..n {
                let apq = w[p * n + q];
                let g = apq.norm();
                if g == 0.0 {
                    continue;
                }
                let app = w[p * n + p].re;
                let aqq = w[q * n + q].re;
                // Rotate in the phase-aligned frame where a_pq is real and positive.
                let phase = apq / g;
                let theta = (aqq - app) / (2.0 * g);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let e = phase.conj();
                let u_pp = Complex64::new(c, 0.0);
                let u_pq = Complex64::new(s, 0.0);
                let u_qp = -e * s;
                let u_qq = e * c;
                for k in 0..n {
                    let x = w[k * n + p];
                    let y = w[k * n + q];
                    w[k * n + p] = x * u_pp + y * u_qp;
                    w[k * n + q] = x * u_pq + y * u_qq;
                }
                for k in 0..n {
                    let x = w[p * n + k];
                    let y = w[q * n + k];
                    w[p * n + k] = u_pp.conj() * x + u_qp.conj() * y;
                    w[q * n + k] = u_pq.conj() * x + u_qq.conj() * y;
                }
                w[p * n + q] = ZERO;
                w[q * n + p] = ZERO;
                w[p * n + p] = Complex64::new(w[p * n + p].re, 0.0);
                w[q * n + q] = Complex64::new(w[q * n + q].re, 0.0);
                if let Some(v) = v.as_deref_mut() {
                    for k in 0..n {
                        let x = v[k * n + p];
                        let y = v[k * n + q];
                        v[k * n + p] = x * u_pp + y * u_qp;
                        v[k * n + q] = x * u_pq + y * u_qq;
                    }
                }
            }
        }
    }
    Err(Error::NoConvergence { what: "Jacobi eigensolver", budget: MAX_SWEEPS })
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
pub fn herm_eig(a: &CMatrix) -> Result<HermEig> {
    check_hermitian(a)?;
    let n = a.rows();
    let h = a.hermitian_part();
    let mut w = h.data().to_vec();
    let mut v = CMatrix::identity(n);
    jacobi(n, &mut w, Some(v.data_mut()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[i * n + i].re.total_cmp(&w[j * n + j].re));
    let values = order.iter().map(|&i| w[i * n + i].re).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermEig { values, vectors })
}

/// Eigenvalues only, ascending. Skips the rotation accumulation.
pub fn herm_eigvals(a: &CMatrix) -> Result<Vec<f64>> {
    check_hermitian(a)?;
    let n = a.rows();
    let mut w = a.hermitian_part().data().to_vec();
    let mut vals = if n < 3 {
        jacobi(n, &mut w, None)?;
        (0..n).map(|i| w[i * n + i].re).collect()
    } else {
        let (mut d, mut e) = tridiagonalize(n, &mut w);
        tridiagonal_ql(&mut d, &mut e)?;
        d
    };
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Householder reduction of a Hermitian matrix to a real symmetric
/// tridiagonal with the same spectrum. Returns the diagonal and the
/// off-diagonal moduli (`e[i]` couples `i` and `i + 1`, last entry zero).
fn tridiagonalize(n: usize, a: &mut [Complex64]) -> (Vec<f64>, Vec<f64>) {
    let mut e = vec![0.0; n];
    let mut v = vec![ZERO; n];
    let mut p = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let alpha = (k + 1..n).map(|i| a[i * n + k].norm_sqr()).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let x0 = a[(k + 1) * n + k];
        let x0n = x0.norm_sqr().sqrt();
        let phase = if x0n > 0.0 { x0 / x0n } else { Complex64::new(1.0, 0.0) };
        for i in k + 1..n {
            v[i] = a[i * n + k];
        }
        v[k + 1] += phase * alpha;
        let vnorm2: f64 = (k + 1..n).map(|i| v[i].norm_sqr()).sum();
        let tau = 2.0 / vnorm2;
        // p = tau B v, then q = p - (tau/2)(v^* p) v, B -= v q^* + q v^*.
        for i in k + 1..n {
            p[i] = (k + 1..n).map(|j| a[i * n + j] * v[j]).sum::<Complex64>() * tau;
        }
        let vp: Complex64 = (k + 1..n).map(|i| v[i].conj() * p[i]).sum();
        let kappa = vp * (0.5 * tau);
        for i in k + 1..n {
            p[i] -= kappa * v[i];
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i * n + j] -= v[i] * p[j].conj() + p[i] * v[j].conj();
            }
        }
        e[k] = alpha;
    }
    if n >= 2 {
        e[n - 2] = a[(n - 1) * n + n - 2].norm_sqr().sqrt();
    }
    let d = (0..n).map(|i| a[i * n + i].re).collect();
    (d, e)
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal; the
/// eigenvalues overwrite `d` (unsorted).
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NoConvergence { what: "tridiagonal QL", budget: 60 });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + 1.0).sqrt();
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Outcome of a PSD test with the minimum-eigenvalue witness.
#[derive(Debug, Clone)]
pub struct PsdReport {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
    pub witness: Vec<Complex64>,
}

/// True iff `lambda_min(A) >= -tol * max(1, ||A||_max)`.
pub fn is_psd(a: &CMatrix, tol: f64) -> Result<PsdReport> {
    let eig = herm_eig(a)?;
    let scale = a.max_abs().max(1.0);
    let min = eig.min();
    let witness = if a.rows() > 0 { eig.vector(0) } else { Vec::new() };
    Ok(PsdReport { is_psd: min >= -tol * scale, min_eigenvalue: min, witness })
}

/// Orthonormal columns spanning the eigenvectors with eigenvalue at most
/// `tol * ||A||_max`.
pub fn kernel_basis(a: &CMatrix, tol: f64) -> Result<CMatrix> {
    let eig = herm_eig(a)?;
    let thr = tol * a.max_abs();
    let cols: Vec<usize> = (0..a.rows()).filter(|&k| eig.values[k] <= thr).collect();
    Ok(CMatrix::from_fn(a.rows(), cols.len(), |i, j| eig.vectors[(i, cols[j])]))
}

/// `C` with `C* C = B` and one row per eigenvalue above `tol * max(1, ||B||_max)`.
pub fn psd_factor(b: &CMatrix, tol: f64) -> Result<CMatrix> {
    let eig = herm_eig(b)?;
    let scale = b.max_abs().max(1.0);
    if eig.min() < -tol * scale {
        return Err(Error::NotPsd { min_eigenvalue: eig.min() });
    }
    let thr = tol * scale;
    let keep: Vec<usize> = (0..b.rows()).rev().filter(|&k| eig.values[k] > thr).collect();
    Ok(CMatrix::from_fn(keep.len(), b.cols(), |i, j| {
        let k = keep[i];
        eig.vectors[(j, k)].conj() * eig.values[k].sqrt()
    }))
}
