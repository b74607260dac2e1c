use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{merge_atoms, Atom, AtomicDecomposition};
use crate::error::{Error, Result};
use crate::matcore::{lstsq, nnls, RMatrix};
use crate::positivity::{check_toeplitz_psd, Verdict, DEFAULT_TOL};
use crate::toeplitz::{universal_unchecked, BlockToeplitz};

#[derive(Debug, Clone)]
pub struct Grid2dOptions {
    pub tol: f64,
    /// Points per axis of the `(theta, phi)` grid.
    pub grid: usize,
    pub refine_iterations: usize,
}

impl Default for Grid2dOptions {
    fn default() -> Self {
        Grid2dOptions { tol: 1e-7, grid: 128, refine_iterations: 50 }
    }
}

/// `weight * T_2(lambda) (x) T_2(mu)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductAtom {
    pub lambda: Complex64,
    pub mu: Complex64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductDecomposition {
    pub atoms: Vec<ProductAtom>,
    pub residual: f64,
}

impl ProductDecomposition {
    pub fn reconstruct(&self) -> BlockToeplitz {
        let mut acc = BlockToeplitz::zeros(2, 2);
        for a in &self.atoms {
            acc.axpy(a.weight, &product_element(a.lambda, a.mu));
        }
        acc
    }

    /// Regroups by the first leg: `b = sum weight T_2(mu)` per `lambda`.
    pub fn to_atomic(&self, target: &BlockToeplitz) -> AtomicDecomposition {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom { lambda: a.lambda, b: universal_unchecked(2, a.mu).assemble().scale_real(a.weight) })
            .collect();
        let mut dec = AtomicDecomposition { n: 2, p: 2, atoms: merge_atoms(atoms), residual: 0.0 };
        dec.residual = dec.residual_against(target);
        dec
    }
}

/// True when `t` has `n = p = 2` and each block is itself Toeplitz.
pub fn is_toeplitz_tensor(t: &BlockToeplitz, tol: f64) -> bool {
    t.n() == 2
        && t.p() == 2
        && t.coeffs().iter().all(|c| (c[(0, 0)] - c[(1, 1)]).norm() <= tol * t.max_abs().max(1.0))
}

/// `x_{lm}` for `l, m in {-1, 0, 1}`: block `tau_l`, entry with row minus column `m`.
fn moments(t: &BlockToeplitz) -> [[Complex64; 3]; 3] {
    let mut x = [[Complex64::new(0.0, 0.0); 3]; 3];
    for l in -1..=1isize {
        let c = t.coeff(l);
        x[(l + 1) as usize][0] = c[(0, 1)];
        x[(l + 1) as usize][1] = 0.5 * (c[(0, 0)] + c[(1, 1)]);
        x[(l + 1) as usize][2] = c[(1, 0)];
    }
    x
}

fn row_weight(l: usize, m: usize) -> f64 {
    let wl = if l == 1 { 2.0 } else { 1.0 };
    let wm = if m == 1 { 2.0 } else { 1.0 };
    (wl * wm as f64).sqrt()
}

/// 18 weighted real rows for the pair `(lambda, mu)`.
fn column(lambda: Complex64, mu: Complex64) -> Vec<f64> {
    let mut out = Vec::with_capacity(18);
    for l in 0..3 {
        for m in 0..3 {
            let z = lambda.powi(l as i32 - 1) * mu.powi(m as i32 - 1) * row_weight(l, m);
            out.push(z.re);
            out.push(z.im);
        }
    }
    out
}

fn rhs(x: &[[Complex64; 3]; 3]) -> Vec<f64> {
    let mut out = Vec::with_capacity(18);
    for l in 0..3 {
        for m in 0..3 {
            let z = x[l][m] * row_weight(l, m);
            out.push(z.re);
            out.push(z.im);
        }
    }
    out
}

fn residual_of(atoms: &[(f64, f64, f64)], y: &[f64]) -> f64 {
    let mut r = y.to_vec();
    for &(th, ph, w) in atoms {
        for (ri, ci) in r.iter_mut().zip(column(Complex64::from_polar(1.0, th), Complex64::from_polar(1.0, ph))) {
            *ri -= w * ci;
        }
    }
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Gauss-Newton on angles and weights of the active atoms, keeping weights
/// nonnegative and accepting only decreasing steps.
fn refine(mut atoms: Vec<(f64, f64, f64)>, y: &[f64], iterations: usize) -> (Vec<(f64, f64, f64)>, f64) {
    let mut res = residual_of(&atoms, y);
    for _ in 0..iterations {
        let m = atoms.len();
        if m == 0 || res == 0.0 {
            break;
        }
        let mut r = y.to_vec();
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(3 * m);
        for &(th, ph, w) in &atoms {
            let (lam, mu) = (Complex64::from_polar(1.0, th), Complex64::from_polar(1.0, ph));
            let base = column(lam, mu);
            for (ri, ci) in r.iter_mut().zip(&base) {
                *ri -= w * ci;
            }
            let mut dth = Vec::with_capacity(18);
            let mut dph = Vec::with_capacity(18);
            for l in 0..3 {
                for mm in 0..3 {
                    let z = lam.powi(l as i32 - 1) * mu.powi(mm as i32 - 1) * row_weight(l, mm) * w;
                    let a = z * Complex64::new(0.0, l as f64 - 1.0);
                    let b = z * Complex64::new(0.0, mm as f64 - 1.0);
                    dth.extend([a.re, a.im]);
                    dph.extend([b.re, b.im]);
                }
            }
            cols.push(base);
            cols.push(dth);
            cols.push(dph);
        }
        let jac = RMatrix::from_columns(18, &cols);
        let step = lstsq(&jac, &r);
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let trial: Vec<(f64, f64, f64)> = atoms
                .iter()
                .enumerate()
                .map(|(j, &(th, ph, w))| (th + scale * step[3 * j + 1], ph + scale * step[3 * j + 2], (w + scale * step[3 * j]).max(0.0)))
                .collect();
            let tr = residual_of(&trial, y);
            if tr < res {
                atoms = trial;
                res = tr;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    atoms.retain(|a| a.2 > 0.0);
    (atoms, res)
}

/// Separable decomposition `x = sum_i w_i T_2(lambda_i) (x) T_2(mu_i)` of a
/// strictly positive element with Toeplitz blocks of Toeplitz entries.
pub fn decompose_toeplitz_toeplitz(x: &BlockToeplitz, opts: &Grid2dOptions) -> Result<ProductDecomposition> {
    if !is_toeplitz_tensor(x, 1e-12) {
        return Err(Error::NotToeplitzTensor);
    }
    let cert = check_toeplitz_psd(x, DEFAULT_TOL)?;
    if cert.verdict != Verdict::StrictlyPositive {
        return Err(Error::NotStrictlyPositive { margin: cert.margin });
    }
    let scale = x.max_abs().max(1.0);
    let y = rhs(&moments(&x.hermitian_part()));
    let k = opts.grid;
    let h = TAU / k as f64;
    let cols: Vec<Vec<f64>> = (0..k * k)
        .map(|idx| column(Complex64::from_polar(1.0, (idx / k) as f64 * h), Complex64::from_polar(1.0, (idx % k) as f64 * h)))
        .collect();
    let m = RMatrix::from_columns(18, &cols);
    let sol = nnls(&m, &y)?;
    let active: Vec<(f64, f64, f64)> = sol
        .x
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(idx, &w)| ((idx / k) as f64 * h, (idx % k) as f64 * h, w))
        .collect();
    let (atoms, res) = if sol.residual_norm <= opts.tol * scale * 1e-3 {
        (active, sol.residual_norm)
    } else {
        refine(active, &y, opts.refine_iterations)
    };
    let atoms: Vec<ProductAtom> = atoms
        .into_iter()
        .filter(|a| a.2 > 1e-14 * scale)
        .map(|(th, ph, w)| ProductAtom { lambda: Complex64::from_polar(1.0, th), mu: Complex64::from_polar(1.0, ph), weight: w })
        .collect();
    let mut dec = ProductDecomposition { atoms, residual: res };
    // Recompute from the assembled matrices rather than trusting the moment rows.
    dec.residual = dec.reconstruct().sub(x).frobenius_norm();
    if dec.residual > opts.tol * scale {
        return Err(Error::BudgetExhausted { best: Box::new(dec.to_atomic(x)) });
    }
    Ok(dec)
}

/// `T_2(lambda) (x) T_2(mu)` as a block-Toeplitz element with `n = p = 2`.
pub(crate) fn product_element(lambda: Complex64, mu: Complex64) -> BlockToeplitz {
    universal_unchecked(2, lambda).tensor(&universal_unchecked(2, mu).assemble())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(t: f64) -> Complex64 {
        Complex64::from_polar(1.0, t)
    }

    #[test]
    fn moments_of_product_atom() {
        let (lam, mu) = (unit(0.3), unit(-1.1));
        let x = moments(&product_element(lam, mu));
        for l in 0..3 {
            for m in 0..3 {
                let want = lam.powi(l as i32 - 1) * mu.powi(m as i32 - 1);
                assert!((x[l][m] - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn identity_decomposes() {
        let x = BlockToeplitz::order_unit(2, 2);
        let dec = decompose_toeplitz_toeplitz(&x, &Grid2dOptions::default()).unwrap();
        assert!(dec.residual <= 1e-10);
        let total: f64 = dec.atoms.iter().map(|a| a.weight).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn product_plus_identity() {
        let mut x = product_element(unit(0.77), unit(2.9));
        x.axpy(0.05, &BlockToeplitz::order_unit(2, 2));
        let dec = decompose_toeplitz_toeplitz(&x, &Grid2dOptions::default()).unwrap();
        assert!(dec.residual <= 1e-7);
        assert!(dec.atoms.iter().all(|a| a.weight > 0.0));
    }

    #[test]
    fn rejects_non_toeplitz_blocks() {
        let mut x = BlockToeplitz::order_unit(2, 2);
        x.coeff_mut(0)[(1, 1)] = Complex64::new(2.0, 0.0);
        assert!(matches!(decompose_toeplitz_toeplitz(&x, &Grid2dOptions::default()), Err(Error::NotToeplitzTensor)));
    }

    #[test]
    fn rejects_boundary_points() {
        let x = product_element(unit(0.5), unit(1.5));
        assert!(matches!(decompose_toeplitz_toeplitz(&x, &Grid2dOptions::default()), Err(Error::NotStrictlyPositive { .. })));
    }
}
