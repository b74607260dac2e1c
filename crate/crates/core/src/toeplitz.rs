//! Block-Toeplitz matrices, matrix-valued trigonometric polynomials and the
//! maps between them.
//!
//! Both types store `2n - 1` coefficients for `l = -n+1 ..= n-1`, at index
//! `l + n - 1`. A `BlockToeplitz` assembles to the `np x np` matrix whose
//! `(k, j)` block is `tau_{k-j}`; a `TrigMatrixPoly` evaluates to
//! `F(z) = sum_l z^l c_l`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cp_duality::{DualSystemMap, MapDirection};
use crate::error::{Error, Result};
use crate::matcore::{CMatrix, ONE, ZERO};

/// Points this close to the unit circle are rescaled onto it.
pub const UNIT_CIRCLE_TOL: f64 = 1e-9;
/// Default tolerance for the Hermitian flags.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Rescales `z` onto the unit circle, rejecting points further than
/// `UNIT_CIRCLE_TOL` from it.
pub fn normalize_unit(z: Complex64) -> Result<Complex64> {
    let r = z.norm();
    if !r.is_finite() || (r - 1.0).abs() > UNIT_CIRCLE_TOL {
        return Err(Error::NotOnCircle { re: z.re, im: z.im });
    }
    Ok(z / r)
}

/// `(1, z, .., z^{n-1})`.
pub fn gamma(n: usize, z: Complex64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n);
    let mut acc = ONE;
    for _ in 0..n {
        out.push(acc);
        acc *= z;
    }
    out
}

fn check_coeffs(n: usize, p: usize, coeffs: &[CMatrix]) -> Result<()> {
    if n == 0 || p == 0 {
        return Err(Error::DimensionMismatch("n and p must be positive".into()));
    }
    if coeffs.len() != 2 * n - 1 {
        return Err(Error::DimensionMismatch(format!("expected {} coefficients for n = {n}, got {}", 2 * n - 1, coeffs.len())));
    }
    if let Some(bad) = coeffs.iter().position(|c| c.rows() != p || c.cols() != p) {
        return Err(Error::DimensionMismatch(format!(
            "coefficient {} is {}x{}, expected {p}x{p}",
            bad as isize - n as isize + 1,
            coeffs[bad].rows(),
            coeffs[bad].cols()
        )));
    }
    Ok(())
}

fn max_adjoint_defect(n: usize, coeffs: &[CMatrix]) -> f64 {
    let mut d = 0.0f64;
    for l in 0..n {
        let a = &coeffs[n - 1 + l];
        let b = &coeffs[n - 1 - l];
        d = d.max((a - &b.adjoint()).max_abs());
    }
    d
}

/// Element of the Toeplitz operator system tensored with `M_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::wire::ToeplitzWire", into = "crate::wire::ToeplitzWire")]
pub struct BlockToeplitz {
    n: usize,
    p: usize,
    coeffs: Vec<CMatrix>,
}

impl BlockToeplitz {
    pub fn new(n: usize, p: usize, coeffs: Vec<CMatrix>) -> Result<Self> {
        check_coeffs(n, p, &coeffs)?;
        Ok(BlockToeplitz { n, p, coeffs })
    }

    pub fn from_fn(n: usize, p: usize, mut f: impl FnMut(isize) -> CMatrix) -> Result<Self> {
        let coeffs = (-(n as isize) + 1..n as isize).map(&mut f).collect();
        Self::new(n, p, coeffs)
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        BlockToeplitz { n, p, coeffs: vec![CMatrix::zeros(p, p); 2 * n - 1] }
    }

    /// `tau_0 = I_p`, all other coefficients zero.
    pub fn order_unit(n: usize, p: usize) -> Self {
        let mut t = Self::zeros(n, p);
        t.coeffs[n - 1] = CMatrix::identity(p);
        t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn coeff(&self, l: isize) -> &CMatrix {
        &self.coeffs[(l + self.n as isize - 1) as usize]
    }

    pub fn coeff_mut(&mut self, l: isize) -> &mut CMatrix {
        &mut self.coeffs[(l + self.n as isize - 1) as usize]
    }

    /// Coefficients in ascending `l`.
    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<CMatrix> {
        self.coeffs
    }

    /// `max_l ||tau_{-l} - tau_l^*||_max`.
    pub fn hermitian_defect(&self) -> f64 {
        max_adjoint_defect(self.n, &self.coeffs)
    }

    /// Hermitian flag, relative to `max(1, max entry)`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol * self.max_abs().max(1.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(CMatrix::max_abs).fold(0.0, f64::max)
    }

    /// Frobenius norm of the assembled matrix, `sqrt(sum_l (n-|l|) ||tau_l||^2)`.
    pub fn frobenius_norm(&self) -> f64 {
        let n = self.n as isize;
        (-n + 1..n)
            .map(|l| (n - l.abs()) as f64 * self.coeff(l).frobenius_norm().powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn assemble(&self) -> CMatrix {
        let (n, p) = (self.n, self.p);
        let mut out = CMatrix::zeros(n * p, n * p);
        for k in 0..n {
            for j in 0..n {
                out.set_block(k * p, j * p, self.coeff(k as isize - j as isize));
            }
        }
        out
    }

    /// Reads the coefficients off the first block column and first block
    /// row, failing when the matrix is not block-Toeplitz within `tol`.
    pub fn from_assembled(a: &CMatrix, n: usize, p: usize, tol: f64) -> Result<Self> {
        if a.rows() != n * p || a.cols() != n * p {
            return Err(Error::DimensionMismatch(format!("{}x{} is not {}x{}", a.rows(), a.cols(), n * p, n * p)));
        }
        let t = Self::from_fn(n, p, |l| {
            if l >= 0 {
                a.block(l as usize * p, 0, p, p)
            } else {
                a.block(0, (-l) as usize * p, p, p)
            }
        })?;
        let defect = (&t.assemble() - a).max_abs();
        if defect > tol * a.max_abs().max(1.0) {
            return Err(Error::DimensionMismatch(format!("matrix is not block-Toeplitz (defect {defect:.3e})")));
        }
        Ok(t)
    }

    /// For a scalar `self`, the tensor `self (x) b`, i.e. coefficients `tau_l b`.
    pub fn tensor(&self, b: &CMatrix) -> Self {
        assert_eq!(self.p, 1, "tensor expects a scalar Toeplitz left factor");
        let coeffs = self.coeffs.iter().map(|c| b.scale(c[(0, 0)])).collect();
        BlockToeplitz { n: self.n, p: b.rows(), coeffs }
    }

    pub fn scale(&self, s: f64) -> Self {
        BlockToeplitz { n: self.n, p: self.p, coeffs: self.coeffs.iter().map(|c| c.scale_real(s)).collect() }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &BlockToeplitz) {
        assert_eq!((self.n, self.p), (other.n, other.p), "shape mismatch in axpy");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            a.axpy(Complex64::new(s, 0.0), b);
        }
    }

    pub fn sub(&self, other: &BlockToeplitz) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Makes the coefficients exactly adjoint-symmetric.
    pub fn hermitian_part(&self) -> Self {
        let n = self.n as isize;
        let coeffs = (-n + 1..n)
            .map(|l| {
                let mut c = self.coeff(l).clone();
                c.axpy(ONE, &self.coeff(-l).adjoint());
                c.scale_real(0.5)
            })
            .collect();
        BlockToeplitz { n: self.n, p: self.p, coeffs }
    }
}

/// Element of the dual system: a matrix-valued trigonometric polynomial of
/// degree below `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::wire::TrigPolyWire", into = "crate::wire::TrigPolyWire")]
pub struct TrigMatrixPoly {
    n: usize,
    p: usize,
    coeffs: Vec<CMatrix>,
}

impl TrigMatrixPoly {
    pub fn new(n: usize, p: usize, coeffs: Vec<CMatrix>) -> Result<Self> {
        check_coeffs(n, p, &coeffs)?;
        Ok(TrigMatrixPoly { n, p, coeffs })
    }

    pub fn from_fn(n: usize, p: usize, mut f: impl FnMut(isize) -> CMatrix) -> Result<Self> {
        let coeffs = (-(n as isize) + 1..n as isize).map(&mut f).collect();
        Self::new(n, p, coeffs)
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        TrigMatrixPoly { n, p, coeffs: vec![CMatrix::zeros(p, p); 2 * n - 1] }
    }

    /// The constant `I_p`.
    pub fn order_unit(n: usize, p: usize) -> Self {
        let mut f = Self::zeros(n, p);
        f.coeffs[n - 1] = CMatrix::identity(p);
        f
    }

    /// Scalar polynomial from coefficients in ascending `l`.
    pub fn scalar(coeffs: &[Complex64]) -> Result<Self> {
        let n = (coeffs.len() + 1) / 2;
        Self::new(n, 1, coeffs.iter().map(|&c| CMatrix::from_fn(1, 1, |_, _| c)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn coeff(&self, l: isize) -> &CMatrix {
        &self.coeffs[(l + self.n as isize - 1) as usize]
    }

    pub fn coeff_mut(&mut self, l: isize) -> &mut CMatrix {
        &mut self.coeffs[(l + self.n as isize - 1) as usize]
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    pub fn hermitian_defect(&self) -> f64 {
        max_adjoint_defect(self.n, &self.coeffs)
    }

    pub fn is_hermitian_valued(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol * self.max_abs().max(1.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(CMatrix::max_abs).fold(0.0, f64::max)
    }

    /// `sum_l ||c_l||_2` bounded above by Frobenius norms.
    pub fn coeff_norm_sum(&self) -> f64 {
        self.coeffs.iter().map(spectral_norm_bound).sum()
    }

    /// `F(z)` for `z` on the unit circle.
    pub fn eval(&self, z: Complex64) -> Result<CMatrix> {
        let z = normalize_unit(z)?;
        Ok(self.eval_unchecked(z))
    }

    /// `F(e^{i theta})`, Hermitian part taken when the flag holds.
    pub fn eval_angle(&self, theta: f64) -> CMatrix {
        self.eval_unchecked(Complex64::from_polar(1.0, theta))
    }

    /// Horner in `z` over `z^{-n+1} sum_k z^k c_{k-n+1}`.
    pub(crate) fn eval_unchecked(&self, z: Complex64) -> CMatrix {
        let mut acc = CMatrix::zeros(self.p, self.p);
        for c in self.coeffs.iter().rev() {
            for (a, ci) in acc.data_mut().iter_mut().zip(c.data()) {
                *a = *a * z + ci;
            }
        }
        acc.scale(z.powi(-(self.n as i32) + 1))
    }

    /// Hermitian parts of `F` and `dF/dtheta` at `e^{i theta}` in one pass.
    pub(crate) fn eval_with_derivative(&self, theta: f64) -> (CMatrix, CMatrix) {
        let (n, p) = (self.n as isize, self.p);
        let mut f = CMatrix::zeros(p, p);
        let mut d = CMatrix::zeros(p, p);
        let step = Complex64::from_polar(1.0, theta);
        let mut zl = Complex64::from_polar(1.0, (-n + 1) as f64 * theta);
        for (idx, c) in self.coeffs.iter().enumerate() {
            let l = idx as isize - n + 1;
            let dl = zl * Complex64::new(0.0, l as f64);
            for ((fo, dout), ci) in f.data_mut().iter_mut().zip(d.data_mut().iter_mut()).zip(c.data()) {
                *fo += zl * ci;
                *dout += dl * ci;
            }
            zl *= step;
        }
        (f.hermitian_part(), d.hermitian_part())
    }

    /// `dF/dtheta` at `e^{i theta}`, i.e. `sum_l i l e^{i l theta} c_l`.
    pub fn derivative_angle(&self, theta: f64) -> CMatrix {
        let n = self.n as isize;
        let mut acc = CMatrix::zeros(self.p, self.p);
        for l in -n + 1..n {
            if l != 0 {
                acc.axpy(Complex64::from_polar(1.0, l as f64 * theta) * Complex64::new(0.0, l as f64), self.coeff(l));
            }
        }
        acc
    }

    /// `sum_l i^2 l^2 e^{i l theta} c_l`.
    pub fn second_derivative_angle(&self, theta: f64) -> CMatrix {
        let n = self.n as isize;
        let mut acc = CMatrix::zeros(self.p, self.p);
        for l in -n + 1..n {
            if l != 0 {
                acc.axpy(Complex64::from_polar(-((l * l) as f64), l as f64 * theta), self.coeff(l));
            }
        }
        acc
    }

    pub fn scale(&self, s: f64) -> Self {
        TrigMatrixPoly { n: self.n, p: self.p, coeffs: self.coeffs.iter().map(|c| c.scale_real(s)).collect() }
    }

    pub fn axpy(&mut self, s: f64, other: &TrigMatrixPoly) {
        assert_eq!((self.n, self.p), (other.n, other.p), "shape mismatch in axpy");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            a.axpy(Complex64::new(s, 0.0), b);
        }
    }

    /// For a scalar `self`, the product `self * b`.
    pub fn tensor(&self, b: &CMatrix) -> Self {
        assert_eq!(self.p, 1, "tensor expects a scalar left factor");
        let coeffs = self.coeffs.iter().map(|c| b.scale(c[(0, 0)])).collect();
        TrigMatrixPoly { n: self.n, p: b.rows(), coeffs }
    }
}

/// Upper bound on the spectral norm: `min(||A||_F, sqrt(||A||_1 ||A||_inf))`.
pub(crate) fn spectral_norm_bound(a: &CMatrix) -> f64 {
    let fro = a.frobenius_norm();
    let row = (0..a.rows()).map(|i| a.row(i).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let col = (0..a.cols()).map(|j| (0..a.rows()).map(|i| a[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max);
    fro.min((row * col).sqrt())
}

/// The universal Toeplitz matrix `T_n(lambda) = gamma gamma^*`, coefficients `lambda^l`.
pub fn universal_toeplitz(n: usize, lambda: Complex64) -> Result<BlockToeplitz> {
    if n == 0 {
        return Err(Error::DimensionMismatch("n must be positive".into()));
    }
    let lambda = normalize_unit(lambda)?;
    Ok(universal_unchecked(n, lambda))
}

pub(crate) fn universal_unchecked(n: usize, lambda: Complex64) -> BlockToeplitz {
    let n_i = n as i32;
    let coeffs = (-n_i + 1..n_i).map(|l| CMatrix::from_fn(1, 1, |_, _| lambda.powi(l))).collect();
    BlockToeplitz { n, p: 1, coeffs }
}

/// The antidiagonal permutation `u_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlipUnitary {
    pub n: usize,
}

impl FlipUnitary {
    pub fn new(n: usize) -> Self {
        FlipUnitary { n }
    }

    pub fn matrix(&self) -> CMatrix {
        let n = self.n;
        CMatrix::from_fn(n, n, |i, j| if i + j == n - 1 { ONE } else { ZERO })
    }

    /// `(u_n (x) I_p)^* A (u_n (x) I_p)` on an assembled `np x np` matrix.
    pub fn conjugate(&self, a: &CMatrix, p: usize) -> CMatrix {
        let u = self.matrix().kron(&CMatrix::identity(p));
        &(&u.adjoint() * a) * &u
    }
}

/// Conjugation by the flip, read back as a block-Toeplitz element. On
/// coefficients this sends `tau_l` to `tau_{-l}`.
pub fn flip_conjugate(t: &BlockToeplitz) -> BlockToeplitz {
    let flipped = FlipUnitary::new(t.n).conjugate(&t.assemble(), t.p);
    BlockToeplitz::from_assembled(&flipped, t.n, t.p, 0.0).expect("flip conjugation preserves block-Toeplitz structure")
}

/// `phi_t(f) = sum_k tau_{-k} f^(k)`.
pub fn duality_pair(t: &BlockToeplitz, f: &TrigMatrixPoly) -> Result<Complex64> {
    if t.p != 1 || f.p != 1 {
        return Err(Error::DimensionMismatch("pairing is defined for scalar elements".into()));
    }
    if t.n != f.n {
        return Err(Error::DimensionMismatch(format!("orders differ: {} vs {}", t.n, f.n)));
    }
    let n = t.n as isize;
    Ok((-n + 1..n).map(|k| t.coeff(-k)[(0, 0)] * f.coeff(k)[(0, 0)]).sum())
}

/// `T^`: the map `chi_k -> tau_{-k}` on the dual system.
pub fn hat_of_toeplitz(t: &BlockToeplitz) -> DualSystemMap {
    let n = t.n as isize;
    let values = (-n + 1..n).map(|k| t.coeff(-k).clone()).collect();
    DualSystemMap::new(MapDirection::FromDual, t.n, t.p, values).expect("shapes come from a valid element")
}

/// `F^`: the map `r_k -> c_{-k}` on the Toeplitz system.
pub fn hat_of_trigpoly(f: &TrigMatrixPoly) -> DualSystemMap {
    let n = f.n as isize;
    let values = (-n + 1..n).map(|k| f.coeff(-k).clone()).collect();
    DualSystemMap::new(MapDirection::FromToeplitz, f.n, f.p, values).expect("shapes come from a valid element")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_poly(coeffs: &[(f64, f64)]) -> TrigMatrixPoly {
        TrigMatrixPoly::scalar(&coeffs.iter().map(|&(a, b)| c(a, b)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn universal_small_cases() {
        let t = universal_toeplitz(2, c(1.0, 0.0)).unwrap().assemble();
        assert_eq!(t, CMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        let t = universal_toeplitz(2, c(0.0, 1.0)).unwrap().assemble();
        assert_eq!(t[(0, 1)], c(0.0, -1.0));
        assert_eq!(t[(1, 0)], c(0.0, 1.0));
        let t = universal_toeplitz(3, c(1.0, 0.0)).unwrap().assemble();
        assert!(t.data().iter().all(|&z| z == ONE));
        let ev = crate::matcore::herm_eigvals(&t).unwrap();
        assert!(ev[0].abs() < 1e-12 && ev[1].abs() < 1e-12 && (ev[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn off_circle_rejected_and_near_circle_normalized() {
        assert!(matches!(universal_toeplitz(2, c(1.1, 0.0)), Err(Error::NotOnCircle { .. })));
        let z = normalize_unit(c(1.0 + 1e-11, 0.0)).unwrap();
        assert_eq!(z.norm(), 1.0);
    }

    #[test]
    fn assemble_small_cases() {
        let mut t = BlockToeplitz::zeros(1, 2);
        *t.coeff_mut(0) = CMatrix::from_real(2, 2, &[1.0, 2.0, 2.0, 5.0]);
        assert_eq!(t.assemble(), *t.coeff(0));
        assert_eq!(BlockToeplitz::order_unit(2, 2).assemble(), CMatrix::identity(4));
    }

    #[test]
    fn eval_examples() {
        let f = TrigMatrixPoly::order_unit(3, 2);
        assert_eq!(f.eval(c(0.6, 0.8)).unwrap(), CMatrix::identity(2));
        let f = scalar_poly(&[(1.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        assert!(f.eval(c(0.0, 1.0)).unwrap()[(0, 0)].norm() < 1e-15);
        assert!(f.eval(c(0.0, 2.0)).is_err());
    }

    #[test]
    fn eval_of_compressed_universal() {
        // w^* T_n(z^{-1}) w at z = 1 with w = gamma(1)/sqrt(n) equals n.
        let n = 4;
        let w: Vec<Complex64> = gamma(n, ONE).iter().map(|x| x / (n as f64).sqrt()).collect();
        let f = TrigMatrixPoly::from_fn(n, 1, |l| {
            // c_l = w^* r_{-l} w = sum_{k-j=-l} conj(w_k) w_j
            let mut s = ZERO;
            for k in 0..n as isize {
                let j = k + l;
                if (0..n as isize).contains(&j) {
                    s += w[k as usize].conj() * w[j as usize];
                }
            }
            CMatrix::from_fn(1, 1, |_, _| s)
        })
        .unwrap();
        let direct = CMatrix::column_vector(&w).adjoint().matmul(&universal_unchecked(n, ONE).assemble()).matmul(&CMatrix::column_vector(&w));
        assert!((f.eval(ONE).unwrap()[(0, 0)] - c(n as f64, 0.0)).norm() < 1e-12);
        assert!((direct[(0, 0)] - c(n as f64, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn pairing_examples() {
        let r0 = BlockToeplitz::order_unit(2, 1);
        let chi0 = TrigMatrixPoly::order_unit(2, 1);
        assert_eq!(duality_pair(&r0, &chi0).unwrap(), ONE);
        let mut r1 = BlockToeplitz::zeros(2, 1);
        r1.coeff_mut(1)[(0, 0)] = ONE;
        let chi_m1 = scalar_poly(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        let chi_1 = scalar_poly(&[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        assert_eq!(duality_pair(&r1, &chi_m1).unwrap(), ONE);
        assert_eq!(duality_pair(&r1, &chi_1).unwrap(), ZERO);
        assert!(duality_pair(&r1, &TrigMatrixPoly::order_unit(3, 1)).is_err());
    }

    #[test]
    fn hat_maps_of_units() {
        let h = hat_of_toeplitz(&BlockToeplitz::order_unit(3, 2));
        assert_eq!(*h.value(0), CMatrix::identity(2));
        assert_eq!(*h.value(1), CMatrix::zeros(2, 2));
        let h = hat_of_trigpoly(&TrigMatrixPoly::order_unit(3, 2));
        assert_eq!(*h.value(0), CMatrix::identity(2));
        assert_eq!(*h.value(-2), CMatrix::zeros(2, 2));
    }

    #[test]
    fn hat_of_pure_element() {
        let lam = Complex64::from_polar(1.0, 0.7);
        let q = CMatrix::outer(&[c(0.6, 0.0), c(0.0, 0.8)], &[c(0.6, 0.0), c(0.0, 0.8)]);
        let t = universal_toeplitz(3, lam.inv()).unwrap().tensor(&q);
        let h = hat_of_toeplitz(&t);
        for k in -2..=2isize {
            assert!((h.value(k) - &q.scale(lam.powi(k as i32))).max_abs() < 1e-14);
        }
    }

    #[test]
    fn flip_of_order_unit_and_universal() {
        let u = BlockToeplitz::order_unit(3, 2);
        assert_eq!(flip_conjugate(&u), u);
        let lam = Complex64::from_polar(1.0, 1.3);
        let f = flip_conjugate(&universal_toeplitz(4, lam).unwrap());
        let g = universal_toeplitz(4, lam.inv()).unwrap();
        assert!((&f.assemble() - &g.assemble()).max_abs() < 1e-12);
    }

    #[test]
    fn hermitian_part_is_hermitian() {
        let t = BlockToeplitz::from_fn(3, 2, |l| CMatrix::from_fn(2, 2, |i, j| c(l as f64 + i as f64, j as f64 - 0.5))).unwrap();
        let h = t.hermitian_part();
        assert!(h.hermitian_defect() < 1e-15);
        assert!(h.assemble().is_hermitian(1e-15));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let f = scalar_poly(&[(0.3, 0.2), (1.0, -0.5), (2.0, 0.0), (1.0, 0.5), (0.3, -0.2)]);
        let th = 0.9;
        let h = 1e-6;
        let fd = (&f.eval_angle(th + h) - &f.eval_angle(th - h)).scale_real(0.5 / h);
        assert!((&fd - &f.derivative_angle(th)).max_abs() < 1e-8);
        let fd2 = (&f.derivative_angle(th + h) - &f.derivative_angle(th - h)).scale_real(0.5 / h);
        assert!((&fd2 - &f.second_derivative_angle(th)).max_abs() < 1e-7);
    }

    fn unit(theta: f64) -> Complex64 {
        Complex64::from_polar(1.0, theta)
    }

    proptest! {
        #[test]
        fn universal_is_rank_one_gram(n in 1usize..=16, theta in 0.0f64..std::f64::consts::TAU) {
            let lam = unit(theta);
            let a = universal_toeplitz(n, lam).unwrap().assemble();
            let g = gamma(n, lam);
            let gg = CMatrix::outer(&g, &g);
            prop_assert!((&a - &gg).max_abs() <= 1e-14 * n as f64);
        }

        #[test]
        fn flip_identity(n in 1usize..=10, theta in 0.0f64..std::f64::consts::TAU) {
            let lam = unit(theta);
            let a = universal_toeplitz(n, lam).unwrap().assemble();
            let flipped = FlipUnitary::new(n).conjugate(&a, 1);
            let b = universal_toeplitz(n, lam.inv()).unwrap().assemble();
            prop_assert!((&flipped - &b).max_abs() <= 1e-12);
        }

        #[test]
        fn pairing_is_evaluation_at_inverse(
            n in 1usize..=8,
            theta in 0.0f64..std::f64::consts::TAU,
            raw in prop::collection::vec(-1.0f64..1.0, 30),
        ) {
            let lam = unit(theta);
            let coeffs: Vec<Complex64> = (0..2 * n - 1).map(|i| c(raw[2 * i], raw[2 * i + 1])).collect();
            let f = TrigMatrixPoly::scalar(&coeffs).unwrap();
            let pair = duality_pair(&universal_toeplitz(n, lam).unwrap(), &f).unwrap();
            // Oracle: direct power sum at lambda^{-1}.
            let direct: Complex64 = (0..2 * n - 1).map(|i| coeffs[i] * lam.inv().powi(i as i32 - n as i32 + 1)).sum();
            prop_assert!((pair - direct).norm() <= 1e-12);
            prop_assert!((pair - f.eval(lam.inv()).unwrap()[(0, 0)]).norm() <= 1e-12);
        }

        #[test]
        fn hat_map_agrees_with_coefficient_sum(
            n in 1usize..=4,
            p in 1usize..=3,
            raw in prop::collection::vec(-1.0f64..1.0, 7 * 9 * 2 + 14),
        ) {
            let t = BlockToeplitz::from_fn(n, p, |l| {
                let o = ((l + 3) as usize) * 18;
                CMatrix::from_fn(p, p, |i, j| c(raw[o + 2 * (i * 3 + j)], raw[o + 2 * (i * 3 + j) + 1]))
            }).unwrap();
            let fc: Vec<Complex64> = (0..2 * n - 1).map(|i| c(raw[126 + i], raw[127 + i])).collect();
            let f = TrigMatrixPoly::scalar(&fc).unwrap();
            let via_map = hat_of_toeplitz(&t).apply_scalar(&fc).unwrap();
            // Independent route: sum over assembled diagonals, block (k, 0) holds tau_k
            // and block (0, k) holds tau_{-k}.
            let a = t.assemble();
            let mut direct = CMatrix::zeros(p, p);
            for k in -(n as isize) + 1..n as isize {
                let blk = if k <= 0 { a.block((-k) as usize * p, 0, p, p) } else { a.block(0, k as usize * p, p, p) };
                direct.axpy(f.coeff(k)[(0, 0)], &blk);
            }
            prop_assert!((&via_map - &direct).max_abs() <= 1e-12);
        }

        #[test]
        fn double_flip_is_identity(n in 1usize..=5, p in 1usize..=3, raw in prop::collection::vec(-1.0f64..1.0, 9 * 9 * 2)) {
            let t = BlockToeplitz::from_fn(n, p, |l| {
                let o = ((l + 4) as usize) * 18;
                CMatrix::from_fn(p, p, |i, j| c(raw[o + 2 * (i * 3 + j)], raw[o + 2 * (i * 3 + j) + 1]))
            }).unwrap().hermitian_part();
            let back = flip_conjugate(&flip_conjugate(&t));
            prop_assert!((&back.assemble() - &t.assemble()).max_abs() <= 1e-12);
        }
    }
}
