//! Complete positivity through duality: a map on the dual system is CP iff
//! the block-Toeplitz matrix of its basis values is PSD, and a map on the
//! Toeplitz system is CP iff the matching trigonometric polynomial is PSD on
//! the circle. Also blockwise application of matrix maps and a randomized
//! probe of Toeplitz complete positivity.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::{gen_atoms_with_rank, gen_density, rng_from_seed, PRNG_NAME};
use crate::matcore::{herm_eig, CMatrix, ONE, ZERO};
use crate::positivity::{check_toeplitz_psd, check_trigpoly_psd, PositivityCertificate, DEFAULT_TOL};
use crate::toeplitz::{BlockToeplitz, TrigMatrixPoly};

/// Default probe seed.
pub const DEFAULT_PROBE_SEED: u64 = 1_952_577;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapDirection {
    /// Defined on the trigonometric polynomials; basis `chi_k`.
    FromDual,
    /// Defined on the Toeplitz matrices; basis `r_k`.
    FromToeplitz,
}

/// A linear map into `M_p` given by its values on the monomial basis
/// `k = -n+1 ..= n-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSystemMap {
    pub direction: MapDirection,
    pub n: usize,
    pub p: usize,
    basis_values: Vec<CMatrix>,
}

impl DualSystemMap {
    pub fn new(direction: MapDirection, n: usize, p: usize, basis_values: Vec<CMatrix>) -> Result<Self> {
        if n == 0 || basis_values.len() != 2 * n - 1 {
            return Err(Error::DimensionMismatch(format!("expected {} basis values", 2 * n.max(1) - 1)));
        }
        if basis_values.iter().any(|v| v.rows() != p || v.cols() != p) {
            return Err(Error::DimensionMismatch(format!("basis values must be {p}x{p}")));
        }
        Ok(DualSystemMap { direction, n, p, basis_values })
    }

    pub fn from_fn(direction: MapDirection, n: usize, p: usize, f: impl FnMut(isize) -> CMatrix) -> Result<Self> {
        let values = (-(n as isize) + 1..n as isize).map(f).collect();
        Self::new(direction, n, p, values)
    }

    pub fn value(&self, k: isize) -> &CMatrix {
        &self.basis_values[(k + self.n as isize - 1) as usize]
    }

    pub fn basis_values(&self) -> &[CMatrix] {
        &self.basis_values
    }

    /// Image of the scalar element with basis coefficients `coeffs`
    /// (ascending `k`): `sum_k coeffs_k value(k)`.
    pub fn apply_scalar(&self, coeffs: &[Complex64]) -> Result<CMatrix> {
        if coeffs.len() != self.basis_values.len() {
            return Err(Error::DimensionMismatch(format!("expected {} coefficients", self.basis_values.len())));
        }
        let mut acc = CMatrix::zeros(self.p, self.p);
        for (c, v) in coeffs.iter().zip(&self.basis_values) {
            acc.axpy(*c, v);
        }
        Ok(acc)
    }

    /// Fails unless `value(-k) = value(k)^*` for every `k`.
    pub fn check_adjoints(&self, tol: f64) -> Result<()> {
        let scale = self.basis_values.iter().map(CMatrix::max_abs).fold(1.0, f64::max);
        for k in 0..self.n as isize {
            if (self.value(-k) - &self.value(k).adjoint()).max_abs() > tol * scale {
                return Err(Error::InconsistentAdjoints { index: k });
            }
        }
        Ok(())
    }
}

/// The element whose hat map is `phi`: `tau_l = phi(chi_{-l})`.
pub fn toeplitz_of_dual_map(phi: &DualSystemMap) -> Result<BlockToeplitz> {
    BlockToeplitz::from_fn(phi.n, phi.p, |l| phi.value(-l).clone())
}

/// The element whose hat map is `phi`: `c_l = phi(r_{-l})`.
pub fn trigpoly_of_toeplitz_map(phi: &DualSystemMap) -> Result<TrigMatrixPoly> {
    TrigMatrixPoly::from_fn(phi.n, phi.p, |l| phi.value(-l).clone())
}

fn expect_direction(phi: &DualSystemMap, d: MapDirection) -> Result<()> {
    if phi.direction != d {
        return Err(Error::BadParams(format!("map direction is {:?}, expected {:?}", phi.direction, d)));
    }
    Ok(())
}

pub fn is_cp_dual_map(phi: &DualSystemMap, tol: f64) -> Result<PositivityCertificate> {
    expect_direction(phi, MapDirection::FromDual)?;
    phi.check_adjoints(1e-12)?;
    check_toeplitz_psd(&toeplitz_of_dual_map(phi)?.hermitian_part(), tol)
}

pub fn is_cp_toeplitz_map(phi: &DualSystemMap, grid: usize, tol: f64) -> Result<PositivityCertificate> {
    expect_direction(phi, MapDirection::FromToeplitz)?;
    phi.check_adjoints(1e-12)?;
    check_trigpoly_psd(&trigpoly_of_toeplitz_map(phi)?, grid, tol)
}

/// Fits `f -> alpha f(lambda) Q` to a map on the dual system: `value(k)`
/// must equal `alpha lambda^k Q` with `Q` a rank-one projection.
pub fn fit_point_evaluation(phi: &DualSystemMap, tol: f64) -> Option<(Complex64, f64, CMatrix)> {
    if phi.direction != MapDirection::FromDual {
        return None;
    }
    let v0 = phi.value(0);
    let alpha = v0.trace().re;
    if alpha <= 0.0 {
        return None;
    }
    let q = v0.scale_real(1.0 / alpha);
    let eig = herm_eig(&q.hermitian_part()).ok()?;
    let p = phi.p;
    if (eig.max() - 1.0).abs() > tol || (p > 1 && eig.values[p - 2].abs() > tol) {
        return None;
    }
    let lambda = if phi.n > 1 { phi.value(1).trace() / alpha } else { ONE };
    if (lambda.norm() - 1.0).abs() > tol {
        return None;
    }
    let lambda = lambda / lambda.norm();
    let n = phi.n as isize;
    let ok = (-n + 1..n).all(|k| (phi.value(k) - &q.scale(lambda.powi(k as i32) * alpha)).max_abs() <= tol * alpha.max(1.0));
    ok.then_some((lambda, alpha, q))
}

/// A linear map `M_p -> M_q` stored by its images of the matrix units
/// `E_ij`, index `i * p + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMap {
    pub p: usize,
    pub q: usize,
    images: Vec<CMatrix>,
}

impl MatrixMap {
    pub fn new(p: usize, q: usize, images: Vec<CMatrix>) -> Result<Self> {
        if images.len() != p * p || images.iter().any(|m| m.rows() != q || m.cols() != q) {
            return Err(Error::DimensionMismatch(format!("a map M_{p} -> M_{q} needs {} images of size {q}x{q}", p * p)));
        }
        Ok(MatrixMap { p, q, images })
    }

    /// Tabulates a linear function on the matrix units.
    pub fn from_linear(p: usize, q: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Result<Self> {
        let images = (0..p * p)
            .map(|idx| {
                let mut e = CMatrix::zeros(p, p);
                e[(idx / p, idx % p)] = ONE;
                f(&e)
            })
            .collect();
        Self::new(p, q, images)
    }

    pub fn identity(p: usize) -> Self {
        Self::from_linear(p, p, |x| x.clone()).expect("shapes agree")
    }

    pub fn transpose(p: usize) -> Self {
        Self::from_linear(p, p, CMatrix::transpose).expect("shapes agree")
    }

    /// `x -> (tr x / p) I_p`.
    pub fn depolarizing(p: usize) -> Self {
        Self::from_linear(p, p, |x| CMatrix::identity(p).scale(x.trace() / p as f64)).expect("shapes agree")
    }

    pub fn images(&self) -> &[CMatrix] {
        &self.images
    }

    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.rows() != self.p || x.cols() != self.p {
            return Err(Error::DimensionMismatch(format!("map expects {0}x{0} input", self.p)));
        }
        let mut acc = CMatrix::zeros(self.q, self.q);
        for i in 0..self.p {
            for j in 0..self.p {
                let c = x[(i, j)];
                if c != ZERO {
                    acc.axpy(c, &self.images[i * self.p + j]);
                }
            }
        }
        Ok(acc)
    }
}

/// `tau_l -> psi(tau_l)`, the amplification restricted to Toeplitz matrices.
pub fn apply_map_blockwise(psi: &MatrixMap, t: &BlockToeplitz) -> Result<BlockToeplitz> {
    if t.p() != psi.p {
        return Err(Error::DimensionMismatch(format!("map acts on M_{}, element has p = {}", psi.p, t.p())));
    }
    let coeffs = t.coeffs().iter().map(|c| psi.apply(c)).collect::<Result<Vec<_>>>()?;
    BlockToeplitz::new(t.n(), psi.q, coeffs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub n: usize,
    pub trial: usize,
    pub generator: String,
    pub min_eigenvalue: f64,
    /// Eigenvector of the image with negative eigenvalue.
    pub witness: Vec<Complex64>,
    pub input: BlockToeplitz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub seed: u64,
    pub prng: String,
    pub n_max: usize,
    pub trials: usize,
    pub inputs_checked: usize,
    pub tol: f64,
    pub violations: Vec<Violation>,
    /// Smallest eigenvalue over all images (0 when none is negative).
    pub max_negative_eigenvalue: f64,
}

/// Applies `psi` blockwise to random PSD block-Toeplitz inputs for
/// `n = 2..=n_max`, alternating separable atomic sums and density
/// generators, and reports every image that fails to be PSD.
pub fn toeplitz_cp_probe(psi: &MatrixMap, n_max: usize, trials: usize, seed: u64) -> Result<ProbeReport> {
    let mut rng = rng_from_seed(seed);
    let p = psi.p;
    let mut report = ProbeReport {
        seed,
        prng: PRNG_NAME.into(),
        n_max,
        trials,
        inputs_checked: 0,
        tol: DEFAULT_TOL,
        violations: Vec::new(),
        max_negative_eigenvalue: 0.0,
    };
    for n in 2..=n_max {
        for trial in 0..trials {
            let (generator, input) = if trial % 2 == 0 {
                let m = rng.random_range(1..=3);
                let rank = rng.random_range(1..=p);
                ("atoms", gen_atoms_with_rank(n, p, m, rank, &mut rng).0)
            } else {
                ("density", gen_density(n, p, &mut rng))
            };
            let image = apply_map_blockwise(psi, &input)?.hermitian_part();
            let a = image.assemble();
            let eig = herm_eig(&a)?;
            report.inputs_checked += 1;
            let min = eig.min();
            report.max_negative_eigenvalue = report.max_negative_eigenvalue.min(min);
            if min < -DEFAULT_TOL * a.max_abs().max(1.0) {
                report.violations.push(Violation {
                    n,
                    trial,
                    generator: generator.into(),
                    min_eigenvalue: min,
                    witness: eig.vector(0),
                    input,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::positivity::Verdict;
    use crate::toeplitz::{hat_of_toeplitz, universal_toeplitz};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar(x: f64) -> CMatrix {
        CMatrix::from_real(1, 1, &[x])
    }

    #[test]
    fn pure_dual_map_is_cp() {
        let lam = Complex64::from_polar(1.0, 0.9);
        let q = CMatrix::outer(&[c(0.6, 0.0), c(0.0, 0.8)], &[c(0.6, 0.0), c(0.0, 0.8)]);
        let phi = DualSystemMap::from_fn(MapDirection::FromDual, 3, 2, |k| q.scale(lam.powi(k as i32))).unwrap();
        assert!(is_cp_dual_map(&phi, DEFAULT_TOL).unwrap().verdict.is_positive());
        let (l, a, qq) = fit_point_evaluation(&phi, 1e-9).unwrap();
        assert!((l - lam).norm() < 1e-12 && (a - 1.0).abs() < 1e-12 && (&qq - &q).max_abs() < 1e-12);
    }

    #[test]
    fn indefinite_dual_map() {
        let phi = DualSystemMap::new(MapDirection::FromDual, 2, 1, vec![scalar(2.0), scalar(1.0), scalar(2.0)]).unwrap();
        assert_eq!(is_cp_dual_map(&phi, DEFAULT_TOL).unwrap().verdict, Verdict::NotPositive);
    }

    #[test]
    fn point_evaluation_is_cp() {
        let lam = Complex64::from_polar(1.0, -2.0);
        let phi = DualSystemMap::from_fn(MapDirection::FromDual, 4, 2, |k| CMatrix::identity(2).scale(lam.powi(k as i32))).unwrap();
        assert!(is_cp_dual_map(&phi, DEFAULT_TOL).unwrap().verdict.is_positive());
    }

    #[test]
    fn inconsistent_adjoints_rejected() {
        let phi = DualSystemMap::new(MapDirection::FromDual, 2, 1, vec![scalar(1.0), scalar(1.0), scalar(0.5)]).unwrap();
        assert!(matches!(is_cp_dual_map(&phi, DEFAULT_TOL), Err(Error::InconsistentAdjoints { index: 1 })));
    }

    #[test]
    fn toeplitz_maps() {
        // Compression by w: phi(r_k) = w^* r_k w.
        let w = CMatrix::from_fn(3, 2, |i, j| c(1.0 + i as f64 - j as f64, 0.3 * j as f64));
        let phi = DualSystemMap::from_fn(MapDirection::FromToeplitz, 3, 2, |k| {
            let r = CMatrix::from_fn(3, 3, |a, b| if a as isize - b as isize == k { ONE } else { ZERO });
            &(&w.adjoint() * &r) * &w
        })
        .unwrap();
        assert!(is_cp_toeplitz_map(&phi, 256, DEFAULT_TOL).unwrap().verdict.is_positive());

        let phi = DualSystemMap::new(MapDirection::FromToeplitz, 2, 1, vec![scalar(-1.0), scalar(1.0), scalar(-1.0)]).unwrap();
        let cert = is_cp_toeplitz_map(&phi, 256, DEFAULT_TOL).unwrap();
        assert_eq!(cert.verdict, Verdict::NotPositive);

        // x -> x_11 is a state.
        let phi = DualSystemMap::from_fn(MapDirection::FromToeplitz, 3, 1, |k| scalar(if k == 0 { 1.0 } else { 0.0 })).unwrap();
        assert!(is_cp_toeplitz_map(&phi, 256, DEFAULT_TOL).unwrap().verdict.is_positive());
    }

    #[test]
    fn blockwise_examples() {
        let b = CMatrix::from_fn(2, 2, |i, j| if i == j { c(1.0 + i as f64, 0.0) } else if i < j { c(0.3, 0.4) } else { c(0.3, -0.4) });
        let t = universal_toeplitz(3, Complex64::from_polar(1.0, 0.4)).unwrap().tensor(&b);
        assert_eq!(apply_map_blockwise(&MatrixMap::identity(2), &t).unwrap(), t);
        let tt = apply_map_blockwise(&MatrixMap::transpose(2), &t).unwrap();
        let expect = universal_toeplitz(3, Complex64::from_polar(1.0, 0.4)).unwrap().tensor(&b.transpose());
        assert!((&tt.assemble() - &expect.assemble()).max_abs() < 1e-15);
        assert!(check_toeplitz_psd(&tt, DEFAULT_TOL).unwrap().verdict.is_positive());
        let dep = apply_map_blockwise(&MatrixMap::depolarizing(2), &t).unwrap();
        assert!(check_toeplitz_psd(&dep, DEFAULT_TOL).unwrap().verdict.is_positive());
        assert!(apply_map_blockwise(&MatrixMap::identity(3), &t).is_err());
    }

    #[test]
    fn probe_identity_and_bad_map() {
        let r = toeplitz_cp_probe(&MatrixMap::identity(2), 3, 10, DEFAULT_PROBE_SEED).unwrap();
        assert!(r.violations.is_empty());
        assert_eq!(r.inputs_checked, 20);
        let bad = MatrixMap::from_linear(2, 2, |x| {
            let mut e = CMatrix::zeros(2, 2);
            e[(0, 0)] = x.trace();
            &e - &x.scale_real(0.5)
        })
        .unwrap();
        let r = toeplitz_cp_probe(&bad, 3, 10, DEFAULT_PROBE_SEED).unwrap();
        assert!(!r.violations.is_empty());
        let v = &r.violations[0];
        let img = apply_map_blockwise(&bad, &v.input).unwrap().assemble();
        assert!((img.quadratic_form(&v.witness).re - v.min_eigenvalue).abs() < 1e-9);
    }

    #[test]
    fn hat_round_trip() {
        let t = crate::generate::gen_density(3, 2, &mut rng_from_seed(5));
        let back = toeplitz_of_dual_map(&hat_of_toeplitz(&t)).unwrap();
        assert_eq!(back, t);
    }
}
