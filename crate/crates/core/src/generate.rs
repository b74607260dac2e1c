//! Seeded instance generators.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::entanglement::dual_pure_element;
use crate::error::{Error, Result};
use crate::matcore::CMatrix;
use crate::separability::{Atom, AtomicDecomposition, ProductAtom};
use crate::toeplitz::{universal_unchecked, BlockToeplitz, TrigMatrixPoly};

/// Name and version of the generator behind every seeded run.
pub const PRNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64)";
/// Nodes of the trapezoid rule in `gen_density`.
pub const DENSITY_NODES: usize = 4096;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..TAU))
}

/// `X^* X` for a random `rank x p` matrix `X`.
pub fn random_gram<R: Rng + ?Sized>(p: usize, rank: usize, rng: &mut R) -> CMatrix {
    let x = random_matrix(rank, p, rng);
    (&x.adjoint() * &x).hermitian_part()
}

/// Hermitian element with independent normal entries (no positivity).
pub fn random_hermitian_toeplitz<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> BlockToeplitz {
    BlockToeplitz::from_fn(n, p, |_| random_matrix(p, p, rng)).expect("valid shape").hermitian_part()
}

pub fn random_hermitian_trigpoly<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> TrigMatrixPoly {
    let t = random_hermitian_toeplitz(n, p, rng);
    TrigMatrixPoly::new(n, p, t.into_coeffs()).expect("valid shape")
}

fn check_params(n: usize, p: usize) -> Result<()> {
    if n == 0 || p == 0 || n > 12 || p > 8 {
        return Err(Error::BadParams(format!("need 1 <= n <= 12 and 1 <= p <= 8, got n = {n}, p = {p}")));
    }
    Ok(())
}

/// `sum_j T_n(lambda_j) (x) b_j` with random unit `lambda_j` and full-rank
/// Gram `b_j`, together with the atoms used.
pub fn gen_atoms<R: Rng + ?Sized>(n: usize, p: usize, m: usize, rng: &mut R) -> (BlockToeplitz, AtomicDecomposition) {
    gen_atoms_with_rank(n, p, m, p, rng)
}

pub fn gen_atoms_with_rank<R: Rng + ?Sized>(n: usize, p: usize, m: usize, rank: usize, rng: &mut R) -> (BlockToeplitz, AtomicDecomposition) {
    let atoms: Vec<Atom> = (0..m).map(|_| Atom { lambda: random_unit(rng), b: random_gram(p, rank, rng) }).collect();
    let truth = AtomicDecomposition { n, p, atoms, residual: 0.0 };
    (truth.reconstruct(), truth)
}

/// `tau_l = (1/2pi) int e^{-il theta} G^* G d theta` for a random matrix
/// polynomial `G` of degree `n`, by the trapezoid rule on `DENSITY_NODES`
/// nodes (exact for this trigonometric integrand).
pub fn gen_density<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> BlockToeplitz {
    let g: Vec<CMatrix> = (0..=n).map(|_| random_matrix(p, p, rng)).collect();
    density_from_polynomial(n, &g)
}

pub fn density_from_polynomial(n: usize, g: &[CMatrix]) -> BlockToeplitz {
    let p = g[0].rows();
    let mut coeffs = vec![CMatrix::zeros(p, p); 2 * n - 1];
    let nodes = DENSITY_NODES;
    for k in 0..nodes {
        let theta = TAU * k as f64 / nodes as f64;
        let z = Complex64::from_polar(1.0, theta);
        let mut gz = CMatrix::zeros(p, p);
        for c in g.iter().rev() {
            gz = gz.scale(z);
            gz += c;
        }
        let integrand = &gz.adjoint() * &gz;
        for (idx, coeff) in coeffs.iter_mut().enumerate() {
            let l = idx as i32 - n as i32 + 1;
            coeff.axpy(Complex64::from_polar(1.0 / nodes as f64, -(l as f64) * theta), &integrand);
        }
    }
    BlockToeplitz::new(n, p, coeffs).expect("valid shape").hermitian_part()
}

/// Truth of a pure instance `T_n(lambda^{-1}) (x) alpha Q`.
#[derive(Debug, Clone)]
pub struct PureTruth {
    pub lambda: Complex64,
    pub alpha: f64,
    pub q: CMatrix,
}

pub fn gen_pure<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> (BlockToeplitz, PureTruth) {
    let lambda = random_unit(rng);
    let alpha = rng.random_range(0.5..2.0);
    let xi: Vec<Complex64> = (0..p).map(|_| complex_normal(rng)).collect();
    let norm2: f64 = xi.iter().map(|z| z.norm_sqr()).sum();
    let q = CMatrix::outer(&xi, &xi).scale_real(1.0 / norm2);
    let t = universal_unchecked(n, lambda.inv()).tensor(&q.scale_real(alpha));
    (t, PureTruth { lambda, alpha, q })
}

pub fn gen_dualpure<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> TrigMatrixPoly {
    dual_pure_element(&random_matrix(n, p, rng)).expect("random w is nonzero")
}

/// `sum_i w_i T_2(lambda_i) (x) T_2(mu_i) + eps I_4`.
pub fn gen_toeplitz_product<R: Rng + ?Sized>(m: usize, eps: f64, rng: &mut R) -> (BlockToeplitz, Vec<ProductAtom>) {
    let atoms: Vec<ProductAtom> = (0..m)
        .map(|_| ProductAtom { lambda: random_unit(rng), mu: random_unit(rng), weight: rng.random_range(0.1..1.0) })
        .collect();
    let mut x = BlockToeplitz::order_unit(2, 2).scale(eps);
    for a in &atoms {
        x.axpy(a.weight, &crate::separability::product_element(a.lambda, a.mu));
    }
    (x, atoms)
}

/// Random unitary as a product of random complex Givens rotations and phases.
pub fn random_unitary<R: Rng + ?Sized>(q: usize, rng: &mut R) -> CMatrix {
    let mut u = CMatrix::from_fn(q, q, |i, j| if i == j { random_unit(rng) } else { Complex64::new(0.0, 0.0) });
    for _ in 0..3 * q * q {
        if q < 2 {
            break;
        }
        let i = rng.random_range(0..q);
        let mut j = rng.random_range(0..q - 1);
        if j >= i {
            j += 1;
        }
        let t: f64 = rng.random_range(0.0..TAU);
        let phase = random_unit(rng);
        let (c, s) = (t.cos(), t.sin());
        let mut g = CMatrix::identity(q);
        g[(i, i)] = Complex64::new(c, 0.0);
        g[(i, j)] = -phase.conj() * s;
        g[(j, i)] = phase * s;
        g[(j, j)] = Complex64::new(c, 0.0);
        u = &g * &u;
    }
    u
}

/// Validates CLI-facing parameters.
pub fn validate(n: usize, p: usize) -> Result<()> {
    check_params(n, p)
}
