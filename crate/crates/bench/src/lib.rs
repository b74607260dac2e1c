//! Fixed benchmark instances.

use tsep_core::generate::{gen_atoms, gen_density, rng_from_seed};
use tsep_core::{universal_toeplitz, universal_trigpoly, BlockToeplitz, Complex64, TrigMatrixPoly};

pub const SEED: u64 = 20;

/// Separable sum of `m` atoms.
pub fn atoms(n: usize, p: usize, m: usize) -> BlockToeplitz {
    gen_atoms(n, p, m, &mut rng_from_seed(SEED)).0
}

pub fn density(n: usize, p: usize) -> BlockToeplitz {
    gen_density(n, p, &mut rng_from_seed(SEED))
}

/// Rank-one boundary element, positive but not strictly.
pub fn boundary(n: usize) -> BlockToeplitz {
    universal_toeplitz(n, Complex64::from_polar(1.0, 0.7)).expect("n is positive")
}

/// Universal dual element shifted by `delta` times the order unit.
pub fn shifted_universal(n: usize, delta: f64) -> TrigMatrixPoly {
    let mut f = universal_trigpoly(n);
    f.axpy(delta, &TrigMatrixPoly::order_unit(n, n));
    f
}
