//! Toeplitz operator systems over matrix coefficients: positivity
//! certificates, separable decompositions, finite-spectrum dilations,
//! duality between Toeplitz matrices and trigonometric polynomials, and
//! entanglement witnesses.

pub mod cp_duality;
pub mod dilation;
pub mod entanglement;
pub mod error;
pub mod generate;
pub mod matcore;
pub mod positivity;
pub mod separability;
pub mod toeplitz;
mod wire;

pub use cp_duality::{
    apply_map_blockwise, fit_point_evaluation, is_cp_dual_map, is_cp_toeplitz_map, toeplitz_cp_probe, toeplitz_of_dual_map,
    trigpoly_of_toeplitz_map, DualSystemMap, MapDirection, MatrixMap, ProbeReport, Violation, DEFAULT_PROBE_SEED,
};
pub use dilation::{naimark_from_atoms, universal_at_unitary, verify_factorization, DilationFactorization, FactorizationCheck, SpectrumEntry};
pub use entanglement::{
    dual_pure_element, rank_one_range_witness, separability_search_dual, universal_trigpoly, EntanglementCertificate, EntanglementVerdict,
    Evidence, SearchOptions, SeparableTerm,
};
pub use error::{Error, Result};
pub use matcore::CMatrix;
pub use num_complex::Complex64;
pub use positivity::{check_toeplitz_psd, check_trigpoly_psd, check_trigpoly_psd_at, GridOutcome, PositivityCertificate, Verdict, Witness};
pub use separability::{
    caratheodory_scalar, decompose_block, decompose_identity, decompose_shift, decompose_toeplitz_toeplitz, purity_check, Atom, AtomicDecomposition,
    GreedyOptions, Grid2dOptions, ProductAtom, ProductDecomposition, Purity,
};
pub use toeplitz::{duality_pair, flip_conjugate, hat_of_toeplitz, hat_of_trigpoly, universal_toeplitz, BlockToeplitz, FlipUnitary, TrigMatrixPoly};
