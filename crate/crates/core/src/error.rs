use thiserror::Error;

use crate::separability::AtomicDecomposition;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("trigonometric polynomial is not Hermitian-valued (defect {defect:.3e})")]
    NotHermitianValued { defect: f64 },

    #[error("{what} did not converge within {budget} iterations")]
    NoConvergence { what: &'static str, budget: usize },

    #[error("matrix is not positive semidefinite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("element is not positive (margin {margin:.3e})")]
    NotPositive { margin: f64 },

    #[error("element is not strictly positive (margin {margin:.3e})")]
    NotStrictlyPositive { margin: f64 },

    #[error("point {re}+{im}i is not on the unit circle")]
    NotOnCircle { re: f64, im: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("positivity undecided at the largest grid ({grid} samples)")]
    GridExhausted { grid: usize },

    #[error("decomposition residual {residual:.3e} exceeds tolerance after kernel filtering")]
    DecompositionFailed { residual: f64 },

    #[error("budget exhausted with residual {:.3e}", best.residual)]
    BudgetExhausted { best: Box<AtomicDecomposition> },

    #[error("every atom of the decomposition is numerically zero")]
    DegenerateAtom,

    #[error("matrix is not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },

    #[error("basis values at {index} and {} are not adjoint to each other", -index)]
    InconsistentAdjoints { index: isize },

    #[error("input is zero")]
    ZeroInput,

    #[error("element is not a Toeplitz matrix with Toeplitz entries")]
    NotToeplitzTensor,

    #[error("bad parameters: {0}")]
    BadParams(String),
}
