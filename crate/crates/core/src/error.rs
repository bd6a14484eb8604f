use thiserror::Error;

/// Errors produced by the simulator core.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("mode index {index} out of range for grid with {count} modes")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("Schatten exponent p = {0} is not allowed; need p >= 1 or p = inf")]
    InvalidSchattenExponent(f64),
    #[error("operator is not Hermitian: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { defect: f64, tol: f64 },
    #[error("projector defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotIdempotent { defect: f64, tol: f64 },
    #[error("eigendecomposition did not converge")]
    EigenFailure,
    #[error("eigenvalue {value} lies outside [{lo}, {hi}] by more than the clamp tolerance")]
    DomainViolation { value: f64, lo: f64, hi: f64 },
    #[error("invalid entropy specification: {0}")]
    InvalidEntropy(String),
    #[error("constraint 0 <= gamma <= 1 violated by {0:.3e}")]
    ConstraintViolation(f64),
    #[error("admissible perturbation could not satisfy the constraint; achieved violation {0:.3e}")]
    Inadmissible(f64),
    #[error(
        "Picard iteration did not contract: increment {increment:.3e} after {iterations} \
         iterations; shorten the horizon"
    )]
    PicardDiverged { increment: f64, iterations: usize },
    #[error("Dyson tail term {tail:.3e} above requested tolerance {tol:.3e}; raise the order")]
    DysonTail { tail: f64, tol: f64 },
    #[error("insufficient quadrature nodes: {0}")]
    InsufficientNodes(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),
    #[error("numerical blow-up detected: {0}")]
    BlowUp(String),
    #[error("zero denominator in quotient")]
    ZeroDenominator,
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
