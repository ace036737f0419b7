use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix data has {len} entries, expected {dim}x{dim}")]
    BadShape { dim: usize, len: usize },

    #[error("matrix is not Hermitian: ||M - M^H||_F = {defect:.3e} exceeds {tol:.1e}")]
    NotHermitian { defect: f64, tol: f64 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off:.3e})")]
    EigDidNotConverge { sweeps: usize, off: f64 },

    #[error("matrix log domain error: eigenvalue {lambda_min:.3e} is singular or negative")]
    LogDomain { lambda_min: f64 },

    #[error("eigenvalue {value:.3e} below the clamp tolerance -{tol:.1e}")]
    NegativeEigenvalue { value: f64, tol: f64 },

    #[error("trace {trace:.12} is not within {tol:.1e} of 1")]
    TraceNotOne { trace: f64, tol: f64 },

    #[error("trace inner product has imaginary part {imag:.3e} above 1e-10")]
    ImaginaryTrace { imag: f64 },

    #[error("factor dimensions {product} do not multiply to matrix dimension {dim}")]
    FactorMismatch { product: usize, dim: usize },

    #[error("keep set is empty or references factor {index} out of {count}")]
    BadKeepSet { index: usize, count: usize },

    #[error("spectrum [{min:.3e}, {max:.3e}] is not within [0,1] (tolerance 1e-10)")]
    SpectrumOutOfRange { min: f64, max: f64 },

    #[error("Born probability {value:.12} outside [-1e-9, 1+1e-9]")]
    BornOutOfRange { value: f64 },

    #[error("probability {value} outside [0,1]")]
    BadProbability { value: f64 },

    #[error("learning rate eta = {eta} violates 0 < eta < 1/2")]
    EtaOutOfRange { eta: f64 },

    #[error("learner variant mismatch: state is {state}, update is {update}")]
    VariantMismatch { state: String, update: String },

    #[error("gradient spectral norm {norm:.6} exceeds Lipschitz bound {lipschitz}")]
    GradientNormExceeded { norm: f64, lipschitz: f64 },

    #[error("epsilon = {epsilon} outside (0, 1]")]
    EpsilonOutOfRange { epsilon: f64 },

    #[error("degenerate postselection: acceptance probability {probability:.3e} <= 1e-12")]
    DegeneratePostselection { probability: f64 },

    #[error("register count {k} exceeds the pattern-enumeration cap {cap}")]
    RegisterCap { k: usize, cap: usize },

    #[error("amplified hypothesis is not permutation symmetric: swap defect {defect:.3e} exceeds 1e-8")]
    NotPermutationSymmetric { defect: f64 },

    #[error("pivot point {pivot} outside [0,1]")]
    BadPivot { pivot: f64 },

    #[error("decoder lookup failed for bit index {index} with prefix \"{prefix}\"")]
    DecoderLookup { index: usize, prefix: String },

    #[error("random access code is missing encoder entry for \"{key}\"")]
    MissingEncoderEntry { key: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invariant violated at iteration {t}: {what}")]
    InvariantViolation { t: u64, what: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
