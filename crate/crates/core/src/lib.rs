//! Semiparametric spatial autoregressive prediction.
//!
//! The model combines a linear covariate term with a nonparametric spatial
//! term driven by neighborhood vectors (the responses observed at the k
//! nearest neighbors of each site). Estimation follows a two-step
//! partial-residual scheme: a kernel weight matrix smooths out the
//! neighborhood-conditional expectations, the linear coefficients are
//! obtained by least squares on the residualized data, and the spatial term
//! is recovered as a kernel smooth of the regression residuals.
//!
//! Modules:
//! - [`grid`]: site sets (regular / irregular / clustered), nested
//!   subsamples, nearest-neighbor tables.
//! - [`kernels`]: compact-support kernels, medians, the median similarity.
//! - [`weights`]: the row-stochastic kernel weight matrix and its variants.
//! - [`estimator`]: partial residuals, linear coefficients, spatial term,
//!   out-of-sample prediction.
//! - [`selection`]: cross-validated bandwidth / neighborhood selection.
//! - [`simgen`]: correlated Gaussian covariate fields and SAR responses.
//! - [`baselines`]: OLS and maximum-likelihood SAR reference fits.
//! - [`evaluation`]: the replicated 70/30 experiment protocol.
//! - [`io`]: CSV/JSON ingestion and export.

pub mod baselines;
pub mod estimator;
pub mod evaluation;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod rng;
pub mod selection;
pub mod simgen;
pub mod weights;

use thiserror::Error;

/// Threshold on the condition number of the normal-equations matrix above
/// which a least-squares fit is rejected.
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid regular count: {0} is not a perfect square")]
    InvalidRegularCount(usize),
    #[error("k too large: need k <= {max}, got {k}")]
    KTooLarge { k: usize, max: usize },
    #[error("invalid kernel argument: {0}")]
    InvalidKernelArgument(f64),
    #[error("median of an empty sequence")]
    EmptyMedian,
    #[error("empty neighborhood at site {0}")]
    EmptyNeighborhood(usize),
    #[error("design matrix ill-conditioned: cond = {0:.3e}")]
    IllConditioned(f64),
    #[error("covariance not PD after jitter escalation")]
    CovarianceNotPd,
    #[error("no feasible configuration")]
    NoFeasibleConfiguration,
    #[error("zero-variance training column: {0}")]
    ZeroVarianceColumn(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("missing column: {0}")]
    MissingColumn(String),
    #[error("missing or non-numeric values in data rows {0:?}")]
    MissingValues(Vec<usize>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code convention: 1 for validation errors, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::IllConditioned(_)
            | Error::CovarianceNotPd
            | Error::NoFeasibleConfiguration
            | Error::EmptyNeighborhood(_)
            | Error::Numerical(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
