//! Error type shared by every module in this crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by validation, numerical routines and estimators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A weight was zero or negative.
    #[error("non-positive weight {value} at index {index}")]
    NonPositiveWeight { index: usize, value: f64 },

    /// A weight was NaN or infinite.
    #[error("non-finite weight at index {index}")]
    NonFiniteWeight { index: usize },

    /// An argument fell outside the domain of a numerical routine.
    #[error("domain error: {0}")]
    Domain(String),

    /// A root finder ran out of iterations.
    #[error("root finding failed to converge: {0}")]
    Convergence(String),

    /// The next-weight rule needs an estimate that was not supplied.
    #[error("next weight unresolved: {0}")]
    NextWeightUnresolved(String),

    /// No simulated segment records were available for estimation.
    #[error("no simulated segment records with positive sampling probability")]
    NoSimulatedRecords,

    /// The denominator of the second-moment estimator vanished.
    #[error("zero denominator in second-moment estimator")]
    ZeroDenominator,

    /// The gamma-index model cannot be identified from the data.
    #[error("gamma index unidentifiable: all sampling probabilities are equal")]
    Unidentifiable,

    /// Not enough reviewed records to fit the gamma-index model.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The fitted gamma index sits at the search boundary.
    #[error("gamma index {value} at search boundary; sampling looks pathological")]
    GammaIndexAtBound { value: f64 },

    /// The estimated second moment signals runaway importance-sampling variance.
    #[error(
        "greedy-sampling variance diagnostic: estimated second-moment root {estimate} \
         exceeds 1e6 x max observed weight {max_observed} or is non-finite"
    )]
    GreedySamplingVariance { estimate: f64, max_observed: f64 },

    /// A category label was not present in the sample.
    #[error("unknown category: {0}")]
    UnknownCategory(String),

    /// A malformed argument or configuration value.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
