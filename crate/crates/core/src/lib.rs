//! Unbiased rate estimation and confidence intervals for rare events
//! observed through multi-stage importance sampling.
//!
//! The observed data are the positive Horvitz-Thompson weights of confirmed
//! events; the rate estimate is their sum per million miles. Interval
//! construction treats that sum as a compound-Poisson quantity:
//!
//! * bootstrap methods ([`ci::pb_ci`], [`ci::eb_ci`]) resample per-event
//!   multipliers, with the exponential bootstrap adding a "next weight"
//!   term to the upper bound so that pooling disjoint event categories can
//!   never lower a bound;
//! * Gamma-family methods ([`ci::weighted_gamma_ci`], [`ci::go_ci`],
//!   [`ci::gp_ci`], [`ci::gm_ci`]) take quantiles of weighted Gamma sums or
//!   moment-matched Gammas;
//! * the deterministic backend inverts a saddlepoint approximation of the
//!   weighted-Gamma tail ([`engine`]);
//! * the next-weight parameter is estimated from sampling metadata
//!   ([`next_weight`]);
//! * [`simulator`] replays the whole pipeline on synthetic populations to
//!   measure empirical coverage.

// `!(x > 0.0)` is used on purpose throughout: unlike `x <= 0.0` it also
// rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ci;
pub mod config;
pub mod engine;
pub mod error;
pub mod gamma_sum;
pub mod next_weight;
pub mod seed;
pub mod simulator;
pub mod special;
pub mod weights;

pub use ci::{check_monotonicity, eb_ci, gm_ci, go_ci, gp_ci, pb_ci, weighted_gamma_ci};
pub use ci::{BoundComparison, CoupledDraws, MonotonicityReport};
pub use config::{Backend, CiConfig, CiResult, Method, NextWeightMode, NextWeightSpec};
pub use engine::{
    cgf, cgf_derivatives, mc_quantile, saddlepoint_quantile, saddlepoint_tail,
    single_gamma_quantile, SaddlepointSolution,
};
pub use error::{Error, Result};
pub use gamma_sum::GammaSumSpec;
pub use next_weight::{estimate_second_moment, fit_gamma_index, resolve_next_weight, SegmentRecord};
pub use simulator::{
    apply_sampling, generate_population, run_study, true_positive_prob, Candidate, CoverageReport,
    CoverageRow, GammaHatPolicy, SamplingModel, SamplingOutcome, Scenario, SimMethod, Stages,
};
pub use weights::{group_weights, validate_weights, WeightSample};
