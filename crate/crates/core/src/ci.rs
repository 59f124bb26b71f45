//! The confidence-interval methods.
//!
//! * `pb_ci` - Poisson bootstrap: quantiles of `sum w_i P_i`, `P_i ~ Pois(1)`.
//! * `eb_ci` - Exponential bootstrap: lower from `sum w_i E_i`, upper adds a
//!   next-weight term `w** E_{n+1}`; Monte Carlo or saddlepoint backend.
//! * `weighted_gamma_ci` - quantiles of the stratified Gamma sums.
//! * `go_ci` / `gp_ci` - original and mid-p Gamma, extended to continuous
//!   weights via moment-matched Gamma distributions.
//! * `gm_ci` - modified Gamma with averaged next-weight contributions.
//!
//! Monte Carlo draws are coupled by event input index: the stream of draws
//! for event `i` is a pure function of `(seed, i)`, so bounds computed on a
//! subset and on a superset share every replicate and the bootstrap methods
//! are pathwise monotone under pooling. Callers comparing subset against
//! union must keep event identity (input order) stable between the calls.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::config::{Backend, CiConfig, CiResult, Method, NextWeightMode};
use crate::engine::{mc_quantile, nearest_rank, saddlepoint_quantile, single_gamma_quantile};
use crate::error::{Error, Result};
use crate::gamma_sum::GammaSumSpec;
use crate::next_weight::resolve_next_weight;
use crate::seed;
use crate::special::gamma_cdf;
use crate::weights::{group_weights, WeightSample, GROUPING_REL_TOL};

/// Per-event bootstrap draw streams, keyed by event input index.
///
/// The draws for event index `i` depend only on `(seed, i)`, never on which
/// other events are present, which makes subset/superset comparisons
/// replicate-by-replicate.
#[derive(Debug)]
pub struct CoupledDraws {
    replicates: u32,
    rows: Vec<Vec<f64>>,
    /// One extra exponential stream for the next-weight term.
    next_row: Vec<f64>,
}

/// Salt separating the next-weight stream from any event index.
const NEXT_WEIGHT_SALT: u64 = u64::MAX;

impl CoupledDraws {
    /// Unit-exponential streams for `n_events` events plus the next-weight column.
    pub fn exponential(seed: u64, n_events: usize, replicates: u32) -> Self {
        let rows = (0..n_events)
            .map(|i| Self::exp_stream(seed, i as u64, replicates))
            .collect();
        let next_row = Self::exp_stream(seed, NEXT_WEIGHT_SALT, replicates);
        Self { replicates, rows, next_row }
    }

    /// Unit-Poisson streams for `n_events` events.
    pub fn poisson(seed: u64, n_events: usize, replicates: u32) -> Self {
        let pois = Poisson::new(1.0).expect("unit mean");
        let rows = (0..n_events)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(&[seed, i as u64]));
                (0..replicates).map(|_| pois.sample(&mut rng)).collect()
            })
            .collect();
        Self { replicates, rows, next_row: Vec::new() }
    }

    fn exp_stream(seed: u64, salt: u64, replicates: u32) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::mix(&[seed, salt]));
        (0..replicates).map(|_| Exp1.sample(&mut rng)).collect()
    }

    pub fn replicates(&self) -> u32 {
        self.replicates
    }

    /// Replicate statistics `sum_i w_i e_i` over the given `(index, weight)`
    /// events, accumulated in index order.
    fn accumulate(&self, items: &[(usize, f64)]) -> Vec<f64> {
        let mut acc = vec![0.0f64; self.replicates as usize];
        for &(idx, w) in items {
            let row = &self.rows[idx];
            for (a, e) in acc.iter_mut().zip(row) {
                *a += w * e;
            }
        }
        acc
    }
}

fn items_in_order(weights: &[f64]) -> Vec<(usize, f64)> {
    weights.iter().copied().enumerate().collect()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    v
}

/// Poisson-bootstrap bounds over coupled draws for the given events.
fn pb_bounds(draws: &CoupledDraws, items: &[(usize, f64)], alpha: f64) -> (f64, f64) {
    if items.is_empty() {
        return (0.0, 0.0);
    }
    let stats = sorted(draws.accumulate(items));
    (nearest_rank(&stats, alpha / 2.0), nearest_rank(&stats, 1.0 - alpha / 2.0))
}

/// Exponential-bootstrap bounds over coupled draws for the given events.
fn eb_mc_bounds(draws: &CoupledDraws, items: &[(usize, f64)], next_weight: f64, alpha: f64) -> (f64, f64) {
    let base = if items.is_empty() {
        vec![0.0; draws.replicates as usize]
    } else {
        draws.accumulate(items)
    };
    let lower = if items.is_empty() {
        0.0
    } else {
        nearest_rank(&sorted(base.clone()), alpha / 2.0)
    };
    let upper_stats: Vec<f64> = base
        .iter()
        .zip(&draws.next_row)
        .map(|(b, e)| b + next_weight * e)
        .collect();
    let upper = if items.is_empty() && next_weight == 0.0 {
        0.0
    } else {
        nearest_rank(&sorted(upper_stats), 1.0 - alpha / 2.0)
    };
    (lower, upper)
}

/// Exponential-bootstrap bounds through the saddlepoint backend.
fn eb_sp_bounds(weights: &[f64], next_weight: f64, alpha: f64) -> Result<(f64, f64)> {
    let lower = if weights.is_empty() {
        0.0
    } else {
        let spec = GammaSumSpec::from_weights(weights, 0.0)?;
        saddlepoint_quantile(&spec, 1.0 - alpha / 2.0)?
    };
    let upper_spec = GammaSumSpec::from_weights(weights, next_weight)?;
    let upper = if upper_spec.is_degenerate() {
        0.0
    } else {
        saddlepoint_quantile(&upper_spec, alpha / 2.0)?
    };
    Ok((lower, upper))
}

fn resolve_eb_next_weight(sample: &WeightSample, cfg: &CiConfig) -> Result<(f64, bool)> {
    match resolve_next_weight(&cfg.next_weight_spec, sample, None) {
        Ok(v) => Ok((v, false)),
        // the wm rule falls back to the observed maximum rather than
        // refusing to produce any interval
        Err(Error::NextWeightUnresolved(_))
            if matches!(cfg.next_weight_spec.mode, NextWeightMode::Wm) =>
        {
            Ok((sample.max_weight(), true))
        }
        Err(e) => Err(e),
    }
}

#[allow(clippy::too_many_arguments)]
fn result(
    sample_scale: f64,
    point: f64,
    lower: f64,
    upper: f64,
    method: Method,
    cfg_alpha: f64,
    next_weight: f64,
    backend: Backend,
    fallback: bool,
) -> CiResult {
    // adding 0.0 turns the empty-sum -0.0 into +0.0
    CiResult {
        point_estimate: point / sample_scale + 0.0,
        lower: (lower / sample_scale).max(0.0) + 0.0,
        upper: (upper / sample_scale).max(0.0) + 0.0,
        method,
        alpha: cfg_alpha,
        next_weight_used: next_weight,
        backend,
        next_weight_fallback: fallback,
    }
}

/// Poisson bootstrap CI.
pub fn pb_ci(sample: &WeightSample, cfg: &CiConfig) -> CiResult {
    let draws = CoupledDraws::poisson(cfg.seed, sample.len(), cfg.bootstrap_draws);
    let (lower, upper) = pb_bounds(&draws, &items_in_order(sample.weights()), cfg.alpha);
    result(
        sample.miles_normalizer(),
        sample.weights().iter().sum(),
        lower,
        upper,
        Method::Pb,
        cfg.alpha,
        0.0,
        Backend::MonteCarlo,
        false,
    )
}

/// Exponential bootstrap CI with the next weight resolved from the config.
pub fn eb_ci(sample: &WeightSample, cfg: &CiConfig) -> Result<CiResult> {
    let (next_weight, fallback) = resolve_eb_next_weight(sample, cfg)?;
    let (lower, upper) = match cfg.backend {
        Backend::MonteCarlo => {
            let draws = CoupledDraws::exponential(cfg.seed, sample.len(), cfg.bootstrap_draws);
            eb_mc_bounds(&draws, &items_in_order(sample.weights()), next_weight, cfg.alpha)
        }
        Backend::Saddlepoint => eb_sp_bounds(sample.weights(), next_weight, cfg.alpha)?,
    };
    Ok(result(
        sample.miles_normalizer(),
        sample.weights().iter().sum(),
        lower,
        upper,
        Method::Eb,
        cfg.alpha,
        next_weight,
        cfg.backend,
        fallback,
    ))
}

/// Weighted Gamma CI on grouped strata.
///
/// Lower bound: `alpha/2` quantile of `sum w_k G_k` with `G_k ~ Gamma(x_k)`.
/// Upper bound: `1 - alpha/2` quantile of the same sum plus `w** G_{K+1}`.
pub fn weighted_gamma_ci(
    strata: &[(f64, u64)],
    next_weight: f64,
    cfg: &CiConfig,
) -> Result<CiResult> {
    let lower_spec = GammaSumSpec::from_strata(strata, 0.0)?;
    let upper_spec = GammaSumSpec::from_strata(strata, next_weight)?;
    let point = lower_spec.mean();
    let (lower, upper) = match cfg.backend {
        Backend::MonteCarlo => {
            let lower = if lower_spec.is_degenerate() {
                0.0
            } else {
                mc_quantile(&lower_spec, cfg.alpha / 2.0, cfg.bootstrap_draws, seed::mix(&[cfg.seed, 0]))
            };
            let upper = if upper_spec.is_degenerate() {
                0.0
            } else {
                mc_quantile(&upper_spec, 1.0 - cfg.alpha / 2.0, cfg.bootstrap_draws, seed::mix(&[cfg.seed, 1]))
            };
            (lower, upper)
        }
        Backend::Saddlepoint => {
            let lower = if lower_spec.is_degenerate() {
                0.0
            } else {
                saddlepoint_quantile(&lower_spec, 1.0 - cfg.alpha / 2.0)?
            };
            let upper = if upper_spec.is_degenerate() {
                0.0
            } else {
                saddlepoint_quantile(&upper_spec, cfg.alpha / 2.0)?
            };
            (lower, upper)
        }
    };
    Ok(result(1.0, point, lower, upper, Method::Wg, cfg.alpha, next_weight, cfg.backend, false))
}

/// Quantile of a Gamma distribution matched to the given mean and variance.
fn matched_gamma_quantile(mean: f64, variance: f64, prob: f64) -> Result<f64> {
    if mean <= 0.0 || variance <= 0.0 {
        return Ok(0.0);
    }
    single_gamma_quantile(mean * mean / variance, mean / variance, prob)
}

/// Extended original Gamma CI: moment-matched Gamma quantiles, with the next
/// weight entering only the upper distribution.
pub fn go_ci(sample: &WeightSample, next_weight: f64, alpha: f64) -> Result<CiResult> {
    check_alpha(alpha)?;
    let sw: f64 = sample.weights().iter().sum();
    let sw2: f64 = sample.weights().iter().map(|w| w * w).sum();
    let lower = matched_gamma_quantile(sw, sw2, alpha / 2.0)?;
    let upper = matched_gamma_quantile(next_weight + sw, next_weight * next_weight + sw2, 1.0 - alpha / 2.0)?;
    Ok(result(
        sample.miles_normalizer(),
        sw,
        lower,
        upper,
        Method::Go,
        alpha,
        next_weight,
        Backend::Saddlepoint,
        false,
    ))
}

/// Extended mid-p Gamma CI: both bounds are quantiles of the equal mixture
/// of the two moment-matched Gammas, solved on the analytic mixture CDF.
pub fn gp_ci(sample: &WeightSample, next_weight: f64, alpha: f64) -> Result<CiResult> {
    check_alpha(alpha)?;
    let sw: f64 = sample.weights().iter().sum();
    let sw2: f64 = sample.weights().iter().map(|w| w * w).sum();
    let mean_u = next_weight + sw;
    let var_u = next_weight * next_weight + sw2;

    // degenerate components are point masses at zero
    let cdf_l = move |z: f64| -> Result<f64> {
        if sw <= 0.0 {
            return Ok(1.0);
        }
        gamma_cdf(z, sw * sw / sw2, sw / sw2)
    };
    let cdf_u = move |z: f64| -> Result<f64> {
        if mean_u <= 0.0 {
            return Ok(1.0);
        }
        gamma_cdf(z, mean_u * mean_u / var_u, mean_u / var_u)
    };
    let mixture = move |z: f64| -> Result<f64> { Ok(0.5 * (cdf_l(z)? + cdf_u(z)?)) };

    let hi0 = if var_u > 0.0 { mean_u + 20.0 * var_u.sqrt() } else { 1.0 };
    let lower = mixture_quantile(&mixture, alpha / 2.0, hi0)?;
    let upper = mixture_quantile(&mixture, 1.0 - alpha / 2.0, hi0)?;
    Ok(result(
        sample.miles_normalizer(),
        sw,
        lower,
        upper,
        Method::Gp,
        alpha,
        next_weight,
        Backend::Saddlepoint,
        false,
    ))
}

fn mixture_quantile(cdf: &dyn Fn(f64) -> Result<f64>, prob: f64, hi0: f64) -> Result<f64> {
    if cdf(0.0)? >= prob {
        return Ok(0.0);
    }
    let mut hi = hi0;
    let mut expansions = 0;
    while cdf(hi)? < prob {
        hi *= 2.0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Convergence("mixture quantile bracket ran away".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..500 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 * hi {
            return Ok(mid);
        }
        if cdf(mid)? < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Convergence("mixture quantile bisection exhausted 500 steps".into()))
}

/// Discrete modified Gamma CI: like `go_ci`, but the upper distribution's
/// next-weight contributions are the stratum averages `sum w_k / K` (mean)
/// and `sum w_k^2 / K` (variance).
pub fn gm_ci(strata: &[(f64, u64)], alpha: f64) -> Result<CiResult> {
    check_alpha(alpha)?;
    if strata.is_empty() {
        return Ok(result(1.0, 0.0, 0.0, 0.0, Method::Gm, alpha, 0.0, Backend::Saddlepoint, false));
    }
    let k = strata.len() as f64;
    let sw: f64 = strata.iter().map(|&(w, x)| w * x as f64).sum();
    let sw2: f64 = strata.iter().map(|&(w, x)| w * w * x as f64).sum();
    let mean_next: f64 = strata.iter().map(|&(w, _)| w).sum::<f64>() / k;
    let var_next: f64 = strata.iter().map(|&(w, _)| w * w).sum::<f64>() / k;
    let lower = matched_gamma_quantile(sw, sw2, alpha / 2.0)?;
    let upper = matched_gamma_quantile(mean_next + sw, var_next + sw2, 1.0 - alpha / 2.0)?;
    Ok(result(1.0, sw, lower, upper, Method::Gm, alpha, mean_next, Backend::Saddlepoint, false))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must be in (0,1), got {alpha}")));
    }
    Ok(())
}

/// Compute one method's CI for a sample, resolving the next weight from the
/// config (with the wm fallback for EB-family methods).
pub fn compute_ci(sample: &WeightSample, cfg: &CiConfig) -> Result<CiResult> {
    match cfg.method {
        Method::Pb => Ok(pb_ci(sample, cfg)),
        Method::Eb => eb_ci(sample, cfg),
        Method::Wg => {
            let (nw, fallback) = resolve_eb_next_weight(sample, cfg)?;
            let strata = group_weights(sample, GROUPING_REL_TOL);
            let mut res = weighted_gamma_ci(&strata, nw, cfg)?;
            res.point_estimate /= sample.miles_normalizer();
            res.lower /= sample.miles_normalizer();
            res.upper /= sample.miles_normalizer();
            res.next_weight_fallback = fallback;
            Ok(res)
        }
        Method::Go => {
            let (nw, fallback) = resolve_eb_next_weight(sample, cfg)?;
            let mut res = go_ci(sample, nw, cfg.alpha)?;
            res.next_weight_fallback = fallback;
            Ok(res)
        }
        Method::Gp => {
            let (nw, fallback) = resolve_eb_next_weight(sample, cfg)?;
            let mut res = gp_ci(sample, nw, cfg.alpha)?;
            res.next_weight_fallback = fallback;
            Ok(res)
        }
        Method::Gm => {
            let strata = group_weights(sample, GROUPING_REL_TOL);
            let mut res = gm_ci(&strata, cfg.alpha)?;
            res.point_estimate /= sample.miles_normalizer();
            res.lower /= sample.miles_normalizer();
            res.upper /= sample.miles_normalizer();
            Ok(res)
        }
    }
}

/// Subset-versus-union comparison for one method.
#[derive(Debug, Clone)]
pub struct BoundComparison {
    pub method: Method,
    pub subset: CiResult,
    pub union: CiResult,
    pub lower_violated: bool,
    pub upper_violated: bool,
}

/// Monotonicity report across methods.
#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub subset_category: String,
    pub comparisons: Vec<BoundComparison>,
}

impl MonotonicityReport {
    pub fn any_violation(&self) -> bool {
        self.comparisons.iter().any(|c| c.lower_violated || c.upper_violated)
    }
}

/// Tolerance for calling a bound pair a violation: macroscopic violations are
/// what the property is about, not last-bit float dust.
const VIOLATION_SLACK: f64 = 1e-9;

/// Check whether pooling the subset with the rest of the sample moves every
/// bound up, method by method.
///
/// Monte Carlo backends share coupled draws between the subset and the
/// union, so the bootstrap comparisons are pathwise. Deterministic methods
/// are compared on their analytic bounds.
pub fn check_monotonicity(
    sample: &WeightSample,
    subset_category: &str,
    cfg: &CiConfig,
    methods: &[Method],
) -> Result<MonotonicityReport> {
    let subset_idx = sample.category_indices(subset_category)?;
    let subset_sample = sample.subset_by_category(subset_category)?;
    let all_items = items_in_order(sample.weights());
    let subset_items: Vec<(usize, f64)> =
        subset_idx.iter().map(|&i| (i, sample.weights()[i])).collect();

    let mut comparisons = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut cfg_m = cfg.clone();
        cfg_m.method = method;
        let (subset, union) = match (method, cfg.backend) {
            (Method::Pb, _) => {
                let draws = CoupledDraws::poisson(cfg.seed, sample.len(), cfg.bootstrap_draws);
                let (sl, su) = pb_bounds(&draws, &subset_items, cfg.alpha);
                let (ul, uu) = pb_bounds(&draws, &all_items, cfg.alpha);
                (
                    pb_result(&subset_sample, cfg, sl, su),
                    pb_result(sample, cfg, ul, uu),
                )
            }
            (Method::Eb, Backend::MonteCarlo) => {
                let draws = CoupledDraws::exponential(cfg.seed, sample.len(), cfg.bootstrap_draws);
                let (nw_s, fb_s) = resolve_eb_next_weight(&subset_sample, &cfg_m)?;
                let (nw_u, fb_u) = resolve_eb_next_weight(sample, &cfg_m)?;
                let (sl, su) = eb_mc_bounds(&draws, &subset_items, nw_s, cfg.alpha);
                let (ul, uu) = eb_mc_bounds(&draws, &all_items, nw_u, cfg.alpha);
                (
                    eb_result(&subset_sample, cfg, sl, su, nw_s, fb_s),
                    eb_result(sample, cfg, ul, uu, nw_u, fb_u),
                )
            }
            _ => {
                let subset = compute_ci(&subset_sample, &cfg_m)?;
                let union = compute_ci(sample, &cfg_m)?;
                (subset, union)
            }
        };
        let lower_violated = subset.lower > union.lower + VIOLATION_SLACK * (1.0 + union.lower);
        let upper_violated = subset.upper > union.upper + VIOLATION_SLACK * (1.0 + union.upper);
        comparisons.push(BoundComparison { method, subset, union, lower_violated, upper_violated });
    }
    Ok(MonotonicityReport { subset_category: subset_category.to_string(), comparisons })
}

fn pb_result(sample: &WeightSample, cfg: &CiConfig, lower: f64, upper: f64) -> CiResult {
    result(
        sample.miles_normalizer(),
        sample.weights().iter().sum(),
        lower,
        upper,
        Method::Pb,
        cfg.alpha,
        0.0,
        Backend::MonteCarlo,
        false,
    )
}

fn eb_result(
    sample: &WeightSample,
    cfg: &CiConfig,
    lower: f64,
    upper: f64,
    next_weight: f64,
    fallback: bool,
) -> CiResult {
    result(
        sample.miles_normalizer(),
        sample.weights().iter().sum(),
        lower,
        upper,
        Method::Eb,
        cfg.alpha,
        next_weight,
        Backend::MonteCarlo,
        fallback,
    )
}
