//! Estimation of the next-weight parameter `w**`.
//!
//! The recommended rule is `w_m = max(||w||_2, observed weights)` where
//! `||w||_2 = sqrt(E(W^2 | W > 0))` is estimated from the sampling metadata
//! of every simulated segment through a Hajek-style ratio, under the
//! power-law relation `p(v) ∝ r(v)^gamma`.

use crate::config::{NextWeightMode, NextWeightSpec};
use crate::error::{Error, Result};
use crate::weights::WeightSample;

/// Per-segment sampling metadata.
///
/// `h_prob` and the review flag are observable only for simulated segments,
/// and the outcome only for reviewed ones; [`SegmentRecord::validate`]
/// enforces those observability rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentRecord {
    pub segment_id: u64,
    /// Probability of being sampled for simulation, in (0, 1].
    pub s_prob: f64,
    /// Probability of being sampled for human review, if simulated.
    pub h_prob: Option<f64>,
    /// Overall sampling probability `p = s * h`.
    pub p_prob: f64,
    pub simulated: bool,
    pub reviewed: bool,
    /// True-positive review outcome, if reviewed.
    pub outcome: Option<bool>,
}

impl SegmentRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_prob > 0.0 && self.s_prob <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "segment {}: s_prob must be in (0,1], got {}",
                self.segment_id, self.s_prob
            )));
        }
        if !(0.0..=1.0).contains(&self.p_prob) {
            return Err(Error::InvalidInput(format!(
                "segment {}: p_prob must be in [0,1], got {}",
                self.segment_id, self.p_prob
            )));
        }
        if let Some(h) = self.h_prob {
            if !(0.0..=1.0).contains(&h) {
                return Err(Error::InvalidInput(format!(
                    "segment {}: h_prob must be in [0,1], got {h}",
                    self.segment_id
                )));
            }
            let p = self.s_prob * h;
            if (p - self.p_prob).abs() > 1e-12 * p.max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "segment {}: p_prob {} != s_prob * h_prob {}",
                    self.segment_id, self.p_prob, p
                )));
            }
        }
        if self.reviewed && !self.simulated {
            return Err(Error::InvalidInput(format!(
                "segment {}: reviewed implies simulated",
                self.segment_id
            )));
        }
        if self.outcome.is_some() && !(self.simulated && self.reviewed) {
            return Err(Error::InvalidInput(format!(
                "segment {}: outcome observable only when simulated and reviewed",
                self.segment_id
            )));
        }
        Ok(())
    }
}

/// Hajek-style estimate of `E(W^2 | W > 0)` under `r(v) ∝ p(v)^{1/gamma_hat}`.
///
/// Sums run over simulated segments only; the unknown scale of `r` cancels
/// between numerator and denominator.
pub fn estimate_second_moment(records: &[SegmentRecord], gamma_hat: f64) -> Result<f64> {
    estimate_second_moment_with(records, gamma_hat, 1.0)
}

/// Same estimator with an explicit scale injected into `r-hat`; the result
/// must not depend on it.
pub(crate) fn estimate_second_moment_with(
    records: &[SegmentRecord],
    gamma_hat: f64,
    rhat_scale: f64,
) -> Result<f64> {
    if !(gamma_hat > 0.0) || !gamma_hat.is_finite() {
        return Err(Error::InvalidInput(format!(
            "gamma_hat must be positive, got {gamma_hat}"
        )));
    }
    let inv_gamma = 1.0 / gamma_hat;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut any = false;
    for rec in records {
        if !rec.simulated || rec.p_prob <= 0.0 {
            continue;
        }
        any = true;
        let rhat = rhat_scale * rec.p_prob.powf(inv_gamma);
        num += rhat / rec.p_prob / rec.s_prob;
        den += rhat * rec.p_prob / rec.s_prob;
    }
    if !any {
        return Err(Error::NoSimulatedRecords);
    }
    if den <= 0.0 || !den.is_finite() {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}

/// Fit the power-law index of `r(v) ∝ p(v)^{1/gamma}` by maximum likelihood
/// on the reviewed outcomes, `Y ~ Bernoulli(min(1, c * p^{1/gamma}))`.
///
/// Profile search over `gamma` in (0, 2] with an inner 1-D solve for `c`.
pub fn fit_gamma_index(records: &[SegmentRecord]) -> Result<f64> {
    let data: Vec<(f64, bool)> = records
        .iter()
        .filter(|r| r.simulated && r.reviewed && r.p_prob > 0.0)
        .filter_map(|r| r.outcome.map(|y| (r.p_prob, y)))
        .collect();
    if data.len() < 30 {
        return Err(Error::InsufficientData(format!(
            "need at least 30 reviewed records with outcomes, got {}",
            data.len()
        )));
    }
    let n_pos = data.iter().filter(|&&(_, y)| y).count();
    if n_pos == 0 || n_pos == data.len() {
        return Err(Error::InsufficientData(
            "both outcome values must be present to fit the index".into(),
        ));
    }
    let p_min = data.iter().map(|&(p, _)| p).fold(f64::INFINITY, f64::min);
    let p_max = data.iter().map(|&(p, _)| p).fold(0.0f64, f64::max);
    if p_max - p_min <= 1e-12 * p_max {
        return Err(Error::Unidentifiable);
    }

    let log_p: Vec<(f64, bool)> = data.iter().map(|&(p, y)| (p.ln(), y)).collect();
    let profile = |gamma: f64| -> f64 {
        let q: Vec<(f64, bool)> = log_p.iter().map(|&(lp, y)| ((lp / gamma).exp(), y)).collect();
        max_loglik_over_c(&q)
    };

    // coarse grid then golden-section refinement around the best cell
    const GRID: usize = 60;
    let mut best_i = 0;
    let mut best_ll = f64::NEG_INFINITY;
    let gammas: Vec<f64> = (1..=GRID).map(|i| 2.0 * i as f64 / GRID as f64).collect();
    for (i, &g) in gammas.iter().enumerate() {
        let ll = profile(g);
        if ll > best_ll {
            best_ll = ll;
            best_i = i;
        }
    }
    let lo = if best_i == 0 { 1e-3 } else { gammas[best_i - 1] };
    let hi = if best_i + 1 == gammas.len() { 2.0 } else { gammas[best_i + 1] };
    let gamma_hat = golden_max(lo, hi, 1e-4, profile);

    if gamma_hat > 2.0 - 1e-3 {
        return Err(Error::GammaIndexAtBound { value: gamma_hat });
    }
    Ok(gamma_hat)
}

/// Inner maximization over the scale `c` for fixed covariates `q = p^{1/gamma}`.
fn max_loglik_over_c(q: &[(f64, bool)]) -> f64 {
    let q_max = q.iter().map(|&(v, _)| v).fold(0.0f64, f64::max);
    let loglik = |ln_c: f64| -> f64 {
        let c = ln_c.exp();
        q.iter()
            .map(|&(qi, y)| {
                let prob = (c * qi).clamp(1e-300, 1.0 - 1e-12);
                if y {
                    prob.ln()
                } else {
                    (-prob).ln_1p()
                }
            })
            .sum()
    };
    // c * q_max spans from deep clamping to fully clamped
    let lo = (1e-9 / q_max).ln();
    let hi = (1e3 / q_max).ln();
    let best = golden_max(lo, hi, 1e-6, loglik);
    loglik(best)
}

fn golden_max(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo < tol {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Resolve the next weight for a sample under the given rule.
///
/// The `||w||_2` estimate comes from `records` when supplied, else from
/// `spec.w2_estimate`. A non-finite estimate, or one exceeding 1e6 times the
/// largest observed weight of a nonempty sample, trips the greedy-sampling
/// variance diagnostic.
pub fn resolve_next_weight(
    spec: &NextWeightSpec,
    sample: &WeightSample,
    records: Option<&[SegmentRecord]>,
) -> Result<f64> {
    let max_observed = sample.max_weight();
    match spec.mode {
        NextWeightMode::Fixed(value) => Ok(value),
        NextWeightMode::MaxObserved => Ok(max_observed),
        NextWeightMode::W2 | NextWeightMode::Wm => {
            let w2 = match records {
                Some(recs) => estimate_second_moment(recs, spec.gamma_hat)?.sqrt(),
                None => spec.w2_estimate.ok_or_else(|| {
                    Error::NextWeightUnresolved(
                        "w2/wm rule needs segment records or a supplied ||w||_2 estimate".into(),
                    )
                })?,
            };
            if !w2.is_finite() || (!sample.is_empty() && w2 > 1e6 * max_observed) {
                return Err(Error::GreedySamplingVariance { estimate: w2, max_observed });
            }
            match spec.mode {
                NextWeightMode::W2 => Ok(w2),
                _ => Ok(w2.max(max_observed)),
            }
        }
    }
}
