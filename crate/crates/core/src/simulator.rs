//! Synthetic data generation and coverage studies.
//!
//! A scenario draws `N ~ Poisson(lambda)` candidate segments, labels each
//! true/false positive with probability `pi`, gives it a feature from the
//! matching normal density, and samples it for review with probability
//! `min(1, N b p-bar)` where `p-bar` follows the configured sampling model
//! normalized over the realized population. Observed true positives carry
//! weight `1/p`. Coverage is judged against the exact rate `theta = pi * lambda`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Backend, CiConfig, Method, NextWeightSpec};
use crate::error::{Error, Result};
use crate::next_weight::{estimate_second_moment, SegmentRecord};
use crate::seed;
use crate::weights::{validate_weights, WeightSample};
use crate::{ci, config::CiResult};

/// How review probabilities relate to the true-positive probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SamplingModel {
    /// `p-bar ∝ r^gamma`; gamma = 0 is uniform sampling.
    Power { gamma: f64 },
    /// `p-bar ∝ sqrt(r) (1 - r)`: near optimal for small r, adversarial for
    /// r close to 1.
    SqrtTimesOneMinusR,
    /// `p-bar ∝ r (1 + r)`: considerably greedier than optimal.
    RTimesOnePlusR,
}

impl SamplingModel {
    fn score(&self, r: f64) -> f64 {
        match *self {
            SamplingModel::Power { gamma } => {
                if gamma == 0.0 {
                    1.0
                } else {
                    r.powf(gamma)
                }
            }
            SamplingModel::SqrtTimesOneMinusR => r.sqrt() * (1.0 - r),
            SamplingModel::RTimesOnePlusR => r * (1.0 + r),
        }
    }
}

/// One- or two-stage sampling layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Stages {
    /// Single review stage with the scenario budget.
    One,
    /// First stage (simulation) with budget `b1` and index `gamma1`, second
    /// stage (review) with the scenario budget over the stage-one survivors
    /// and index `gamma2`.
    Two { b1: f64, gamma1: f64, gamma2: f64 },
}

/// Where the estimator's power-law index comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "value", rename_all = "snake_case")]
pub enum GammaHatPolicy {
    /// Use the scenario's own index (one-stage power: gamma; two-stage:
    /// gamma1 + gamma2). Requires a power sampling model.
    Oracle,
    /// Use a fixed value regardless of the data-generating index.
    Fixed(f64),
}

/// CI methods evaluated in a study: base method plus its next-weight rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMethod {
    Pb,
    Eb2,
    Eb2m,
    Go2m,
    Gp2m,
}

impl SimMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pb" => Ok(SimMethod::Pb),
            "eb2" => Ok(SimMethod::Eb2),
            "eb2m" => Ok(SimMethod::Eb2m),
            "go2m" => Ok(SimMethod::Go2m),
            "gp2m" => Ok(SimMethod::Gp2m),
            other => Err(Error::InvalidInput(format!("unknown study method '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SimMethod::Pb => "pb",
            SimMethod::Eb2 => "eb2",
            SimMethod::Eb2m => "eb2m",
            SimMethod::Go2m => "go2m",
            SimMethod::Gp2m => "gp2m",
        }
    }
}

/// Full data-generating configuration for one study cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Expected candidate segments per million miles.
    pub lambda: f64,
    /// True-positive fraction among candidates; `theta = pi * lambda`.
    pub pi: f64,
    /// (mean, sd) of the true-positive feature density.
    pub f1: (f64, f64),
    /// (mean, sd) of the false-positive feature density.
    pub f0: (f64, f64),
    pub sampling_model: SamplingModel,
    /// Review budget ratio; for two-stage layouts this is the second-stage
    /// budget `b2`.
    pub budget: f64,
    pub stages: Stages,
    pub alpha: f64,
    pub methods: Vec<SimMethod>,
    pub gamma_hat: GammaHatPolicy,
    pub replicates: u32,
    pub base_seed: u64,
    /// Bootstrap draws for the Monte Carlo methods (PB, and EB when the
    /// Monte Carlo backend is selected).
    pub bootstrap_draws: u32,
    /// Backend for the EB bounds inside the study.
    pub eb_backend: Backend,
}

impl Scenario {
    /// The study's true rate.
    pub fn theta(&self) -> f64 {
        self.pi * self.lambda
    }

    /// Effective power-law index of the overall sampling design, when the
    /// model is a power law.
    pub fn overall_gamma(&self) -> Option<f64> {
        match (self.stages, self.sampling_model) {
            (Stages::One, SamplingModel::Power { gamma }) => Some(gamma),
            (Stages::Two { gamma1, gamma2, .. }, SamplingModel::Power { .. }) => {
                Some(gamma1 + gamma2)
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidInput("lambda must be finite and nonnegative".into()));
        }
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return Err(Error::InvalidInput("pi must be in (0,1)".into()));
        }
        if !(self.f1.1 > 0.0 && self.f0.1 > 0.0) {
            return Err(Error::InvalidInput("feature densities need positive sd".into()));
        }
        if !(0.0..=1.0).contains(&self.budget) {
            return Err(Error::InvalidInput("budget must be in [0,1]".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput("alpha must be in (0,1)".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidInput("replicates must be at least 1".into()));
        }
        if self.bootstrap_draws < 100 {
            return Err(Error::InvalidInput("bootstrap draws must be at least 100".into()));
        }
        if let Stages::Two { b1, .. } = self.stages {
            if !(0.0..=1.0).contains(&b1) {
                return Err(Error::InvalidInput("first-stage budget must be in [0,1]".into()));
            }
            if !matches!(self.sampling_model, SamplingModel::Power { .. }) {
                return Err(Error::InvalidInput(
                    "two-stage layouts use the power sampling model".into(),
                ));
            }
        }
        if matches!(self.gamma_hat, GammaHatPolicy::Oracle) && self.overall_gamma().is_none() {
            return Err(Error::InvalidInput(
                "oracle gamma-hat needs a power sampling model".into(),
            ));
        }
        Ok(())
    }

    fn resolved_gamma_hat(&self) -> f64 {
        match self.gamma_hat {
            GammaHatPolicy::Oracle => self.overall_gamma().expect("validated"),
            GammaHatPolicy::Fixed(v) => v,
        }
    }
}

/// A candidate segment: its feature value and latent outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub feature: f64,
    pub true_positive: bool,
}

fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// Bayes posterior `r(v) = pi f1(v) / (pi f1(v) + (1 - pi) f0(v))`.
pub fn true_positive_prob(sc: &Scenario, v: f64) -> f64 {
    let l1 = sc.pi * normal_pdf(v, sc.f1.0, sc.f1.1);
    let l0 = (1.0 - sc.pi) * normal_pdf(v, sc.f0.0, sc.f0.1);
    if l1 + l0 == 0.0 {
        // far tails where both densities underflow: decide by distance
        let z1 = ((v - sc.f1.0) / sc.f1.1).abs();
        let z0 = ((v - sc.f0.0) / sc.f0.1).abs();
        return if z1 < z0 { 1.0 } else { 0.0 };
    }
    l1 / (l1 + l0)
}

/// Draw the candidate population: `N ~ Poisson(lambda)`, labels Bernoulli(pi),
/// features from the matching density.
pub fn generate_population(sc: &Scenario, seed: u64) -> Vec<Candidate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if sc.lambda == 0.0 {
        return Vec::new();
    }
    let n = Poisson::new(sc.lambda).expect("validated lambda").sample(&mut rng) as usize;
    let normal1 = rand_distr::Normal::new(sc.f1.0, sc.f1.1).expect("validated");
    let normal0 = rand_distr::Normal::new(sc.f0.0, sc.f0.1).expect("validated");
    (0..n)
        .map(|_| {
            let true_positive = rng.random::<f64>() < sc.pi;
            let feature = if true_positive {
                normal1.sample(&mut rng)
            } else {
                normal0.sample(&mut rng)
            };
            Candidate { feature, true_positive }
        })
        .collect()
}

/// Result of pushing a population through the sampling design.
#[derive(Debug, Clone)]
pub struct SamplingOutcome {
    pub sample: WeightSample,
    pub records: Vec<SegmentRecord>,
}

/// Apply one- or two-stage Poisson sampling and collect the observed
/// weights plus per-segment metadata for next-weight estimation.
pub fn apply_sampling(population: &[Candidate], sc: &Scenario, seed: u64) -> Result<SamplingOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = population.len();
    if n == 0 {
        return Ok(SamplingOutcome { sample: validate_weights(&[])?, records: Vec::new() });
    }
    let r: Vec<f64> = population.iter().map(|c| true_positive_prob(sc, c.feature)).collect();

    match sc.stages {
        Stages::One => {
            let scores: Vec<f64> = r.iter().map(|&ri| sc.sampling_model.score(ri)).collect();
            let total: f64 = scores.iter().sum();
            if total <= 0.0 {
                return Ok(SamplingOutcome { sample: validate_weights(&[])?, records: Vec::new() });
            }
            let scale = n as f64 * sc.budget / total;
            let mut weights = Vec::new();
            let mut records = Vec::with_capacity(n);
            for (i, cand) in population.iter().enumerate() {
                let p = (scale * scores[i]).min(1.0);
                let reviewed = p > 0.0 && rng.random::<f64>() < p;
                if reviewed && cand.true_positive {
                    weights.push(1.0 / p);
                }
                records.push(SegmentRecord {
                    segment_id: i as u64,
                    s_prob: 1.0,
                    h_prob: Some(p),
                    p_prob: p,
                    simulated: true,
                    reviewed,
                    outcome: reviewed.then_some(cand.true_positive),
                });
            }
            Ok(SamplingOutcome { sample: validate_weights(&weights)?, records })
        }
        Stages::Two { b1, gamma1, gamma2 } => {
            let s_scores: Vec<f64> = r.iter().map(|&ri| SamplingModel::Power { gamma: gamma1 }.score(ri)).collect();
            let s_total: f64 = s_scores.iter().sum();
            if s_total <= 0.0 {
                return Ok(SamplingOutcome { sample: validate_weights(&[])?, records: Vec::new() });
            }
            let s_scale = n as f64 * b1 / s_total;
            let s_probs: Vec<f64> = s_scores.iter().map(|&sc_| (s_scale * sc_).min(1.0)).collect();
            let simulated: Vec<bool> = s_probs.iter().map(|&s| s > 0.0 && rng.random::<f64>() < s).collect();

            // second stage normalizes over the realized survivors
            let n1 = simulated.iter().filter(|&&b| b).count();
            let h_scores: Vec<f64> = r
                .iter()
                .zip(&simulated)
                .map(|(&ri, &sim)| if sim { SamplingModel::Power { gamma: gamma2 }.score(ri) } else { 0.0 })
                .collect();
            let h_total: f64 = h_scores.iter().sum();
            let h_scale = if h_total > 0.0 { n1 as f64 * sc.budget / h_total } else { 0.0 };

            let mut weights = Vec::new();
            let mut records = Vec::with_capacity(n1);
            for (i, cand) in population.iter().enumerate() {
                if !simulated[i] {
                    continue;
                }
                let h = (h_scale * h_scores[i]).min(1.0);
                let p = s_probs[i] * h;
                let reviewed = h > 0.0 && rng.random::<f64>() < h;
                if reviewed && cand.true_positive && p > 0.0 {
                    weights.push(1.0 / p);
                }
                records.push(SegmentRecord {
                    segment_id: i as u64,
                    s_prob: s_probs[i],
                    h_prob: Some(h),
                    p_prob: p,
                    simulated: true,
                    reviewed,
                    outcome: reviewed.then_some(cand.true_positive),
                });
            }
            Ok(SamplingOutcome { sample: validate_weights(&weights)?, records })
        }
    }
}

/// Aggregates for one (cell, method) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub cell: usize,
    pub budget: f64,
    /// Overall power-law index, when the sampling model is a power law.
    pub gamma: Option<f64>,
    pub model: String,
    pub method: SimMethod,
    pub replicates: u32,
    /// Fraction of replicates whose CI missed `theta`.
    pub coverage_error: f64,
    pub mean_width: f64,
    pub mean_point_estimate: f64,
    /// Replicates whose CI computation errored (recorded, not fatal).
    pub failures: u32,
}

/// Study output: one row per (cell, method).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoverageReport {
    pub rows: Vec<CoverageRow>,
}

fn model_label(m: &SamplingModel) -> String {
    match m {
        SamplingModel::Power { gamma } => format!("power({gamma})"),
        SamplingModel::SqrtTimesOneMinusR => "sqrt_times_one_minus_r".into(),
        SamplingModel::RTimesOnePlusR => "r_times_one_plus_r".into(),
    }
}

/// Compute one study method's CI for a realized sample.
fn method_ci(
    method: SimMethod,
    sample: &WeightSample,
    records: &[SegmentRecord],
    sc: &Scenario,
    rep_seed: u64,
) -> Result<CiResult> {
    let gamma_hat = sc.resolved_gamma_hat();
    let needs_w2 = !matches!(method, SimMethod::Pb);
    let w2 = if needs_w2 {
        Some(estimate_second_moment(records, gamma_hat)?.sqrt())
    } else {
        None
    };
    let base = CiConfig {
        alpha: sc.alpha,
        method: Method::Pb,
        backend: sc.eb_backend,
        bootstrap_draws: sc.bootstrap_draws,
        seed: seed::mix(&[rep_seed, method as u64]),
        next_weight_spec: NextWeightSpec::max_observed(),
    };
    match method {
        SimMethod::Pb => Ok(ci::pb_ci(sample, &base)),
        SimMethod::Eb2 | SimMethod::Eb2m => {
            let spec = if matches!(method, SimMethod::Eb2) {
                NextWeightSpec::w2(gamma_hat).with_w2_estimate(w2.unwrap())
            } else {
                NextWeightSpec::wm(gamma_hat).with_w2_estimate(w2.unwrap())
            };
            let cfg = CiConfig { method: Method::Eb, next_weight_spec: spec, ..base };
            ci::eb_ci(sample, &cfg)
        }
        SimMethod::Go2m => {
            let next = w2.unwrap().max(sample.max_weight());
            ci::go_ci(sample, next, sc.alpha)
        }
        SimMethod::Gp2m => {
            let next = w2.unwrap().max(sample.max_weight());
            ci::gp_ci(sample, next, sc.alpha)
        }
    }
}

struct ReplicateOutcome {
    point: f64,
    per_method: Vec<Result<(f64, f64)>>,
}

/// Run every cell of a study. Replicates execute in parallel; per-replicate
/// seeds derive from `(base_seed, cell, replicate)`, so the report is
/// identical regardless of thread count or scheduling.
pub fn run_study(cells: &[Scenario]) -> Result<CoverageReport> {
    for sc in cells {
        sc.validate()?;
    }
    let mut rows = Vec::new();
    for (cell_idx, sc) in cells.iter().enumerate() {
        let theta = sc.theta();
        let outcomes: Vec<ReplicateOutcome> = (0..sc.replicates)
            .into_par_iter()
            .map(|rep| {
                let pop_seed = seed::mix(&[sc.base_seed, cell_idx as u64, rep as u64, 0]);
                let samp_seed = seed::mix(&[sc.base_seed, cell_idx as u64, rep as u64, 1]);
                let rep_seed = seed::mix(&[sc.base_seed, cell_idx as u64, rep as u64, 2]);
                let population = generate_population(sc, pop_seed);
                let outcome = apply_sampling(&population, sc, samp_seed)
                    .expect("simulated weights are positive");
                let per_method = sc
                    .methods
                    .iter()
                    .map(|&m| {
                        method_ci(m, &outcome.sample, &outcome.records, sc, rep_seed)
                            .map(|r| (r.lower, r.upper))
                    })
                    .collect();
                ReplicateOutcome { point: outcome.sample.point_estimate(), per_method }
            })
            .collect();

        for (m_idx, &method) in sc.methods.iter().enumerate() {
            let mut misses = 0u32;
            let mut failures = 0u32;
            let mut width_sum = 0.0;
            let mut point_sum = 0.0;
            let mut ok = 0u32;
            for rep in &outcomes {
                point_sum += rep.point;
                match &rep.per_method[m_idx] {
                    Ok((lower, upper)) => {
                        ok += 1;
                        width_sum += upper - lower;
                        if !(theta >= *lower && theta <= *upper) {
                            misses += 1;
                        }
                    }
                    Err(_) => failures += 1,
                }
            }
            rows.push(CoverageRow {
                cell: cell_idx,
                budget: sc.budget,
                gamma: sc.overall_gamma(),
                model: model_label(&sc.sampling_model),
                method,
                replicates: sc.replicates,
                coverage_error: if ok > 0 { misses as f64 / ok as f64 } else { f64::NAN },
                mean_width: if ok > 0 { width_sum / ok as f64 } else { f64::NAN },
                mean_point_estimate: point_sum / sc.replicates as f64,
                failures,
            });
        }
    }
    Ok(CoverageReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_scenario() -> Scenario {
        Scenario {
            lambda: 2_000.0,
            pi: 1e-2,
            f1: (2.0, 2.0),
            f0: (-2.0, 2.0),
            sampling_model: SamplingModel::Power { gamma: 0.5 },
            budget: 0.05,
            stages: Stages::One,
            alpha: 0.1,
            methods: vec![SimMethod::Pb, SimMethod::Eb2m],
            gamma_hat: GammaHatPolicy::Fixed(0.5),
            replicates: 4,
            base_seed: 11,
            bootstrap_draws: 1_000,
            eb_backend: Backend::Saddlepoint,
        }
    }

    #[test]
    fn bayes_posterior_values() {
        let sc = Scenario { pi: 1e-3, ..base_scenario() };
        // densities are equal at the symmetry point
        assert!((true_positive_prob(&sc, 0.0) - 1e-3).abs() < 1e-15);
        // at v = 2 the ratio f1/f0 is e^2
        let expected = 1e-3 * (2.0f64).exp() / (1e-3 * (2.0f64).exp() + (1.0 - 1e-3));
        assert!((true_positive_prob(&sc, 2.0) - expected).abs() < 1e-12);
        assert!((true_positive_prob(&sc, 2.0) - 0.007_342).abs() < 1e-5);
        // degenerate mixture
        let sc1 = Scenario { pi: 1.0 - 1e-15, ..base_scenario() };
        assert!(true_positive_prob(&sc1, -3.0) > 0.999);
    }

    #[test]
    fn population_determinism_and_rate() {
        let sc = Scenario { lambda: 50_000.0, pi: 1e-3, ..base_scenario() };
        let a = generate_population(&sc, 99);
        let b = generate_population(&sc, 99);
        assert_eq!(a.len(), b.len());
        assert_eq!(a[0].feature, b[0].feature);
        let tp = a.iter().filter(|c| c.true_positive).count() as f64;
        // E = 50, loose 5-sigma band
        assert!(tp > 15.0 && tp < 95.0, "{tp}");

        let empty = Scenario { lambda: 0.0, ..base_scenario() };
        assert!(generate_population(&empty, 1).is_empty());
    }

    #[test]
    fn zero_budget_samples_nothing() {
        let sc = Scenario { budget: 0.0, ..base_scenario() };
        let pop = generate_population(&sc, 5);
        let out = apply_sampling(&pop, &sc, 6).unwrap();
        assert!(out.sample.is_empty());
    }

    #[test]
    fn uniform_sampling_gives_equal_weights() {
        let sc = Scenario {
            sampling_model: SamplingModel::Power { gamma: 0.0 },
            budget: 0.02,
            lambda: 20_000.0,
            pi: 5e-2,
            ..base_scenario()
        };
        let pop = generate_population(&sc, 17);
        let out = apply_sampling(&pop, &sc, 18).unwrap();
        assert!(!out.sample.is_empty());
        let w0 = out.sample.weights()[0];
        for &w in out.sample.weights() {
            assert!((w - w0).abs() < 1e-9 * w0);
        }
    }

    #[test]
    fn weights_are_inverse_probabilities() {
        let sc = base_scenario();
        let pop = generate_population(&sc, 23);
        let out = apply_sampling(&pop, &sc, 24).unwrap();
        // every weight must equal 1/p of a reviewed true positive record
        for &w in out.sample.weights() {
            let p = 1.0 / w;
            let matched = out.records.iter().any(|rec| {
                rec.reviewed
                    && rec.outcome == Some(true)
                    && (rec.p_prob - p).abs() <= 1e-12 * p
            });
            assert!(matched, "no record with p = {p}");
        }
        for rec in &out.records {
            assert!(rec.p_prob > 0.0 && rec.p_prob <= 1.0);
            rec.validate().unwrap();
        }
    }

    #[test]
    fn misspecified_model_depresses_high_r() {
        // p-bar ∝ sqrt(r)(1 - r) must rank a candidate with r near 1 below
        // one with moderate r
        let m = SamplingModel::SqrtTimesOneMinusR;
        assert!(m.score(0.99) < m.score(0.5));
        assert!(m.score(0.25) > m.score(0.99));
        let g = SamplingModel::RTimesOnePlusR;
        assert!(g.score(0.9) > g.score(0.3));
    }

    #[test]
    fn horvitz_thompson_unbiased() {
        // mean of theta-hat within 3 standard errors of theta
        let sc = Scenario {
            lambda: 10_000.0,
            pi: 1e-2,
            budget: 0.05,
            replicates: 2_000,
            methods: vec![],
            ..base_scenario()
        };
        let pops: Vec<f64> = (0..sc.replicates)
            .map(|rep| {
                let pop = generate_population(&sc, seed::mix(&[3, rep as u64, 0]));
                let out = apply_sampling(&pop, &sc, seed::mix(&[3, rep as u64, 1])).unwrap();
                out.sample.point_estimate()
            })
            .collect();
        let n = pops.len() as f64;
        let mean = pops.iter().sum::<f64>() / n;
        let var = pops.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let theta = sc.theta();
        assert!(
            (mean - theta).abs() <= 3.0 * se,
            "mean {mean} vs theta {theta} (se {se})"
        );
    }

    #[test]
    fn study_deterministic() {
        let sc = base_scenario();
        let a = run_study(std::slice::from_ref(&sc)).unwrap();
        let b = run_study(std::slice::from_ref(&sc)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn misspecified_models_run_with_fixed_gamma_hat() {
        let sc = Scenario {
            lambda: 5_000.0,
            pi: 1e-2,
            sampling_model: SamplingModel::SqrtTimesOneMinusR,
            gamma_hat: GammaHatPolicy::Fixed(0.5),
            replicates: 5,
            methods: vec![SimMethod::Pb, SimMethod::Eb2m, SimMethod::Go2m],
            ..base_scenario()
        };
        let report = run_study(std::slice::from_ref(&sc)).unwrap();
        assert_eq!(report.rows.len(), 3);
        for row in &report.rows {
            assert_eq!(row.gamma, None);
            assert_eq!(row.model, "sqrt_times_one_minus_r");
            assert!(row.coverage_error.is_finite());
            assert_eq!(row.failures, 0);
        }
    }

    #[test]
    fn method_errors_are_recorded_not_fatal() {
        // a near-empty population leaves no records to estimate ||w||_2 from,
        // so EB2m errors on those replicates; the study must still complete
        let sc = Scenario {
            lambda: 0.7,
            pi: 0.5,
            replicates: 60,
            methods: vec![SimMethod::Pb, SimMethod::Eb2m],
            ..base_scenario()
        };
        let report = run_study(&[sc]).unwrap();
        let eb_row = report.rows.iter().find(|r| r.method == SimMethod::Eb2m).unwrap();
        assert!(eb_row.failures > 0, "no failures recorded");
        let pb_row = report.rows.iter().find(|r| r.method == SimMethod::Pb).unwrap();
        assert_eq!(pb_row.failures, 0);
        assert!(pb_row.coverage_error.is_finite());
    }

    #[test]
    fn single_replicate_coverage_is_binary() {
        let sc = Scenario { replicates: 1, ..base_scenario() };
        let report = run_study(&[sc]).unwrap();
        for row in &report.rows {
            assert!(row.coverage_error == 0.0 || row.coverage_error == 1.0);
        }
    }

    #[test]
    fn two_stage_matches_one_stage_in_distribution() {
        // same overall index and budget product, with budgets low enough
        // that no stage probability clips at 1: the observed weight
        // distributions must agree (two-sample KS at 1%)
        let shared = Scenario {
            lambda: 40_000.0,
            pi: 5e-3,
            methods: vec![],
            ..base_scenario()
        };
        let one = Scenario {
            sampling_model: SamplingModel::Power { gamma: 0.5 },
            budget: 0.1 * 0.2,
            stages: Stages::One,
            ..shared.clone()
        };
        let two = Scenario {
            sampling_model: SamplingModel::Power { gamma: 0.5 },
            budget: 0.2,
            stages: Stages::Two { b1: 0.1, gamma1: 0.25, gamma2: 0.25 },
            ..shared
        };
        let collect = |sc: &Scenario, salt: u64| -> Vec<f64> {
            let mut ws = Vec::new();
            let mut rep = 0u64;
            while ws.len() < 500 {
                let pop = generate_population(sc, seed::mix(&[salt, rep, 0]));
                let out = apply_sampling(&pop, sc, seed::mix(&[salt, rep, 1])).unwrap();
                ws.extend_from_slice(out.sample.weights());
                rep += 1;
                assert!(rep < 200, "not enough events generated");
            }
            ws.truncate(500);
            ws.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ws
        };
        let a = collect(&one, 100);
        let b = collect(&two, 200);
        // two-sample KS statistic
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        // critical value at level 0.01 for n = m = 500
        let crit = 1.628 * (2.0 / 500.0f64).sqrt();
        assert!(d < crit, "KS statistic {d} exceeds {crit}");
    }

    #[test]
    fn validation_rejects_bad_scenarios() {
        let mut sc = base_scenario();
        sc.pi = 0.0;
        assert!(sc.validate().is_err());

        let mut sc = base_scenario();
        sc.budget = 1.5;
        assert!(sc.validate().is_err());

        let mut sc = base_scenario();
        sc.sampling_model = SamplingModel::SqrtTimesOneMinusR;
        sc.gamma_hat = GammaHatPolicy::Oracle;
        assert!(sc.validate().is_err());

        let mut sc = base_scenario();
        sc.stages = Stages::Two { b1: 0.1, gamma1: 0.25, gamma2: 0.25 };
        sc.sampling_model = SamplingModel::RTimesOnePlusR;
        assert!(sc.validate().is_err());
    }
}
