//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Golden values are frozen reference numbers; statistical thresholds are
//! asserted at the stated tolerances with fixed seeds. Where a frozen
//! reference number turned out to be irreproducible from exact computation,
//! the test still asserts it and fails, reporting the independently
//! computed value in the failure message.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use rateci_core::{
    cgf, cgf_derivatives, check_monotonicity, eb_ci, estimate_second_moment, gm_ci, go_ci, gp_ci,
    group_weights, pb_ci, run_study, saddlepoint_tail, single_gamma_quantile, special,
    validate_weights, weighted_gamma_ci, Backend, CiConfig, GammaHatPolicy, GammaSumSpec, Method,
    NextWeightSpec, SamplingModel, Scenario, SegmentRecord, SimMethod, Stages, WeightSample,
};

const GROUP_TOL: f64 = 1e-12;

fn finish(criterion: &str, failures: Vec<String>, detail: String) {
    if failures.is_empty() {
        println!("{criterion}: PASS ({detail})");
    } else {
        println!("{criterion}: FAIL ({detail})");
        panic!("{criterion} failed:\n  {}", failures.join("\n  "));
    }
}

fn hundred_unit_weights() -> WeightSample {
    validate_weights(&[1.0; 100]).unwrap()
}

fn with_heavy_event() -> WeightSample {
    let mut w = vec![1.0; 100];
    w.push(100.0);
    validate_weights(&w).unwrap()
}

fn case_study_category_a() -> Vec<f64> {
    let mut w = vec![1.0; 12];
    w.extend_from_slice(&[
        1.03, 1.18, 1.18, 1.18, 1.35, 1.38, 1.43, 1.59, 1.72, 1.85, 1.88, 2.09, 11.24, 11.24,
        11.24, 11.24, 11.25, 11.58, 12.11, 14.39, 14.94, 15.71, 16.1, 19.79, 20.0, 20.0,
    ]);
    assert_eq!(w.len(), 38);
    w
}

const CASE_STUDY_B_WEIGHT: f64 = 384.69;
const CASE_STUDY_W2: f64 = 72.75;

fn check_cell(
    failures: &mut Vec<String>,
    label: &str,
    got: (f64, f64),
    want: (f64, f64),
    rel_tol: f64,
) {
    let (gl, gu) = got;
    let (wl, wu) = want;
    if (gl - wl).abs() > rel_tol * wl {
        failures.push(format!("{label} lower: computed {gl:.4}, reference {wl}"));
    }
    if (gu - wu).abs() > rel_tol * wu {
        failures.push(format!("{label} upper: computed {gu:.4}, reference {wu}"));
    }
}

/// Criterion 1: two-category golden intervals, exact after integer rounding.
#[test]
fn criterion_1_two_category_golden() {
    let start = std::time::Instant::now();
    let a = hundred_unit_weights();
    let ab = with_heavy_event();
    let strata_a = group_weights(&a, GROUP_TOL);
    let strata_ab = group_weights(&ab, GROUP_TOL);
    let cfg = CiConfig::new(Method::Wg, 0.1).unwrap().with_backend(Backend::Saddlepoint);

    let mut failures = Vec::new();
    let mut check = |label: &str, got: (f64, f64), want: (i64, i64)| {
        let rounded = (got.0.round() as i64, got.1.round() as i64);
        if rounded != want {
            failures.push(format!(
                "{label}: computed [{:.3}, {:.3}] rounds to [{}, {}], reference [{}, {}]",
                got.0, got.1, rounded.0, rounded.1, want.0, want.1
            ));
        }
    };

    let go_a = go_ci(&a, 1.0, 0.1).unwrap();
    check("GO A", (go_a.lower, go_a.upper), (84, 118));
    let go_ab = go_ci(&ab, 100.0, 0.1).unwrap();
    check("GO A|B", (go_ab.lower, go_ab.upper), (68, 565));

    let gm_a = gm_ci(&strata_a, 0.1).unwrap();
    check("GM A", (gm_a.lower, gm_a.upper), (84, 118));
    let gm_ab = gm_ci(&strata_ab, 0.1).unwrap();
    check("GM A|B", (gm_ab.lower, gm_ab.upper), (68, 480));

    let gp_a = gp_ci(&a, 1.0, 0.1).unwrap();
    check("GP A", (gp_a.lower, gp_a.upper), (84, 118));
    let gp_ab = gp_ci(&ab, 100.0, 0.1).unwrap();
    check("GP A|B", (gp_ab.lower, gp_ab.upper), (81, 502));

    let wg_a = weighted_gamma_ci(&strata_a, 1.0, &cfg).unwrap();
    check("WG A", (wg_a.lower, wg_a.upper), (84, 118));
    let wg_ab = weighted_gamma_ci(&strata_ab, 100.0, &cfg).unwrap();
    check("WG A|B", (wg_ab.lower, wg_ab.upper), (103, 576));

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "criterion 1 took {elapsed:?}, budget 1 s");
    finish("criterion 1 (two-category golden intervals)", failures, format!("{elapsed:?}"));
}

/// Criterion 2: case-study golden intervals; deterministic backends within 1%,
/// Monte Carlo methods within 2% at 1e5 draws.
#[test]
fn criterion_2_case_study_golden() {
    let start = std::time::Instant::now();
    let a = validate_weights(&case_study_category_a()).unwrap();
    let mut ab_w = case_study_category_a();
    ab_w.push(CASE_STUDY_B_WEIGHT);
    let ab = validate_weights(&ab_w).unwrap();

    // reference table: (method, alpha, dataset) -> (lower, upper)
    let reference: &[(&str, f64, &str, f64, f64)] = &[
        ("go", 0.10, "A", 148.0, 468.0),
        ("gp", 0.10, "A", 155.0, 426.0),
        ("eb", 0.10, "A", 149.0, 472.0),
        ("pb", 0.10, "A", 149.0, 323.0),
        ("go", 0.10, "AB", 141.0, 2035.0),
        ("gp", 0.10, "AB", 185.0, 1792.0),
        ("eb", 0.10, "AB", 226.0, 2060.0),
        ("pb", 0.10, "AB", 171.0, 1372.0),
        ("go", 0.05, "A", 135.0, 507.0),
        ("gp", 0.05, "A", 141.0, 468.0),
        ("eb", 0.05, "A", 137.0, 524.0),
        ("pb", 0.05, "A", 134.0, 344.0),
        ("go", 0.05, "AB", 103.0, 2322.0),
        ("gp", 0.05, "AB", 134.0, 2077.0),
        ("eb", 0.05, "AB", 202.0, 2379.0),
        ("pb", 0.05, "AB", 157.0, 1445.0),
        ("go", 0.01, "A", 113.0, 590.0),
        ("gp", 0.01, "A", 115.0, 556.0),
        ("eb", 0.01, "A", 116.0, 642.0),
        ("pb", 0.01, "A", 109.0, 383.0),
        ("go", 0.01, "AB", 51.0, 2952.0),
        ("gp", 0.01, "AB", 67.0, 2706.0),
        ("eb", 0.01, "AB", 165.0, 3094.0),
        ("pb", 0.01, "AB", 137.0, 1814.0),
    ];

    let mut failures = Vec::new();
    let mut cells = 0;
    for &(method, alpha, dataset, lo, up) in reference {
        let sample = if dataset == "A" { &a } else { &ab };
        let next = CASE_STUDY_W2.max(sample.max_weight());
        let label = format!("{method} {}% {dataset}", (1.0 - alpha) * 100.0);
        match method {
            "go" => {
                let r = go_ci(sample, next, alpha).unwrap();
                check_cell(&mut failures, &label, (r.lower, r.upper), (lo, up), 0.01);
            }
            "gp" => {
                let r = gp_ci(sample, next, alpha).unwrap();
                check_cell(&mut failures, &label, (r.lower, r.upper), (lo, up), 0.01);
            }
            "eb" => {
                // deterministic saddlepoint within 1%
                let cfg = CiConfig::new(Method::Eb, alpha)
                    .unwrap()
                    .with_backend(Backend::Saddlepoint)
                    .with_next_weight(NextWeightSpec::fixed(next).unwrap());
                let r = eb_ci(sample, &cfg).unwrap();
                check_cell(&mut failures, &format!("{label} (saddlepoint)"), (r.lower, r.upper), (lo, up), 0.01);
                // Monte Carlo backend within 2% at 1e5 draws
                let cfg = CiConfig::new(Method::Eb, alpha)
                    .unwrap()
                    .with_draws(100_000)
                    .unwrap()
                    .with_seed(811_001)
                    .with_next_weight(NextWeightSpec::fixed(next).unwrap());
                let r = eb_ci(sample, &cfg).unwrap();
                check_cell(&mut failures, &format!("{label} (mc)"), (r.lower, r.upper), (lo, up), 0.02);
            }
            "pb" => {
                let cfg = CiConfig::new(Method::Pb, alpha)
                    .unwrap()
                    .with_draws(100_000)
                    .unwrap()
                    .with_seed(811_002);
                let r = pb_ci(sample, &cfg);
                check_cell(&mut failures, &label, (r.lower, r.upper), (lo, up), 0.02);
            }
            _ => unreachable!(),
        }
        cells += 1;
    }
    assert_eq!(cells, 24);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "criterion 2 took {elapsed:?}, budget 30 s");
    finish("criterion 2 (case-study golden intervals)", failures, format!("24 cells, {elapsed:?}"));
}

/// Supporting check for criterion 2's bootstrap cells: the implemented
/// Poisson bootstrap converges to the quantiles of `sum w_i Poisson(1)`.
/// Oracle values frozen from an independent 1e7-draw computation.
#[test]
fn supporting_pb_converges_to_exact_bootstrap_quantiles() {
    let a = validate_weights(&case_study_category_a()).unwrap();
    let mut ab_w = case_study_category_a();
    ab_w.push(CASE_STUDY_B_WEIGHT);
    let ab = validate_weights(&ab_w).unwrap();
    let mut failures = Vec::new();
    for (sample, name, lo, up) in
        [(&a, "A", 144.07, 326.30), (&ab, "A|B", 170.23, 1381.46)]
    {
        let cfg = CiConfig::new(Method::Pb, 0.1)
            .unwrap()
            .with_draws(300_000)
            .unwrap()
            .with_seed(20_020);
        let r = pb_ci(sample, &cfg);
        if (r.lower - lo).abs() > 0.015 * lo {
            failures.push(format!("{name} lower {} vs converged {lo}", r.lower));
        }
        if (r.upper - up).abs() > 0.015 * up {
            failures.push(format!("{name} upper {} vs converged {up}", r.upper));
        }
    }
    finish("supporting check (PB convergence)", failures, "2 samples at 3e5 draws".into());
}

/// Criterion 3: saddlepoint tail vs a 1e6-draw empirical CDF for
/// G_100 + 10 G_10 + 100 G_1, max gap over 50 grid points <= 0.005.
#[test]
fn criterion_3_saddlepoint_accuracy() {
    let start = std::time::Instant::now();
    let spec = GammaSumSpec::new(&[(1.0, 100.0), (10.0, 10.0), (100.0, 1.0)], 0.0).unwrap();

    // independent Monte Carlo oracle, drawn in test code
    let mut rng = ChaCha8Rng::seed_from_u64(30_003);
    let g100 = Gamma::new(100.0, 1.0).unwrap();
    let g10 = Gamma::new(10.0, 1.0).unwrap();
    let g1 = Gamma::new(1.0, 1.0).unwrap();
    let n = 1_000_000usize;
    let mut draws: Vec<f64> = (0..n)
        .map(|_| g100.sample(&mut rng) + 10.0 * g10.sample(&mut rng) + 100.0 * g1.sample(&mut rng))
        .collect();
    draws.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let q01 = draws[(0.01 * n as f64) as usize];
    let q99 = draws[(0.99 * n as f64) as usize];

    let mut max_gap: f64 = 0.0;
    let mut worst_z = 0.0;
    for i in 0..50 {
        let z = q01 + (q99 - q01) * i as f64 / 49.0;
        let ecdf = draws.partition_point(|&d| d <= z) as f64 / n as f64;
        let sp_cdf = 1.0 - saddlepoint_tail(&spec, z).unwrap();
        let gap = (sp_cdf - ecdf).abs();
        if gap > max_gap {
            max_gap = gap;
            worst_z = z;
        }
    }
    let mut failures = Vec::new();
    if max_gap > 0.005 {
        failures.push(format!(
            "max |saddlepoint CDF - empirical CDF| = {max_gap:.5} at z = {worst_z:.1}, required <= 0.005"
        ));
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "criterion 3 took {elapsed:?}, budget 60 s");
    finish("criterion 3 (saddlepoint accuracy)", failures, format!("max gap {max_gap:.5}, {elapsed:?}"));
}

/// Criterion 4: EB with uniform unit weights and unit next weight matches
/// the exact Poisson (Garwood) interval within 0.5% relative.
#[test]
fn criterion_4_garwood_equivalence() {
    // reference quantiles of Gamma(n) and Gamma(n+1), computed independently
    let reference: &[(usize, f64, f64, f64)] = &[
        (1, 0.1, 0.051293294, 4.743864518),
        (1, 0.05, 0.025317808, 5.571643391),
        (5, 0.1, 1.970149568, 10.513034909),
        (5, 0.05, 1.623486390, 11.668332079),
        (20, 0.1, 13.254651598, 29.062018840),
        (20, 0.05, 12.216519585, 30.888377903),
        (100, 0.1, 84.139277218, 118.079272782),
        (100, 0.05, 81.363991251, 121.626793792),
    ];
    let mut failures = Vec::new();
    for &(n, alpha, ref_lower, ref_upper) in reference {
        let sample = validate_weights(&vec![1.0; n]).unwrap();
        let cfg = CiConfig::new(Method::Eb, alpha)
            .unwrap()
            .with_backend(Backend::Saddlepoint)
            .with_next_weight(NextWeightSpec::fixed(1.0).unwrap());
        let r = eb_ci(&sample, &cfg).unwrap();
        if (r.lower - ref_lower).abs() > 0.005 * ref_lower {
            failures.push(format!("n={n} alpha={alpha} lower {} vs {ref_lower}", r.lower));
        }
        if (r.upper - ref_upper).abs() > 0.005 * ref_upper {
            failures.push(format!("n={n} alpha={alpha} upper {} vs {ref_upper}", r.upper));
        }
    }
    finish("criterion 4 (Garwood equivalence)", failures, "8 cases".into());
}

/// Criterion 5: scaled-down one-stage coverage study.
#[test]
fn criterion_5_coverage_study() {
    let start = std::time::Instant::now();
    let budgets = [0.005, 0.01, 0.03, 0.05];
    let cells: Vec<Scenario> = budgets
        .iter()
        .map(|&budget| Scenario {
            lambda: 1e5,
            pi: 1e-3,
            f1: (2.0, 2.0),
            f0: (-2.0, 2.0),
            sampling_model: SamplingModel::Power { gamma: 0.5 },
            budget,
            stages: Stages::One,
            alpha: 0.1,
            methods: vec![SimMethod::Pb, SimMethod::Eb2m],
            gamma_hat: GammaHatPolicy::Fixed(0.5),
            replicates: 2000,
            base_seed: 52_020,
            bootstrap_draws: 10_000,
            eb_backend: Backend::Saddlepoint,
        })
        .collect();
    let report = run_study(&cells).unwrap();

    let err_of = |method: SimMethod, budget: f64| -> f64 {
        report
            .rows
            .iter()
            .find(|r| r.method == method && r.budget == budget)
            .map(|r| r.coverage_error)
            .unwrap()
    };

    let mut failures = Vec::new();
    let mut detail = Vec::new();
    for &b in &budgets {
        let eb = err_of(SimMethod::Eb2m, b);
        detail.push(format!("eb2m@{b}={eb:.3}"));
        if !(0.05..=0.16).contains(&eb) {
            failures.push(format!(
                "EB2m coverage error {eb:.4} at budget {b} outside [0.05, 0.16]"
            ));
        }
    }
    let pb_smallest = err_of(SimMethod::Pb, 0.005);
    detail.push(format!("pb@0.005={pb_smallest:.3}"));
    if pb_smallest <= 0.30 {
        failures.push(format!(
            "PB coverage error {pb_smallest:.4} at budget 0.005 not above 0.30"
        ));
    }
    let pb_errors: Vec<f64> = budgets.iter().map(|&b| err_of(SimMethod::Pb, b)).collect();
    for pair in pb_errors.windows(2) {
        if pair[1] > pair[0] {
            failures.push(format!("PB coverage error not decreasing in budget: {pb_errors:?}"));
            break;
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1200.0, "criterion 5 took {elapsed:?}, budget 20 min");
    finish("criterion 5 (coverage study)", failures, format!("{} | {elapsed:?}", detail.join(" ")));
}

/// Criterion 6: randomized subset/superset monotonicity suite.
#[test]
fn criterion_6_monotonicity_suite() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(66_006);
    let mut failures = Vec::new();
    let mut go_violations = 0usize;

    for case in 0..200 {
        let n = rng.random_range(0..=50usize);
        let weights: Vec<f64> =
            (0..n).map(|_| 10f64.powf(rng.random_range(0.5f64.log10()..500f64.log10()))).collect();
        let subset_size = if n == 0 { 0 } else { rng.random_range(0..=n) };
        let mut in_subset = vec![false; n];
        for flag in in_subset.iter_mut().take(subset_size) {
            *flag = true;
        }
        // random positions for the subset
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            in_subset.swap(i, j);
        }
        let categories: Vec<Option<String>> = in_subset
            .iter()
            .map(|&s| Some(if s { "S".to_string() } else { "T".to_string() }))
            .collect();
        let sample = validate_weights(&weights).unwrap().with_categories(categories).unwrap();
        let cfg = CiConfig::new(Method::Eb, 0.1)
            .unwrap()
            .with_seed(9_000 + case as u64)
            .with_next_weight(NextWeightSpec::max_observed());

        if subset_size == 0 || subset_size == n {
            // degenerate subsets: bounds must trivially not exceed the union's
            if n > 0 {
                let union = eb_ci(&sample, &cfg).unwrap();
                let sub = eb_ci(&validate_weights(&[]).unwrap(), &cfg).unwrap();
                if sub.lower > union.lower || sub.upper > union.upper {
                    failures.push(format!("case {case}: empty subset exceeded union"));
                }
            }
            continue;
        }

        // coupled Monte Carlo EB and PB
        let report = check_monotonicity(&sample, "S", &cfg, &[Method::Eb, Method::Pb]).unwrap();
        for cmp in &report.comparisons {
            if cmp.lower_violated || cmp.upper_violated {
                failures.push(format!(
                    "case {case}: coupled {:?} violated (subset [{:.4},{:.4}] union [{:.4},{:.4}])",
                    cmp.method, cmp.subset.lower, cmp.subset.upper, cmp.union.lower, cmp.union.upper
                ));
            }
        }
        // deterministic saddlepoint EB
        let cfg_sp = cfg.clone().with_backend(Backend::Saddlepoint);
        let report = check_monotonicity(&sample, "S", &cfg_sp, &[Method::Eb]).unwrap();
        for cmp in &report.comparisons {
            if cmp.lower_violated || cmp.upper_violated {
                failures.push(format!("case {case}: saddlepoint EB violated"));
            }
        }
        // GO bookkeeping: it is allowed to violate, and must at least once
        let report = check_monotonicity(&sample, "S", &cfg_sp, &[Method::Go]).unwrap();
        if report.any_violation() {
            go_violations += 1;
        }
    }

    // the two-category counterexample fixture guarantees a GO violation
    let mut w = vec![1.0; 100];
    w.push(100.0);
    let mut cats: Vec<Option<String>> = vec![Some("S".into()); 100];
    cats.push(Some("T".into()));
    let fixture = validate_weights(&w).unwrap().with_categories(cats).unwrap();
    let cfg = CiConfig::new(Method::Go, 0.1)
        .unwrap()
        .with_backend(Backend::Saddlepoint)
        .with_next_weight(NextWeightSpec::max_observed());
    let report = check_monotonicity(&fixture, "S", &cfg, &[Method::Go, Method::Eb, Method::Pb]).unwrap();
    for cmp in &report.comparisons {
        match cmp.method {
            Method::Go => {
                if cmp.lower_violated {
                    go_violations += 1;
                }
            }
            _ => {
                if cmp.lower_violated || cmp.upper_violated {
                    failures.push(format!("counterexample fixture: {:?} violated", cmp.method));
                }
            }
        }
    }
    if go_violations == 0 {
        failures.push("GO never violated monotonicity on the suite".into());
    }
    let elapsed = start.elapsed();
    finish(
        "criterion 6 (monotonicity suite)",
        failures,
        format!("200 random cases + fixture, {go_violations} GO violations, {elapsed:?}"),
    );
}

/// Criterion 7: numerical kernel checks.
#[test]
fn criterion_7_numerical_kernels() {
    let mut rng = ChaCha8Rng::seed_from_u64(77_007);
    let mut failures = Vec::new();

    // cgf derivative chain vs central differences on 100 random (spec, t)
    for case in 0..100 {
        let k = rng.random_range(1..=10usize);
        let strata: Vec<(f64, f64)> = (0..k)
            .map(|_| {
                (10f64.powf(rng.random_range(-1.0..2.0f64)), rng.random_range(1.0..100.0f64))
            })
            .collect();
        let spec = GammaSumSpec::new(&strata, 0.0).unwrap();
        let pole = 1.0 / spec.max_weight();
        let t = rng.random_range(-3.0..0.85f64) * pole;
        let h = 1e-6 * (1.0 + t.abs());
        if t + h >= 0.95 * pole {
            continue;
        }
        let (k1, k2, k3) = cgf_derivatives(&spec, t).unwrap();
        let d1 = (cgf(&spec, t + h).unwrap() - cgf(&spec, t - h).unwrap()) / (2.0 * h);
        if (d1 - k1).abs() > 1e-6 * k1.abs() {
            failures.push(format!("case {case}: kappa' {k1} vs central diff {d1}"));
        }
        let k1p = cgf_derivatives(&spec, t + h).unwrap().0;
        let k1m = cgf_derivatives(&spec, t - h).unwrap().0;
        let d2 = (k1p - k1m) / (2.0 * h);
        if (d2 - k2).abs() > 1e-6 * k2.abs() {
            failures.push(format!("case {case}: kappa'' {k2} vs central diff {d2}"));
        }
        let k2p = cgf_derivatives(&spec, t + h).unwrap().1;
        let k2m = cgf_derivatives(&spec, t - h).unwrap().1;
        let d3 = (k2p - k2m) / (2.0 * h);
        if (d3 - k3).abs() > 1e-6 * k3.abs() {
            failures.push(format!("case {case}: kappa''' {k3} vs central diff {d3}"));
        }
    }

    // quantile inverts the CDF to 1e-8 relative on 100 random triples
    for case in 0..100 {
        let shape = 10f64.powf(rng.random_range(-0.3..2.301f64));
        let rate = 10f64.powf(rng.random_range(-3.0..1.0f64));
        let p = rng.random_range(0.005..0.995f64);
        let q = single_gamma_quantile(shape, rate, p).unwrap();
        let cdf = special::gamma_cdf(q, shape, rate).unwrap();
        if (cdf - p).abs() > 1e-8 * p {
            failures.push(format!(
                "case {case}: F(q(p)) = {cdf} vs p = {p} (shape {shape}, rate {rate})"
            ));
        }
    }
    finish("criterion 7 (numerical kernels)", failures, "100 + 100 cases".into());
}

/// Criterion 8: Hajek second-moment estimator.
#[test]
fn criterion_8_hajek_estimator() {
    let rec = |p: f64| SegmentRecord {
        segment_id: 0,
        s_prob: 1.0,
        h_prob: Some(p),
        p_prob: p,
        simulated: true,
        reviewed: false,
        outcome: None,
    };
    let mut failures = Vec::new();
    // hand-computed: r-hat = p^2, numerator 0.5 + 0.1, denominator 0.125 + 0.001
    let e2 = estimate_second_moment(&[rec(0.5), rec(0.1)], 0.5).unwrap();
    let expected = 0.6 / 0.126;
    if (e2 - expected).abs() > 1e-9 {
        failures.push(format!("hand example: {e2} vs {expected}"));
    }
    // constant p returns exactly 1/p^2
    for p0 in [0.5, 0.2, 0.03] {
        let recs = vec![rec(p0); 9];
        let e2 = estimate_second_moment(&recs, 0.7).unwrap();
        let exact = 1.0 / (p0 * p0);
        if (e2 - exact).abs() > 1e-12 * exact {
            failures.push(format!("constant p = {p0}: {e2} vs {exact}"));
        }
    }
    finish("criterion 8 (Hajek estimator)", failures, "hand example + constant-p".into());
}

/// Criterion 9: two-stage sanity at desk scale.
#[test]
fn criterion_9_two_stage() {
    let start = std::time::Instant::now();
    let b2_grid = [0.02, 0.1, 0.25, 0.5];
    let cells: Vec<Scenario> = b2_grid
        .iter()
        .map(|&b2| Scenario {
            lambda: 1e5,
            pi: 1e-3,
            f1: (2.0, 2.0),
            f0: (-2.0, 2.0),
            sampling_model: SamplingModel::Power { gamma: 0.5 },
            budget: b2,
            stages: Stages::Two { b1: 0.1, gamma1: 0.25, gamma2: 0.25 },
            alpha: 0.1,
            methods: vec![SimMethod::Pb, SimMethod::Eb2m],
            gamma_hat: GammaHatPolicy::Fixed(0.5),
            replicates: 1000,
            base_seed: 92_021,
            bootstrap_draws: 10_000,
            eb_backend: Backend::Saddlepoint,
        })
        .collect();
    let report = run_study(&cells).unwrap();
    let err_of = |method: SimMethod, b2: f64| -> f64 {
        report
            .rows
            .iter()
            .find(|r| r.method == method && r.budget == b2)
            .map(|r| r.coverage_error)
            .unwrap()
    };
    let mut failures = Vec::new();
    let mut detail = Vec::new();
    for &b2 in &b2_grid {
        let eb = err_of(SimMethod::Eb2m, b2);
        detail.push(format!("eb2m@{b2}={eb:.3}"));
        if b2 >= 0.1 && eb > 0.16 {
            failures.push(format!("EB2m coverage error {eb:.4} at b2 = {b2} exceeds 0.16"));
        }
    }
    let pb = err_of(SimMethod::Pb, b2_grid[0]);
    detail.push(format!("pb@{}={pb:.3}", b2_grid[0]));
    if pb <= 0.3 {
        failures.push(format!("PB coverage error {pb:.4} at b2 = {} not above 0.3", b2_grid[0]));
    }
    let elapsed = start.elapsed();
    finish("criterion 9 (two-stage)", failures, format!("{} | {elapsed:?}", detail.join(" ")));
}
