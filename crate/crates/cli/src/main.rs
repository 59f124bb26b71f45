//! `rateci`: rate estimation and confidence intervals for rare events
//! under importance sampling, plus the coverage-study harness.

mod formats;
mod svg;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use rateci_core::{
    check_monotonicity, estimate_second_moment, run_study, Backend, CiConfig, CiResult, Error,
    Method, NextWeightSpec, WeightSample,
};

#[derive(Parser)]
#[command(name = "rateci", version, about = "Rare-event rate estimation with confidence intervals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute point estimate and confidence intervals from a weights file.
    Estimate(EstimateArgs),
    /// Run a coverage study from a scenario config.
    Simulate(SimulateArgs),
    /// Render pivot tables and SVG charts from simulate output.
    Report(ReportArgs),
    /// Compare subset and pooled intervals method by method.
    CheckMonotonicity(CheckArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// CSV file with header weight,category
    #[arg(long)]
    weights: PathBuf,
    /// Two-sided miscoverage level
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Comma-separated list from pb,eb,wg,go,gp,gm
    #[arg(long, default_value = "eb")]
    method: String,
    /// mc or saddlepoint
    #[arg(long, default_value = "mc")]
    backend: String,
    /// auto, max-observed, or a fixed number
    #[arg(long, default_value = "auto")]
    next_weight: String,
    /// Power-law index for ||w||_2 estimation from --segments
    #[arg(long, default_value_t = 0.5)]
    gamma_hat: f64,
    /// Segments CSV for next-weight estimation
    #[arg(long)]
    segments: Option<PathBuf>,
    /// Bootstrap replicates for the Monte Carlo backend
    #[arg(long, default_value_t = 10_000)]
    bootstrap: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restrict to one event category
    #[arg(long)]
    category: Option<String>,
    /// Round bounds to the nearest integer for table comparison
    #[arg(long)]
    round: bool,
    /// Also write full-precision results to this CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output CSV
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Results CSV produced by simulate
    #[arg(long = "in")]
    input: PathBuf,
    /// Prefix for the emitted CSV/SVG files
    #[arg(long)]
    out_prefix: String,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    subset_category: String,
    /// Comma-separated list from pb,eb,wg,go,gp,gm
    #[arg(long, default_value = "go,gp,gm,wg,eb,pb")]
    methods: String,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// mc or saddlepoint
    #[arg(long, default_value = "mc")]
    backend: String,
    /// Supplied ||w||_2 estimate; enables the wm next-weight rule
    #[arg(long)]
    w2: Option<f64>,
    /// Segments CSV for ||w||_2 estimation
    #[arg(long)]
    segments: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    gamma_hat: f64,
    #[arg(long, default_value_t = 10_000)]
    bootstrap: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Exit codes: 2 for malformed input, 3 for numerical failures.
fn classify(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::Domain(_)
            | Error::Convergence(_)
            | Error::ZeroDenominator
            | Error::GreedySamplingVariance { .. }
            | Error::GammaIndexAtBound { .. },
        ) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Report(args) => cmd_report(args),
        Command::CheckMonotonicity(args) => cmd_check_monotonicity(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = classify(&err);
            let kind = if code == 3 { "numerical" } else { "input" };
            let payload = serde_json::json!({ "error": format!("{err:#}"), "kind": kind });
            let _ = writeln!(std::io::stderr(), "{payload}");
            ExitCode::from(code)
        }
    }
}

fn parse_methods(list: &str) -> Result<Vec<Method>> {
    list.split(',')
        .map(|m| Method::parse(m.trim()).map_err(anyhow::Error::from))
        .collect()
}

fn estimated_w2(segments: &Path, gamma_hat: f64) -> Result<f64> {
    let records = formats::read_segments(segments)?;
    let second_moment = estimate_second_moment(&records, gamma_hat)?;
    Ok(second_moment.sqrt())
}

/// Build the next-weight spec from the CLI flags. `auto` means the wm rule
/// when segments are available, otherwise max-observed with a warning.
fn next_weight_from_flags(
    raw: &str,
    gamma_hat: f64,
    segments: Option<&Path>,
) -> Result<NextWeightSpec> {
    match raw {
        "auto" => match segments {
            Some(path) => {
                Ok(NextWeightSpec::wm(gamma_hat).with_w2_estimate(estimated_w2(path, gamma_hat)?))
            }
            None => {
                eprintln!(
                    "warning: --next-weight auto without --segments; falling back to the \
                     largest observed weight"
                );
                Ok(NextWeightSpec::wm(gamma_hat))
            }
        },
        "max-observed" => Ok(NextWeightSpec::max_observed()),
        value => {
            let fixed: f64 = value
                .parse()
                .with_context(|| format!("--next-weight must be auto, max-observed or a number, got '{value}'"))?;
            Ok(NextWeightSpec::fixed(fixed)?)
        }
    }
}

fn fmt_value(v: f64, round: bool) -> String {
    if round {
        format!("{:.0}", v.round())
    } else {
        format!("{v}")
    }
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let methods = parse_methods(&args.method)?;
    let mut sample = formats::read_weights(&args.weights)?;
    if let Some(cat) = &args.category {
        sample = sample.subset_by_category(cat)?;
    }
    let next_weight =
        next_weight_from_flags(&args.next_weight, args.gamma_hat, args.segments.as_deref())?;
    let base = CiConfig::new(Method::Eb, args.alpha)?
        .with_backend(Backend::parse(&args.backend)?)
        .with_draws(args.bootstrap)?
        .with_seed(args.seed)
        .with_next_weight(next_weight);

    let mut results: Vec<CiResult> = Vec::new();
    for &method in &methods {
        let cfg = CiConfig { method, ..base.clone() };
        let res = rateci_core::ci::compute_ci(&sample, &cfg)?;
        if res.next_weight_fallback {
            eprintln!(
                "warning: {} next weight fell back to max observed ({})",
                method.as_str(),
                res.next_weight_used
            );
        }
        let line = format!(
            "{},[{},{}]",
            fmt_value(res.point_estimate, args.round),
            fmt_value(res.lower, args.round),
            fmt_value(res.upper, args.round)
        );
        if methods.len() == 1 {
            println!("{line}");
        } else {
            println!("{}: {line}", method.as_str());
        }
        results.push(res);
    }

    if let Some(out) = &args.out {
        let mut writer = csv::Writer::from_path(out)
            .with_context(|| format!("cannot create {}", out.display()))?;
        writer.write_record([
            "method",
            "alpha",
            "backend",
            "point_estimate",
            "lower",
            "upper",
            "next_weight_used",
            "next_weight_fallback",
        ])?;
        for res in &results {
            writer.write_record(&[
                res.method.as_str().to_string(),
                res.alpha.to_string(),
                res.backend.as_str().to_string(),
                res.point_estimate.to_string(),
                res.lower.to_string(),
                res.upper.to_string(),
                res.next_weight_used.to_string(),
                res.next_weight_fallback.to_string(),
            ])?;
        }
        writer.flush()?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    if let Some(jobs) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("worker pool already configured")?;
    }
    let config = formats::ScenarioConfig::from_file(&args.config)?;
    let cells = config.cells()?;
    let report = run_study(&cells)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    formats::write_results(&args.out, &report)?;
    println!("wrote {} rows to {}", report.rows.len(), args.out.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let rows = formats::read_results(&args.input)?;
    if rows.is_empty() {
        bail!("no rows in {}", args.input.display());
    }
    if let Some(parent) = PathBuf::from(&args.out_prefix).parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    // group cells by gamma (or by model when gamma is absent)
    let mut groups: BTreeMap<String, Vec<&rateci_core::CoverageRow>> = BTreeMap::new();
    for row in &rows {
        let key = match row.gamma {
            Some(g) => format!("gamma{g}"),
            None => row.model.clone(),
        };
        groups.entry(sanitize(&key)).or_default().push(row);
    }
    for (key, group) in &groups {
        let mut budgets: Vec<f64> = group.iter().map(|r| r.budget).collect();
        budgets.sort_by(|a, b| a.partial_cmp(b).unwrap());
        budgets.dedup();
        let mut methods: Vec<&str> = group.iter().map(|r| r.method.as_str()).collect();
        methods.sort();
        methods.dedup();

        // pivot CSV: one row per budget, coverage error and width per method
        let pivot_path = PathBuf::from(format!("{}_{key}.csv", args.out_prefix));
        let mut writer = csv::Writer::from_path(&pivot_path)
            .with_context(|| format!("cannot create {}", pivot_path.display()))?;
        let mut header = vec!["budget".to_string()];
        header.extend(methods.iter().map(|m| format!("coverage_error_{m}")));
        header.extend(methods.iter().map(|m| format!("mean_width_{m}")));
        writer.write_record(&header)?;
        for &b in &budgets {
            let mut record = vec![b.to_string()];
            for &m in &methods {
                let v = group
                    .iter()
                    .find(|r| r.budget == b && r.method.as_str() == m)
                    .map(|r| r.coverage_error.to_string())
                    .unwrap_or_default();
                record.push(v);
            }
            for &m in &methods {
                let v = group
                    .iter()
                    .find(|r| r.budget == b && r.method.as_str() == m)
                    .map(|r| r.mean_width.to_string())
                    .unwrap_or_default();
                record.push(v);
            }
            writer.write_record(&record)?;
        }
        writer.flush()?;

        // two charts per group: coverage error and log-scale width
        let coverage_series: Vec<svg::Series> = methods
            .iter()
            .map(|&m| svg::Series {
                label: m.to_string(),
                points: group
                    .iter()
                    .filter(|r| r.method.as_str() == m)
                    .map(|r| (r.budget, r.coverage_error))
                    .collect(),
            })
            .collect();
        let width_series: Vec<svg::Series> = methods
            .iter()
            .map(|&m| svg::Series {
                label: m.to_string(),
                points: group
                    .iter()
                    .filter(|r| r.method.as_str() == m)
                    .map(|r| (r.budget, r.mean_width))
                    .collect(),
            })
            .collect();
        let cov_path = format!("{}_{key}_coverage.svg", args.out_prefix);
        std::fs::write(
            &cov_path,
            svg::line_chart(&format!("coverage error ({key})"), "budget ratio", "coverage error", &coverage_series, false),
        )?;
        let width_path = format!("{}_{key}_width.svg", args.out_prefix);
        std::fs::write(
            &width_path,
            svg::line_chart(&format!("mean CI width ({key})"), "budget ratio", "mean width (log)", &width_series, true),
        )?;
        println!("wrote {} {} {}", pivot_path.display(), cov_path, width_path);
    }
    Ok(())
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_alphanumeric() || c == '.' { c } else { '-' }).collect()
}

fn cmd_check_monotonicity(args: CheckArgs) -> Result<()> {
    let methods = parse_methods(&args.methods)?;
    let sample: WeightSample = formats::read_weights(&args.weights)?;
    let next_weight = match (args.w2, &args.segments) {
        (Some(w2), _) => NextWeightSpec::wm(args.gamma_hat).with_w2_estimate(w2),
        (None, Some(path)) => NextWeightSpec::wm(args.gamma_hat)
            .with_w2_estimate(estimated_w2(path, args.gamma_hat)?),
        (None, None) => {
            eprintln!("warning: no --w2 or --segments; next weight is the largest observed weight");
            NextWeightSpec::wm(args.gamma_hat)
        }
    };
    let cfg = CiConfig::new(Method::Eb, args.alpha)?
        .with_backend(Backend::parse(&args.backend)?)
        .with_draws(args.bootstrap)?
        .with_seed(args.seed)
        .with_next_weight(next_weight);
    let report = check_monotonicity(&sample, &args.subset_category, &cfg, &methods)?;
    for cmp in &report.comparisons {
        println!(
            "{}: subset [{:.4},{:.4}] union [{:.4},{:.4}] lower_violation={} upper_violation={}",
            cmp.method.as_str(),
            cmp.subset.lower,
            cmp.subset.upper,
            cmp.union.lower,
            cmp.union.upper,
            cmp.lower_violated,
            cmp.upper_violated
        );
    }
    Ok(())
}
