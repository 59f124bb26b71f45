//! File formats: weights CSV, segments CSV, scenario JSON, results CSV.

use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use rateci_core::{
    Backend, CoverageReport, CoverageRow, GammaHatPolicy, SamplingModel, Scenario, SegmentRecord,
    SimMethod, Stages, WeightSample,
};

/// Read a `weight,category` CSV into a validated sample.
pub fn read_weights(path: &Path) -> Result<WeightSample> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open weights file {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let mut weight_col = None;
    let mut category_col = None;
    for (i, name) in headers.iter().enumerate() {
        match name {
            "weight" => weight_col = Some(i),
            "category" => category_col = Some(i),
            other => bail!("unexpected column '{other}' in weights file (want weight,category)"),
        }
    }
    let weight_col = weight_col.context("weights file must have a 'weight' column")?;

    let mut weights = Vec::new();
    let mut categories = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let raw = record
            .get(weight_col)
            .with_context(|| format!("row {}: missing weight", row_idx + 2))?;
        let w: f64 = raw
            .parse()
            .with_context(|| format!("row {}: bad weight '{raw}'", row_idx + 2))?;
        weights.push(w);
        let cat = category_col
            .and_then(|c| record.get(c))
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        categories.push(cat);
    }
    Ok(WeightSample::new(weights)?.with_categories(categories)?)
}

fn parse_flag(raw: &str, row: usize, col: &str) -> Result<bool> {
    match raw {
        "0" => Ok(false),
        "1" => Ok(true),
        other => bail!("row {row}: {col} must be 0 or 1, got '{other}'"),
    }
}

/// Read a segments CSV
/// (`segment_id,s_prob,h_prob,p_prob,simulated,reviewed,outcome`).
pub fn read_segments(path: &Path) -> Result<Vec<SegmentRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open segments file {}", path.display()))?;
    let expected = ["segment_id", "s_prob", "h_prob", "p_prob", "simulated", "reviewed", "outcome"];
    let headers = reader.headers()?.clone();
    if headers.iter().ne(expected) {
        bail!(
            "segments file header must be '{}', got '{}'",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        );
    }
    let mut records = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 2;
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or("");
        let rec = SegmentRecord {
            segment_id: get(0)
                .parse()
                .with_context(|| format!("row {row}: bad segment_id '{}'", get(0)))?,
            s_prob: get(1)
                .parse()
                .with_context(|| format!("row {row}: bad s_prob '{}'", get(1)))?,
            h_prob: if get(2).is_empty() {
                None
            } else {
                Some(get(2).parse().with_context(|| format!("row {row}: bad h_prob"))?)
            },
            p_prob: get(3)
                .parse()
                .with_context(|| format!("row {row}: bad p_prob '{}'", get(3)))?,
            simulated: parse_flag(get(4), row, "simulated")?,
            reviewed: parse_flag(get(5), row, "reviewed")?,
            outcome: if get(6).is_empty() {
                None
            } else {
                Some(parse_flag(get(6), row, "outcome")?)
            },
        };
        rec.validate().with_context(|| format!("row {row}: invalid segment record"))?;
        records.push(rec);
    }
    Ok(records)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityConfig {
    mean: f64,
    sd: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum BudgetConfig {
    Scalar(f64),
    Grid { from: f64, to: f64, steps: u32 },
}

fn default_stages() -> Stages {
    Stages::One
}

fn default_draws() -> u32 {
    10_000
}

fn default_backend() -> String {
    "saddlepoint".into()
}

/// JSON scenario configuration; unknown keys are rejected.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    lambda: f64,
    pi: f64,
    f1: DensityConfig,
    f0: DensityConfig,
    sampling_model: SamplingModel,
    budget: BudgetConfig,
    #[serde(default = "default_stages")]
    stages: Stages,
    alpha: f64,
    methods: Vec<String>,
    gamma_hat: GammaHatPolicy,
    replicates: u32,
    base_seed: u64,
    #[serde(default = "default_draws")]
    bootstrap_draws: u32,
    #[serde(default = "default_backend")]
    eb_backend: String,
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let file = File::open(path)
            .with_context(|| format!("cannot open config {}", path.display()))?;
        let config: ScenarioConfig =
            serde_json::from_reader(file).context("invalid scenario config")?;
        Ok(config)
    }

    /// Expand the budget grid into one scenario per cell.
    pub fn cells(&self) -> Result<Vec<Scenario>> {
        let budgets: Vec<f64> = match self.budget {
            BudgetConfig::Scalar(b) => vec![b],
            BudgetConfig::Grid { from, to, steps } => {
                if steps == 0 {
                    bail!("budget grid needs at least one step");
                }
                if steps == 1 {
                    vec![from]
                } else {
                    (0..steps)
                        .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
                        .collect()
                }
            }
        };
        let methods: Vec<SimMethod> = self
            .methods
            .iter()
            .map(|m| SimMethod::parse(m).map_err(anyhow::Error::from))
            .collect::<Result<_>>()?;
        let eb_backend = Backend::parse(&self.eb_backend)?;
        let cells: Vec<Scenario> = budgets
            .into_iter()
            .map(|budget| Scenario {
                lambda: self.lambda,
                pi: self.pi,
                f1: (self.f1.mean, self.f1.sd),
                f0: (self.f0.mean, self.f0.sd),
                sampling_model: self.sampling_model,
                budget,
                stages: self.stages,
                alpha: self.alpha,
                methods: methods.clone(),
                gamma_hat: self.gamma_hat,
                replicates: self.replicates,
                base_seed: self.base_seed,
                bootstrap_draws: self.bootstrap_draws,
                eb_backend,
            })
            .collect();
        for cell in &cells {
            cell.validate()?;
        }
        Ok(cells)
    }
}

const RESULT_HEADER: [&str; 10] = [
    "cell",
    "budget",
    "gamma",
    "model",
    "method",
    "replicates",
    "coverage_error",
    "mean_width",
    "mean_point_estimate",
    "failures",
];

/// Write a coverage report as CSV, one row per (cell, method).
pub fn write_results(path: &Path, report: &CoverageReport) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(RESULT_HEADER)?;
    for row in &report.rows {
        writer.write_record(&[
            row.cell.to_string(),
            row.budget.to_string(),
            row.gamma.map(|g| g.to_string()).unwrap_or_default(),
            row.model.clone(),
            row.method.as_str().to_string(),
            row.replicates.to_string(),
            row.coverage_error.to_string(),
            row.mean_width.to_string(),
            row.mean_point_estimate.to_string(),
            row.failures.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Read a results CSV back for report rendering.
pub fn read_results(path: &Path) -> Result<Vec<CoverageRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open results file {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(RESULT_HEADER) {
        bail!("results file header does not match cmd simulate output");
    }
    let mut rows = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 2;
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or("");
        rows.push(CoverageRow {
            cell: get(0).parse().with_context(|| format!("row {row}: bad cell"))?,
            budget: get(1).parse().with_context(|| format!("row {row}: bad budget"))?,
            gamma: if get(2).is_empty() {
                None
            } else {
                Some(get(2).parse().with_context(|| format!("row {row}: bad gamma"))?)
            },
            model: get(3).to_string(),
            method: SimMethod::parse(get(4))?,
            replicates: get(5).parse().with_context(|| format!("row {row}: bad replicates"))?,
            coverage_error: get(6)
                .parse()
                .with_context(|| format!("row {row}: bad coverage_error"))?,
            mean_width: get(7).parse().with_context(|| format!("row {row}: bad mean_width"))?,
            mean_point_estimate: get(8)
                .parse()
                .with_context(|| format!("row {row}: bad mean_point_estimate"))?,
            failures: get(9).parse().with_context(|| format!("row {row}: bad failures"))?,
        });
    }
    Ok(rows)
}
