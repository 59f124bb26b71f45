//! Method selection, next-weight rules and result records.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confidence-interval method identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Poisson bootstrap.
    Pb,
    /// Exponential bootstrap.
    Eb,
    /// Weighted Gamma.
    Wg,
    /// Extended original Gamma.
    Go,
    /// Extended mid-p Gamma.
    Gp,
    /// Discrete modified Gamma.
    Gm,
}

impl Method {
    pub fn parse(s: &str) -> Result<Method> {
        match s.to_ascii_lowercase().as_str() {
            "pb" => Ok(Method::Pb),
            "eb" => Ok(Method::Eb),
            "wg" => Ok(Method::Wg),
            "go" => Ok(Method::Go),
            "gp" => Ok(Method::Gp),
            "gm" => Ok(Method::Gm),
            other => Err(Error::InvalidInput(format!("unknown method '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Pb => "pb",
            Method::Eb => "eb",
            Method::Wg => "wg",
            Method::Go => "go",
            Method::Gp => "gp",
            Method::Gm => "gm",
        }
    }
}

/// Quantile backend for the bootstrap-style methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    MonteCarlo,
    Saddlepoint,
}

impl Backend {
    pub fn parse(s: &str) -> Result<Backend> {
        match s.to_ascii_lowercase().as_str() {
            "mc" | "monte_carlo" | "monte-carlo" => Ok(Backend::MonteCarlo),
            "saddlepoint" | "sp" => Ok(Backend::Saddlepoint),
            other => Err(Error::InvalidInput(format!("unknown backend '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Backend::MonteCarlo => "mc",
            Backend::Saddlepoint => "saddlepoint",
        }
    }
}

/// How the next weight `w**` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum NextWeightMode {
    /// A fixed user-supplied value.
    Fixed(f64),
    /// The largest observed weight (0 for an empty sample).
    MaxObserved,
    /// The estimated root second moment `||w||_2` alone.
    W2,
    /// `max(||w||_2, all observed weights)` - the recommended rule.
    Wm,
}

/// Next-weight specification: the rule plus what it needs to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextWeightSpec {
    pub mode: NextWeightMode,
    /// Power-law index used when `||w||_2` must be estimated from records.
    pub gamma_hat: f64,
    /// Pre-computed `||w||_2`, used by w2/wm when no records are supplied.
    pub w2_estimate: Option<f64>,
}

impl NextWeightSpec {
    pub fn fixed(value: f64) -> Result<Self> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::InvalidInput(format!(
                "fixed next weight must be finite and nonnegative, got {value}"
            )));
        }
        Ok(Self { mode: NextWeightMode::Fixed(value), gamma_hat: 0.5, w2_estimate: None })
    }

    pub fn max_observed() -> Self {
        Self { mode: NextWeightMode::MaxObserved, gamma_hat: 0.5, w2_estimate: None }
    }

    pub fn w2(gamma_hat: f64) -> Self {
        Self { mode: NextWeightMode::W2, gamma_hat, w2_estimate: None }
    }

    pub fn wm(gamma_hat: f64) -> Self {
        Self { mode: NextWeightMode::Wm, gamma_hat, w2_estimate: None }
    }

    pub fn with_w2_estimate(mut self, w2: f64) -> Self {
        self.w2_estimate = Some(w2);
        self
    }
}

/// Everything a CI method needs besides the sample itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiConfig {
    /// Two-sided miscoverage level, in (0, 1).
    pub alpha: f64,
    pub method: Method,
    pub backend: Backend,
    /// Bootstrap replicates for the Monte Carlo backend (default 10^4).
    pub bootstrap_draws: u32,
    pub seed: u64,
    pub next_weight_spec: NextWeightSpec,
}

impl CiConfig {
    pub fn new(method: Method, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must be in (0,1), got {alpha}")));
        }
        Ok(Self {
            alpha,
            method,
            backend: Backend::MonteCarlo,
            bootstrap_draws: 10_000,
            seed: 0,
            next_weight_spec: NextWeightSpec::max_observed(),
        })
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_draws(mut self, draws: u32) -> Result<Self> {
        if draws < 100 {
            return Err(Error::InvalidInput(format!(
                "bootstrap draws must be at least 100, got {draws}"
            )));
        }
        self.bootstrap_draws = draws;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_next_weight(mut self, spec: NextWeightSpec) -> Self {
        self.next_weight_spec = spec;
        self
    }
}

/// A confidence interval with its provenance.
///
/// `0 <= lower <= upper` always holds; `lower <= point_estimate <= upper`
/// is not guaranteed for the shifted-Gamma methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiResult {
    pub point_estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: Method,
    pub alpha: f64,
    pub next_weight_used: f64,
    pub backend: Backend,
    /// Set when the wm rule fell back to max-observed for lack of data.
    pub next_weight_fallback: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_alpha_and_draws() {
        assert!(CiConfig::new(Method::Eb, 0.0).is_err());
        assert!(CiConfig::new(Method::Eb, 1.0).is_err());
        let cfg = CiConfig::new(Method::Eb, 0.1).unwrap();
        assert!(cfg.with_draws(99).is_err());
    }

    #[test]
    fn method_roundtrip() {
        for m in [Method::Pb, Method::Eb, Method::Wg, Method::Go, Method::Gp, Method::Gm] {
            assert_eq!(Method::parse(m.as_str()).unwrap(), m);
        }
        assert!(Method::parse("zz").is_err());
    }
}
