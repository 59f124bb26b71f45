//! Weighted sums of independent Gamma random variables.
//!
//! `Z = sum_k w_k * G_k` with `G_k ~ Gamma(shape x_k, rate 1)`, plus an
//! optional shape-1 "next weight" term. Every Gamma-family confidence bound
//! in this crate is a quantile of such a sum.

use crate::error::{Error, Result};
use crate::weights::GROUPING_REL_TOL;

/// Specification of a weighted Gamma sum.
///
/// Terms are canonicalized at construction: zero-shape strata dropped,
/// weights sorted ascending, equal weights (within 1e-12 relative) merged by
/// adding shapes, and a positive next weight folded in as a shape-1 term.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSumSpec {
    terms: Vec<(f64, f64)>,
    next_weight: f64,
}

impl GammaSumSpec {
    /// Build from `(weight, shape)` strata and a next-weight term.
    pub fn new(strata: &[(f64, f64)], next_weight: f64) -> Result<Self> {
        if !(next_weight >= 0.0) || !next_weight.is_finite() {
            return Err(Error::InvalidInput(format!(
                "next weight must be finite and nonnegative, got {next_weight}"
            )));
        }
        let mut terms: Vec<(f64, f64)> = Vec::with_capacity(strata.len() + 1);
        for &(w, x) in strata {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidInput(format!("stratum weight must be positive, got {w}")));
            }
            if !x.is_finite() || x < 0.0 {
                return Err(Error::InvalidInput(format!("stratum shape must be nonnegative, got {x}")));
            }
            if x > 0.0 {
                terms.push((w, x));
            }
        }
        if next_weight > 0.0 {
            terms.push((next_weight, 1.0));
        }
        terms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite weights"));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(terms.len());
        for (w, x) in terms {
            match merged.last_mut() {
                Some((rep, shape)) if w - *rep <= GROUPING_REL_TOL * rep.abs() => *shape += x,
                _ => merged.push((w, x)),
            }
        }
        Ok(Self { terms: merged, next_weight })
    }

    /// Build from integer-count strata as produced by weight grouping.
    pub fn from_strata(strata: &[(f64, u64)], next_weight: f64) -> Result<Self> {
        let terms: Vec<(f64, f64)> = strata.iter().map(|&(w, x)| (w, x as f64)).collect();
        Self::new(&terms, next_weight)
    }

    /// Build from raw event weights, one shape-1 term per event.
    pub fn from_weights(weights: &[f64], next_weight: f64) -> Result<Self> {
        let strata = crate::weights::group_raw_weights(weights, GROUPING_REL_TOL);
        Self::from_strata(&strata, next_weight)
    }

    /// Canonical `(weight, shape)` terms, next weight included.
    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn next_weight(&self) -> f64 {
        self.next_weight
    }

    /// True when the sum is the constant 0 (no terms at all).
    pub fn is_degenerate(&self) -> bool {
        self.terms.is_empty()
    }

    /// `E[Z] = sum w_k x_k` (next-weight term included).
    pub fn mean(&self) -> f64 {
        self.terms.iter().map(|&(w, x)| w * x).sum()
    }

    /// `Var[Z] = sum w_k^2 x_k` (next-weight term included).
    pub fn variance(&self) -> f64 {
        self.terms.iter().map(|&(w, x)| w * w * x).sum()
    }

    /// Third cumulant `2 * sum w_k^3 x_k`.
    pub fn third_cumulant(&self) -> f64 {
        2.0 * self.terms.iter().map(|&(w, x)| w * w * w * x).sum::<f64>()
    }

    pub fn max_weight(&self) -> f64 {
        self.terms.iter().map(|&(w, _)| w).fold(0.0, f64::max)
    }
}
