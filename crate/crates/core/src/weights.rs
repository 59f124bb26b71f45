//! Observed importance weights and their stratification.
//!
//! A [`WeightSample`] holds the realized positive weights `{w_i}` of the
//! confirmed events, in input order. Input order matters: it is the coupling
//! key used when confidence intervals for a subset and its superset must be
//! compared replicate by replicate.

use crate::error::{Error, Result};

/// Relative tolerance under which two weights are treated as the same stratum.
///
/// Weights arriving from `1/p` computations may differ in the last bits;
/// exact-equality grouping would silently change the discrete-method strata.
pub const GROUPING_REL_TOL: f64 = 1e-12;

/// The observed positive importance weights, with optional per-event
/// category labels and a mileage normalizer.
///
/// An empty sample is a valid state: it is what a zero review budget
/// produces, not an error.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSample {
    weights: Vec<f64>,
    categories: Vec<Option<String>>,
    miles_normalizer: f64,
}

impl WeightSample {
    /// Validate raw weights and build a sample. Order is preserved.
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        for (index, &value) in raw.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteWeight { index });
            }
            if value <= 0.0 {
                return Err(Error::NonPositiveWeight { index, value });
            }
        }
        let categories = vec![None; raw.len()];
        Ok(Self { weights: raw, categories, miles_normalizer: 1.0 })
    }

    /// Attach a category label to every event. Lengths must match.
    pub fn with_categories(mut self, categories: Vec<Option<String>>) -> Result<Self> {
        if categories.len() != self.weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} categories for {} weights",
                categories.len(),
                self.weights.len()
            )));
        }
        self.categories = categories;
        Ok(self)
    }

    /// Set the mileage normalizer `m` (millions of miles). Must be positive.
    pub fn with_miles_normalizer(mut self, miles: f64) -> Result<Self> {
        if !(miles > 0.0) || !miles.is_finite() {
            return Err(Error::InvalidInput(format!("miles normalizer must be positive, got {miles}")));
        }
        self.miles_normalizer = miles;
        Ok(self)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn categories(&self) -> &[Option<String>] {
        &self.categories
    }

    pub fn miles_normalizer(&self) -> f64 {
        self.miles_normalizer
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Horvitz-Thompson point estimate: `sum(w_i) / m`.
    pub fn point_estimate(&self) -> f64 {
        // + 0.0 turns the empty-sum -0.0 into +0.0
        self.weights.iter().sum::<f64>() / self.miles_normalizer + 0.0
    }

    /// Largest observed weight, or 0 for an empty sample.
    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Indices of the events carrying the given category label.
    pub fn category_indices(&self, category: &str) -> Result<Vec<usize>> {
        let idx: Vec<usize> = self
            .categories
            .iter()
            .enumerate()
            .filter_map(|(i, c)| (c.as_deref() == Some(category)).then_some(i))
            .collect();
        if idx.is_empty() {
            return Err(Error::UnknownCategory(category.to_string()));
        }
        Ok(idx)
    }

    /// The sub-sample restricted to one category, order preserved.
    pub fn subset_by_category(&self, category: &str) -> Result<WeightSample> {
        let idx = self.category_indices(category)?;
        let weights = idx.iter().map(|&i| self.weights[i]).collect();
        let categories = idx.iter().map(|&i| self.categories[i].clone()).collect();
        Ok(WeightSample { weights, categories, miles_normalizer: self.miles_normalizer })
    }
}

/// Validate a raw weight list into a [`WeightSample`].
pub fn validate_weights(raw: &[f64]) -> Result<WeightSample> {
    WeightSample::new(raw.to_vec())
}

/// Merge equal weights (within `rel_tol` relative difference) into
/// `(weight, count)` strata, ascending in weight.
///
/// The stratum weight is the smallest member of the merged run, so
/// `sum(weight * count)` stays within `rel_tol` of `sum(weights)`.
pub fn group_weights(sample: &WeightSample, rel_tol: f64) -> Vec<(f64, u64)> {
    group_raw_weights(sample.weights(), rel_tol)
}

pub(crate) fn group_raw_weights(weights: &[f64], rel_tol: f64) -> Vec<(f64, u64)> {
    let mut sorted: Vec<f64> = weights.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("weights are finite"));
    let mut strata: Vec<(f64, u64)> = Vec::new();
    for w in sorted {
        match strata.last_mut() {
            Some((rep, count)) if w - *rep <= rel_tol * rep.abs() => *count += 1,
            _ => strata.push((w, 1)),
        }
    }
    strata
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_well_formed_input() {
        let s = validate_weights(&[1.0, 2.5]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.point_estimate(), 3.5);
    }

    #[test]
    fn empty_sample_is_valid() {
        let s = validate_weights(&[]).unwrap();
        assert_eq!(s.len(), 0);
        assert_eq!(s.point_estimate(), 0.0);
        assert_eq!(s.max_weight(), 0.0);
    }

    #[test]
    fn rejects_negative_weight() {
        match validate_weights(&[1.0, -3.0]) {
            Err(Error::NonPositiveWeight { index, value }) => {
                assert_eq!(index, 1);
                assert_eq!(value, -3.0);
            }
            other => panic!("expected NonPositiveWeight, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite_weight() {
        assert!(matches!(
            validate_weights(&[1.0, f64::NAN]),
            Err(Error::NonFiniteWeight { index: 1 })
        ));
        assert!(matches!(
            validate_weights(&[f64::INFINITY]),
            Err(Error::NonFiniteWeight { index: 0 })
        ));
    }

    #[test]
    fn identical_weights_merge() {
        let s = validate_weights(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(group_weights(&s, GROUPING_REL_TOL), vec![(1.0, 3)]);
    }

    #[test]
    fn distinct_weights_stay_separate() {
        let s = validate_weights(&[1.0, 100.0]).unwrap();
        assert_eq!(group_weights(&s, GROUPING_REL_TOL), vec![(1.0, 1), (100.0, 1)]);
    }

    #[test]
    fn near_equal_weights_merge_within_tolerance() {
        let w = 1.0 + 2.0 * f64::EPSILON;
        let s = validate_weights(&[1.0, w]).unwrap();
        assert_eq!(group_weights(&s, GROUPING_REL_TOL).len(), 1);
        // but a clearly different weight stays apart
        let s = validate_weights(&[1.0, 1.0 + 1e-6]).unwrap();
        assert_eq!(group_weights(&s, GROUPING_REL_TOL).len(), 2);
    }

    #[test]
    fn grouped_mass_preserves_total() {
        let s = validate_weights(&[0.5, 0.5, 3.25, 3.25, 3.25, 7.0]).unwrap();
        let strata = group_weights(&s, GROUPING_REL_TOL);
        let total: f64 = strata.iter().map(|&(w, x)| w * x as f64).sum();
        let direct: f64 = s.weights().iter().sum();
        assert!((total - direct).abs() <= 1e-12 * direct);
        let n: u64 = strata.iter().map(|&(_, x)| x).sum();
        assert_eq!(n as usize, s.len());
    }

    #[test]
    fn case_study_weights_group_into_strata() {
        let mut w = vec![1.0; 12];
        w.extend_from_slice(&[
            1.03, 1.18, 1.18, 1.18, 1.35, 1.38, 1.43, 1.59, 1.72, 1.85, 1.88, 2.09, 11.24, 11.24,
            11.24, 11.24, 11.25, 11.58, 12.11, 14.39, 14.94, 15.71, 16.1, 19.79, 20.0, 20.0,
        ]);
        let s = validate_weights(&w).unwrap();
        let strata = group_weights(&s, GROUPING_REL_TOL);
        assert_eq!(strata[0], (1.0, 12));
        assert_eq!(strata.len(), 21);
        assert_eq!(strata.iter().map(|&(_, x)| x).sum::<u64>(), 38);
        assert!((s.point_estimate() - 230.69).abs() < 1e-9);
    }

    #[test]
    fn categories_select_subsets() {
        let s = validate_weights(&[1.0, 2.0, 3.0])
            .unwrap()
            .with_categories(vec![
                Some("A".into()),
                Some("B".into()),
                Some("A".into()),
            ])
            .unwrap();
        let sub = s.subset_by_category("A").unwrap();
        assert_eq!(sub.weights(), &[1.0, 3.0]);
        assert!(matches!(
            s.subset_by_category("C"),
            Err(Error::UnknownCategory(_))
        ));
    }
}
