//! Descriptive statistics over discipline-level intensities.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("area {0:?} has no staffed disciplines")]
    EmptyArea(String),
    #[error("non-finite value in sample")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionStats {
    pub da_id: String,
    pub n_sds: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation (divisor n - 1); 0 for a single value.
    pub std_dev: f64,
    pub variation_coeff: f64,
}

impl DistributionStats {
    /// Summarizes one area's discipline intensities.
    pub fn from_values(da_id: impl Into<String>, values: &[f64]) -> Result<Self, StatsError> {
        let da_id = da_id.into();
        if values.is_empty() {
            return Err(StatsError::EmptyArea(da_id));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = mean(&sorted);
        let std_dev = sample_std_dev(&sorted, mean);
        Ok(DistributionStats {
            da_id,
            n_sds: sorted.len(),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            mean,
            median: median_sorted(&sorted),
            std_dev,
            variation_coeff: variation_coefficient(std_dev, mean).unwrap_or(0.0),
        })
    }

    /// Ratio of the most to the least fertile discipline; `None` when the
    /// least fertile one has zero intensity.
    pub fn fertility_ratio(&self) -> Option<f64> {
        fertility_ratio(self.min, self.max)
    }
}

/// `std_dev / mean`, undefined for a non-positive mean.
pub fn variation_coefficient(std_dev: f64, mean: f64) -> Option<f64> {
    (mean > 0.0).then(|| std_dev / mean)
}

pub fn fertility_ratio(min: f64, max: f64) -> Option<f64> {
    (min > 0.0).then(|| max / min)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn sample_std_dev(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    libm::sqrt(ss / (values.len() - 1) as f64)
}

/// Median of an ascending slice; the mean of the two central values for
/// even lengths.
pub fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Median of unsorted values.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    median_sorted(&v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_sample_by_hand() {
        // values 1, 2, 3, 10: mean 4, squared deviations 9+4+1+36 = 50,
        // sample variance 50/3
        let s = DistributionStats::from_values("D", &[10.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.n_sds, 4);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 10.0);
        assert_eq!(s.mean, 4.0);
        assert_eq!(s.median, 2.5);
        assert!((s.std_dev - libm::sqrt(50.0 / 3.0)).abs() < 1e-15);
        assert!((s.variation_coeff - s.std_dev / 4.0).abs() < 1e-15);
        assert_eq!(s.fertility_ratio(), Some(10.0));
    }

    #[test]
    fn single_value_has_zero_spread() {
        let s = DistributionStats::from_values("D", &[0.75]).unwrap();
        assert_eq!(s.std_dev, 0.0);
        assert_eq!(s.variation_coeff, 0.0);
        assert_eq!(s.median, 0.75);
    }

    #[test]
    fn empty_area_is_an_error() {
        assert_eq!(
            DistributionStats::from_values("D", &[]),
            Err(StatsError::EmptyArea("D".into()))
        );
    }

    #[test]
    fn mathematical_sciences_variation_coefficient() {
        let cv = variation_coefficient(0.110, 0.316).unwrap();
        assert!((cv - 0.348).abs() < 0.001);
    }

    #[test]
    fn fertility_ratios() {
        assert!((fertility_ratio(0.030, 1.172).unwrap() - 39.07).abs() < 0.1);
        assert!((fertility_ratio(0.086, 1.978).unwrap() - 23.0).abs() < 0.1);
        assert_eq!(fertility_ratio(0.0, 1.0), None);
    }

    proptest! {
        #[test]
        fn ordering_invariants(values in proptest::collection::vec(0.0f64..5.0, 1..40)) {
            let s = DistributionStats::from_values("D", &values).unwrap();
            prop_assert!(s.min <= s.median && s.median <= s.max);
            prop_assert!(s.min <= s.mean + 1e-12 && s.mean <= s.max + 1e-12);
            if s.mean > 0.0 {
                prop_assert_eq!(s.variation_coeff, s.std_dev / s.mean);
            }
        }
    }
}
