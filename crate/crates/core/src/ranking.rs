//! Competition ranking and rank-variation statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::indicators::{intensity_table, CountingMode, FieldNormalizer, IndicatorError, Scope};
use crate::stats::median_sorted;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankingError {
    #[error("cannot rank an empty value set")]
    Empty,
    #[error("non-finite value for unit {0:?}")]
    InvalidValue(String),
    #[error("rankings cover different units: {}", .0.join(", "))]
    SetMismatch(Vec<String>),
    #[error("area {da:?} has {found} ranked unit(s); at least 2 are needed")]
    InsufficientUnits { da: String, found: usize },
    #[error("unknown area {0:?}")]
    UnknownArea(String),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// "1224": tied values share the best rank.
    #[default]
    Competition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub unit_id: String,
    pub value: f64,
    pub rank: usize,
}

/// Units ordered by value descending, ties by unit id ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub scope_id: String,
    pub entries: Vec<RankEntry>,
    pub tie_policy: TiePolicy,
}

impl Ranking {
    pub fn with_scope(mut self, scope_id: impl Into<String>) -> Self {
        self.scope_id = scope_id.into();
        self
    }

    pub fn rank_of(&self, unit_id: &str) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.unit_id == unit_id)
            .map(|e| e.rank)
    }

    pub fn value_of(&self, unit_id: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.unit_id == unit_id)
            .map(|e| e.value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn rank_map(&self) -> BTreeMap<&str, usize> {
        self.entries
            .iter()
            .map(|e| (e.unit_id.as_str(), e.rank))
            .collect()
    }
}

/// Competition ranking of units by value, highest first.
pub fn rank_units(values: &BTreeMap<String, f64>) -> Result<Ranking, RankingError> {
    if values.is_empty() {
        return Err(RankingError::Empty);
    }
    if let Some((unit, _)) = values.iter().find(|(_, v)| !v.is_finite()) {
        return Err(RankingError::InvalidValue(unit.clone()));
    }
    let mut sorted: Vec<(&String, f64)> = values.iter().map(|(u, v)| (u, *v)).collect();
    // stable sort keeps the BTreeMap's ascending unit order within ties
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut entries: Vec<RankEntry> = Vec::with_capacity(sorted.len());
    for (i, (unit, value)) in sorted.into_iter().enumerate() {
        let rank = match entries.last() {
            Some(prev) if prev.value == value => prev.rank,
            _ => i + 1,
        };
        entries.push(RankEntry {
            unit_id: unit.clone(),
            value,
            rank,
        });
    }
    Ok(Ranking {
        scope_id: String::new(),
        entries,
        tie_policy: TiePolicy::Competition,
    })
}

/// Which units the average and median variation are taken over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationBasis {
    /// Units whose rank changed.
    #[default]
    ChangedOnly,
    /// Every unit, unchanged ones contributing zero.
    AllUnits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankComparison {
    pub n_units: usize,
    pub n_changed: usize,
    pub max_variation: usize,
    pub average_variation: f64,
    pub median_variation: f64,
}

/// Per-unit absolute rank changes, in unit id order.
pub fn rank_variations(a: &Ranking, b: &Ranking) -> Result<Vec<(String, usize)>, RankingError> {
    let ra = a.rank_map();
    let rb = b.rank_map();
    let ka: BTreeSet<&str> = ra.keys().copied().collect();
    let kb: BTreeSet<&str> = rb.keys().copied().collect();
    if ka != kb {
        let diff = ka
            .symmetric_difference(&kb)
            .map(|s| s.to_string())
            .collect();
        return Err(RankingError::SetMismatch(diff));
    }
    Ok(ra
        .iter()
        .map(|(u, r)| (u.to_string(), r.abs_diff(rb[u])))
        .collect())
}

/// Rank-variation statistics with average and median over changed units.
pub fn compare_rankings(a: &Ranking, b: &Ranking) -> Result<RankComparison, RankingError> {
    compare_rankings_with(a, b, VariationBasis::ChangedOnly)
}

pub fn compare_rankings_with(
    a: &Ranking,
    b: &Ranking,
    basis: VariationBasis,
) -> Result<RankComparison, RankingError> {
    let variations = rank_variations(a, b)?;
    let n_units = variations.len();
    let mut sample: Vec<f64> = variations
        .iter()
        .map(|(_, v)| *v)
        .filter(|v| basis == VariationBasis::AllUnits || *v > 0)
        .map(|v| v as f64)
        .collect();
    sample.sort_by(f64::total_cmp);
    let n_changed = variations.iter().filter(|(_, v)| *v > 0).count();
    let max_variation = variations.iter().map(|(_, v)| *v).max().unwrap_or(0);
    let (average_variation, median_variation) = if n_changed == 0 || sample.is_empty() {
        (0.0, 0.0)
    } else {
        (
            sample.iter().sum::<f64>() / sample.len() as f64,
            median_sorted(&sample),
        )
    };
    Ok(RankComparison {
        n_units,
        n_changed,
        max_variation,
        average_variation,
        median_variation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub da_id: String,
    /// Staffed disciplines of the area.
    pub n_sds: usize,
    pub counting_mode: CountingMode,
    /// Ranking by raw area-level intensity.
    pub aggregate: Ranking,
    /// Ranking by normalized area intensity (theta).
    pub normalized: Ranking,
    pub comparison: RankComparison,
    /// Units left out because every discipline they occupy has zero pooled
    /// publications.
    pub dropped_units: Vec<String>,
    pub degenerate_sds: Vec<String>,
}

/// Compares the aggregate-intensity ranking of an area's units with the
/// ranking by normalized intensity.
pub fn distortion_report(
    corpus: &Corpus,
    da_id: &str,
    mode: CountingMode,
) -> Result<DistortionReport, RankingError> {
    let normalizer = FieldNormalizer::new(corpus, mode);
    distortion_report_with(&normalizer, corpus, da_id)
}

/// Same as [`distortion_report`], reusing a prepared normalizer.
pub fn distortion_report_with(
    normalizer: &FieldNormalizer<'_>,
    corpus: &Corpus,
    da_id: &str,
) -> Result<DistortionReport, RankingError> {
    if !corpus.taxonomy.contains_da(da_id) {
        return Err(RankingError::UnknownArea(da_id.to_string()));
    }
    let mode = normalizer.counting_mode();
    let table = intensity_table(corpus, Scope::Da, mode);

    let mut raw = BTreeMap::new();
    let mut theta = BTreeMap::new();
    let mut dropped_units = Vec::new();
    for unit in normalizer.units_in_area(da_id) {
        match normalizer.theta(unit, da_id) {
            Ok(t) => {
                theta.insert(unit.to_string(), t.theta);
                let cell = table
                    .get(unit, da_id)
                    .ok_or_else(|| IndicatorError::MissingCell {
                        unit: unit.to_string(),
                        scope: da_id.to_string(),
                    })?;
                raw.insert(unit.to_string(), cell.intensity);
            }
            Err(IndicatorError::DegenerateArea { .. }) => dropped_units.push(unit.to_string()),
            Err(e) => return Err(e.into()),
        }
    }
    if raw.len() < 2 {
        return Err(RankingError::InsufficientUnits {
            da: da_id.to_string(),
            found: raw.len(),
        });
    }

    let aggregate = rank_units(&raw)?.with_scope(da_id);
    let normalized = rank_units(&theta)?.with_scope(da_id);
    let comparison = compare_rankings(&aggregate, &normalized)?;
    let area_sds: Vec<&str> = corpus
        .taxonomy
        .sds_in_area(da_id)
        .map(|e| e.sd_id.as_str())
        .filter(|sd| normalizer.pooled_intensity(sd).is_some())
        .collect();
    let degenerate_sds = normalizer
        .degenerate_sds()
        .into_iter()
        .filter(|sd| area_sds.contains(sd))
        .map(|s| s.to_string())
        .collect();
    Ok(DistortionReport {
        da_id: da_id.to_string(),
        n_sds: area_sds.len(),
        counting_mode: mode,
        aggregate,
        normalized,
        comparison,
        dropped_units,
        degenerate_sds,
    })
}
