//! Publication intensity and field normalization.
//!
//! Intensity is publications per researcher over the corpus period. Raw
//! intensity at area level mixes disciplines of very different fertility;
//! the normalized area indicator divides each discipline-level intensity by
//! the pooled intensity of that discipline across all units and then takes
//! the staff-weighted mean over the area:
//!
//! ```text
//! pqcn(k, i)  = PI(k, i) / pooledPI(i)
//! theta(k, j) = sum_i pqcn(k, i) * staff(k, i) / sum_i staff(k, i)    (i in area j)
//! ```
//!
//! `pooledPI(i)` is total credited publications over total researchers in
//! discipline `i`, so the staff-weighted mean of `pqcn` over all units of a
//! discipline is exactly one.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::stats::{DistributionStats, StatsError};

/// Unit id used for cells pooled over all units.
pub const POOLED_UNIT: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Sd,
    Da,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Sd => "sd",
            Scope::Da => "da",
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a publication is credited to the units of its authors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountingMode {
    /// One full publication to every unit with at least one author on it.
    #[default]
    Whole,
    /// Each unit gets the share of authors it contributed.
    Fractional,
    /// Substitute quality/ownership indicator: the fractional share scaled by
    /// `(1 + citations) / (1 + mean citations of the discipline)`. It is not
    /// the composite indicator of the original Italian study.
    QualityWeighted,
}

impl CountingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CountingMode::Whole => "whole",
            CountingMode::Fractional => "fractional",
            CountingMode::QualityWeighted => "quality_weighted",
        }
    }
}

impl fmt::Display for CountingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndicatorError {
    #[error("unit {unit:?} has no researchers in {scope:?}")]
    MissingCell { unit: String, scope: String },
    #[error("discipline {0:?} has zero pooled publications")]
    DegenerateSd(String),
    #[error("unit {unit:?} has no researchers in area {da:?}")]
    MissingUnit { unit: String, da: String },
    #[error(
        "unit {unit:?} occupies only disciplines with zero pooled publications in area {da:?}"
    )]
    DegenerateArea { unit: String, da: String },
    #[error("{0:?} is neither a discipline nor an area of the taxonomy")]
    UnknownScope(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityCell {
    pub unit_id: String,
    pub scope_id: String,
    pub researcher_count: u64,
    pub publication_count: f64,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityTable {
    pub scope: Scope,
    pub counting_mode: CountingMode,
    /// Sorted by (unit_id, scope_id); only cells with researchers.
    pub cells: Vec<IntensityCell>,
    pub period: Option<(i32, i32)>,
}

impl IntensityTable {
    pub fn get(&self, unit_id: &str, scope_id: &str) -> Option<&IntensityCell> {
        self.cells
            .binary_search_by(|c| {
                (c.unit_id.as_str(), c.scope_id.as_str()).cmp(&(unit_id, scope_id))
            })
            .ok()
            .map(|i| &self.cells[i])
    }

    /// Cells of one scope id, in unit order.
    pub fn scope_cells<'a>(
        &'a self,
        scope_id: &'a str,
    ) -> impl Iterator<Item = &'a IntensityCell> + 'a {
        self.cells.iter().filter(move |c| c.scope_id == scope_id)
    }
}

type CellKey = (String, String);

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Tally {
    staff: u64,
    pubs: f64,
}

/// Researcher counts and credited publications per (unit, discipline),
/// including cells without staff (credits from authors outside the
/// publication's discipline).
fn sd_tallies(corpus: &Corpus, mode: CountingMode) -> BTreeMap<CellKey, Tally> {
    let mut tallies: BTreeMap<CellKey, Tally> = BTreeMap::new();
    for r in corpus.researchers() {
        tallies
            .entry((r.unit_id.clone(), r.sd_id.clone()))
            .or_default()
            .staff += 1;
    }

    let mean_citations = if mode == CountingMode::QualityWeighted {
        let mut sums: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
        for p in corpus.publications() {
            let e = sums.entry(p.sd_id.as_str()).or_default();
            e.0 += p.citations;
            e.1 += 1;
        }
        sums.into_iter()
            .map(|(sd, (c, n))| (sd, c as f64 / n as f64))
            .collect()
    } else {
        BTreeMap::new()
    };

    for p in corpus.publications() {
        let mut per_unit: BTreeMap<&str, u64> = BTreeMap::new();
        for a in &p.author_links {
            if let Some(r) = corpus.researcher(a) {
                *per_unit.entry(r.unit_id.as_str()).or_insert(0) += 1;
            }
        }
        let total = p.author_links.len() as f64;
        let quality = match mode {
            CountingMode::QualityWeighted => {
                let mean = mean_citations.get(p.sd_id.as_str()).copied().unwrap_or(0.0);
                (1.0 + p.citations as f64) / (1.0 + mean)
            }
            _ => 1.0,
        };
        for (unit, n) in per_unit {
            let credit = match mode {
                CountingMode::Whole => 1.0,
                CountingMode::Fractional => n as f64 / total,
                CountingMode::QualityWeighted => quality * (n as f64 / total),
            };
            tallies
                .entry((unit.to_string(), p.sd_id.clone()))
                .or_default()
                .pubs += credit;
        }
    }
    tallies
}

fn cell(unit_id: String, scope_id: String, t: Tally) -> IntensityCell {
    IntensityCell {
        unit_id,
        scope_id,
        researcher_count: t.staff,
        publication_count: t.pubs,
        intensity: t.pubs / t.staff as f64,
    }
}

/// Per-unit intensity at discipline or area level.
///
/// A publication is credited within its own discipline (and that
/// discipline's area). Cells of units without researchers in the scope are
/// not emitted.
pub fn intensity_table(corpus: &Corpus, scope: Scope, mode: CountingMode) -> IntensityTable {
    let tallies = sd_tallies(corpus, mode);
    let cells = match scope {
        Scope::Sd => tallies
            .into_iter()
            .filter(|(_, t)| t.staff > 0)
            .map(|((u, s), t)| cell(u, s, t))
            .collect(),
        Scope::Da => {
            let mut by_area: BTreeMap<CellKey, Tally> = BTreeMap::new();
            for ((unit, sd), t) in tallies {
                if let Some(da) = corpus.taxonomy.da_of(&sd) {
                    let e = by_area.entry((unit, da.to_string())).or_default();
                    e.staff += t.staff;
                    e.pubs += t.pubs;
                }
            }
            by_area
                .into_iter()
                .filter(|(_, t)| t.staff > 0)
                .map(|((u, d), t)| cell(u, d, t))
                .collect()
        }
    };
    IntensityTable {
        scope,
        counting_mode: mode,
        cells,
        period: corpus.period(),
    }
}

/// Intensity pooled over all units, one cell per scope id, with
/// [`POOLED_UNIT`] as the unit id.
pub fn pooled_table(corpus: &Corpus, scope: Scope, mode: CountingMode) -> IntensityTable {
    let per_unit = intensity_table(corpus, scope, mode);
    let mut pooled: BTreeMap<String, Tally> = BTreeMap::new();
    for c in &per_unit.cells {
        let e = pooled.entry(c.scope_id.clone()).or_default();
        e.staff += c.researcher_count;
        e.pubs += c.publication_count;
    }
    IntensityTable {
        scope,
        counting_mode: mode,
        cells: pooled
            .into_iter()
            .map(|(s, t)| cell(POOLED_UNIT.to_string(), s, t))
            .collect(),
        period: per_unit.period,
    }
}

/// Distribution of pooled discipline intensities within one area.
///
/// `sd_table` must be a discipline-scope pooled table (see [`pooled_table`]).
pub fn sd_distribution_stats(
    sd_table: &IntensityTable,
    taxonomy: &crate::corpus::Taxonomy,
    da_id: &str,
) -> Result<DistributionStats, IndicatorError> {
    let values: Vec<f64> = taxonomy
        .sds_in_area(da_id)
        .filter_map(|e| sd_table.get(POOLED_UNIT, &e.sd_id))
        .map(|c| c.intensity)
        .collect();
    Ok(DistributionStats::from_values(da_id, &values)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdContribution {
    pub sd_id: String,
    pub pqcn: f64,
    pub staff: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedAreaIntensity {
    pub unit_id: String,
    pub da_id: String,
    pub theta: f64,
    pub contributions: Vec<SdContribution>,
}

/// Precomputed discipline tallies for repeated normalization queries on one
/// corpus and counting mode.
#[derive(Debug, Clone)]
pub struct FieldNormalizer<'a> {
    corpus: &'a Corpus,
    mode: CountingMode,
    cells: BTreeMap<CellKey, Tally>,
    pooled: BTreeMap<String, Tally>,
}

impl<'a> FieldNormalizer<'a> {
    pub fn new(corpus: &'a Corpus, mode: CountingMode) -> Self {
        let cells: BTreeMap<CellKey, Tally> = sd_tallies(corpus, mode)
            .into_iter()
            .filter(|(_, t)| t.staff > 0)
            .collect();
        let mut pooled: BTreeMap<String, Tally> = BTreeMap::new();
        for ((_, sd), t) in &cells {
            let e = pooled.entry(sd.clone()).or_default();
            e.staff += t.staff;
            e.pubs += t.pubs;
        }
        FieldNormalizer {
            corpus,
            mode,
            cells,
            pooled,
        }
    }

    pub fn counting_mode(&self) -> CountingMode {
        self.mode
    }

    pub fn pooled_intensity(&self, sd_id: &str) -> Option<f64> {
        self.pooled.get(sd_id).map(|t| t.pubs / t.staff as f64)
    }

    /// Staffed disciplines with zero pooled publications; they are left out
    /// of every normalization.
    pub fn degenerate_sds(&self) -> Vec<&str> {
        self.pooled
            .iter()
            .filter(|(_, t)| t.pubs == 0.0)
            .map(|(sd, _)| sd.as_str())
            .collect()
    }

    /// Units with researchers in the discipline, ascending.
    pub fn units_in_sd(&self, sd_id: &str) -> Vec<&str> {
        self.cells
            .keys()
            .filter(|(_, s)| s == sd_id)
            .map(|(u, _)| u.as_str())
            .collect()
    }

    /// Units with researchers in any discipline of the area, ascending.
    pub fn units_in_area(&self, da_id: &str) -> Vec<&str> {
        let mut units: Vec<&str> = self
            .cells
            .keys()
            .filter(|(_, s)| self.corpus.taxonomy.da_of(s) == Some(da_id))
            .map(|(u, _)| u.as_str())
            .collect();
        units.dedup();
        units
    }

    pub fn staff(&self, unit_id: &str, sd_id: &str) -> u64 {
        self.cells
            .get(&(unit_id.to_string(), sd_id.to_string()))
            .map_or(0, |t| t.staff)
    }

    /// Unit intensity in a discipline relative to the discipline's pooled
    /// intensity.
    pub fn pqcn(&self, unit_id: &str, sd_id: &str) -> Result<f64, IndicatorError> {
        let cell = self
            .cells
            .get(&(unit_id.to_string(), sd_id.to_string()))
            .ok_or_else(|| IndicatorError::MissingCell {
                unit: unit_id.to_string(),
                scope: sd_id.to_string(),
            })?;
        let pool = self.pooled[sd_id];
        if pool.pubs == 0.0 {
            return Err(IndicatorError::DegenerateSd(sd_id.to_string()));
        }
        // Cross-multiplied so that scaling every count of the discipline by an
        // integer factor scales numerator and denominator exactly.
        Ok((cell.pubs * pool.staff as f64) / (cell.staff as f64 * pool.pubs))
    }

    /// Staff-weighted mean of normalized discipline intensities over the
    /// unit's disciplines in the area.
    pub fn theta(
        &self,
        unit_id: &str,
        da_id: &str,
    ) -> Result<NormalizedAreaIntensity, IndicatorError> {
        let mut contributions = Vec::new();
        let mut occupied = false;
        for e in self.corpus.taxonomy.sds_in_area(da_id) {
            let staff = self.staff(unit_id, &e.sd_id);
            if staff == 0 {
                continue;
            }
            occupied = true;
            match self.pqcn(unit_id, &e.sd_id) {
                Ok(pqcn) => contributions.push(SdContribution {
                    sd_id: e.sd_id.clone(),
                    pqcn,
                    staff,
                }),
                Err(IndicatorError::DegenerateSd(_)) => {}
                Err(err) => return Err(err),
            }
        }
        if !occupied {
            return Err(IndicatorError::MissingUnit {
                unit: unit_id.to_string(),
                da: da_id.to_string(),
            });
        }
        if contributions.is_empty() {
            return Err(IndicatorError::DegenerateArea {
                unit: unit_id.to_string(),
                da: da_id.to_string(),
            });
        }
        let weighted: f64 = contributions.iter().map(|c| c.pqcn * c.staff as f64).sum();
        let staff: u64 = contributions.iter().map(|c| c.staff).sum();
        Ok(NormalizedAreaIntensity {
            unit_id: unit_id.to_string(),
            da_id: da_id.to_string(),
            theta: weighted / staff as f64,
            contributions,
        })
    }
}

/// Normalized intensity of one unit in one discipline.
pub fn normalized_sd_intensity(
    corpus: &Corpus,
    unit_id: &str,
    sd_id: &str,
    mode: CountingMode,
) -> Result<f64, IndicatorError> {
    FieldNormalizer::new(corpus, mode).pqcn(unit_id, sd_id)
}

/// Normalized, staff-weighted area intensity of one unit.
pub fn area_normalized_intensity(
    corpus: &Corpus,
    unit_id: &str,
    da_id: &str,
    mode: CountingMode,
) -> Result<NormalizedAreaIntensity, IndicatorError> {
    FieldNormalizer::new(corpus, mode).theta(unit_id, da_id)
}

/// Substitute quality/ownership intensity of a unit in a discipline or area:
/// citation-weighted, author-share publication credit per researcher.
pub fn quality_ownership_intensity(
    corpus: &Corpus,
    unit_id: &str,
    scope_id: &str,
) -> Result<f64, IndicatorError> {
    let scope = if corpus.taxonomy.contains_sd(scope_id) {
        Scope::Sd
    } else if corpus.taxonomy.contains_da(scope_id) {
        Scope::Da
    } else {
        return Err(IndicatorError::UnknownScope(scope_id.to_string()));
    };
    let table = intensity_table(corpus, scope, CountingMode::QualityWeighted);
    table
        .get(unit_id, scope_id)
        .map(|c| c.intensity)
        .ok_or_else(|| IndicatorError::MissingCell {
            unit: unit_id.to_string(),
            scope: scope_id.to_string(),
        })
}
