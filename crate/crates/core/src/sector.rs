//! Public/private decomposition of national publication intensity.
//!
//! A country's publications per researcher is a researcher-weighted mix of
//! the two sectors:
//!
//! ```text
//! total_pi = s * public_pi + (1 - s) * private_pi        (s = public share)
//! ```
//!
//! The private intensity is calibrated once from a reference country whose
//! public/private split is known and assumed constant across countries; each
//! country's public intensity then follows by solving the same identity.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ranking::{rank_units, RankingError};

/// Allowed gap between a stated ratio and the one implied by the totals
/// (two-decimal rounding).
pub const RATIO_CONSISTENCY_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SectorError {
    #[error("public share {0} leaves no private sector to calibrate from")]
    NoPrivateSector(f64),
    #[error("public share must be positive")]
    ZeroPublicShare,
    #[error("public share {share} for {country:?} is outside (0, 1]")]
    ShareOutOfRange { country: String, share: f64 },
    #[error("reference country {0:?} not among the records")]
    MissingReference(String),
    #[error("private intensity must be non-negative, got {0}")]
    NegativePrivateIntensity(f64),
    #[error("{country:?}: stated ratio {stated} disagrees with totals ({implied})")]
    InconsistentTotals {
        country: String,
        stated: f64,
        implied: f64,
    },
    #[error("classified counts need a positive number of private researchers")]
    NoPrivateResearchers,
    #[error(transparent)]
    Ranking(#[from] RankingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorWarning {
    /// The algebra produced a negative intensity (usually input rounding).
    NegativeIntensity,
    /// A negative public intensity was clamped to zero.
    ClampedToZero,
}

/// A computed intensity together with its unclamped algebraic value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub unclamped: f64,
    pub warning: Option<SectorWarning>,
}

/// Private-sector intensity implied by a country's total and public
/// intensities. Negative results are returned as-is with a warning.
pub fn implied_private_intensity(
    total_pi: f64,
    public_share: f64,
    public_pi: f64,
) -> Result<Estimate, SectorError> {
    if public_share >= 1.0 {
        return Err(SectorError::NoPrivateSector(public_share));
    }
    if public_share <= 0.0 {
        return Err(SectorError::ZeroPublicShare);
    }
    let value = (total_pi - public_share * public_pi) / (1.0 - public_share);
    Ok(Estimate {
        value,
        unclamped: value,
        warning: (value < 0.0).then_some(SectorWarning::NegativeIntensity),
    })
}

/// Public-sector intensity once the private sector's estimated output is
/// removed. Negative results are clamped to zero with a warning.
pub fn public_sector_intensity(
    total_pi: f64,
    public_share: f64,
    private_intensity: f64,
) -> Result<Estimate, SectorError> {
    if public_share <= 0.0 {
        return Err(SectorError::ZeroPublicShare);
    }
    if public_share > 1.0 {
        return Err(SectorError::ShareOutOfRange {
            country: String::new(),
            share: public_share,
        });
    }
    if private_intensity < 0.0 {
        return Err(SectorError::NegativePrivateIntensity(private_intensity));
    }
    let unclamped = (total_pi - (1.0 - public_share) * private_intensity) / public_share;
    Ok(if unclamped < 0.0 {
        Estimate {
            value: 0.0,
            unclamped,
            warning: Some(SectorWarning::ClampedToZero),
        }
    } else {
        Estimate {
            value: unclamped,
            unclamped,
            warning: None,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryRecord {
    pub country_id: String,
    pub publications_per_researcher: f64,
    /// Fraction in (0, 1].
    pub public_share: f64,
    pub total_researchers: Option<u64>,
    pub total_publications: Option<u64>,
}

impl CountryRecord {
    pub fn new(
        country_id: impl Into<String>,
        publications_per_researcher: f64,
        public_share: f64,
    ) -> Self {
        CountryRecord {
            country_id: country_id.into(),
            publications_per_researcher,
            public_share,
            total_researchers: None,
            total_publications: None,
        }
    }

    pub fn check(&self) -> Result<(), SectorError> {
        if !(self.public_share > 0.0 && self.public_share <= 1.0) {
            return Err(SectorError::ShareOutOfRange {
                country: self.country_id.clone(),
                share: self.public_share,
            });
        }
        if let (Some(r), Some(p)) = (self.total_researchers, self.total_publications) {
            let implied = p as f64 / r as f64;
            if r == 0
                || (implied - self.publications_per_researcher).abs() > RATIO_CONSISTENCY_TOLERANCE
            {
                return Err(SectorError::InconsistentTotals {
                    country: self.country_id.clone(),
                    stated: self.publications_per_researcher,
                    implied,
                });
            }
        }
        Ok(())
    }
}

/// How the private-sector intensity is obtained from the reference country.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    /// The reference country's public-sector intensity is known.
    PublicIntensity(f64),
    /// Publications classified by sector, with the private headcount.
    ClassifiedCounts {
        private_publications: f64,
        private_researchers: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorResult {
    pub country_id: String,
    pub private_intensity_used: f64,
    /// Private publications per researcher of the whole country.
    pub estimated_private_share: f64,
    /// Absolute private publications, when the researcher total is known.
    pub estimated_private_publications: Option<f64>,
    pub public_intensity: f64,
    pub warning: Option<SectorWarning>,
    pub rank_total: usize,
    pub rank_public: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorTable {
    pub reference_country: String,
    pub private_intensity: Estimate,
    /// In input order.
    pub results: Vec<SectorResult>,
}

/// Calibrates the private intensity from the reference country and derives
/// every country's public-sector intensity and both rank orders.
pub fn sector_comparison_table(
    records: &[CountryRecord],
    reference_country: &str,
    calibration: Calibration,
) -> Result<SectorTable, SectorError> {
    for r in records {
        r.check()?;
    }
    let reference = records
        .iter()
        .find(|r| r.country_id == reference_country)
        .ok_or_else(|| SectorError::MissingReference(reference_country.to_string()))?;
    let private = match calibration {
        Calibration::PublicIntensity(public_pi) => implied_private_intensity(
            reference.publications_per_researcher,
            reference.public_share,
            public_pi,
        )?,
        Calibration::ClassifiedCounts {
            private_publications,
            private_researchers,
        } => {
            if private_researchers <= 0.0 {
                return Err(SectorError::NoPrivateResearchers);
            }
            let value = private_publications / private_researchers;
            Estimate {
                value,
                unclamped: value,
                warning: None,
            }
        }
    };
    // A negative calibration is reported but cannot be applied.
    let pi_used = private.value.max(0.0);

    let mut total = BTreeMap::new();
    let mut public = BTreeMap::new();
    let mut estimates = Vec::with_capacity(records.len());
    for r in records {
        let est = public_sector_intensity(r.publications_per_researcher, r.public_share, pi_used)?;
        total.insert(r.country_id.clone(), r.publications_per_researcher);
        public.insert(r.country_id.clone(), est.value);
        estimates.push(est);
    }
    let rank_total = rank_units(&total)?;
    let rank_public = rank_units(&public)?;

    let results = records
        .iter()
        .zip(estimates)
        .map(|(r, est)| {
            let share = (1.0 - r.public_share) * pi_used;
            SectorResult {
                country_id: r.country_id.clone(),
                private_intensity_used: pi_used,
                estimated_private_share: share,
                estimated_private_publications: r.total_researchers.map(|n| share * n as f64),
                public_intensity: est.value,
                warning: est.warning,
                rank_total: rank_total.rank_of(&r.country_id).unwrap_or(0),
                rank_public: rank_public.rank_of(&r.country_id).unwrap_or(0),
            }
        })
        .collect();
    Ok(SectorTable {
        reference_country: reference_country.to_string(),
        private_intensity: private,
        results,
    })
}
