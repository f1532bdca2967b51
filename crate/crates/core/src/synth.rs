//! Deterministic synthetic corpora.
//!
//! Generation is a pure function of the configuration. The only source of
//! randomness is [`SplitMix64`] seeded with `config.seed`, consumed in this
//! fixed order:
//!
//! 1. units in ascending `unit_id`, and within a unit its disciplines in
//!    ascending `sd_id`, skipping zero-staff cells;
//! 2. per cell, one Poisson draw for the publication count (mean
//!    `staff * fertility`);
//! 3. then, per publication in index order, one Poisson draw for its
//!    citations (mean `citations_per_publication`).
//!
//! With [`Noise::None`] no draws happen and both counts are the means
//! rounded half up. A Poisson draw with mean 0 consumes nothing. Researcher
//! `i` of a cell is `{unit}-{sd}-r{i}`; publication `j` is `{unit}-{sd}-p{j}`,
//! authored by researcher `j mod staff` and dated
//! `period.0 + j mod (period.1 - period.0 + 1)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Publication, Researcher, SdEntry, Sector, Taxonomy};

/// SplitMix64 (Steele, Lea and Flood, 2014).
///
/// ```text
/// state += 0x9E3779B97F4A7C15
/// z = state
/// z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
/// z = (z ^ (z >> 27)) * 0x94D049BB133111EB
/// return z ^ (z >> 31)
/// ```
///
/// All arithmetic wraps modulo 2^64.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    pub const MIX1: u64 = 0xBF58_476D_1CE4_E5B9;
    pub const MIX2: u64 = 0x94D0_49BB_1331_11EB;

    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(Self::MIX1);
        z = (z ^ (z >> 27)).wrapping_mul(Self::MIX2);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1): the top 53 bits scaled by 2^-53.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Poisson variate by sequential CDF inversion, one uniform per chunk.
    /// Means above [`POISSON_CHUNK`] are split into `ceil(mean / POISSON_CHUNK)`
    /// equal chunks whose draws are summed.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        let chunks = libm::ceil(mean / POISSON_CHUNK) as u64;
        let part = mean / chunks as f64;
        // Guards against rounding leaving the running CDF just below u.
        let limit = (part * 20.0) as u64 + 100;
        let mut total = 0;
        for _ in 0..chunks {
            let u = self.next_f64();
            let mut k = 0u64;
            let mut p = libm::exp(-part);
            let mut cdf = p;
            while u > cdf && k < limit {
                k += 1;
                p *= part / k as f64;
                cdf += p;
            }
            total += k;
        }
        total
    }
}

/// Largest mean handled by a single inversion.
pub const POISSON_CHUNK: f64 = 500.0;

/// Round half up, for non-negative values.
pub fn round_half_up(x: f64) -> u64 {
    libm::floor(x + 0.5) as u64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    #[default]
    None,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSd {
    pub sd_id: String,
    pub da_id: String,
    /// Expected publications per researcher over the period.
    pub fertility: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub da_name: Option<String>,
}

impl SynthSd {
    pub fn new(sd_id: &str, da_id: &str, fertility: f64) -> Self {
        SynthSd {
            sd_id: sd_id.to_string(),
            da_id: da_id.to_string(),
            fertility,
            sd_name: None,
            da_name: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthUnit {
    pub unit_id: String,
    pub staff_by_sd: BTreeMap<String, u64>,
}

impl SynthUnit {
    pub fn new(unit_id: &str, staff: &[(&str, u64)]) -> Self {
        SynthUnit {
            unit_id: unit_id.to_string(),
            staff_by_sd: staff.iter().map(|(s, n)| (s.to_string(), *n)).collect(),
        }
    }
}

fn default_period() -> (i32, i32) {
    (2001, 2003)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub sds: Vec<SynthSd>,
    pub units: Vec<SynthUnit>,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub citations_per_publication: f64,
    #[serde(default = "default_period")]
    pub period: (i32, i32),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("discipline {0:?} has a negative or non-finite fertility")]
    InvalidFertility(String),
    #[error("discipline {0:?} is defined twice")]
    DuplicateSd(String),
    #[error("unit {0:?} is defined twice")]
    DuplicateUnit(String),
    #[error("unit {unit:?} staffs unknown discipline {sd:?}")]
    UnknownSd { unit: String, sd: String },
    #[error("no unit has any staff")]
    NoStaff,
    #[error("citation mean must be non-negative and finite")]
    InvalidCitationMean,
    #[error("period {0}..{1} is empty")]
    InvalidPeriod(i32, i32),
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let mut seen = BTreeMap::new();
        for sd in &self.sds {
            if !(sd.fertility >= 0.0 && sd.fertility.is_finite()) {
                return Err(SynthError::InvalidFertility(sd.sd_id.clone()));
            }
            if seen.insert(sd.sd_id.as_str(), ()).is_some() {
                return Err(SynthError::DuplicateSd(sd.sd_id.clone()));
            }
        }
        let mut units = BTreeMap::new();
        let mut any_staff = false;
        for u in &self.units {
            if units.insert(u.unit_id.as_str(), ()).is_some() {
                return Err(SynthError::DuplicateUnit(u.unit_id.clone()));
            }
            for (sd, n) in &u.staff_by_sd {
                if !seen.contains_key(sd.as_str()) {
                    return Err(SynthError::UnknownSd {
                        unit: u.unit_id.clone(),
                        sd: sd.clone(),
                    });
                }
                any_staff |= *n > 0;
            }
        }
        if !any_staff {
            return Err(SynthError::NoStaff);
        }
        if !(self.citations_per_publication >= 0.0 && self.citations_per_publication.is_finite()) {
            return Err(SynthError::InvalidCitationMean);
        }
        if self.period.0 > self.period.1 {
            return Err(SynthError::InvalidPeriod(self.period.0, self.period.1));
        }
        Ok(())
    }

    /// Eight areas with four disciplines each whose fertilities are the
    /// minimum, median, mean and maximum of the Italian 2001-2003 discipline
    /// intensities per area, and twelve units with staff drawn from `seed`:
    /// each unit concentrates six times the staff in one discipline per area,
    /// rotating across units. Poisson noise.
    pub fn heterogeneous(seed: u64) -> Self {
        const AREAS: [(&str, &str, [f64; 4]); 8] = [
            ("DA1", "Mathematical sciences", [0.085, 0.317, 0.316, 0.506]),
            ("DA2", "Physical sciences", [0.205, 1.001, 1.046, 1.699]),
            ("DA3", "Chemical sciences", [0.742, 1.394, 1.322, 2.143]),
            ("DA4", "Earth sciences", [0.127, 0.452, 0.499, 0.922]),
            ("DA5", "Biological sciences", [0.205, 0.858, 0.813, 1.379]),
            ("DA6", "Medical sciences", [0.086, 0.724, 0.758, 1.978]),
            (
                "DA7",
                "Agricultural and veterinary sciences",
                [0.033, 0.339, 0.363, 0.657],
            ),
            (
                "DA8",
                "Industrial and information engineering",
                [0.030, 0.309, 0.468, 1.172],
            ),
        ];
        let mut sds = Vec::new();
        for (da, name, fert) in AREAS {
            for (k, f) in fert.iter().enumerate() {
                let mut sd = SynthSd::new(&format!("{da}-SD{}", k + 1), da, *f);
                sd.da_name = Some(name.to_string());
                sds.push(sd);
            }
        }
        let mut rng = SplitMix64::new(!seed);
        let units = (0..12usize)
            .map(|u| {
                let mut staff_by_sd = BTreeMap::new();
                for (d, (da, _, _)) in AREAS.iter().enumerate() {
                    for k in 0..4usize {
                        let base = 2 + rng.next_u64() % 9;
                        let staff = if k == (u + d) % 4 { base * 6 } else { base };
                        staff_by_sd.insert(format!("{da}-SD{}", k + 1), staff);
                    }
                }
                SynthUnit {
                    unit_id: format!("U{:02}", u + 1),
                    staff_by_sd,
                }
            })
            .collect();
        SynthConfig {
            seed,
            sds,
            units,
            noise: Noise::Poisson,
            citations_per_publication: 5.0,
            period: default_period(),
        }
    }

    /// Two units over mathematics (fertility 0.33) and chemistry (1.31),
    /// both placed in one area: A has 30 + 70 researchers, B 105 + 45.
    pub fn ab_scenario() -> Self {
        let mut mat = SynthSd::new("MAT", "MC", 0.33);
        mat.sd_name = Some("Mathematical sciences".into());
        mat.da_name = Some("Mathematical and chemical sciences".into());
        let mut che = SynthSd::new("CHE", "MC", 1.31);
        che.sd_name = Some("Chemical sciences".into());
        che.da_name = mat.da_name.clone();
        SynthConfig {
            seed: 0,
            sds: vec![mat, che],
            units: vec![
                SynthUnit::new("A", &[("MAT", 30), ("CHE", 70)]),
                SynthUnit::new("B", &[("MAT", 105), ("CHE", 45)]),
            ],
            noise: Noise::None,
            citations_per_publication: 0.0,
            period: default_period(),
        }
    }
}

/// Builds the corpus described by `config`.
pub fn generate_corpus(config: &SynthConfig) -> Result<Corpus, SynthError> {
    config.validate()?;
    let taxonomy = Taxonomy::new(
        config
            .sds
            .iter()
            .map(|s| SdEntry {
                sd_id: s.sd_id.clone(),
                sd_name: s.sd_name.clone().unwrap_or_else(|| s.sd_id.clone()),
                da_id: s.da_id.clone(),
                da_name: s.da_name.clone().unwrap_or_else(|| s.da_id.clone()),
            })
            .collect(),
    );
    let fertility: BTreeMap<&str, f64> = config
        .sds
        .iter()
        .map(|s| (s.sd_id.as_str(), s.fertility))
        .collect();
    let mut units: Vec<&SynthUnit> = config.units.iter().collect();
    units.sort_by(|a, b| a.unit_id.cmp(&b.unit_id));

    let span = (config.period.1 - config.period.0 + 1) as u64;
    let mut rng = SplitMix64::new(config.seed);
    let mut researchers = Vec::new();
    let mut publications = Vec::new();
    for unit in units {
        for (sd, &staff) in &unit.staff_by_sd {
            if staff == 0 {
                continue;
            }
            let prefix = format!("{}-{}", unit.unit_id, sd);
            for i in 0..staff {
                researchers.push(Researcher {
                    researcher_id: format!("{prefix}-r{i}"),
                    unit_id: unit.unit_id.clone(),
                    sd_id: sd.clone(),
                    sector: Sector::Public,
                });
            }
            let mean = staff as f64 * fertility[sd.as_str()];
            let count = match config.noise {
                Noise::None => round_half_up(mean),
                Noise::Poisson => rng.poisson(mean),
            };
            for j in 0..count {
                let citations = match config.noise {
                    Noise::None => round_half_up(config.citations_per_publication),
                    Noise::Poisson => rng.poisson(config.citations_per_publication),
                };
                publications.push(Publication {
                    pub_id: format!("{prefix}-p{j}"),
                    year: config.period.0 + (j % span) as i32,
                    sd_id: sd.clone(),
                    citations,
                    author_links: vec![format!("{prefix}-r{}", j % staff)],
                });
            }
        }
    }
    Ok(Corpus::from_parts(taxonomy, researchers, publications)
        .with_period(config.period.0, config.period.1))
}

/// The two-unit mathematics/chemistry corpus where aggregate counts favour
/// the chemistry-heavy unit.
pub fn ab_scenario() -> Corpus {
    generate_corpus(&SynthConfig::ab_scenario()).expect("built-in scenario is valid")
}
