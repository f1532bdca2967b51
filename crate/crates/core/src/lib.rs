//! Field-normalized research performance indicators.
//!
//! The crate covers the whole computational pipeline and nothing else:
//!
//! - [`corpus`]: taxonomy (scientific disciplines grouped into disciplinary
//!   areas), researcher rosters and publication records, plus row-level
//!   assembly and validation.
//! - [`indicators`]: publication intensity at discipline and area level,
//!   distribution statistics and the staff-weighted normalized area
//!   indicator (theta).
//! - [`ranking`]: competition ranking and rank-variation statistics between
//!   an aggregate and a normalized ranking.
//! - [`sector`]: public/private decomposition of national publication
//!   intensity.
//! - [`synth`]: deterministic synthetic corpora.
//!
//! It is `no_std` (with `alloc`); file formats and the command-line surface
//! live in the companion `fieldnorm` crate.

#![no_std]

extern crate alloc;

pub mod corpus;
pub mod indicators;
pub mod ranking;
pub mod sector;
pub mod stats;
pub mod synth;

pub use corpus::{
    coverage_ratio, validate_corpus, Corpus, LoadError, LoadOptions, Publication, Researcher,
    SdEntry, Sector, Taxonomy, ValidationReport,
};
pub use indicators::{CountingMode, IntensityTable, Scope};
pub use ranking::{compare_rankings, rank_units, RankComparison, Ranking};
pub use stats::DistributionStats;
