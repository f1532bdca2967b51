//! Domain model for taxonomies, rosters and publication records.
//!
//! A [`Corpus`] is built either from parsed file rows via [`assemble_corpus`],
//! which rejects malformed or dangling rows with their row numbers, or
//! directly via [`Corpus::from_parts`], which accepts anything and leaves the
//! checks to [`validate_corpus`]. Both paths canonicalize ordering, so the
//! order of input rows never affects a later result.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default minimum share of indexed output for an area to be analysed.
pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.90;

/// One scientific discipline and the disciplinary area it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SdEntry {
    pub sd_id: String,
    pub sd_name: String,
    pub da_id: String,
    pub da_name: String,
}

/// Disciplines grouped into areas, kept sorted by `sd_id`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    entries: Vec<SdEntry>,
}

impl Taxonomy {
    pub fn new(mut entries: Vec<SdEntry>) -> Self {
        entries.sort();
        Taxonomy { entries }
    }

    pub fn entries(&self) -> &[SdEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, sd_id: &str) -> Option<&SdEntry> {
        self.entries
            .binary_search_by(|e| e.sd_id.as_str().cmp(sd_id))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn contains_sd(&self, sd_id: &str) -> bool {
        self.get(sd_id).is_some()
    }

    pub fn contains_da(&self, da_id: &str) -> bool {
        self.entries.iter().any(|e| e.da_id == da_id)
    }

    /// Area of a discipline.
    pub fn da_of(&self, sd_id: &str) -> Option<&str> {
        self.get(sd_id).map(|e| e.da_id.as_str())
    }

    /// Area ids in ascending order.
    pub fn areas(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.entries.iter().map(|e| e.da_id.as_str()).collect();
        set.into_iter().collect()
    }

    pub fn da_name(&self, da_id: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.da_id == da_id)
            .map(|e| e.da_name.as_str())
    }

    /// Disciplines of an area in ascending `sd_id` order.
    pub fn sds_in_area<'a>(&'a self, da_id: &'a str) -> impl Iterator<Item = &'a SdEntry> + 'a {
        self.entries.iter().filter(move |e| e.da_id == da_id)
    }
}

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    #[default]
    Public,
    Private,
}

impl Sector {
    pub fn parse(s: &str) -> Option<Sector> {
        match s.trim().to_ascii_lowercase().as_str() {
            "public" => Some(Sector::Public),
            "private" => Some(Sector::Private),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sector::Public => "public",
            Sector::Private => "private",
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Researcher {
    pub researcher_id: String,
    /// University or country.
    pub unit_id: String,
    pub sd_id: String,
    #[serde(default)]
    pub sector: Sector,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Publication {
    pub pub_id: String,
    pub year: i32,
    pub sd_id: String,
    pub citations: u64,
    /// Researcher ids, sorted and deduplicated.
    pub author_links: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub taxonomy: Taxonomy,
    researchers: Vec<Researcher>,
    publications: Vec<Publication>,
    period: Option<(i32, i32)>,
}

impl Corpus {
    /// Builds a corpus without any referential checks. Researchers and
    /// publications are sorted by id and author links are deduplicated.
    pub fn from_parts(
        taxonomy: Taxonomy,
        mut researchers: Vec<Researcher>,
        mut publications: Vec<Publication>,
    ) -> Self {
        researchers.sort();
        for p in &mut publications {
            p.author_links.sort();
            p.author_links.dedup();
        }
        publications.sort();
        Corpus {
            taxonomy,
            researchers,
            publications,
            period: None,
        }
    }

    /// Pins the reporting period instead of deriving it from publication years.
    pub fn with_period(mut self, from: i32, to: i32) -> Self {
        self.period = Some((from, to));
        self
    }

    pub fn researchers(&self) -> &[Researcher] {
        &self.researchers
    }

    pub fn publications(&self) -> &[Publication] {
        &self.publications
    }

    pub fn researcher(&self, researcher_id: &str) -> Option<&Researcher> {
        self.researchers
            .binary_search_by(|r| r.researcher_id.as_str().cmp(researcher_id))
            .ok()
            .map(|i| &self.researchers[i])
    }

    /// (disciplines, researchers, publications)
    pub fn counts(&self) -> (usize, usize, usize) {
        (
            self.taxonomy.entries().len(),
            self.researchers.len(),
            self.publications.len(),
        )
    }

    /// Unit ids in ascending order.
    pub fn unit_ids(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self
            .researchers
            .iter()
            .map(|r| r.unit_id.as_str())
            .collect();
        set.into_iter().collect()
    }

    /// Inclusive year range: the pinned period if any, otherwise the span of
    /// publication years.
    pub fn period(&self) -> Option<(i32, i32)> {
        if self.period.is_some() {
            return self.period;
        }
        let min = self.publications.iter().map(|p| p.year).min()?;
        let max = self.publications.iter().map(|p| p.year).max()?;
        Some((min, max))
    }

    /// Researcher headcount per disciplinary area.
    pub fn staff_by_da(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for r in &self.researchers {
            if let Some(da) = self.taxonomy.da_of(&r.sd_id) {
                *out.entry(da.to_string()).or_insert(0) += 1;
            }
        }
        out
    }

    /// Publication count per disciplinary area.
    pub fn publications_by_da(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for p in &self.publications {
            if let Some(da) = self.taxonomy.da_of(&p.sd_id) {
                *out.entry(da.to_string()).or_insert(0) += 1;
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Row assembly

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SourceKind {
    Taxonomy,
    Researchers,
    Publications,
    Authorships,
}

impl SourceKind {
    pub fn file_name(self) -> &'static str {
        match self {
            SourceKind::Taxonomy => "taxonomy.csv",
            SourceKind::Researchers => "researchers.csv",
            SourceKind::Publications => "publications.csv",
            SourceKind::Authorships => "authorships.csv",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaxonomyRow {
    pub sd_id: String,
    pub sd_name: String,
    pub da_id: String,
    pub da_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResearcherRow {
    pub researcher_id: String,
    pub unit_id: String,
    pub sd_id: String,
    /// `None` when the column is absent or empty; defaults to public.
    pub sector: Option<Sector>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicationRow {
    pub pub_id: String,
    pub year: i32,
    /// `None` means: derive from the authors' disciplines.
    pub sd_id: Option<String>,
    pub citations: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthorshipRow {
    pub pub_id: String,
    pub researcher_id: String,
}

/// A parsed record with its 1-based line number in the source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Numbered<T> {
    pub row: usize,
    pub record: T,
}

impl<T> Numbered<T> {
    pub fn new(row: usize, record: T) -> Self {
        Numbered { row, record }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RawSources {
    pub taxonomy: Vec<Numbered<TaxonomyRow>>,
    pub researchers: Vec<Numbered<ResearcherRow>>,
    pub publications: Vec<Numbered<PublicationRow>>,
    pub authorships: Vec<Numbered<AuthorshipRow>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Inclusive publication year range; publications outside are dropped.
    pub years: Option<(i32, i32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadIssueKind {
    #[error("malformed row: {0}")]
    Malformed(String),
    #[error("duplicate sd_id {0:?}")]
    DuplicateSdId(String),
    #[error("duplicate researcher_id {0:?}")]
    DuplicateResearcherId(String),
    #[error("duplicate pub_id {0:?}")]
    DuplicatePubId(String),
    #[error("unknown sd_id {0:?}")]
    UnknownSd(String),
    #[error("unknown researcher_id {0:?}")]
    UnknownResearcher(String),
    #[error("unknown pub_id {0:?}")]
    UnknownPublication(String),
    #[error("cannot derive sd_id for publication {0:?}: no resolvable authors")]
    UnresolvedSd(String),
}

impl LoadIssueKind {
    /// Stable upper-case code, shared with [`IssueCode`] where they overlap.
    pub fn code(&self) -> &'static str {
        match self {
            LoadIssueKind::Malformed(_) => "MALFORMED_ROW",
            LoadIssueKind::DuplicateSdId(_) => "DUP_SD_ID",
            LoadIssueKind::DuplicateResearcherId(_) => "DUP_RESEARCHER_ID",
            LoadIssueKind::DuplicatePubId(_) => "DUP_PUB_ID",
            LoadIssueKind::UnknownSd(_) => "UNKNOWN_SD",
            LoadIssueKind::UnknownResearcher(_) => "UNKNOWN_RESEARCHER",
            LoadIssueKind::UnknownPublication(_) => "UNKNOWN_PUB",
            LoadIssueKind::UnresolvedSd(_) => "UNRESOLVED_SD",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{file} row {row}: {kind}")]
pub struct LoadIssue {
    pub file: SourceKind,
    pub row: usize,
    pub kind: LoadIssueKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct LoadError {
    pub issues: Vec<LoadIssue>,
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.issues.first() {
            Some(first) if self.issues.len() == 1 => write!(f, "{first}"),
            Some(first) => write!(f, "{first} (and {} more)", self.issues.len() - 1),
            None => f.write_str("load failed"),
        }
    }
}

/// Resolves parsed rows into a [`Corpus`].
///
/// Every issue found is collected before failing, so a single run reports
/// all bad rows. Publications without an `sd_id` take the discipline held by
/// most of their authors, ties going to the smallest `sd_id`.
pub fn assemble_corpus(sources: RawSources, options: &LoadOptions) -> Result<Corpus, LoadError> {
    let mut issues = Vec::new();
    let issue = |file, row, kind| LoadIssue { file, row, kind };

    let mut sds: BTreeMap<String, SdEntry> = BTreeMap::new();
    for Numbered { row, record } in sources.taxonomy {
        if sds.contains_key(&record.sd_id) {
            issues.push(issue(
                SourceKind::Taxonomy,
                row,
                LoadIssueKind::DuplicateSdId(record.sd_id),
            ));
            continue;
        }
        sds.insert(
            record.sd_id.clone(),
            SdEntry {
                sd_id: record.sd_id,
                sd_name: record.sd_name,
                da_id: record.da_id,
                da_name: record.da_name,
            },
        );
    }
    let taxonomy = Taxonomy::new(sds.into_values().collect());

    let mut researchers: BTreeMap<String, Researcher> = BTreeMap::new();
    for Numbered { row, record } in sources.researchers {
        if researchers.contains_key(&record.researcher_id) {
            issues.push(issue(
                SourceKind::Researchers,
                row,
                LoadIssueKind::DuplicateResearcherId(record.researcher_id),
            ));
            continue;
        }
        if !taxonomy.contains_sd(&record.sd_id) {
            issues.push(issue(
                SourceKind::Researchers,
                row,
                LoadIssueKind::UnknownSd(record.sd_id),
            ));
            continue;
        }
        researchers.insert(
            record.researcher_id.clone(),
            Researcher {
                researcher_id: record.researcher_id,
                unit_id: record.unit_id,
                sd_id: record.sd_id,
                sector: record.sector.unwrap_or_default(),
            },
        );
    }

    // Rows kept after the year filter, plus every id seen so that authorship
    // rows of filtered publications are not mistaken for dangling ones.
    let mut all_pub_ids = BTreeSet::new();
    let mut kept: BTreeMap<String, (usize, PublicationRow)> = BTreeMap::new();
    for Numbered { row, record } in sources.publications {
        if !all_pub_ids.insert(record.pub_id.clone()) {
            issues.push(issue(
                SourceKind::Publications,
                row,
                LoadIssueKind::DuplicatePubId(record.pub_id),
            ));
            continue;
        }
        if let Some(sd) = &record.sd_id {
            if !taxonomy.contains_sd(sd) {
                issues.push(issue(
                    SourceKind::Publications,
                    row,
                    LoadIssueKind::UnknownSd(sd.clone()),
                ));
                continue;
            }
        }
        if let Some((from, to)) = options.years {
            if record.year < from || record.year > to {
                continue;
            }
        }
        kept.insert(record.pub_id.clone(), (row, record));
    }

    let mut authors: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for Numbered { row, record } in sources.authorships {
        if !all_pub_ids.contains(&record.pub_id) {
            issues.push(issue(
                SourceKind::Authorships,
                row,
                LoadIssueKind::UnknownPublication(record.pub_id),
            ));
            continue;
        }
        if !researchers.contains_key(&record.researcher_id) {
            issues.push(issue(
                SourceKind::Authorships,
                row,
                LoadIssueKind::UnknownResearcher(record.researcher_id),
            ));
            continue;
        }
        if kept.contains_key(&record.pub_id) {
            authors
                .entry(record.pub_id)
                .or_default()
                .push(record.researcher_id);
        }
    }

    let mut publications = Vec::with_capacity(kept.len());
    for (pub_id, (row, record)) in kept {
        let links = authors.remove(&pub_id).unwrap_or_default();
        let sd_id = match record.sd_id {
            Some(sd) => sd,
            None => match majority_sd(&links, &researchers) {
                Some(sd) => sd,
                None => {
                    issues.push(issue(
                        SourceKind::Publications,
                        row,
                        LoadIssueKind::UnresolvedSd(pub_id),
                    ));
                    continue;
                }
            },
        };
        publications.push(Publication {
            pub_id,
            year: record.year,
            sd_id,
            citations: record.citations,
            author_links: links,
        });
    }

    if !issues.is_empty() {
        issues.sort_by_key(|i| (i.file, i.row));
        return Err(LoadError { issues });
    }

    let corpus = Corpus::from_parts(taxonomy, researchers.into_values().collect(), publications);
    Ok(match options.years {
        Some((from, to)) => corpus.with_period(from, to),
        None => corpus,
    })
}

fn majority_sd(links: &[String], researchers: &BTreeMap<String, Researcher>) -> Option<String> {
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
    for id in links {
        if let Some(r) = researchers.get(id) {
            *tally.entry(r.sd_id.as_str()).or_insert(0) += 1;
        }
    }
    // BTreeMap iterates in ascending sd_id, so keeping the first maximum
    // resolves ties to the smallest id.
    let mut best: Option<(&str, usize)> = None;
    for (sd, n) in tally {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((sd, n));
        }
    }
    best.map(|(sd, _)| sd.to_string())
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IssueCode {
    EmptyTaxonomy,
    EmptyRoster,
    DupSdId,
    DupResearcherId,
    DupPubId,
    UnknownSd,
    UnknownResearcher,
    EmptyAuthors,
    /// Warning: a discipline with no researchers.
    SdWithoutStaff,
    /// Warning: an area whose disciplines have no researchers at all.
    AreaWithoutStaff,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::EmptyTaxonomy => "EMPTY_TAXONOMY",
            IssueCode::EmptyRoster => "EMPTY_ROSTER",
            IssueCode::DupSdId => "DUP_SD_ID",
            IssueCode::DupResearcherId => "DUP_RESEARCHER_ID",
            IssueCode::DupPubId => "DUP_PUB_ID",
            IssueCode::UnknownSd => "UNKNOWN_SD",
            IssueCode::UnknownResearcher => "UNKNOWN_RESEARCHER",
            IssueCode::EmptyAuthors => "EMPTY_AUTHORS",
            IssueCode::SdWithoutStaff => "SD_WITHOUT_STAFF",
            IssueCode::AreaWithoutStaff => "AREA_WITHOUT_STAFF",
        }
    }
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub code: IssueCode,
    pub message: String,
    pub id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<ValidationIssue>,
    pub warnings: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_accepted(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has_error(&self, code: IssueCode) -> bool {
        self.errors.iter().any(|e| e.code == code)
    }
}

/// Lists every invariant violation of a corpus, ordered by code then id.
pub fn validate_corpus(corpus: &Corpus) -> ValidationReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let push = |list: &mut Vec<ValidationIssue>, code, id: &str, message: String| {
        list.push(ValidationIssue {
            code,
            message,
            id: id.to_string(),
        })
    };

    let taxonomy = &corpus.taxonomy;
    if taxonomy.is_empty() {
        push(
            &mut errors,
            IssueCode::EmptyTaxonomy,
            "",
            "taxonomy has no disciplines".into(),
        );
    }
    for pair in taxonomy.entries().windows(2) {
        if pair[0].sd_id == pair[1].sd_id {
            let msg = if pair[0].da_id == pair[1].da_id {
                format!("sd_id {} listed more than once", pair[0].sd_id)
            } else {
                format!(
                    "sd_id {} mapped to areas {} and {}",
                    pair[0].sd_id, pair[0].da_id, pair[1].da_id
                )
            };
            push(&mut errors, IssueCode::DupSdId, &pair[0].sd_id, msg);
        }
    }

    let researchers = corpus.researchers();
    if researchers.is_empty() {
        push(
            &mut errors,
            IssueCode::EmptyRoster,
            "",
            "roster has no researchers".into(),
        );
    }
    for pair in researchers.windows(2) {
        if pair[0].researcher_id == pair[1].researcher_id {
            push(
                &mut errors,
                IssueCode::DupResearcherId,
                &pair[0].researcher_id,
                format!(
                    "researcher {} listed more than once (one discipline per researcher)",
                    pair[0].researcher_id
                ),
            );
        }
    }
    let mut staffed: BTreeSet<&str> = BTreeSet::new();
    for r in researchers {
        if taxonomy.contains_sd(&r.sd_id) {
            staffed.insert(r.sd_id.as_str());
        } else {
            push(
                &mut errors,
                IssueCode::UnknownSd,
                &r.researcher_id,
                format!(
                    "researcher {} references unknown sd_id {}",
                    r.researcher_id, r.sd_id
                ),
            );
        }
    }

    let publications = corpus.publications();
    for pair in publications.windows(2) {
        if pair[0].pub_id == pair[1].pub_id {
            push(
                &mut errors,
                IssueCode::DupPubId,
                &pair[0].pub_id,
                format!("publication {} listed more than once", pair[0].pub_id),
            );
        }
    }
    for p in publications {
        if !taxonomy.contains_sd(&p.sd_id) {
            push(
                &mut errors,
                IssueCode::UnknownSd,
                &p.pub_id,
                format!(
                    "publication {} references unknown sd_id {}",
                    p.pub_id, p.sd_id
                ),
            );
        }
        if p.author_links.is_empty() {
            push(
                &mut errors,
                IssueCode::EmptyAuthors,
                &p.pub_id,
                format!("publication {} has no authors", p.pub_id),
            );
        }
        for a in &p.author_links {
            if corpus.researcher(a).is_none() {
                push(
                    &mut errors,
                    IssueCode::UnknownResearcher,
                    &p.pub_id,
                    format!("publication {} links unknown researcher {}", p.pub_id, a),
                );
            }
        }
    }

    for e in taxonomy.entries() {
        if !staffed.contains(e.sd_id.as_str()) {
            push(
                &mut warnings,
                IssueCode::SdWithoutStaff,
                &e.sd_id,
                format!("discipline {} has no researchers", e.sd_id),
            );
        }
    }
    for da in taxonomy.areas() {
        if taxonomy
            .sds_in_area(da)
            .all(|e| !staffed.contains(e.sd_id.as_str()))
        {
            push(
                &mut warnings,
                IssueCode::AreaWithoutStaff,
                da,
                format!("area {da} has no researchers"),
            );
        }
    }

    let order = |a: &ValidationIssue, b: &ValidationIssue| {
        (a.code.as_str(), &a.id, &a.message).cmp(&(b.code.as_str(), &b.id, &b.message))
    };
    errors.sort_by(order);
    warnings.sort_by(order);
    ValidationReport { errors, warnings }
}

// ---------------------------------------------------------------------------
// Coverage

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CoverageError {
    #[error("coverage ratio undefined: total output count is zero")]
    ZeroTotal,
}

/// Share of an area's declared output that is indexed, clipped to 1.
pub fn coverage_ratio(indexed_count: u64, total_output_count: u64) -> Result<f64, CoverageError> {
    if total_output_count == 0 {
        return Err(CoverageError::ZeroTotal);
    }
    Ok((indexed_count as f64 / total_output_count as f64).min(1.0))
}

/// Areas with a ratio strictly below the threshold are excluded.
pub fn coverage_passes(ratio: f64, threshold: f64) -> bool {
    ratio >= threshold
}
