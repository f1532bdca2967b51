//! CSV ingestion and emission for corpora, country tables and coverage
//! figures, and JSON synth configurations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fieldnorm_core::corpus::{
    assemble_corpus, AuthorshipRow, Corpus, LoadError, LoadIssue, LoadIssueKind, LoadOptions,
    Numbered, PublicationRow, RawSources, ResearcherRow, Sector, SourceKind, TaxonomyRow,
};
use fieldnorm_core::sector::CountryRecord;
use fieldnorm_core::synth::SynthConfig;
use thiserror::Error;

pub const TAXONOMY_HEADER: [&str; 4] = ["sd_id", "sd_name", "da_id", "da_name"];
pub const RESEARCHERS_HEADER: [&str; 4] = ["researcher_id", "unit_id", "sd_id", "sector"];
pub const PUBLICATIONS_HEADER: [&str; 4] = ["pub_id", "year", "sd_id", "citations"];
pub const AUTHORSHIPS_HEADER: [&str; 2] = ["pub_id", "researcher_id"];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file} row {row}: {message}")]
    Parse {
        file: String,
        row: usize,
        message: String,
    },
    #[error("invalid synth config: {0}")]
    Config(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Raw bytes of the four corpus files.
#[derive(Debug, Clone, Copy)]
pub struct CorpusBytes<'a> {
    pub taxonomy: &'a [u8],
    pub researchers: &'a [u8],
    pub publications: &'a [u8],
    pub authorships: &'a [u8],
}

/// A header-indexed CSV table with 1-based line numbers per record.
struct Table {
    columns: BTreeMap<String, usize>,
    width: usize,
    rows: Vec<(usize, csv::StringRecord)>,
}

impl Table {
    fn field<'r>(&self, record: &'r csv::StringRecord, column: &str) -> Option<&'r str> {
        self.columns.get(column).and_then(|&i| record.get(i))
    }
}

fn parse_table(
    bytes: &[u8],
    kind: SourceKind,
    required: &[&str],
    issues: &mut Vec<LoadIssue>,
) -> Option<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let malformed = |row, message: String| LoadIssue {
        file: kind,
        row,
        kind: LoadIssueKind::Malformed(message),
    };
    let header = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => {
            issues.push(malformed(1, e.to_string()));
            return None;
        }
    };
    let columns: BTreeMap<String, usize> = header
        .iter()
        .enumerate()
        .map(|(i, name)| (name.to_string(), i))
        .collect();
    let missing: Vec<&str> = required
        .iter()
        .copied()
        .filter(|c| !columns.contains_key(*c))
        .collect();
    if !missing.is_empty() {
        issues.push(malformed(
            1,
            format!("missing column(s) {}", missing.join(", ")),
        ));
        return None;
    }
    let width = header.len();
    let mut rows = Vec::new();
    for result in reader.records() {
        match result {
            Ok(record) => {
                let line = record.position().map_or(0, |p| p.line() as usize);
                if record.len() != width {
                    issues.push(malformed(
                        line,
                        format!("expected {width} fields, found {}", record.len()),
                    ));
                    continue;
                }
                rows.push((line, record));
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                issues.push(malformed(line, e.to_string()));
            }
        }
    }
    Some(Table {
        columns,
        width,
        rows,
    })
}

fn parse_int<T: std::str::FromStr>(
    value: &str,
    column: &str,
    kind: SourceKind,
    row: usize,
    issues: &mut Vec<LoadIssue>,
) -> Option<T> {
    match value.parse::<T>() {
        Ok(v) => Some(v),
        Err(_) => {
            issues.push(LoadIssue {
                file: kind,
                row,
                kind: LoadIssueKind::Malformed(format!(
                    "{column}: cannot parse {value:?} as integer"
                )),
            });
            None
        }
    }
}

fn non_empty(v: Option<&str>) -> Option<&str> {
    v.filter(|s| !s.is_empty())
}

/// Parses and resolves the four corpus files.
pub fn parse_corpus(bytes: CorpusBytes<'_>, options: &LoadOptions) -> Result<Corpus, LoadError> {
    let mut issues = Vec::new();
    let mut sources = RawSources::default();

    if let Some(t) = parse_table(
        bytes.taxonomy,
        SourceKind::Taxonomy,
        &TAXONOMY_HEADER,
        &mut issues,
    ) {
        for (row, rec) in &t.rows {
            sources.taxonomy.push(Numbered::new(
                *row,
                TaxonomyRow {
                    sd_id: t.field(rec, "sd_id").unwrap_or_default().to_string(),
                    sd_name: t.field(rec, "sd_name").unwrap_or_default().to_string(),
                    da_id: t.field(rec, "da_id").unwrap_or_default().to_string(),
                    da_name: t.field(rec, "da_name").unwrap_or_default().to_string(),
                },
            ));
        }
    }

    let kind = SourceKind::Researchers;
    if let Some(t) = parse_table(
        bytes.researchers,
        kind,
        &RESEARCHERS_HEADER[..3],
        &mut issues,
    ) {
        for (row, rec) in &t.rows {
            let sector = match non_empty(t.field(rec, "sector")) {
                None => None,
                Some(s) => match Sector::parse(s) {
                    Some(sector) => Some(sector),
                    None => {
                        issues.push(LoadIssue {
                            file: kind,
                            row: *row,
                            kind: LoadIssueKind::Malformed(format!(
                                "sector: expected public or private, found {s:?}"
                            )),
                        });
                        continue;
                    }
                },
            };
            sources.researchers.push(Numbered::new(
                *row,
                ResearcherRow {
                    researcher_id: t
                        .field(rec, "researcher_id")
                        .unwrap_or_default()
                        .to_string(),
                    unit_id: t.field(rec, "unit_id").unwrap_or_default().to_string(),
                    sd_id: t.field(rec, "sd_id").unwrap_or_default().to_string(),
                    sector,
                },
            ));
        }
    }

    let kind = SourceKind::Publications;
    let required = ["pub_id", "year", "citations"];
    if let Some(t) = parse_table(bytes.publications, kind, &required, &mut issues) {
        for (row, rec) in &t.rows {
            let year = parse_int::<i32>(
                t.field(rec, "year").unwrap_or_default(),
                "year",
                kind,
                *row,
                &mut issues,
            );
            let citations = parse_int::<u64>(
                t.field(rec, "citations").unwrap_or_default(),
                "citations",
                kind,
                *row,
                &mut issues,
            );
            let (Some(year), Some(citations)) = (year, citations) else {
                continue;
            };
            sources.publications.push(Numbered::new(
                *row,
                PublicationRow {
                    pub_id: t.field(rec, "pub_id").unwrap_or_default().to_string(),
                    year,
                    sd_id: non_empty(t.field(rec, "sd_id")).map(str::to_string),
                    citations,
                },
            ));
        }
    }

    let kind = SourceKind::Authorships;
    if let Some(t) = parse_table(bytes.authorships, kind, &AUTHORSHIPS_HEADER, &mut issues) {
        debug_assert!(t.width >= 2);
        for (row, rec) in &t.rows {
            sources.authorships.push(Numbered::new(
                *row,
                AuthorshipRow {
                    pub_id: t.field(rec, "pub_id").unwrap_or_default().to_string(),
                    researcher_id: t
                        .field(rec, "researcher_id")
                        .unwrap_or_default()
                        .to_string(),
                },
            ));
        }
    }

    if !issues.is_empty() {
        issues.sort_by_key(|i| (i.file, i.row));
        return Err(LoadError { issues });
    }
    assemble_corpus(sources, options)
}

/// Paths of the four corpus files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusPaths {
    pub taxonomy: PathBuf,
    pub researchers: PathBuf,
    pub publications: PathBuf,
    pub authorships: PathBuf,
}

impl CorpusPaths {
    /// Standard file names inside one directory.
    pub fn in_dir(dir: &Path) -> Self {
        CorpusPaths {
            taxonomy: dir.join(SourceKind::Taxonomy.file_name()),
            researchers: dir.join(SourceKind::Researchers.file_name()),
            publications: dir.join(SourceKind::Publications.file_name()),
            authorships: dir.join(SourceKind::Authorships.file_name()),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &PathBuf> {
        [
            &self.taxonomy,
            &self.researchers,
            &self.publications,
            &self.authorships,
        ]
        .into_iter()
    }
}

/// The four corpus files rendered in their CSV schemas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusCsv {
    pub taxonomy: Vec<u8>,
    pub researchers: Vec<u8>,
    pub publications: Vec<u8>,
    pub authorships: Vec<u8>,
}

impl CorpusCsv {
    pub fn as_bytes(&self) -> CorpusBytes<'_> {
        CorpusBytes {
            taxonomy: &self.taxonomy,
            researchers: &self.researchers,
            publications: &self.publications,
            authorships: &self.authorships,
        }
    }

    /// (file name, contents) in canonical order.
    pub fn files(&self) -> [(&'static str, &[u8]); 4] {
        [
            (SourceKind::Taxonomy.file_name(), &self.taxonomy),
            (SourceKind::Researchers.file_name(), &self.researchers),
            (SourceKind::Publications.file_name(), &self.publications),
            (SourceKind::Authorships.file_name(), &self.authorships),
        ]
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<(), IoError> {
        std::fs::create_dir_all(dir).map_err(|source| IoError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        for (name, bytes) in self.files() {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|source| IoError::Write { path, source })?;
        }
        Ok(())
    }
}

fn csv_bytes<const N: usize>(
    header: [&str; N],
    rows: impl Iterator<Item = [String; N]>,
) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| IoError::Write {
        path: PathBuf::from("<memory>"),
        source: e.into_error(),
    })
}

/// Canonical serialization of a corpus: rows sorted by id, every optional
/// column written out.
pub fn corpus_to_csv(corpus: &Corpus) -> Result<CorpusCsv, IoError> {
    let taxonomy = csv_bytes(
        TAXONOMY_HEADER,
        corpus.taxonomy.entries().iter().map(|e| {
            [
                e.sd_id.clone(),
                e.sd_name.clone(),
                e.da_id.clone(),
                e.da_name.clone(),
            ]
        }),
    )?;
    let researchers = csv_bytes(
        RESEARCHERS_HEADER,
        corpus.researchers().iter().map(|r| {
            [
                r.researcher_id.clone(),
                r.unit_id.clone(),
                r.sd_id.clone(),
                r.sector.as_str().to_string(),
            ]
        }),
    )?;
    let publications = csv_bytes(
        PUBLICATIONS_HEADER,
        corpus.publications().iter().map(|p| {
            [
                p.pub_id.clone(),
                p.year.to_string(),
                p.sd_id.clone(),
                p.citations.to_string(),
            ]
        }),
    )?;
    let authorships = csv_bytes(
        AUTHORSHIPS_HEADER,
        corpus.publications().iter().flat_map(|p| {
            p.author_links
                .iter()
                .map(move |a| [p.pub_id.clone(), a.clone()])
        }),
    )?;
    Ok(CorpusCsv {
        taxonomy,
        researchers,
        publications,
        authorships,
    })
}

fn parse_error(file: &str, row: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        file: file.to_string(),
        row,
        message: message.into(),
    }
}

fn simple_table(bytes: &[u8], file: &str, required: &[&str]) -> Result<Table, IoError> {
    let mut issues = Vec::new();
    match parse_table(bytes, SourceKind::Taxonomy, required, &mut issues) {
        Some(t) if issues.is_empty() => Ok(t),
        _ => {
            let first = issues.into_iter().next();
            let (row, message) = match first {
                Some(LoadIssue {
                    row,
                    kind: LoadIssueKind::Malformed(m),
                    ..
                }) => (row, m),
                Some(other) => (other.row, other.kind.to_string()),
                None => (1, "unreadable table".into()),
            };
            Err(parse_error(file, row, message))
        }
    }
}

/// `country_id,publications_per_researcher,public_share_percent`, optionally
/// followed by `total_researchers,total_publications`.
pub fn parse_countries(bytes: &[u8]) -> Result<Vec<CountryRecord>, IoError> {
    const FILE: &str = "countries.csv";
    let t = simple_table(
        bytes,
        FILE,
        &[
            "country_id",
            "publications_per_researcher",
            "public_share_percent",
        ],
    )?;
    let mut out = Vec::with_capacity(t.rows.len());
    for (row, rec) in &t.rows {
        let num = |col: &str| -> Result<f64, IoError> {
            let raw = t.field(rec, col).unwrap_or_default();
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    parse_error(FILE, *row, format!("{col}: cannot parse {raw:?} as number"))
                })
        };
        let opt_int = |col: &str| -> Result<Option<u64>, IoError> {
            match non_empty(t.field(rec, col)) {
                None => Ok(None),
                Some(raw) => raw.parse::<u64>().map(Some).map_err(|_| {
                    parse_error(
                        FILE,
                        *row,
                        format!("{col}: cannot parse {raw:?} as integer"),
                    )
                }),
            }
        };
        let mut record = CountryRecord::new(
            t.field(rec, "country_id").unwrap_or_default(),
            num("publications_per_researcher")?,
            num("public_share_percent")? / 100.0,
        );
        record.total_researchers = opt_int("total_researchers")?;
        record.total_publications = opt_int("total_publications")?;
        out.push(record);
    }
    Ok(out)
}

/// `da_id,total_output_count`: declared research output per area.
pub fn parse_coverage(bytes: &[u8]) -> Result<BTreeMap<String, u64>, IoError> {
    const FILE: &str = "coverage.csv";
    let t = simple_table(bytes, FILE, &["da_id", "total_output_count"])?;
    let mut out = BTreeMap::new();
    for (row, rec) in &t.rows {
        let raw = t.field(rec, "total_output_count").unwrap_or_default();
        let total = raw.parse::<u64>().map_err(|_| {
            parse_error(
                FILE,
                *row,
                format!("total_output_count: cannot parse {raw:?} as integer"),
            )
        })?;
        out.insert(t.field(rec, "da_id").unwrap_or_default().to_string(), total);
    }
    Ok(out)
}

pub fn parse_synth_config(bytes: &[u8]) -> Result<SynthConfig, IoError> {
    Ok(serde_json::from_slice(bytes)?)
}
