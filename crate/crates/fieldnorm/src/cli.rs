//! Command-line surface.
//!
//! Every subcommand writes exactly one report (TSV or JSON) to `--output` or
//! stdout. Exit status: 0 on success, 1 when the data is rejected (load or
//! validation errors, computations that cannot run on the data), 2 on usage
//! errors (bad flags, unreadable files).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fieldnorm_core::corpus::{
    coverage_passes, coverage_ratio, validate_corpus, Corpus, LoadError, LoadOptions,
    DEFAULT_COVERAGE_THRESHOLD,
};
use fieldnorm_core::indicators::{
    intensity_table, pooled_table, sd_distribution_stats, CountingMode, FieldNormalizer,
    IndicatorError, Scope, POOLED_UNIT,
};
use fieldnorm_core::ranking::{
    compare_rankings_with, distortion_report_with, rank_units, rank_variations, RankingError,
    VariationBasis,
};
use fieldnorm_core::sector::{sector_comparison_table, Calibration};
use fieldnorm_core::synth::{generate_corpus, SynthConfig};
use rayon::prelude::*;

use crate::io::{self, CorpusBytes, CorpusPaths, IoError};
use crate::report::{Cell, Format, InputDigest, Metadata, Report, Section};

/// Caps internal parallelism.
pub const THREADS_ENV: &str = "FIELDNORM_THREADS";

const SUBSTITUTE_NOTE: &str = "quality_ownership_intensity is a substitute indicator \
(citation- and co-author-weighted credit per researcher); it does not reproduce any published composite indicator";

#[derive(Debug, Parser)]
#[command(
    name = "fieldnorm",
    version,
    about = "Field-normalized research performance indicators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Directory holding taxonomy.csv, researchers.csv, publications.csv and authorships.csv
    #[arg(long, value_name = "DIR")]
    pub corpus_dir: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub taxonomy: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub researchers: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub publications: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub authorships: Option<PathBuf>,
    /// Inclusive publication year range, e.g. 2001-2003
    #[arg(long, value_name = "FROM-TO", value_parser = parse_years)]
    pub years: Option<(i32, i32)>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Report path; stdout when omitted
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Tsv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct CoverageArgs {
    /// CSV with da_id,total_output_count; areas below the threshold are excluded
    #[arg(long, value_name = "FILE")]
    pub coverage: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_COVERAGE_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Sd,
    Da,
}

impl From<ScopeArg> for Scope {
    fn from(s: ScopeArg) -> Scope {
        match s {
            ScopeArg::Sd => Scope::Sd,
            ScopeArg::Da => Scope::Da,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CountingArg {
    Whole,
    Fractional,
    /// Substitute quality/ownership weighting
    Quality,
}

impl From<CountingArg> for CountingMode {
    fn from(c: CountingArg) -> CountingMode {
        match c {
            CountingArg::Whole => CountingMode::Whole,
            CountingArg::Fractional => CountingMode::Fractional,
            CountingArg::Quality => CountingMode::QualityWeighted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Measure {
    /// Raw publications per researcher
    Pi,
    /// Normalized intensity (pqcn at sd scope, theta at da scope)
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Level {
    Da,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    /// Average and median over units whose rank changed
    Changed,
    /// Average and median over all units
    All,
}

impl From<BasisArg> for VariationBasis {
    fn from(b: BasisArg) -> VariationBasis {
        match b {
            BasisArg::Changed => VariationBasis::ChangedOnly,
            BasisArg::All => VariationBasis::AllUnits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    Heterogeneous,
    Ab,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a corpus for invariant violations (and area coverage)
    Validate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        coverage: CoverageArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Publications per researcher per unit
    Intensity {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_enum, default_value_t = ScopeArg::Da)]
        scope: ScopeArg,
        #[arg(long, value_enum, default_value_t = CountingArg::Whole)]
        counting: CountingArg,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Area intensity and distribution of discipline intensities per area
    Stats {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_enum, default_value_t = CountingArg::Whole)]
        counting: CountingArg,
        #[command(flatten)]
        coverage: CoverageArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Normalized area intensity (theta) per unit
    Normalize {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_enum, default_value_t = CountingArg::Whole)]
        counting: CountingArg,
        /// Restrict to one area
        #[arg(long)]
        da: Option<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Competition ranking of units per discipline or area
    Rank {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_enum, default_value_t = ScopeArg::Da)]
        scope: ScopeArg,
        #[arg(long, value_enum, default_value_t = CountingArg::Whole)]
        counting: CountingArg,
        #[arg(long, value_enum, default_value_t = Measure::Pi)]
        measure: Measure,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Rank variations between aggregate and normalized rankings
    Compare {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_enum, default_value_t = Level::Da)]
        level: Level,
        #[arg(long, value_enum, default_value_t = CountingArg::Whole)]
        counting: CountingArg,
        /// Restrict to one area
        #[arg(long)]
        da: Option<String>,
        #[arg(long, value_enum, default_value_t = BasisArg::Changed)]
        basis: BasisArg,
        #[command(flatten)]
        coverage: CoverageArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Public/private decomposition of national publication intensity
    Sector {
        /// CSV with country_id,publications_per_researcher,public_share_percent
        #[arg(long, value_name = "FILE")]
        countries: PathBuf,
        /// Country the private intensity is calibrated from
        #[arg(long)]
        reference: String,
        /// Known public-sector intensity of the reference country
        #[arg(long, conflicts_with_all = ["private_pubs", "private_researchers"])]
        public_pi: Option<f64>,
        /// Classified private publications of the reference country
        #[arg(long, requires = "private_researchers")]
        private_pubs: Option<f64>,
        /// Private researchers of the reference country
        #[arg(long, requires = "private_pubs")]
        private_researchers: Option<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Generate a deterministic synthetic corpus
    Synth {
        /// JSON synth configuration; overrides --scenario
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Scenario::Heterogeneous)]
        scenario: Scenario,
        /// Seed for the heterogeneous scenario, or override for --config
        #[arg(long)]
        seed: Option<u64>,
        /// Directory receiving the corpus CSV files
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

fn parse_years(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s.split_once('-').unwrap_or((s, s));
    let from: i32 = a
        .trim()
        .parse()
        .map_err(|_| format!("invalid year {a:?}"))?;
    let to: i32 = b
        .trim()
        .parse()
        .map_err(|_| format!("invalid year {b:?}"))?;
    if from > to {
        return Err(format!("empty year range {from}-{to}"));
    }
    Ok((from, to))
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Read { .. } | IoError::Write { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<IndicatorError> for CliError {
    fn from(e: IndicatorError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<RankingError> for CliError {
    fn from(e: RankingError) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Parses arguments and runs, writing to the process streams.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Parses arguments and runs; reports go to `stdout` unless `--output` is
/// given, diagnostics to `stderr`. Returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let rendered = e.to_string();
            let line = rendered.lines().next().unwrap_or("usage error");
            let _ = writeln!(stderr, "fieldnorm: {}", line.trim_start_matches("error: "));
            return 2;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "fieldnorm: error: {}", e.message());
            e.exit_code()
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {raw:?}"
            ))
        })?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Usage(e.to_string()))
}

fn emit(report: &Report, out: &OutputArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = report.render(out.format);
    match &out.output {
        Some(path) => std::fs::write(path, text).map_err(|source| {
            CliError::from(IoError::Write {
                path: path.clone(),
                source,
            })
        }),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Usage(format!("cannot write report: {e}"))),
    }
}

fn echo_output(meta: &mut Metadata, out: &OutputArgs) {
    meta.config(
        "format",
        match out.format {
            Format::Tsv => "tsv",
            Format::Json => "json",
        },
    );
}

struct LoadedCorpus {
    corpus: Result<Corpus, LoadError>,
    inputs: Vec<InputDigest>,
}

fn resolve_paths(args: &CorpusArgs) -> Result<CorpusPaths, CliError> {
    let defaults = args.corpus_dir.as_deref().map(CorpusPaths::in_dir);
    let pick = |explicit: &Option<PathBuf>, default: Option<&PathBuf>, flag: &str| {
        explicit
            .clone()
            .or_else(|| default.cloned())
            .ok_or_else(|| CliError::Usage(format!("missing --{flag} (or --corpus-dir)")))
    };
    Ok(CorpusPaths {
        taxonomy: pick(
            &args.taxonomy,
            defaults.as_ref().map(|d| &d.taxonomy),
            "taxonomy",
        )?,
        researchers: pick(
            &args.researchers,
            defaults.as_ref().map(|d| &d.researchers),
            "researchers",
        )?,
        publications: pick(
            &args.publications,
            defaults.as_ref().map(|d| &d.publications),
            "publications",
        )?,
        authorships: pick(
            &args.authorships,
            defaults.as_ref().map(|d| &d.authorships),
            "authorships",
        )?,
    })
}

fn load(args: &CorpusArgs, meta: &mut Metadata) -> Result<LoadedCorpus, CliError> {
    let paths = resolve_paths(args)?;
    let mut contents = Vec::with_capacity(4);
    let mut inputs = Vec::with_capacity(4);
    for path in paths.iter() {
        let bytes = io::read_file(path)?;
        inputs.push(InputDigest::of(path.display().to_string(), &bytes));
        contents.push(bytes);
    }
    meta.config("taxonomy", paths.taxonomy.display())
        .config("researchers", paths.researchers.display())
        .config("publications", paths.publications.display())
        .config("authorships", paths.authorships.display());
    if let Some((a, b)) = args.years {
        meta.config("years", format!("{a}-{b}"));
    }
    let options = LoadOptions { years: args.years };
    let corpus = io::parse_corpus(
        CorpusBytes {
            taxonomy: &contents[0],
            researchers: &contents[1],
            publications: &contents[2],
            authorships: &contents[3],
        },
        &options,
    );
    Ok(LoadedCorpus { corpus, inputs })
}

/// Loads and validates; any load or validation error rejects the run.
fn load_valid(args: &CorpusArgs, meta: &mut Metadata) -> Result<Corpus, CliError> {
    let loaded = load(args, meta)?;
    meta.inputs = loaded.inputs;
    let corpus = loaded.corpus.map_err(|e| CliError::Data(e.to_string()))?;
    let report = validate_corpus(&corpus);
    if let Some(first) = report.errors.first() {
        return Err(CliError::Data(format!(
            "corpus failed validation with {} error(s), first {} {}: {}",
            report.errors.len(),
            first.code,
            first.id,
            first.message
        )));
    }
    Ok(corpus)
}

struct CoverageCheck {
    rows: Vec<(String, u64, u64, f64, bool)>,
}

impl CoverageCheck {
    fn excluded(&self) -> Vec<&str> {
        self.rows
            .iter()
            .filter(|r| !r.4)
            .map(|r| r.0.as_str())
            .collect()
    }
}

fn check_coverage(
    args: &CoverageArgs,
    corpus: &Corpus,
    meta: &mut Metadata,
) -> Result<Option<CoverageCheck>, CliError> {
    let Some(path) = &args.coverage else {
        return Ok(None);
    };
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(CliError::Usage(format!(
            "--threshold must be in [0, 1], got {}",
            args.threshold
        )));
    }
    let bytes = io::read_file(path)?;
    meta.inputs
        .push(InputDigest::of(path.display().to_string(), &bytes));
    meta.config("coverage", path.display())
        .config("threshold", args.threshold);
    let totals = io::parse_coverage(&bytes)?;
    let indexed = corpus.publications_by_da();
    let mut rows = Vec::new();
    for (da, total) in totals {
        let n = indexed.get(&da).copied().unwrap_or(0);
        let ratio =
            coverage_ratio(n, total).map_err(|e| CliError::Data(format!("area {da}: {e}")))?;
        rows.push((da, n, total, ratio, coverage_passes(ratio, args.threshold)));
    }
    Ok(Some(CoverageCheck { rows }))
}

fn execute(
    command: Command,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    match command {
        Command::Validate {
            corpus,
            coverage,
            out,
        } => cmd_validate(&corpus, &coverage, &out, stdout, stderr),
        Command::Intensity {
            corpus,
            scope,
            counting,
            out,
        } => cmd_intensity(&corpus, scope.into(), counting.into(), &out, stdout),
        Command::Stats {
            corpus,
            counting,
            coverage,
            out,
        } => cmd_stats(&corpus, counting.into(), &coverage, &out, stdout),
        Command::Normalize {
            corpus,
            counting,
            da,
            out,
        } => cmd_normalize(&corpus, counting.into(), da.as_deref(), &out, stdout),
        Command::Rank {
            corpus,
            scope,
            counting,
            measure,
            out,
        } => cmd_rank(
            &corpus,
            scope.into(),
            counting.into(),
            measure,
            &out,
            stdout,
        ),
        Command::Compare {
            corpus,
            level: Level::Da,
            counting,
            da,
            basis,
            coverage,
            out,
        } => cmd_compare(
            &corpus,
            counting.into(),
            da.as_deref(),
            basis.into(),
            &coverage,
            &out,
            stdout,
        ),
        Command::Sector {
            countries,
            reference,
            public_pi,
            private_pubs,
            private_researchers,
            out,
        } => {
            let calibration = match (public_pi, private_pubs, private_researchers) {
                (Some(pi), None, None) => Calibration::PublicIntensity(pi),
                (None, Some(p), Some(r)) => Calibration::ClassifiedCounts {
                    private_publications: p,
                    private_researchers: r,
                },
                _ => {
                    return Err(CliError::Usage(
                        "give --public-pi or both --private-pubs and --private-researchers".into(),
                    ))
                }
            };
            cmd_sector(&countries, &reference, calibration, &out, stdout)
        }
        Command::Synth {
            config,
            scenario,
            seed,
            out_dir,
            out,
        } => cmd_synth(
            config.as_deref(),
            scenario,
            seed,
            out_dir.as_deref(),
            &out,
            stdout,
        ),
    }
}

fn cmd_validate(
    args: &CorpusArgs,
    coverage: &CoverageArgs,
    out: &OutputArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut meta = Metadata::new("validate");
    let loaded = load(args, &mut meta)?;
    meta.inputs = loaded.inputs;
    echo_output(&mut meta, out);

    let mut issues = Section::new("issues", &["severity", "code", "id", "message"]);
    let n_errors;
    let mut coverage_section = None;
    match &loaded.corpus {
        Err(load_error) => {
            for i in &load_error.issues {
                issues.push(vec![
                    "error".into(),
                    i.kind.code().into(),
                    format!("{}:{}", i.file, i.row).into(),
                    i.kind.to_string().into(),
                ]);
            }
            n_errors = load_error.issues.len();
        }
        Ok(corpus) => {
            let report = validate_corpus(corpus);
            for (severity, list) in [("error", &report.errors), ("warning", &report.warnings)] {
                for i in list {
                    issues.push(vec![
                        severity.into(),
                        i.code.as_str().into(),
                        i.id.clone().into(),
                        i.message.clone().into(),
                    ]);
                }
            }
            n_errors = report.errors.len();
            let (d, r, p) = corpus.counts();
            meta.note(format!("disciplines={d} researchers={r} publications={p}"));
            if let Some(check) = check_coverage(coverage, corpus, &mut meta)? {
                let mut s = Section::new(
                    "coverage",
                    &[
                        "da_id",
                        "indexed_count",
                        "total_output_count",
                        "coverage_ratio",
                        "status",
                    ],
                );
                for (da, n, total, ratio, ok) in &check.rows {
                    s.push(vec![
                        da.clone().into(),
                        (*n).into(),
                        (*total).into(),
                        (*ratio).into(),
                        if *ok { "retained" } else { "excluded" }.into(),
                    ]);
                }
                coverage_section = Some(s);
            }
        }
    }
    let mut report = Report::new(meta);
    report.sections.push(issues);
    report.sections.extend(coverage_section);
    emit(&report, out, stdout)?;
    if n_errors > 0 {
        let first = &report.sections[0].rows[0];
        let code = match &first[1] {
            Cell::Str(s) => s.as_str(),
            _ => "",
        };
        let _ = writeln!(
            stderr,
            "fieldnorm: corpus rejected: {n_errors} error(s), first {code}"
        );
        return Ok(1);
    }
    Ok(0)
}

fn cmd_intensity(
    args: &CorpusArgs,
    scope: Scope,
    mode: CountingMode,
    out: &OutputArgs,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut meta = Metadata::new("intensity");
    let corpus = load_valid(args, &mut meta)?;
    meta.config("scope", scope).config("counting", mode);
    echo_output(&mut meta, out);
    let table = intensity_table(&corpus, scope, mode);
    if let Some((a, b)) = table.period {
        meta.note(format!("period={a}-{b}"));
    }
    let columns: [&str; 5] = if mode == CountingMode::QualityWeighted {
        meta.note(SUBSTITUTE_NOTE);
        [
            "unit_id",
            "scope_id",
            "researchers",
            "quality_weighted_credit",
            "quality_ownership_intensity",
        ]
    } else {
        [
            "unit_id",
            "scope_id",
            "researchers",
            "publications",
            "intensity",
        ]
    };
    let mut s = Section::new("intensity", &columns);
    for c in &table.cells {
        s.push(vec![
            c.unit_id.clone().into(),
            c.scope_id.clone().into(),
            c.researcher_count.into(),
            c.publication_count.into(),
            c.intensity.into(),
        ]);
    }
    let mut report = Report::new(meta);
    report.sections.push(s);
    emit(&report, out, stdout)?;
    Ok(0)
}

fn cmd_stats(
    args: &CorpusArgs,
    mode: CountingMode,
    coverage: &CoverageArgs,
    out: &OutputArgs,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut meta = Metadata::new("stats");
    let corpus = load_valid(args, &mut meta)?;
    meta.config("counting", mode);
    let check = check_coverage(coverage, &corpus, &mut meta)?;
    echo_output(&mut meta, out);
    if mode == CountingMode::QualityWeighted {
        meta.note(SUBSTITUTE_NOTE);
    }
    let excluded: Vec<String> = check
        .as_ref()
        .map(|c| c.excluded().into_iter().map(String::from).collect())
        .unwrap_or_default();

    let area_table = pooled_table(&corpus, Scope::Da, mode);
    let sd_table = pooled_table(&corpus, Scope::Sd, mode);
    let mut s = Section::new(
        "stats",
        &[
            "da_id",
            "da_name",
            "researchers",
            "publications",
            "pi",
            "n_sds",
            "min",
            "max",
            "mean",
            "median",
            "std_dev",
            "variation_coeff",
            "max_min_ratio",
        ],
    );
    for da in corpus.taxonomy.areas() {
        if excluded.iter().any(|e| e == da) {
            meta.note(format!("area {da} excluded by coverage threshold"));
            continue;
        }
        let Some(area) = area_table.get(POOLED_UNIT, da) else {
            meta.note(format!("area {da} has no researchers"));
            continue;
        };
        let stats = sd_distribution_stats(&sd_table, &corpus.taxonomy, da)?;
        s.push(vec![
            da.into(),
            corpus.taxonomy.da_name(da).unwrap_or_default().into(),
            area.researcher_count.into(),
            area.publication_count.into(),
            area.intensity.into(),
            stats.n_sds.into(),
            stats.min.into(),
            stats.max.into(),
            stats.mean.into(),
            stats.median.into(),
            stats.std_dev.into(),
            stats.variation_coeff.into(),
            stats.fertility_ratio().into(),
        ]);
    }
    let mut report = Report::new(meta);
    report.sections.push(s);
    emit(&report, out, stdout)?;
    Ok(0)
}

fn selected_areas<'a>(corpus: &'a Corpus, da: Option<&'a str>) -> Result<Vec<&'a str>, CliError> {
    match da {
        Some(d) if corpus.taxonomy.contains_da(d) => Ok(vec![d]),
        Some(d) => Err(CliError::Data(format!("unknown area {d:?}"))),
        None => Ok(corpus.taxonomy.areas()),
    }
}

fn note_degenerate(meta: &mut Metadata, normalizer: &FieldNormalizer<'_>) {
    for sd in normalizer.degenerate_sds() {
        meta.note(format!(
            "discipline {sd} has zero pooled publications and is left out of normalization"
        ));
    }
}

fn cmd_normalize(
    args: &CorpusArgs,
    mode: CountingMode,
    da: Option<&str>,
    out: &OutputArgs,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut meta = Metadata::new("normalize");
    let corpus = load_valid(args, &mut meta)?;
    meta.config("counting", mode);
    if let Some(d) = da {
        meta.config("da", d);
    }
    echo_output(&mut meta, out);
    let areas = selected_areas(&corpus, da)?;
    let normalizer = FieldNormalizer::new(&corpus, mode);
    note_degenerate(&mut meta, &normalizer);

    let pool = thread_pool()?;
    let per_area: Vec<Vec<_>> = pool.install(|| {
        areas
            .par_iter()
            .map(|d| {
                normalizer
                    .units_in_area(d)
                    .into_iter()
                    .map(|u| (u.to_string(), d.to_string(), normalizer.theta(u, d)))
                    .collect()
            })
            .collect()
    });

    let mut theta = Section::new(
        "theta",
        &["unit_id", "da_id", "theta", "researchers", "n_sds"],
    );
    let mut parts = Section::new(
        "contributions",
        &["unit_id", "da_id", "sd_id", "staff", "pqcn"],
    );
    let mut rows: Vec<_> = per_area.into_iter().flatten().collect();
    rows.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    for (unit, d, result) in rows {
        match result {
            Ok(t) => {
                let staff: u64 = t.contributions.iter().map(|c| c.staff).sum();
                theta.push(vec![
                    unit.clone().into(),
                    d.clone().into(),
                    t.theta.into(),
                    staff.into(),
                    t.contributions.len().into(),
                ]);
                for c in &t.contributions {
                    parts.push(vec![
                        unit.clone().into(),
                        d.clone().into(),
                        c.sd_id.clone().into(),
                        c.staff.into(),
                        c.pqcn.into(),
                    ]);
                }
            }
            Err(IndicatorError::DegenerateArea { .. }) => {
                meta.note(format!(
                    "unit {unit} has no theta in {d}: only zero-publication disciplines"
                ));
            }
            Err(e) => return Err(e.into()),
        }
    }
    let mut report = Report::new(meta);
    report.sections.push(theta);
    report.sections.push(parts);
    emit(&report, out, stdout)?;
    Ok(0)
}

fn cmd_rank(
    args: &CorpusArgs,
    scope: Scope,
    mode: CountingMode,
    measure: Measure,
    out: &OutputArgs,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut meta = Metadata::new("rank");
    let corpus = load_valid(args, &mut meta)?;
    meta.config("scope", scope).config("counting", mode).config(
        "measure",
        match measure {
            Measure::Pi => "pi",
            Measure::Normalized => "normalized",
        },
    );
    echo_output(&mut meta, out);
    if mode == CountingMode::QualityWeighted {
        meta.note(SUBSTITUTE_NOTE);
    }

    let mut values: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    match measure {
        Measure::Pi => {
            for c in intensity_table(&corpus, scope, mode).cells {
                values
                    .entry(c.scope_id)
                    .or_default()
                    .insert(c.unit_id, c.intensity);
            }
        }
        Measure::Normalized => {
            let normalizer = FieldNormalizer::new(&corpus, mode);
            note_degenerate(&mut meta, &normalizer);
            match scope {
                Scope::Sd => {
                    for e in corpus.taxonomy.entries() {
                        for u in normalizer.units_in_sd(&e.sd_id) {
                            if let Ok(v) = normalizer.pqcn(u, &e.sd_id) {
                                values
                                    .entry(e.sd_id.clone())
                                    .or_default()
                                    .insert(u.to_string(), v);
                            }
                        }
                    }
                }
                Scope::Da => {
                    for d in corpus.taxonomy.areas() {
                        for u in normalizer.units_in_area(d) {
                            if let Ok(t) = normalizer.theta(u, d) {
                                values
                                    .entry(d.to_string())
                                    .or_default()
                                    .insert(u.to_string(), t.theta);
                            }
                        }
                    }
                }
            }
        }
    }

    let mut s = Section::new("ranking", &["scope_id", "rank", "unit_id", "value"]);
    for (scope_id, v) in &values {
        let ranking = rank_units(v)?;
        for e in &ranking.entries {
            s.push(vec![
                scope_id.clone().into(),
                e.rank.into(),
                e.unit_id.clone().into(),
                e.value.into(),
            ]);
        }
    }
    let mut report = Report::new(meta);
    report.sections.push(s);
    emit(&report, out, stdout)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(
    args: &CorpusArgs,
    mode: CountingMode,
    da: Option<&str>,
    basis: VariationBasis,
    coverage: &CoverageArgs,
    out: &OutputArgs,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut meta = Metadata::new("compare");
    let corpus = load_valid(args, &mut meta)?;
    meta.config("level", "da").config("counting", mode).config(
        "basis",
        match basis {
            VariationBasis::ChangedOnly => "changed",
            VariationBasis::AllUnits => "all",
        },
    );
    if let Some(d) = da {
        meta.config("da", d);
    }
    let check = check_coverage(coverage, &corpus, &mut meta)?;
    echo_output(&mut meta, out);
    if mode == CountingMode::QualityWeighted {
        meta.note(SUBSTITUTE_NOTE);
    }
    let excluded: Vec<&str> = check.as_ref().map(|c| c.excluded()).unwrap_or_default();
    let mut areas = selected_areas(&corpus, da)?;
    areas.retain(|d| {
        let keep = !excluded.contains(d);
        if !keep {
            meta.note(format!("area {d} excluded by coverage threshold"));
        }
        keep
    });

    let normalizer = FieldNormalizer::new(&corpus, mode);
    note_degenerate(&mut meta, &normalizer);
    let pool = thread_pool()?;
    let reports: Vec<_> = pool.install(|| {
        areas
            .par_iter()
            .map(|d| distortion_report_with(&normalizer, &corpus, d))
            .collect()
    });

    let mut summary = Section::new(
        "summary",
        &[
            "da_id",
            "n_sds",
            "n_units",
            "n_changed",
            "number_of_variations",
            "max_variation",
            "average_variation",
            "median_variation",
        ],
    );
    let mut units = Section::new(
        "units",
        &[
            "da_id",
            "unit_id",
            "aggregate_pi",
            "aggregate_rank",
            "theta",
            "normalized_rank",
            "variation",
        ],
    );
    for (d, result) in areas.iter().zip(reports) {
        let r = match result {
            Ok(r) => r,
            Err(RankingError::InsufficientUnits { found, .. }) => {
                meta.note(format!("area {d} skipped: {found} ranked unit(s)"));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for u in &r.dropped_units {
            meta.note(format!(
                "unit {u} left out of area {d}: only zero-publication disciplines"
            ));
        }
        let c = compare_rankings_with(&r.aggregate, &r.normalized, basis)?;
        summary.push(vec![
            r.da_id.clone().into(),
            r.n_sds.into(),
            c.n_units.into(),
            c.n_changed.into(),
            format!("{} (out of {})", c.n_changed, c.n_units).into(),
            c.max_variation.into(),
            c.average_variation.into(),
            c.median_variation.into(),
        ]);
        let variations: BTreeMap<String, usize> = rank_variations(&r.aggregate, &r.normalized)?
            .into_iter()
            .collect();
        for e in &r.aggregate.entries {
            units.push(vec![
                r.da_id.clone().into(),
                e.unit_id.clone().into(),
                e.value.into(),
                e.rank.into(),
                r.normalized.value_of(&e.unit_id).into(),
                r.normalized.rank_of(&e.unit_id).into(),
                variations.get(&e.unit_id).copied().into(),
            ]);
        }
    }
    let mut report = Report::new(meta);
    report.sections.push(summary);
    report.sections.push(units);
    emit(&report, out, stdout)?;
    Ok(0)
}

fn cmd_sector(
    countries: &Path,
    reference: &str,
    calibration: Calibration,
    out: &OutputArgs,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut meta = Metadata::new("sector");
    let bytes = io::read_file(countries)?;
    meta.inputs
        .push(InputDigest::of(countries.display().to_string(), &bytes));
    meta.config("countries", countries.display())
        .config("reference", reference);
    match calibration {
        Calibration::PublicIntensity(pi) => {
            meta.config("public_pi", pi);
        }
        Calibration::ClassifiedCounts {
            private_publications,
            private_researchers,
        } => {
            meta.config("private_pubs", private_publications)
                .config("private_researchers", private_researchers);
        }
    }
    echo_output(&mut meta, out);
    let records = io::parse_countries(&bytes)?;
    let table = sector_comparison_table(&records, reference, calibration)
        .map_err(|e| CliError::Data(e.to_string()))?;
    meta.note(format!(
        "private_intensity={:.6} calibrated from {}",
        table.private_intensity.value, table.reference_country
    ));
    if table.private_intensity.warning.is_some() {
        meta.note("calibrated private intensity is negative (input rounding); zero was applied");
    }
    for r in &table.results {
        if let Some(w) = r.warning {
            meta.note(format!("{}: public intensity {w:?}", r.country_id));
        }
    }

    let mut columns = vec!["indicator".to_string()];
    columns.extend(table.results.iter().map(|r| r.country_id.clone()));
    let mut s = Section::with_columns("comparison", columns);
    let row = |label: &str, f: &dyn Fn(usize) -> Cell| -> Vec<Cell> {
        std::iter::once(label.into())
            .chain((0..records.len()).map(f))
            .collect()
    };
    s.push(row("publications_per_researcher", &|i| {
        records[i].publications_per_researcher.into()
    }));
    s.push(row("rank_total", &|i| table.results[i].rank_total.into()));
    s.push(row("public_share_percent", &|i| {
        (records[i].public_share * 100.0).into()
    }));
    s.push(row("public_publications_per_researcher", &|i| {
        table.results[i].public_intensity.into()
    }));
    s.push(row("rank_public", &|i| table.results[i].rank_public.into()));
    let mut report = Report::new(meta);
    report.sections.push(s);
    emit(&report, out, stdout)?;
    Ok(0)
}

fn cmd_synth(
    config_path: Option<&Path>,
    scenario: Scenario,
    seed: Option<u64>,
    out_dir: Option<&Path>,
    out: &OutputArgs,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let mut meta = Metadata::new("synth");
    let config = match config_path {
        Some(path) => {
            let bytes = io::read_file(path)?;
            meta.inputs
                .push(InputDigest::of(path.display().to_string(), &bytes));
            meta.config("config", path.display());
            let mut c = io::parse_synth_config(&bytes)?;
            if let Some(s) = seed {
                c.seed = s;
            }
            c
        }
        None => {
            meta.config(
                "scenario",
                match scenario {
                    Scenario::Heterogeneous => "heterogeneous",
                    Scenario::Ab => "ab",
                },
            );
            match scenario {
                Scenario::Heterogeneous => SynthConfig::heterogeneous(seed.unwrap_or(42)),
                Scenario::Ab => SynthConfig::ab_scenario(),
            }
        }
    };
    meta.config("seed", config.seed);
    if let Some(dir) = out_dir {
        meta.config("out_dir", dir.display());
    }
    echo_output(&mut meta, out);

    let corpus = generate_corpus(&config).map_err(|e| CliError::Data(e.to_string()))?;
    let csv = io::corpus_to_csv(&corpus)?;
    if let Some(dir) = out_dir {
        csv.write_to_dir(dir)?;
    }

    let mut files = Section::new("files", &["file", "rows", "sha256"]);
    for (name, bytes) in csv.files() {
        let rows = bytes
            .iter()
            .filter(|b| **b == b'\n')
            .count()
            .saturating_sub(1);
        files.push(vec![
            name.into(),
            rows.into(),
            crate::report::sha256_hex(bytes).into(),
        ]);
    }
    let table = intensity_table(&corpus, Scope::Sd, CountingMode::Whole);
    let mut cells = Section::new(
        "cells",
        &["unit_id", "sd_id", "researchers", "publications"],
    );
    for c in &table.cells {
        cells.push(vec![
            c.unit_id.clone().into(),
            c.scope_id.clone().into(),
            c.researcher_count.into(),
            c.publication_count.into(),
        ]);
    }
    let mut report = Report::new(meta);
    report.sections.push(files);
    report.sections.push(cells);
    emit(&report, out, stdout)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn year_ranges() {
        assert_eq!(parse_years("2001-2003"), Ok((2001, 2003)));
        assert_eq!(parse_years("2002"), Ok((2002, 2002)));
        assert!(parse_years("2003-2001").is_err());
        assert!(parse_years("abc").is_err());
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(["fieldnorm", "rank", "--bogus"], &mut out, &mut err);
        assert_eq!(code, 2);
        let msg = String::from_utf8(err).unwrap();
        assert_eq!(msg.lines().count(), 1, "{msg}");
    }

    #[test]
    fn missing_corpus_paths_is_usage_error() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        assert_eq!(run(["fieldnorm", "intensity"], &mut out, &mut err), 2);
        assert!(String::from_utf8(err).unwrap().contains("--taxonomy"));
    }
}
