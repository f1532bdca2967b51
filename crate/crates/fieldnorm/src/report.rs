//! Report artifacts.
//!
//! A [`Report`] is a metadata block plus named tables. TSV and JSON are two
//! renderings of the same structure: in TSV the metadata becomes `#` comment
//! lines and each table is introduced by `# section: <name>`; in JSON the
//! metadata is an object and each table an array of row objects.

use std::fmt::Write as _;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Tsv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Str(String),
    Int(i64),
    Float(f64),
    Empty,
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Str(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::Int(v as i64)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

impl Cell {
    fn tsv(&self) -> String {
        match self {
            Cell::Str(s) => s.replace(['\t', '\n', '\r'], " "),
            Cell::Int(i) => i.to_string(),
            Cell::Float(f) => format!("{f:.6}"),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Str(s) => Value::String(s.clone()),
            Cell::Int(i) => Value::from(*i),
            Cell::Float(f) => serde_json::Number::from_f64(*f).map_or(Value::Null, Value::Number),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Section {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Section {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(name: &str, columns: Vec<String>) -> Self {
        Section {
            name: name.to_string(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: impl Into<String>, bytes: &[u8]) -> Self {
        InputDigest {
            path: path.into(),
            sha256: sha256_hex(bytes),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metadata {
    pub command: String,
    /// Echo of the effective configuration, in flag order.
    pub config: Vec<(String, String)>,
    pub inputs: Vec<InputDigest>,
    pub notes: Vec<String>,
}

impl Metadata {
    pub fn new(command: &str) -> Self {
        Metadata {
            command: command.to_string(),
            config: Vec::new(),
            inputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.config.push((key.to_string(), value.to_string()));
        self
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.notes.push(note.into());
        self
    }
}

pub const TOOL: &str = "fieldnorm";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub metadata: Metadata,
    pub sections: Vec<Section>,
}

impl Report {
    pub fn new(metadata: Metadata) -> Self {
        Report {
            metadata,
            sections: Vec::new(),
        }
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Tsv => self.to_tsv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn to_tsv(&self) -> String {
        let m = &self.metadata;
        let mut out = String::new();
        let _ = writeln!(out, "# tool: {TOOL} {VERSION}");
        let _ = writeln!(out, "# command: {}", m.command);
        for (k, v) in &m.config {
            let _ = writeln!(out, "# config: {k}={v}");
        }
        for i in &m.inputs {
            let _ = writeln!(out, "# input: {} sha256={}", i.path, i.sha256);
        }
        for n in &m.notes {
            let _ = writeln!(out, "# note: {n}");
        }
        for (i, s) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "# section: {}", s.name);
            let _ = writeln!(out, "{}", s.columns.join("\t"));
            for row in &s.rows {
                let cells: Vec<String> = row.iter().map(Cell::tsv).collect();
                let _ = writeln!(out, "{}", cells.join("\t"));
            }
        }
        out
    }

    pub fn to_json_value(&self) -> Value {
        let m = &self.metadata;
        let mut meta = Map::new();
        meta.insert("tool".into(), TOOL.into());
        meta.insert("version".into(), VERSION.into());
        meta.insert("command".into(), m.command.clone().into());
        meta.insert(
            "config".into(),
            Value::Object(
                m.config
                    .iter()
                    .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                    .collect(),
            ),
        );
        meta.insert(
            "inputs".into(),
            Value::Array(
                m.inputs
                    .iter()
                    .map(|i| serde_json::json!({ "path": i.path, "sha256": i.sha256 }))
                    .collect(),
            ),
        );
        meta.insert(
            "notes".into(),
            Value::Array(m.notes.iter().cloned().map(Value::String).collect()),
        );
        let mut root = Map::new();
        root.insert("metadata".into(), Value::Object(meta));
        for s in &self.sections {
            let rows = s
                .rows
                .iter()
                .map(|row| {
                    Value::Object(
                        s.columns
                            .iter()
                            .zip(row)
                            .map(|(c, cell)| (c.clone(), cell.json()))
                            .collect(),
                    )
                })
                .collect();
            root.insert(s.name.clone(), Value::Array(rows));
        }
        Value::Object(root)
    }

    pub fn to_json(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(&self.to_json_value()).expect("report values serialize");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut m = Metadata::new("rank");
        m.config("scope", "da").note("demo");
        m.inputs.push(InputDigest::of("x.csv", b"abc"));
        let mut r = Report::new(m);
        let mut s = Section::new("ranking", &["unit_id", "rank", "value"]);
        s.push(vec!["A".into(), 1usize.into(), 0.5.into()]);
        s.push(vec!["B".into(), 2usize.into(), Cell::Empty]);
        r.sections.push(s);
        r
    }

    #[test]
    fn digest_of_known_input() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn tsv_layout() {
        let tsv = sample().to_tsv();
        let expected = format!(
            "# tool: fieldnorm {VERSION}\n# command: rank\n# config: scope=da\n# input: x.csv sha256={}\n# note: demo\n# section: ranking\nunit_id\trank\tvalue\nA\t1\t0.500000\nB\t2\t\n",
            sha256_hex(b"abc")
        );
        assert_eq!(tsv, expected);
    }

    #[test]
    fn json_mirrors_tsv_structure() {
        let v = sample().to_json_value();
        assert_eq!(v["metadata"]["config"]["scope"], "da");
        let rows = v["ranking"].as_array().unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0]["rank"], 1);
        assert_eq!(rows[0]["value"], 0.5);
        assert!(rows[1]["value"].is_null());
        let keys: Vec<&String> = rows[0].as_object().unwrap().keys().collect();
        assert_eq!(keys, ["unit_id", "rank", "value"]);
    }
}
