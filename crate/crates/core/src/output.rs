//! CSV emission shared by every command: `#` header lines followed by a
//! plain comma-separated table, written atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance lines written ahead of every table.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvHeader {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub command_line: String,
}

impl CsvHeader {
    pub fn render(&self) -> String {
        format!(
            "# tool: greencell {TOOL_VERSION}\n# command: {}\n# config_hash: {}\n# seed: {}\n# command_line: {}\n",
            self.command, self.config_hash, self.seed, self.command_line
        )
    }
}

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_s: f64,
    pub tool_version: String,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest is always serializable")
    }
}

/// Header plus table rows as one string.
pub fn csv_document(header: &CsvHeader, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(header.render().into_bytes());
    w.write_record(columns).expect("in-memory write");
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// A table read back from [`csv_document`] output.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDocument {
    /// Header comment lines without the leading `#`.
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn parse_document(text: &str) -> Result<CsvDocument> {
    let comments = text
        .lines()
        .map_while(|l| l.strip_prefix('#'))
        .map(|c| c.trim().to_string())
        .collect();
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let parse = |e: csv::Error| Error::Parse(e.to_string());
    let columns = r
        .headers()
        .map_err(parse)?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()
        .map_err(parse)?;
    Ok(CsvDocument {
        comments,
        columns,
        rows,
    })
}

/// Float formatting used in every table: shortest round-trip form,
/// exponent notation for very large or small magnitudes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
