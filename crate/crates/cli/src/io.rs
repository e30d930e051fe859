//! Output sinks, provenance headers, and branch file parsing.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use hopf_dbc::continuation::BRANCH_CSV_COLUMNS;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Opens `path`, or stdout when absent.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Config(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// Comment lines carrying the config hash and the hashed config itself.
pub fn write_header(w: &mut dyn Write, cfg: &RunConfig) -> io::Result<()> {
    writeln!(w, "# config_sha256={}", cfg.hash())?;
    writeln!(w, "# config={}", cfg.canonical_json())
}

/// Adds the schema version, command name and config hash to a document.
pub fn document(command: &str, cfg: &RunConfig, body: Value) -> Value {
    let mut doc = json!({
        "schema": SCHEMA_VERSION,
        "command": command,
        "config_sha256": cfg.hash(),
    });
    if let (Some(d), Value::Object(b)) = (doc.as_object_mut(), body) {
        d.extend(b);
    }
    doc
}

pub fn write_json(path: Option<&Path>, doc: &Value) -> Result<(), CliError> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, doc).map_err(|e| CliError::Config(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Non-finite values have no JSON representation and become `null`.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// One row of a branch CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchRecord {
    pub index: usize,
    pub mu: f64,
    pub omega: f64,
    pub r: f64,
    pub u_inf: f64,
    pub newton_iters: usize,
    pub residual: f64,
    pub stability: String,
    pub lambda1: Option<f64>,
    pub termination: String,
}

fn schema_err(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {msg}", path.display()))
}

fn reader(path: &Path, headers: bool) -> Result<csv::Reader<File>, CliError> {
    let f = File::open(path).map_err(|e| schema_err(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(headers)
        .trim(csv::Trim::All)
        .from_reader(f))
}

pub fn read_branch(path: &Path) -> Result<Vec<BranchRecord>, CliError> {
    let mut rdr = reader(path, true)?;
    let headers = rdr.headers().map_err(|e| schema_err(path, e))?.clone();
    if headers.iter().ne(BRANCH_CSV_COLUMNS.iter().copied()) {
        return Err(schema_err(
            path,
            format!("expected columns {}, found {}", BRANCH_CSV_COLUMNS.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| schema_err(path, e))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let f = |i: usize| -> Result<f64, CliError> {
            field(i)
                .parse::<f64>()
                .map_err(|e| schema_err(path, format!("row {line}, column {}: {e}", BRANCH_CSV_COLUMNS[i])))
        };
        let u = |i: usize| -> Result<usize, CliError> {
            field(i)
                .parse::<usize>()
                .map_err(|e| schema_err(path, format!("row {line}, column {}: {e}", BRANCH_CSV_COLUMNS[i])))
        };
        out.push(BranchRecord {
            index: u(0)?,
            mu: f(1)?,
            omega: f(2)?,
            r: f(3)?,
            u_inf: f(4)?,
            newton_iters: u(5)?,
            residual: f(6)?,
            stability: field(7).to_string(),
            lambda1: if field(8).is_empty() { None } else { Some(f(8)?) },
            termination: field(9).to_string(),
        });
    }
    if out.is_empty() {
        return Err(schema_err(path, "branch file has no rows"));
    }
    Ok(out)
}

pub fn write_branch(w: &mut dyn Write, rows: &[BranchRecord]) -> io::Result<()> {
    writeln!(w, "{}", BRANCH_CSV_COLUMNS.join(","))?;
    for p in rows {
        let lambda1 = p.lambda1.map(|l| l.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{lambda1},{}",
            p.index, p.mu, p.omega, p.r, p.u_inf, p.newton_iters, p.residual, p.stability, p.termination
        )?;
    }
    Ok(())
}

/// Profile sidecar: one row of boundary-trace grid values per branch point.
pub fn read_profiles(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let mut rdr = reader(path, false)?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| schema_err(path, e))?;
        let row = rec
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| schema_err(path, format!("row {line}: {e}")))?;
        out.push(row);
    }
    Ok(out)
}
