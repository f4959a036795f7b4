//! Trace CSVs and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use lambda_heom::analysis::{ConvergenceReport, ValidationReport, Verdict};
use lambda_heom::{FidelityTrace, TraceRow};
use serde::{Deserialize, Serialize};

use crate::config::JobDocument;
use crate::error::{CliError, CliResult};

pub const CSV_HEADER: [&str; 9] = [
    "t", "F", "rho11", "rho22", "rho33", "re_rho12", "im_rho12", "trace", "herm_err",
];

pub const MANIFEST_NAME: &str = "manifest.json";

/// 17 significant digits; enough to round-trip every f64.
fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::io(path, source),
        other => CliError::Schema {
            path: path.into(),
            message: format!("{other:?}"),
        },
    }
}

pub fn write_trace(path: &Path, trace: &FidelityTrace) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(CSV_HEADER).map_err(|e| csv_error(path, e))?;
    for r in trace.rows() {
        let fields = [r.t, r.fidelity, r.rho11, r.rho22, r.rho33, r.re_rho12, r.im_rho12, r.trace, r.herm_err];
        w.write_record(fields.map(format_float)).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_trace(path: &Path) -> CliResult<FidelityTrace> {
    let schema = |message: String| CliError::Schema {
        path: path.into(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(schema(format!(
            "header `{}` does not match `{}`",
            header.iter().collect::<Vec<_>>().join(","),
            CSV_HEADER.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let v = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| schema(format!("row {}: {e}", line + 2)))?;
        if v.len() != CSV_HEADER.len() {
            return Err(schema(format!("row {} has {} fields", line + 2, v.len())));
        }
        rows.push(TraceRow {
            t: v[0],
            fidelity: v[1],
            rho11: v[2],
            rho22: v[3],
            rho33: v[4],
            re_rho12: v[5],
            im_rho12: v[6],
            trace: v[7],
            herm_err: v[8],
        });
    }
    FidelityTrace::from_rows(rows).map_err(|e| schema(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub label: String,
    /// File name relative to the manifest.
    pub csv: String,
    /// Fully resolved document of this run.
    pub config: JobDocument,
    pub diagnostics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    /// Resolved base document before any sweep axis was applied.
    pub config: JobDocument,
    pub runs: Vec<RunEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
}

impl Manifest {
    pub const TOOL: &'static str = "lambda-heom";

    pub fn new(subcommand: &str, config: JobDocument) -> Self {
        Self {
            tool: Self::TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            started_unix_seconds: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            wall_clock_seconds: 0.0,
            config,
            runs: Vec::new(),
            convergence: None,
            validation: None,
            verdict: None,
        }
    }

    /// True if `value` looks like a manifest rather than a job document.
    pub fn is_manifest(value: &serde_json::Value) -> bool {
        value.get("tool").and_then(|t| t.as_str()) == Some(Self::TOOL) && value.get("runs").is_some()
    }

    pub fn from_value(value: serde_json::Value) -> CliResult<Self> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(path, e.into_inner().to_string())
        })
    }

    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).expect("manifests always serialize");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// `Gamma=0.5` → `03_Gamma_0.5.csv`; the index keeps repeated values apart.
pub fn csv_name(index: usize, label: &str) -> String {
    let stem: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    format!("{index:02}_{stem}.csv")
}
