//! Versioned JSON report envelope and the single-writer output step.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Bumped whenever the layout of `result` changes incompatibly.
pub const SCHEMA: &str = "warpstab-report/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema: String,
    pub kind: String,
    pub config: Value,
    pub result: Value,
    pub checks: Vec<Check>,
}

/// One invariant evaluated on the run; `--strict` turns any failing check into exit code 4.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, pass: value <= limit }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit, pass: value >= limit }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Self { name: name.into(), value: ok as u8 as f64, limit: 1.0, pass: ok }
    }
}

impl Report {
    pub fn new(kind: &str, config: Value, result: Value, checks: Vec<Check>) -> Self {
        Self { schema: SCHEMA.into(), kind: kind.into(), config, result, checks }
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn read(path: &Path) -> anyhow::Result<Value> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Everything a run produces, held in memory until the run has finished.
pub struct Artifacts {
    pub report: Report,
    /// Additional files as `(relative path, contents)`.
    pub files: Vec<(String, String)>,
}

pub fn to_json<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("report values serialize")
}

/// Write `report.json`, the extra files and `metadata.json` into `dir`.
pub fn write_artifacts(dir: &Path, artifacts: &Artifacts, config_path: &Path, elapsed: f64) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let write = |name: &str, contents: &str| -> anyhow::Result<()> {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    };
    write("report.json", &(serde_json::to_string_pretty(&artifacts.report)? + "\n"))?;
    for (name, contents) in &artifacts.files {
        write(name, contents)?;
    }
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let metadata = serde_json::json!({
        "schema": SCHEMA,
        "kind": artifacts.report.kind,
        "created_unix_seconds": created,
        "elapsed_seconds": elapsed,
        "warpstab_version": env!("CARGO_PKG_VERSION"),
        "config_path": config_path.display().to_string(),
        "files": std::iter::once("report.json".to_string())
            .chain(artifacts.files.iter().map(|(n, _)| n.clone()))
            .collect::<Vec<_>>(),
    });
    write("metadata.json", &(serde_json::to_string_pretty(&metadata)? + "\n"))
}

/// CSV with a header line and rows formatted in shortest round-trip form.
pub fn csv<const N: usize>(header: &str, rows: &[[f64; N]]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
