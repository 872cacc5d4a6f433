//! Reports and CSV tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use mlz_core::{IntegrationConfig, ProbabilityMatrix};
use serde::Serialize;
use serde_json::Value;

/// Twelve significant digits in scientific notation; identical bits give
/// identical text.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.11e}")
}

fn row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let cells: Vec<String> = cells.into_iter().collect();
    out.push_str(&cells.join(","));
    out.push('\n');
}

/// P as CSV: header of initial levels, one row per final level.
pub fn matrix_csv(p: &ProbabilityMatrix) -> String {
    let n = p.dim();
    let mut out = String::new();
    row(&mut out, std::iter::once("final\\initial".to_string()).chain((1..=n).map(|k| k.to_string())));
    for f in 0..n {
        row(&mut out, std::iter::once((f + 1).to_string()).chain((0..n).map(|i| fmt_num(p.get(f, i)))));
    }
    out
}

/// Selected columns of P; `cols` holds 0-based initial levels.
pub fn columns_csv(cols: &[(usize, Vec<f64>)]) -> String {
    let n = cols.first().map_or(0, |c| c.1.len());
    let mut out = String::new();
    row(&mut out, std::iter::once("final\\initial".to_string()).chain(cols.iter().map(|c| (c.0 + 1).to_string())));
    for f in 0..n {
        row(&mut out, std::iter::once((f + 1).to_string()).chain(cols.iter().map(|c| fmt_num(c.1[f]))));
    }
    out
}

/// Generic table with a header row.
pub fn table_csv(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    row(&mut out, header.iter().cloned());
    for r in rows {
        row(&mut out, r.iter().map(|&v| fmt_num(v)));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub model_fingerprint: Option<String>,
    pub config: Option<IntegrationConfig>,
    pub outputs: BTreeMap<String, Value>,
    /// CSV text keyed by table name; replaced by file paths when written.
    pub tables: BTreeMap<String, String>,
    /// Model-spec JSON documents keyed by name.
    pub models: BTreeMap<String, Value>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            model_fingerprint: None,
            config: None,
            outputs: BTreeMap::new(),
            tables: BTreeMap::new(),
            models: BTreeMap::new(),
            verdicts: BTreeMap::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|v| v.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_pass() {
            0
        } else {
            1
        }
    }

    /// Writes tables as `<name>.csv`, models as `<name>.json` and the report
    /// as `report.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = self.clone();
        for (name, csv) in &self.tables {
            let path = dir.join(format!("{name}.csv"));
            std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
            written.tables.insert(name.clone(), path.display().to_string());
        }
        for (name, model) in &self.models {
            let path = dir.join(format!("{name}.json"));
            std::fs::write(&path, serde_json::to_string_pretty(model)?).with_context(|| format!("writing {}", path.display()))?;
            written.models.insert(name.clone(), Value::String(path.display().to_string()));
        }
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&written)?)?;
        Ok(written)
    }

    /// Tables only, each preceded by a `# name` line when there are several.
    pub fn csv_text(&self) -> String {
        let mut out = String::new();
        let many = self.tables.len() > 1;
        for (name, csv) in &self.tables {
            if many {
                let _ = writeln!(out, "# {name}");
            }
            out.push_str(csv);
        }
        out
    }
}
