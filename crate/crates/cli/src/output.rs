use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use gwlab::OffspringDistribution;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Format};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => x.to_string(),
            Cell::Int(k) => k.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(k: usize) -> Self {
        Cell::Int(k as u64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    #[serde(skip)]
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// What a subcommand produced.
#[derive(Debug, Default)]
pub struct Report {
    pub summary: Value,
    pub tables: Vec<Table>,
    /// Files written verbatim (name, bytes), after the metadata line.
    pub raw: Vec<(String, String)>,
    /// Failed statistical checks; reported, exit status unaffected.
    pub warnings: Vec<String>,
    /// Failed exact checks; exit status 1.
    pub failures: Vec<String>,
    /// Depth at which the W values behind a tail were computed.
    pub w_truncation_depth: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub offspring: String,
    pub m: f64,
    pub q: f64,
    pub hyp_holds: bool,
    pub depth: usize,
    pub subtree_depth: usize,
    pub reps: usize,
    pub w_truncation_depth: Option<usize>,
    pub config: ExperimentConfig,
}

impl Meta {
    pub fn new(cfg: &ExperimentConfig, d: &OffspringDistribution, w_depth: Option<usize>) -> Self {
        Meta {
            tool: "gwlab",
            version: env!("CARGO_PKG_VERSION"),
            command: cfg.command.clone(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            offspring: cfg.offspring.clone(),
            m: d.mean(),
            q: d.q(),
            hyp_holds: d.is_supercritical(),
            depth: cfg.depth,
            subtree_depth: cfg.subtree_depth,
            reps: cfg.reps,
            w_truncation_depth: w_depth,
            config: cfg.clone(),
        }
    }

    /// `# key=value` lines for CSV headers.
    fn comment_lines(&self) -> String {
        let mut s = String::new();
        if let Value::Object(map) = serde_json::to_value(self).expect("meta serialises") {
            for (k, v) in map {
                let v = match v {
                    Value::String(t) => t,
                    other => other.to_string(),
                };
                let _ = writeln!(s, "# {k}={v}");
            }
        }
        s
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        Value::String(s) => out.push((prefix.into(), s.clone())),
        other => out.push((prefix.into(), other.to_string())),
    }
}

/// Writes the report and returns the paths written.
pub fn write(cfg: &ExperimentConfig, meta: &Meta, report: &Report) -> Result<Vec<PathBuf>, CliError> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::Failure(format!("cannot create {}: {e}", dir.display())))?;
    let mut files: Vec<(String, String)> = Vec::new();
    match cfg.format {
        Format::Json => {
            let tables: serde_json::Map<String, Value> = report
                .tables
                .iter()
                .map(|t| (t.name.clone(), serde_json::to_value(t).expect("table serialises")))
                .collect();
            let doc = json!({
                "meta": meta,
                "summary": report.summary,
                "tables": tables,
                "warnings": report.warnings,
                "failures": report.failures,
            });
            let mut text = serde_json::to_string_pretty(&doc).expect("report serialises");
            text.push('\n');
            files.push((format!("{}.json", cfg.command), text));
        }
        Format::Csv => {
            let header = meta.comment_lines();
            for t in &report.tables {
                let mut s = header.clone();
                s.push_str(&t.columns.join(","));
                s.push('\n');
                for row in &t.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
                files.push((format!("{}_{}.csv", cfg.command, t.name), s));
            }
            let mut pairs = Vec::new();
            flatten("", &report.summary, &mut pairs);
            for (i, w) in report.warnings.iter().enumerate() {
                pairs.push((format!("warning.{i}"), w.clone()));
            }
            for (i, w) in report.failures.iter().enumerate() {
                pairs.push((format!("failure.{i}"), w.clone()));
            }
            let mut s = header;
            s.push_str("key,value\n");
            for (k, v) in pairs {
                let _ = writeln!(s, "{},{}", k, Cell::Text(v).csv());
            }
            files.push((format!("{}_summary.csv", cfg.command), s));
        }
    }
    let meta_line = serde_json::to_string(&json!({ "meta": meta })).expect("meta serialises");
    for (name, body) in &report.raw {
        let text = if name.ends_with(".csv") {
            format!("{}{body}", meta.comment_lines())
        } else {
            format!("{meta_line}\n{body}")
        };
        files.push((name.clone(), text));
    }
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}
