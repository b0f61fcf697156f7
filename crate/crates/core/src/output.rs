//! CSV tables and run summaries.
//!
//! Numbers are written with 17 significant digits so identical inputs give
//! byte-identical files.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::config::Config;

/// Fixed scientific formatting, 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// A table with `#`-prefixed comment lines above the column header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            comments: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) -> &mut Self {
        self.comments.push(line.into());
        self
    }

    /// Echo the resolved configuration into the comments.
    pub fn echo_config(&mut self, cfg: &Config) -> &mut Self {
        for (k, v) in cfg.entries() {
            self.comments.push(format!("{k} = {v}"));
        }
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.comments {
            let _ = writeln!(s, "# {c}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| fmt_num(x)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.render())
    }
}

/// Parse a table written by [`Table::render`].
pub fn parse_table(text: &str) -> Option<Table> {
    let mut t = Table::default();
    for line in text.lines() {
        if let Some(c) = line.strip_prefix("# ") {
            t.comments.push(c.to_string());
        } else if t.columns.is_empty() {
            t.columns = line.split(',').map(str::to_string).collect();
        } else {
            let row: Option<Vec<f64>> = line.split(',').map(|x| x.parse().ok()).collect();
            t.rows.push(row?);
        }
    }
    Some(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scalar {
    pub name: String,
    pub value: f64,
    pub unit: String,
}

/// Scalar figures of merit plus the resolved configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub scenario: String,
    pub scalars: Vec<Scalar>,
    pub notes: Vec<String>,
    pub config: Vec<(String, String)>,
}

impl RunSummary {
    pub fn new(scenario: &str, cfg: &Config) -> Self {
        RunSummary {
            scenario: scenario.to_string(),
            config: cfg.entries().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            ..Default::default()
        }
    }

    pub fn add(&mut self, name: &str, value: f64, unit: &str) -> &mut Self {
        self.scalars.push(Scalar {
            name: name.to_string(),
            value,
            unit: unit.to_string(),
        });
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.scalars.iter().find(|s| s.name == name).map(|s| s.value)
    }

    /// `name = value` lines with the unit in a trailing comment, the notes,
    /// then the configuration under `config.`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {}", self.scenario);
        for sc in &self.scalars {
            let _ = writeln!(s, "{} = {} # {}", sc.name, fmt_num(sc.value), sc.unit);
        }
        for (i, n) in self.notes.iter().enumerate() {
            let _ = writeln!(s, "note_{i} = {n}");
        }
        for (k, v) in &self.config {
            let _ = writeln!(s, "config.{k} = {v}");
        }
        s
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.render())
    }
}
