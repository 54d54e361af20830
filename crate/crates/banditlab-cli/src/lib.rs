//! Experiment front end: resolved run specifications, deterministic CSV/JSON
//! table output, and minimal SVG line plots.
//!
//! Every command resolves its flags (and preset, if any) into a [`RunSpec`]
//! that is echoed into the output header, so a run can be reproduced from its
//! output file alone. Tables are byte-deterministic: floats are printed with
//! 17 significant digits, and all randomness flows from the seed in the spec.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

pub mod plot;
pub mod run;

/// Fully resolved description of one run, echoed into every output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunSpec {
    Solve {
        mu: Vec<f64>,
        sigma: f64,
        horizon: usize,
        gamma: f64,
    },
    Simulate {
        mu: Vec<f64>,
        sigma: f64,
        horizon: usize,
        gamma: f64,
        seed: u64,
    },
    Sweep {
        k: usize,
        sigma: f64,
        horizon: usize,
        gamma: f64,
        deltas: Vec<f64>,
        reps: usize,
        seed: u64,
        workers: Option<usize>,
    },
    Coverage {
        mu: Vec<f64>,
        sigma: f64,
        horizon: usize,
        gamma: f64,
        alphas: Vec<f64>,
        estimate_sigma: bool,
        reps: usize,
        seed: u64,
        workers: Option<usize>,
    },
    Clt {
        mu: Vec<f64>,
        sigma: f64,
        horizon: usize,
        gamma: f64,
        reps: usize,
        seed: u64,
        workers: Option<usize>,
    },
    Linear {
        decision_set: Vec<Vec<f64>>,
        beta_star: Vec<f64>,
        sigma: f64,
        horizon: usize,
        gamma: f64,
        lambda: f64,
        direction: Vec<f64>,
        reps: usize,
        seed: u64,
        workers: Option<usize>,
    },
    Audit {
        mu: Vec<f64>,
        sigma: f64,
        horizon: usize,
        gamma: f64,
        reps: usize,
        seed: u64,
        workers: Option<usize>,
    },
    Crossing {
        horizon: usize,
        x_grid: Vec<f64>,
        reps: usize,
        seed: u64,
        workers: Option<usize>,
    },
}

/// Output format of a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// A schema-tagged numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row does not match schema");
        self.rows.push(row);
    }

    /// Column index by name.
    pub fn col(&self, name: &str) -> usize {
        self.columns
            .iter()
            .position(|c| c == name)
            .unwrap_or_else(|| panic!("no column {name}"))
    }
}

/// Prints a float with 17 significant digits ('.'-decimal, `e` exponent);
/// round-trips exactly through `f64::from_str`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders the table with its spec echo in the requested format.
pub fn render_table(spec: &RunSpec, table: &Table, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut out = String::new();
            let spec_json = serde_json::to_string(spec).expect("spec serializes");
            writeln!(out, "# spec: {spec_json}").unwrap();
            writeln!(out, "{}", table.columns.join(",")).unwrap();
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
                writeln!(out, "{}", cells.join(",")).unwrap();
            }
            out
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                spec: &'a RunSpec,
                columns: &'a [String],
                rows: &'a [Vec<f64>],
            }
            let mut out = serde_json::to_string_pretty(&Doc {
                spec,
                columns: &table.columns,
                rows: &table.rows,
            })
            .expect("table serializes");
            out.push('\n');
            out
        }
    }
}

/// Writes the rendered table to `path`.
pub fn emit_table(
    spec: &RunSpec,
    table: &Table,
    format: Format,
    path: &Path,
) -> std::io::Result<()> {
    std::fs::write(path, render_table(spec, table, format))
}

/// Parses a CSV table produced by [`render_table`], ignoring `#` lines.
pub fn parse_csv_table(text: &str) -> Result<Table, String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().ok_or("missing header row")?;
    let columns: Vec<String> = header.split(',').map(|c| c.to_string()).collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|c| c.parse::<f64>().map_err(|e| format!("bad cell {c:?}: {e}")))
            .collect::<Result<_, _>>()?;
        if row.len() != columns.len() {
            return Err(format!(
                "row has {} cells, expected {}",
                row.len(),
                columns.len()
            ));
        }
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

/// Recovers the spec echo from a rendered CSV table.
pub fn parse_csv_spec(text: &str) -> Result<serde_json::Value, String> {
    let line = text
        .lines()
        .find(|l| l.starts_with("# spec: "))
        .ok_or("missing spec echo")?;
    serde_json::from_str(&line["# spec: ".len()..]).map_err(|e| e.to_string())
}
