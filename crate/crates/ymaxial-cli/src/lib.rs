//! Config-driven front end: `run` turns a validated RunConfig into an Output
//! table, `render` writes it as CSV or JSON with the config echoed in.

pub mod commands;
pub mod config;

use std::fmt;

use serde_json::{json, Map, Value};

pub use commands::run;
pub use config::{Command, ConnectionChoice, Format, GroupSpec, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Exit code 2.
    Config(String),
    /// Exit code 3.
    Numerical(String),
    /// Exit code 1: file system trouble.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid config: {m}"),
            CliError::Numerical(m) => write!(f, "numerical guard: {m}"),
            CliError::Io(m) => write!(f, "i/o: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ymaxial::Error> for CliError {
    fn from(e: ymaxial::Error) -> Self {
        match e {
            ymaxial::Error::InvalidInput(m) => CliError::Config(m),
            ymaxial::Error::NumericalGuard(m) => CliError::Numerical(m),
        }
    }
}

/// A command's result: one table plus non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub command: Command,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    pub warnings: Vec<String>,
}

impl Output {
    pub fn new(command: Command, columns: &[&'static str]) -> Output {
        Output { command, columns: columns.to_vec(), rows: vec![], warnings: vec![] }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Rows as objects keyed by column name.
    pub fn records(&self) -> Vec<Value> {
        self.rows.iter().map(|r| Value::Object(self.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect::<Map<_, _>>())).collect()
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// CSV: `# config: {...}` and `# warning: ...` comment lines, then the table.
/// JSON: a single record {command, config, warnings, rows}.
pub fn render(out: &Output, cfg: &RunConfig) -> Result<String, CliError> {
    let echo = serde_json::to_value(cfg).map_err(|e| CliError::Io(e.to_string()))?;
    match cfg.format {
        Format::Json => {
            let rec = json!({ "command": out.command, "config": echo, "warnings": out.warnings, "rows": out.records() });
            serde_json::to_string_pretty(&rec).map(|s| s + "\n").map_err(|e| CliError::Io(e.to_string()))
        }
        Format::Csv => {
            let mut head = format!("# config: {echo}\n");
            for w in &out.warnings {
                head.push_str(&format!("# warning: {w}\n"));
            }
            let mut wtr = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| CliError::Io(e.to_string());
            wtr.write_record(&out.columns).map_err(io)?;
            for r in &out.rows {
                wtr.write_record(r.iter().map(cell)).map_err(io)?;
            }
            let body = wtr.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
            Ok(head + &String::from_utf8_lossy(&body))
        }
    }
}
