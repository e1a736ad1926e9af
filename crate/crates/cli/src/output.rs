use serde::Serialize;
use serde_json::Value;

use crate::{CliError, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A command result: a flat table for CSV and a structured document for
/// JSON. Both renderings are pure functions of the report.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub json: Value,
}

impl Report {
    /// Starts a report; `body` must serialize to a JSON object and gains
    /// `schema_version` and `command` keys.
    pub fn new<B: Serialize>(command: &str, header: &[&str], body: &B) -> Result<Report, CliError> {
        let mut json = serde_json::to_value(body).map_err(|e| CliError::Io(e.to_string()))?;
        let Value::Object(map) = &mut json else {
            return Err(CliError::Io("report body is not an object".into()));
        };
        map.insert("schema_version".into(), SCHEMA_VERSION.into());
        map.insert("command".into(), command.into());
        Ok(Report {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            json,
        })
    }

    pub fn row<I, T>(&mut self, cells: I)
    where
        I: IntoIterator<Item = T>,
        T: Into<Cell>,
    {
        self.rows.push(cells.into_iter().map(|c| c.into().0).collect());
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json).map_err(|e| CliError::Io(e.to_string()))?;
                s.push('\n');
                Ok(s)
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                let io = |e: csv::Error| CliError::Io(e.to_string());
                w.write_record(&self.header).map_err(io)?;
                for r in &self.rows {
                    w.write_record(r).map_err(io)?;
                }
                let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
                String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
            }
        }
    }
}

/// One CSV field. Floats use the shortest representation that round-trips,
/// independent of locale, switching to exponent form for very small or
/// large magnitudes.
pub struct Cell(pub String);

impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        let a = v.abs();
        if a != 0.0 && !(1e-5..1e15).contains(&a) {
            Cell(format!("{v:e}"))
        } else {
            Cell(format!("{v}"))
        }
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Cell {
        Cell(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Cell {
        Cell(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Cell {
        Cell(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Cell {
        Cell(v.to_string())
    }
}
