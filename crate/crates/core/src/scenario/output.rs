//! CSV tables and the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub name: String,
    pub action: String,
    pub preset: Option<String>,
    pub version: String,
    /// Parameter point in document units after defaults were applied.
    pub params: serde_json::Value,
    pub defaulted: Vec<String>,
    pub options: serde_json::Value,
    pub series: serde_json::Value,
    pub sweep: serde_json::Value,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub workers: Option<usize>,
    pub notes: Vec<String>,
    pub outputs: Vec<PathBuf>,
    pub rows: usize,
    pub failed_rows: usize,
    pub status: String,
    pub summary: serde_json::Value,
    pub wall_time_s: f64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02e23, -2.5, 0.0, 123456789.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            let digits = s.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
            assert!(digits.trim_start_matches('0').len() <= 17, "{s}");
        }
        assert_eq!(fmt_f64(0.25), "0.25");
    }

    #[test]
    fn csv_has_header_and_quotes_text() {
        let mut t = Table::new(&["x", "status"]);
        t.push(vec![fmt_f64(1.5), "error: a, b".into()]);
        assert_eq!(t.to_csv_string().unwrap(), "x,status\n1.5,\"error: a, b\"\n");
    }
}
