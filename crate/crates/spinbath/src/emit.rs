//! Result tables and their CSV / JSON encodings.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinbath_core::meanfield::BlochState;

use crate::config::{Format, RunConfig};
use crate::error::{CliError, CliResult};

pub const BASE_COLUMNS: [&str; 6] = ["t", "s0", "re_sp", "im_sp", "rho_ee", "R2"];

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Sampled trajectory: the per-particle Bloch columns plus command-specific extras.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub config: RunConfig,
}

#[derive(Serialize, Deserialize)]
struct Document {
    meta: Meta,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(extra: &[&str]) -> Self {
        let columns = BASE_COLUMNS.iter().chain(extra).map(|s| s.to_string()).collect();
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, t: f64, state: &BlochState, extra: &[f64]) {
        debug_assert_eq!(BASE_COLUMNS.len() + extra.len(), self.columns.len());
        let mut row = vec![t, state.s0, state.s_plus.re, state.s_plus.im, state.rho_ee(), state.radius_sq()];
        row.extend_from_slice(extra);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        self.column(name)?.last().copied()
    }

    pub fn write_csv(&self, w: impl Write) -> std::io::Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
        }
        out.flush()
    }

    pub fn write_json(&self, config: &RunConfig, mut w: impl Write) -> std::io::Result<()> {
        let doc = Document {
            meta: Meta { version: VERSION.to_string(), config: config.clone() },
            columns: self.columns.clone(),
            rows: self.rows.clone(),
        };
        serde_json::to_writer_pretty(&mut w, &doc)?;
        w.write_all(b"\n")
    }

    pub fn write_to(&self, config: &RunConfig, format: Format, w: impl Write) -> std::io::Result<()> {
        match format {
            Format::Csv => self.write_csv(w),
            Format::Json => self.write_json(config, w),
        }
    }

    pub fn write_file(&self, config: &RunConfig, format: Format, path: &Path) -> CliResult<()> {
        let io_err = |source| CliError::Io { path: path.to_path_buf(), source };
        let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
        self.write_to(config, format, &mut w).map_err(io_err)?;
        w.flush().map_err(io_err)
    }
}

fn format_error(path: &Path, reason: impl ToString) -> CliError {
    CliError::Format { path: PathBuf::from(path), reason: reason.to_string() }
}

/// Parses a CSV table and checks its shape: base header, rectangular, finite.
pub fn read_csv(path: &Path) -> CliResult<Table> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| format_error(path, e))?;
    let columns: Vec<String> =
        reader.headers().map_err(|e| format_error(path, e))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| format_error(path, e))?;
        let row = record
            .iter()
            .map(|v| v.parse::<f64>().map_err(|e| format_error(path, format!("{v:?}: {e}"))))
            .collect::<CliResult<Vec<_>>>()?;
        rows.push(row);
    }
    let table = Table { columns, rows };
    check_table(&table, path)?;
    Ok(table)
}

pub fn read_json(path: &Path) -> CliResult<(Meta, Table)> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    let doc: Document = serde_json::from_str(&text).map_err(|e| format_error(path, e))?;
    let table = Table { columns: doc.columns, rows: doc.rows };
    check_table(&table, path)?;
    Ok((doc.meta, table))
}

fn check_table(table: &Table, path: &Path) -> CliResult<()> {
    if table.columns.len() < BASE_COLUMNS.len() || table.columns[..BASE_COLUMNS.len()] != BASE_COLUMNS {
        return Err(format_error(path, format!("header must start with {}", BASE_COLUMNS.join(","))));
    }
    if table.rows.is_empty() {
        return Err(format_error(path, "no rows"));
    }
    for (i, row) in table.rows.iter().enumerate() {
        if row.len() != table.columns.len() {
            return Err(format_error(path, format!("row {i} has {} fields", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(format_error(path, format!("row {i} has a non-finite value")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use spinbath_core::Complex64;

    fn sample() -> Table {
        let mut t = Table::new(&["trace"]);
        t.push(0.0, &BlochState::excited(), &[1.0]);
        t.push(0.1, &BlochState { s0: 0.3, s_plus: Complex64::new(0.1 / 3.0, -0.2) }, &[1.0 - 1e-17]);
        t
    }

    #[test]
    fn csv_is_exact_and_lf_terminated() {
        let t = sample();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,s0,re_sp,im_sp,rho_ee,R2,trace\n"));
        assert!(!text.contains('\r'));
        assert!(text.contains("3.3333333333333333e-2"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, text).unwrap();
        assert_eq!(read_csv(&path).unwrap(), t);
    }

    #[test]
    fn plain_table_has_the_base_columns_only() {
        let mut t = Table::new(&[]);
        t.push(0.0, &BlochState::excited(), &[]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let header = String::from_utf8(buf).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header.split(',').count(), 6);
    }

    #[test]
    fn json_roundtrip_echoes_config() {
        let t = sample();
        let cfg = RunConfig { seed: 99, ..RunConfig::default() };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        t.write_file(&cfg, Format::Json, &path).unwrap();
        let (meta, back) = read_json(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(meta.config, cfg);
        assert_eq!(meta.version, VERSION);
    }

    proptest::proptest! {
        #[test]
        fn csv_values_roundtrip_exactly(values in proptest::collection::vec(-1e300f64..1e300, 1..8)) {
            let mut t = Table::new(&[]);
            for v in &values {
                let s = BlochState { s0: *v, s_plus: Complex64::new(v * 0.5, -v) };
                t.push(v.abs(), &s, &[]);
            }
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            let back: Vec<Vec<f64>> = String::from_utf8(buf)
                .unwrap()
                .lines()
                .skip(1)
                .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
                .collect();
            proptest::prop_assert_eq!(back, t.rows);
        }
    }

    #[test]
    fn malformed_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t,s0\n0,1\n").unwrap();
        assert!(matches!(read_csv(&path), Err(CliError::Format { .. })));
        std::fs::write(&path, "t,s0,re_sp,im_sp,rho_ee,R2\n0,1,0,0,1\n").unwrap();
        assert!(read_csv(&path).is_err());
        std::fs::write(&path, "t,s0,re_sp,im_sp,rho_ee,R2\n").unwrap();
        assert!(read_csv(&path).is_err());
    }
}
