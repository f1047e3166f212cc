//! CSV tables with `# key=value` metadata lines above a one-line header.

use std::io::Write;
use std::path::Path;

use crate::config::fmt;
use crate::{CliError, Result};

pub const SCHEMA_CONDUCTIVITY: &[&str] = &["T_K", "s1", "s2"];
pub const SCHEMA_RESPONSE: &[&str] = &["T_K", "dff", "dinvQ", "fres_Hz", "Qi"];
pub const SCHEMA_TEFF: &[&str] = &["x", "dinvQ", "Teff_K", "dff_pred"];
pub const SCHEMA_TAUQP: &[&str] = &["T_K", "tauqp_s"];
pub const SCHEMA_TAUQP_DENSITY: &[&str] = &["nqp", "tauqp_s"];
pub const SCHEMA_SIDEBANDS: &[&str] = &["fg_Hz", "amp_rel_dB"];
pub const SCHEMA_S21: &[&str] = &["freq_Hz", "re", "im"];
pub const SCHEMA_TIMETRACE: &[&str] = &["t_s", "re", "im"];
pub const SCHEMA_MAP: &[&str] = &["t_s", "fro_Hz", "re", "im"];
pub const SCHEMA_TRAJECTORY: &[&str] = &["t_s", "Vg_V", "fres_Hz", "Qi", "QL"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SweepTable {
    pub fn new(schema_name: &str, columns: &[&str]) -> Self {
        Self {
            meta: vec![("schema".into(), schema_name.into())],
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_meta<K: Into<String>, V: Into<String>>(mut self, entries: impl IntoIterator<Item = (K, V)>) -> Self {
        self.meta.extend(entries.into_iter().map(|(k, v)| (k.into(), v.into())));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta_value(key).and_then(|v| v.parse().ok())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i]).collect()
    }

    /// First column among `names` that is present.
    pub fn require(&self, names: &[&str]) -> Result<Vec<f64>> {
        names
            .iter()
            .find_map(|n| self.column_index(n))
            .map(|i| self.column(i))
            .ok_or_else(|| CliError::Schema(format!("missing column {}", names.join(" or "))))
    }

    pub fn has_columns(&self, names: &[&str]) -> bool {
        names.iter().all(|n| self.column_index(n).is_some())
    }

    /// Sweep invariants: strictly monotone first column and no NaN.
    pub fn validate(&self) -> Result<()> {
        if self.rows.iter().flatten().any(|v| v.is_nan()) {
            return Err(CliError::Schema("table contains NaN".into()));
        }
        let x = self.column(0);
        let up = x.windows(2).all(|w| w[1] > w[0]);
        let down = x.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(CliError::Schema(format!("column {} is not strictly monotone", self.columns[0])));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in &self.meta {
            writeln!(w, "# {k}={v}")?;
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.columns)?;
        for row in &self.rows {
            csv.write_record(row.iter().map(|&v| fmt(v)))?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| l.starts_with('#')) {
            if let Some((k, v)) = line.trim_start_matches('#').trim().split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if columns.is_empty() || columns.iter().all(|c| c.is_empty()) {
            return Err(CliError::Schema("missing header line".into()));
        }
        let mut rows = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let row = record
                .iter()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| CliError::Schema(format!("row {}: non-numeric value", line + 1)))?;
            rows.push(row);
        }
        Ok(Self { meta, columns, rows })
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// `key=value` lines.
pub fn format_record(record: &[(String, String)]) -> String {
    record.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_meta() {
        let mut t = SweepTable::new("response", SCHEMA_RESPONSE).with_meta([("seed", "4")]);
        t.push(vec![0.1, -1e-7, 2e-9, 6.8e9, 980.0]);
        t.push(vec![0.2, -3.3e-6, 1.25e-7, 6.79e9, f64::INFINITY]);
        let text = t.to_csv_string();
        assert!(text.contains("\nT_K,dff,dinvQ,fres_Hz,Qi\n"));
        let back = SweepTable::parse(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.meta_value("schema"), Some("response"));
        assert_eq!(back.meta_f64("seed"), Some(4.0));
    }

    #[test]
    fn validation() {
        let mut t = SweepTable::new("x", &["x", "y"]);
        t.push(vec![1.0, 0.0]);
        t.push(vec![2.0, 0.0]);
        assert!(t.validate().is_ok());
        t.push(vec![2.0, 0.0]);
        assert!(t.validate().is_err());
        let mut t = SweepTable::new("x", &["x", "y"]);
        t.push(vec![1.0, f64::NAN]);
        assert!(t.validate().is_err());
    }

    #[test]
    fn malformed_input() {
        assert!(SweepTable::parse("a,b\n1,x\n").is_err());
        assert!(SweepTable::parse("a,b\n1,2,3\n").is_err());
        assert!(SweepTable::parse("").is_err());
    }
}
