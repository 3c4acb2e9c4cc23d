//! Scan records and their CSV form.
//!
//! Layout: `#`-prefixed metadata lines (the first is always
//! `# scan: <name> unit: <unit>`), then a header row and one row per setting.
//! Floats are written with 12 significant digits, so a record read back from
//! disk re-serializes to identical bytes.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const RECORD_HEADER: [&str; 4] = ["setting", "expected_rate", "sampled_counts", "integration_time"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub setting: f64,
    pub expected_rate: f64,
    pub sampled_counts: u64,
    pub integration_time: f64,
}

impl ScanRow {
    pub fn expected_counts(&self) -> f64 {
        self.expected_rate * self.integration_time
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanRecord {
    pub name: String,
    /// Unit of `setting`: `rad` for phase scans, `um` for fiber positions.
    pub unit: String,
    pub metadata: Vec<String>,
    pub rows: Vec<ScanRow>,
}

/// 12 significant digits in scientific notation.
pub fn format_sig12(x: f64) -> String {
    format!("{x:.11e}")
}

impl ScanRecord {
    pub fn settings(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.setting).collect()
    }

    pub fn expected(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.expected_rate).collect()
    }

    pub fn counts(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.sampled_counts as f64).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        if self.name.contains(char::is_whitespace) || self.unit.contains(char::is_whitespace) {
            return Err(Error::Record("name and unit must not contain whitespace".into()));
        }
        writeln!(out, "# scan: {} unit: {}", self.name, self.unit)?;
        for line in &self.metadata {
            if line.contains('\n') {
                return Err(Error::Record("metadata lines must be single lines".into()));
            }
            writeln!(out, "# {line}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RECORD_HEADER)?;
        for r in &self.rows {
            w.write_record([
                format_sig12(r.setting),
                format_sig12(r.expected_rate),
                r.sampled_counts.to_string(),
                format_sig12(r.integration_time),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Record(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Reads a record; files without the leading `# scan:` line are accepted
    /// with name `external` and unit `unknown`.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut name = "external".to_string();
        let mut unit = "unknown".to_string();
        let mut metadata = Vec::new();
        let mut body = String::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.strip_prefix(' ').unwrap_or(rest);
                if i == 0 {
                    if let Some(tail) = rest.strip_prefix("scan: ") {
                        let (n, u) = tail
                            .split_once(" unit: ")
                            .ok_or_else(|| Error::Record("bad scan line".into()))?;
                        name = n.to_string();
                        unit = u.to_string();
                        continue;
                    }
                }
                metadata.push(rest.to_string());
            } else {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != RECORD_HEADER {
            return Err(Error::Record(format!("unexpected header {:?}", headers)));
        }
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| -> Result<&str> {
                rec.get(i).ok_or_else(|| Error::Record(format!("row {} is short", line + 1)))
            };
            let num = |i: usize| -> Result<f64> {
                field(i)?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Record(format!("row {} column {}: {e}", line + 1, RECORD_HEADER[i])))
            };
            rows.push(ScanRow {
                setting: num(0)?,
                expected_rate: num(1)?,
                sampled_counts: field(2)?
                    .trim()
                    .parse()
                    .map_err(|e| Error::Record(format!("row {} sampled_counts: {e}", line + 1)))?,
                integration_time: num(3)?,
            });
        }
        Ok(ScanRecord { name, unit, metadata, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        ScanRecord::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// The plot-ready spatial table: expected rates at each fiber position.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialTable {
    pub x_um: Vec<f64>,
    pub rate_n1: Vec<f64>,
    pub rate_n3: Vec<f64>,
    pub profile_n1: Vec<f64>,
    pub profile_n3: Vec<f64>,
}

impl SpatialTable {
    pub const HEADER: [&'static str; 5] = ["x_um", "rate_N1", "rate_N3", "profile_N1", "profile_N3"];

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::HEADER)?;
        for i in 0..self.x_um.len() {
            w.write_record(
                [self.x_um[i], self.rate_n1[i], self.rate_n3[i], self.profile_n1[i], self.profile_n3[i]]
                    .map(format_sig12),
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}
