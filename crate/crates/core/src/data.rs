//! Bivariate (age, usage) failure records and their CSV form.
//!
//! The CSV has a header row `age,usage` (`mileage` is accepted for the second
//! column), decimal-point reals, and LF or CRLF line endings. Every value must
//! be strictly positive.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub age: f64,
    pub usage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<FailureRecord>,
    source: String,
}

/// The 40 locomotive traction-motor failures (age, mileage) used throughout the tests.
pub const TRACTION_MOTORS_CSV: &str = include_str!("../../../data/traction_motors.csv");

impl Dataset {
    pub fn new(records: Vec<FailureRecord>, source: impl Into<String>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, r) in records.iter().enumerate() {
            for (col, v) in [(1, r.age), (2, r.usage)] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Data {
                        line: i + 2,
                        column: col,
                        message: format!("value must be finite and > 0, got {v}"),
                    });
                }
            }
        }
        Ok(Self { records, source: source.into() })
    }

    pub fn from_pairs(pairs: &[(f64, f64)], source: impl Into<String>) -> Result<Self> {
        let records = pairs.iter().map(|&(age, usage)| FailureRecord { age, usage }).collect();
        Self::new(records, source)
    }

    pub fn parse_csv(text: &str, source: impl Into<String>) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::EmptyDataset)?;
        let cols: Vec<String> = header
            .trim_start_matches('\u{feff}')
            .split(',')
            .map(|c| c.trim().to_ascii_lowercase())
            .collect();
        let header_ok = cols.len() == 2 && cols[0] == "age" && (cols[1] == "usage" || cols[1] == "mileage");
        if !header_ok {
            return Err(Error::Data {
                line: 1,
                column: 1,
                message: format!("expected header `age,usage`, found `{}`", header.trim()),
            });
        }

        let mut records = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 2 {
                return Err(Error::Data {
                    line: line_no,
                    column: cells.len().min(2) + 1,
                    message: format!("expected 2 columns, found {}", cells.len()),
                });
            }
            let mut vals = [0.0; 2];
            for (c, cell) in cells.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Data {
                    line: line_no,
                    column: c + 1,
                    message: format!("not a number: `{cell}`"),
                })?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Data {
                        line: line_no,
                        column: c + 1,
                        message: format!("value must be finite and > 0, got {v}"),
                    });
                }
                vals[c] = v;
            }
            records.push(FailureRecord { age: vals[0], usage: vals[1] });
        }
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self { records, source: source.into() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse_csv(&text, path.display().to_string())
    }

    pub fn traction_motors() -> Self {
        Self::parse_csv(TRACTION_MOTORS_CSV, "data/traction_motors.csv").expect("bundled dataset is valid")
    }

    pub fn records(&self) -> &[FailureRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ages(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.age).collect()
    }

    pub fn usages(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.usage).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("age,usage\n");
        for r in &self.records {
            out.push_str(&format!("{},{}\n", r.age, r.usage));
        }
        out
    }
}
