//! Comma-delimited records with a one-line schema header:
//!
//! ```text
//! #schema=<kind>/v1 columns=a,b,c
//! 1,2,3
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so equal values give
//! equal bytes. Missing values are written as `nan`.

use std::fmt::Write as _;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Records {
    kind: String,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// One cell of a record.
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        if self.is_nan() {
            "nan".into()
        } else {
            format!("{self}")
        }
    }
}

impl Cell for Option<f64> {
    fn cell(&self) -> String {
        self.unwrap_or(f64::NAN).cell()
    }
}

macro_rules! display_cell {
    ($($t:ty),*) => {$(
        impl Cell for $t {
            fn cell(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
display_cell!(usize, u64, u32, i64, bool, &str, String);

/// Builds a row from heterogeneous cells.
#[macro_export]
macro_rules! row {
    ($($v:expr),* $(,)?) => {
        vec![$($crate::records::Cell::cell(&$v)),*]
    };
}

impl Records {
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        Self { kind: kind.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "record width for {}", self.kind);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn header(&self) -> String {
        format!("#schema={}/v{} columns={}", self.kind, SCHEMA_VERSION, self.columns.join(","))
    }

    pub fn to_text(&self) -> String {
        let mut out = self.header();
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }

    /// Parse text produced by [`Records::to_text`].
    pub fn parse(text: &str) -> Option<Self> {
        let mut lines = text.lines();
        let head = lines.next()?.strip_prefix("#schema=")?;
        let (kind_version, cols) = head.split_once(" columns=")?;
        let kind = kind_version.rsplit_once("/v")?.0;
        let columns: Vec<String> = cols.split(',').map(str::to_string).collect();
        let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
        if rows.iter().any(|r| r.len() != columns.len()) {
            return None;
        }
        Some(Self { kind: kind.to_string(), columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_nan_cells() {
        let mut r = Records::new("demo", &["name", "estimate", "pass"]);
        r.push(row!["a", 0.1f64, true]);
        r.push(row!["b", f64::NAN, false]);
        let text = r.to_text();
        assert!(text.starts_with("#schema=demo/v1 columns=name,estimate,pass\n"));
        assert!(text.contains("b,nan,false"));
        let back = Records::parse(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.column("estimate").unwrap(), vec!["0.1", "nan"]);
    }

    #[test]
    #[should_panic]
    fn width_mismatch_panics() {
        let mut r = Records::new("demo", &["a"]);
        r.push(row![1.0f64, 2.0f64]);
    }
}
