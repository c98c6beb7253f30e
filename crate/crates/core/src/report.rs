//! Pass/fail records with plain-text and CSV renderings.

use std::fmt;
use std::io::{self, Write};

/// One checked assertion.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub name: String,
    /// The law or identity being checked, in words.
    pub reference: String,
    pub measured: String,
    pub target: String,
    pub pass: bool,
}

impl Record {
    /// Passes when `deviation <= tol`; NaN never passes.
    pub fn deviation(name: impl Into<String>, reference: impl Into<String>, deviation: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            reference: reference.into(),
            measured: format!("{deviation:.3e}"),
            target: format!("<= {tol:.1e}"),
            pass: deviation <= tol,
        }
    }

    pub fn exact<T: fmt::Display + PartialEq>(
        name: impl Into<String>,
        reference: impl Into<String>,
        got: T,
        expected: T,
    ) -> Self {
        Self {
            name: name.into(),
            reference: reference.into(),
            measured: got.to_string(),
            target: format!("= {expected}"),
            pass: got == expected,
        }
    }

    pub fn flag(
        name: impl Into<String>,
        reference: impl Into<String>,
        measured: impl Into<String>,
        target: impl Into<String>,
        pass: bool,
    ) -> Self {
        Self { name: name.into(), reference: reference.into(), measured: measured.into(), target: target.into(), pass }
    }
}

/// An ordered list of records under a title.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub title: String,
    pub records: Vec<Record>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const REPORT_CSV_HEADER: &str = "section,name,reference,measured,target,pass";

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), records: Vec::new() }
    }

    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn extend(&mut self, other: Report) {
        self.records.extend(other.records);
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| !r.pass)
    }

    /// `section,name,reference,measured,target,pass` rows, without a header.
    pub fn write_csv_rows(&self, out: &mut impl Write) -> io::Result<()> {
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&self.title),
                csv_field(&r.name),
                csv_field(&r.reference),
                csv_field(&r.measured),
                csv_field(&r.target),
                if r.pass { "PASS" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "== {} ==", self.title)?;
        for r in &self.records {
            writeln!(
                f,
                "[{}] {}: measured {} (target {}) -- {}",
                if r.pass { "PASS" } else { "FAIL" },
                r.name,
                r.measured,
                r.target,
                r.reference
            )?;
        }
        let failed = self.failures().count();
        writeln!(f, "{} records, {} failed", self.records.len(), failed)
    }
}
