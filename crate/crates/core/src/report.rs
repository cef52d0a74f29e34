//! Tabular experiment output.
//!
//! A report is written as CSV: one `# manifest ...` comment line, a header row
//! whose names carry units, then the data rows. Checks go to a sibling
//! `*.checks.csv` file. Only the manifest line carries a timestamp, so two runs
//! of the same configuration produce byte-identical bodies.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::Result;

pub const TOOL_VERSION: &str = concat!("wittenlab/", env!("CARGO_PKG_VERSION"));

/// One table cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Text(String),
    Flag(bool),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            // Shortest round-trip representation; stable across runs.
            Value::Real(v) => write!(f, "{v:e}"),
            Value::Text(v) => f.write_str(v),
            Value::Flag(v) => f.write_str(if *v { "true" } else { "false" }),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Flag(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

/// A named pass/fail verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    pub fn verdict(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentReport {
    pub name: String,
    /// Ordered `key=value` pairs echoed in the manifest line.
    pub manifest: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub checks: Vec<Check>,
}

impl ExperimentReport {
    pub fn new<S: Into<String>>(name: impl Into<String>, columns: impl IntoIterator<Item = S>) -> Self {
        Self { name: name.into(), columns: columns.into_iter().map(Into::into).collect(), ..Self::default() }
    }

    pub fn with_manifest(mut self, key: impl Into<String>, value: impl fmt::Display) -> Self {
        self.manifest.push((key.into(), value.to_string()));
        self
    }

    pub fn push_row(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn push_check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of a column, skipping non-numeric cells.
    pub fn real_column(&self, name: &str) -> Vec<f64> {
        let Some(j) = self.column(name) else { return Vec::new() };
        self.rows
            .iter()
            .filter_map(|row| match row[j] {
                Value::Real(v) => Some(v),
                Value::Int(v) => Some(v as f64),
                _ => None,
            })
            .collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Manifest comment line. `created` is a Unix timestamp.
    pub fn manifest_line(&self, created: u64) -> String {
        let mut line = format!("# manifest tool={TOOL_VERSION} created={created} experiment={}", self.name);
        for (key, value) in &self.manifest {
            line.push(' ');
            line.push_str(key);
            line.push('=');
            line.push_str(&value.replace(char::is_whitespace, "_"));
        }
        line
    }

    /// Header and data rows.
    pub fn write_body<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|v| v.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut writer: W, created: u64) -> Result<()> {
        writeln!(writer, "{}", self.manifest_line(created))?;
        self.write_body(writer)
    }

    pub fn write_checks<W: Write>(&self, mut writer: W, created: u64) -> Result<()> {
        writeln!(writer, "{}", self.manifest_line(created))?;
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["check", "verdict", "detail"])?;
        for c in &self.checks {
            out.write_record([c.name.as_str(), c.verdict(), c.detail.as_str()])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `<dir>/<name>.csv` and `<dir>/<name>.checks.csv`.
    pub fn write_to_dir(&self, dir: &Path, created: u64) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let data = dir.join(format!("{}.csv", self.name));
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(&data)?), created)?;
        let checks = dir.join(format!("{}.checks.csv", self.name));
        self.write_checks(std::io::BufWriter::new(std::fs::File::create(&checks)?), created)?;
        Ok(vec![data, checks])
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn fitted_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentReport {
        let mut report = ExperimentReport::new("demo", ["k [1]", "value [1/length]", "ok"])
            .with_manifest("grid", "circle:8:L=6.28")
            .with_manifest("seed", 7);
        report.push_row(vec![4usize.into(), 0.1.into(), true.into()]);
        report.push_row(vec![16usize.into(), 1.0e-20.into(), false.into()]);
        report.push_check(Check::new("decreasing", true, "ratio 10"));
        report
    }

    #[test]
    fn body_is_deterministic_and_manifest_carries_time() {
        let report = sample();
        let mut a = Vec::new();
        let mut b = Vec::new();
        report.write_csv(&mut a, 1).unwrap();
        report.write_csv(&mut b, 2).unwrap();
        let a = String::from_utf8(a).unwrap();
        let b = String::from_utf8(b).unwrap();
        assert_ne!(a, b);
        let body = |s: &str| s.lines().skip(1).collect::<Vec<_>>().join("\n");
        assert_eq!(body(&a), body(&b));
        assert!(a.starts_with("# manifest tool=wittenlab/"));
        assert!(a.contains("grid=circle:8:L=6.28 seed=7"));
        assert_eq!(a.lines().nth(1).unwrap(), "k [1],value [1/length],ok");
        assert_eq!(a.lines().nth(3).unwrap(), "16,1e-20,false");
    }

    #[test]
    fn reals_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23] {
            let s = Value::Real(v).to_string();
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn checks_and_columns() {
        let report = sample();
        assert!(report.passed());
        assert_eq!(report.real_column("k [1]"), vec![4.0, 16.0]);
        let mut out = Vec::new();
        report.write_checks(&mut out, 0).unwrap();
        assert!(String::from_utf8(out).unwrap().contains("decreasing,PASS,ratio 10"));
    }

    #[test]
    fn slope_of_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        assert!((fitted_slope(&xs, &ys) + 2.0).abs() < 1e-14);
    }
}
