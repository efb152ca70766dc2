//! CSV and manifest emission.
//!
//! Every CSV starts with `#` comment lines (tool, command, config hash,
//! run metadata, warnings), then one header line, then data rows. The first
//! column of every row is the config hash. Reals use 17 significant digits
//! in Rust's `{:.16e}` form; a missing value is `NA`.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::Serialize;

pub const TOOL: &str = "ruelle";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Round-trip formatting: 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), fmt_real)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum WarningKind {
    Lattice,
    GuardTrip,
    OutOfRange,
    Advisory,
}

impl fmt::Display for WarningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Warning {
    pub kind: WarningKind,
    pub message: String,
}

impl Warning {
    pub fn new(kind: WarningKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Side record of a run. Wall-clock lives here and never in the CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: Option<String>,
    pub stages: Vec<StageTiming>,
    pub warnings: Vec<Warning>,
    /// Advisory results that never fail a run.
    pub advisory: BTreeMap<String, serde_json::Value>,
    pub exit_code: i32,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: Option<String>) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config_hash,
            stages: Vec::new(),
            warnings: Vec::new(),
            advisory: BTreeMap::new(),
            exit_code: 0,
            error: None,
        }
    }

    /// Runs `f` and records its wall-clock under `stage`.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages.push(StageTiming { stage: stage.into(), seconds: start.elapsed().as_secs_f64() });
        out
    }

    pub fn warn(&mut self, kind: WarningKind, message: impl Into<String>) {
        self.warnings.push(Warning::new(kind, message));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

/// A CSV document under construction.
#[derive(Clone, Debug)]
pub struct CsvTable {
    command: String,
    hash: String,
    meta: Vec<(String, String)>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(command: &str, hash: &str, columns: &[&'static str]) -> Self {
        Self {
            command: command.into(),
            hash: hash.into(),
            meta: Vec::new(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<String>) {
        self.meta.push((key.into(), value.into()));
    }

    pub fn meta_real(&mut self, key: &str, value: f64) {
        self.meta(key, fmt_real(value));
    }

    /// Appends a row; `cells` excludes the leading hash column.
    pub fn push(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.columns.len(), "row width must match the header");
        self.rows.push(cells);
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    /// Renders the document. Warnings come from the manifest so the two never disagree.
    pub fn render(&self, warnings: &[Warning]) -> String {
        let mut out = String::new();
        out.push_str(&format!("# {TOOL} {VERSION} {}\n", self.command));
        out.push_str(&format!("# config_hash: {}\n", self.hash));
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        for w in warnings {
            out.push_str(&format!("# warning: {w}\n"));
        }
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let header: Vec<&str> = std::iter::once("config_hash").chain(self.columns.iter().copied()).collect();
        writer.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            writer
                .write_record(std::iter::once(self.hash.as_str()).chain(row.iter().map(String::as_str)))
                .expect("in-memory write");
        }
        let body = writer.into_inner().expect("in-memory flush");
        out.push_str(std::str::from_utf8(&body).expect("UTF-8 cells"));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::LN_2] {
            let s = fmt_real(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17);
        }
        assert_eq!(fmt_real(f64::NAN), "NaN");
        assert_eq!(fmt_opt(None), "NA");
    }

    #[test]
    fn every_row_echoes_the_hash_and_warnings_are_comments() {
        let mut t = CsvTable::new("rates", "abc", &["a", "status"]);
        t.meta_real("a_star", 0.5);
        t.push(vec![fmt_real(0.25), "ok".into()]);
        t.push(vec![fmt_real(2.0), "error: OutOfRange, a = 2".into()]);
        let text = t.render(&[Warning::new(WarningKind::OutOfRange, "a = 2")]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("# ruelle {VERSION} rates"));
        assert!(lines.contains(&"# warning: OutOfRange: a = 2"));
        let data: Vec<&str> = lines.iter().copied().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data[0], "config_hash,a,status");
        assert!(data[1..].iter().all(|l| l.starts_with("abc,")));
        assert!(data[2].ends_with("\"error: OutOfRange, a = 2\""));
    }

    #[test]
    fn manifest_serializes() {
        let mut m = RunManifest::new("scan", Some("abc".into()));
        let v = m.timed("sweep", || 7);
        assert_eq!(v, 7);
        m.warn(WarningKind::Lattice, "r(6.28) = 1");
        let json: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(json["warnings"][0]["kind"], "Lattice");
        assert_eq!(json["stages"][0]["stage"], "sweep");
        assert_eq!(json["version"], VERSION);
    }
}
