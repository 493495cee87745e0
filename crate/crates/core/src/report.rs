//! Deterministic CSV and JSON emission.
//!
//! CSV numbers carry 17 significant digits. JSON summaries embed the config
//! hash and tool version; wall-clock timings live under a single
//! `timing_seconds` key so everything else is reproducible byte for byte.

use crate::error::Result;
use serde::Serialize;
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const TIMING_KEY: &str = "timing_seconds";

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Writes a header row followed by numeric rows.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|&x| fmt_num(x)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Outcome of one CLI run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub subcommand: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    /// Files written, in creation order.
    pub outputs: Vec<PathBuf>,
    pub results: Value,
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(subcommand: &str, config_hash: String, seed: u64) -> Self {
        RunReport {
            subcommand: subcommand.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config_hash,
            seed,
            outputs: Vec::new(),
            results: Value::Null,
            timings: BTreeMap::new(),
        }
    }

    /// The JSON summary: results plus provenance, timings under [`TIMING_KEY`].
    pub fn summary(&self) -> Value {
        let mut m = Map::new();
        m.insert("subcommand".into(), Value::from(self.subcommand.clone()));
        m.insert("tool_version".into(), Value::from(self.tool_version.clone()));
        m.insert("config_hash".into(), Value::from(self.config_hash.clone()));
        m.insert("seed".into(), Value::from(self.seed));
        let names: Vec<Value> = self
            .outputs
            .iter()
            .filter_map(|p| p.file_name())
            .map(|n| Value::from(n.to_string_lossy().into_owned()))
            .collect();
        m.insert("outputs".into(), Value::Array(names));
        m.insert("results".into(), self.results.clone());
        m.insert(
            TIMING_KEY.into(),
            serde_json::to_value(&self.timings).unwrap_or(Value::Null),
        );
        Value::Object(m)
    }
}

/// Drops the timing block so two summaries can be compared for determinism.
pub fn strip_timings(mut v: Value) -> Value {
    if let Value::Object(m) = &mut v {
        m.remove(TIMING_KEY);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0] {
            let s = fmt_num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let digits = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(digits.len(), 17, "{s}");
        }
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        assert_eq!(fmt_num(f64::NAN), "nan");
    }

    #[test]
    fn csv_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(&p, &["lambda[1/time]", "norm[-]"], &[vec![1.0, 2.0], vec![3.0, 0.5]]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("lambda[1/time],norm[-]\n1.0000000000000000e0,"));

        let mut r = RunReport::new("spectrum", "abc".into(), 3);
        r.timings.insert("total".into(), 1.5);
        r.outputs.push(p);
        let s = r.summary();
        assert_eq!(s["config_hash"], "abc");
        assert_eq!(s["outputs"][0], "t.csv");
        assert!(strip_timings(s).get(TIMING_KEY).is_none());
    }
}
