use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use geometry_flow::{Matrix, Vector};
use serde::Serialize;
use serde_json::Value;

use crate::config::parse_list;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 2,
        }
    }
}

/// `{command, params, seed, verdict, payload}`; carries no timestamps.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub params: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    pub verdict: Verdict,
    pub payload: Value,
}

/// A finished command: the report, the verdict line and an optional CSV table.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub summary: String,
    pub csv: Option<String>,
}

impl Outcome {
    pub fn line(&self) -> String {
        let v = match self.report.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        };
        format!("{} {v}: {}", self.report.command, self.summary)
    }

    pub fn json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes the report, its timing sidecar `<out>.meta.json` and the CSV table.
    pub fn write(&self, out: Option<&Path>, csv: Option<&Path>, elapsed: Duration) -> Result<(), CliError> {
        if let Some(path) = out {
            std::fs::write(path, self.json())?;
            let started = SystemTime::now().checked_sub(elapsed).unwrap_or(UNIX_EPOCH);
            let meta = serde_json::json!({
                "started_unix": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
                "elapsed_seconds": elapsed.as_secs_f64(),
            });
            let mut side = path.as_os_str().to_owned();
            side.push(".meta.json");
            std::fs::write(side, format!("{meta}\n"))?;
        }
        match (csv, &self.csv) {
            (Some(path), Some(table)) => std::fs::write(path, table)?,
            (Some(_), None) => return Err(CliError::Usage(format!("{} has no CSV output", self.report.command))),
            _ => {}
        }
        Ok(())
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable payload")
}

pub fn vec_value(v: &Vector) -> Value {
    to_value(&v.as_slice())
}

pub fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

/// Resolves parameters as flag, then config `[params]`, then default, and records each value.
#[derive(Debug, Clone)]
pub struct Params<'a> {
    config: &'a BTreeMap<String, String>,
    resolved: BTreeMap<String, Value>,
}

impl<'a> Params<'a> {
    pub fn new(config: &'a BTreeMap<String, String>) -> Self {
        Self { config, resolved: BTreeMap::new() }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.config.get(key).map(|s| s.as_str())
    }

    pub fn has_config(&self, key: &str) -> bool {
        self.config.contains_key(key)
    }

    pub fn record(&mut self, key: &str, value: impl Serialize) {
        self.resolved.insert(key.to_string(), to_value(&value));
    }

    pub fn num(&mut self, key: &str, flag: Option<f64>, default: f64) -> Result<f64, CliError> {
        let v = match (flag, self.raw(key)) {
            (Some(v), _) => v,
            (None, Some(s)) => s.parse().map_err(|_| CliError::Config(format!("{key} = {s:?} is not a number")))?,
            (None, None) => default,
        };
        if !v.is_finite() {
            return Err(CliError::Usage(format!("{key} must be finite")));
        }
        self.record(key, v);
        Ok(v)
    }

    pub fn positive(&mut self, key: &str, flag: Option<f64>, default: f64) -> Result<f64, CliError> {
        let v = self.num(key, flag, default)?;
        if v <= 0.0 {
            return Err(CliError::Usage(format!("{key} must be positive, got {v}")));
        }
        Ok(v)
    }

    pub fn count(&mut self, key: &str, flag: Option<usize>, default: usize) -> Result<usize, CliError> {
        let v = match (flag, self.raw(key)) {
            (Some(v), _) => v,
            (None, Some(s)) => s.parse().map_err(|_| CliError::Config(format!("{key} = {s:?} is not a count")))?,
            (None, None) => default,
        };
        self.record(key, v);
        Ok(v)
    }

    pub fn list(&mut self, key: &str, flag: Option<&str>, default: &[f64]) -> Result<Vec<f64>, CliError> {
        let v = match flag.or(self.raw(key)) {
            Some(s) => parse_list(s)?,
            None => default.to_vec(),
        };
        self.record(key, &v);
        Ok(v)
    }

    /// A point of dimension `d`.
    pub fn point(&mut self, key: &str, flag: Option<&str>, default: &Vector) -> Result<Vector, CliError> {
        let v = self.list(key, flag, default.as_slice())?;
        if v.len() != default.len() {
            return Err(CliError::Usage(format!("{key} needs {} coordinates, got {}", default.len(), v.len())));
        }
        Ok(Vector::from_vec(v))
    }

    pub fn text(&mut self, key: &str, flag: Option<&str>, default: &str) -> String {
        let v = flag.or(self.raw(key)).unwrap_or(default).to_string();
        self.record(key, &v);
        v
    }

    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        let v = flag
            || match self.raw(key) {
                Some(s) => s.parse().map_err(|_| CliError::Config(format!("{key} = {s:?} is not true/false")))?,
                None => false,
            };
        self.record(key, v);
        Ok(v)
    }

    pub fn seed(&mut self, flag: Option<u64>) -> Result<u64, CliError> {
        match (flag, self.raw("seed")) {
            (Some(v), _) => Ok(v),
            (None, Some(s)) => s.parse().map_err(|_| CliError::Config(format!("seed = {s:?} is not an integer"))),
            (None, None) => Ok(0),
        }
    }

    pub fn finish(self) -> BTreeMap<String, Value> {
        self.resolved
    }
}
