//! Sweep configuration in flat TOML.
//!
//! ```toml
//! seed = 20240611          # required
//! mode = "both"            # "mc", "oracle" or "both"
//! trajectories = 100000    # per grid point, >= 1000 unless mode = "oracle"
//! steps = 3000
//! tau1 = 8.17
//! squeezing = [1.0]
//! storage_times = [16.3, 40.8, 81.7]
//! n_bath = [0.0, 0.5, 1.0, 2.0]   # or temperatures_k = [0.2, 0.4]
//! out_dir = "results"
//! workers = 8              # optional, defaults to available parallelism
//! ```
//!
//! Every key is top level; lists also accept a single scalar.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use toml::{Table, Value};

use crate::model::{bose_occupation, DEFAULT_CAVITY_DECAY_HZ, DEFAULT_OMEGA_M, DEFAULT_STEPS, DEFAULT_TAU1};

pub const MIN_MC_TRAJECTORIES: u64 = 1000;
pub const DEFAULT_TRAJECTORIES: u64 = 100_000;
pub const DEFAULT_STORAGE_TIMES: [f64; 3] = [16.3, 40.8, 81.7];
pub const DEFAULT_TEMPERATURE_K: f64 = 0.2;

const KNOWN_KEYS: [&str; 11] = [
    "seed",
    "mode",
    "trajectories",
    "steps",
    "tau1",
    "squeezing",
    "storage_times",
    "n_bath",
    "temperatures_k",
    "out_dir",
    "workers",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Mc,
    Oracle,
    Both,
}

impl Mode {
    pub fn runs_mc(self) -> bool {
        matches!(self, Mode::Mc | Mode::Both)
    }

    pub fn runs_oracle(self) -> bool {
        matches!(self, Mode::Oracle | Mode::Both)
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mc" => Ok(Mode::Mc),
            "oracle" => Ok(Mode::Oracle),
            "both" => Ok(Mode::Both),
            other => Err(format!("mode must be one of mc, oracle, both; got {other:?}")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Mc => "mc",
            Mode::Oracle => "oracle",
            Mode::Both => "both",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub squeezing: Vec<f64>,
    /// Bath occupations, converted from temperatures when those were given.
    pub n_bath: Vec<f64>,
    /// Source temperatures in kelvin, parallel to `n_bath`, if configured so.
    pub temperatures_k: Option<Vec<f64>>,
    pub storage_times: Vec<f64>,
    pub trajectories: u64,
    pub steps: usize,
    pub tau1: f64,
    pub seed: u64,
    pub mode: Mode,
    pub out_dir: PathBuf,
    pub workers: Option<usize>,
}

/// All problems found in a configuration, one message per violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Bath occupation at the default mechanical frequency.
pub fn occupation_at(temperature_k: f64) -> Result<f64, String> {
    bose_occupation(DEFAULT_OMEGA_M * DEFAULT_CAVITY_DECAY_HZ, temperature_k).map_err(|e| e.to_string())
}

struct Reader<'a> {
    table: &'a Table,
    violations: Vec<String>,
}

impl Reader<'_> {
    fn float_list(&mut self, key: &str) -> Option<Vec<f64>> {
        let value = self.table.get(key)?;
        let items: Vec<&Value> = match value {
            Value::Array(a) => a.iter().collect(),
            v => vec![v],
        };
        let mut out = Vec::with_capacity(items.len());
        for v in items {
            match as_float(v) {
                Some(x) if x.is_finite() && x >= 0.0 => out.push(x),
                Some(x) => self.violations.push(format!("{key}: values must be finite and >= 0, got {x}")),
                None => self.violations.push(format!("{key}: expected numbers, got {v}")),
            }
        }
        if out.is_empty() && self.violations.iter().all(|v| !v.starts_with(key)) {
            self.violations.push(format!("{key}: list must not be empty"));
        }
        Some(out)
    }

    fn integer(&mut self, key: &str) -> Option<i64> {
        match self.table.get(key)? {
            Value::Integer(i) => Some(*i),
            v => {
                self.violations.push(format!("{key}: expected an integer, got {v}"));
                None
            }
        }
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        let v = self.table.get(key)?;
        let x = as_float(v);
        if x.is_none() {
            self.violations.push(format!("{key}: expected a number, got {v}"));
        }
        x
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.table.get(key)? {
            Value::String(s) => Some(s.clone()),
            v => {
                self.violations.push(format!("{key}: expected a string, got {v}"));
                None
            }
        }
    }
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

pub fn parse_config(text: &str) -> Result<SweepConfig, ConfigError> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError {
        violations: vec![format!("malformed config: {}", e.message())],
    })?;
    let mut rd = Reader {
        table: &table,
        violations: Vec::new(),
    };
    for key in table.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            rd.violations.push(format!("unknown key `{key}`"));
        }
    }

    let seed = match rd.integer("seed") {
        Some(s) if s >= 0 => Some(s as u64),
        Some(s) => {
            rd.violations.push(format!("seed must be >= 0, got {s}"));
            None
        }
        None => {
            if !table.contains_key("seed") {
                rd.violations.push("missing required key `seed`".to_string());
            }
            None
        }
    };

    let mode = match rd.string("mode") {
        Some(s) => s.parse().map_err(|e| rd.violations.push(e)).ok(),
        None => Some(Mode::Both),
    };

    let trajectories = match rd.integer("trajectories") {
        Some(n) if n > 0 => n as u64,
        Some(n) => {
            rd.violations.push(format!("trajectories must be > 0, got {n}"));
            0
        }
        None => DEFAULT_TRAJECTORIES,
    };
    if let Some(m) = mode {
        if m.runs_mc() && trajectories > 0 && trajectories < MIN_MC_TRAJECTORIES {
            rd.violations.push(format!(
                "trajectories must be >= {MIN_MC_TRAJECTORIES} when Monte Carlo runs, got {trajectories}"
            ));
        }
    }

    let steps = match rd.integer("steps") {
        Some(n) if n >= 100 => n as usize,
        Some(n) => {
            rd.violations.push(format!("steps must be >= 100, got {n}"));
            0
        }
        None => DEFAULT_STEPS,
    };

    let tau1 = match rd.float("tau1") {
        Some(t) if t.is_finite() && t > 3.0 => t,
        Some(t) => {
            rd.violations.push(format!("tau1 must exceed 3, got {t}"));
            DEFAULT_TAU1
        }
        None => DEFAULT_TAU1,
    };

    let squeezing = rd.float_list("squeezing").unwrap_or_else(|| vec![1.0]);
    let storage_times = rd
        .float_list("storage_times")
        .unwrap_or_else(|| DEFAULT_STORAGE_TIMES.to_vec());

    let occupations = rd.float_list("n_bath");
    let temperatures = rd.float_list("temperatures_k");
    let (n_bath, temperatures_k) = match (occupations, temperatures) {
        (Some(_), Some(_)) => {
            rd.violations
                .push("give either `n_bath` or `temperatures_k`, not both".to_string());
            (Vec::new(), None)
        }
        (Some(n), None) => (n, None),
        (None, temps) => {
            let temps = temps.unwrap_or_else(|| vec![DEFAULT_TEMPERATURE_K]);
            let mut n = Vec::with_capacity(temps.len());
            for &t in &temps {
                match occupation_at(t) {
                    Ok(v) => n.push(v),
                    Err(e) => rd.violations.push(format!("temperatures_k: {e}")),
                }
            }
            (n, Some(temps))
        }
    };

    let out_dir = rd.string("out_dir").unwrap_or_else(|| "results".to_string());
    let workers = match rd.integer("workers") {
        Some(w) if w >= 1 => Some(w as usize),
        Some(w) => {
            rd.violations.push(format!("workers must be >= 1, got {w}"));
            None
        }
        None => None,
    };

    if !rd.violations.is_empty() {
        return Err(ConfigError {
            violations: rd.violations,
        });
    }
    Ok(SweepConfig {
        squeezing,
        n_bath,
        temperatures_k,
        storage_times,
        trajectories,
        steps,
        tau1,
        seed: seed.expect("checked above"),
        mode: mode.expect("checked above"),
        out_dir: PathBuf::from(out_dir),
        workers,
    })
}
