//! JSON experiment configuration: the on-disk face of
//! [`ExperimentSpec`](crate::bench::ExperimentSpec).
//!
//! Every field has a default, so a config file only states what it changes.
//! Unknown keys are rejected rather than ignored — a typo in a field name
//! should fail loudly, not silently run the default experiment. Lengths in
//! files are meters; conversion to seconds happens when the config is turned
//! into a spec.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bench::{ExperimentSpec, Method};
use crate::model::Position;
use crate::sim::NlosConfig;

// ---------- schema ----------

/// NLOS contamination section. `bias_max_m` is the largest extra one-way
/// path length, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NlosSection {
    pub probability: f64,
    pub bias_max_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_anchors: usize,
    pub k_rounds: usize,
    pub c_mps: f64,
    /// True target clock skew; must stay within 1% of 1.
    pub target_skew: f64,
    pub turnaround_s: f64,
    /// Range-noise grid, meters.
    pub c_sigma_m: Vec<f64>,
    /// Optional report-noise grid, meters; defaults to `c_sigma_m`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_gamma_m: Option<Vec<f64>>,
    pub trials: usize,
    /// Method names: MLE, AMLE, LLS, SQLS, CCCP (case-insensitive).
    pub methods: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nlos: Option<NlosSection>,
    pub fix_duplicate_anchor: bool,
    pub cccp_max_outer: usize,
    /// Optional fixed target `[x, y]`, meters; omitted means per-trial draws.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_m: Option<[f64; 2]>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            n_anchors: 6,
            k_rounds: 2,
            c_mps: 3.0e8,
            target_skew: 1.0001,
            turnaround_s: 1.0e-6,
            c_sigma_m: vec![10.0],
            c_gamma_m: None,
            trials: 100,
            methods: Method::ALL.iter().map(|m| m.name().to_string()).collect(),
            nlos: None,
            fix_duplicate_anchor: false,
            cccp_max_outer: 3,
            target_m: None,
        }
    }
}

// ---------- errors ----------

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// JSON is malformed or violates the schema; 1-based position.
    Parse { line: usize, column: usize, msg: String },
    /// Well-formed JSON with an out-of-range or inconsistent value.
    Invalid { field: &'static str, msg: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, column, msg } => {
                write!(f, "config parse error at line {line}, column {column}: {msg}")
            }
            ConfigError::Invalid { field, msg } => {
                write!(f, "config field '{field}': {msg}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, msg: msg.into() }
}

// ---------- parsing and validation ----------

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(3..=8).contains(&self.n_anchors) {
            return Err(invalid("n_anchors", "must be between 3 and 8"));
        }
        if self.k_rounds == 0 {
            return Err(invalid("k_rounds", "must be at least 1"));
        }
        if !(self.c_mps.is_finite() && self.c_mps > 0.0) {
            return Err(invalid("c_mps", "must be a positive number"));
        }
        if !(self.target_skew.is_finite() && (self.target_skew - 1.0).abs() <= 0.01) {
            return Err(invalid("target_skew", "must stay within 1% of 1.0"));
        }
        if !(self.turnaround_s.is_finite() && self.turnaround_s >= 0.0) {
            return Err(invalid("turnaround_s", "must be finite and >= 0"));
        }
        if self.c_sigma_m.is_empty() {
            return Err(invalid("c_sigma_m", "noise grid must not be empty"));
        }
        if self.c_sigma_m.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("c_sigma_m", "entries must be finite and >= 0"));
        }
        if let Some(g) = &self.c_gamma_m {
            if g.len() != self.c_sigma_m.len() {
                return Err(invalid("c_gamma_m", "must have the same length as c_sigma_m"));
            }
            if g.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(invalid("c_gamma_m", "entries must be finite and >= 0"));
            }
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(invalid("methods", "at least one method is required"));
        }
        for m in &self.methods {
            if m.parse::<Method>().is_err() {
                return Err(invalid(
                    "methods",
                    format!("unknown method '{m}' (expected MLE, AMLE, LLS, SQLS or CCCP)"),
                ));
            }
        }
        if let Some(n) = &self.nlos {
            if !(n.probability.is_finite() && (0.0..=1.0).contains(&n.probability)) {
                return Err(invalid("nlos.probability", "must lie in [0, 1]"));
            }
            if !(n.bias_max_m.is_finite() && n.bias_max_m >= 0.0) {
                return Err(invalid("nlos.bias_max_m", "must be finite and >= 0"));
            }
        }
        if self.cccp_max_outer == 0 {
            return Err(invalid("cccp_max_outer", "must be at least 1"));
        }
        if let Some(t) = &self.target_m {
            if !t.iter().all(|v| v.is_finite()) {
                return Err(invalid("target_m", "coordinates must be finite"));
            }
        }
        Ok(())
    }

    /// Validate and convert to a runnable spec (NLOS bias meters -> seconds).
    pub fn to_spec(&self) -> Result<ExperimentSpec, ConfigError> {
        self.validate()?;
        let methods = self
            .methods
            .iter()
            .map(|m| m.parse::<Method>().expect("validated above"))
            .collect();
        let nlos = match &self.nlos {
            Some(n) => Some(
                NlosConfig::new(n.probability, n.bias_max_m / self.c_mps)
                    .map_err(|e| invalid("nlos", e.to_string()))?,
            ),
            None => None,
        };
        Ok(ExperimentSpec {
            n_anchors: self.n_anchors,
            k_rounds: self.k_rounds,
            target_skew: self.target_skew,
            turnaround_s: self.turnaround_s,
            c_mps: self.c_mps,
            c_sigma_m: self.c_sigma_m.clone(),
            c_gamma_m: self.c_gamma_m.clone(),
            trials: self.trials,
            methods,
            nlos,
            master_seed: self.seed,
            fix_duplicate_anchor: self.fix_duplicate_anchor,
            cccp_max_outer: self.cccp_max_outer,
            fixed_target: self.target_m.map(|[x, y]| Position::new(x, y)),
        })
    }
}

// ---------- tests ----------
