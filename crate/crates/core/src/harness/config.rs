use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{HarnessError, SuiteKind};

pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_DIM: usize = 16;
pub const DEFAULT_HORIZON: u64 = 1 << 12;
pub const DEFAULT_COUNTEREXAMPLE_HORIZON: u64 = 1 << 20;
pub const DEFAULT_DENSITY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub suite: SuiteKind,
    pub seed: u64,
    pub trials: usize,
    pub dim: usize,
    /// `None` selects the per-suite default (`2^20` for the counterexample,
    /// `2^12` otherwise).
    pub horizon: Option<u64>,
    pub tol: f64,
    pub p_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    /// Entry density of the random operators.
    pub density: f64,
    /// Replace random operators by the identity (and inputs by `e1` in the
    /// maximal inequality suite).
    pub identity_operator: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            suite: SuiteKind::All,
            seed: 0,
            trials: DEFAULT_TRIALS,
            dim: DEFAULT_DIM,
            horizon: None,
            tol: crate::ergodic::DEFAULT_TOLERANCE,
            p_values: vec![1.0, 2.0, 3.0],
            alpha_values: vec![0.1, 0.25, 0.5, 1.0],
            density: DEFAULT_DENSITY,
            identity_operator: false,
        }
    }
}

/// Per-suite parameters after defaults are resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteParams {
    pub seed: u64,
    pub dim: usize,
    pub horizon: u64,
    pub tol: f64,
    pub p_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub density: f64,
    pub identity_operator: bool,
}

impl SuiteConfig {
    pub fn for_suite(suite: SuiteKind) -> Self {
        Self { suite, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.trials < 1 {
            return fail("trials must be at least 1".into());
        }
        if self.dim < 1 {
            return fail("dim must be at least 1".into());
        }
        if let Some(h) = self.horizon {
            if h < 2 {
                return fail(format!("horizon must be at least 2, got {h}"));
            }
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return fail(format!("tol must be positive, got {}", self.tol));
        }
        if self.p_values.is_empty() || self.p_values.iter().any(|p| !(*p >= 1.0 && p.is_finite())) {
            return fail(format!("p values must lie in [1, inf), got {:?}", self.p_values));
        }
        if self.alpha_values.is_empty() || self.alpha_values.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return fail(format!("alpha values must be positive, got {:?}", self.alpha_values));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return fail(format!("density must lie in (0, 1], got {}", self.density));
        }
        Ok(())
    }

    pub fn resolved(&self, suite: SuiteKind) -> SuiteParams {
        let default = if suite == SuiteKind::Counterexample { DEFAULT_COUNTEREXAMPLE_HORIZON } else { DEFAULT_HORIZON };
        SuiteParams {
            seed: self.seed,
            dim: self.dim,
            horizon: self.horizon.unwrap_or(default),
            tol: self.tol,
            p_values: self.p_values.clone(),
            alpha_values: self.alpha_values.clone(),
            density: self.density,
            identity_operator: self.identity_operator,
        }
    }

    /// Applies `key=value` pairs (from a config file) on top of `self`.
    pub fn apply_pairs(&mut self, pairs: &BTreeMap<String, String>) -> Result<(), HarnessError> {
        for (key, value) in pairs {
            let bad = |e: &dyn std::fmt::Display| HarnessError::Config(format!("{key}={value}: {e}"));
            match key.as_str() {
                "suite" => self.suite = value.parse()?,
                "seed" => self.seed = value.parse().map_err(|e| bad(&e))?,
                "trials" => self.trials = value.parse().map_err(|e| bad(&e))?,
                "dim" => self.dim = value.parse().map_err(|e| bad(&e))?,
                "horizon" => self.horizon = Some(value.parse().map_err(|e| bad(&e))?),
                "tol" => self.tol = value.parse().map_err(|e| bad(&e))?,
                "p" => self.p_values = parse_list(value).map_err(|e| bad(&e))?,
                "alpha" => self.alpha_values = parse_list(value).map_err(|e| bad(&e))?,
                "density" => self.density = value.parse().map_err(|e| bad(&e))?,
                "identity" => self.identity_operator = value.parse().map_err(|e| bad(&e))?,
                // Output locations are consumed by the CLI.
                "out" | "trace" => {}
                _ => return Err(HarnessError::Config(format!("unknown config key {key:?}"))),
            }
        }
        Ok(())
    }
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, std::num::ParseFloatError> {
    s.split(',').map(|v| v.trim().parse()).collect()
}

/// Parses a flat `key=value` file; blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, HarnessError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("line {}: expected key=value", i + 1)))?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(out)
}
