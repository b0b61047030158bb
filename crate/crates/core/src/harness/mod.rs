//! Seeded experiment suites that try to falsify the ergodic theorems on
//! random instances, plus the divergence demonstration for `l_inf`.
//!
//! Every trial draws its inputs from its own RNG stream derived from
//! `(seed, suite, trial index)`, so reports do not depend on execution order.

pub mod config;
pub mod demo;
pub mod report;
pub mod specs;
pub mod trials;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ergodic::Checkpoint;

pub use config::SuiteConfig;
pub use demo::{demo_counterexample, CounterexampleReport};
pub use report::{Aggregate, FailureArtifact, FullReport, SuiteReport, TrialRecord, SCHEMA_VERSION};
pub use trials::TrialInput;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid operator or sequence spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Ergodic(#[from] crate::ergodic::ErgodicError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteKind {
    MaximalIneq,
    Convergence,
    Majorization,
    Decomposition,
    RearrangementContinuity,
    Fatou,
    Counterexample,
    All,
}

impl SuiteKind {
    pub const INDIVIDUAL: [SuiteKind; 7] = [
        SuiteKind::MaximalIneq,
        SuiteKind::Convergence,
        SuiteKind::Majorization,
        SuiteKind::Decomposition,
        SuiteKind::RearrangementContinuity,
        SuiteKind::Fatou,
        SuiteKind::Counterexample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SuiteKind::MaximalIneq => "maximal_ineq",
            SuiteKind::Convergence => "convergence",
            SuiteKind::Majorization => "majorization",
            SuiteKind::Decomposition => "decomposition",
            SuiteKind::RearrangementContinuity => "rearrangement_continuity",
            SuiteKind::Fatou => "fatou",
            SuiteKind::Counterexample => "counterexample",
            SuiteKind::All => "all",
        }
    }

    fn stream_tag(self) -> u64 {
        match self {
            SuiteKind::MaximalIneq => 1,
            SuiteKind::Convergence => 2,
            SuiteKind::Majorization => 3,
            SuiteKind::Decomposition => 4,
            SuiteKind::RearrangementContinuity => 5,
            SuiteKind::Fatou => 6,
            SuiteKind::Counterexample => 7,
            SuiteKind::All => 0,
        }
    }
}

impl fmt::Display for SuiteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SuiteKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        std::iter::once(SuiteKind::All)
            .chain(SuiteKind::INDIVIDUAL)
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown suite {s:?}")))
    }
}

/// RNG stream for one trial of one suite.
pub fn trial_rng(seed: u64, suite: SuiteKind, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((suite.stream_tag() << 48) | trial as u64);
    rng
}

/// Runs one individual suite. Returns the report and the checkpoint trace of
/// the first trial (empty for suites without one).
pub fn run_single(cfg: &SuiteConfig, suite: SuiteKind) -> Result<(SuiteReport, Vec<Checkpoint>), HarnessError> {
    cfg.validate()?;
    assert!(suite != SuiteKind::All, "run_single expects an individual suite");
    let params = cfg.resolved(suite);
    let trials = if suite == SuiteKind::Counterexample { 1 } else { cfg.trials };
    let outcomes: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let input = trials::draw(&params, suite, trial);
            let outcome = input.evaluate();
            (trial, input, outcome)
        })
        .collect();

    let mut records = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    let mut trace = Vec::new();
    for (trial, input, outcome) in outcomes {
        if trial == 0 {
            trace = outcome.trace.clone();
        }
        let record = TrialRecord::from_outcome(trial, &outcome);
        if !record.pass {
            failures.push(FailureArtifact { suite, trial, input, record: record.clone() });
        }
        records.push(record);
    }
    let aggregate = Aggregate::from_records(&records);
    Ok((SuiteReport { suite, trials: records.len(), aggregate, records, failures }, trace))
}

/// Runs the configured suite (or every suite for `all`).
pub fn run(cfg: &SuiteConfig) -> Result<(FullReport, Vec<Checkpoint>), HarnessError> {
    let kinds: Vec<SuiteKind> =
        if cfg.suite == SuiteKind::All { SuiteKind::INDIVIDUAL.to_vec() } else { vec![cfg.suite] };
    let mut suites = Vec::new();
    let mut trace = Vec::new();
    for kind in kinds {
        let (report, t) = run_single(cfg, kind)?;
        if trace.is_empty() {
            trace = t;
        }
        suites.push(report);
    }
    Ok((FullReport::new(cfg.clone(), suites), trace))
}
