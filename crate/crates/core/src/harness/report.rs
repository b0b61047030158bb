//! JSON report schema. Reports carry no timestamps, so identical
//! configurations produce byte-identical output.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::SuiteConfig;
use super::trials::{TrialInput, TrialOutcome};
use super::SuiteKind;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    pub detail: String,
}

impl TrialRecord {
    pub fn from_outcome(trial: usize, outcome: &TrialOutcome) -> Self {
        Self {
            trial,
            pass: outcome.pass,
            ratio: outcome.ratio,
            residual: outcome.residual,
            detail: outcome.detail.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub pass: usize,
    pub fail: usize,
    /// Largest `lhs_card / rhs_bound` seen (maximal inequality) or largest
    /// scaled gap (rearrangement continuity).
    pub max_ratio: Option<f64>,
    pub worst_residual: Option<f64>,
}

fn max_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, None) => a,
        (None, b) => b,
    }
}

impl Aggregate {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        records.iter().fold(Self::default(), |acc, r| Self {
            pass: acc.pass + usize::from(r.pass),
            fail: acc.fail + usize::from(!r.pass),
            max_ratio: max_opt(acc.max_ratio, r.ratio),
            worst_residual: max_opt(acc.worst_residual, r.residual),
        })
    }

    /// Order-independent merge.
    pub fn merge(self, other: Self) -> Self {
        Self {
            pass: self.pass + other.pass,
            fail: self.fail + other.fail,
            max_ratio: max_opt(self.max_ratio, other.max_ratio),
            worst_residual: max_opt(self.worst_residual, other.worst_residual),
        }
    }
}

/// Everything needed to re-run a failing trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureArtifact {
    pub suite: SuiteKind,
    pub trial: usize,
    pub input: TrialInput,
    pub record: TrialRecord,
}

impl FailureArtifact {
    /// Re-evaluates the stored input.
    pub fn replay(&self) -> TrialRecord {
        TrialRecord::from_outcome(self.trial, &self.input.evaluate())
    }

    pub fn reproduces(&self) -> bool {
        self.replay() == self.record
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: SuiteKind,
    pub trials: usize,
    pub aggregate: Aggregate,
    pub records: Vec<TrialRecord>,
    pub failures: Vec<FailureArtifact>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.aggregate.fail == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub schema_version: u32,
    pub config: SuiteConfig,
    pub aggregate: Aggregate,
    pub failures: Vec<FailureArtifact>,
    pub suites: Vec<SuiteReport>,
}

impl FullReport {
    pub fn new(config: SuiteConfig, suites: Vec<SuiteReport>) -> Self {
        let aggregate = suites.iter().map(|s| s.aggregate).fold(Aggregate::default(), Aggregate::merge);
        let failures = suites.iter().flat_map(|s| s.failures.iter().cloned()).collect();
        Self { schema_version: SCHEMA_VERSION, config, aggregate, failures, suites }
    }

    pub fn all_pass(&self) -> bool {
        self.aggregate.fail == 0
    }

    pub fn suite(&self, kind: SuiteKind) -> Option<&SuiteReport> {
        self.suites.iter().find(|s| s.suite == kind)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self).map(|mut s| {
            s.push('\n');
            s
        })
    }
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(trial: usize, pass: bool, ratio: Option<f64>, residual: Option<f64>) -> TrialRecord {
        TrialRecord { trial, pass, ratio, residual, detail: String::new() }
    }

    #[test]
    fn aggregate_counts_and_maxima() {
        let records = vec![
            record(0, true, Some(0.2), None),
            record(1, false, Some(0.7), Some(1e-3)),
            record(2, true, None, Some(5e-3)),
        ];
        let agg = Aggregate::from_records(&records);
        assert_eq!((agg.pass, agg.fail), (2, 1));
        assert_eq!(agg.max_ratio, Some(0.7));
        assert_eq!(agg.worst_residual, Some(5e-3));
        let mut reversed = records.clone();
        reversed.reverse();
        assert_eq!(Aggregate::from_records(&reversed), agg);
        let split = Aggregate::from_records(&records[..1]).merge(Aggregate::from_records(&records[1..]));
        assert_eq!(split, agg);
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
