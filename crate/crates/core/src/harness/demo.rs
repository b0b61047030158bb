//! Coordinatewise divergence of the averages for an `l_inf` element under the
//! left shift, contrasted with a `c0` element.

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::dsop::DsOperator;
use crate::ergodic::{coordinate_averages, Checkpoint};
use crate::seqcore::{Tail, TruncatedSequence};

pub const MIN_DEMO_HORIZON: u64 = 1 << 10;
/// Minimal oscillation gap required of the block sequence.
pub const BLOCK_GAP_THRESHOLD: f64 = 0.2;
/// Maximal oscillation gap allowed for the `c0` contrast.
pub const CONTRAST_GAP_THRESHOLD: f64 = 0.01;

/// Indicator of `s ∈ [4^j, 2·4^j)` for some `j >= 0`.
pub fn in_block(s: u64) -> bool {
    s >= 1 && (63 - s.leading_zeros()).is_multiple_of(2)
}

/// `x_s = 1` on the blocks `[4^j, 2·4^j)`, `0` elsewhere, known for
/// `s <= len`.
pub fn block_sequence(len: usize) -> TruncatedSequence {
    let values = (1..=len as u64).map(|s| if in_block(s) { 1.0 } else { 0.0 }).collect();
    TruncatedSequence::new(values, Tail::Bounded(1.0)).expect("finite values")
}

/// The block sequence damped by `1/sqrt(s)`, an element of `c0`.
pub fn damped_block_sequence(len: usize) -> TruncatedSequence {
    let values =
        (1..=len as u64).map(|s| if in_block(s) { 1.0 / (s as f64).sqrt() } else { 0.0 }).collect();
    let bound = 1.0 / ((len + 1) as f64).sqrt();
    TruncatedSequence::new(values, Tail::Bounded(bound)).expect("finite values")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub coord: usize,
    pub horizon: u64,
    pub c0_contrast: bool,
    /// Largest `A(n,T)x` at `coord` over the final octave `horizon/2 < n <= horizon`.
    pub limsup_est: f64,
    /// Smallest value over the same octave.
    pub liminf_est: f64,
    pub gap: f64,
    pub threshold: f64,
    pub passes: bool,
    /// Checkpoints at `n = 2, 4, 8, ...`; `residual` is the change since `n/2`.
    pub trace: Vec<Checkpoint>,
}

/// Averages of the left shift at coordinate 1 up to `horizon`. Passes when the
/// block sequence oscillates by at least [`BLOCK_GAP_THRESHOLD`], or, with
/// `c0_contrast`, when the damped sequence oscillates by at most
/// [`CONTRAST_GAP_THRESHOLD`].
pub fn demo_counterexample(horizon: u64, c0_contrast: bool) -> Result<CounterexampleReport, HarnessError> {
    if horizon < MIN_DEMO_HORIZON {
        return Err(HarnessError::Config(format!("demo horizon must be at least {MIN_DEMO_HORIZON}, got {horizon}")));
    }
    let coord = 1;
    let len = horizon as usize + coord;
    let x = if c0_contrast { damped_block_sequence(len) } else { block_sequence(len) };
    let averages = coordinate_averages(&DsOperator::shift_left(), &x, coord, horizon)?;

    let octave = &averages[(horizon / 2) as usize..];
    let limsup_est = octave.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let liminf_est = octave.iter().copied().fold(f64::INFINITY, f64::min);
    let gap = limsup_est - liminf_est;

    let mut trace = Vec::new();
    let mut n = 2;
    while n <= horizon {
        let value = averages[n as usize - 1];
        let residual = (value - averages[n as usize / 2 - 1]).abs();
        trace.push(Checkpoint { n, residual, coord_index: coord, coord_value: value });
        n *= 2;
    }
    let (threshold, passes) = if c0_contrast {
        (CONTRAST_GAP_THRESHOLD, gap <= CONTRAST_GAP_THRESHOLD)
    } else {
        (BLOCK_GAP_THRESHOLD, gap >= BLOCK_GAP_THRESHOLD)
    };
    Ok(CounterexampleReport { coord, horizon, c0_contrast, limsup_est, liminf_est, gap, threshold, passes, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks() {
        let x = block_sequence(20);
        let ones: Vec<usize> = (1..=20).filter(|&s| x.get(s) == Some(1.0)).collect();
        assert_eq!(ones, vec![1, 4, 5, 6, 7, 16, 17, 18, 19, 20]);
        assert_eq!(x.get(21), None);
    }

    #[test]
    fn small_horizon_oscillates() {
        let r = demo_counterexample(1 << 10, false).unwrap();
        assert!(r.gap > 0.0);
        assert_eq!(r.trace.len(), 10);
        assert_eq!(r.trace.last().unwrap().n, 1 << 10);
        assert!(demo_counterexample(512, false).is_err());
    }

    #[test]
    fn contrast_gap_shrinks() {
        let small = demo_counterexample(1 << 10, true).unwrap();
        let large = demo_counterexample(1 << 16, true).unwrap();
        assert!(large.gap < small.gap);
    }
}
