//! Finite representations of elements of `l_inf` and its subspaces.
//!
//! A [`TruncatedSequence`] is a known prefix `x_1..x_N` together with a
//! symbolic [`Tail`] describing every coordinate past `N`. Every query on it is
//! either answered exactly or refused with an error; nothing is approximated
//! silently.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeqError {
    #[error("non-finite value {value} at position {position}")]
    NonFinite { position: usize, value: f64 },
    #[error("invalid tail: {0}")]
    InvalidTail(String),
    #[error("norm exponent must lie in [1, inf], got {0}")]
    InvalidExponent(f64),
    #[error("l_{p} norm is undecidable for a tail only bounded by {bound}")]
    UndecidableNorm { p: f64, bound: f64 },
    #[error("rearrangement cannot be certified: tail bound {bound} exceeds prefix magnitude {magnitude}")]
    InexactRearrangement { bound: f64, magnitude: f64 },
    #[error("sequence with constant tail {0} does not vanish at infinity")]
    NotInC0(f64),
    #[error("tail bound {bound} is not below 1/{k}")]
    SplitImpossible { bound: f64, k: u64 },
    #[error("split level must be a positive integer")]
    InvalidSplitLevel,
}

/// Behaviour of a sequence past its stored prefix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    /// `x_s = 0` for every `s > N`.
    Zero,
    /// `x_s = c` for every `s > N`.
    Constant(f64),
    /// `|x_s| <= b` for every `s > N`, values otherwise unknown.
    Bounded(f64),
}

impl Tail {
    /// Supremum of `|x_s|` over the tail.
    pub fn sup(&self) -> f64 {
        match *self {
            Tail::Zero => 0.0,
            Tail::Constant(c) => c.abs(),
            Tail::Bounded(b) => b,
        }
    }

    /// True when every tail coordinate is known to be exactly zero.
    pub fn is_zero(&self) -> bool {
        match *self {
            Tail::Zero => true,
            Tail::Constant(c) => c == 0.0,
            Tail::Bounded(b) => b == 0.0,
        }
    }

    /// The common value of the tail coordinates, when it is known.
    pub fn exact_value(&self) -> Option<f64> {
        match *self {
            Tail::Zero => Some(0.0),
            Tail::Constant(c) => Some(c),
            Tail::Bounded(b) if b == 0.0 => Some(0.0),
            Tail::Bounded(_) => None,
        }
    }

    fn validate(&self) -> Result<(), SeqError> {
        match *self {
            Tail::Zero => Ok(()),
            Tail::Constant(c) if c.is_finite() => Ok(()),
            Tail::Constant(c) => Err(SeqError::InvalidTail(format!("constant {c} is not finite"))),
            Tail::Bounded(b) if b.is_finite() && b >= 0.0 => Ok(()),
            Tail::Bounded(b) => Err(SeqError::InvalidTail(format!(
                "bound {b} must be finite and nonnegative"
            ))),
        }
    }
}

/// A real sequence indexed from 1: an explicit prefix plus a tail model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SequenceRecord", try_from = "SequenceRecord")]
pub struct TruncatedSequence {
    values: Vec<f64>,
    tail: Tail,
}

impl TruncatedSequence {
    pub fn new(values: Vec<f64>, tail: Tail) -> Result<Self, SeqError> {
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SeqError::NonFinite { position: i + 1, value: v });
        }
        tail.validate()?;
        Ok(Self { values, tail })
    }

    /// Finitely supported sequence with the given prefix.
    ///
    /// Panics if any value is NaN or infinite; use [`TruncatedSequence::new`]
    /// for unchecked input.
    pub fn finite(values: Vec<f64>) -> Self {
        Self::new(values, Tail::Zero).expect("finitely supported sequence must have finite entries")
    }

    pub fn zero() -> Self {
        Self { values: Vec::new(), tail: Tail::Zero }
    }

    /// The constant sequence `1 = (1, 1, ...)`.
    pub fn ones() -> Self {
        Self { values: Vec::new(), tail: Tail::Constant(1.0) }
    }

    /// Standard basis vector `e_index` (1-based).
    pub fn basis(index: usize) -> Self {
        assert!(index >= 1, "sequence positions start at 1");
        let mut values = vec![0.0; index];
        values[index - 1] = 1.0;
        Self { values, tail: Tail::Zero }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail(&self) -> Tail {
        self.tail
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_parts(self) -> (Vec<f64>, Tail) {
        (self.values, self.tail)
    }

    /// Value at 1-based position `s`, when it is determined.
    pub fn get(&self, s: usize) -> Option<f64> {
        assert!(s >= 1, "sequence positions start at 1");
        match self.values.get(s - 1) {
            Some(&v) => Some(v),
            None => self.tail.exact_value(),
        }
    }

    /// Length of the prefix up to and including its last nonzero entry.
    pub fn support_len(&self) -> usize {
        self.values.iter().rposition(|&v| v != 0.0).map_or(0, |i| i + 1)
    }

    /// True when the sequence is known to be finitely supported.
    pub fn is_finitely_supported(&self) -> bool {
        self.tail.is_zero()
    }

    /// Same element, with trailing prefix zeros removed when the tail is zero.
    pub fn trimmed(&self) -> Self {
        if self.tail.is_zero() {
            Self { values: self.values[..self.support_len()].to_vec(), tail: Tail::Zero }
        } else {
            self.clone()
        }
    }

    /// Dense copy of the first `len` coordinates. Requires an exact tail when
    /// `len` exceeds the prefix.
    pub fn dense_prefix(&self, len: usize) -> Option<Vec<f64>> {
        if len <= self.values.len() {
            return Some(self.values[..len].to_vec());
        }
        let fill = self.tail.exact_value()?;
        let mut out = self.values.clone();
        out.resize(len, fill);
        Some(out)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(self.tail.sup(), |m, v| m.max(v.abs()))
    }

    /// `l_p` norm for `p` in `[1, inf]` (`f64::INFINITY` selects the sup norm).
    ///
    /// Returns `+inf` for a nonzero constant tail with finite `p`, and refuses
    /// when the tail is only bounded.
    pub fn norm(&self, p: f64) -> Result<f64, SeqError> {
        if p.is_nan() || p < 1.0 {
            return Err(SeqError::InvalidExponent(p));
        }
        if p == f64::INFINITY {
            return Ok(self.sup_norm());
        }
        match self.tail {
            Tail::Bounded(b) if b > 0.0 => return Err(SeqError::UndecidableNorm { p, bound: b }),
            Tail::Constant(c) if c != 0.0 => return Ok(f64::INFINITY),
            _ => {}
        }
        Ok(lp_norm(&self.values, p))
    }

    /// Non-increasing rearrangement `x*`.
    ///
    /// Exact for zero and constant tails. For a bounded tail the prefix of `x*`
    /// is certified only when the bound does not exceed any nonzero prefix
    /// magnitude; the result then carries the same bounded tail.
    pub fn rearrange(&self) -> Result<Self, SeqError> {
        let mut mags: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
        match self.tail {
            Tail::Zero => {}
            Tail::Constant(c) if c == 0.0 => {}
            Tail::Bounded(b) if b == 0.0 => {}
            Tail::Constant(c) => {
                // Infinitely many |c| entries: only larger magnitudes precede them.
                let level = c.abs();
                mags.retain(|&m| m > level);
                sort_desc(&mut mags);
                return Ok(Self { values: mags, tail: Tail::Constant(level) });
            }
            Tail::Bounded(b) => {
                if let Some(&m) = mags.iter().filter(|&&m| m > 0.0 && m < b).min_by(|a, b| a.total_cmp(b)) {
                    return Err(SeqError::InexactRearrangement { bound: b, magnitude: m });
                }
                mags.retain(|&m| m > 0.0);
                sort_desc(&mut mags);
                return Ok(Self { values: mags, tail: Tail::Bounded(b) });
            }
        }
        sort_desc(&mut mags);
        Ok(Self { values: mags, tail: Tail::Zero })
    }

    /// Largest value of `sum_{n<=k} x*_n - sum_{n<=k} y*_n` over all `k`.
    ///
    /// `self ≺ other` exactly when this is `<= 0`. Returns `+inf` when the
    /// constant tail of `x*` exceeds that of `y*`.
    pub fn majorization_gap(&self, other: &Self) -> Result<f64, SeqError> {
        let xs = self.rearrange()?;
        let ys = other.rearrange()?;
        for t in [xs.tail, ys.tail] {
            if let Tail::Bounded(b) = t {
                if b > 0.0 {
                    // Partial sums past the certified prefix are unknown.
                    return Err(SeqError::InexactRearrangement { bound: b, magnitude: 0.0 });
                }
            }
        }
        let cx = xs.tail.sup();
        let cy = ys.tail.sup();
        let len = xs.len().max(ys.len());
        let mut gap = f64::NEG_INFINITY;
        let (mut sx, mut sy) = (0.0, 0.0);
        for i in 0..len {
            sx += xs.values.get(i).copied().unwrap_or(cx);
            sy += ys.values.get(i).copied().unwrap_or(cy);
            gap = gap.max(sx - sy);
        }
        if cx > cy {
            return Ok(f64::INFINITY);
        }
        if len == 0 {
            gap = 0.0;
        }
        Ok(gap)
    }

    /// Hardy-Littlewood-Polya order: true iff `self ≺ other`.
    pub fn majorized_by(&self, other: &Self) -> Result<bool, SeqError> {
        Ok(self.majorization_gap(other)? <= 0.0)
    }

    /// Splits a `c0` element as `head + tail_part` with a finitely supported
    /// head of minimal length and `||tail_part||_inf < 1/k`.
    pub fn split_c0(&self, k: u64) -> Result<SplitPair, SeqError> {
        if k == 0 {
            return Err(SeqError::InvalidSplitLevel);
        }
        let level = 1.0 / k as f64;
        match self.tail {
            Tail::Constant(c) if c != 0.0 => return Err(SeqError::NotInC0(c)),
            Tail::Bounded(b) if b >= level => return Err(SeqError::SplitImpossible { bound: b, k }),
            _ => {}
        }
        let cut = self.values.iter().rposition(|v| v.abs() >= level).map_or(0, |i| i + 1);
        let head = Self { values: self.values[..cut].to_vec(), tail: Tail::Zero };
        let mut rest = self.values.clone();
        rest[..cut].iter_mut().for_each(|v| *v = 0.0);
        let tail_part = Self { values: rest, tail: self.tail };
        let bound = tail_part.sup_norm();
        Ok(SplitPair { head, tail_part, k, bound })
    }

    pub fn abs(&self) -> Self {
        let tail = match self.tail {
            Tail::Constant(c) => Tail::Constant(c.abs()),
            t => t,
        };
        Self { values: self.values.iter().map(|v| v.abs()).collect(), tail }
    }

    pub fn scale(&self, factor: f64) -> Self {
        let tail = match self.tail {
            Tail::Zero => Tail::Zero,
            Tail::Constant(c) => Tail::Constant(factor * c),
            Tail::Bounded(b) => Tail::Bounded(factor.abs() * b),
        };
        Self { values: self.values.iter().map(|v| factor * v).collect(), tail }
    }

    /// `a * self + b * other`, exact wherever both operands are known.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        self.zip_with(other, |x, y| a * x + b * y, |sx, sy| a.abs() * sx + b.abs() * sy, |cx, cy| {
            a * cx + b * cy
        })
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(1.0, other, -1.0)
    }

    /// Coordinatewise `max(|self|, |other|)`.
    pub fn max_abs(&self, other: &Self) -> Self {
        self.zip_with(other, |x, y| x.abs().max(y.abs()), f64::max, |cx, cy| cx.abs().max(cy.abs()))
    }

    fn zip_with(
        &self,
        other: &Self,
        value: impl Fn(f64, f64) -> f64,
        bound: impl Fn(f64, f64) -> f64,
        constant: impl Fn(f64, f64) -> f64,
    ) -> Self {
        match (self.tail.exact_value(), other.tail.exact_value()) {
            (Some(cx), Some(cy)) => {
                let len = self.len().max(other.len());
                let values = (0..len)
                    .map(|i| {
                        let x = self.values.get(i).copied().unwrap_or(cx);
                        let y = other.values.get(i).copied().unwrap_or(cy);
                        value(x, y)
                    })
                    .collect();
                let tail = if matches!(self.tail, Tail::Zero) && matches!(other.tail, Tail::Zero) {
                    Tail::Zero
                } else {
                    Tail::Constant(constant(cx, cy))
                };
                Self { values, tail }
            }
            (ex, ey) => {
                // Only positions known on both sides stay in the prefix.
                let mut len = usize::MAX;
                if ex.is_none() {
                    len = len.min(self.len());
                }
                if ey.is_none() {
                    len = len.min(other.len());
                }
                let cx = ex.unwrap_or(0.0);
                let cy = ey.unwrap_or(0.0);
                let values = (0..len)
                    .map(|i| {
                        let x = self.values.get(i).copied().unwrap_or(cx);
                        let y = other.values.get(i).copied().unwrap_or(cy);
                        value(x, y)
                    })
                    .collect();
                let tail = Tail::Bounded(bound(self.sup_beyond(len), other.sup_beyond(len)));
                Self { values, tail }
            }
        }
    }

    /// `sup_{s > len} |x_s|`.
    fn sup_beyond(&self, len: usize) -> f64 {
        self.values.iter().skip(len).fold(self.tail.sup(), |m, v| m.max(v.abs()))
    }
}

impl fmt::Display for TruncatedSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        match self.tail {
            Tail::Zero => write!(f, "]"),
            Tail::Constant(c) => write!(f, "; {c}, {c}, ...]"),
            Tail::Bounded(b) => write!(f, "; |.| <= {b} ...]"),
        }
    }
}

/// Result of [`TruncatedSequence::split_c0`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    /// Finitely supported part; its length is the split index `s_k`.
    pub head: TruncatedSequence,
    pub tail_part: TruncatedSequence,
    pub k: u64,
    /// `||tail_part||_inf`, always `< 1/k`.
    pub bound: f64,
}

impl SplitPair {
    pub fn split_index(&self) -> usize {
        self.head.len()
    }
}

/// Flat serialized form used in reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub values: Vec<f64>,
    pub tail_kind: String,
    pub tail_value: f64,
}

impl From<TruncatedSequence> for SequenceRecord {
    fn from(x: TruncatedSequence) -> Self {
        let (tail_kind, tail_value) = match x.tail {
            Tail::Zero => ("zero", 0.0),
            Tail::Constant(c) => ("constant", c),
            Tail::Bounded(b) => ("bounded", b),
        };
        Self { values: x.values, tail_kind: tail_kind.to_string(), tail_value }
    }
}

impl TryFrom<SequenceRecord> for TruncatedSequence {
    type Error = SeqError;

    fn try_from(r: SequenceRecord) -> Result<Self, Self::Error> {
        let tail = match r.tail_kind.as_str() {
            "zero" => Tail::Zero,
            "constant" => Tail::Constant(r.tail_value),
            "bounded" => Tail::Bounded(r.tail_value),
            other => return Err(SeqError::InvalidTail(format!("unknown tail kind {other:?}"))),
        };
        TruncatedSequence::new(r.values, tail)
    }
}

fn sort_desc(v: &mut [f64]) {
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
}

/// Scaled `(sum |v|^p)^(1/p)`; never smaller than `max |v|`.
pub(crate) fn lp_norm(values: &[f64], p: f64) -> f64 {
    let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return values.iter().map(|v| v.abs()).sum();
    }
    let s: f64 = values.iter().map(|v| (v.abs() / peak).powf(p)).sum();
    peak * s.powf(1.0 / p)
}
