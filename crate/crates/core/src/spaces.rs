//! Descriptors for the symmetric sequence spaces `l_p`, `c0` and `l_inf`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seqcore::{lp_norm, Tail, TruncatedSequence};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("exponent must lie in [1, inf), got {0}")]
    InvalidExponent(f64),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpaceDescriptor {
    Lp { p: f64 },
    C0,
    Linf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Member,
    NonMember,
    Undecidable,
}

impl SpaceDescriptor {
    pub fn lp(p: f64) -> Result<Self, SpaceError> {
        if p >= 1.0 && p.is_finite() {
            Ok(Self::Lp { p })
        } else {
            Err(SpaceError::InvalidExponent(p))
        }
    }

    pub fn contains(&self, x: &TruncatedSequence) -> Membership {
        match (self, x.tail()) {
            (Self::Linf, _) => Membership::Member,
            (_, Tail::Constant(c)) if c != 0.0 => Membership::NonMember,
            (_, Tail::Bounded(b)) if b > 0.0 => Membership::Undecidable,
            // Finite prefix with a vanishing tail: every l_p norm is finite.
            (Self::C0 | Self::Lp { .. }, _) => Membership::Member,
        }
    }

    /// Whether the constant sequence `1` belongs to the space.
    pub fn contains_one(&self) -> bool {
        matches!(self, Self::Linf)
    }

    /// Uniform individual ergodic theorem property: for every `x` in the space
    /// and every Dunford-Schwartz `T`, the averages converge in `||.||_inf`
    /// inside the space. Holds exactly when `1` is not in the space.
    pub fn uiet(&self) -> bool {
        !self.contains_one()
    }
}

/// Finite shadow of the Fatou property of `l_p`.
///
/// Given a family `x_1, ..., x_K` converging uniformly toward `x` (the sup
/// distances must be non-increasing), checks
/// `||x||_p <= sup_k ||x_k||_p + d^(1/p) * ||x_K - x||_inf`, where `d` is the
/// length of the common finite support; the last term is the part of the gap
/// the finite family has not yet closed.
pub fn fatou_check(p: f64, family: &[TruncatedSequence], x: &TruncatedSequence) -> Result<bool, SpaceError> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(SpaceError::InvalidExponent(p));
    }
    if family.is_empty() {
        return Err(SpaceError::PreconditionViolated("empty family".into()));
    }
    if std::iter::once(x).chain(family).any(|s| !matches!(s.tail(), Tail::Zero)) {
        return Err(SpaceError::PreconditionViolated("all sequences must be finitely supported".into()));
    }
    let mut last = f64::INFINITY;
    let mut sup = 0.0_f64;
    let mut support = x.support_len();
    for (k, xk) in family.iter().enumerate() {
        let dist = xk.sub(x).sup_norm();
        if dist > last {
            return Err(SpaceError::PreconditionViolated(format!(
                "sup distance increases at member {}: {} > {}",
                k + 1,
                dist,
                last
            )));
        }
        last = dist;
        sup = sup.max(lp_norm(xk.values(), p));
        support = support.max(xk.support_len());
    }
    let norm = lp_norm(x.values(), p);
    let unclosed = (support as f64).powf(1.0 / p) * last;
    let slack = 1e-12 * (1.0 + sup);
    Ok(norm <= sup + unclosed + slack)
}
