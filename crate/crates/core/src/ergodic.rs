//! Cesàro averages `A(n,T)x = (1/n) sum_{k<n} T^k x`, their maximal function
//! and the mean-ergodic splitting of `l_2` into fixed points and coboundaries.
//!
//! The averaging engine advances one power of `T` per step and stores only the
//! current power image, the running sum and the running maximal function.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsop::{dense_apply_into, finite_block, DsError, DsForm, DsOperator, ShiftDirection};
use crate::seqcore::{SeqError, Tail, TruncatedSequence};
use crate::sparse::SparseMatrix;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_WINDOW: usize = 3;
pub const DEFAULT_HORIZON: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ErgodicError {
    #[error(transparent)]
    Operator(#[from] DsError),
    #[error(transparent)]
    Sequence(#[from] SeqError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("operator form {0} is not supported here")]
    UnsupportedOperator(&'static str),
    #[error("maximal function tail bound {bound} reaches the level {alpha}; superlevel set size is undecidable")]
    UndecidableLevelSet { bound: f64, alpha: f64 },
    #[error(
        "decomposition did not meet tolerance (fixed-point defect {}, residual {})",
        .0.fixed_point_defect, .0.residual
    )]
    NoConvergence(Box<Decomposition>),
}

enum Engine {
    /// Operators with a finite block acting on a dense vector; the running
    /// sum is compensated.
    Dense { power: Vec<f64>, sum: Vec<f64>, carry: Vec<f64>, maximal: Vec<f64>, scratch: Vec<f64> },
    General { power: TruncatedSequence, sum: TruncatedSequence, maximal: TruncatedSequence },
}

/// Incremental state of `A(n,T)x` and of `max_{m<=n} |A(m,T)x|`.
pub struct AverageState {
    operator: DsOperator,
    n: u64,
    engine: Engine,
}

impl AverageState {
    pub fn new(operator: DsOperator, x: &TruncatedSequence) -> Result<Self, ErgodicError> {
        let dense = operator
            .dim()
            .filter(|_| matches!(operator.form(), DsForm::Matrix(_) | DsForm::Permutation(_)))
            .and_then(|dim| finite_block(x, dim).ok());
        let engine = match dense {
            Some(power) => {
                let m = power.len();
                Engine::Dense {
                    power,
                    sum: vec![0.0; m],
                    carry: vec![0.0; m],
                    maximal: vec![0.0; m],
                    scratch: vec![0.0; m],
                }
            }
            None => {
                // Validate compatibility once up front.
                operator.apply(x)?;
                Engine::General {
                    power: x.clone(),
                    sum: TruncatedSequence::zero(),
                    maximal: TruncatedSequence::zero(),
                }
            }
        };
        Ok(Self { operator, n: 0, engine })
    }

    pub fn operator(&self) -> &DsOperator {
        &self.operator
    }

    /// Number of terms in the current average.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Advances from `A(n)` to `A(n+1)`.
    pub fn step(&mut self) -> Result<(), ErgodicError> {
        let n = (self.n + 1) as f64;
        match &mut self.engine {
            Engine::Dense { power, sum, carry, maximal, scratch } => {
                for i in 0..power.len() {
                    let v = power[i];
                    let t = sum[i] + v;
                    carry[i] += if sum[i].abs() >= v.abs() { (sum[i] - t) + v } else { (v - t) + sum[i] };
                    sum[i] = t;
                    let avg = ((sum[i] + carry[i]) / n).abs();
                    if avg > maximal[i] {
                        maximal[i] = avg;
                    }
                }
                dense_apply_into(&self.operator, power, scratch);
                std::mem::swap(power, scratch);
            }
            Engine::General { power, sum, maximal } => {
                *sum = sum.add(power);
                *maximal = maximal.max_abs(&sum.scale(1.0 / n));
                *power = self.operator.apply(power)?;
            }
        }
        self.n += 1;
        Ok(())
    }

    /// `A(n,T)x`; the zero sequence before the first step.
    pub fn average(&self) -> TruncatedSequence {
        if self.n == 0 {
            return TruncatedSequence::zero();
        }
        let n = self.n as f64;
        match &self.engine {
            Engine::Dense { sum, carry, .. } => {
                TruncatedSequence::finite(sum.iter().zip(carry).map(|(s, c)| (s + c) / n).collect())
            }
            Engine::General { sum, .. } => sum.scale(1.0 / n),
        }
    }

    /// `sum_{k<n} T^k x`.
    pub fn running_sum(&self) -> TruncatedSequence {
        match &self.engine {
            Engine::Dense { sum, carry, .. } => {
                TruncatedSequence::finite(sum.iter().zip(carry).map(|(s, c)| s + c).collect())
            }
            Engine::General { sum, .. } => sum.clone(),
        }
    }

    /// `T^n x`.
    pub fn power_image(&self) -> TruncatedSequence {
        match &self.engine {
            Engine::Dense { power, .. } => TruncatedSequence::finite(power.clone()),
            Engine::General { power, .. } => power.clone(),
        }
    }

    /// `max_{1<=m<=n} |A(m,T)x|`, coordinatewise.
    pub fn maximal(&self) -> TruncatedSequence {
        match &self.engine {
            Engine::Dense { maximal, .. } => TruncatedSequence::finite(maximal.clone()),
            Engine::General { maximal, .. } => maximal.clone(),
        }
    }

    /// Coordinate `s` (1-based) of `A(n,T)x`, if determined.
    pub fn average_at(&self, s: usize) -> Option<f64> {
        if self.n == 0 {
            return Some(0.0);
        }
        let n = self.n as f64;
        match &self.engine {
            Engine::Dense { sum, carry, .. } => Some(sum.get(s - 1).map_or(0.0, |v| (v + carry[s - 1]) / n)),
            Engine::General { sum, .. } => sum.get(s).map(|v| v / n),
        }
    }
}

/// One geometric checkpoint of an averaging run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n: u64,
    /// `||A(n)x - A(n/2)x||_inf`.
    pub residual: f64,
    /// 1-based coordinate of the largest change (0 if it lies in the tail).
    pub coord_index: usize,
    /// `A(n)x` at `coord_index`.
    pub coord_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub limit_estimate: TruncatedSequence,
    pub converged: bool,
    pub residual_trace: Vec<Checkpoint>,
    /// Number of averaged terms behind `limit_estimate`.
    pub horizon: u64,
    pub tolerance: f64,
    pub window: usize,
}

impl ConvergenceReport {
    pub fn worst_window_residual(&self) -> f64 {
        let len = self.residual_trace.len();
        self.residual_trace[len.saturating_sub(self.window)..].iter().map(|c| c.residual).fold(0.0, f64::max)
    }

    pub fn write_trace_csv(&self, mut out: impl Write) -> io::Result<()> {
        write_trace_header(&mut out)?;
        for c in &self.residual_trace {
            writeln!(out, "{},{:e},{},{:e}", c.n, c.residual, c.coord_index, c.coord_value)?;
        }
        Ok(())
    }
}

pub fn write_trace_header(mut out: impl Write) -> io::Result<()> {
    writeln!(out, "n,residual,coord_index,coord_value")
}

/// Runs the averages with checkpoints at `n = 1, 2, 4, ...` and stops once the
/// last `window` doubling residuals are all `<= tol`, or at `horizon`.
pub fn run_averaging(
    operator: &DsOperator,
    x: &TruncatedSequence,
    horizon: u64,
    tol: f64,
    window: usize,
) -> Result<ConvergenceReport, ErgodicError> {
    if window < 2 || horizon < window as u64 {
        return Err(ErgodicError::InvalidArgument(format!(
            "need horizon >= window >= 2, got horizon {horizon}, window {window}"
        )));
    }
    let mut state = AverageState::new(operator.clone(), x)?;
    let mut trace = Vec::new();
    let mut previous: Option<TruncatedSequence> = None;
    let mut checkpoint = 1;
    let mut converged = false;
    while state.n() < horizon {
        state.step()?;
        if state.n() != checkpoint {
            continue;
        }
        checkpoint *= 2;
        let current = state.average();
        if let Some(prev) = previous.replace(current.clone()) {
            let (coord_index, residual) = largest_change(&current, &prev);
            let coord_value = coord_index.checked_sub(1).map_or(0.0, |i| current.values()[i]);
            trace.push(Checkpoint { n: state.n(), residual, coord_index, coord_value });
            converged = trace.len() >= window && trace[trace.len() - window..].iter().all(|c| c.residual <= tol);
            if converged {
                break;
            }
        }
    }
    Ok(ConvergenceReport {
        limit_estimate: state.average(),
        converged,
        residual_trace: trace,
        horizon: state.n(),
        tolerance: tol,
        window,
    })
}

fn largest_change(a: &TruncatedSequence, b: &TruncatedSequence) -> (usize, f64) {
    let diff = a.sub(b);
    let mut best = (0, diff.tail().sup());
    for (i, v) in diff.values().iter().enumerate() {
        if v.abs() > best.1 || (best.0 == 0 && v.abs() == best.1 && best.1 > 0.0) {
            best = (i + 1, v.abs());
        }
    }
    best
}

/// Finite-horizon maximal function `max_{1<=n<=horizon} |A(n,T)x|`: a lower
/// bound for the supremum over all `n`, non-decreasing in `horizon`.
pub fn maximal_function(
    operator: &DsOperator,
    x: &TruncatedSequence,
    horizon: u64,
) -> Result<TruncatedSequence, ErgodicError> {
    if horizon < 1 {
        return Err(ErgodicError::InvalidArgument("horizon must be at least 1".into()));
    }
    let mut state = AverageState::new(operator.clone(), x)?;
    for _ in 0..horizon {
        state.step()?;
    }
    Ok(state.maximal())
}

/// Outcome of one weak-type maximal inequality check
/// `#{s : Â(T,x)_s >= alpha} <= (2 ||x||_p / alpha)^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaximalCheck {
    pub p: f64,
    pub alpha: f64,
    pub lhs_card: usize,
    pub rhs_bound: f64,
    pub holds: bool,
}

impl MaximalCheck {
    /// Evaluates the inequality against an already computed maximal function.
    pub fn evaluate(maximal: &TruncatedSequence, norm_p: f64, p: f64, alpha: f64) -> Result<Self, ErgodicError> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(ErgodicError::InvalidArgument(format!("p must lie in [1, inf), got {p}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ErgodicError::InvalidArgument(format!("alpha must be positive, got {alpha}")));
        }
        let tail = maximal.tail().sup();
        if tail >= alpha {
            return Err(ErgodicError::UndecidableLevelSet { bound: tail, alpha });
        }
        let lhs_card = maximal.values().iter().filter(|&&v| v >= alpha).count();
        let rhs_bound = (2.0 * norm_p / alpha).powf(p);
        Ok(Self { p, alpha, lhs_card, rhs_bound, holds: lhs_card as f64 <= rhs_bound })
    }

    /// `lhs_card / rhs_bound` (0 when both vanish).
    pub fn ratio(&self) -> f64 {
        if self.lhs_card == 0 {
            0.0
        } else {
            self.lhs_card as f64 / self.rhs_bound
        }
    }
}

/// Checks the maximal inequality at a finite horizon. Since the finite-horizon
/// maximal function under-estimates the true one, `holds == false` refutes
/// the inequality while `holds == true` is only supporting evidence.
pub fn check_maximal_inequality(
    operator: &DsOperator,
    x: &TruncatedSequence,
    p: f64,
    alpha: f64,
    horizon: u64,
) -> Result<MaximalCheck, ErgodicError> {
    if !matches!(x.tail(), Tail::Zero) {
        return Err(ErgodicError::InvalidArgument("maximal inequality needs a finitely supported x".into()));
    }
    let norm = x.norm(p)?;
    let maximal = maximal_function(operator, x, horizon)?;
    MaximalCheck::evaluate(&maximal, norm, p, alpha)
}

/// `A(n,T)x` at coordinate `coord` (1-based) for every `n` in `1..=horizon`.
///
/// The left shift is evaluated by index arithmetic, `(T^k x)_s = x_{s+k}`, so
/// long horizons cost `O(horizon)`.
pub fn coordinate_averages(
    operator: &DsOperator,
    x: &TruncatedSequence,
    coord: usize,
    horizon: u64,
) -> Result<Vec<f64>, ErgodicError> {
    if coord == 0 {
        return Err(ErgodicError::InvalidArgument("coordinates are 1-based".into()));
    }
    let mut out = Vec::with_capacity(horizon as usize);
    if let DsForm::Shift(ShiftDirection::Left) = operator.form() {
        let mut sum = 0.0;
        let mut carry = 0.0;
        for k in 0..horizon as usize {
            let v = x.get(coord + k).ok_or_else(|| {
                ErgodicError::InvalidArgument(format!("x is not determined at position {}", coord + k))
            })?;
            let t = sum + v;
            carry += if f64::abs(sum) >= v.abs() { (sum - t) + v } else { (v - t) + sum };
            sum = t;
            out.push((sum + carry) / (k + 1) as f64);
        }
        return Ok(out);
    }
    let mut state = AverageState::new(operator.clone(), x)?;
    for _ in 0..horizon {
        state.step()?;
        out.push(state.average_at(coord).ok_or_else(|| {
            ErgodicError::InvalidArgument(format!("average is not determined at position {coord}"))
        })?);
    }
    Ok(out)
}

/// `x = y + (Tz - z) + residual` with `Ty ≈ y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Fixed part `y`, a high-order Cesàro average of `x`.
    pub fixed_part: TruncatedSequence,
    /// Coboundary source `z`.
    pub coboundary_source: TruncatedSequence,
    /// `||x - y - (Tz - z)||_2`.
    pub residual: f64,
    /// `||Ty - y||_inf`.
    pub fixed_point_defect: f64,
    /// `y = A(2^averaging_log2, T) x`, or its Richardson extrapolation.
    pub averaging_log2: u32,
    pub extrapolated: bool,
}

/// Estimate of the mean-ergodic projection of a vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub y: Vec<f64>,
    /// Order `log2 n` of the largest average involved.
    pub averaging_log2: u32,
    /// Whether `y = 2 A(2n)x - A(n)x` rather than `A(2n)x`.
    pub extrapolated: bool,
    /// `||Ty - y||_inf`.
    pub defect: f64,
}

/// Projects `x` onto the fixed space of `matrix` by Cesàro averages of
/// doubling order, `A(2n) = (A(n) + T^n A(n)) / 2`, until `||Ty - y||_inf <= tol`
/// or `max_doublings` is exhausted.
///
/// Away from unimodular eigenvalues other than 1 the averages behave like
/// `Px + S/n` up to geometrically small terms, so the Richardson combination
/// `2 A(2n)x - A(n)x` is tried as well once the plain average misses `tol`.
/// Both candidates differ from `x` by an element of the range of `T - I`.
/// Repeated squaring of `T` accumulates rounding roughly like `2^j` times the
/// unit roundoff, so the candidate with the smallest defect is returned when
/// `tol` is not met.
pub fn mean_ergodic_projection(matrix: &SparseMatrix, x: &[f64], tol: f64, max_doublings: u32) -> Projection {
    let defect_of = |v: &[f64]| sup_dist(&matrix.mul_vec(v), v);
    let mut y = x.to_vec();
    let mut best = Projection { defect: defect_of(&y), y: y.clone(), averaging_log2: 0, extrapolated: false };
    let mut power = matrix.clone();
    let mut order = 0;
    while best.defect > tol && order < max_doublings {
        let shifted = power.mul_vec(&y);
        let next: Vec<f64> = y.iter().zip(&shifted).map(|(a, b)| 0.5 * (a + b)).collect();
        let previous = std::mem::replace(&mut y, next);
        power = power.matmul(&power);
        order += 1;
        let plain = defect_of(&y);
        if plain < best.defect {
            best = Projection { y: y.clone(), averaging_log2: order, extrapolated: false, defect: plain };
        }
        if best.defect <= tol {
            break;
        }
        let extrapolated: Vec<f64> = y.iter().zip(&previous).map(|(a, b)| 2.0 * a - b).collect();
        let defect = defect_of(&extrapolated);
        if defect < best.defect {
            best = Projection { y: extrapolated, averaging_log2: order, extrapolated: true, defect };
        }
    }
    best
}

/// Factor between the decomposition tolerance and the projection target.
const PROJECTION_MARGIN: f64 = 1e-3;

/// Splits `x` into a fixed point of `T` plus a coboundary `Tz - z`.
///
/// `y` comes from [`mean_ergodic_projection`]; `z` is the minimal-norm least
/// squares solution of `(T - I) z = x - y`, computed by conjugate gradients on
/// the normal equations. Fails with [`ErgodicError::NoConvergence`] (carrying
/// the decomposition) unless `||Ty - y||_inf <= tol` and the residual is at
/// most `tol * ||x||_2`.
pub fn mean_ergodic_decompose(
    operator: &DsOperator,
    x: &TruncatedSequence,
    tol: f64,
    max_iters: u32,
) -> Result<Decomposition, ErgodicError> {
    let flattened;
    let matrix = match operator.matrix() {
        Some(m) => m,
        None => {
            let dim = operator.dim().ok_or(ErgodicError::UnsupportedOperator(operator.form_name()))?;
            flattened = operator.to_matrix(dim)?;
            flattened.matrix().expect("to_matrix returns matrix form")
        }
    };
    let dim = matrix.dim();
    let xv = finite_block(x, dim)?;
    // An approximate fixed part leaves a fixed-space component in x - y that no
    // coboundary can absorb, so the projection runs well past `tol`.
    let Projection { y, averaging_log2, extrapolated, .. } =
        mean_ergodic_projection(matrix, &xv, tol * PROJECTION_MARGIN, max_iters);
    let target: Vec<f64> = xv.iter().zip(&y).map(|(a, b)| a - b).collect();

    let dense = matrix.to_dense();
    let a: Vec<Vec<f64>> =
        (0..dim).map(|r| (0..dim).map(|c| dense[r][c] - if r == c { 1.0 } else { 0.0 }).collect()).collect();
    let z = least_squares(&a, &target);

    let tz = matrix.mul_vec(&z);
    let residual = l2(&(0..dim).map(|i| target[i] - (tz[i] - z[i])).collect::<Vec<_>>());
    let fixed_point_defect = sup_dist(&matrix.mul_vec(&y), &y);
    let decomposition = Decomposition {
        fixed_part: TruncatedSequence::finite(y),
        coboundary_source: TruncatedSequence::finite(z),
        residual,
        fixed_point_defect,
        averaging_log2,
        extrapolated,
    };
    if fixed_point_defect <= tol && residual <= tol * l2(&xv) {
        Ok(decomposition)
    } else {
        Err(ErgodicError::NoConvergence(Box::new(decomposition)))
    }
}

/// Minimal-norm least squares `argmin ||A z - b||_2` via CG on `A^T A z = A^T b`
/// started at zero, followed by a few refinement passes on the residual.
fn least_squares(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let dim = b.len();
    let mut z = vec![0.0; dim];
    for _ in 0..4 {
        let az = mat_vec(a, &z);
        let r: Vec<f64> = b.iter().zip(&az).map(|(b, v)| b - v).collect();
        let dz = cg_normal_equations(a, &r, 50 * dim.max(4));
        z.iter_mut().zip(&dz).for_each(|(z, d)| *z += d);
    }
    z
}

fn cg_normal_equations(a: &[Vec<f64>], b: &[f64], max_iters: usize) -> Vec<f64> {
    let dim = b.len();
    let mut z = vec![0.0; dim];
    let mut r = mat_t_vec(a, b);
    let stop = 1e-30 * dot(&r, &r).max(f64::MIN_POSITIVE);
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iters {
        if rr <= stop {
            break;
        }
        let ap = mat_vec(a, &p);
        let pap = dot(&ap, &ap);
        if pap == 0.0 {
            break;
        }
        let step = rr / pap;
        let atap = mat_t_vec(a, &ap);
        for i in 0..dim {
            z[i] += step * p[i];
            r[i] -= step * atap[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        for i in 0..dim {
            p[i] = r[i] + beta * p[i];
        }
    }
    z
}

fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| dot(row, x)).collect()
}

fn mat_t_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (row, xi) in a.iter().zip(x) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v * xi;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `| ||Ty - y||_2^2 - (||Ty||_2^2 - ||y||_2^2) |`; vanishes (up to rounding)
/// whenever `T^t y = y`.
pub fn isometry_identity_defect(matrix: &SparseMatrix, y: &[f64]) -> f64 {
    let ty = matrix.mul_vec(y);
    let diff: Vec<f64> = ty.iter().zip(y).map(|(a, b)| a - b).collect();
    (dot(&diff, &diff) - (dot(&ty, &ty) - dot(y, y))).abs()
}
