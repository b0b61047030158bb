//! Trial inputs and their evaluation. Every input is fully serializable so a
//! failing trial can be stored and re-run bit for bit.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::SuiteParams;
use super::demo::demo_counterexample;
use super::{trial_rng, SuiteKind};
use crate::dsop::{random_doubly_stochastic, random_ds, DsOperator, SignMode};
use crate::ergodic::{
    isometry_identity_defect, maximal_function, mean_ergodic_decompose, mean_ergodic_projection, run_averaging,
    AverageState, Checkpoint, ErgodicError, MaximalCheck, DEFAULT_WINDOW,
};
use crate::seqcore::TruncatedSequence;
use crate::spaces::{fatou_check, Membership, SpaceDescriptor};

/// Split levels `k` of the sandwich bound in the convergence suite.
pub const SANDWICH_LEVELS: [u64; 3] = [2, 8, 32];
/// Largest horizon used for the sandwich bound.
pub const SANDWICH_HORIZON_CAP: u64 = 1 << 12;
/// Number of perturbation sizes `1/m` in the rearrangement suite.
pub const PERTURBATION_STEPS: usize = 64;
/// Family length in the Fatou suite.
pub const FATOU_MEMBERS: usize = 32;
/// Doubling budget of the decomposition suite.
pub const DECOMPOSITION_DOUBLINGS: u32 = 64;
/// Absolute tolerance of the isometry identity on transpose-fixed vectors.
pub const ISOMETRY_TOL: f64 = 1e-10;
/// Relative slack for majorization partial sums.
pub const MAJORIZATION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "suite", rename_all = "snake_case")]
pub enum TrialInput {
    MaximalIneq {
        operator: DsOperator,
        /// Nonnegative direction; it is normalized in `l_p` for each `p`.
        direction: TruncatedSequence,
        p_values: Vec<f64>,
        alpha_values: Vec<f64>,
        horizon: u64,
    },
    Convergence {
        operator: DsOperator,
        x: TruncatedSequence,
        horizon: u64,
        tol: f64,
        window: usize,
    },
    Majorization {
        operator: DsOperator,
        x: TruncatedSequence,
        horizon: u64,
    },
    Decomposition {
        operator: DsOperator,
        x: TruncatedSequence,
        /// Projected onto the fixed space of `T^t` for the isometry identity.
        probe: Vec<f64>,
        tol: f64,
        max_iters: u32,
    },
    RearrangementContinuity {
        x: TruncatedSequence,
        /// `directions[m-1]` has sup norm 1; the perturbation is `directions[m-1] / m`.
        directions: Vec<Vec<f64>>,
    },
    Fatou {
        p: f64,
        x: TruncatedSequence,
        /// The family is `x + noise / k`, `k = 1..=members`.
        noise: Vec<f64>,
        members: usize,
    },
    Counterexample {
        horizon: u64,
        c0_contrast: bool,
    },
}

/// Result of evaluating one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub pass: bool,
    pub ratio: Option<f64>,
    pub residual: Option<f64>,
    pub detail: String,
    pub trace: Vec<Checkpoint>,
}

impl TrialOutcome {
    fn new(pass: bool, ratio: Option<f64>, residual: Option<f64>, detail: String) -> Self {
        Self { pass, ratio, residual, detail, trace: Vec::new() }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Self::new(false, None, None, format!("error: {e}"))
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn positive_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| 1.0 - rng.gen::<f64>()).collect()
}

fn unit_l2(v: Vec<f64>) -> TruncatedSequence {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    TruncatedSequence::finite(v.into_iter().map(|a| a / norm).collect())
}

fn draw_operator(rng: &mut ChaCha8Rng, params: &SuiteParams, sign: SignMode) -> DsOperator {
    if params.identity_operator {
        DsOperator::identity(params.dim)
    } else {
        random_ds(params.dim, params.density, sign, rng.gen())
    }
}

fn alternating_sign(trial: usize) -> SignMode {
    if trial.is_multiple_of(2) {
        SignMode::Nonnegative
    } else {
        SignMode::Signed
    }
}

/// Draws the input of `trial` from its own RNG stream.
pub fn draw(params: &SuiteParams, suite: SuiteKind, trial: usize) -> TrialInput {
    let mut rng = trial_rng(params.seed, suite, trial);
    let dim = params.dim;
    match suite {
        SuiteKind::MaximalIneq => {
            let operator = draw_operator(&mut rng, params, SignMode::Nonnegative);
            let direction = if params.identity_operator {
                TruncatedSequence::basis(1)
            } else {
                TruncatedSequence::finite(positive_vec(&mut rng, dim))
            };
            TrialInput::MaximalIneq {
                operator,
                direction,
                p_values: params.p_values.clone(),
                alpha_values: params.alpha_values.clone(),
                horizon: params.horizon,
            }
        }
        SuiteKind::Convergence => {
            let operator = draw_operator(&mut rng, params, alternating_sign(trial));
            let x = unit_l2(normal_vec(&mut rng, dim));
            TrialInput::Convergence { operator, x, horizon: params.horizon, tol: params.tol, window: DEFAULT_WINDOW }
        }
        SuiteKind::Majorization => {
            let operator = draw_operator(&mut rng, params, alternating_sign(trial));
            let x = unit_l2(normal_vec(&mut rng, dim));
            TrialInput::Majorization { operator, x, horizon: params.horizon }
        }
        SuiteKind::Decomposition => {
            let operator = if params.identity_operator {
                DsOperator::identity(dim)
            } else if trial.is_multiple_of(2) {
                random_ds(dim, params.density, SignMode::Nonnegative, rng.gen())
            } else {
                random_doubly_stochastic(dim, 3, rng.gen())
            };
            let x = unit_l2(normal_vec(&mut rng, dim));
            let probe = normal_vec(&mut rng, dim);
            TrialInput::Decomposition { operator, x, probe, tol: params.tol, max_iters: DECOMPOSITION_DOUBLINGS }
        }
        SuiteKind::RearrangementContinuity => {
            let x = TruncatedSequence::finite(normal_vec(&mut rng, dim));
            let directions = (0..PERTURBATION_STEPS)
                .map(|_| {
                    let mut d: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let peak = d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                    if peak > 0.0 {
                        d.iter_mut().for_each(|v| *v /= peak);
                    }
                    d
                })
                .collect();
            TrialInput::RearrangementContinuity { x, directions }
        }
        SuiteKind::Fatou => {
            let p = params.p_values[trial % params.p_values.len()];
            let x = TruncatedSequence::finite(normal_vec(&mut rng, dim));
            let noise = normal_vec(&mut rng, dim);
            TrialInput::Fatou { p, x, noise, members: FATOU_MEMBERS }
        }
        SuiteKind::Counterexample => TrialInput::Counterexample { horizon: params.horizon, c0_contrast: false },
        SuiteKind::All => panic!("draw expects an individual suite"),
    }
}

impl TrialInput {
    pub fn suite(&self) -> SuiteKind {
        match self {
            TrialInput::MaximalIneq { .. } => SuiteKind::MaximalIneq,
            TrialInput::Convergence { .. } => SuiteKind::Convergence,
            TrialInput::Majorization { .. } => SuiteKind::Majorization,
            TrialInput::Decomposition { .. } => SuiteKind::Decomposition,
            TrialInput::RearrangementContinuity { .. } => SuiteKind::RearrangementContinuity,
            TrialInput::Fatou { .. } => SuiteKind::Fatou,
            TrialInput::Counterexample { .. } => SuiteKind::Counterexample,
        }
    }

    /// Runs the trial. Errors are recorded as failures.
    pub fn evaluate(&self) -> TrialOutcome {
        let result = match self {
            TrialInput::MaximalIneq { operator, direction, p_values, alpha_values, horizon } => {
                eval_maximal(operator, direction, p_values, alpha_values, *horizon)
            }
            TrialInput::Convergence { operator, x, horizon, tol, window } => {
                eval_convergence(operator, x, *horizon, *tol, *window)
            }
            TrialInput::Majorization { operator, x, horizon } => eval_majorization(operator, x, *horizon),
            TrialInput::Decomposition { operator, x, probe, tol, max_iters } => {
                eval_decomposition(operator, x, probe, *tol, *max_iters)
            }
            TrialInput::RearrangementContinuity { x, directions } => eval_rearrangement(x, directions),
            TrialInput::Fatou { p, x, noise, members } => eval_fatou(*p, x, noise, *members),
            TrialInput::Counterexample { horizon, c0_contrast } => demo_counterexample(*horizon, *c0_contrast)
                .map(|r| {
                    let detail = format!(
                        "gap {:.6} (limsup {:.6}, liminf {:.6}), threshold {}",
                        r.gap, r.limsup_est, r.liminf_est, r.threshold
                    );
                    TrialOutcome { pass: r.passes, ratio: None, residual: Some(r.gap), detail, trace: r.trace }
                })
                .map_err(|e| e.to_string()),
        };
        result.unwrap_or_else(TrialOutcome::error)
    }
}

fn eval_maximal(
    operator: &DsOperator,
    direction: &TruncatedSequence,
    p_values: &[f64],
    alpha_values: &[f64],
    horizon: u64,
) -> Result<TrialOutcome, String> {
    let mut worst_ratio = 0.0_f64;
    let mut violations = Vec::new();
    for &p in p_values {
        let norm = direction.norm(p).map_err(|e| e.to_string())?;
        let x = direction.scale(1.0 / norm);
        let norm_x = x.norm(p).map_err(|e| e.to_string())?;
        let maximal = maximal_function(operator, &x, horizon).map_err(|e| e.to_string())?;
        for &alpha in alpha_values {
            let check = MaximalCheck::evaluate(&maximal, norm_x, p, alpha).map_err(|e| e.to_string())?;
            worst_ratio = worst_ratio.max(check.ratio());
            if !check.holds {
                violations.push(format!("p={p} alpha={alpha}: {} > {}", check.lhs_card, check.rhs_bound));
            }
        }
    }
    let detail = if violations.is_empty() {
        format!("max ratio {worst_ratio:.6}")
    } else {
        format!("violations: {}", violations.join("; "))
    };
    Ok(TrialOutcome::new(violations.is_empty(), Some(worst_ratio), None, detail))
}

fn eval_convergence(
    operator: &DsOperator,
    x: &TruncatedSequence,
    horizon: u64,
    tol: f64,
    window: usize,
) -> Result<TrialOutcome, String> {
    let report = run_averaging(operator, x, horizon, tol, window).map_err(|e| e.to_string())?;
    let limit = &report.limit_estimate;
    let residual = report.worst_window_residual();
    let mut problems = Vec::new();
    if !report.converged {
        problems.push(format!("no convergence by n={} (residual {residual:e})", report.horizon));
    }
    if (SpaceDescriptor::Lp { p: 2.0 }).contains(limit) != Membership::Member {
        problems.push("limit estimate not in l_2".to_string());
    }
    let scale = 1.0 + x.norm(1.0).map_err(|e| e.to_string())?;
    let gap = limit.majorization_gap(x).map_err(|e| e.to_string())?;
    if gap > MAJORIZATION_SLACK * scale {
        problems.push(format!("limit not majorized by x (gap {gap:e})"));
    }
    let sandwich = sandwich_excess(operator, x, horizon.min(SANDWICH_HORIZON_CAP)).map_err(|e| e.to_string())?;
    if sandwich > MAJORIZATION_SLACK * scale {
        problems.push(format!("split bound exceeded by {sandwich:e}"));
    }
    let detail = if problems.is_empty() {
        format!("converged at n={} (residual {residual:e})", report.horizon)
    } else {
        problems.join("; ")
    };
    Ok(TrialOutcome {
        pass: problems.is_empty(),
        ratio: None,
        residual: Some(residual),
        detail,
        trace: report.residual_trace,
    })
}

/// Largest excess of `||A(n)x - A(H)x||_inf` over
/// `||A(n)y - A(H)y||_inf + 2/k` across the split levels and the checkpoints
/// `n = 1, 2, 4, ... <= H`, where `y` is the head of the `c0` split at `k`.
/// Both limits are estimated at the same horizon `H`, so the bound is exact up
/// to rounding.
fn sandwich_excess(operator: &DsOperator, x: &TruncatedSequence, horizon: u64) -> Result<f64, ErgodicError> {
    let mut worst = f64::NEG_INFINITY;
    for k in SANDWICH_LEVELS {
        let split = x.split_c0(k)?;
        let mut xs = AverageState::new(operator.clone(), x)?;
        let mut ys = AverageState::new(operator.clone(), &split.head)?;
        let mut history = Vec::new();
        let mut checkpoint = 1;
        while xs.n() < horizon {
            xs.step()?;
            ys.step()?;
            if xs.n() == checkpoint {
                history.push((xs.average(), ys.average()));
                checkpoint *= 2;
            }
        }
        let (x_hat, y_hat) = (xs.average(), ys.average());
        for (ax, ay) in &history {
            let lhs = ax.sub(&x_hat).sup_norm();
            let rhs = ay.sub(&y_hat).sup_norm() + 2.0 / k as f64;
            worst = worst.max(lhs - rhs);
        }
    }
    Ok(worst)
}

fn eval_majorization(operator: &DsOperator, x: &TruncatedSequence, horizon: u64) -> Result<TrialOutcome, String> {
    let slack = MAJORIZATION_SLACK * (1.0 + x.norm(1.0).map_err(|e| e.to_string())?);
    let mut state = AverageState::new(operator.clone(), x).map_err(|e| e.to_string())?;
    let mut worst = f64::NEG_INFINITY;
    let mut failed_at = None;
    let mut checkpoint = 1;
    while state.n() < horizon {
        state.step().map_err(|e| e.to_string())?;
        if state.n() == checkpoint || state.n() == horizon {
            let gap = state.average().majorization_gap(x).map_err(|e| e.to_string())?;
            worst = worst.max(gap);
            if gap > slack && failed_at.is_none() {
                failed_at = Some(state.n());
            }
            if state.n() == checkpoint {
                checkpoint *= 2;
            }
        }
    }
    let detail = match failed_at {
        None => format!("max partial-sum excess {worst:e}"),
        Some(n) => format!("A(n)x not majorized by x at n={n} (excess {worst:e})"),
    };
    Ok(TrialOutcome::new(failed_at.is_none(), None, Some(worst.max(0.0)), detail))
}

fn eval_decomposition(
    operator: &DsOperator,
    x: &TruncatedSequence,
    probe: &[f64],
    tol: f64,
    max_iters: u32,
) -> Result<TrialOutcome, String> {
    let norm = x.norm(2.0).map_err(|e| e.to_string())?;
    let (decomposition, mut problems) = match mean_ergodic_decompose(operator, x, tol, max_iters) {
        Ok(d) => (d, Vec::new()),
        Err(ErgodicError::NoConvergence(d)) => {
            let msg = format!("residual {:e}, fixed-point defect {:e}", d.residual, d.fixed_point_defect);
            (*d, vec![msg])
        }
        Err(e) => return Err(e.to_string()),
    };
    let dim = operator.dim().ok_or("operator without finite dimension")?;
    let matrix = operator.to_matrix(dim).map_err(|e| e.to_string())?;
    let transpose = matrix.transpose().map_err(|e| e.to_string())?;
    let t = matrix.matrix().expect("matrix form");
    let tt = transpose.matrix().expect("matrix form");
    let w = mean_ergodic_projection(tt, probe, tol * 1e-2, max_iters).y;
    let defect = isometry_identity_defect(t, &w);
    if defect > ISOMETRY_TOL {
        problems.push(format!("isometry identity defect {defect:e}"));
    }
    let relative = decomposition.residual / norm;
    let detail = if problems.is_empty() {
        format!(
            "relative residual {relative:e}, fixed-point defect {:e}, identity defect {defect:e}",
            decomposition.fixed_point_defect
        )
    } else {
        problems.join("; ")
    };
    Ok(TrialOutcome::new(problems.is_empty(), None, Some(relative), detail))
}

fn eval_rearrangement(x: &TruncatedSequence, directions: &[Vec<f64>]) -> Result<TrialOutcome, String> {
    let x_star = x.rearrange().map_err(|e| e.to_string())?;
    // Forming x + delta rounds at the scale of |x|.
    let rounding = 4.0 * f64::EPSILON * (1.0 + x.sup_norm());
    let mut worst_scaled = 0.0_f64;
    let mut problems = Vec::new();
    for (i, d) in directions.iter().enumerate() {
        let m = (i + 1) as f64;
        let xm = x.add(&TruncatedSequence::finite(d.iter().map(|v| v / m).collect()));
        let measured = xm.sub(x).sup_norm();
        let xm_star = xm.rearrange().map_err(|e| e.to_string())?;
        let len = x_star.len().max(xm_star.len());
        let gap = (1..=len)
            .map(|n| (xm_star.get(n).unwrap_or(0.0) - x_star.get(n).unwrap_or(0.0)).abs())
            .fold(0.0, f64::max);
        worst_scaled = worst_scaled.max(gap * m);
        if gap > measured {
            problems.push(format!("m={}: gap {gap:e} exceeds perturbation {measured:e}", i + 1));
        }
        if gap > 1.0 / m + rounding {
            problems.push(format!("m={}: gap {gap:e} exceeds 1/m", i + 1));
        }
    }
    let detail = if problems.is_empty() { format!("max m*gap {worst_scaled:.6}") } else { problems.join("; ") };
    Ok(TrialOutcome::new(problems.is_empty(), Some(worst_scaled), None, detail))
}

fn eval_fatou(p: f64, x: &TruncatedSequence, noise: &[f64], members: usize) -> Result<TrialOutcome, String> {
    let noise = TruncatedSequence::finite(noise.to_vec());
    let family: Vec<_> = (1..=members).map(|k| x.combine(1.0, &noise, 1.0 / k as f64)).collect();
    let holds = fatou_check(p, &family, x).map_err(|e| e.to_string())?;
    let detail = format!("p={p}, {members} members: {}", if holds { "norm bound holds" } else { "norm bound fails" });
    Ok(TrialOutcome::new(holds, None, None, detail))
}
