//! Acceptance criteria 1-8, one status line each.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use ergoseq::dsop::{random_ds, SignMode};
use ergoseq::ergodic::{run_averaging, AverageState};
use ergoseq::harness::config::SuiteConfig;
use ergoseq::harness::demo::demo_counterexample;
use ergoseq::harness::report::sha256_hex;
use ergoseq::harness::trials::{draw, TrialInput, MAJORIZATION_SLACK};
use ergoseq::harness::{run_single, SuiteKind};
use ergoseq::seqcore::TruncatedSequence;
use ergoseq::spaces::{Membership, SpaceDescriptor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(v: &Verdict) {
    // Written straight to the stream so the lines survive output capture.
    let status = if v.pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{status}] criterion {} ({}): {}", v.id, v.name, v.detail);
}

fn maximal_inequality() -> Verdict {
    let cfg = SuiteConfig {
        seed: 42,
        trials: 1000,
        dim: 16,
        horizon: Some(4096),
        p_values: vec![1.0, 2.0, 3.0],
        alpha_values: vec![0.1, 0.25, 0.5, 1.0],
        ..SuiteConfig::for_suite(SuiteKind::MaximalIneq)
    };
    let start = Instant::now();
    let (r, _) = run_single(&cfg, SuiteKind::MaximalIneq).unwrap();
    let elapsed = start.elapsed();
    for f in &r.failures {
        let _ = writeln!(std::io::stderr(), "  reproducer: {}", serde_json::to_string(f).unwrap());
    }
    Verdict {
        id: 1,
        name: "maximal inequality",
        pass: r.aggregate.fail == 0 && r.trials == 1000 && elapsed <= Duration::from_secs(60),
        detail: format!(
            "{} violations in {} trials, max ratio {:.4}, {:.1} s",
            r.aggregate.fail,
            r.trials,
            r.aggregate.max_ratio.unwrap_or(0.0),
            elapsed.as_secs_f64()
        ),
    }
}

fn uniform_convergence() -> Verdict {
    let cfg = SuiteConfig {
        seed: 7,
        trials: 500,
        dim: 16,
        tol: 1e-8,
        horizon: Some(1 << 20),
        ..SuiteConfig::for_suite(SuiteKind::Convergence)
    };
    let params = cfg.resolved(SuiteKind::Convergence);
    let (mut converged, mut majorized, mut contained) = (0, 0, 0);
    let mut worst = 0.0_f64;
    for trial in 0..cfg.trials {
        let TrialInput::Convergence { operator, x, horizon, tol, window } = draw(&params, SuiteKind::Convergence, trial)
        else {
            unreachable!()
        };
        let r = run_averaging(&operator, &x, horizon, tol, window).unwrap();
        worst = worst.max(r.worst_window_residual());
        converged += usize::from(r.converged);
        let slack = MAJORIZATION_SLACK * (1.0 + x.norm(1.0).unwrap());
        majorized += usize::from(r.limit_estimate.majorization_gap(&x).unwrap() <= slack);
        contained += usize::from((SpaceDescriptor::Lp { p: 2.0 }).contains(&r.limit_estimate) == Membership::Member);
    }
    let n = cfg.trials;
    Verdict {
        id: 2,
        name: "uniform convergence",
        pass: converged == n && majorized == n && contained == n,
        detail: format!(
            "converged {converged}/{n}, majorized {majorized}/{n}, in l_2 {contained}/{n}, worst final residual {worst:.3e} vs tol 1e-8"
        ),
    }
}

fn decomposition() -> Verdict {
    let cfg = SuiteConfig { seed: 42, trials: 200, dim: 16, ..SuiteConfig::for_suite(SuiteKind::Decomposition) };
    let (r, _) = run_single(&cfg, SuiteKind::Decomposition).unwrap();
    Verdict {
        id: 3,
        name: "decomposition",
        pass: r.aggregate.fail == 0 && r.trials == 200,
        detail: format!(
            "{}/{} pass, worst relative residual {:.3e}",
            r.aggregate.pass,
            r.trials,
            r.aggregate.worst_residual.unwrap_or(0.0)
        ),
    }
}

fn counterexample() -> Verdict {
    let start = Instant::now();
    let block = demo_counterexample(1 << 20, false).unwrap();
    let contrast = demo_counterexample(1 << 20, true).unwrap();
    let elapsed = start.elapsed();
    Verdict {
        id: 4,
        name: "counterexample demo",
        pass: block.gap >= 0.2 && contrast.gap <= 0.01 && elapsed <= Duration::from_secs(10),
        detail: format!(
            "block gap {:.6} (>= 0.2), c0 gap {:.6} (<= 0.01), {:.2} s",
            block.gap,
            contrast.gap,
            elapsed.as_secs_f64()
        ),
    }
}

fn modulus_domination() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = 0;
    let mut checks = 0;
    for seed in 0..200u64 {
        let op = random_ds(16, 0.5, SignMode::Signed, seed);
        let modulus = op.modulus().unwrap();
        let x = TruncatedSequence::finite((0..16).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let mut lhs = x.clone();
        let mut rhs = x.abs();
        for _ in 1..=20 {
            lhs = op.apply(&lhs).unwrap();
            rhs = modulus.apply(&rhs).unwrap();
            for s in 1..=16 {
                let (l, r) = (lhs.get(s).unwrap().abs(), rhs.get(s).unwrap());
                checks += 1;
                if l > r + 1e-12 * r {
                    violations += 1;
                }
            }
        }
    }
    Verdict {
        id: 5,
        name: "modulus domination",
        pass: violations == 0,
        detail: format!("{violations} violations in {checks} entrywise checks (200 operators, k <= 20)"),
    }
}

fn rearrangement_and_fatou() -> Verdict {
    let cfg = SuiteConfig { seed: 42, ..SuiteConfig::default() };
    let (rearr, _) = run_single(&cfg, SuiteKind::RearrangementContinuity).unwrap();
    let (fatou, _) = run_single(&cfg, SuiteKind::Fatou).unwrap();
    Verdict {
        id: 6,
        name: "rearrangement continuity and Fatou",
        pass: rearr.all_pass() && fatou.all_pass(),
        detail: format!(
            "rearrangement {}/{} (max m*gap {:.4}), Fatou {}/{}",
            rearr.aggregate.pass,
            rearr.trials,
            rearr.aggregate.max_ratio.unwrap_or(0.0),
            fatou.aggregate.pass,
            fatou.trials
        ),
    }
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let digest = |name: &str| {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_ergoseq"))
            .args(["suite", "all", "--seed", "42", "--out", path.to_str().unwrap()])
            .output()
            .unwrap()
            .status;
        assert!(matches!(status.code(), Some(0 | 1)), "suite run errored: {status}");
        sha256_hex(&std::fs::read(path).unwrap())
    };
    let (a, b) = (digest("a.json"), digest("b.json"));
    Verdict { id: 7, name: "determinism", pass: a == b, detail: format!("sha256 {a} vs {b}") }
}

fn oracle_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0_f64;
    for case in 0..100u64 {
        let dim = 1 + (case % 4) as usize;
        let horizon = rng.gen_range(1..=64usize);
        let mode = if case % 2 == 0 { SignMode::Nonnegative } else { SignMode::Signed };
        let op = random_ds(dim, 0.7, mode, case);
        let t = op.matrix().unwrap().to_dense();
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();

        // Dense powers T^k, then naive sums of T^k x.
        let mut power: Vec<Vec<f64>> = (0..dim).map(|i| (0..dim).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        let mut sum = vec![0.0; dim];
        let mut state = AverageState::new(op.clone(), &TruncatedSequence::finite(x.clone())).unwrap();
        for n in 1..=horizon {
            for i in 0..dim {
                sum[i] += (0..dim).map(|j| power[i][j] * x[j]).sum::<f64>();
            }
            power = (0..dim)
                .map(|i| (0..dim).map(|j| (0..dim).map(|k| power[i][k] * t[k][j]).sum()).collect())
                .collect();
            state.step().unwrap();
            let avg = state.average();
            for i in 0..dim {
                worst = worst.max((avg.get(i + 1).unwrap() - sum[i] / n as f64).abs());
            }
        }
    }
    Verdict {
        id: 8,
        name: "oracle equivalence",
        pass: worst <= 1e-12,
        detail: format!("max |engine - brute force| = {worst:.3e} over 100 cases (<= 1e-12)"),
    }
}

#[test]
fn acceptance() {
    let criteria: [fn() -> Verdict; 8] = [
        maximal_inequality,
        uniform_convergence,
        decomposition,
        counterexample,
        modulus_domination,
        rearrangement_and_fatou,
        determinism,
        oracle_equivalence,
    ];
    let mut failed = Vec::new();
    for criterion in criteria {
        let verdict = criterion();
        report(&verdict);
        if !verdict.pass {
            failed.push(verdict.id);
        }
    }
    assert!(failed.is_empty(), "acceptance criteria failed: {failed:?}");
}
