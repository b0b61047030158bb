use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use ergoseq::dsop::{certify_ds, DsError, ARITHMETIC_SLACK};
use ergoseq::ergodic::{run_averaging, write_trace_header, Checkpoint, DEFAULT_HORIZON, DEFAULT_TOLERANCE, DEFAULT_WINDOW};
use ergoseq::harness::config::{parse_config_text, parse_list, SuiteConfig};
use ergoseq::harness::demo::demo_counterexample;
use ergoseq::harness::specs::{load_dense_matrix, parse_operator, parse_sequence};
use ergoseq::harness::{run, HarnessError, SuiteKind};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "ergoseq", version, about = "Seeded experiments on Dunford-Schwartz operators and their Cesàro averages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a randomized suite (or `all`).
    Suite(SuiteArgs),
    /// Divergence demonstration.
    Demo {
        #[command(subcommand)]
        which: DemoKind,
    },
    /// Check that a dense matrix file is a Dunford-Schwartz contraction.
    Certify {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = ARITHMETIC_SLACK)]
        tol: f64,
    },
    /// Cesàro averages of one operator on one sequence.
    Average {
        #[arg(long)]
        op: String,
        #[arg(long)]
        x: String,
        #[arg(long, default_value_t = DEFAULT_HORIZON)]
        horizon: u64,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DemoKind {
    Counterexample {
        #[arg(long, default_value_t = 1 << 20)]
        horizon: u64,
        /// Use a `c0` sequence instead of the block sequence.
        #[arg(long)]
        c0_contrast: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct SuiteArgs {
    name: String,
    /// Flat key=value file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Comma-separated exponents.
    #[arg(long)]
    p: Option<String>,
    /// Comma-separated levels.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    density: Option<f64>,
    /// Replace random operators by the identity.
    #[arg(long)]
    identity: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Harness(HarnessError),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        CliError::Harness(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Harness(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Harness(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Suite(args) => suite(args),
        Command::Demo { which: DemoKind::Counterexample { horizon, c0_contrast, out, trace } } => {
            demo(horizon, c0_contrast, out, trace)
        }
        Command::Certify { matrix, tol } => certify(&matrix, tol),
        Command::Average { op, x, horizon, tol, window, out, trace } => average(&op, &x, horizon, tol, window, out, trace),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Harness(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_trace(path: &Path, trace: &[Checkpoint]) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_trace_header(&mut out)?;
    for c in trace {
        writeln!(out, "{},{:e},{},{:e}", c.n, c.residual, c.coord_index, c.coord_value)?;
    }
    out.flush()?;
    Ok(())
}

fn suite(args: SuiteArgs) -> Result<bool, CliError> {
    let kind: SuiteKind = args.name.parse().map_err(|e: HarnessError| CliError::Usage(e.to_string()))?;
    let mut cfg = SuiteConfig::for_suite(kind);
    let mut out = args.out;
    let mut trace = args.trace;
    if let Some(path) = &args.config {
        let pairs = parse_config_text(&std::fs::read_to_string(path)?)?;
        cfg.apply_pairs(&pairs)?;
        // The positional suite name wins over the file.
        cfg.suite = kind;
        out = out.or_else(|| pairs.get("out").map(PathBuf::from));
        trace = trace.or_else(|| pairs.get("trace").map(PathBuf::from));
    }
    let list = |s: &str, what: &str| parse_list(s).map_err(|e| CliError::Usage(format!("--{what}: {e}")));
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.dim {
        cfg.dim = v;
    }
    if let Some(v) = args.horizon {
        cfg.horizon = Some(v);
    }
    if let Some(v) = args.tol {
        cfg.tol = v;
    }
    if let Some(v) = &args.p {
        cfg.p_values = list(v, "p")?;
    }
    if let Some(v) = &args.alpha {
        cfg.alpha_values = list(v, "alpha")?;
    }
    if let Some(v) = args.density {
        cfg.density = v;
    }
    cfg.identity_operator |= args.identity;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let (report, first_trace) = run(&cfg)?;
    for s in &report.suites {
        let mut line = format!("{:<26} pass {:>5}  fail {:>5}", s.suite.name(), s.aggregate.pass, s.aggregate.fail);
        if let Some(r) = s.aggregate.max_ratio {
            line.push_str(&format!("  max_ratio {r:.6}"));
        }
        if let Some(r) = s.aggregate.worst_residual {
            line.push_str(&format!("  worst_residual {r:e}"));
        }
        println!("{line}");
    }
    for f in &report.failures {
        eprintln!("FAIL {} trial {}: {}", f.suite, f.trial, f.record.detail);
    }
    if let Some(path) = out {
        std::fs::write(path, report.to_json()?)?;
    }
    if let Some(path) = trace {
        write_trace(&path, &first_trace)?;
    }
    Ok(report.all_pass())
}

fn demo(horizon: u64, c0_contrast: bool, out: Option<PathBuf>, trace: Option<PathBuf>) -> Result<bool, CliError> {
    let report = demo_counterexample(horizon, c0_contrast).map_err(|e| match e {
        HarnessError::Config(msg) => CliError::Usage(msg),
        other => CliError::Harness(other),
    })?;
    println!(
        "coord {} horizon {}: limsup {:.6} liminf {:.6} gap {:.6} ({} threshold {})",
        report.coord,
        report.horizon,
        report.limsup_est,
        report.liminf_est,
        report.gap,
        if report.passes { "meets" } else { "misses" },
        report.threshold
    );
    if let Some(path) = out {
        write_json(&path, &report)?;
    }
    if let Some(path) = trace {
        write_trace(&path, &report.trace)?;
    }
    Ok(report.passes)
}

fn certify(path: &Path, tol: f64) -> Result<bool, CliError> {
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(CliError::Usage(format!("--tol must be a nonnegative number, got {tol}")));
    }
    let matrix = load_dense_matrix(path)?;
    let (rows, cols) = (matrix.max_abs_row_sum(), matrix.max_abs_col_sum());
    match certify_ds(matrix, tol) {
        Ok(_) => {
            println!("certified: max abs row sum {rows}, max abs column sum {cols}");
            Ok(true)
        }
        Err(DsError::NotContraction { failing, .. }) => {
            println!("not a contraction ({failing}): max abs row sum {rows}, max abs column sum {cols}");
            Ok(false)
        }
        Err(e) => Err(CliError::Usage(e.to_string())),
    }
}

fn average(
    op: &str,
    x: &str,
    horizon: u64,
    tol: f64,
    window: usize,
    out: Option<PathBuf>,
    trace: Option<PathBuf>,
) -> Result<bool, CliError> {
    let operator = parse_operator(op).map_err(|e| CliError::Usage(e.to_string()))?;
    let x = parse_sequence(x).map_err(|e| CliError::Usage(e.to_string()))?;
    let report = run_averaging(&operator, &x, horizon, tol, window).map_err(|e| CliError::Usage(e.to_string()))?;
    println!(
        "{} after n={} (worst window residual {:e})",
        if report.converged { "converged" } else { "not converged" },
        report.horizon,
        report.worst_window_residual()
    );
    println!("limit estimate: {}", report.limit_estimate);
    if let Some(path) = out {
        write_json(&path, &report)?;
    }
    if let Some(path) = trace {
        let mut file = BufWriter::new(File::create(path)?);
        report.write_trace_csv(&mut file)?;
        file.flush()?;
    }
    Ok(report.converged)
}
