use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use ahltl::bmc::{run_bmc, BmcConfig, Bounds, SemanticsChoice};
use ahltl::report::{emit_report, ReportFormat};
use ahltl::solver::{QbfFormat, SolverBackend, DEFAULT_BUDGET};
use ahltl_core::{parse_formula, parse_model, ModelBundle};
use clap::Parser;

/// Bounded model checker for asynchronous HyperLTL over acyclic Kripke
/// structures.
#[derive(Debug, Parser)]
#[command(name = "ahltl", version)]
struct Args {
    /// Model file, optionally bound to a name: `name=path`. Repeatable; the
    /// first model is the default for unannotated quantifiers.
    #[arg(long = "model", required = true, value_name = "[NAME=]PATH")]
    models: Vec<String>,
    /// Formula file.
    #[arg(long, value_name = "PATH")]
    formula: PathBuf,
    /// Unrolling bound for traces (defaults to the maximum model depth).
    #[arg(short = 'k', value_name = "N", conflicts_with = "auto_bounds")]
    k: Option<usize>,
    /// Trajectory length bound (defaults to k·|traces|·|trajectories|).
    #[arg(short = 'm', value_name = "N", conflicts_with = "auto_bounds")]
    m: Option<usize>,
    /// Deepen k up to the completeness bound (default when -k and -m are
    /// absent).
    #[arg(long)]
    auto_bounds: bool,
    #[arg(long, value_enum, default_value = "both")]
    semantics: SemanticsChoice,
    /// External QBF solver executable; the internal evaluator is used
    /// otherwise.
    #[arg(long, env = "AHLTL_QBF_SOLVER", value_name = "PATH")]
    solver: Option<PathBuf>,
    /// Query format for the external solver and --emit-qbf.
    #[arg(long, value_enum, default_value = "qcir")]
    format: QbfFormat,
    /// Write the generated queries here.
    #[arg(long, value_name = "PATH")]
    emit_qbf: Option<PathBuf>,
    /// Cross-check the final verdicts by explicit enumeration.
    #[arg(long)]
    oracle: bool,
    /// Step budget for --oracle.
    #[arg(long, value_name = "N", default_value_t = 20_000_000)]
    oracle_budget: u64,
    /// Node budget of the internal evaluator.
    #[arg(long, value_name = "N", default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    #[arg(long)]
    json: bool,
    /// Keep query files handed to the external solver.
    #[arg(long)]
    keep_artifacts: bool,
    /// Per-query solver timeout in seconds.
    #[arg(long, value_name = "SECONDS")]
    timeout: Option<f64>,
}

fn read(path: &std::path::Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_bundle(specs: &[String]) -> Result<ModelBundle, String> {
    let mut bundle = ModelBundle::new();
    for spec in specs {
        let (name, path) = match spec.split_once('=') {
            Some((n, p)) if !n.is_empty() => (Some(n), p),
            _ => (None, spec.as_str()),
        };
        let path = PathBuf::from(path);
        let model = parse_model(&read(&path)?).map_err(|e| format!("{}: {e}", path.display()))?;
        let res = match name {
            Some(n) => bundle.insert_as(n.to_string(), model),
            None => bundle.insert(model),
        };
        res.map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(bundle)
}

fn run(args: Args) -> Result<u8, (u8, String)> {
    let input = |e: String| (3u8, e);
    let bundle = load_bundle(&args.models).map_err(input)?;
    let formula =
        parse_formula(&read(&args.formula).map_err(input)?).map_err(|e| input(format!("{}: {e}", args.formula.display())))?;

    let mut backend = match &args.solver {
        Some(p) => SolverBackend::external(p, args.format).map_err(|e| (3, e.to_string()))?,
        None => SolverBackend::internal(args.budget),
    };
    if let Some(t) = args.timeout {
        if !(t.is_finite() && t > 0.0) {
            return Err((3, format!("invalid timeout {t}")));
        }
        backend = backend.with_timeout(Some(Duration::from_secs_f64(t)));
    }
    backend.keep_artifacts = args.keep_artifacts;

    let bounds = match (args.k, args.m) {
        (None, None) => Bounds::Auto,
        (k, m) => {
            let k = match k {
                Some(k) => k,
                None => ahltl::bmc::completeness_bound(&bundle, &formula)
                    .map_err(|e| (3, e.to_string()))?
                    .0,
            };
            let m = m.unwrap_or(k * formula.num_paths() * formula.num_trajs());
            Bounds::Fixed { k, m }
        }
    };

    let cfg = BmcConfig {
        semantics: args.semantics,
        bounds,
        emit_qbf: args.emit_qbf.clone(),
        format: args.format,
        oracle_budget: args.oracle.then_some(args.oracle_budget),
        ..BmcConfig::new(&bundle, &formula, backend)
    };
    let report = run_bmc(&cfg).map_err(|e| (e.exit_code() as u8, e.to_string()))?;
    let format = if args.json { ReportFormat::Json } else { ReportFormat::Text };
    print!("{}", emit_report(&report, format));
    Ok(report.outcome.exit_code() as u8)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let worker = std::thread::Builder::new()
        .stack_size(256 << 20)
        .spawn(move || run(args))
        .expect("spawning worker thread");
    match worker.join() {
        Ok(Ok(code)) => ExitCode::from(code),
        Ok(Err((code, msg))) => {
            eprintln!("ahltl: {msg}");
            ExitCode::from(code)
        }
        Err(_) => {
            eprintln!("ahltl: internal error");
            ExitCode::from(4)
        }
    }
}
