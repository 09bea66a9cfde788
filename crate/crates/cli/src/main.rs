//! `projsplit` command-line driver.
//!
//! Exit codes: 0 solved / valid, 2 iteration limit reached, 3 validation
//! failure, 4 inconsistency signal, 1 I/O or schema error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use projsplit::engine::{self, Solver};
use projsplit::io;
use projsplit::oracle;
use projsplit::schedule::Certification;
use projsplit::{fixtures, ControlSchedule, Error, LagPattern, SeededPerturbation, Status, SubspaceSpec};

#[derive(Parser)]
#[command(name = "projsplit", version, about = "Asynchronous block-iterative projective splitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem and write the iteration trace.
    Run {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Write the final primal-dual point here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Certify a schedule for m primal and p dual blocks.
    ValidateSchedule {
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        p: usize,
    },
    /// Report Kuhn-Tucker residuals of a point.
    CheckKt {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        point: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Also brute-force the primal objective on a grid of this spacing
        /// (problems with at most two primal coordinates).
        #[arg(long)]
        grid_step: Option<f64>,
        /// Half-width of the grid box.
        #[arg(long, default_value_t = 5.0)]
        grid_radius: f64,
    },
    /// Compare two trace files and report the first diverging row.
    Compare {
        #[arg(long)]
        trace_a: PathBuf,
        #[arg(long)]
        trace_b: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
    },
    /// Generate an admissible schedule in explicit form.
    GenSchedule {
        #[arg(long = "type", value_enum)]
        kind: GenKind,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 100)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Window bound M (random schedules).
        #[arg(long = "window", short = 'M', default_value_t = 1)]
        window: usize,
        /// Lag bound D (random schedules) or lag size (periodic).
        #[arg(long = "max-lag", short = 'D', default_value_t = 0)]
        max_lag: usize,
        /// Blocks activated per step (periodic schedules).
        #[arg(long, default_value_t = 1)]
        group_size: usize,
        #[arg(long, value_enum, default_value_t = LagKind::Zero)]
        lag: LagKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one of the built-in test problems as a problem file.
    Example {
        #[arg(value_enum)]
        name: ExampleName,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Periodic,
    Random,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LagKind {
    Zero,
    Constant,
    Sawtooth,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleName {
    Scalar,
    Box,
    L1Quadratic,
    LinearPrimal,
}

const EXIT_MAX_ITER: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_INCONSISTENT: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_) | Error::Dimension(_) | Error::Schedule(_) | Error::Validation { .. }) => {
            EXIT_INVALID
        }
        Some(Error::Inconsistent(_)) => EXIT_INCONSISTENT,
        _ => 1,
    }
}

fn run(
    problem: PathBuf,
    config: PathBuf,
    schedule: PathBuf,
    trace: PathBuf,
    output: Option<PathBuf>,
) -> anyhow::Result<u8> {
    let problem = io::parse_problem(&problem)?;
    let cfg = io::parse_config(&config)?;
    let schedule = io::parse_schedule(&schedule)?;
    let start = cfg.start.clone().unwrap_or_else(|| engine::zero_start(&problem));
    let solver = cfg.solver.clone();
    let mut s = Solver::new(&problem, &schedule, solver.clone(), start)?;
    if let Some((seed, scale)) = cfg.perturbation {
        s = s.with_perturbation(SeededPerturbation::new(seed, scale));
    }
    let result = s.run()?;
    io::write_trace(&result.trace, problem.known_z_points().len(), &trace)
        .with_context(|| format!("writing {}", trace.display()))?;
    if let Some(path) = output {
        std::fs::write(&path, io::point_to_json(&result.final_point))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = json!({
        "status": result.status.name(),
        "iterations": result.iterations,
        "message": result.message,
        "final": {
            "x": result.final_point.primal.blocks(),
            "v": result.final_point.dual.blocks(),
        },
        "theta_tau_sum": result.theta_tau_sum,
        "inexact": {
            "accepted": result.inexact.accepted,
            "rejected": result.inexact.rejected,
            "fallbacks": result.inexact.fallbacks,
        },
        "invariant_violations": result.monitor.violations.len(),
        "metadata": {
            "mode": solver.mode.name(),
            "epsilon": solver.epsilon,
            "lambda": format!("{:?}", solver.lambda),
            "gamma": format!("{:?}", solver.gamma),
            "mu": format!("{:?}", solver.mu),
            "prox_epsilon": solver.prox_epsilon,
            "resid_tol": solver.resid_tol,
            "rho_tol": solver.rho_tol,
            "max_iter": solver.max_iter,
            "M": schedule.window(),
            "D": schedule.max_lag(),
        },
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(match result.status {
        Status::Solved | Status::ExactPoint => 0,
        Status::MaxIter => EXIT_MAX_ITER,
        Status::Inconsistent => EXIT_INCONSISTENT,
    })
}

fn validate_schedule(schedule: PathBuf, m: usize, p: usize) -> anyhow::Result<u8> {
    let s = io::parse_schedule(&schedule)?;
    match s.validate(m, p) {
        Certification::Certified => {
            println!("certified (M={}, D={}, horizon={})", s.window(), s.max_lag(), s.horizon());
            Ok(0)
        }
        Certification::Violation(v) => {
            println!("violation: {v}");
            Ok(EXIT_INVALID)
        }
    }
}

fn check_kt(
    problem: PathBuf,
    point: PathBuf,
    tol: f64,
    grid_step: Option<f64>,
    grid_radius: f64,
) -> anyhow::Result<u8> {
    let problem = io::parse_problem(&problem)?;
    let point = io::parse_point(&point)?;
    let res = projsplit::kt_residual(&problem, &point)?;
    for (i, r) in res.primal.iter().enumerate() {
        println!("A_{i} {r:.6e}");
    }
    for (k, r) in res.dual.iter().enumerate() {
        println!("B_{k} {r:.6e}");
    }
    if let Some(step) = grid_step {
        let f = oracle::primal_objective(&problem)
            .context("grid check needs subdifferential operators only")?;
        let n = problem.signature().primal_dims().iter().sum::<usize>();
        let g = oracle::grid_minimize(f, &vec![(-grid_radius, grid_radius); n], step)?;
        let x = point.primal.flatten();
        let dist = x.iter().zip(&g.argmin).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        println!("grid argmin {:?} distance {dist:.6e}", g.argmin);
        if g.on_boundary {
            eprintln!("warning: grid argmin on the box boundary; the objective may be unbounded below");
        }
    }
    let worst = res.max();
    if worst <= tol {
        println!("ok: max residual {worst:.6e} <= {tol:e}");
        Ok(0)
    } else {
        let (name, _) = res.worst().unwrap_or_default();
        println!("fail: {name} residual {worst:.6e} > {tol:e}");
        Ok(EXIT_INVALID)
    }
}

fn compare(a: PathBuf, b: PathBuf, tol: f64) -> anyhow::Result<u8> {
    let ta = std::fs::read_to_string(&a).with_context(|| format!("reading {}", a.display()))?;
    let tb = std::fs::read_to_string(&b).with_context(|| format!("reading {}", b.display()))?;
    match io::compare_traces(&ta, &tb, tol) {
        None => {
            println!("identical (tol {tol:e}, {} lines)", ta.lines().count());
            Ok(0)
        }
        Some(d) => {
            println!("diverged at {d}");
            Ok(EXIT_INVALID)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn gen_schedule(
    kind: GenKind,
    m: usize,
    p: usize,
    horizon: usize,
    seed: u64,
    window: usize,
    max_lag: usize,
    group_size: usize,
    lag: LagKind,
    out: PathBuf,
) -> anyhow::Result<u8> {
    let s = match kind {
        GenKind::Random => ControlSchedule::random_admissible(m, p, window, max_lag, seed, horizon)?,
        GenKind::Periodic => {
            let pattern = match lag {
                LagKind::Zero => LagPattern::Zero,
                LagKind::Constant => LagPattern::Constant(max_lag),
                LagKind::Sawtooth => LagPattern::Sawtooth(max_lag),
            };
            ControlSchedule::periodic(m, p, group_size, pattern, horizon)?
        }
    };
    std::fs::write(&out, io::schedule_to_json(&s)).with_context(|| format!("writing {}", out.display()))?;
    Ok(0)
}

fn example(name: ExampleName, out: PathBuf) -> anyhow::Result<u8> {
    let problem = match name {
        ExampleName::Scalar => fixtures::scalar_inclusion::<f64>()?,
        ExampleName::Box => fixtures::box_best_approximation()?,
        ExampleName::L1Quadratic => fixtures::l1_quadratic_2d()?,
        ExampleName::LinearPrimal => fixtures::linear_primal_problem(SubspaceSpec::LinearPrimal)?,
    };
    io::write_problem(problem.spec(), &out).with_context(|| format!("writing {}", out.display()))?;
    Ok(0)
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Run {
            problem,
            config,
            schedule,
            trace,
            output,
        } => run(problem, config, schedule, trace, output),
        Command::ValidateSchedule { schedule, m, p } => validate_schedule(schedule, m, p),
        Command::CheckKt {
            problem,
            point,
            tol,
            grid_step,
            grid_radius,
        } => check_kt(problem, point, tol, grid_step, grid_radius),
        Command::Compare { trace_a, trace_b, tol } => compare(trace_a, trace_b, tol),
        Command::GenSchedule {
            kind,
            m,
            p,
            horizon,
            seed,
            window,
            max_lag,
            group_size,
            lag,
            out,
        } => gen_schedule(kind, m, p, horizon, seed, window, max_lag, group_size, lag, out),
        Command::Example { name, out } => example(name, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
