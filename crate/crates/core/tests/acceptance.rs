//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p projsplit --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use projsplit::engine::{self, InvariantKind, RunResult, Solver};
use projsplit::io::{compare_traces, trace_to_csv};
use projsplit::operators::{validate_inexact_dual, validate_inexact_primal, DEFAULT_MEMBERSHIP_TOL};
use projsplit::oracle::{closed_form_z_box, grid_minimize, primal_objective, project_intersection_two_halfspaces};
use projsplit::{
    fixtures, haugazeau_q, kt_residual, ControlSchedule, GraphPoint, InexactCondition, InexactVerdict,
    InexactnessBudget, MonotoneOp, PrimalDualPoint, Problem, SeededPerturbation, SolverConfig, Status,
    SubspaceSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{pd, random_problem, reference_fejer};

type Outcome = Result<String, String>;

/// Every traced run, kept for the determinism criterion.
struct Runs {
    traced: Vec<(String, Box<dyn Fn() -> String>)>,
}

impl Runs {
    fn record(&mut self, label: String, rerun: impl Fn() -> String + 'static) {
        self.traced.push((label, Box::new(rerun)));
    }
}

fn solve(
    problem: &Problem<f64>,
    schedule: &ControlSchedule,
    config: SolverConfig<f64>,
    start: PrimalDualPoint<f64>,
) -> RunResult<f64> {
    engine::run(problem, config, schedule, start).expect("run")
}

fn csv(problem: &Problem<f64>, r: &RunResult<f64>) -> String {
    trace_to_csv(&r.trace, problem.known_z_points().len())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1(runs: &mut Runs) -> Outcome {
    let problem = fixtures::scalar_inclusion::<f64>().map_err(|e| e.to_string())?;
    // ground truth: argmin |x| + x²/2 is 0, and v* = x there
    let g = grid_minimize(|x| x[0].abs() + 0.5 * x[0] * x[0], &[(-5.0, 5.0)], 1e-4).map_err(|e| e.to_string())?;
    let truth = pd(&[g.argmin[0]], &[g.argmin[0]]);
    let mut schedules = vec![("synchronous".to_string(), ControlSchedule::synchronous(1, 1, 1))];
    for seed in [11, 22, 33] {
        let s = ControlSchedule::random_admissible(1, 1, 3, 5, seed, 5000).map_err(|e| e.to_string())?;
        schedules.push((format!("random seed {seed}"), s));
    }
    let config = SolverConfig::fejer().with_lambda(1.9).with_steps(1.0, 1.0).with_max_iter(5000).with_resid_tol(1e-6);
    let mut worst = Duration::ZERO;
    let mut iters = Vec::new();
    for (name, s) in schedules {
        let t0 = Instant::now();
        let r = solve(&problem, &s, config.clone(), pd(&[2.0], &[0.0]));
        let dt = t0.elapsed();
        worst = worst.max(dt);
        ensure(matches!(r.status, Status::Solved | Status::ExactPoint), || {
            format!("{name}: status {} after {} iterations", r.status.name(), r.iterations)
        })?;
        let d = r.final_point.distance(&truth);
        ensure(d <= 1e-4, || format!("{name}: final point {d:e} from (0,0)"))?;
        ensure(dt < Duration::from_secs(1), || format!("{name}: took {dt:?}"))?;
        iters.push(r.iterations);
        let p2 = problem.clone();
        let c2 = config.clone();
        runs.record(format!("c1 {name}"), move || csv(&p2, &solve(&p2, &s, c2.clone(), pd(&[2.0], &[0.0]))));
    }
    Ok(format!("iterations {iters:?}, slowest {worst:?}"))
}

fn criterion_2(runs: &mut Runs) -> Outcome {
    let problem = fixtures::box_best_approximation::<f64>().map_err(|e| e.to_string())?;
    let (tx, tv) = closed_form_z_box(5.0, 3.0);
    let target = pd(&[tx], &[tv]);
    let start = pd(&[5.0], &[3.0]);
    let bound = start.distance(&target);
    let schedules = vec![
        ("synchronous", ControlSchedule::synchronous(1, 1, 1)),
        ("M=2 D=3", ControlSchedule::random_admissible(1, 1, 2, 3, 5, 20_000).map_err(|e| e.to_string())?),
    ];
    let mut cfg = SolverConfig::haugazeau().with_max_iter(20_000).with_resid_tol(1e-10).with_monitor(true);
    cfg.lambda = projsplit::Relaxation::Constant(1.0);
    let mut notes = Vec::new();
    for (name, s) in schedules {
        let mut solver = Solver::new(&problem, &s, cfg.clone(), start.clone()).map_err(|e| e.to_string())?;
        let mut prev = 0.0;
        let mut exact = None;
        while solver.state().n < cfg.max_iter {
            if let Some(p) = solver.step().map_err(|e| e.to_string())? {
                exact = Some(p);
                break;
            }
            let d = solver.state().current.distance(&start);
            ensure(d + 1e-10 >= prev, || format!("{name}: ‖u_n − u_0‖ decreased {prev:e} -> {d:e}"))?;
            ensure(d <= bound + 1e-8, || format!("{name}: ‖u_n − u_0‖ = {d:e} exceeds ‖P_Z u_0 − u_0‖"))?;
            prev = d;
            if solver.state().current.distance(&target) <= 1e-6 {
                break;
            }
        }
        let n = solver.state().n;
        let fin = exact.unwrap_or_else(|| solver.state().current.clone());
        let err = fin.distance(&target);
        ensure(err <= 1e-4, || format!("{name}: final distance {err:e} to (1,0) after {n} iterations"))?;
        let report = &solver.state().monitor;
        ensure(report.count(InvariantKind::AnchorDistance) == 0, || format!("{name}: {:?}", report.violations))?;
        notes.push(format!("{name}: {n} it"));
        let p2 = problem.clone();
        let c2 = cfg.clone();
        let st = start.clone();
        let s2 = s.clone();
        runs.record(format!("c2 {name}"), move || csv(&p2, &solve(&p2, &s2, c2.clone().with_max_iter(n.max(1)), st.clone())));
    }
    Ok(notes.join(", "))
}

fn criterion_3(runs: &mut Runs) -> Outcome {
    let problem = fixtures::l1_quadratic_2d::<f64>().map_err(|e| e.to_string())?;
    let f = primal_objective(&problem).ok_or("objective not representable")?;
    let g = grid_minimize(f, &[(-5.0, 5.0), (-5.0, 5.0)], 1e-2).map_err(|e| e.to_string())?;
    let s = ControlSchedule::synchronous(1, 1, 1);
    let start = PrimalDualPoint::new(
        projsplit::BlockVector::from_blocks(vec![vec![0.0, 0.0]]),
        projsplit::BlockVector::from_blocks(vec![vec![0.0, 0.0]]),
    );
    let mut notes = Vec::new();
    for cfg in [SolverConfig::fejer(), SolverConfig::haugazeau()] {
        let cfg = cfg.with_max_iter(10_000).with_resid_tol(1e-8);
        let r = solve(&problem, &s, cfg.clone(), start.clone());
        let kt = kt_residual(&problem, &r.final_point).map_err(|e| e.to_string())?.max();
        let x = r.final_point.primal.block(0);
        let d = ((x[0] - g.argmin[0]).powi(2) + (x[1] - g.argmin[1]).powi(2)).sqrt();
        let mode = cfg.mode.name();
        ensure(kt <= 1e-4, || format!("{mode}: kt residual {kt:e}"))?;
        ensure(d <= 1e-3, || format!("{mode}: primal {x:?} vs grid {:?}", g.argmin))?;
        notes.push(format!("{mode}: {} it, kt {kt:.1e}", r.iterations));
        let p2 = problem.clone();
        let st = start.clone();
        let s2 = s.clone();
        runs.record(format!("c3 {mode}"), move || csv(&p2, &solve(&p2, &s2, cfg.clone(), st.clone())));
    }
    Ok(notes.join(", "))
}

fn criterion_4(runs: &mut Runs) -> Outcome {
    let mut totals = [0usize; 5];
    let mut checks = 0;
    for seed in 0..50u64 {
        let problem = random_problem(seed);
        let sig = problem.signature();
        let (window, lag) = (1 + (seed % 3) as usize, (seed % 6) as usize);
        let s = ControlSchedule::random_admissible(sig.m(), sig.p(), window, lag, seed, 200).map_err(|e| e.to_string())?;
        let cfg = SolverConfig::fejer().with_max_iter(200).with_resid_tol(0.0).with_monitor(true);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let start = PrimalDualPoint::unflatten(
            &(0..sig.total_dim()).map(|_| rng.gen_range(-5.0..5.0)).collect::<Vec<f64>>(),
            sig,
        )
        .map_err(|e| e.to_string())?;
        let r = solve(&problem, &s, cfg.clone(), start.clone());
        checks += r.monitor.checks;
        for (j, kind) in [
            InvariantKind::HalfspaceValidity,
            InvariantKind::Membership,
            InvariantKind::FejerMonotonicity,
            InvariantKind::SubspaceResidual,
            InvariantKind::AnchorDistance,
        ]
        .into_iter()
        .enumerate()
        {
            totals[j] += r.monitor.count(kind);
        }
        if let Some(v) = r.monitor.violations.first() {
            return Err(format!("seed {seed}: {:?} at n={} ({})", v.kind, v.n, v.detail));
        }
        let p2 = problem.clone();
        runs.record(format!("c4 seed {seed}"), move || csv(&p2, &solve(&p2, &s, cfg.clone(), start.clone())));
    }
    Ok(format!("50 problems, {checks} monitored iterations, violations {totals:?}"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let dim = rng.gen_range(2..=6);
        let mut draw = || (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<f64>>();
        let (x0, y, z) = (draw(), draw(), draw());
        let q = haugazeau_q(&x0, &y, &z, 1e-12).map_err(|e| e.to_string())?;
        let n1: Vec<f64> = x0.iter().zip(&y).map(|(a, b)| a - b).collect();
        let n2: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a - b).collect();
        let c1: f64 = n1.iter().zip(&y).map(|(a, b)| a * b).sum();
        let c2: f64 = n2.iter().zip(&z).map(|(a, b)| a * b).sum();
        let p = project_intersection_two_halfspaces(&x0, (&n1, c1), (&n2, c2)).map_err(|e| e.to_string())?;
        let err = q.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(err);
    }
    ensure(worst <= 1e-9, || format!("max error {worst:e}"))?;
    let y = vec![1.0, -2.0, 0.5];
    let z = vec![3.0, 1.0, -1.0];
    let x0 = vec![-4.0, 2.0, 7.0];
    ensure(haugazeau_q(&x0, &y, &y, 1e-12).map_err(|e| e.to_string())? == y, || "y = z branch".into())?;
    ensure(haugazeau_q(&y, &y, &z, 1e-12).map_err(|e| e.to_string())? == z, || "x0 = y branch".into())?;
    Ok(format!("200 triples, max error {worst:.1e}, degenerate branches ok"))
}

fn criterion_6(runs: &mut Runs) -> Outcome {
    let structured = fixtures::linear_primal_problem::<f64>(SubspaceSpec::LinearPrimal).map_err(|e| e.to_string())?;
    let full = fixtures::linear_primal_problem::<f64>(SubspaceSpec::Full).map_err(|e| e.to_string())?;
    let g = grid_minimize(fixtures::linear_primal_objective, &[(-5.0, 5.0), (-5.0, 5.0)], 1e-2)
        .map_err(|e| e.to_string())?;
    let s = ControlSchedule::synchronous(1, 2, 1);
    let start = PrimalDualPoint::unflatten(&[3.0, -1.0, 0.5, 2.0, -1.0, 1.0], structured.signature())
        .map_err(|e| e.to_string())?;
    let cfg = SolverConfig::fejer().with_max_iter(20_000).with_resid_tol(1e-10);
    let q = match structured.a_ops()[0].linear_matrix() {
        Some(q) => q,
        None => return Err("A_1 not linear".into()),
    };
    let subspace_residual = |u: &PrimalDualPoint<f64>| {
        let ax = q.mul_vec(u.primal.block(0));
        let lt = structured.coupling().adjoint_block(0, &u.dual);
        ax.iter().zip(&lt).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt()
    };
    let mut solver = Solver::new(&structured, &s, cfg.clone(), start.clone()).map_err(|e| e.to_string())?;
    let mut worst = subspace_residual(&solver.state().current);
    let mut finished = None;
    while solver.state().n < cfg.max_iter {
        let eval = solver.evaluate().map_err(|e| e.to_string())?;
        if let Some(p) = eval.exact_point {
            finished = Some(p);
            break;
        }
        if eval.record.residual_sum() <= cfg.resid_tol * (1.0 + solver.state().current.norm()) {
            break;
        }
        solver.advance(eval).map_err(|e| e.to_string())?;
        worst = worst.max(subspace_residual(&solver.state().current));
    }
    ensure(worst <= 1e-9, || format!("subspace residual reached {worst:e}"))?;
    let x_struct = finished.unwrap_or_else(|| solver.state().current.clone()).primal.block(0).to_vec();
    let r_full = solve(&full, &s, cfg.clone(), start.clone());
    let x_full = r_full.final_point.primal.block(0).to_vec();
    let d = ((x_struct[0] - x_full[0]).powi(2) + (x_struct[1] - x_full[1]).powi(2)).sqrt();
    ensure(d <= 1e-4, || format!("structured {x_struct:?} vs full {x_full:?}"))?;
    let dg = ((x_full[0] - g.argmin[0]).powi(2) + (x_full[1] - g.argmin[1]).powi(2)).sqrt();
    ensure(dg <= 1e-3, || format!("full-space solution {x_full:?} vs grid {:?}", g.argmin))?;
    let n = solver.state().n;
    let (p2, s2) = (structured.clone(), s.clone());
    runs.record("c6 linear_primal".into(), move || {
        csv(&p2, &solve(&p2, &s2, cfg.clone().with_max_iter(n.max(1)), start.clone()))
    });
    Ok(format!("max ‖A_1x + L*v*‖ {worst:.1e}, solutions agree to {d:.1e}"))
}

fn criterion_7() -> Outcome {
    let cases = [
        ("scalar", fixtures::scalar_inclusion::<f64>().map_err(|e| e.to_string())?, pd(&[2.0], &[0.0])),
        (
            "l1_quadratic_2d",
            fixtures::l1_quadratic_2d::<f64>().map_err(|e| e.to_string())?,
            PrimalDualPoint::unflatten(&[0.0, 0.0, 0.0, 0.0], &projsplit::SpaceSignature::new(vec![2], vec![2]).unwrap())
                .unwrap(),
        ),
    ];
    let mut notes = Vec::new();
    for (name, problem, start) in cases {
        let cfg = SolverConfig::fejer().with_lambda(1.9).with_max_iter(10_000).with_resid_tol(1e-9);
        let s = ControlSchedule::synchronous(1, 1, 1);
        let engine_csv = csv(&problem, &solve(&problem, &s, cfg, start.clone()));
        let reference = reference_fejer(&problem, &start, 1.9, 1.0, 1.0, 10_000, 1e-9);
        let ref_csv = trace_to_csv(&reference, problem.known_z_points().len());
        if let Some(d) = compare_traces(&engine_csv, &ref_csv, 0.0) {
            return Err(format!("{name}: {d}"));
        }
        notes.push(format!("{name} {} rows", reference.len()));
    }
    Ok(notes.join(", "))
}

fn criterion_8(runs: &mut Runs) -> Outcome {
    let problem = fixtures::scalar_inclusion::<f64>().map_err(|e| e.to_string())?;
    let budget = InexactnessBudget::new(1.0, 0.3, 1.0, 0.3).map_err(|e| e.to_string())?;
    let mut cfg = SolverConfig::fejer().with_max_iter(20_000).with_resid_tol(1e-4);
    cfg.inexact = Some(budget);
    let s = ControlSchedule::synchronous(1, 1, 1);
    let run = |cfg: SolverConfig<f64>| {
        Solver::new(&problem, &s, cfg, pd(&[2.0], &[0.0]))
            .unwrap()
            .with_perturbation(SeededPerturbation::new(8, 0.5))
            .run()
            .unwrap()
    };
    let r = run(cfg.clone());
    ensure(matches!(r.status, Status::Solved | Status::ExactPoint), || {
        format!("status {} after {} iterations", r.status.name(), r.iterations)
    })?;
    ensure(r.inexact.accepted > 0, || "no perturbed evaluation was accepted".into())?;
    let p2 = problem.clone();
    let s2 = s.clone();
    runs.record("c8 inexact".into(), move || {
        let r = Solver::new(&p2, &s2, cfg.clone(), pd(&[2.0], &[0.0]))
            .unwrap()
            .with_perturbation(SeededPerturbation::new(8, 0.5))
            .run()
            .unwrap();
        csv(&p2, &r)
    });

    // rejection with the right condition id, primal side: A = ∂|·|, γ = 1
    let a = MonotoneOp::l1_norm(1, 1.0).unwrap();
    let tol = DEFAULT_MEMBERSHIP_TOL;
    let primal = |cand: GraphPoint<f64>, x: f64, l: f64, b: &InexactnessBudget<f64>| {
        validate_inexact_primal(&a, &cand, &[x], &[l], &[0.0], 1.0, b, tol).unwrap()
    };
    let loose = InexactnessBudget::new(10.0, 0.5, 10.0, 0.5).unwrap();
    // e = a + γ(a* + l*) − x
    let cases_primal = [
        // (1,1) ∈ gra ∂|·|, x = 2: e = 0
        (GraphPoint::new(vec![1.0], vec![1.0]), 2.0, 0.0, budget, InexactVerdict::Accepted),
        // e = 1.5 > β = 1
        (GraphPoint::new(vec![1.0], vec![1.0]), 0.5, 0.0, budget, InexactVerdict::Violated(InexactCondition::NormBound)),
        // a* + l* = 2, e = 1.1: ⟨e, 2⟩ = 2.2 > 0.5·4
        (GraphPoint::new(vec![0.9], vec![1.0]), 1.8, 1.0, loose, InexactVerdict::Violated(InexactCondition::SigmaDual)),
        // a* + l* = 0.1, x − a = 1, e = −0.9: ⟨x − a, e⟩ = −0.9 < −0.5
        (GraphPoint::new(vec![1.0], vec![1.0]), 2.0, -0.9, loose, InexactVerdict::Violated(InexactCondition::SigmaPrimal)),
    ];
    for (cand, x, l, b, want) in cases_primal {
        let got = primal(cand.clone(), x, l, &b);
        ensure(got == want, || format!("primal {cand:?} x={x} l*={l}: {got:?}, expected {want:?}"))?;
    }
    // dual side: B = Id, μ = 1, r = 0; f = b + μb* − l − μv
    let b_op = MonotoneOp::affine_monotone(projsplit::Matrix::identity(1), vec![0.0]).unwrap();
    let dual = |cand: GraphPoint<f64>, l: f64, v: f64, b: &InexactnessBudget<f64>| {
        validate_inexact_dual(&b_op, &cand, &[l], &[v], &[0.0], 1.0, b, tol).unwrap()
    };
    let cases_dual = [
        (GraphPoint::new(vec![1.0], vec![1.0]), 2.0, 0.0, budget, InexactVerdict::Accepted),
        // f = 2 − 0.5 = 1.5 > δ
        (GraphPoint::new(vec![1.0], vec![1.0]), 0.5, 0.0, budget, InexactVerdict::Violated(InexactCondition::NormBound)),
        // l − b = 1, f = −1: ⟨l − b, f⟩ = −1 < −0.5
        (GraphPoint::new(vec![1.0], vec![1.0]), 2.0, 1.0, loose, InexactVerdict::Violated(InexactCondition::ZetaPrimal)),
        // l = b, b* − v = 1, f = 1: ⟨f, b* − v⟩ = 1 > 0.5
        (GraphPoint::new(vec![1.0], vec![1.0]), 1.0, 0.0, loose, InexactVerdict::Violated(InexactCondition::ZetaDual)),
    ];
    for (cand, l, v, b, want) in cases_dual {
        let got = dual(cand.clone(), l, v, &b);
        ensure(got == want, || format!("dual {cand:?} l={l} v={v}: {got:?}, expected {want:?}"))?;
    }
    // membership failure is reported as its own condition
    let off_graph = GraphPoint::new(vec![0.5], vec![2.0]);
    let got = primal(off_graph, 2.5, 0.0, &budget);
    ensure(got == InexactVerdict::Violated(InexactCondition::Membership), || format!("off-graph: {got:?}"))?;
    Ok(format!(
        "{} iterations, {} accepted / {} rejected perturbations; all conditions rejected by id",
        r.iterations, r.inexact.accepted, r.inexact.rejected
    ))
}

fn criterion_9(runs: &Runs) -> Outcome {
    for (label, rerun) in &runs.traced {
        let first = rerun();
        let second = rerun();
        if first.as_bytes() != second.as_bytes() {
            let d = compare_traces(&first, &second, 0.0);
            return Err(format!("{label}: {d:?}"));
        }
    }
    Ok(format!("{} runs byte-identical on repeat", runs.traced.len()))
}

fn main() -> ExitCode {
    let mut runs = Runs { traced: Vec::new() };
    let results: Vec<(&str, Outcome)> = vec![
        ("1 scalar inclusion, Fejér, sync + 3 random schedules", criterion_1(&mut runs)),
        ("2 best approximation, Haugazeau", criterion_2(&mut runs)),
        ("3 l1 + quadratic on R^2, both engines", criterion_3(&mut runs)),
        ("4 invariants on 50 random problems", criterion_4(&mut runs)),
        ("5 Q operator vs two-half-space projection", criterion_5()),
        ("6 linear_primal subspace", criterion_6(&mut runs)),
        ("7 synchronous equivalence with reference", criterion_7()),
        ("8 inexact resolvents", criterion_8(&mut runs)),
    ];
    let c9 = criterion_9(&runs);
    let mut failed = 0;
    for (name, outcome) in results.iter().chain(std::iter::once(&("9 determinism", c9))) {
        match outcome {
            Ok(note) => println!("PASS criterion {name}: {note}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
