//! The two iteration engines.
//!
//! Both engines share one evaluation phase: activated blocks produce fresh
//! graph points from (possibly stale) iterates held in the lag buffer, the
//! other blocks recycle their last graph point, and the separator is built
//! from the full set. The Fejér engine then takes a relaxed projection onto
//! the separating half-space; the Haugazeau engine takes an unrelaxed
//! half-step and applies the `Q` operator with the initial point as anchor,
//! which yields convergence to the projection of the start onto `Z`.
//!
//! Graph points are evaluated sequentially in increasing block order, so
//! identical inputs produce bitwise identical traces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::blockspace::{BlockVector, InnerProductSpace, PrimalDualPoint};
use crate::error::{Error, Result};
use crate::operators::{
    dual_membership_residual, graph_point_dual, graph_point_primal, perturbed_graph_point_dual,
    perturbed_graph_point_primal, primal_membership_residual, validate_inexact_dual,
    validate_inexact_primal, GraphPoint, InexactVerdict, InexactnessBudget, DEFAULT_MEMBERSHIP_TOL,
};
use crate::scalar::{self, Scalar};
use crate::schedule::{Certification, ControlSchedule, LagBuffer};
use crate::separator::{
    detect_exact_solution, project_halfspace, raw_direction_unchecked, separator_offset, Problem,
    Separator, DEFAULT_TAU_ZERO_FACTOR,
};

pub const DEFAULT_RHO_TOL: f64 = 1e-12;
pub const DEFAULT_FEJER_LAMBDA: f64 = 1.9;
pub const DEFAULT_HAUGAZEAU_LAMBDA: f64 = 1.0;

/// Absolute slack for the monitored invariants.
const HALFSPACE_SLACK: f64 = 1e-10;
const FEJER_SLACK: f64 = 1e-10;
const SUBSPACE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Fejer,
    Haugazeau,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Fejer => "fejer",
            Mode::Haugazeau => "haugazeau",
        }
    }
}

/// Relaxation parameters `λ_n`; a sequence repeats its last entry.
#[derive(Debug, Clone, PartialEq)]
pub enum Relaxation<T> {
    Constant(T),
    Sequence(Vec<T>),
}

impl<T: Scalar> Relaxation<T> {
    pub fn value(&self, n: usize) -> T {
        match self {
            Relaxation::Constant(v) => *v,
            Relaxation::Sequence(s) => s[n.min(s.len() - 1)],
        }
    }

    fn values(&self) -> Vec<T> {
        match self {
            Relaxation::Constant(v) => vec![*v],
            Relaxation::Sequence(s) => s.clone(),
        }
    }
}

/// Proximal parameters `γ_{i,n}` / `μ_{k,n}`; per-iteration tables repeat
/// their last entry.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxRule<T> {
    Constant(T),
    PerBlock(Vec<T>),
    PerBlockIteration(Vec<Vec<T>>),
}

impl<T: Scalar> ProxRule<T> {
    pub fn value(&self, block: usize, n: usize) -> T {
        match self {
            ProxRule::Constant(v) => *v,
            ProxRule::PerBlock(v) => v[block],
            ProxRule::PerBlockIteration(t) => {
                let row = &t[block];
                row[n.min(row.len() - 1)]
            }
        }
    }

    fn check(&self, blocks: usize, eps: T, what: &str) -> Result<()> {
        let values: Vec<T> = match self {
            ProxRule::Constant(v) => vec![*v],
            ProxRule::PerBlock(v) => {
                if v.len() != blocks {
                    return Err(Error::config(format!(
                        "{what} has {} entries for {blocks} blocks",
                        v.len()
                    )));
                }
                v.clone()
            }
            ProxRule::PerBlockIteration(t) => {
                if t.len() != blocks || t.iter().any(Vec::is_empty) {
                    return Err(Error::config(format!(
                        "{what} needs one nonempty row per block ({blocks})"
                    )));
                }
                t.iter().flatten().copied().collect()
            }
        };
        let hi = T::one() / eps;
        if let Some(v) = values.iter().find(|&&v| !(v >= eps && v <= hi)) {
            return Err(Error::config(format!(
                "{what} value {v} outside [{eps}, {hi}]"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub mode: Mode,
    /// Bound for the relaxation parameters.
    pub epsilon: T,
    pub lambda: Relaxation<T>,
    pub gamma: ProxRule<T>,
    pub mu: ProxRule<T>,
    /// Bound for the proximal parameters: `γ, μ ∈ [ε_prox, 1/ε_prox]`.
    pub prox_epsilon: T,
    pub max_iter: usize,
    /// Stop when the four residuals sum to at most `resid_tol · (1 + ‖u_n‖)`.
    pub resid_tol: T,
    pub tau_zero_factor: T,
    /// Exact-solution test `‖s*‖ ≤ exact_tol · (1 + scale)`.
    pub exact_tol: T,
    pub rho_tol: T,
    pub membership_tol: T,
    /// Keep every `trace_stride`-th record (plus the last one).
    pub trace_stride: usize,
    pub inexact: Option<InexactnessBudget<T>>,
    /// Check graph membership, half-space validity, subspace residuals and
    /// monotonicity at every iteration.
    pub monitor: bool,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(mode: Mode) -> Self {
        let lambda = match mode {
            Mode::Fejer => DEFAULT_FEJER_LAMBDA,
            Mode::Haugazeau => DEFAULT_HAUGAZEAU_LAMBDA,
        };
        SolverConfig {
            mode,
            epsilon: T::lit(0.05),
            lambda: Relaxation::Constant(T::lit(lambda)),
            gamma: ProxRule::Constant(T::one()),
            mu: ProxRule::Constant(T::one()),
            prox_epsilon: T::lit(1e-2),
            max_iter: 10_000,
            resid_tol: T::lit(1e-6),
            tau_zero_factor: T::lit(DEFAULT_TAU_ZERO_FACTOR),
            exact_tol: T::lit(1e-12),
            rho_tol: T::lit(DEFAULT_RHO_TOL),
            membership_tol: T::lit(DEFAULT_MEMBERSHIP_TOL),
            trace_stride: 1,
            inexact: None,
            monitor: false,
        }
    }

    pub fn fejer() -> Self {
        Self::new(Mode::Fejer)
    }

    pub fn haugazeau() -> Self {
        Self::new(Mode::Haugazeau)
    }

    pub fn with_lambda(mut self, lambda: T) -> Self {
        self.lambda = Relaxation::Constant(lambda);
        self
    }

    pub fn with_steps(mut self, gamma: T, mu: T) -> Self {
        self.gamma = ProxRule::Constant(gamma);
        self.mu = ProxRule::Constant(mu);
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_resid_tol(mut self, tol: T) -> Self {
        self.resid_tol = tol;
        self
    }

    pub fn with_monitor(mut self, on: bool) -> Self {
        self.monitor = on;
        self
    }

    pub fn validate(&self, m: usize, p: usize) -> Result<()> {
        let one = T::one();
        if !(self.epsilon > T::zero() && self.epsilon < one) {
            return Err(Error::config(format!("epsilon {} outside ]0, 1[", self.epsilon)));
        }
        if !(self.prox_epsilon > T::zero() && self.prox_epsilon < one) {
            return Err(Error::config(format!(
                "prox_epsilon {} outside ]0, 1[",
                self.prox_epsilon
            )));
        }
        let hi = match self.mode {
            Mode::Fejer => T::lit(2.0) - self.epsilon,
            Mode::Haugazeau => one,
        };
        let lambdas = self.lambda.values();
        if lambdas.is_empty() {
            return Err(Error::config("empty lambda sequence"));
        }
        if let Some(l) = lambdas.iter().find(|&&l| !(l >= self.epsilon && l <= hi)) {
            return Err(Error::config(format!(
                "lambda {l} outside [{}, {hi}] for {} mode",
                self.epsilon,
                self.mode.name()
            )));
        }
        self.gamma.check(m, self.prox_epsilon, "gamma")?;
        self.mu.check(p, self.prox_epsilon, "mu")?;
        if self.trace_stride == 0 {
            return Err(Error::config("trace_stride must be at least 1"));
        }
        if !(self.resid_tol >= T::zero()) {
            return Err(Error::config("resid_tol must be nonnegative"));
        }
        Ok(())
    }
}

/// Source of resolvent errors for inexact runs.
pub trait ResolventPerturbation<T> {
    fn primal_error(&mut self, n: usize, block: usize, dim: usize) -> Vec<T>;
    fn dual_error(&mut self, n: usize, block: usize, dim: usize) -> Vec<T>;
}

/// Seeded uniform errors in `[−scale, scale]^d`.
#[derive(Debug, Clone)]
pub struct SeededPerturbation {
    rng: ChaCha8Rng,
    scale: f64,
}

impl SeededPerturbation {
    pub fn new(seed: u64, scale: f64) -> Self {
        SeededPerturbation {
            rng: ChaCha8Rng::seed_from_u64(seed),
            scale,
        }
    }

    fn draw<T: Scalar>(&mut self, dim: usize) -> Vec<T> {
        (0..dim)
            .map(|_| T::lit(self.rng.gen_range(-self.scale..=self.scale)))
            .collect()
    }
}

impl<T: Scalar> ResolventPerturbation<T> for SeededPerturbation {
    fn primal_error(&mut self, _n: usize, _block: usize, dim: usize) -> Vec<T> {
        self.draw(dim)
    }

    fn dual_error(&mut self, _n: usize, _block: usize, dim: usize) -> Vec<T> {
        self.draw(dim)
    }
}

/// Halvings tried before an inexact activation falls back to the exact resolvent.
const MAX_ERROR_HALVINGS: usize = 60;

/// `Q(x0, y, z)`: projection of `x0` onto `H(x0, y) ∩ H(y, z)` where
/// `H(a, b) = {h : ⟨h − b, a − b⟩ ≤ 0}`.
pub fn haugazeau_q<T: Scalar, V: InnerProductSpace<T>>(x0: &V, y: &V, z: &V, rho_tol: T) -> Result<V> {
    let x0_y = x0.sub(y);
    let y_z = y.sub(z);
    let chi = x0_y.inner(&y_z);
    let mu = x0_y.norm_sq();
    let nu = y_z.norm_sq();
    let rho = (mu * nu - chi * chi).max(T::zero());
    let degenerate = rho <= rho_tol * mu * nu;
    if degenerate {
        if chi < -rho_tol * (mu + nu) {
            return Err(Error::Inconsistent(format!(
                "empty outer approximation in Q (chi = {chi:e}, mu = {mu:e}, nu = {nu:e})"
            )));
        }
        return Ok(z.clone());
    }
    if chi * nu >= rho {
        Ok(x0.add(&z.sub(y).scale(T::one() + chi / nu)))
    } else {
        let inner = x0_y.scale(chi).add(&z.sub(y).scale(mu));
        Ok(y.add(&inner.scale(nu / rho)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    pub n: usize,
    pub theta: T,
    pub tau: T,
    pub violation: T,
    /// `‖x_n − a_n‖`
    pub res_primal: T,
    /// `‖a*_n + L*v*_n‖`
    pub res_dual_map: T,
    /// `‖Lx_n − b_n‖`
    pub res_coupling: T,
    /// `‖b*_n − v*_n‖`
    pub res_dual: T,
    /// Distances from `u_n` to each known Kuhn-Tucker point.
    pub dist_z: Vec<T>,
}

impl<T: Scalar> IterationRecord<T> {
    pub fn residual_sum(&self) -> T {
        self.res_primal + self.res_dual_map + self.res_coupling + self.res_dual
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvariantKind {
    Membership,
    HalfspaceValidity,
    SubspaceResidual,
    FejerMonotonicity,
    AnchorDistance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantViolation {
    pub kind: InvariantKind,
    pub n: usize,
    pub detail: String,
}

/// Violations observed by the monitor (only populated when enabled).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InvariantReport {
    pub checks: usize,
    pub violations: Vec<InvariantViolation>,
}

impl InvariantReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: InvariantKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    fn flag(&mut self, kind: InvariantKind, n: usize, detail: String) {
        self.violations.push(InvariantViolation { kind, n, detail });
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InexactStats {
    pub accepted: usize,
    pub rejected: usize,
    pub fallbacks: usize,
}

#[derive(Debug, Clone)]
pub struct EngineState<T> {
    pub n: usize,
    pub current: PrimalDualPoint<T>,
    /// Initial point; the Haugazeau anchor.
    pub anchor: PrimalDualPoint<T>,
    pub recycled_a: Vec<GraphPoint<T>>,
    pub recycled_b: Vec<GraphPoint<T>>,
    pub lag_buffer: LagBuffer<T>,
    pub trace: Vec<IterationRecord<T>>,
    /// Running `Σ θ_n² τ_n`.
    pub theta_tau_sum: T,
    pub inexact: InexactStats,
    pub monitor: InvariantReport,
    /// Consecutive iterations whose separator fell below the `τ` floor.
    pub degenerate_streak: usize,
}

/// Outcome of the evaluation phase of one iteration.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub separator: Separator<T>,
    pub record: IterationRecord<T>,
    /// `(a, b*)` when the raw direction vanished.
    pub exact_point: Option<PrimalDualPoint<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Solved,
    MaxIter,
    ExactPoint,
    Inconsistent,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Solved => "solved",
            Status::MaxIter => "max_iter",
            Status::ExactPoint => "exact_point",
            Status::Inconsistent => "inconsistent",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult<T> {
    pub status: Status,
    pub final_point: PrimalDualPoint<T>,
    pub iterations: usize,
    pub trace: Vec<IterationRecord<T>>,
    pub theta_tau_sum: T,
    pub inexact: InexactStats,
    pub monitor: InvariantReport,
    pub message: Option<String>,
}

pub struct Solver<'a, T> {
    problem: &'a Problem<T>,
    schedule: &'a ControlSchedule,
    config: SolverConfig<T>,
    state: EngineState<T>,
    perturbation: Option<Box<dyn ResolventPerturbation<T> + 'a>>,
}

impl<'a, T: Scalar> Solver<'a, T> {
    /// Validates the inputs and projects `start` onto `𝒦`.
    pub fn new(
        problem: &'a Problem<T>,
        schedule: &'a ControlSchedule,
        config: SolverConfig<T>,
        start: PrimalDualPoint<T>,
    ) -> Result<Self> {
        let sig = problem.signature();
        config.validate(sig.m(), sig.p())?;
        if let Certification::Violation(v) = schedule.validate(sig.m(), sig.p()) {
            return Err(Error::Schedule(v.to_string()));
        }
        start.check_signature(sig)?;
        let start = problem.subspace_project(&start);
        let mut lag_buffer = LagBuffer::new(schedule.max_lag());
        lag_buffer.push(0, start.clone());
        let state = EngineState {
            n: 0,
            current: start.clone(),
            anchor: start,
            recycled_a: sig.primal_dims().iter().map(|&d| GraphPoint::zeros(d)).collect(),
            recycled_b: sig.dual_dims().iter().map(|&d| GraphPoint::zeros(d)).collect(),
            lag_buffer,
            trace: Vec::new(),
            theta_tau_sum: T::zero(),
            inexact: InexactStats::default(),
            monitor: InvariantReport::default(),
            degenerate_streak: 0,
        };
        Ok(Solver {
            problem,
            schedule,
            config,
            state,
            perturbation: None,
        })
    }

    /// Installs the resolvent error source used when `config.inexact` is set.
    pub fn with_perturbation(mut self, p: impl ResolventPerturbation<T> + 'a) -> Self {
        self.perturbation = Some(Box::new(p));
        self
    }

    pub fn state(&self) -> &EngineState<T> {
        &self.state
    }

    pub fn config(&self) -> &SolverConfig<T> {
        &self.config
    }

    fn lagged(&self, read: usize) -> Result<PrimalDualPoint<T>> {
        self.state.lag_buffer.get(read).cloned().ok_or_else(|| {
            Error::Schedule(format!(
                "iterate {read} not available at iteration {}",
                self.state.n
            ))
        })
    }

    fn activate_primal(&mut self, i: usize, read: usize) -> Result<GraphPoint<T>> {
        let lagged = self.lagged(read)?;
        let p = self.problem;
        let op = &p.a_ops()[i];
        let z = p.z_star().block(i);
        let x_lag = lagged.primal.block(i);
        let lstar = p.coupling().adjoint_block(i, &lagged.dual);
        let gamma = self.config.gamma.value(i, read);
        let (Some(budget), Some(pert)) = (self.config.inexact, self.perturbation.as_mut()) else {
            return graph_point_primal(op, z, gamma, x_lag, &lstar);
        };
        let mut e: Vec<T> = pert.primal_error(self.state.n, i, op.dim());
        for _ in 0..MAX_ERROR_HALVINGS {
            let cand = perturbed_graph_point_primal(op, z, gamma, x_lag, &lstar, Some(&e))?;
            let verdict = validate_inexact_primal(
                op,
                &cand,
                x_lag,
                &lstar,
                z,
                gamma,
                &budget,
                self.config.membership_tol,
            )?;
            if verdict == InexactVerdict::Accepted {
                self.state.inexact.accepted += 1;
                return Ok(cand);
            }
            self.state.inexact.rejected += 1;
            e = scalar::scale(T::lit(0.5), &e);
        }
        self.state.inexact.fallbacks += 1;
        graph_point_primal(op, z, gamma, x_lag, &lstar)
    }

    fn activate_dual(&mut self, k: usize, read: usize) -> Result<GraphPoint<T>> {
        let lagged = self.lagged(read)?;
        let p = self.problem;
        let op = &p.b_ops()[k];
        let r = p.r().block(k);
        let l = p.coupling().forward_block(k, &lagged.primal);
        let v_lag = lagged.dual.block(k);
        let mu = self.config.mu.value(k, read);
        let (Some(budget), Some(pert)) = (self.config.inexact, self.perturbation.as_mut()) else {
            return graph_point_dual(op, r, mu, &l, v_lag);
        };
        let mut f: Vec<T> = pert.dual_error(self.state.n, k, op.dim());
        for _ in 0..MAX_ERROR_HALVINGS {
            let cand = perturbed_graph_point_dual(op, r, mu, &l, v_lag, Some(&f))?;
            let verdict = validate_inexact_dual(
                op,
                &cand,
                &l,
                v_lag,
                r,
                mu,
                &budget,
                self.config.membership_tol,
            )?;
            if verdict == InexactVerdict::Accepted {
                self.state.inexact.accepted += 1;
                return Ok(cand);
            }
            self.state.inexact.rejected += 1;
            f = scalar::scale(T::lit(0.5), &f);
        }
        self.state.inexact.fallbacks += 1;
        graph_point_dual(op, r, mu, &l, v_lag)
    }

    fn residuals(&self) -> (T, T, T, T) {
        let p = self.problem;
        let l = p.coupling();
        let u = &self.state.current;
        let (a, b) = (&self.state.recycled_a, &self.state.recycled_b);
        let mut res_primal = T::zero();
        let mut res_dual_map = T::zero();
        for (i, gp) in a.iter().enumerate() {
            res_primal += scalar::norm_sq(&scalar::sub(u.primal.block(i), &gp.point));
            let lt = l.adjoint_block(i, &u.dual);
            res_dual_map += scalar::norm_sq(&scalar::add(&gp.dual, &lt));
        }
        let mut res_coupling = T::zero();
        let mut res_dual = T::zero();
        for (k, gp) in b.iter().enumerate() {
            let lx = l.forward_block(k, &u.primal);
            res_coupling += scalar::norm_sq(&scalar::sub(&lx, &gp.point));
            res_dual += scalar::norm_sq(&scalar::sub(&gp.dual, u.dual.block(k)));
        }
        (
            res_primal.sqrt(),
            res_dual_map.sqrt(),
            res_coupling.sqrt(),
            res_dual.sqrt(),
        )
    }

    /// Graph-point and separator phase of iteration `n`.
    pub fn evaluate(&mut self) -> Result<Evaluation<T>> {
        let n = self.state.n;
        let step = self.schedule.step(n);
        for act in &step.primal {
            let gp = self.activate_primal(act.block, act.read)?;
            self.state.recycled_a[act.block] = gp;
        }
        for act in &step.dual {
            let gp = self.activate_dual(act.block, act.read)?;
            self.state.recycled_b[act.block] = gp;
        }
        let (a, b) = (&self.state.recycled_a, &self.state.recycled_b);
        let raw = raw_direction_unchecked(a, b, self.problem);
        let eta = separator_offset(a, b);
        let scale = a
            .iter()
            .map(|gp| scalar::norm(&gp.dual))
            .chain(b.iter().map(|gp| scalar::norm(&gp.point)))
            .fold(T::zero(), |s, v| s + v);
        let exact_point = detect_exact_solution(&raw, scale, self.config.exact_tol, a, b);
        let separator = Separator::from_raw(&raw, eta, self.problem);
        let (res_primal, res_dual_map, res_coupling, res_dual) = self.residuals();
        let current = &self.state.current;
        let record = IterationRecord {
            n,
            theta: T::zero(),
            tau: separator.tau,
            violation: separator.signed_violation(current).max(T::zero()),
            res_primal,
            res_dual_map,
            res_coupling,
            res_dual,
            dist_z: self
                .problem
                .known_z_points()
                .iter()
                .map(|z| current.distance(z))
                .collect(),
        };
        if self.config.monitor {
            self.monitor_evaluation(&separator);
        }
        Ok(Evaluation {
            separator,
            record,
            exact_point,
        })
    }

    fn monitor_evaluation(&mut self, sep: &Separator<T>) {
        let n = self.state.n;
        let p = self.problem;
        let tol = self.config.membership_tol;
        let report = &mut self.state.monitor;
        report.checks += 1;
        for (i, gp) in self.state.recycled_a.iter().enumerate() {
            let res = primal_membership_residual(&p.a_ops()[i], p.z_star().block(i), gp);
            match res {
                Ok(r) if r <= tol * (T::one() + scalar::norm(&gp.point)) => {}
                other => report.flag(InvariantKind::Membership, n, format!("A_{i}: {other:?}")),
            }
        }
        for (k, gp) in self.state.recycled_b.iter().enumerate() {
            let res = dual_membership_residual(&p.b_ops()[k], p.r().block(k), gp);
            match res {
                Ok(r) if r <= tol * (T::one() + scalar::norm(&gp.point)) => {}
                other => report.flag(InvariantKind::Membership, n, format!("B_{k}: {other:?}")),
            }
        }
        for (j, z) in p.known_z_points().iter().enumerate() {
            let v = sep.signed_violation(z);
            if v > T::lit(HALFSPACE_SLACK) {
                report.flag(
                    InvariantKind::HalfspaceValidity,
                    n,
                    format!("known point {j} cut off by {v:e}"),
                );
            }
        }
        let sub = p.subspace().residual(&self.state.current);
        if sub > T::lit(SUBSPACE_SLACK) {
            report.flag(InvariantKind::SubspaceResidual, n, format!("residual {sub:e}"));
        }
    }

    fn monitor_update(&mut self, prev: &PrimalDualPoint<T>, next: &PrimalDualPoint<T>) {
        let n = self.state.n;
        let report = &mut self.state.monitor;
        match self.config.mode {
            Mode::Fejer => {
                for (j, z) in self.problem.known_z_points().iter().enumerate() {
                    let before = prev.distance(z);
                    let after = next.distance(z);
                    if after > before + T::lit(FEJER_SLACK) {
                        report.flag(
                            InvariantKind::FejerMonotonicity,
                            n,
                            format!("distance to known point {j} grew {before:e} -> {after:e}"),
                        );
                    }
                }
            }
            Mode::Haugazeau => {
                let anchor = &self.state.anchor;
                let before = prev.distance(anchor);
                let after = next.distance(anchor);
                if after < before - T::lit(FEJER_SLACK) {
                    report.flag(
                        InvariantKind::AnchorDistance,
                        n,
                        format!("distance to anchor shrank {before:e} -> {after:e}"),
                    );
                }
            }
        }
    }

    /// Update phase: relaxed projection (Fejér) or half-step plus `Q` (Haugazeau).
    pub fn advance(&mut self, eval: Evaluation<T>) -> Result<()> {
        let n = self.state.n;
        let lambda = self.config.lambda.value(n);
        let half = project_halfspace(
            &self.state.current,
            &eval.separator,
            lambda,
            self.config.tau_zero_factor,
        );
        let next = match self.config.mode {
            Mode::Fejer => half.next,
            Mode::Haugazeau => haugazeau_q(
                &self.state.anchor,
                &self.state.current,
                &half.next,
                self.config.rho_tol,
            )?,
        };
        let sep = &eval.separator;
        if sep.tau <= self.config.tau_zero_factor * (T::one() + sep.eta * sep.eta) {
            self.state.degenerate_streak += 1;
        } else {
            self.state.degenerate_streak = 0;
        }
        let mut record = eval.record;
        record.theta = half.theta;
        self.state.theta_tau_sum += half.theta * half.theta * eval.separator.tau;
        let finite = next.is_finite();
        self.push_record(record, !finite);
        if !finite {
            return Err(Error::Numerical(format!("non-finite iterate at iteration {n}")));
        }
        if self.config.monitor {
            let prev = self.state.current.clone();
            self.monitor_update(&prev, &next);
        }
        self.state.lag_buffer.push(n + 1, next.clone());
        self.state.current = next;
        self.state.n = n + 1;
        Ok(())
    }

    fn push_record(&mut self, record: IterationRecord<T>, force: bool) {
        if force || record.n.is_multiple_of(self.config.trace_stride) {
            self.state.trace.push(record);
        }
    }

    /// One full iteration; returns the exact Kuhn-Tucker point if one was detected.
    pub fn step(&mut self) -> Result<Option<PrimalDualPoint<T>>> {
        let eval = self.evaluate()?;
        if let Some(p) = eval.exact_point.clone() {
            self.push_record(eval.record, true);
            return Ok(Some(p));
        }
        self.advance(eval)?;
        Ok(None)
    }

    pub fn run(mut self) -> Result<RunResult<T>> {
        loop {
            if self.state.n >= self.config.max_iter {
                return Ok(self.finish(Status::MaxIter, None, None));
            }
            let eval = self.evaluate()?;
            if let Some(p) = eval.exact_point.clone() {
                self.push_record(eval.record, true);
                return Ok(self.finish(Status::ExactPoint, Some(p), None));
            }
            let scale = T::one() + self.state.current.norm();
            if eval.record.residual_sum() <= self.config.resid_tol * scale {
                self.push_record(eval.record, true);
                return Ok(self.finish(Status::Solved, None, None));
            }
            match self.advance(eval) {
                // once every block has been refreshed from a frozen iterate
                // nothing can change any more
                Ok(()) if self.state.degenerate_streak > self.schedule.window() + self.schedule.max_lag() => {
                    let msg = format!(
                        "separator below the tau floor for {} consecutive iterations",
                        self.state.degenerate_streak
                    );
                    return Ok(self.finish(Status::Solved, None, Some(msg)));
                }
                Ok(()) => {}
                Err(Error::Inconsistent(msg)) => {
                    return Ok(self.finish(Status::Inconsistent, None, Some(msg)));
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn finish(
        self,
        status: Status,
        point: Option<PrimalDualPoint<T>>,
        message: Option<String>,
    ) -> RunResult<T> {
        let s = self.state;
        RunResult {
            status,
            final_point: point.unwrap_or(s.current),
            iterations: s.n,
            trace: s.trace,
            theta_tau_sum: s.theta_tau_sum,
            inexact: s.inexact,
            monitor: s.monitor,
            message,
        }
    }
}

/// Runs `config.mode` from `start` until a stopping rule fires.
pub fn run<T: Scalar>(
    problem: &Problem<T>,
    config: SolverConfig<T>,
    schedule: &ControlSchedule,
    start: PrimalDualPoint<T>,
) -> Result<RunResult<T>> {
    Solver::new(problem, schedule, config, start)?.run()
}

/// Starting point with every block zero.
pub fn zero_start<T: Scalar>(problem: &Problem<T>) -> PrimalDualPoint<T> {
    PrimalDualPoint::zeros(problem.signature())
}

/// Single-block start `(x, v*)`.
pub fn start_point<T: Scalar>(x: Vec<Vec<T>>, v: Vec<Vec<T>>) -> PrimalDualPoint<T> {
    PrimalDualPoint::new(BlockVector::from_blocks(x), BlockVector::from_blocks(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::oracle::project_intersection_two_halfspaces;

    fn pt(x: f64, v: f64) -> PrimalDualPoint<f64> {
        start_point(vec![vec![x]], vec![vec![v]])
    }

    #[test]
    fn fejer_first_step_matches_hand_trace() {
        let p = fixtures::scalar_inclusion::<f64>().unwrap();
        let s = ControlSchedule::synchronous(1, 1, 10);
        let cfg = SolverConfig::fejer().with_lambda(1.0).with_steps(1.0, 1.0);
        let mut solver = Solver::new(&p, &s, cfg, pt(2.0, 0.0)).unwrap();
        let eval = solver.evaluate().unwrap();
        assert_eq!(solver.state().recycled_a[0], GraphPoint::new(vec![1.0], vec![1.0]));
        assert_eq!(solver.state().recycled_b[0], GraphPoint::new(vec![1.0], vec![1.0]));
        assert_eq!(eval.separator.t_star.block(0), &[2.0]);
        assert_eq!(eval.separator.t.block(0), &[0.0]);
        assert_eq!((eval.separator.eta, eval.separator.tau), (2.0, 4.0));
        assert_eq!(eval.record.violation, 2.0);
        solver.advance(eval).unwrap();
        assert_eq!(solver.state().trace[0].theta, 0.5);
        assert_eq!(solver.state().current, pt(1.0, 0.0));
    }

    #[test]
    fn known_point_is_fixed() {
        let p = fixtures::l1_quadratic_2d::<f64>().unwrap();
        let s = ControlSchedule::synchronous(1, 1, 10);
        let z = p.known_z_points()[0].clone();
        let mut solver = Solver::new(&p, &s, SolverConfig::fejer(), z.clone()).unwrap();
        let eval = solver.evaluate().unwrap();
        assert!(eval.record.violation <= 0.0);
        if eval.exact_point.is_none() {
            solver.advance(eval).unwrap();
            assert_eq!(solver.state().trace[0].theta, 0.0);
            assert_eq!(solver.state().current, z);
        }
    }

    #[test]
    fn exact_solution_short_circuits() {
        let p = fixtures::scalar_inclusion::<f64>().unwrap();
        let s = ControlSchedule::synchronous(1, 1, 10);
        let res = run(&p, SolverConfig::fejer(), &s, pt(0.0, 0.0)).unwrap();
        assert_eq!(res.status, Status::ExactPoint);
        assert_eq!(res.iterations, 0);
        assert_eq!(res.final_point, pt(0.0, 0.0));
    }

    #[test]
    fn zero_iterations_returns_start() {
        let p = fixtures::scalar_inclusion::<f64>().unwrap();
        let s = ControlSchedule::synchronous(1, 1, 10);
        let res = run(&p, SolverConfig::fejer().with_max_iter(0), &s, pt(2.0, 0.0)).unwrap();
        assert_eq!(res.status, Status::MaxIter);
        assert_eq!(res.final_point, pt(2.0, 0.0));
        assert!(res.trace.is_empty());
    }

    #[test]
    fn config_bounds_enforced() {
        let p = fixtures::scalar_inclusion::<f64>().unwrap();
        let s = ControlSchedule::synchronous(1, 1, 10);
        let bad = SolverConfig::haugazeau().with_lambda(1.5);
        assert!(matches!(Solver::new(&p, &s, bad, pt(1.0, 0.0)), Err(Error::Config(_))));
        let bad = SolverConfig::fejer().with_lambda(1.99);
        assert!(Solver::new(&p, &s, bad, pt(1.0, 0.0)).is_err());
        let bad = SolverConfig::fejer().with_steps(1000.0, 1.0);
        assert!(Solver::new(&p, &s, bad, pt(1.0, 0.0)).is_err());
        let mut bad = SolverConfig::fejer();
        bad.gamma = ProxRule::PerBlock(vec![1.0, 1.0]);
        assert!(Solver::new(&p, &s, bad, pt(1.0, 0.0)).is_err());
    }

    #[test]
    fn uncertified_schedule_rejected() {
        let p = fixtures::scalar_inclusion::<f64>().unwrap();
        let s = ControlSchedule::synchronous(2, 1, 10);
        assert!(matches!(
            Solver::new(&p, &s, SolverConfig::fejer(), pt(1.0, 0.0)),
            Err(Error::Schedule(_))
        ));
    }

    #[test]
    fn q_degenerate_branches() {
        let y = vec![1.0, 2.0];
        let z = vec![1.0, 2.0];
        let x0 = vec![5.0, -1.0];
        assert_eq!(haugazeau_q(&x0, &y, &z, 1e-12).unwrap(), z);
        let z2 = vec![3.0, 0.0];
        assert_eq!(haugazeau_q(&y, &y, &z2, 1e-12).unwrap(), z2);
    }

    #[test]
    fn q_matches_two_halfspace_projection() {
        let x0 = vec![0.0, 0.0];
        let y = vec![1.0, 0.0];
        let z = vec![1.0, -1.0];
        let q = haugazeau_q(&x0, &y, &z, 1e-12).unwrap();
        assert_eq!(q, vec![1.0, -1.0]);
        let h1 = (scalar::sub(&x0, &y), scalar::dot(&y, &scalar::sub(&x0, &y)));
        let h2 = (scalar::sub(&y, &z), scalar::dot(&z, &scalar::sub(&y, &z)));
        let oracle = project_intersection_two_halfspaces(&x0, (&h1.0, h1.1), (&h2.0, h2.1)).unwrap();
        assert!(scalar::dist(&q, &oracle) < 1e-12);
    }

    #[test]
    fn q_reports_empty_intersection() {
        // x0 - y and y - z antiparallel with chi < 0: R is empty
        let x0 = vec![0.0];
        let y = vec![1.0];
        let z = vec![0.0];
        assert!(matches!(haugazeau_q(&x0, &y, &z, 1e-12), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn haugazeau_inactive_step_keeps_current() {
        let p = fixtures::box_best_approximation::<f64>().unwrap();
        let s = ControlSchedule::synchronous(1, 1, 10);
        let start = pt(0.5, 0.0);
        let mut solver = Solver::new(&p, &s, SolverConfig::haugazeau(), start.clone()).unwrap();
        let out = solver.step().unwrap();
        if out.is_none() {
            assert_eq!(solver.state().current, start);
        }
    }

    #[test]
    fn trace_stride_thins_records() {
        let p = fixtures::scalar_inclusion::<f64>().unwrap();
        let s = ControlSchedule::synchronous(1, 1, 10);
        let mut cfg = SolverConfig::fejer().with_max_iter(10).with_resid_tol(0.0);
        cfg.trace_stride = 3;
        let res = run(&p, cfg, &s, pt(2.0, 0.0)).unwrap();
        assert!(res.trace.iter().all(|r| r.n % 3 == 0 || r.n + 1 == res.iterations || res.status != Status::MaxIter));
        assert!(res.trace.len() <= 4);
    }

    #[test]
    fn frozen_separator_ends_run() {
        let p = fixtures::scalar_inclusion::<f64>().unwrap();
        let s = ControlSchedule::synchronous(1, 1, 10);
        let cfg = SolverConfig::fejer().with_resid_tol(1e-15).with_max_iter(500);
        let res = run(&p, cfg, &s, pt(2.0, 0.0)).unwrap();
        assert_eq!(res.status, Status::Solved);
        assert!(res.iterations < 500);
        assert!(res.message.unwrap().contains("tau floor"));
        assert!(res.final_point.norm() < 1e-6);
    }

    #[test]
    fn f32_solver_converges() {
        let p = fixtures::scalar_inclusion::<f32>().unwrap();
        let s = ControlSchedule::synchronous(1, 1, 10);
        let cfg = SolverConfig::<f32>::fejer().with_resid_tol(1e-4).with_max_iter(5000);
        let res = run(&p, cfg, &s, start_point(vec![vec![2.0f32]], vec![vec![0.0f32]])).unwrap();
        assert!(matches!(res.status, Status::Solved | Status::ExactPoint));
        assert!(res.final_point.norm() < 1e-2);
    }
}
