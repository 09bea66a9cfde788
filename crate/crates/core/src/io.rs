//! On-disk formats: problem, schedule, config and point files (JSON) and the
//! trace CSV.
//!
//! All files use 64-bit floats. JSON numbers are written in shortest
//! round-trip form, so `parse(write(x)) == x` exactly. Errors carry the line
//! of the offending JSON value.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blockspace::{BlockVector, CouplingMap, PrimalDualPoint, SpaceSignature};
use crate::engine::{IterationRecord, Mode, ProxRule, Relaxation, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::operators::{InexactnessBudget, MonotoneOp, OperatorKind};
use crate::schedule::{Activation, ControlSchedule, LagPattern, Step};
use crate::separator::{Problem, ProblemSpec, SubspaceSpec};

/// Line number (1-based) of every value in a JSON document, keyed by path
/// (`A_ops[1].Q`, `known_Z_points[0]`, ...).
fn json_value_lines(src: &str) -> HashMap<String, usize> {
    enum Frame {
        Object { key: Option<String> },
        Array { index: usize },
    }
    fn path_of(stack: &[Frame]) -> String {
        let mut p = String::new();
        for f in stack {
            match f {
                Frame::Object { key: Some(k) } => {
                    if !p.is_empty() {
                        p.push('.');
                    }
                    p.push_str(k);
                }
                Frame::Object { key: None } => {}
                Frame::Array { index } => {
                    let _ = write!(p, "[{index}]");
                }
            }
        }
        p
    }

    let mut lines = HashMap::new();
    let mut stack: Vec<Frame> = Vec::new();
    let mut line = 1;
    let mut expecting_key = false;
    let mut chars = src.chars().peekable();
    let mut value_started = false;
    while let Some(c) = chars.next() {
        match c {
            '\n' => line += 1,
            '"' => {
                let mut s = String::new();
                while let Some(d) = chars.next() {
                    match d {
                        '\\' => {
                            if let Some(e) = chars.next() {
                                s.push(e);
                            }
                        }
                        '"' => break,
                        '\n' => {
                            line += 1;
                            s.push(d);
                        }
                        _ => s.push(d),
                    }
                }
                if expecting_key {
                    if let Some(Frame::Object { key }) = stack.last_mut() {
                        *key = Some(s);
                    }
                    expecting_key = false;
                } else if !value_started {
                    lines.entry(path_of(&stack)).or_insert(line);
                    value_started = true;
                }
            }
            '{' | '[' => {
                if !value_started {
                    lines.entry(path_of(&stack)).or_insert(line);
                }
                if c == '{' {
                    stack.push(Frame::Object { key: None });
                    expecting_key = true;
                } else {
                    stack.push(Frame::Array { index: 0 });
                }
                value_started = false;
            }
            '}' | ']' => {
                stack.pop();
                value_started = true;
                expecting_key = false;
            }
            ':' => value_started = false,
            ',' => {
                match stack.last_mut() {
                    Some(Frame::Array { index }) => *index += 1,
                    Some(Frame::Object { .. }) => expecting_key = true,
                    None => {}
                }
                value_started = false;
            }
            c if c.is_whitespace() => {}
            _ => {
                if !value_started {
                    lines.entry(path_of(&stack)).or_insert(line);
                    value_started = true;
                }
            }
        }
    }
    lines
}

/// Error context `"<origin> line L (path)"`.
struct Locator<'a> {
    origin: &'a str,
    lines: HashMap<String, usize>,
}

impl<'a> Locator<'a> {
    fn new(origin: &'a str, src: &str) -> Self {
        Locator {
            origin,
            lines: json_value_lines(src),
        }
    }

    fn line(&self, path: &str) -> usize {
        // fall back to the nearest enclosing value
        let mut p = path;
        loop {
            if let Some(&l) = self.lines.get(p) {
                return l;
            }
            match p.rfind(['.', '[']) {
                Some(cut) => p = &p[..cut],
                None => return 1,
            }
        }
    }

    fn err(&self, path: &str, message: impl std::fmt::Display) -> Error {
        Error::Validation {
            context: format!("{} line {} ({path})", self.origin, self.line(path)),
            message: message.to_string(),
        }
    }

    /// Attributes a validation error to the most specific path its message names.
    fn attribute(&self, err: Error, fallback: &str) -> Error {
        let msg = err.to_string();
        let mut best: Option<&str> = None;
        for p in self.lines.keys() {
            let named = msg.contains(p.as_str()) && (p.contains('[') || p.len() > 2);
            if named && best.is_none_or(|b| p.len() > b.len()) {
                best = Some(p);
            }
        }
        let path = match best {
            Some(p) => p.to_string(),
            None if msg.contains(": r:") => "r".to_string(),
            None => fallback.to_string(),
        };
        self.err(&path, msg)
    }
}

fn from_json<T: serde::de::DeserializeOwned>(origin: &str, src: &str) -> Result<T> {
    serde_json::from_str(src).map_err(|e| Error::Parse {
        context: format!("{origin} line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

// ---------------------------------------------------------------- problem

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct SignatureFile {
    primal_dims: Vec<usize>,
    dual_dims: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum OperatorFile {
    Zero,
    L1Norm {
        weight: f64,
    },
    BoxIndicator {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Quadratic {
        #[serde(rename = "Q")]
        q_mat: Vec<Vec<f64>>,
        q: Vec<f64>,
    },
    AffineMonotone {
        #[serde(rename = "M")]
        m_mat: Vec<Vec<f64>>,
        c: Vec<f64>,
    },
    NormalConeBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct CouplingFile {
    k: usize,
    i: usize,
    matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
enum SubspaceFile {
    Full,
    Nullspace {
        #[serde(rename = "C")]
        c: Vec<Vec<f64>>,
    },
    LinearPrimal,
    ZeroSumDual,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct PointFile {
    x: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

fn default_subspace() -> SubspaceFile {
    SubspaceFile::Full
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    signature: SignatureFile,
    #[serde(rename = "A_ops")]
    a_ops: Vec<OperatorFile>,
    #[serde(rename = "B_ops")]
    b_ops: Vec<OperatorFile>,
    coupling: Vec<CouplingFile>,
    z_star: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    #[serde(default = "default_subspace")]
    subspace: SubspaceFile,
    #[serde(rename = "known_Z_points", default, skip_serializing_if = "Vec::is_empty")]
    known_z_points: Vec<PointFile>,
}

fn matrix(rows: &[Vec<f64>]) -> Result<Matrix<f64>> {
    Matrix::from_rows(rows)
}

fn rows(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    m.to_rows()
}

fn build_op(op: &OperatorFile, dim: usize) -> Result<MonotoneOp<f64>> {
    let kind = match op {
        OperatorFile::Zero => OperatorKind::Zero,
        OperatorFile::L1Norm { weight } => OperatorKind::L1Norm { weight: *weight },
        OperatorFile::BoxIndicator { lo, hi } => OperatorKind::BoxIndicator {
            lo: lo.clone(),
            hi: hi.clone(),
        },
        OperatorFile::Quadratic { q_mat, q } => OperatorKind::Quadratic {
            q_mat: matrix(q_mat)?,
            q_vec: q.clone(),
        },
        OperatorFile::AffineMonotone { m_mat, c } => OperatorKind::AffineMonotone {
            m_mat: matrix(m_mat)?,
            c: c.clone(),
        },
        OperatorFile::NormalConeBox { lo, hi } => OperatorKind::NormalConeBox {
            lo: lo.clone(),
            hi: hi.clone(),
        },
    };
    MonotoneOp::new(kind, dim)
}

fn op_file(op: &MonotoneOp<f64>) -> OperatorFile {
    match op.kind() {
        OperatorKind::Zero => OperatorFile::Zero,
        OperatorKind::L1Norm { weight } => OperatorFile::L1Norm { weight: *weight },
        OperatorKind::BoxIndicator { lo, hi } => OperatorFile::BoxIndicator {
            lo: lo.clone(),
            hi: hi.clone(),
        },
        OperatorKind::Quadratic { q_mat, q_vec } => OperatorFile::Quadratic {
            q_mat: rows(q_mat),
            q: q_vec.clone(),
        },
        OperatorKind::AffineMonotone { m_mat, c } => OperatorFile::AffineMonotone {
            m_mat: rows(m_mat),
            c: c.clone(),
        },
        OperatorKind::NormalConeBox { lo, hi } => OperatorFile::NormalConeBox {
            lo: lo.clone(),
            hi: hi.clone(),
        },
    }
}

fn point_from_file(p: &PointFile) -> PrimalDualPoint<f64> {
    PrimalDualPoint::new(
        BlockVector::from_blocks(p.x.clone()),
        BlockVector::from_blocks(p.v.clone()),
    )
}

fn point_to_file(p: &PrimalDualPoint<f64>) -> PointFile {
    PointFile {
        x: p.primal.blocks().to_vec(),
        v: p.dual.blocks().to_vec(),
    }
}

/// Parses and validates a problem file held in memory; `origin` names it in errors.
pub fn parse_problem_str(src: &str, origin: &str) -> Result<Problem<f64>> {
    let file: ProblemFile = from_json(origin, src)?;
    let loc = Locator::new(origin, src);
    let sig = SpaceSignature::new(file.signature.primal_dims.clone(), file.signature.dual_dims.clone())
        .map_err(|e| loc.err("signature", e))?;
    let mut a_ops = Vec::with_capacity(file.a_ops.len());
    for (i, op) in file.a_ops.iter().enumerate() {
        let dim = sig.primal_dims().get(i).copied().unwrap_or(1);
        a_ops.push(build_op(op, dim).map_err(|e| loc.err(&format!("A_ops[{i}]"), e))?);
    }
    let mut b_ops = Vec::with_capacity(file.b_ops.len());
    for (k, op) in file.b_ops.iter().enumerate() {
        let dim = sig.dual_dims().get(k).copied().unwrap_or(1);
        b_ops.push(build_op(op, dim).map_err(|e| loc.err(&format!("B_ops[{k}]"), e))?);
    }
    let mut coupling = CouplingMap::new(sig.clone());
    for (j, entry) in file.coupling.iter().enumerate() {
        let path = format!("coupling[{j}]");
        let m = matrix(&entry.matrix).map_err(|e| loc.err(&path, e))?;
        coupling.insert(entry.k, entry.i, m).map_err(|e| loc.err(&path, e))?;
    }
    let subspace = match &file.subspace {
        SubspaceFile::Full => SubspaceSpec::Full,
        SubspaceFile::Nullspace { c } => SubspaceSpec::Nullspace {
            c: matrix(c).map_err(|e| loc.err("subspace.C", e))?,
        },
        SubspaceFile::LinearPrimal => SubspaceSpec::LinearPrimal,
        SubspaceFile::ZeroSumDual => SubspaceSpec::ZeroSumDual,
    };
    let spec = ProblemSpec {
        signature: sig,
        a_ops,
        b_ops,
        coupling,
        z_star: BlockVector::from_blocks(file.z_star.clone()),
        r: BlockVector::from_blocks(file.r.clone()),
        subspace,
        known_z_points: file.known_z_points.iter().map(point_from_file).collect(),
    };
    Problem::new(spec).map_err(|e| loc.attribute(e, "signature"))
}

pub fn parse_problem(path: impl AsRef<Path>) -> Result<Problem<f64>> {
    let path = path.as_ref();
    parse_problem_str(&read_file(path)?, &path.display().to_string())
}

/// Canonical JSON for a problem specification.
pub fn problem_to_json(spec: &ProblemSpec<f64>) -> String {
    let file = ProblemFile {
        signature: SignatureFile {
            primal_dims: spec.signature.primal_dims().to_vec(),
            dual_dims: spec.signature.dual_dims().to_vec(),
        },
        a_ops: spec.a_ops.iter().map(op_file).collect(),
        b_ops: spec.b_ops.iter().map(op_file).collect(),
        coupling: spec
            .coupling
            .entries()
            .map(|(k, i, m)| CouplingFile {
                k,
                i,
                matrix: rows(m),
            })
            .collect(),
        z_star: spec.z_star.blocks().to_vec(),
        r: spec.r.blocks().to_vec(),
        subspace: match &spec.subspace {
            SubspaceSpec::Full => SubspaceFile::Full,
            SubspaceSpec::Nullspace { c } => SubspaceFile::Nullspace { c: rows(c) },
            SubspaceSpec::LinearPrimal => SubspaceFile::LinearPrimal,
            SubspaceSpec::ZeroSumDual => SubspaceFile::ZeroSumDual,
        },
        known_z_points: spec.known_z_points.iter().map(point_to_file).collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("problem serialises");
    s.push('\n');
    s
}

pub fn write_problem(spec: &ProblemSpec<f64>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, problem_to_json(spec))?;
    Ok(())
}

// ---------------------------------------------------------------- points

pub fn parse_point_str(src: &str, origin: &str) -> Result<PrimalDualPoint<f64>> {
    let file: PointFile = from_json(origin, src)?;
    Ok(point_from_file(&file))
}

pub fn parse_point(path: impl AsRef<Path>) -> Result<PrimalDualPoint<f64>> {
    let path = path.as_ref();
    parse_point_str(&read_file(path)?, &path.display().to_string())
}

pub fn point_to_json(p: &PrimalDualPoint<f64>) -> String {
    let mut s = serde_json::to_string_pretty(&point_to_file(p)).expect("point serialises");
    s.push('\n');
    s
}

// ---------------------------------------------------------------- schedule

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct ExplicitScheduleFile {
    #[serde(rename = "M")]
    window: usize,
    #[serde(rename = "D")]
    max_lag: usize,
    horizon: usize,
    #[serde(rename = "I_seq")]
    i_seq: Vec<Vec<usize>>,
    #[serde(rename = "K_seq")]
    k_seq: Vec<Vec<usize>>,
    /// `c[n][i]`: iterate read by primal block `i` at iteration `n`; absent means `n`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    c: BTreeMap<String, BTreeMap<String, usize>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    d: BTreeMap<String, BTreeMap<String, usize>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "pattern", rename_all = "snake_case", deny_unknown_fields)]
pub enum LagFile {
    Zero,
    Constant { d: usize },
    Sawtooth { d: usize },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct PeriodicParams {
    pub m: usize,
    pub p: usize,
    pub group_size: usize,
    pub lag: LagFile,
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(deny_unknown_fields)]
pub struct RandomParams {
    pub m: usize,
    pub p: usize,
    #[serde(rename = "M")]
    pub window: usize,
    #[serde(rename = "D")]
    pub max_lag: usize,
    pub horizon: usize,
}

/// Generator form of a schedule file.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleGenerator {
    Periodic {
        params: PeriodicParams,
        #[serde(default)]
        seed: u64,
    },
    Random { params: RandomParams, seed: u64 },
}

impl ScheduleGenerator {
    pub fn generate(&self) -> Result<ControlSchedule> {
        match *self {
            ScheduleGenerator::Periodic { params: p, .. } => {
                let lag = match p.lag {
                    LagFile::Zero => LagPattern::Zero,
                    LagFile::Constant { d } => LagPattern::Constant(d),
                    LagFile::Sawtooth { d } => LagPattern::Sawtooth(d),
                };
                ControlSchedule::periodic(p.m, p.p, p.group_size, lag, p.horizon)
            }
            ScheduleGenerator::Random { params: p, seed } => {
                ControlSchedule::random_admissible(p.m, p.p, p.window, p.max_lag, seed, p.horizon)
            }
        }
    }
}

fn reads(
    loc: &Locator,
    table: &BTreeMap<String, BTreeMap<String, usize>>,
    name: &str,
) -> Result<HashMap<(usize, usize), usize>> {
    let mut out = HashMap::new();
    for (n, row) in table {
        let path = format!("{name}.{n}");
        let n: usize = n.parse().map_err(|_| loc.err(&path, "iteration key is not an integer"))?;
        for (b, &read) in row {
            let b: usize = b
                .parse()
                .map_err(|_| loc.err(&path, format!("block key {b:?} is not an integer")))?;
            out.insert((n, b), read);
        }
    }
    Ok(out)
}

fn explicit_schedule(loc: &Locator, f: &ExplicitScheduleFile) -> Result<ControlSchedule> {
    if f.i_seq.len() != f.horizon || f.k_seq.len() != f.horizon {
        return Err(loc.err(
            "horizon",
            format!(
                "horizon {} but I_seq has {} and K_seq has {} entries",
                f.horizon,
                f.i_seq.len(),
                f.k_seq.len()
            ),
        ));
    }
    let c = reads(loc, &f.c, "c")?;
    let d = reads(loc, &f.d, "d")?;
    let acts = |seq: &[usize], n: usize, table: &HashMap<(usize, usize), usize>| -> Vec<Activation> {
        seq.iter()
            .map(|&block| Activation {
                block,
                read: table.get(&(n, block)).copied().unwrap_or(n),
            })
            .collect()
    };
    let steps = (0..f.horizon)
        .map(|n| Step {
            primal: acts(&f.i_seq[n], n, &c),
            dual: acts(&f.k_seq[n], n, &d),
        })
        .collect();
    Ok(ControlSchedule::new(steps, f.window, f.max_lag))
}

/// Parses a schedule file (explicit or generator form). Admissibility is
/// checked separately by [`ControlSchedule::validate`].
pub fn parse_schedule_str(src: &str, origin: &str) -> Result<ControlSchedule> {
    let value: serde_json::Value = from_json(origin, src)?;
    let loc = Locator::new(origin, src);
    if value.get("type").is_some() {
        let g: ScheduleGenerator = from_json(origin, src)?;
        return g.generate().map_err(|e| loc.err("params", e));
    }
    let f: ExplicitScheduleFile = from_json(origin, src)?;
    explicit_schedule(&loc, &f)
}

pub fn parse_schedule(path: impl AsRef<Path>) -> Result<ControlSchedule> {
    let path = path.as_ref();
    parse_schedule_str(&read_file(path)?, &path.display().to_string())
}

/// Explicit JSON form; reads equal to `n` are omitted.
pub fn schedule_to_json(s: &ControlSchedule) -> String {
    let mut c: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut d: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for (n, step) in s.steps().iter().enumerate() {
        for (acts, table) in [(&step.primal, &mut c), (&step.dual, &mut d)] {
            for a in acts.iter().filter(|a| a.read != n) {
                table
                    .entry(n.to_string())
                    .or_default()
                    .insert(a.block.to_string(), a.read);
            }
        }
    }
    let f = ExplicitScheduleFile {
        window: s.window(),
        max_lag: s.max_lag(),
        horizon: s.horizon(),
        i_seq: s.steps().iter().map(|st| st.primal.iter().map(|a| a.block).collect()).collect(),
        k_seq: s.steps().iter().map(|st| st.dual.iter().map(|a| a.block).collect()).collect(),
        c,
        d,
    };
    let mut out = serde_json::to_string(&f).expect("schedule serialises");
    out.push('\n');
    out
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
enum ParamFile {
    Scalar(f64),
    PerBlock(Vec<f64>),
    Table(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InexactFile {
    pub beta: f64,
    pub sigma: f64,
    pub delta: f64,
    pub zeta: f64,
    /// Seed of the injected resolvent errors.
    #[serde(default)]
    pub seed: u64,
    /// Errors are drawn uniformly from `[−scale, scale]` per coordinate.
    #[serde(default = "default_error_scale")]
    pub scale: f64,
}

fn default_error_scale() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    mode: Option<String>,
    epsilon: Option<f64>,
    lambda: Option<ParamFile>,
    gamma: Option<ParamFile>,
    mu: Option<ParamFile>,
    prox_epsilon: Option<f64>,
    max_iter: Option<usize>,
    resid_tol: Option<f64>,
    tau_zero_factor: Option<f64>,
    exact_tol: Option<f64>,
    rho_tol: Option<f64>,
    membership_tol: Option<f64>,
    trace_stride: Option<usize>,
    inexact: Option<InexactFile>,
    monitor: Option<bool>,
    start: Option<PointFile>,
}

/// Parsed run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverConfig<f64>,
    /// Seed and scale of injected resolvent errors when inexact mode is on.
    pub perturbation: Option<(u64, f64)>,
    /// Starting point; zero when absent.
    pub start: Option<PrimalDualPoint<f64>>,
}

fn prox_rule(loc: &Locator, p: &ParamFile, name: &str) -> Result<ProxRule<f64>> {
    Ok(match p {
        ParamFile::Scalar(v) => ProxRule::Constant(*v),
        ParamFile::PerBlock(v) => ProxRule::PerBlock(v.clone()),
        ParamFile::Table(t) => {
            if t.iter().any(Vec::is_empty) {
                return Err(loc.err(name, "per-iteration rows must be nonempty"));
            }
            ProxRule::PerBlockIteration(t.clone())
        }
    })
}

pub fn parse_config_str(src: &str, origin: &str) -> Result<RunConfig> {
    let f: ConfigFile = from_json(origin, src)?;
    let loc = Locator::new(origin, src);
    let mode = match f.mode.as_deref() {
        None | Some("fejer") => Mode::Fejer,
        Some("haugazeau") => Mode::Haugazeau,
        Some(other) => {
            return Err(loc.err("mode", format!("unknown mode {other:?} (fejer | haugazeau)")));
        }
    };
    let mut c = SolverConfig::new(mode);
    if let Some(v) = f.epsilon {
        c.epsilon = v;
    }
    match &f.lambda {
        None => {}
        Some(ParamFile::Scalar(v)) => c.lambda = Relaxation::Constant(*v),
        Some(ParamFile::PerBlock(v)) if !v.is_empty() => c.lambda = Relaxation::Sequence(v.clone()),
        Some(_) => return Err(loc.err("lambda", "expected a number or a nonempty list")),
    }
    if let Some(p) = &f.gamma {
        c.gamma = prox_rule(&loc, p, "gamma")?;
    }
    if let Some(p) = &f.mu {
        c.mu = prox_rule(&loc, p, "mu")?;
    }
    macro_rules! copy {
        ($($field:ident),*) => { $( if let Some(v) = f.$field { c.$field = v; } )* };
    }
    copy!(prox_epsilon, max_iter, resid_tol, tau_zero_factor, exact_tol, rho_tol, membership_tol, trace_stride, monitor);
    let mut perturbation = None;
    if let Some(inx) = f.inexact {
        c.inexact = Some(
            InexactnessBudget::new(inx.beta, inx.sigma, inx.delta, inx.zeta).map_err(|e| loc.err("inexact", e))?,
        );
        perturbation = Some((inx.seed, inx.scale));
    }
    Ok(RunConfig {
        solver: c,
        perturbation,
        start: f.start.as_ref().map(point_from_file),
    })
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    parse_config_str(&read_file(path)?, &path.display().to_string())
}

// ---------------------------------------------------------------- traces

/// Header of a trace with `known` distance columns.
pub fn trace_header(known: usize) -> String {
    let mut h = String::from("n,theta,tau,violation,res_primal,res_dualmap,res_coupling,res_dual");
    for j in 0..known {
        let _ = write!(h, ",dist_z{j}");
    }
    h
}

/// Trace CSV with 17 significant digits per value.
pub fn trace_to_csv<T: crate::scalar::Scalar>(trace: &[IterationRecord<T>], known: usize) -> String {
    let mut out = trace_header(known);
    out.push('\n');
    for r in trace {
        let _ = write!(out, "{}", r.n);
        for v in [r.theta, r.tau, r.violation, r.res_primal, r.res_dual_map, r.res_coupling, r.res_dual]
            .iter()
            .chain(&r.dist_z)
        {
            let _ = write!(out, ",{:.16e}", v.as_f64());
        }
        out.push('\n');
    }
    out
}

pub fn write_trace<T: crate::scalar::Scalar>(
    trace: &[IterationRecord<T>],
    known: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    std::fs::write(path, trace_to_csv(trace, known))?;
    Ok(())
}

/// First difference found by [`compare_traces`].
#[derive(Debug, Clone, PartialEq)]
pub struct TraceDivergence {
    /// 1-based line number; line 1 is the header.
    pub line: usize,
    pub column: String,
    pub left: String,
    pub right: String,
}

impl std::fmt::Display for TraceDivergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "line {} column {}: {} vs {}",
            self.line, self.column, self.left, self.right
        )
    }
}

/// Compares two trace CSVs field by field. With `tol == 0` fields must be
/// byte-identical; otherwise numeric fields may differ by at most `tol`.
pub fn compare_traces(a: &str, b: &str, tol: f64) -> Option<TraceDivergence> {
    let la: Vec<&str> = a.lines().collect();
    let lb: Vec<&str> = b.lines().collect();
    let header: Vec<&str> = la.first().map(|h| h.split(',').collect()).unwrap_or_default();
    for line in 0..la.len().max(lb.len()) {
        let (Some(ra), Some(rb)) = (la.get(line), lb.get(line)) else {
            return Some(TraceDivergence {
                line: line + 1,
                column: "<row>".into(),
                left: la.get(line).map_or("<missing>", |s| s).to_string(),
                right: lb.get(line).map_or("<missing>", |s| s).to_string(),
            });
        };
        let fa: Vec<&str> = ra.split(',').collect();
        let fb: Vec<&str> = rb.split(',').collect();
        for j in 0..fa.len().max(fb.len()) {
            let (x, y) = (fa.get(j).copied(), fb.get(j).copied());
            let same = match (x, y) {
                (Some(x), Some(y)) if x == y => true,
                (Some(x), Some(y)) if tol > 0.0 && line > 0 => {
                    match (x.parse::<f64>(), y.parse::<f64>()) {
                        (Ok(p), Ok(q)) => (p - q).abs() <= tol,
                        _ => false,
                    }
                }
                _ => false,
            };
            if !same {
                return Some(TraceDivergence {
                    line: line + 1,
                    column: header.get(j).map_or_else(|| format!("#{j}"), |s| s.to_string()),
                    left: x.unwrap_or("<missing>").to_string(),
                    right: y.unwrap_or("<missing>").to_string(),
                });
            }
        }
    }
    None
}
