//! Problem model, Kuhn-Tucker residuals, subspace projections and the
//! separating half-space built from one round of graph points.
//!
//! Given `(a, a*) ∈ gra A` and `(b, b*) ∈ gra B`, the half-space
//! `{u ∈ 𝒦 : ⟨u, t⟩ ≤ η}` with `t = P_𝒦(a* + L*b*, b − La)` and
//! `η = ⟨a, a*⟩ + ⟨b, b*⟩` contains the Kuhn-Tucker set `Z`.

use crate::blockspace::{BlockVector, CouplingMap, PrimalDualPoint, SpaceSignature};
use crate::error::{Error, Result};
use crate::linalg::{orthonormal_row_basis, Matrix};
use crate::operators::{GraphPoint, MonotoneOp};
use crate::scalar::Scalar;

/// Tolerance for accepting a user-supplied Kuhn-Tucker fixture point.
pub const FIXTURE_KT_TOL: f64 = 1e-8;

/// Default factor in the `τ ≤ factor · (1 + η²)` degeneracy test.
pub const DEFAULT_TAU_ZERO_FACTOR: f64 = 1e-14;

/// Closed subspace `𝒦` of the primal-dual space known to contain `Z`.
#[derive(Debug, Clone, PartialEq)]
pub enum SubspaceSpec<T> {
    /// The whole space.
    Full,
    /// `{u : C u = 0}` over the stacked coordinates `(x_1..x_m, v*_1..v*_p)`.
    Nullspace { c: Matrix<T> },
    /// `{(x_1, v*) : A_1 x_1 + Σ_k L_k1ᵀ v*_k = 0}`; needs `m = 1`, `z*_1 = 0`
    /// and a linear `A_1`, whose matrix is taken from the operator itself.
    LinearPrimal,
    /// `{(x, v*) : Σ_k v*_k = 0}`; needs equal dual block dimensions.
    ZeroSumDual,
}

impl<T> SubspaceSpec<T> {
    pub fn variant_name(&self) -> &'static str {
        match self {
            SubspaceSpec::Full => "full",
            SubspaceSpec::Nullspace { .. } => "nullspace",
            SubspaceSpec::LinearPrimal => "linear_primal",
            SubspaceSpec::ZeroSumDual => "zero_sum_dual",
        }
    }
}

/// Compiled orthogonal projector onto `𝒦`.
#[derive(Debug, Clone, PartialEq)]
pub enum Subspace<T> {
    Full,
    /// `P u = u − Σ_j ⟨q_j, u⟩ q_j` for an orthonormal basis of the constraint row space.
    RowComplement { basis: Vec<Vec<T>> },
    ZeroSumDual,
}

impl<T: Scalar> Subspace<T> {
    pub fn compile(spec: &SubspaceSpec<T>, problem: &ProblemSpec<T>) -> Result<Self> {
        let sig = &problem.signature;
        let rel_tol = T::lit(1e-12);
        match spec {
            SubspaceSpec::Full => Ok(Subspace::Full),
            SubspaceSpec::Nullspace { c } => {
                if c.cols() != sig.total_dim() {
                    return Err(Error::config(format!(
                        "nullspace constraint has {} columns, stacked dimension is {}",
                        c.cols(),
                        sig.total_dim()
                    )));
                }
                Ok(Subspace::RowComplement {
                    basis: orthonormal_row_basis(c, rel_tol),
                })
            }
            SubspaceSpec::LinearPrimal => {
                if sig.m() != 1 {
                    return Err(Error::config(format!(
                        "linear_primal subspace needs exactly one primal block, got {}",
                        sig.m()
                    )));
                }
                if problem.z_star.block(0).iter().any(|v| *v != T::zero()) {
                    return Err(Error::config("linear_primal subspace needs z*_1 = 0"));
                }
                let a1 = problem.a_ops[0].linear_matrix().ok_or_else(|| {
                    Error::config(format!(
                        "linear_primal subspace needs a linear A_1, got {}",
                        problem.a_ops[0].name()
                    ))
                })?;
                let n1 = sig.primal_dims()[0];
                let mut c = Matrix::zeros(n1, sig.total_dim());
                for r in 0..n1 {
                    for col in 0..n1 {
                        c[(r, col)] = a1[(r, col)];
                    }
                }
                let mut off = n1;
                for (k, &g) in sig.dual_dims().iter().enumerate() {
                    if let Some(l) = problem.coupling.get(k, 0) {
                        // row r of L_k1ᵀ is column r of L_k1
                        for r in 0..n1 {
                            for j in 0..g {
                                c[(r, off + j)] = l[(j, r)];
                            }
                        }
                    }
                    off += g;
                }
                Ok(Subspace::RowComplement {
                    basis: orthonormal_row_basis(&c, rel_tol),
                })
            }
            SubspaceSpec::ZeroSumDual => {
                let g0 = sig.dual_dims()[0];
                if sig.dual_dims().iter().any(|&g| g != g0) {
                    return Err(Error::config(format!(
                        "zero_sum_dual subspace needs equal dual dimensions, got {:?}",
                        sig.dual_dims()
                    )));
                }
                Ok(Subspace::ZeroSumDual)
            }
        }
    }

    /// Orthogonal projection onto `𝒦`.
    pub fn project(&self, u: &PrimalDualPoint<T>) -> PrimalDualPoint<T> {
        match self {
            Subspace::Full => u.clone(),
            Subspace::RowComplement { basis } => {
                if basis.is_empty() {
                    return u.clone();
                }
                let mut flat = u.flatten();
                for q in basis {
                    let c = crate::scalar::dot(q, &flat);
                    for (f, &qi) in flat.iter_mut().zip(q) {
                        *f -= c * qi;
                    }
                }
                let mut out = u.clone();
                let mut it = flat.into_iter();
                for j in 0..out.primal.num_blocks() {
                    for v in out.primal.block_mut(j).iter_mut() {
                        *v = it.next().expect("flat length");
                    }
                }
                for j in 0..out.dual.num_blocks() {
                    for v in out.dual.block_mut(j).iter_mut() {
                        *v = it.next().expect("flat length");
                    }
                }
                out
            }
            Subspace::ZeroSumDual => {
                let p = u.dual.num_blocks();
                let g = u.dual.block(0).len();
                let count = T::from_usize(p).expect("block count");
                let mean: Vec<T> = (0..g)
                    .map(|j| (0..p).fold(T::zero(), |s, k| s + u.dual.block(k)[j]) / count)
                    .collect();
                let dual = BlockVector::from_blocks(
                    (0..p)
                        .map(|k| {
                            u.dual
                                .block(k)
                                .iter()
                                .zip(&mean)
                                .map(|(&v, &m)| v - m)
                                .collect()
                        })
                        .collect(),
                );
                PrimalDualPoint::new(u.primal.clone(), dual)
            }
        }
    }

    /// `‖u − P_𝒦 u‖`.
    pub fn residual(&self, u: &PrimalDualPoint<T>) -> T {
        match self {
            Subspace::Full => T::zero(),
            _ => u.distance(&self.project(u)),
        }
    }
}

/// Raw ingredients of a coupled inclusion problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec<T> {
    pub signature: SpaceSignature,
    pub a_ops: Vec<MonotoneOp<T>>,
    pub b_ops: Vec<MonotoneOp<T>>,
    pub coupling: CouplingMap<T>,
    pub z_star: BlockVector<T>,
    pub r: BlockVector<T>,
    pub subspace: SubspaceSpec<T>,
    /// Test fixtures asserted to lie in `Z`; never used by the solve path.
    pub known_z_points: Vec<PrimalDualPoint<T>>,
}

/// A validated problem with its compiled subspace projector.
#[derive(Debug, Clone)]
pub struct Problem<T> {
    spec: ProblemSpec<T>,
    projector: Subspace<T>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(spec: ProblemSpec<T>) -> Result<Self> {
        let sig = &spec.signature;
        if spec.a_ops.len() != sig.m() {
            return Err(Error::config(format!(
                "A_ops has {} operators for {} primal blocks",
                spec.a_ops.len(),
                sig.m()
            )));
        }
        if spec.b_ops.len() != sig.p() {
            return Err(Error::config(format!(
                "B_ops has {} operators for {} dual blocks",
                spec.b_ops.len(),
                sig.p()
            )));
        }
        for (i, (op, &d)) in spec.a_ops.iter().zip(sig.primal_dims()).enumerate() {
            if op.dim() != d {
                return Err(Error::dim(format!(
                    "A_ops[{i}] has dimension {}, primal block has {d}",
                    op.dim()
                )));
            }
        }
        for (k, (op, &g)) in spec.b_ops.iter().zip(sig.dual_dims()).enumerate() {
            if op.dim() != g {
                return Err(Error::dim(format!(
                    "B_ops[{k}] has dimension {}, dual block has {g}",
                    op.dim()
                )));
            }
        }
        if spec.coupling.signature() != sig {
            return Err(Error::dim("coupling map built for a different signature"));
        }
        spec.z_star
            .check_dims(sig.primal_dims())
            .map_err(|e| Error::dim(format!("z_star: {e}")))?;
        spec.r
            .check_dims(sig.dual_dims())
            .map_err(|e| Error::dim(format!("r: {e}")))?;
        let projector = Subspace::compile(&spec.subspace, &spec)?;
        let problem = Problem { spec, projector };
        let tol = T::lit(FIXTURE_KT_TOL);
        for (j, z) in problem.spec.known_z_points.iter().enumerate() {
            z.check_signature(problem.signature())
                .map_err(|e| Error::dim(format!("known_Z_points[{j}]: {e}")))?;
            let res = kt_residual(&problem, z)?;
            if let Some((what, value)) = res.worst() {
                if value > tol {
                    return Err(Error::config(format!(
                        "known_Z_points[{j}] fails the Kuhn-Tucker test: {what} residual {value:e}"
                    )));
                }
            }
            let sub = problem.projector.residual(z);
            if sub > tol * (T::one() + z.norm()) {
                return Err(Error::config(format!(
                    "known_Z_points[{j}] lies outside the subspace (residual {sub:e})"
                )));
            }
        }
        Ok(problem)
    }

    pub fn spec(&self) -> &ProblemSpec<T> {
        &self.spec
    }

    pub fn signature(&self) -> &SpaceSignature {
        &self.spec.signature
    }

    pub fn a_ops(&self) -> &[MonotoneOp<T>] {
        &self.spec.a_ops
    }

    pub fn b_ops(&self) -> &[MonotoneOp<T>] {
        &self.spec.b_ops
    }

    pub fn coupling(&self) -> &CouplingMap<T> {
        &self.spec.coupling
    }

    pub fn z_star(&self) -> &BlockVector<T> {
        &self.spec.z_star
    }

    pub fn r(&self) -> &BlockVector<T> {
        &self.spec.r
    }

    pub fn subspace(&self) -> &Subspace<T> {
        &self.projector
    }

    pub fn known_z_points(&self) -> &[PrimalDualPoint<T>] {
        &self.spec.known_z_points
    }

    pub fn subspace_project(&self, u: &PrimalDualPoint<T>) -> PrimalDualPoint<T> {
        self.projector.project(u)
    }
}

/// Orthogonal projection onto `𝒦` described by `spec`.
pub fn subspace_project<T: Scalar>(problem: &Problem<T>, point: &PrimalDualPoint<T>) -> Result<PrimalDualPoint<T>> {
    point.check_signature(problem.signature())?;
    Ok(problem.subspace_project(point))
}

/// Per-condition Kuhn-Tucker residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct KtResidual<T> {
    /// `‖x_i − J_{A_i}(x_i + z*_i − Σ_k L_kiᵀ v*_k)‖`
    pub primal: Vec<T>,
    /// `‖u_k − J_{B_k}(u_k + v*_k)‖` with `u_k = Σ_i L_ki x_i − r_k`
    pub dual: Vec<T>,
}

impl<T: Scalar> KtResidual<T> {
    pub fn max(&self) -> T {
        self.primal
            .iter()
            .chain(&self.dual)
            .fold(T::zero(), |m, &v| m.max(v))
    }

    /// Name and value of the largest residual.
    pub fn worst(&self) -> Option<(String, T)> {
        let p = self
            .primal
            .iter()
            .enumerate()
            .map(|(i, &v)| (format!("A_{i}"), v));
        let d = self
            .dual
            .iter()
            .enumerate()
            .map(|(k, &v)| (format!("B_{k}"), v));
        p.chain(d)
            .fold(None, |best: Option<(String, T)>, (name, v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((name, v)),
            })
    }
}

pub fn kt_residual<T: Scalar>(problem: &Problem<T>, point: &PrimalDualPoint<T>) -> Result<KtResidual<T>> {
    point.check_signature(problem.signature())?;
    let l = problem.coupling();
    let primal = (0..problem.signature().m())
        .map(|i| {
            let lt = l.adjoint_block(i, &point.dual);
            let w: Vec<T> = problem
                .z_star()
                .block(i)
                .iter()
                .zip(&lt)
                .map(|(&z, &v)| z - v)
                .collect();
            problem.a_ops()[i].membership_residual(point.primal.block(i), &w)
        })
        .collect::<Result<Vec<T>>>()?;
    let dual = (0..problem.signature().p())
        .map(|k| {
            let lx = l.forward_block(k, &point.primal);
            let u: Vec<T> = lx
                .iter()
                .zip(problem.r().block(k))
                .map(|(&a, &b)| a - b)
                .collect();
            problem.b_ops()[k].membership_residual(&u, point.dual.block(k))
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(KtResidual { primal, dual })
}

/// The half-space `{u ∈ 𝒦 : ⟨x, t*⟩ + ⟨t, v*⟩ ≤ η}`; `τ = ‖t*‖² + ‖t‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Separator<T> {
    pub t_star: BlockVector<T>,
    pub t: BlockVector<T>,
    pub eta: T,
    pub tau: T,
}

impl<T: Scalar> Separator<T> {
    /// Projects a raw direction `s*` onto `𝒦` and assembles the separator.
    pub fn from_raw(raw: &PrimalDualPoint<T>, eta: T, problem: &Problem<T>) -> Self {
        let t = problem.subspace_project(raw);
        let tau = t.primal.norm_sq() + t.dual.norm_sq();
        Separator {
            t_star: t.primal,
            t: t.dual,
            eta,
            tau,
        }
    }

    pub fn direction(&self) -> PrimalDualPoint<T> {
        PrimalDualPoint::new(self.t_star.clone(), self.t.clone())
    }

    /// `⟨x, t*⟩ + ⟨t, v*⟩ − η`; positive when `u` lies outside.
    pub fn signed_violation(&self, u: &PrimalDualPoint<T>) -> T {
        u.primal.inner_unchecked(&self.t_star) + self.t.inner_unchecked(&u.dual) - self.eta
    }
}

fn check_graph_points<T: Scalar>(a: &[GraphPoint<T>], b: &[GraphPoint<T>], problem: &Problem<T>) -> Result<()> {
    let sig = problem.signature();
    if a.len() != sig.m() || b.len() != sig.p() {
        return Err(Error::dim(format!(
            "separator needs {} primal and {} dual graph points, got {} and {}",
            sig.m(),
            sig.p(),
            a.len(),
            b.len()
        )));
    }
    for (i, (gp, &d)) in a.iter().zip(sig.primal_dims()).enumerate() {
        if gp.point.len() != d || gp.dual.len() != d {
            return Err(Error::dim(format!("primal graph point {i} does not have dimension {d}")));
        }
    }
    for (k, (gp, &g)) in b.iter().zip(sig.dual_dims()).enumerate() {
        if gp.point.len() != g || gp.dual.len() != g {
            return Err(Error::dim(format!("dual graph point {k} does not have dimension {g}")));
        }
    }
    Ok(())
}

/// Unprojected direction `s* = (a* + L*b*, b − La)`.
pub fn raw_direction<T: Scalar>(a: &[GraphPoint<T>], b: &[GraphPoint<T>], problem: &Problem<T>) -> Result<PrimalDualPoint<T>> {
    check_graph_points(a, b, problem)?;
    Ok(raw_direction_unchecked(a, b, problem))
}

pub(crate) fn raw_direction_unchecked<T: Scalar>(
    a: &[GraphPoint<T>],
    b: &[GraphPoint<T>],
    problem: &Problem<T>,
) -> PrimalDualPoint<T> {
    let l = problem.coupling();
    let b_dual = BlockVector::from_blocks(b.iter().map(|gp| gp.dual.clone()).collect());
    let a_point = BlockVector::from_blocks(a.iter().map(|gp| gp.point.clone()).collect());
    let primal = a
        .iter()
        .enumerate()
        .map(|(i, gp)| {
            let lt = l.adjoint_block(i, &b_dual);
            gp.dual.iter().zip(&lt).map(|(&x, &y)| x + y).collect()
        })
        .collect();
    let dual = b
        .iter()
        .enumerate()
        .map(|(k, gp)| {
            let la = l.forward_block(k, &a_point);
            gp.point.iter().zip(&la).map(|(&x, &y)| x - y).collect()
        })
        .collect();
    PrimalDualPoint::new(BlockVector::from_blocks(primal), BlockVector::from_blocks(dual))
}

/// `η = Σ_i ⟨a_i, a*_i⟩ + Σ_k ⟨b_k, b*_k⟩`.
pub fn separator_offset<T: Scalar>(a: &[GraphPoint<T>], b: &[GraphPoint<T>]) -> T {
    let pa = a
        .iter()
        .fold(T::zero(), |s, gp| s + crate::scalar::dot(&gp.point, &gp.dual));
    b.iter()
        .fold(pa, |s, gp| s + crate::scalar::dot(&gp.point, &gp.dual))
}

pub fn build_separator<T: Scalar>(a: &[GraphPoint<T>], b: &[GraphPoint<T>], problem: &Problem<T>) -> Result<Separator<T>> {
    let raw = raw_direction(a, b, problem)?;
    Ok(Separator::from_raw(&raw, separator_offset(a, b), problem))
}

/// When `s* = 0` (to `tol · (1 + scale)`), `(a, b*)` is a Kuhn-Tucker point.
pub fn detect_exact_solution<T: Scalar>(
    raw: &PrimalDualPoint<T>,
    scale: T,
    tol: T,
    a: &[GraphPoint<T>],
    b: &[GraphPoint<T>],
) -> Option<PrimalDualPoint<T>> {
    if raw.norm() <= tol * (T::one() + scale) {
        Some(PrimalDualPoint::new(
            BlockVector::from_blocks(a.iter().map(|gp| gp.point.clone()).collect()),
            BlockVector::from_blocks(b.iter().map(|gp| gp.dual.clone()).collect()),
        ))
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceStep<T> {
    pub theta: T,
    /// `max{0, ⟨x, t*⟩ + ⟨t, v*⟩ − η}` at the current point.
    pub violation: T,
    pub next: PrimalDualPoint<T>,
}

/// Relaxed projection onto the separator: `u − θ t` with
/// `θ = (λ/τ) max{0, ⟨x, t*⟩ + ⟨t, v*⟩ − η}`, or `θ = 0` when `τ` is
/// negligible (`τ ≤ tau_zero_factor · (1 + η²)`).
pub fn project_halfspace<T: Scalar>(
    current: &PrimalDualPoint<T>,
    sep: &Separator<T>,
    lambda: T,
    tau_zero_factor: T,
) -> HalfspaceStep<T> {
    let violation = sep.signed_violation(current).max(T::zero());
    if sep.tau <= tau_zero_factor * (T::one() + sep.eta * sep.eta) {
        return HalfspaceStep {
            theta: T::zero(),
            violation,
            next: current.clone(),
        };
    }
    let theta = lambda / sep.tau * violation;
    let next = PrimalDualPoint::new(
        current.primal.sub_scaled(theta, &sep.t_star),
        current.dual.sub_scaled(theta, &sep.t),
    );
    HalfspaceStep {
        theta,
        violation,
        next,
    }
}
