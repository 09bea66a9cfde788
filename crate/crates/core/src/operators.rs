//! Closed registry of maximally monotone operators with exact resolvents.
//!
//! Every kind in [`OperatorKind`] has a closed-form (or single linear solve)
//! resolvent `J_{γA} = (Id + γA)⁻¹`. The primal and dual graph-point
//! constructors are the per-block activations of the splitting engines; the
//! membership test relies only on the resolvent characterisation
//! `w ∈ A u ⇔ u = J_A(u + w)`.
//!
//! Adding a kind means extending [`OperatorKind`], `resolvent`, and (when it
//! is a subdifferential) `value`.

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::scalar::{self, Scalar};

/// Eigenvalue floor below which a symmetric matrix is rejected as not PSD.
pub const PSD_EIGEN_FLOOR: f64 = -1e-10;

/// Default membership tolerance, scaled by `1 + ‖point‖`.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind<T> {
    /// `A = 0`.
    Zero,
    /// `∂(w‖·‖₁)`.
    L1Norm { weight: T },
    /// `∂ι_[lo,hi]`, the subdifferential of the box indicator.
    BoxIndicator { lo: Vec<T>, hi: Vec<T> },
    /// `∇(½xᵀQx + qᵀx)` with `Q` symmetric PSD.
    Quadratic { q_mat: Matrix<T>, q_vec: Vec<T> },
    /// `x ↦ Mx + c` with `M + Mᵀ` PSD.
    AffineMonotone { m_mat: Matrix<T>, c: Vec<T> },
    /// Normal cone of a box; same graph as [`OperatorKind::BoxIndicator`] but
    /// not flagged as a proximity operator.
    NormalConeBox { lo: Vec<T>, hi: Vec<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneOp<T> {
    kind: OperatorKind<T>,
    dim: usize,
}

fn check_box<T: Scalar>(lo: &[T], hi: &[T], dim: usize) -> Result<()> {
    if lo.len() != dim || hi.len() != dim {
        return Err(Error::dim(format!(
            "box bounds have lengths {}/{}, expected {dim}",
            lo.len(),
            hi.len()
        )));
    }
    if let Some(j) = lo.iter().zip(hi).position(|(&l, &h)| !(l <= h)) {
        return Err(Error::config(format!("box bound lo > hi at coordinate {j}")));
    }
    Ok(())
}

fn check_psd<T: Scalar>(sym: &Matrix<T>, what: &str) -> Result<()> {
    let eig = symmetric_eigenvalues(sym);
    if let Some(&min) = eig.first() {
        if min < T::lit(PSD_EIGEN_FLOOR) {
            return Err(Error::config(format!(
                "{what} is not positive semidefinite (smallest eigenvalue {min:e})"
            )));
        }
    }
    Ok(())
}

impl<T: Scalar> MonotoneOp<T> {
    /// Validates `kind` against `dim` and the monotonicity requirements.
    pub fn new(kind: OperatorKind<T>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("operator dimension must be positive"));
        }
        match &kind {
            OperatorKind::Zero => {}
            OperatorKind::L1Norm { weight } => {
                if !(*weight > T::zero()) || !weight.is_finite() {
                    return Err(Error::config(format!(
                        "l1_norm weight must be positive, got {weight}"
                    )));
                }
            }
            OperatorKind::BoxIndicator { lo, hi } | OperatorKind::NormalConeBox { lo, hi } => {
                check_box(lo, hi, dim)?
            }
            OperatorKind::Quadratic { q_mat, q_vec } => {
                if q_mat.shape() != (dim, dim) || q_vec.len() != dim {
                    return Err(Error::dim(format!(
                        "quadratic Q is {:?} and q has length {}, expected dimension {dim}",
                        q_mat.shape(),
                        q_vec.len()
                    )));
                }
                if !q_mat.is_symmetric(T::lit(1e-12)) {
                    return Err(Error::config("quadratic Q is not symmetric"));
                }
                check_psd(q_mat, "quadratic Q")?;
            }
            OperatorKind::AffineMonotone { m_mat, c } => {
                if m_mat.shape() != (dim, dim) || c.len() != dim {
                    return Err(Error::dim(format!(
                        "affine M is {:?} and c has length {}, expected dimension {dim}",
                        m_mat.shape(),
                        c.len()
                    )));
                }
                check_psd(&m_mat.symmetric_part(), "affine M + Mᵀ")?;
            }
        }
        Ok(MonotoneOp { kind, dim })
    }

    pub fn zero(dim: usize) -> Self {
        MonotoneOp {
            kind: OperatorKind::Zero,
            dim,
        }
    }

    pub fn l1_norm(dim: usize, weight: T) -> Result<Self> {
        Self::new(OperatorKind::L1Norm { weight }, dim)
    }

    pub fn box_indicator(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        let dim = lo.len();
        Self::new(OperatorKind::BoxIndicator { lo, hi }, dim)
    }

    pub fn normal_cone_box(lo: Vec<T>, hi: Vec<T>) -> Result<Self> {
        let dim = lo.len();
        Self::new(OperatorKind::NormalConeBox { lo, hi }, dim)
    }

    pub fn quadratic(q_mat: Matrix<T>, q_vec: Vec<T>) -> Result<Self> {
        let dim = q_vec.len();
        Self::new(OperatorKind::Quadratic { q_mat, q_vec }, dim)
    }

    pub fn affine_monotone(m_mat: Matrix<T>, c: Vec<T>) -> Result<Self> {
        let dim = c.len();
        Self::new(OperatorKind::AffineMonotone { m_mat, c }, dim)
    }

    pub fn kind(&self) -> &OperatorKind<T> {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            OperatorKind::Zero => "zero",
            OperatorKind::L1Norm { .. } => "l1_norm",
            OperatorKind::BoxIndicator { .. } => "box_indicator",
            OperatorKind::Quadratic { .. } => "quadratic",
            OperatorKind::AffineMonotone { .. } => "affine_monotone",
            OperatorKind::NormalConeBox { .. } => "normal_cone_box",
        }
    }

    /// True for kinds declared as subdifferentials `∂f`, whose resolvent is
    /// Moreau's proximity operator.
    pub fn is_prox_representable(&self) -> bool {
        matches!(
            self.kind,
            OperatorKind::Zero
                | OperatorKind::L1Norm { .. }
                | OperatorKind::BoxIndicator { .. }
                | OperatorKind::Quadratic { .. }
        )
    }

    /// The matrix of a linear operator (zero, quadratic with `q = 0`, affine with `c = 0`).
    pub fn linear_matrix(&self) -> Option<Matrix<T>> {
        match &self.kind {
            OperatorKind::Zero => Some(Matrix::zeros(self.dim, self.dim)),
            OperatorKind::Quadratic { q_mat, q_vec } if q_vec.iter().all(|v| *v == T::zero()) => {
                Some(q_mat.clone())
            }
            OperatorKind::AffineMonotone { m_mat, c } if c.iter().all(|v| *v == T::zero()) => {
                Some(m_mat.clone())
            }
            _ => None,
        }
    }

    /// Value of `f` for prox-representable kinds (`+∞` outside a box);
    /// `None` for operators that are not declared subdifferentials.
    pub fn value(&self, x: &[T]) -> Option<T> {
        match &self.kind {
            OperatorKind::Zero => Some(T::zero()),
            OperatorKind::L1Norm { weight } => {
                Some(*weight * x.iter().fold(T::zero(), |s, v| s + v.abs()))
            }
            OperatorKind::BoxIndicator { lo, hi } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .all(|(&v, (&l, &h))| l <= v && v <= h);
                Some(if inside { T::zero() } else { T::infinity() })
            }
            OperatorKind::Quadratic { q_mat, q_vec } => {
                let qx = q_mat.mul_vec(x);
                Some(T::lit(0.5) * scalar::dot(x, &qx) + scalar::dot(q_vec, x))
            }
            OperatorKind::AffineMonotone { .. } | OperatorKind::NormalConeBox { .. } => None,
        }
    }

    /// `J_{γA}(u)`: the unique `a` with `u − a ∈ γ A a`.
    pub fn resolvent(&self, gamma: T, u: &[T]) -> Result<Vec<T>> {
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return Err(Error::config(format!(
                "resolvent step must be positive and finite, got {gamma}"
            )));
        }
        if u.len() != self.dim {
            return Err(Error::dim(format!(
                "resolvent of {}-dimensional {} applied to vector of length {}",
                self.dim,
                self.name(),
                u.len()
            )));
        }
        Ok(match &self.kind {
            OperatorKind::Zero => u.to_vec(),
            OperatorKind::L1Norm { weight } => {
                let t = gamma * *weight;
                u.iter()
                    .map(|&v| v.signum() * (v.abs() - t).max(T::zero()))
                    .map(|v| if v == T::zero() { T::zero() } else { v })
                    .collect()
            }
            OperatorKind::BoxIndicator { lo, hi } | OperatorKind::NormalConeBox { lo, hi } => u
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&v, (&l, &h))| v.max(l).min(h))
                .collect(),
            OperatorKind::Quadratic { q_mat, q_vec } => {
                let rhs: Vec<T> = u.iter().zip(q_vec).map(|(&v, &q)| v - gamma * q).collect();
                q_mat.shifted_identity(gamma).solve(&rhs)?
            }
            OperatorKind::AffineMonotone { m_mat, c } => {
                let rhs: Vec<T> = u.iter().zip(c).map(|(&v, &ci)| v - gamma * ci).collect();
                m_mat.shifted_identity(gamma).solve(&rhs)?
            }
        })
    }

    /// `‖u − J_A(u + w)‖`, zero exactly when `w ∈ A u`.
    pub fn membership_residual(&self, point: &[T], dual: &[T]) -> Result<T> {
        if point.len() != self.dim || dual.len() != self.dim {
            return Err(Error::dim(format!(
                "graph point of lengths {}/{} for {}-dimensional operator",
                point.len(),
                dual.len(),
                self.dim
            )));
        }
        let shifted = scalar::add(point, dual);
        let back = self.resolvent(T::one(), &shifted)?;
        Ok(scalar::dist(point, &back))
    }
}

/// A pair `(point, dual)` produced by one operator activation.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPoint<T> {
    pub point: Vec<T>,
    pub dual: Vec<T>,
}

impl<T: Scalar> GraphPoint<T> {
    pub fn new(point: Vec<T>, dual: Vec<T>) -> Self {
        GraphPoint { point, dual }
    }

    pub fn zeros(dim: usize) -> Self {
        GraphPoint {
            point: vec![T::zero(); dim],
            dual: vec![T::zero(); dim],
        }
    }
}

/// True iff `gp.dual ∈ op(gp.point)` up to `tol · (1 + ‖point‖)`.
pub fn check_graph_membership<T: Scalar>(op: &MonotoneOp<T>, gp: &GraphPoint<T>, tol: T) -> bool {
    match op.membership_residual(&gp.point, &gp.dual) {
        Ok(r) => r <= tol * (T::one() + scalar::norm(&gp.point)),
        Err(_) => false,
    }
}

/// Residual of `(a, z* + a*) ∈ gra A`, the membership carried by primal graph points.
pub fn primal_membership_residual<T: Scalar>(
    op: &MonotoneOp<T>,
    z_star: &[T],
    gp: &GraphPoint<T>,
) -> Result<T> {
    op.membership_residual(&gp.point, &scalar::add(&gp.dual, z_star))
}

/// Residual of `(b − r, b*) ∈ gra B`, the membership carried by dual graph points.
pub fn dual_membership_residual<T: Scalar>(
    op: &MonotoneOp<T>,
    r: &[T],
    gp: &GraphPoint<T>,
) -> Result<T> {
    op.membership_residual(&scalar::sub(&gp.point, r), &gp.dual)
}

fn check_len<T>(what: &str, v: &[T], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::dim(format!(
            "{what} has length {}, expected {dim}",
            v.len()
        )));
    }
    Ok(())
}

/// Primal activation: `a = J_{γA}(x + γ(z* − l*))`, `a* = (x − a)/γ − l*`.
pub fn graph_point_primal<T: Scalar>(
    op: &MonotoneOp<T>,
    z_star: &[T],
    gamma: T,
    x_lag: &[T],
    lstar: &[T],
) -> Result<GraphPoint<T>> {
    perturbed_graph_point_primal(op, z_star, gamma, x_lag, lstar, None)
}

/// Primal activation with resolvent error `e`:
/// `a = J_{γA}(x + γ(z* − l*) + e)`, `a* = (x − a + e)/γ − l*`,
/// so that `a + γ(a* + l*) = x + e`.
pub fn perturbed_graph_point_primal<T: Scalar>(
    op: &MonotoneOp<T>,
    z_star: &[T],
    gamma: T,
    x_lag: &[T],
    lstar: &[T],
    error: Option<&[T]>,
) -> Result<GraphPoint<T>> {
    let d = op.dim();
    check_len("z*", z_star, d)?;
    check_len("lagged primal block", x_lag, d)?;
    check_len("l*", lstar, d)?;
    let mut u: Vec<T> = x_lag
        .iter()
        .zip(z_star.iter().zip(lstar))
        .map(|(&x, (&z, &l))| x + gamma * (z - l))
        .collect();
    if let Some(e) = error {
        check_len("resolvent error", e, d)?;
        for (ui, &ei) in u.iter_mut().zip(e) {
            *ui += ei;
        }
    }
    let a = op.resolvent(gamma, &u)?;
    let a_dual = match error {
        None => x_lag
            .iter()
            .zip(a.iter().zip(lstar))
            .map(|(&x, (&ai, &l))| (x - ai) / gamma - l)
            .collect(),
        Some(e) => x_lag
            .iter()
            .zip(a.iter().zip(lstar.iter().zip(e)))
            .map(|(&x, (&ai, (&l, &ei)))| (x - ai + ei) / gamma - l)
            .collect(),
    };
    Ok(GraphPoint {
        point: a,
        dual: a_dual,
    })
}

/// Dual activation: `b = r + J_{μB}(l + μv* − r)`, `b* = v* + (l − b)/μ`.
pub fn graph_point_dual<T: Scalar>(
    op: &MonotoneOp<T>,
    r: &[T],
    mu: T,
    l_k: &[T],
    v_lag: &[T],
) -> Result<GraphPoint<T>> {
    perturbed_graph_point_dual(op, r, mu, l_k, v_lag, None)
}

/// Dual activation with resolvent error `f`:
/// `b = r + J_{μB}(l + μv* − r + f)`, `b* = v* + (l − b + f)/μ`,
/// so that `b + μb* = l + μv* + f`.
pub fn perturbed_graph_point_dual<T: Scalar>(
    op: &MonotoneOp<T>,
    r: &[T],
    mu: T,
    l_k: &[T],
    v_lag: &[T],
    error: Option<&[T]>,
) -> Result<GraphPoint<T>> {
    let d = op.dim();
    check_len("r", r, d)?;
    check_len("l", l_k, d)?;
    check_len("lagged dual block", v_lag, d)?;
    let mut u: Vec<T> = l_k
        .iter()
        .zip(v_lag.iter().zip(r))
        .map(|(&l, (&v, &ri))| l + mu * v - ri)
        .collect();
    if let Some(f) = error {
        check_len("resolvent error", f, d)?;
        for (ui, &fi) in u.iter_mut().zip(f) {
            *ui += fi;
        }
    }
    let j = op.resolvent(mu, &u)?;
    let b: Vec<T> = r.iter().zip(&j).map(|(&ri, &ji)| ri + ji).collect();
    let b_dual = match error {
        None => v_lag
            .iter()
            .zip(l_k.iter().zip(&b))
            .map(|(&v, (&l, &bi))| v + (l - bi) / mu)
            .collect(),
        Some(f) => v_lag
            .iter()
            .zip(l_k.iter().zip(b.iter().zip(f)))
            .map(|(&v, (&l, (&bi, &fi)))| v + (l - bi + fi) / mu)
            .collect(),
    };
    Ok(GraphPoint {
        point: b,
        dual: b_dual,
    })
}

/// Error bounds for approximate resolvent evaluations: `β, σ` for the
/// primal activations, `δ, ζ` for the dual ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InexactnessBudget<T> {
    pub beta: T,
    pub sigma: T,
    pub delta: T,
    pub zeta: T,
}

impl<T: Scalar> InexactnessBudget<T> {
    pub fn new(beta: T, sigma: T, delta: T, zeta: T) -> Result<Self> {
        let unit = |v: T| v >= T::zero() && v < T::one();
        if !(beta > T::zero()) || !(delta > T::zero()) {
            return Err(Error::config("inexact budget needs beta > 0 and delta > 0"));
        }
        if !unit(sigma) || !unit(zeta) {
            return Err(Error::config("inexact budget needs sigma, zeta in [0, 1)"));
        }
        Ok(InexactnessBudget {
            beta,
            sigma,
            delta,
            zeta,
        })
    }
}

/// Which inexactness condition a candidate violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InexactCondition {
    /// The candidate is not in the operator graph.
    Membership,
    /// `‖e‖ ≤ β` (primal) or `‖f‖ ≤ δ` (dual).
    NormBound,
    /// `⟨e, a* + l*⟩ ≤ σγ‖a* + l*‖²`.
    SigmaDual,
    /// `⟨x − a, e⟩ ≥ −σ‖x − a‖²`.
    SigmaPrimal,
    /// `⟨l − b, f⟩ ≥ −ζ‖l − b‖²`.
    ZetaPrimal,
    /// `⟨f, b* − v*⟩ ≤ ζμ‖b* − v*‖²`.
    ZetaDual,
}

impl InexactCondition {
    pub fn id(self) -> &'static str {
        match self {
            InexactCondition::Membership => "membership",
            InexactCondition::NormBound => "norm-bound",
            InexactCondition::SigmaDual => "sigma-dual",
            InexactCondition::SigmaPrimal => "sigma-primal",
            InexactCondition::ZetaPrimal => "zeta-primal",
            InexactCondition::ZetaDual => "zeta-dual",
        }
    }
}

impl std::fmt::Display for InexactCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InexactVerdict {
    Accepted,
    Violated(InexactCondition),
}

/// Checks an approximate primal graph point; conditions are tested in the
/// order membership, norm bound, σ-dual, σ-primal and the first failure is reported.
#[allow(clippy::too_many_arguments)]
pub fn validate_inexact_primal<T: Scalar>(
    op: &MonotoneOp<T>,
    candidate: &GraphPoint<T>,
    x_lag: &[T],
    lstar: &[T],
    z_star: &[T],
    gamma: T,
    budget: &InexactnessBudget<T>,
    membership_tol: T,
) -> Result<InexactVerdict> {
    let d = op.dim();
    check_len("candidate point", &candidate.point, d)?;
    check_len("candidate dual", &candidate.dual, d)?;
    check_len("lagged primal block", x_lag, d)?;
    check_len("l*", lstar, d)?;
    let res = primal_membership_residual(op, z_star, candidate)?;
    if res > membership_tol * (T::one() + scalar::norm(&candidate.point)) {
        return Ok(InexactVerdict::Violated(InexactCondition::Membership));
    }
    let dual_shift = scalar::add(&candidate.dual, lstar);
    let e: Vec<T> = candidate
        .point
        .iter()
        .zip(dual_shift.iter().zip(x_lag))
        .map(|(&a, (&s, &x))| a + gamma * s - x)
        .collect();
    if scalar::norm(&e) > budget.beta {
        return Ok(InexactVerdict::Violated(InexactCondition::NormBound));
    }
    if scalar::dot(&e, &dual_shift) > budget.sigma * gamma * scalar::norm_sq(&dual_shift) {
        return Ok(InexactVerdict::Violated(InexactCondition::SigmaDual));
    }
    let gap = scalar::sub(x_lag, &candidate.point);
    if scalar::dot(&gap, &e) < -budget.sigma * scalar::norm_sq(&gap) {
        return Ok(InexactVerdict::Violated(InexactCondition::SigmaPrimal));
    }
    Ok(InexactVerdict::Accepted)
}

/// Dual counterpart of [`validate_inexact_primal`] with `f = b + μb* − l − μv*`.
#[allow(clippy::too_many_arguments)]
pub fn validate_inexact_dual<T: Scalar>(
    op: &MonotoneOp<T>,
    candidate: &GraphPoint<T>,
    l_k: &[T],
    v_lag: &[T],
    r: &[T],
    mu: T,
    budget: &InexactnessBudget<T>,
    membership_tol: T,
) -> Result<InexactVerdict> {
    let d = op.dim();
    check_len("candidate point", &candidate.point, d)?;
    check_len("candidate dual", &candidate.dual, d)?;
    check_len("l", l_k, d)?;
    check_len("lagged dual block", v_lag, d)?;
    let res = dual_membership_residual(op, r, candidate)?;
    if res > membership_tol * (T::one() + scalar::norm(&candidate.point)) {
        return Ok(InexactVerdict::Violated(InexactCondition::Membership));
    }
    let f: Vec<T> = candidate
        .point
        .iter()
        .zip(candidate.dual.iter())
        .zip(l_k.iter().zip(v_lag))
        .map(|((&b, &bs), (&l, &v))| b + mu * bs - l - mu * v)
        .collect();
    if scalar::norm(&f) > budget.delta {
        return Ok(InexactVerdict::Violated(InexactCondition::NormBound));
    }
    let gap = scalar::sub(l_k, &candidate.point);
    if scalar::dot(&gap, &f) < -budget.zeta * scalar::norm_sq(&gap) {
        return Ok(InexactVerdict::Violated(InexactCondition::ZetaPrimal));
    }
    let dual_gap = scalar::sub(&candidate.dual, v_lag);
    if scalar::dot(&f, &dual_gap) > budget.zeta * mu * scalar::norm_sq(&dual_gap) {
        return Ok(InexactVerdict::Violated(InexactCondition::ZetaDual));
    }
    Ok(InexactVerdict::Accepted)
}
