//! Brute-force and closed-form reference computations.
//!
//! Nothing here is used on the solve path. The tests, the acceptance suite
//! and the `check-kt` subcommand use these to obtain ground truth that does
//! not depend on the resolvent code.

use crate::error::{Error, Result};
use crate::operators::OperatorKind;
use crate::scalar;
use crate::separator::Problem;

/// Result of [`grid_minimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimum {
    pub argmin: Vec<f64>,
    pub value: f64,
    /// The coarse argmin sat on the boundary of the box, which usually means
    /// the objective decreases beyond it.
    pub on_boundary: bool,
}

fn grid_axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step).round() as usize;
    let mut axis: Vec<f64> = (0..=count).map(|j| lo + j as f64 * step).collect();
    for a in &mut axis {
        *a = a.clamp(lo, hi);
    }
    axis
}

fn scan(objective: &impl Fn(&[f64]) -> f64, axes: &[Vec<f64>]) -> (Vec<f64>, f64, Vec<usize>) {
    let mut best = (Vec::new(), f64::INFINITY, Vec::new());
    let mut idx = vec![0usize; axes.len()];
    let mut x: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    loop {
        let v = objective(&x);
        if v < best.1 {
            best = (x.clone(), v, idx.clone());
        }
        let mut d = 0;
        loop {
            if d == axes.len() {
                return best;
            }
            idx[d] += 1;
            if idx[d] < axes[d].len() {
                x[d] = axes[d][idx[d]];
                break;
            }
            idx[d] = 0;
            x[d] = axes[d][0];
            d += 1;
        }
    }
}

/// Minimises `objective` over a grid of spacing `step` on the box `bounds`
/// (one or two coordinates), then rescans a window of one coarse cell around
/// the coarse argmin at ten times the resolution.
pub fn grid_minimize(
    objective: impl Fn(&[f64]) -> f64,
    bounds: &[(f64, f64)],
    step: f64,
) -> Result<GridMinimum> {
    if bounds.is_empty() || bounds.len() > 2 {
        return Err(Error::config(format!(
            "grid search supports 1 or 2 coordinates, got {}",
            bounds.len()
        )));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::config(format!("grid step must be positive, got {step}")));
    }
    if let Some(&(lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
        return Err(Error::config(format!("invalid grid bounds [{lo}, {hi}]")));
    }
    let axes: Vec<Vec<f64>> = bounds.iter().map(|&(lo, hi)| grid_axis(lo, hi, step)).collect();
    let (coarse, coarse_val, idx) = scan(&objective, &axes);
    if !coarse_val.is_finite() {
        return Err(Error::Numerical("objective is not finite anywhere on the grid".into()));
    }
    let on_boundary = idx.iter().zip(&axes).any(|(&j, a)| j == 0 || j + 1 == a.len());
    let fine: Vec<Vec<f64>> = coarse
        .iter()
        .zip(bounds)
        .map(|(&c, &(lo, hi))| {
            let (a, b) = ((c - step).max(lo), (c + step).min(hi));
            grid_axis(a, b, step / 10.0)
        })
        .collect();
    let (argmin, value, _) = scan(&objective, &fine);
    let (argmin, value) = if value <= coarse_val {
        (argmin, value)
    } else {
        (coarse, coarse_val)
    };
    Ok(GridMinimum {
        argmin,
        value,
        on_boundary,
    })
}

fn kind_value(kind: &OperatorKind<f64>, x: &[f64]) -> Option<f64> {
    match kind {
        OperatorKind::Zero => Some(0.0),
        OperatorKind::L1Norm { weight } => Some(weight * x.iter().map(|v| v.abs()).sum::<f64>()),
        OperatorKind::BoxIndicator { lo, hi } => {
            let inside = x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l <= v && v <= h);
            Some(if inside { 0.0 } else { f64::INFINITY })
        }
        OperatorKind::Quadratic { q_mat, q_vec } => {
            let qx = q_mat.mul_vec(x);
            Some(0.5 * scalar::dot(x, &qx) + scalar::dot(q_vec, x))
        }
        _ => None,
    }
}

/// The primal objective `Σ f_i(x_i) − ⟨x_i, z*_i⟩ + Σ g_k(Σ_i L_ki x_i − r_k)`
/// over the flattened primal vector, when every operator is the
/// subdifferential of a function in the registry.
pub fn primal_objective(problem: &Problem<f64>) -> Option<impl Fn(&[f64]) -> f64 + '_> {
    let all = problem.a_ops().iter().chain(problem.b_ops());
    if !all.clone().all(|op| op.is_prox_representable()) {
        return None;
    }
    let dims = problem.signature().primal_dims().to_vec();
    Some(move |flat: &[f64]| {
        let x = crate::blockspace::BlockVector::unflatten(flat, &dims).expect("flat primal length");
        let mut total = 0.0;
        for (i, op) in problem.a_ops().iter().enumerate() {
            let xi = x.block(i);
            total += kind_value(op.kind(), xi).unwrap_or(f64::INFINITY)
                - scalar::dot(xi, problem.z_star().block(i));
        }
        for (k, op) in problem.b_ops().iter().enumerate() {
            let y = scalar::sub(&problem.coupling().forward_block(k, &x), problem.r().block(k));
            total += kind_value(op.kind(), &y).unwrap_or(f64::INFINITY);
        }
        total
    })
}

/// Projection of `x` onto `{h : ⟨n₁, h⟩ ≤ c₁} ∩ {h : ⟨n₂, h⟩ ≤ c₂}` by trying
/// each active set and keeping the closest feasible candidate.
pub fn project_intersection_two_halfspaces(
    x: &[f64],
    h1: (&[f64], f64),
    h2: (&[f64], f64),
) -> Result<Vec<f64>> {
    let (n1, c1) = h1;
    let (n2, c2) = h2;
    if n1.len() != x.len() || n2.len() != x.len() {
        return Err(Error::dim("half-space normal length differs from the point"));
    }
    let feasible = |h: &[f64]| {
        [(n1, c1), (n2, c2)].iter().all(|&(n, c)| {
            let slack = 1e-12 * (1.0 + c.abs() + scalar::norm(n) * scalar::norm(h));
            scalar::dot(n, h) - c <= slack
        })
    };
    let mut candidates = vec![x.to_vec()];
    for &(n, c) in &[(n1, c1), (n2, c2)] {
        let nn = scalar::norm_sq(n);
        if nn > 0.0 {
            let excess = scalar::dot(n, x) - c;
            candidates.push(scalar::sub(x, &scalar::scale(excess / nn, n)));
        }
    }
    // both active: x − α n₁ − β n₂ with the Gram system for (α, β)
    let g11 = scalar::norm_sq(n1);
    let g22 = scalar::norm_sq(n2);
    let g12 = scalar::dot(n1, n2);
    let det = g11 * g22 - g12 * g12;
    if det > 1e-14 * (g11 * g22).max(f64::MIN_POSITIVE) {
        let e1 = scalar::dot(n1, x) - c1;
        let e2 = scalar::dot(n2, x) - c2;
        let alpha = (e1 * g22 - e2 * g12) / det;
        let beta = (e2 * g11 - e1 * g12) / det;
        let shift = scalar::add(&scalar::scale(alpha, n1), &scalar::scale(beta, n2));
        candidates.push(scalar::sub(x, &shift));
    }
    candidates
        .into_iter()
        .filter(|h| feasible(h))
        .min_by(|a, b| scalar::dist(a, x).total_cmp(&scalar::dist(b, x)))
        .ok_or_else(|| Error::Inconsistent("the two half-spaces do not intersect".into()))
}

/// Projection of `(x0, v0)` onto `[−1, 1] × {0}`, the Kuhn-Tucker set of the
/// best-approximation fixture.
pub fn closed_form_z_box(x0: f64, _v0: f64) -> (f64, f64) {
    (x0.clamp(-1.0, 1.0), 0.0)
}
