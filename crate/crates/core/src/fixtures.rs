//! Small problems with known Kuhn-Tucker sets, shared by tests, the
//! acceptance suite and the CLI's `example` subcommand.

use crate::blockspace::{BlockVector, CouplingMap, PrimalDualPoint, SpaceSignature};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::operators::MonotoneOp;
use crate::scalar::Scalar;
use crate::separator::{Problem, ProblemSpec, SubspaceSpec};

fn point<T: Scalar>(x: &[f64], v: &[f64]) -> PrimalDualPoint<T> {
    PrimalDualPoint::new(
        BlockVector::from_blocks(vec![x.iter().map(|&a| T::lit(a)).collect()]),
        BlockVector::from_blocks(vec![v.iter().map(|&a| T::lit(a)).collect()]),
    )
}

fn lit_vec<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&a| T::lit(a)).collect()
}

fn lit_mat<T: Scalar>(rows: &[&[f64]]) -> Matrix<T> {
    Matrix::from_rows(&rows.iter().map(|r| lit_vec(r)).collect::<Vec<_>>()).expect("fixture matrix")
}

/// `A = ∂|·|`, `B = Id`, `L = 1`, `z* = r = 0` on ℝ; `Z = {(0, 0)}`.
pub fn scalar_inclusion<T: Scalar>() -> Result<Problem<T>> {
    let sig = SpaceSignature::new(vec![1], vec![1])?;
    let mut coupling = CouplingMap::new(sig.clone());
    coupling.insert(0, 0, Matrix::identity(1))?;
    Problem::new(ProblemSpec {
        signature: sig,
        a_ops: vec![MonotoneOp::l1_norm(1, T::one())?],
        b_ops: vec![MonotoneOp::affine_monotone(Matrix::identity(1), vec![T::zero()])?],
        coupling,
        z_star: BlockVector::zeros(&[1]),
        r: BlockVector::zeros(&[1]),
        subspace: SubspaceSpec::Full,
        known_z_points: vec![point(&[0.0], &[0.0])],
    })
}

/// `A = 0`, `B = N_[−1,1]`, `L = 1` on ℝ; `Z = [−1, 1] × {0}`.
pub fn box_best_approximation<T: Scalar>() -> Result<Problem<T>> {
    let sig = SpaceSignature::new(vec![1], vec![1])?;
    let mut coupling = CouplingMap::new(sig.clone());
    coupling.insert(0, 0, Matrix::identity(1))?;
    Problem::new(ProblemSpec {
        signature: sig,
        a_ops: vec![MonotoneOp::zero(1)],
        b_ops: vec![MonotoneOp::normal_cone_box(vec![-T::one()], vec![T::one()])?],
        coupling,
        z_star: BlockVector::zeros(&[1]),
        r: BlockVector::zeros(&[1]),
        subspace: SubspaceSpec::Full,
        known_z_points: vec![
            point(&[-1.0], &[0.0]),
            point(&[0.0], &[0.0]),
            point(&[0.5], &[0.0]),
            point(&[1.0], &[0.0]),
        ],
    })
}

/// `minimize ‖x‖₁ + ½‖x − (2, 1)‖²` on ℝ² with `L = I`; the minimiser is
/// `(1, 0)` with dual `v* = x − (2, 1) = (−1, −1)`.
pub fn l1_quadratic_2d<T: Scalar>() -> Result<Problem<T>> {
    let sig = SpaceSignature::new(vec![2], vec![2])?;
    let mut coupling = CouplingMap::new(sig.clone());
    coupling.insert(0, 0, Matrix::identity(2))?;
    Problem::new(ProblemSpec {
        signature: sig,
        a_ops: vec![MonotoneOp::l1_norm(2, T::one())?],
        b_ops: vec![MonotoneOp::quadratic(Matrix::identity(2), lit_vec(&[-2.0, -1.0]))?],
        coupling,
        z_star: BlockVector::zeros(&[2]),
        r: BlockVector::zeros(&[2]),
        subspace: SubspaceSpec::Full,
        known_z_points: vec![point(&[1.0, 0.0], &[-1.0, -1.0])],
    })
}

/// One linear primal block and two dual blocks:
/// `minimize ½xᵀQx + ½‖x − c‖² + 0.3‖Kx‖₁` with
/// `Q = [[2, 0.5], [0.5, 1]]`, `c = (1, −2)`, `K = [[1, 1], [0, 1]]`.
/// `A_1 = Q` is linear and `z* = 0`, so the structured subspace applies.
pub fn linear_primal_problem<T: Scalar>(subspace: SubspaceSpec<T>) -> Result<Problem<T>> {
    let sig = SpaceSignature::new(vec![2], vec![2, 2])?;
    let mut coupling = CouplingMap::new(sig.clone());
    coupling.insert(0, 0, Matrix::identity(2))?;
    coupling.insert(1, 0, lit_mat(&[&[1.0, 1.0], &[0.0, 1.0]]))?;
    Problem::new(ProblemSpec {
        signature: sig,
        a_ops: vec![MonotoneOp::quadratic(
            lit_mat(&[&[2.0, 0.5], &[0.5, 1.0]]),
            vec![T::zero(); 2],
        )?],
        b_ops: vec![
            MonotoneOp::quadratic(Matrix::identity(2), lit_vec(&[-1.0, 2.0]))?,
            MonotoneOp::l1_norm(2, T::lit(0.3))?,
        ],
        coupling,
        z_star: BlockVector::zeros(&[2]),
        r: BlockVector::zeros(&[2, 2]),
        subspace,
        known_z_points: vec![],
    })
}

/// The primal objective of [`linear_primal_problem`], for grid oracles.
pub fn linear_primal_objective(x: &[f64]) -> f64 {
    let qx = [2.0 * x[0] + 0.5 * x[1], 0.5 * x[0] + x[1]];
    let quad = 0.5 * (x[0] * qx[0] + x[1] * qx[1]);
    let fit = 0.5 * ((x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2));
    let l1 = 0.3 * ((x[0] + x[1]).abs() + x[1].abs());
    quad + fit + l1
}
