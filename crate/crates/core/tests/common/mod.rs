#![allow(dead_code, clippy::needless_range_loop)]

use projsplit::engine::IterationRecord;
use projsplit::linalg::Matrix;
use projsplit::{
    BlockVector, CouplingMap, GraphPoint, MonotoneOp, OperatorKind, PrimalDualPoint, Problem, ProblemSpec,
    SpaceSignature, SubspaceSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn pd(x: &[f64], v: &[f64]) -> PrimalDualPoint<f64> {
    PrimalDualPoint::new(
        BlockVector::from_blocks(vec![x.to_vec()]),
        BlockVector::from_blocks(vec![v.to_vec()]),
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..a.len() {
        s += a[j] * b[j];
    }
    s
}

fn blocks_sq(u: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for b in u {
        s += dot(b, b);
    }
    s
}

/// Straight-line synchronous Fejér iteration (every block activated at every
/// step, no lag), written against raw block vectors without schedules,
/// buffers or recycling. Returns the trace the engine should produce.
pub fn reference_fejer(
    problem: &Problem<f64>,
    start: &PrimalDualPoint<f64>,
    lambda: f64,
    gamma: f64,
    mu: f64,
    max_iter: usize,
    resid_tol: f64,
) -> Vec<IterationRecord<f64>> {
    let sig = problem.signature();
    let (m, p) = (sig.m(), sig.p());
    let l = |k: usize, i: usize| problem.coupling().get(k, i);
    let forward = |k: usize, x: &[Vec<f64>]| -> Vec<f64> {
        let mut out = vec![0.0; sig.dual_dims()[k]];
        for i in 0..m {
            if let Some(mat) = l(k, i) {
                for r in 0..mat.rows() {
                    let mut s = 0.0;
                    for c in 0..mat.cols() {
                        s += mat[(r, c)] * x[i][c];
                    }
                    out[r] += s;
                }
            }
        }
        out
    };
    let adjoint = |i: usize, y: &[Vec<f64>]| -> Vec<f64> {
        let mut out = vec![0.0; sig.primal_dims()[i]];
        for k in 0..p {
            if let Some(mat) = l(k, i) {
                let mut t = vec![0.0; mat.cols()];
                for r in 0..mat.rows() {
                    for c in 0..mat.cols() {
                        t[c] += mat[(r, c)] * y[k][r];
                    }
                }
                for c in 0..t.len() {
                    out[c] += t[c];
                }
            }
        }
        out
    };

    let mut x: Vec<Vec<f64>> = start.primal.blocks().to_vec();
    let mut v: Vec<Vec<f64>> = start.dual.blocks().to_vec();
    let mut trace = Vec::new();
    let mut degenerate = 0;
    for n in 0..max_iter {
        // graph points
        let mut a = Vec::new();
        let mut a_dual = Vec::new();
        for i in 0..m {
            let ls = adjoint(i, &v);
            let z = problem.z_star().block(i);
            let u: Vec<f64> = (0..x[i].len()).map(|j| x[i][j] + gamma * (z[j] - ls[j])).collect();
            let ai = problem.a_ops()[i].resolvent(gamma, &u).unwrap();
            let ad: Vec<f64> = (0..ai.len()).map(|j| (x[i][j] - ai[j]) / gamma - ls[j]).collect();
            a.push(ai);
            a_dual.push(ad);
        }
        let mut b = Vec::new();
        let mut b_dual = Vec::new();
        for k in 0..p {
            let lk = forward(k, &x);
            let r = problem.r().block(k);
            let u: Vec<f64> = (0..lk.len()).map(|j| lk[j] + mu * v[k][j] - r[j]).collect();
            let jk = problem.b_ops()[k].resolvent(mu, &u).unwrap();
            let bk: Vec<f64> = (0..jk.len()).map(|j| r[j] + jk[j]).collect();
            let bd: Vec<f64> = (0..bk.len()).map(|j| v[k][j] + (lk[j] - bk[j]) / mu).collect();
            b.push(bk);
            b_dual.push(bd);
        }
        // separator
        let t_star: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let lb = adjoint(i, &b_dual);
                (0..lb.len()).map(|j| a_dual[i][j] + lb[j]).collect()
            })
            .collect();
        let t: Vec<Vec<f64>> = (0..p)
            .map(|k| {
                let la = forward(k, &a);
                (0..la.len()).map(|j| b[k][j] - la[j]).collect()
            })
            .collect();
        let mut eta = 0.0;
        for i in 0..m {
            eta += dot(&a[i], &a_dual[i]);
        }
        for k in 0..p {
            eta += dot(&b[k], &b_dual[k]);
        }
        let mut scale = 0.0;
        for i in 0..m {
            scale += dot(&a_dual[i], &a_dual[i]).sqrt();
        }
        for k in 0..p {
            scale += dot(&b[k], &b[k]).sqrt();
        }
        let tau = blocks_sq(&t_star) + blocks_sq(&t);
        let mut signed = 0.0;
        for i in 0..m {
            signed += dot(&x[i], &t_star[i]);
        }
        let mut dual_part = 0.0;
        for k in 0..p {
            dual_part += dot(&t[k], &v[k]);
        }
        signed = signed + dual_part - eta;
        let violation = signed.max(0.0);

        // residuals from the fresh graph points
        let (mut rp, mut rdm, mut rc, mut rd) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..m {
            let lt = adjoint(i, &v);
            let mut s = 0.0;
            for j in 0..x[i].len() {
                let d = x[i][j] - a[i][j];
                s += d * d;
            }
            rp += s;
            let mut s = 0.0;
            for j in 0..lt.len() {
                let d = a_dual[i][j] + lt[j];
                s += d * d;
            }
            rdm += s;
        }
        for k in 0..p {
            let lx = forward(k, &x);
            let mut s = 0.0;
            for j in 0..lx.len() {
                let d = lx[j] - b[k][j];
                s += d * d;
            }
            rc += s;
            let mut s = 0.0;
            for j in 0..v[k].len() {
                let d = b_dual[k][j] - v[k][j];
                s += d * d;
            }
            rd += s;
        }
        let dist_z = problem
            .known_z_points()
            .iter()
            .map(|z| {
                let mut px = 0.0;
                for i in 0..m {
                    let d: Vec<f64> = (0..x[i].len()).map(|j| x[i][j] - z.primal.block(i)[j]).collect();
                    px += dot(&d, &d);
                }
                let mut pv = 0.0;
                for k in 0..p {
                    let d: Vec<f64> = (0..v[k].len()).map(|j| v[k][j] - z.dual.block(k)[j]).collect();
                    pv += dot(&d, &d);
                }
                (px + pv).sqrt()
            })
            .collect();
        let mut record = IterationRecord {
            n,
            theta: 0.0,
            tau,
            violation,
            res_primal: rp.sqrt(),
            res_dual_map: rdm.sqrt(),
            res_coupling: rc.sqrt(),
            res_dual: rd.sqrt(),
            dist_z,
        };

        let raw_norm = (blocks_sq(&t_star) + blocks_sq(&t)).sqrt();
        if raw_norm <= 1e-12 * (1.0 + scale) {
            trace.push(record);
            return trace;
        }
        let norm_u = (blocks_sq(&x) + blocks_sq(&v)).sqrt();
        let rsum = record.res_primal + record.res_dual_map + record.res_coupling + record.res_dual;
        if rsum <= resid_tol * (1.0 + norm_u) {
            trace.push(record);
            return trace;
        }
        let theta = if tau <= 1e-14 * (1.0 + eta * eta) {
            degenerate += 1;
            0.0
        } else {
            degenerate = 0;
            lambda / tau * violation
        };
        record.theta = theta;
        trace.push(record);
        for i in 0..m {
            for j in 0..x[i].len() {
                x[i][j] -= theta * t_star[i][j];
            }
        }
        for k in 0..p {
            for j in 0..v[k].len() {
                v[k][j] -= theta * t[k][j];
            }
        }
        // M = 1, D = 0: two frozen steps in a row end the run
        if degenerate > 1 {
            return trace;
        }
    }
    trace
}

// ---------------------------------------------------------------- random problems

fn gauss_vec(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-s..s)).collect()
}

fn gauss_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, s: f64) -> Matrix<f64> {
    Matrix::from_row_major(r, c, gauss_vec(rng, r * c, s)).unwrap()
}

fn mat_mul(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for r in 0..a.rows() {
        for c in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a[(r, k)] * b[(k, c)];
            }
            out[(r, c)] = s;
        }
    }
    out
}

fn psd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Matrix<f64> {
    let g = gauss_mat(rng, n, n, 1.0);
    let mut q = mat_mul(&g, &g.transpose());
    for j in 0..n {
        q[(j, j)] += shift;
    }
    q
}

fn random_op(rng: &mut ChaCha8Rng, dim: usize) -> MonotoneOp<f64> {
    let kind = match rng.gen_range(0..6) {
        0 => OperatorKind::Zero,
        1 => OperatorKind::L1Norm {
            weight: rng.gen_range(0.1..2.0),
        },
        2 | 5 => {
            let lo = gauss_vec(rng, dim, 2.0);
            let hi = lo.iter().map(|&l| l + rng.gen_range(0.0..3.0)).collect();
            if rng.gen_bool(0.5) {
                OperatorKind::BoxIndicator { lo, hi }
            } else {
                OperatorKind::NormalConeBox { lo, hi }
            }
        }
        3 => OperatorKind::Quadratic {
            q_mat: psd(rng, dim, 0.0),
            q_vec: gauss_vec(rng, dim, 1.0),
        },
        _ => {
            let s = psd(rng, dim, 0.0);
            let w = gauss_mat(rng, dim, dim, 1.0);
            let mut m = s.clone();
            for r in 0..dim {
                for c in 0..dim {
                    m[(r, c)] += w[(r, c)] - w[(c, r)];
                }
            }
            OperatorKind::AffineMonotone {
                m_mat: m,
                c: gauss_vec(rng, dim, 1.0),
            }
        }
    };
    MonotoneOp::new(kind, dim).unwrap()
}

/// A graph point of `op` obtained from the resolvent at a random input.
fn random_graph_point(rng: &mut ChaCha8Rng, op: &MonotoneOp<f64>) -> GraphPoint<f64> {
    let u = gauss_vec(rng, op.dim(), 3.0);
    let y = op.resolvent(1.0, &u).unwrap();
    let w = u.iter().zip(&y).map(|(a, b)| a - b).collect();
    GraphPoint::new(y, w)
}

fn random_coupling(rng: &mut ChaCha8Rng, sig: &SpaceSignature) -> CouplingMap<f64> {
    let mut entries = Vec::new();
    for k in 0..sig.p() {
        for i in 0..sig.m() {
            let (g, d) = (sig.dual_dims()[k], sig.primal_dims()[i]);
            // every dual block couples to at least one primal block
            if i == k % sig.m() || rng.gen_bool(0.5) {
                let m = if g == d { psd(rng, d, 0.1) } else { gauss_mat(rng, g, d, 1.0) };
                entries.push((k, i, m));
            }
        }
    }
    let frob: f64 = entries
        .iter()
        .map(|(_, _, m)| m.frobenius_norm().powi(2))
        .sum::<f64>()
        .sqrt();
    let target = rng.gen_range(0.5..2.0);
    let mut coupling = CouplingMap::new(sig.clone());
    for (k, i, m) in entries {
        let scaled = Matrix::from_row_major(
            m.rows(),
            m.cols(),
            m.as_slice().iter().map(|v| v * target / frob).collect(),
        )
        .unwrap();
        coupling.insert(k, i, scaled).unwrap();
    }
    coupling
}

/// Random problem with `m, p ≤ 3`, block dimensions `≤ 4`, registry
/// operators and `‖L‖ ≤ 2`, together with a constructed Kuhn-Tucker point.
/// Every fifth seed produces a single linear primal block with the
/// `linear_primal` subspace.
pub fn random_problem(seed: u64) -> Problem<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let structured = seed % 5 == 4;
    let m = if structured { 1 } else { rng.gen_range(1..=3) };
    let p = rng.gen_range(1..=3);
    let primal_dims: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=4)).collect();
    let dual_dims: Vec<usize> = (0..p).map(|_| rng.gen_range(1..=4)).collect();
    let sig = SpaceSignature::new(primal_dims.clone(), dual_dims.clone()).unwrap();
    let coupling = random_coupling(&mut rng, &sig);

    let b_ops: Vec<MonotoneOp<f64>> = dual_dims.iter().map(|&g| random_op(&mut rng, g)).collect();
    let b_points: Vec<GraphPoint<f64>> = b_ops.iter().map(|op| random_graph_point(&mut rng, op)).collect();
    let v_bar = BlockVector::from_blocks(b_points.iter().map(|gp| gp.dual.clone()).collect());

    let (a_ops, x_bar, z_star, subspace) = if structured {
        let d = primal_dims[0];
        let q = psd(&mut rng, d, 0.5);
        let op = MonotoneOp::quadratic(q.clone(), vec![0.0; d]).unwrap();
        // A_1 x = −L*v̄
        let rhs: Vec<f64> = coupling.adjoint_block(0, &v_bar).iter().map(|v| -v).collect();
        let x = q.solve(&rhs).unwrap();
        (
            vec![op],
            BlockVector::from_blocks(vec![x]),
            BlockVector::zeros(&primal_dims),
            SubspaceSpec::LinearPrimal,
        )
    } else {
        let ops: Vec<MonotoneOp<f64>> = primal_dims.iter().map(|&d| random_op(&mut rng, d)).collect();
        let pts: Vec<GraphPoint<f64>> = ops.iter().map(|op| random_graph_point(&mut rng, op)).collect();
        let x = BlockVector::from_blocks(pts.iter().map(|gp| gp.point.clone()).collect());
        // z*_i = a*_i + Σ_k L_kiᵀ v̄_k
        let z = (0..m)
            .map(|i| {
                let lt = coupling.adjoint_block(i, &v_bar);
                pts[i].dual.iter().zip(&lt).map(|(a, b)| a + b).collect()
            })
            .collect();
        (ops, x, BlockVector::from_blocks(z), SubspaceSpec::Full)
    };
    // r_k = Σ_i L_ki x̄_i − y_k with (y_k, v̄_k) ∈ gra B_k
    let r = (0..p)
        .map(|k| {
            let lx = coupling.forward_block(k, &x_bar);
            lx.iter().zip(&b_points[k].point).map(|(a, b)| a - b).collect()
        })
        .collect();
    Problem::new(ProblemSpec {
        signature: sig,
        a_ops,
        b_ops,
        coupling,
        z_star,
        r: BlockVector::from_blocks(r),
        subspace,
        known_z_points: vec![PrimalDualPoint::new(x_bar, v_bar)],
    })
    .unwrap_or_else(|e| panic!("random problem {seed}: {e}"))
}
