#![allow(dead_code)] // each integration suite uses its own subset

//! Oracles and generators shared by the integration suites. Everything
//! here is independent of the library's solution paths: spectral radii
//! come from power iteration, QP optima from exhaustive active-set
//! enumeration, and admissible sets from plain forward simulation.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use reapt::plant::{BoxSet, DiscreteLti};
use reapt::qpform::{LinearRow, QpProblem, RowLabel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random controllable discrete model with bounded spectral radius.
pub fn random_controllable_model(
    rng: &mut ChaCha8Rng,
    n_max: usize,
    p_max: usize,
) -> DiscreteLti {
    loop {
        let n = rng.random_range(1..=n_max);
        let p = rng.random_range(1..=p_max);
        let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-0.8..0.8));
        let b = DMatrix::<f64>::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let c = DMatrix::<f64>::from_fn(1, n, |_, _| rng.random_range(-1.0..1.0));
        let d = DMatrix::<f64>::zeros(1, p);
        if !reapt::numerics::is_controllable(&a, &b) {
            continue;
        }
        if let Ok(model) = DiscreteLti::new(a, b, c, d, 0.1) {
            return model;
        }
    }
}

/// Raw QP over `nv` variables with the given linear rows; used to drive
/// the solver outside the MPC pipeline.
pub fn raw_qp(hq: DMatrix<f64>, fq: DVector<f64>, rows: Vec<(DVector<f64>, f64)>) -> QpProblem {
    let nv = fq.len();
    let lin_rows: Vec<LinearRow> = rows
        .into_iter()
        .enumerate()
        .map(|(i, (coeffs, rhs))| LinearRow {
            coeffs,
            rhs,
            label: RowLabel::Terminal { index: i },
        })
        .collect();
    let hq_norm = hq
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let row_norms_sq = lin_rows.iter().map(|r| r.coeffs.norm_squared()).collect();
    QpProblem {
        hq,
        fq,
        c0: 0.0,
        lin_rows,
        quad_row: None,
        horizon: 1,
        num_states: 0,
        num_inputs: nv,
        rows_per_stage: 0,
        hq_norm,
        row_norms_sq,
        quad_hess_norm: 0.0,
    }
}

/// Exhaustive active-set enumeration for strictly convex QPs with linear
/// constraints: solve the KKT system of every active subset and keep the
/// best feasible candidate whose multipliers are nonnegative.
pub fn enumerate_qp_optimum(qp: &QpProblem) -> DVector<f64> {
    let nv = qp.num_vars();
    let m = qp.lin_rows.len();
    assert!(m <= 20, "enumeration oracle limited to small row counts");
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if active.len() > nv {
            continue;
        }
        let k = active.len();
        let mut kkt = DMatrix::<f64>::zeros(nv + k, nv + k);
        kkt.view_mut((0, 0), (nv, nv)).copy_from(&qp.hq);
        for (r, &i) in active.iter().enumerate() {
            for j in 0..nv {
                kkt[(nv + r, j)] = qp.lin_rows[i].coeffs[j];
                kkt[(j, nv + r)] = qp.lin_rows[i].coeffs[j];
            }
        }
        let mut rhs = DVector::<f64>::zeros(nv + k);
        rhs.rows_mut(0, nv).copy_from(&(-&qp.fq));
        for (r, &i) in active.iter().enumerate() {
            rhs[nv + r] = qp.lin_rows[i].rhs;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let u = sol.rows(0, nv).into_owned();
        if (0..k).any(|r| sol[nv + r] < -1e-9) || qp.max_violation(&u) > 1e-9 {
            continue;
        }
        let cost = qp.cost(&u);
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, u));
        }
    }
    best.expect("enumeration found no feasible candidate").1
}

/// Closed-loop admissibility under the terminal control law, by forward
/// simulation.
pub fn stays_admissible(
    model: &DiscreteLti,
    gain: &DMatrix<f64>,
    xbar: &DVector<f64>,
    ubar: &DVector<f64>,
    x_set: &BoxSet,
    u_set: &BoxSet,
    x0: &DVector<f64>,
    steps: usize,
) -> bool {
    let mut x = x0.clone();
    for _ in 0..steps {
        if !x_set.contains(&x, -1e-9) {
            return false;
        }
        let u = ubar + gain * (&x - xbar);
        if !u_set.contains(&u, -1e-9) {
            return false;
        }
        x = model.step(&x, &u);
    }
    true
}
