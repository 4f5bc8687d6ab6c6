//! The anytime solver: a discretized primal-dual flow on the modified
//! barrier whose every iterate is a feasible control sequence. Stopping
//! after any number of steps therefore yields a usable input, and a
//! cost-based acceptance test decides whether the iterated sequence
//! replaces the warm start.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::numerics::{lp_solve, LpProblem, LpStatus};
use crate::plant::{DiscreteLti, SteadyTarget};
use crate::qpform::{barrier_gradients_shifted, QpProblem};

/// Feasibility slack accepted on iterates; boundary-touching warm starts
/// carry roundoff of this order.
pub const FEASIBILITY_EPS: f64 = 1e-10;

/// Step-size and barrier parameters of the flow.
#[derive(Debug, Clone)]
pub struct FlowParams {
    /// Discretization step of the virtual flow.
    pub dtau: f64,
    /// Top of the geometric grid the barrier parameter is chosen from.
    pub sigma_max: f64,
    /// Floor on the barrier parameter.
    pub sigma_min: f64,
    /// Barrier-domain margin: sigma is kept below `(1 - eta) / |g_i|`.
    pub eta: f64,
    /// Cap on `sigma * dtau * curvature`; at most 1 keeps the explicit
    /// Euler step contractive on the barrier.
    pub stability_target: f64,
    /// Internal tightening the barrier applies to every constraint. The
    /// flow equilibrates a hair inside the true feasible set, which lets
    /// the multipliers settle without the hard feasibility wall pinning
    /// them on active boundaries.
    pub inner_margin: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            dtau: 1e-3,
            sigma_max: 1e3,
            sigma_min: 1e-3,
            eta: 0.1,
            stability_target: 1.0,
            inner_margin: 1e-6,
        }
    }
}

/// State of the virtual flow at one computation step.
#[derive(Debug, Clone)]
pub struct ReapIterate {
    pub u_hat: DVector<f64>,
    pub lam_hat: DVector<f64>,
    pub sigma: f64,
    pub tau: usize,
    pub dtau: f64,
}

/// Per-instant computation allowance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Iterations(usize),
    DeadlineMs(f64),
}

/// Result of one budgeted solve and its acceptance decision.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub accepted: bool,
    pub iterations_run: usize,
    pub cost_before: f64,
    pub cost_after: f64,
    /// The sequence to carry forward: the iterated one on acceptance,
    /// the starting one otherwise.
    pub applied_u: DVector<f64>,
    /// Final dual variables, carried forward regardless of acceptance.
    pub final_dual: DVector<f64>,
    pub final_sigma: f64,
}

/// Barrier parameter selection: the largest value on the geometric grid
/// `sigma_max * 2^-j` that keeps `sigma |g_i| <= 1 - eta` for every
/// constraint and keeps the effective step `sigma * dtau` below the
/// inverse curvature of the barrier, floored at `sigma_min`.
///
/// The margin keeps candidate points generated during backtracking inside
/// the barrier domain; the curvature cap keeps the discretized flow from
/// overshooting, which is what makes long runs converge to the optimum.
pub fn sigma_update(
    qp: &QpProblem,
    u: &DVector<f64>,
    lam: &DVector<f64>,
    params: &FlowParams,
) -> f64 {
    let g = qp.constraint_values(u);
    let g_max_abs = g
        .iter()
        .fold(0.0_f64, |acc, v| acc.max((v + params.inner_margin).abs()));

    // sigma-independent part of the curvature bound.
    let mut lam_row_sq = 0.0;
    let mut quad_part = 0.0;
    for (i, &norm_sq) in qp.row_norms_sq.iter().enumerate() {
        lam_row_sq += lam[i] * norm_sq;
    }
    if let Some(quad) = &qp.quad_row {
        let i = qp.num_constraints() - 1;
        let e = &quad.lin_map * u + &quad.offset;
        let grad_g = 2.0 * quad.lin_map.transpose() * (&quad.psi * e);
        lam_row_sq += lam[i] * grad_g.norm_squared();
        quad_part = lam[i] * qp.quad_hess_norm;
    }

    let mut sigma = params.sigma_max;
    for _ in 0..=40 {
        let margin_ok = sigma * g_max_abs <= 1.0 - params.eta;
        let curvature = qp.hq_norm + quad_part + sigma * lam_row_sq;
        let stable = sigma * params.dtau * curvature <= params.stability_target;
        if margin_ok && stable {
            break;
        }
        sigma *= 0.5;
    }
    sigma.max(params.sigma_min)
}

/// Strictly feasible starting iterate for the first sampling instant.
///
/// A phase-one LP maximizes the worst linear-constraint margin; a
/// non-positive optimum means the initial state lies outside the region
/// of attraction. A quadratic terminal row, if present, is repaired
/// afterwards by bisecting toward the input sequence that best reaches
/// the terminal ellipsoid; failure there means the horizon is too short
/// for the Lyapunov-based set.
pub fn initialize_at_k0(qp: &QpProblem, params: &FlowParams) -> Result<ReapIterate, Error> {
    let nv = qp.num_vars();
    let m_lin = qp.lin_rows.len();

    let mut u = if m_lin == 0 {
        DVector::<f64>::zeros(nv)
    } else {
        // Variables [u; s]: maximize s subject to rows' margins >= s,
        // with s capped at 1 to keep the LP bounded.
        let mut lhs = DMatrix::<f64>::zeros(m_lin + 1, nv + 1);
        let mut rhs = DVector::<f64>::zeros(m_lin + 1);
        for (i, row) in qp.lin_rows.iter().enumerate() {
            for j in 0..nv {
                lhs[(i, j)] = row.coeffs[j];
            }
            lhs[(i, nv)] = 1.0;
            rhs[i] = row.rhs;
        }
        lhs[(m_lin, nv)] = 1.0;
        rhs[m_lin] = 1.0;
        let mut objective = DVector::<f64>::zeros(nv + 1);
        objective[nv] = 1.0;
        let lp = LpProblem::new(objective, lhs, rhs)?;
        let result = lp_solve(&lp)?;
        match result.status {
            LpStatus::Optimal => {
                let opt = result.optimum.unwrap();
                if opt <= 0.0 {
                    return Err(Error::RegionOfAttraction);
                }
                result.argmax.unwrap().rows(0, nv).into_owned()
            }
            LpStatus::Infeasible => return Err(Error::RegionOfAttraction),
            LpStatus::Unbounded => {
                return Err(Error::Numerical(
                    "phase-one feasibility program reported unbounded".into(),
                ))
            }
        }
    };

    if let Some(quad) = &qp.quad_row {
        let g_quad = |u: &DVector<f64>| -> f64 {
            let e = &quad.lin_map * u + &quad.offset;
            (e.transpose() * &quad.psi * &e)[(0, 0)] - quad.level
        };
        if g_quad(&u) > 0.0 {
            // Input sequence reaching closest to the terminal center, in
            // the metric of the ellipsoid: least squares on psi^(1/2)
            // (P u + q) = 0.
            let eig = quad.psi.clone().symmetric_eigen();
            let mut sqrt_psi = DMatrix::<f64>::zeros(quad.psi.nrows(), quad.psi.ncols());
            for k in 0..eig.eigenvalues.len() {
                let v = eig.eigenvectors.column(k);
                sqrt_psi += eig.eigenvalues[k].max(0.0).sqrt() * v * v.transpose();
            }
            let (u_term, _) = crate::numerics::min_norm_least_squares(
                &(&sqrt_psi * &quad.lin_map),
                &(-(&sqrt_psi * &quad.offset)),
            )?;
            let interior_level = -1e-6 * quad.level.max(1e-12);
            if g_quad(&u_term) > interior_level {
                return Err(Error::HorizonInsufficient);
            }
            // g is convex along the segment, so the sublevel crossing is
            // found by bisection.
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let cand = &u * (1.0 - mid) + &u_term * mid;
                if g_quad(&cand) <= interior_level {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            u = &u * (1.0 - hi) + &u_term * hi;
            if qp
                .lin_rows
                .iter()
                .any(|row| row.coeffs.dot(&u) - row.rhs > 0.0)
            {
                return Err(Error::HorizonInsufficient);
            }
        }
    }

    let lam = DVector::<f64>::from_element(qp.num_constraints(), 1.0);
    let sigma = sigma_update(qp, &u, &lam, params);
    Ok(ReapIterate {
        u_hat: u,
        lam_hat: lam,
        sigma,
        tau: 0,
        dtau: params.dtau,
    })
}

/// Remove from `d` the components pointing out of constraints that are
/// active at `base`, so the clipped remainder of a step slides along the
/// blocking faces instead of ramming them. Rows merely approached by the
/// displacement are left alone; crossing them is caught by the slide
/// halvings.
fn deflect_along_active_rows(qp: &QpProblem, base: &DVector<f64>, d: &mut DVector<f64>) {
    const ACTIVE_TOL: f64 = 1e-8;
    if d.norm() == 0.0 {
        return;
    }
    for _ in 0..3 {
        for (i, row) in qp.lin_rows.iter().enumerate() {
            let norm_sq = qp.row_norms_sq[i];
            if norm_sq <= 1e-300 {
                continue;
            }
            let g_base = row.coeffs.dot(base) - row.rhs;
            if g_base >= -ACTIVE_TOL {
                let outward = row.coeffs.dot(d);
                if outward > 0.0 {
                    d.axpy(-outward / norm_sq, &row.coeffs, 1.0);
                }
            }
        }
        if let Some(quad) = &qp.quad_row {
            let e = &quad.lin_map * base + &quad.offset;
            let g_base = (e.transpose() * &quad.psi * &e)[(0, 0)] - quad.level;
            let grad = 2.0 * quad.lin_map.transpose() * (&quad.psi * e);
            let norm_sq = grad.norm_squared();
            if norm_sq > 1e-300 && g_base >= -ACTIVE_TOL {
                let outward = grad.dot(d);
                if outward > 0.0 {
                    d.axpy(-outward / norm_sq, &grad, 1.0);
                }
            }
        }
    }
}

/// One explicit Euler step of the flow: primal descent and projected
/// dual ascent on the modified barrier, with the barrier parameter
/// refreshed first.
///
/// Feasibility safeguard: a primal candidate that leaves the feasible
/// set is backtracked by halving, up to 30 times; the clipped remainder
/// of the step is then deflected along the blocking faces so the iterate
/// keeps moving tangentially. If no motion at all is feasible the
/// multipliers of the blocking rows are raised using the rejected
/// candidate's constraint values, which rotates the flow direction back
/// inward over subsequent steps. No infeasible primal is ever accepted.
pub fn flow_step(
    it: &ReapIterate,
    qp: &QpProblem,
    params: &FlowParams,
) -> Result<ReapIterate, Error> {
    let sigma = sigma_update(qp, &it.u_hat, &it.lam_hat, params);
    let (grad_u, grad_lam) =
        barrier_gradients_shifted(qp, &it.u_hat, &it.lam_hat, sigma, params.inner_margin)?;

    let step = &grad_u * (-(sigma * it.dtau));
    let full = &it.u_hat + &step;
    let mut u_next = None;
    if qp.max_violation(&full) <= FEASIBILITY_EPS {
        u_next = Some(full.clone());
    } else {
        // Feasible base point along the raw step direction.
        let mut frac = 1.0_f64;
        let mut base = (it.u_hat.clone(), 0.0_f64);
        for _ in 0..30 {
            frac *= 0.5;
            let cand = &it.u_hat + &step * frac;
            if qp.max_violation(&cand) <= FEASIBILITY_EPS {
                base = (cand, frac);
                break;
            }
        }
        let (m, frac) = base;
        let mut d = &step * (1.0 - frac);
        deflect_along_active_rows(qp, &m, &mut d);
        let mut slide = 1.0_f64;
        for _ in 0..10 {
            let cand = &m + &d * slide;
            if qp.max_violation(&cand) <= FEASIBILITY_EPS {
                u_next = Some(cand);
                break;
            }
            slide *= 0.5;
        }
        if u_next.is_none() {
            u_next = Some(m);
        }
    }
    let u_next = u_next.expect("a feasible candidate always exists");

    // The dual always advances by the nominal step: the halvings above
    // protect primal feasibility, which the multipliers cannot break.
    let stalled = (&u_next - &it.u_hat).amax() <= 1e-13 * (1.0 + it.u_hat.amax());
    let mut lam_next;
    if stalled {
        // Pinned against an active boundary: let the duals see the
        // rejected full-length candidate so the multipliers of the
        // blocking rows keep rising; otherwise (u, lam) can freeze on
        // the boundary below the KKT multipliers.
        let g_probe = qp.constraint_values(&full);
        lam_next = it.lam_hat.clone();
        for i in 0..lam_next.len() {
            let arg = (1.0 - sigma * (g_probe[i] + params.inner_margin)).max(params.eta);
            lam_next[i] += it.dtau * (-arg.ln());
        }
    } else {
        lam_next = &it.lam_hat + &grad_lam * (sigma * it.dtau);
    }
    // Dual projection: components that would cross zero are clamped.
    for i in 0..lam_next.len() {
        if lam_next[i] < 0.0 {
            lam_next[i] = 0.0;
        }
    }

    Ok(ReapIterate {
        u_hat: u_next,
        lam_hat: lam_next,
        sigma,
        tau: it.tau + 1,
        dtau: it.dtau,
    })
}

/// Shift the retained sequence one stage forward and append the terminal
/// control law at the predicted horizon-end state; duals shift by one
/// stage block, with fresh unit multipliers on the last stage and the
/// terminal rows. Falls back to a cold start when the shifted sequence
/// is infeasible for the new problem (which cannot happen when the plant
/// matches the model exactly).
pub struct WarmStart {
    pub iterate: ReapIterate,
    pub fell_back: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn warm_start(
    prev_u: &DVector<f64>,
    prev_lam: &DVector<f64>,
    model: &DiscreteLti,
    gain: &DMatrix<f64>,
    target: &SteadyTarget,
    qp_next: &QpProblem,
    x_pred_terminal: &DVector<f64>,
    params: &FlowParams,
) -> Result<WarmStart, Error> {
    let p = model.num_inputs();
    let horizon = qp_next.horizon;
    debug_assert_eq!(prev_u.len(), horizon * p);

    let mut u = DVector::<f64>::zeros(horizon * p);
    u.rows_mut(0, (horizon - 1) * p)
        .copy_from(&prev_u.rows(p, (horizon - 1) * p));
    let kappa = &target.ubar + gain * (x_pred_terminal - &target.xbar);
    u.rows_mut((horizon - 1) * p, p).copy_from(&kappa);

    if qp_next.max_violation(&u) > FEASIBILITY_EPS {
        let iterate = initialize_at_k0(qp_next, params)?;
        return Ok(WarmStart {
            iterate,
            fell_back: true,
        });
    }

    let rows = qp_next.rows_per_stage;
    let mut lam = DVector::<f64>::from_element(qp_next.num_constraints(), 1.0);
    if rows > 0 {
        for s in 0..horizon - 1 {
            for r in 0..rows {
                lam[s * rows + r] = prev_lam[(s + 1) * rows + r];
            }
        }
    }
    let sigma = sigma_update(qp_next, &u, &lam, params);
    Ok(WarmStart {
        iterate: ReapIterate {
            u_hat: u,
            lam_hat: lam,
            sigma,
            tau: 0,
            dtau: params.dtau,
        },
        fell_back: false,
    })
}

/// Run the flow for the given budget and accept the result only if it
/// strictly lowers the quadratic tracking cost relative to the starting
/// sequence (ties reject).
pub fn run_budgeted(
    it0: ReapIterate,
    qp: &QpProblem,
    budget: Budget,
    params: &FlowParams,
) -> Result<StepOutcome, Error> {
    let u_start = it0.u_hat.clone();
    let cost_before = qp.cost(&u_start);

    let mut it = it0;
    let mut iterations = 0usize;
    match budget {
        Budget::Iterations(count) => {
            for _ in 0..count {
                it = flow_step(&it, qp, params)?;
                iterations += 1;
            }
        }
        Budget::DeadlineMs(ms) => {
            let start = Instant::now();
            while (start.elapsed().as_secs_f64() * 1e3) < ms {
                it = flow_step(&it, qp, params)?;
                iterations += 1;
            }
        }
    }

    let cost_after = qp.cost(&it.u_hat);
    let accepted = cost_after < cost_before;
    Ok(StepOutcome {
        accepted,
        iterations_run: iterations,
        cost_before,
        cost_after,
        applied_u: if accepted {
            it.u_hat.clone()
        } else {
            u_start
        },
        final_dual: it.lam_hat,
        final_sigma: it.sigma,
    })
}
