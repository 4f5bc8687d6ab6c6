//! Terminal constraint sets for the horizon-end state: either the
//! maximal output admissible polyhedron under the terminal control law
//! (prediction-based) or a sublevel set of the closed-loop Lyapunov
//! function (Lyapunov-based).

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::numerics::{lp_solve, LpProblem, LpStatus};
use crate::plant::{BoxSet, DiscreteLti, SteadyTarget};

/// Hard cap on the admissible-set index search.
pub const OMEGA_STAR_CAP: usize = 100;
/// Slack allowed when deciding that a stage is already implied.
pub const OMEGA_LP_TOL: f64 = 1e-9;
/// Membership tolerance for both set variants.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Polyhedral terminal set `H x <= h` for a fixed target.
#[derive(Debug, Clone)]
pub struct PolyhedralSet {
    pub normals: DMatrix<f64>,
    pub offsets: DVector<f64>,
    pub omega_star: usize,
}

/// Quadratic terminal set `||x - center||^2_psi <= level`, where the
/// level is the smallest of the per-bound values in `gamma` (entries for
/// infinite bounds are infinite and never bind).
#[derive(Debug, Clone)]
pub struct QuadraticSet {
    pub psi: DMatrix<f64>,
    pub gamma: DVector<f64>,
    pub center: DVector<f64>,
    pub level: f64,
}

#[derive(Debug, Clone)]
pub enum TerminalSet {
    Polyhedral(PolyhedralSet),
    Quadratic(QuadraticSet),
}

impl TerminalSet {
    pub fn row_count(&self) -> usize {
        match self {
            TerminalSet::Polyhedral(p) => p.normals.nrows(),
            TerminalSet::Quadratic(q) => {
                if q.level.is_finite() {
                    1
                } else {
                    0
                }
            }
        }
    }
}

/// Affine closed-loop propagation maps: after `omega` steps of the
/// terminal law the state is `state_map * x + state_off`, and the input
/// applied there is `input_map * x + input_off`.
struct StageMaps {
    state_map: DMatrix<f64>,
    state_off: DVector<f64>,
    input_map: DMatrix<f64>,
    input_off: DVector<f64>,
}

/// Rows expressing that the stage state and input stay inside their
/// boxes, skipping infinite bounds. Each row is `normal . x <= offset`.
fn stage_rows(maps: &StageMaps, x_set: &BoxSet, u_set: &BoxSet) -> (Vec<DVector<f64>>, Vec<f64>) {
    let mut normals = Vec::new();
    let mut offsets = Vec::new();
    let n = x_set.len();
    let p = u_set.len();
    for i in 0..n {
        if x_set.upper[i].is_finite() {
            normals.push(maps.state_map.row(i).transpose());
            offsets.push(x_set.upper[i] - maps.state_off[i]);
        }
    }
    for i in 0..n {
        if x_set.lower[i].is_finite() {
            normals.push(-maps.state_map.row(i).transpose());
            offsets.push(maps.state_off[i] - x_set.lower[i]);
        }
    }
    for j in 0..p {
        if u_set.upper[j].is_finite() {
            normals.push(maps.input_map.row(j).transpose());
            offsets.push(u_set.upper[j] - maps.input_off[j]);
        }
    }
    for j in 0..p {
        if u_set.lower[j].is_finite() {
            normals.push(-maps.input_map.row(j).transpose());
            offsets.push(maps.input_off[j] - u_set.lower[j]);
        }
    }
    (normals, offsets)
}

/// Search for the smallest stage index at which every next-stage
/// constraint is already implied by the accumulated ones, then stack all
/// rows up to that stage into the polyhedral terminal set.
///
/// The search terminates because the closed loop is Schur; it is capped
/// at `OMEGA_STAR_CAP` stages, past which the Lyapunov-based set is the
/// recommended fallback.
pub fn compute_omega_star(
    model: &DiscreteLti,
    gain: &DMatrix<f64>,
    target: &SteadyTarget,
    x_set: &BoxSet,
    u_set: &BoxSet,
) -> Result<(usize, TerminalSet), Error> {
    let n = model.num_states();
    let acl = &model.a + &model.b * gain;
    // Input applied by the terminal law: u = K x + (ubar - K xbar).
    let input_shift = &target.ubar - gain * &target.xbar;
    let drift = &model.b * &input_shift;

    let mut maps = StageMaps {
        state_map: DMatrix::identity(n, n),
        state_off: DVector::zeros(n),
        input_map: gain.clone(),
        input_off: input_shift.clone(),
    };

    let (mut acc_normals, mut acc_offsets) = stage_rows(&maps, x_set, u_set);

    for phi in 0..=OMEGA_STAR_CAP {
        // Advance the affine maps to stage phi + 1.
        maps.state_off = &acl * &maps.state_off + &drift;
        maps.state_map = &acl * &maps.state_map;
        maps.input_map = gain * &maps.state_map;
        maps.input_off = gain * &maps.state_off + &input_shift;
        let (next_normals, next_offsets) = stage_rows(&maps, x_set, u_set);

        if next_normals.is_empty() {
            // No finite bounds at all: zero rows, trivially admissible.
            return Ok((
                phi,
                TerminalSet::Polyhedral(PolyhedralSet {
                    normals: DMatrix::zeros(0, n),
                    offsets: DVector::zeros(0),
                    omega_star: phi,
                }),
            ));
        }

        let mut lhs = DMatrix::<f64>::zeros(acc_normals.len(), n);
        for (r, normal) in acc_normals.iter().enumerate() {
            lhs.row_mut(r).copy_from(&normal.transpose());
        }
        let rhs = DVector::from_vec(acc_offsets.clone());

        let mut all_implied = true;
        for (normal, offset) in next_normals.iter().zip(next_offsets.iter()) {
            let lp = LpProblem::new(normal.clone(), lhs.clone(), rhs.clone())?;
            let result = lp_solve(&lp)?;
            match result.status {
                LpStatus::Optimal => {
                    if result.optimum.unwrap() - offset > OMEGA_LP_TOL {
                        all_implied = false;
                        break;
                    }
                }
                LpStatus::Unbounded => {
                    if phi == 0 {
                        return Err(Error::Numerical(
                            "admissible-set search unbounded at the first stage".into(),
                        ));
                    }
                    all_implied = false;
                    break;
                }
                LpStatus::Infeasible => {
                    return Err(Error::Numerical(
                        "admissible-set stage constraints are infeasible".into(),
                    ));
                }
            }
        }

        if all_implied {
            let rows = acc_normals.len();
            let mut normals = DMatrix::<f64>::zeros(rows, n);
            for (r, normal) in acc_normals.iter().enumerate() {
                normals.row_mut(r).copy_from(&normal.transpose());
            }
            let set = PolyhedralSet {
                normals,
                offsets: DVector::from_vec(acc_offsets),
                omega_star: phi,
            };
            return Ok((phi, TerminalSet::Polyhedral(set)));
        }

        acc_normals.extend(next_normals);
        acc_offsets.extend(next_offsets);
    }
    Err(Error::OmegaStarCap)
}

/// Quadratic terminal set from a closed-loop Lyapunov matrix: the level
/// for each bound caps the largest excursion of that state or
/// terminal-law input over the ellipsoid.
pub fn lyapunov_terminal_set(
    model: &DiscreteLti,
    gain: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    target: &SteadyTarget,
    x_set: &BoxSet,
    u_set: &BoxSet,
) -> Result<TerminalSet, Error> {
    let n = model.num_states();
    let p = model.num_inputs();
    let psi_inv = psi
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("Lyapunov matrix is singular".into()))?;
    let input_spread = gain * &psi_inv * gain.transpose();

    let mut gamma = DVector::<f64>::from_element(2 * (n + p), f64::INFINITY);
    let mut set_entry = |idx: usize, numerator_root: f64, denom: f64| -> Result<(), Error> {
        if denom <= 1e-14 {
            // The bound direction is untouched by the closed loop.
            return Ok(());
        }
        let value = numerator_root * numerator_root / denom;
        if value <= 0.0 {
            return Err(Error::Config(
                "target lies on a constraint boundary; terminal level collapses".into(),
            ));
        }
        gamma[idx] = value;
        Ok(())
    };

    for i in 0..n {
        if x_set.upper[i].is_finite() {
            set_entry(i, target.xbar[i] - x_set.upper[i], psi_inv[(i, i)])?;
        }
        if x_set.lower[i].is_finite() {
            set_entry(n + i, x_set.lower[i] - target.xbar[i], psi_inv[(i, i)])?;
        }
    }
    for j in 0..p {
        if u_set.upper[j].is_finite() {
            set_entry(
                2 * n + j,
                target.ubar[j] - u_set.upper[j],
                input_spread[(j, j)],
            )?;
        }
        if u_set.lower[j].is_finite() {
            set_entry(
                2 * n + p + j,
                u_set.lower[j] - target.ubar[j],
                input_spread[(j, j)],
            )?;
        }
    }

    let level = gamma.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(TerminalSet::Quadratic(QuadraticSet {
        psi: psi.clone(),
        gamma,
        center: target.xbar.clone(),
        level,
    }))
}

/// Membership test returning the residual vector used for barrier row
/// construction: `H x - h` for the polyhedral variant, the single
/// consolidated `||x - center||^2_psi - level` for the quadratic one.
pub fn terminal_membership(set: &TerminalSet, x: &DVector<f64>) -> (bool, DVector<f64>) {
    match set {
        TerminalSet::Polyhedral(p) => {
            if p.normals.nrows() == 0 {
                return (true, DVector::zeros(0));
            }
            let residuals = &p.normals * x - &p.offsets;
            let member = residuals.iter().all(|&r| r <= MEMBERSHIP_TOL);
            (member, residuals)
        }
        TerminalSet::Quadratic(q) => {
            if !q.level.is_finite() {
                return (true, DVector::zeros(0));
            }
            let diff = x - &q.center;
            let value = (diff.transpose() * &q.psi * &diff)[(0, 0)];
            let residual = value - q.level;
            (
                residual <= MEMBERSHIP_TOL,
                DVector::from_vec(vec![residual]),
            )
        }
    }
}
