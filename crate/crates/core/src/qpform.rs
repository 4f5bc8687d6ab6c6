//! Condensed form of the horizon optimization: a dense quadratic cost in
//! the stacked input vector plus a list of inequality functionals, and
//! the modified logarithmic barrier with exact gradients.
//!
//! The cost convention is `J(u) = 0.5 u' Hq u + fq . u + c0`, so the
//! gradient is `Hq u + fq`.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::plant::{BoxSet, DiscreteLti, SteadyTarget};
use crate::terminal::TerminalSet;

/// Stacked free/forced response maps over the horizon: the state stack
/// `[x(0); ...; x(N)]` equals `sx * x_now + su * u`.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub sx: DMatrix<f64>,
    pub su: DMatrix<f64>,
    pub horizon: usize,
}

/// Unroll the dynamics: block row `s` of `sx` is `A^s`, block `(s, j)` of
/// `su` is `A^(s-1-j) B` for `j < s` and zero otherwise.
pub fn build_prediction(model: &DiscreteLti, horizon: usize) -> Prediction {
    assert!(horizon >= 1, "prediction horizon must be at least 1");
    let n = model.num_states();
    let p = model.num_inputs();
    let mut sx = DMatrix::<f64>::zeros((horizon + 1) * n, n);
    let mut su = DMatrix::<f64>::zeros((horizon + 1) * n, horizon * p);
    sx.view_mut((0, 0), (n, n))
        .copy_from(&DMatrix::identity(n, n));
    for s in 1..=horizon {
        // Row block s reuses row block s-1: x(s) = A x(s-1) + B u(s-1).
        let prev_sx = sx.view(((s - 1) * n, 0), (n, n)).into_owned();
        sx.view_mut((s * n, 0), (n, n)).copy_from(&(&model.a * prev_sx));
        let prev_su = su.view(((s - 1) * n, 0), (n, horizon * p)).into_owned();
        let mut row = &model.a * prev_su;
        row.view_mut((0, (s - 1) * p), (n, p))
            .copy_from(&model.b);
        su.view_mut((s * n, 0), (n, horizon * p)).copy_from(&row);
    }
    Prediction { sx, su, horizon }
}

/// Identifies which bound a linear row enforces, for diagnostics and for
/// the stage-shifted dual warm start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowLabel {
    StateUpper { stage: usize, index: usize },
    StateLower { stage: usize, index: usize },
    InputUpper { stage: usize, index: usize },
    InputLower { stage: usize, index: usize },
    Terminal { index: usize },
}

impl std::fmt::Display for RowLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RowLabel::StateUpper { stage, index } => {
                write!(f, "state x{} upper bound at stage {stage}", index + 1)
            }
            RowLabel::StateLower { stage, index } => {
                write!(f, "state x{} lower bound at stage {stage}", index + 1)
            }
            RowLabel::InputUpper { stage, index } => {
                write!(f, "input u{} upper bound at stage {stage}", index + 1)
            }
            RowLabel::InputLower { stage, index } => {
                write!(f, "input u{} lower bound at stage {stage}", index + 1)
            }
            RowLabel::Terminal { index } => write!(f, "terminal row {}", index + 1),
        }
    }
}

/// Linear inequality `coeffs . u - rhs <= 0`.
#[derive(Debug, Clone)]
pub struct LinearRow {
    pub coeffs: DVector<f64>,
    pub rhs: f64,
    pub label: RowLabel,
}

/// Quadratic terminal inequality `(P u + q)' psi (P u + q) - level <= 0`.
#[derive(Debug, Clone)]
pub struct QuadRow {
    pub lin_map: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub psi: DMatrix<f64>,
    pub level: f64,
}

/// The condensed problem for one sampling instant.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub hq: DMatrix<f64>,
    pub fq: DVector<f64>,
    pub c0: f64,
    pub lin_rows: Vec<LinearRow>,
    pub quad_row: Option<QuadRow>,
    pub horizon: usize,
    pub num_states: usize,
    pub num_inputs: usize,
    /// Linear rows per stage block (identical layout each stage).
    pub rows_per_stage: usize,
    // Cached norms used by the step-size selection.
    pub hq_norm: f64,
    pub row_norms_sq: Vec<f64>,
    pub quad_hess_norm: f64,
}

impl QpProblem {
    pub fn num_vars(&self) -> usize {
        self.horizon * self.num_inputs
    }

    pub fn num_constraints(&self) -> usize {
        self.lin_rows.len() + usize::from(self.quad_row.is_some())
    }

    /// Quadratic tracking cost `0.5 u' Hq u + fq . u + c0`.
    pub fn cost(&self, u: &DVector<f64>) -> f64 {
        0.5 * (u.transpose() * &self.hq * u)[(0, 0)] + self.fq.dot(u) + self.c0
    }

    pub fn cost_gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.hq * u + &self.fq
    }

    /// All constraint values `g_i(u)`, linear rows first, the quadratic
    /// terminal row (when present) last.
    pub fn constraint_values(&self, u: &DVector<f64>) -> DVector<f64> {
        let m = self.num_constraints();
        let mut g = DVector::<f64>::zeros(m);
        for (i, row) in self.lin_rows.iter().enumerate() {
            g[i] = row.coeffs.dot(u) - row.rhs;
        }
        if let Some(quad) = &self.quad_row {
            let e = &quad.lin_map * u + &quad.offset;
            g[m - 1] = (e.transpose() * &quad.psi * &e)[(0, 0)] - quad.level;
        }
        g
    }

    pub fn max_violation(&self, u: &DVector<f64>) -> f64 {
        self.constraint_values(u)
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the most violated constraint, for diagnostics.
    pub fn worst_row(&self, u: &DVector<f64>) -> Option<(usize, f64)> {
        let g = self.constraint_values(u);
        (0..g.len()).map(|i| (i, g[i])).reduce(|a, b| {
            if b.1 > a.1 {
                b
            } else {
                a
            }
        })
    }

    pub fn row_description(&self, i: usize) -> String {
        if i < self.lin_rows.len() {
            self.lin_rows[i].label.to_string()
        } else {
            "quadratic terminal level".to_string()
        }
    }
}

/// Weighting matrices of the tracking cost.
#[derive(Debug, Clone)]
pub struct Weights {
    pub qx: DMatrix<f64>,
    pub qu: DMatrix<f64>,
    pub qn: DMatrix<f64>,
}

/// Condense the horizon problem at the measured state into a dense QP.
///
/// `tightening` uniformly shrinks every finite state/input bound; the
/// default configuration leaves it at zero.
#[allow(clippy::too_many_arguments)]
pub fn build_qp(
    model: &DiscreteLti,
    pred: &Prediction,
    weights: &Weights,
    target: &SteadyTarget,
    x_set: &BoxSet,
    u_set: &BoxSet,
    terminal: &TerminalSet,
    x_now: &DVector<f64>,
    tightening: f64,
) -> QpProblem {
    let n = model.num_states();
    let p = model.num_inputs();
    let horizon = pred.horizon;
    let nv = horizon * p;

    // Stage weight stack: Qx for stages 0..N-1, Qn at stage N.
    let mut qbar = DMatrix::<f64>::zeros((horizon + 1) * n, (horizon + 1) * n);
    for s in 0..horizon {
        qbar.view_mut((s * n, s * n), (n, n)).copy_from(&weights.qx);
    }
    qbar.view_mut((horizon * n, horizon * n), (n, n))
        .copy_from(&weights.qn);
    let mut rbar = DMatrix::<f64>::zeros(nv, nv);
    for s in 0..horizon {
        rbar.view_mut((s * p, s * p), (p, p)).copy_from(&weights.qu);
    }

    let mut xbar_stack = DVector::<f64>::zeros((horizon + 1) * n);
    for s in 0..=horizon {
        xbar_stack.rows_mut(s * n, n).copy_from(&target.xbar);
    }
    let mut ubar_stack = DVector::<f64>::zeros(nv);
    for s in 0..horizon {
        ubar_stack.rows_mut(s * p, p).copy_from(&target.ubar);
    }

    let free_err = &pred.sx * x_now - &xbar_stack;
    let su_t_q = pred.su.transpose() * &qbar;
    let mut hq = &su_t_q * &pred.su + &rbar;
    hq *= 2.0;
    hq = (&hq + hq.transpose()) * 0.5;
    let fq = 2.0 * (&su_t_q * &free_err) - 2.0 * (&rbar * &ubar_stack);
    let c0 = (free_err.transpose() * &qbar * &free_err)[(0, 0)]
        + (ubar_stack.transpose() * &rbar * &ubar_stack)[(0, 0)];

    // Stage constraint rows. The stage-0 state rows have zero
    // coefficients (the current state is a constant); they still belong
    // in the list so initial-state violations surface as infeasibility.
    let mut lin_rows = Vec::new();
    for s in 0..horizon {
        let su_block = pred.su.view((s * n, 0), (n, nv));
        let sx_block = pred.sx.view((s * n, 0), (n, n));
        let free_state = sx_block * x_now;
        for i in 0..n {
            if x_set.upper[i].is_finite() {
                lin_rows.push(LinearRow {
                    coeffs: su_block.row(i).transpose(),
                    rhs: x_set.upper[i] - tightening - free_state[i],
                    label: RowLabel::StateUpper { stage: s, index: i },
                });
            }
        }
        for i in 0..n {
            if x_set.lower[i].is_finite() {
                lin_rows.push(LinearRow {
                    coeffs: -su_block.row(i).transpose(),
                    rhs: free_state[i] - (x_set.lower[i] + tightening),
                    label: RowLabel::StateLower { stage: s, index: i },
                });
            }
        }
        for j in 0..p {
            if u_set.upper[j].is_finite() {
                let mut coeffs = DVector::<f64>::zeros(nv);
                coeffs[s * p + j] = 1.0;
                lin_rows.push(LinearRow {
                    coeffs,
                    rhs: u_set.upper[j] - tightening,
                    label: RowLabel::InputUpper { stage: s, index: j },
                });
            }
        }
        for j in 0..p {
            if u_set.lower[j].is_finite() {
                let mut coeffs = DVector::<f64>::zeros(nv);
                coeffs[s * p + j] = -1.0;
                lin_rows.push(LinearRow {
                    coeffs,
                    rhs: -(u_set.lower[j] + tightening),
                    label: RowLabel::InputLower { stage: s, index: j },
                });
            }
        }
    }
    let rows_per_stage = lin_rows.len() / horizon;

    // Terminal rows act on the horizon-end state block.
    let su_term = pred.su.view((horizon * n, 0), (n, nv)).into_owned();
    let sx_term = pred.sx.view((horizon * n, 0), (n, n));
    let free_term = sx_term * x_now;
    let mut quad_row = None;
    match terminal {
        TerminalSet::Polyhedral(poly) => {
            for r in 0..poly.normals.nrows() {
                let normal = poly.normals.row(r);
                lin_rows.push(LinearRow {
                    coeffs: (normal * &su_term).transpose(),
                    rhs: poly.offsets[r] - (normal * &free_term)[(0, 0)],
                    label: RowLabel::Terminal { index: r },
                });
            }
        }
        TerminalSet::Quadratic(quad) => {
            if quad.level.is_finite() {
                quad_row = Some(QuadRow {
                    lin_map: su_term.clone(),
                    offset: &free_term - &quad.center,
                    psi: quad.psi.clone(),
                    level: quad.level,
                });
            }
        }
    }

    let hq_norm = hq
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let row_norms_sq: Vec<f64> = lin_rows.iter().map(|r| r.coeffs.norm_squared()).collect();
    let quad_hess_norm = quad_row
        .as_ref()
        .map(|q| {
            let h = 2.0 * q.lin_map.transpose() * &q.psi * &q.lin_map;
            h.row_iter()
                .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0_f64, f64::max)
        })
        .unwrap_or(0.0);

    QpProblem {
        hq,
        fq,
        c0,
        lin_rows,
        quad_row,
        horizon,
        num_states: n,
        num_inputs: p,
        rows_per_stage,
        hq_norm,
        row_norms_sq,
        quad_hess_norm,
    }
}

/// Modified logarithmic barrier
/// `B(u, lam) = J(u) - (1/sigma) sum_i lam_i ln(1 - sigma g_i(u))`,
/// defined wherever `sigma g_i(u) < 1`. Its stationary points coincide
/// with the KKT points of the constrained problem.
pub fn barrier_value(
    qp: &QpProblem,
    u: &DVector<f64>,
    lam: &DVector<f64>,
    sigma: f64,
) -> Result<f64, Error> {
    barrier_value_shifted(qp, u, lam, sigma, 0.0)
}

/// Barrier value with every constraint tightened by `shift`; the flow
/// runs on a microscopically tightened problem so that its equilibrium
/// sits strictly inside the true constraints.
pub fn barrier_value_shifted(
    qp: &QpProblem,
    u: &DVector<f64>,
    lam: &DVector<f64>,
    sigma: f64,
    shift: f64,
) -> Result<f64, Error> {
    debug_assert_eq!(lam.len(), qp.num_constraints());
    let g = qp.constraint_values(u);
    let mut value = qp.cost(u);
    for i in 0..g.len() {
        let arg = 1.0 - sigma * (g[i] + shift);
        if arg <= 0.0 {
            return Err(Error::BarrierDomain);
        }
        value -= lam[i] * arg.ln() / sigma;
    }
    Ok(value)
}

/// Exact barrier gradients:
/// `grad_u = Hq u + fq + sum_i lam_i grad g_i / (1 - sigma g_i)` and
/// `grad_lam_i = -(1/sigma) ln(1 - sigma g_i)`.
pub fn barrier_gradients(
    qp: &QpProblem,
    u: &DVector<f64>,
    lam: &DVector<f64>,
    sigma: f64,
) -> Result<(DVector<f64>, DVector<f64>), Error> {
    barrier_gradients_shifted(qp, u, lam, sigma, 0.0)
}

/// Gradients of the shifted barrier; see `barrier_value_shifted`.
pub fn barrier_gradients_shifted(
    qp: &QpProblem,
    u: &DVector<f64>,
    lam: &DVector<f64>,
    sigma: f64,
    shift: f64,
) -> Result<(DVector<f64>, DVector<f64>), Error> {
    debug_assert_eq!(lam.len(), qp.num_constraints());
    let g = qp.constraint_values(u);
    let mut grad_u = qp.cost_gradient(u);
    let mut grad_lam = DVector::<f64>::zeros(g.len());
    for (i, row) in qp.lin_rows.iter().enumerate() {
        let arg = 1.0 - sigma * (g[i] + shift);
        if arg <= 0.0 {
            return Err(Error::BarrierDomain);
        }
        if lam[i] != 0.0 {
            grad_u.axpy(lam[i] / arg, &row.coeffs, 1.0);
        }
        grad_lam[i] = -arg.ln() / sigma;
    }
    if let Some(quad) = &qp.quad_row {
        let i = g.len() - 1;
        let arg = 1.0 - sigma * (g[i] + shift);
        if arg <= 0.0 {
            return Err(Error::BarrierDomain);
        }
        let e = &quad.lin_map * u + &quad.offset;
        let grad_g = 2.0 * quad.lin_map.transpose() * (&quad.psi * e);
        if lam[i] != 0.0 {
            grad_u.axpy(lam[i] / arg, &grad_g, 1.0);
        }
        grad_lam[i] = -arg.ln() / sigma;
    }
    Ok((grad_u, grad_lam))
}
