//! Dense two-phase simplex for small inequality-form linear programs:
//! maximize `c . z` subject to `G z <= h` with `z` free.
//!
//! Free variables are split into positive and negative parts, rows with
//! negative right-hand sides get artificial variables, and phase one
//! drives the artificials to zero before phase two optimizes the true
//! objective. Dantzig pricing is used until the pivot sequence turns
//! degenerate, after which Bland's rule takes over to rule out cycling.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;

/// Inequality-form linear program `maximize c . z  s.t.  G z <= h`.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub objective: DVector<f64>,
    pub ineq_lhs: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
}

impl LpProblem {
    pub fn new(
        objective: DVector<f64>,
        ineq_lhs: DMatrix<f64>,
        ineq_rhs: DVector<f64>,
    ) -> Result<Self, Error> {
        if ineq_lhs.ncols() != objective.len() {
            return Err(Error::Config(format!(
                "LP: G has {} columns but the objective has {} entries",
                ineq_lhs.ncols(),
                objective.len()
            )));
        }
        if ineq_lhs.nrows() != ineq_rhs.len() {
            return Err(Error::Config(format!(
                "LP: G has {} rows but h has {} entries",
                ineq_lhs.nrows(),
                ineq_rhs.len()
            )));
        }
        Ok(Self {
            objective,
            ineq_lhs,
            ineq_rhs,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    pub optimum: Option<f64>,
    pub argmax: Option<DVector<f64>>,
}

impl LpResult {
    fn of_status(status: LpStatus) -> Self {
        Self {
            status,
            optimum: None,
            argmax: None,
        }
    }
}

const PIVOT_CAP: usize = 1_000_000;
const DEGENERATE_BEFORE_BLAND: usize = 50;
const REDUCED_COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;

struct Tableau {
    /// Constraint coefficients in the current basis representation.
    body: DMatrix<f64>,
    rhs: DVector<f64>,
    /// Basic variable per row.
    basis: Vec<usize>,
    /// Columns the pricing step may consider.
    allowed: Vec<bool>,
    pivots_done: usize,
    degenerate_pivots: usize,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let ncols = self.body.ncols();
        let scale = 1.0 / self.body[(row, col)];
        for j in 0..ncols {
            self.body[(row, j)] *= scale;
        }
        self.rhs[row] *= scale;
        let pivot_rhs = self.rhs[row];
        for r in 0..self.body.nrows() {
            if r == row {
                continue;
            }
            let factor = self.body[(r, col)];
            if factor == 0.0 {
                continue;
            }
            for j in 0..ncols {
                let v = self.body[(row, j)];
                if v != 0.0 {
                    self.body[(r, j)] -= factor * v;
                }
            }
            self.body[(r, col)] = 0.0;
            self.rhs[r] -= factor * pivot_rhs;
        }
        self.basis[row] = col;
        self.pivots_done += 1;
    }

    /// Reduced costs `c_j - c_B . column_j` for the current basis.
    fn reduced_costs(&self, cost: &DVector<f64>) -> DVector<f64> {
        let mut reduced = cost.clone();
        for (row, &var) in self.basis.iter().enumerate() {
            let cb = cost[var];
            if cb == 0.0 {
                continue;
            }
            for j in 0..self.body.ncols() {
                reduced[j] -= cb * self.body[(row, j)];
            }
        }
        reduced
    }

    fn run_phase(&mut self, cost: &DVector<f64>) -> Result<PhaseOutcome, Error> {
        loop {
            if self.pivots_done > PIVOT_CAP {
                return Err(Error::Numerical(format!(
                    "simplex exceeded the pivot cap of {PIVOT_CAP}"
                )));
            }
            let use_bland = self.degenerate_pivots >= DEGENERATE_BEFORE_BLAND;
            let reduced = self.reduced_costs(cost);

            let entering = if use_bland {
                (0..reduced.len())
                    .find(|&j| self.allowed[j] && reduced[j] > REDUCED_COST_TOL)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..reduced.len() {
                    if self.allowed[j] && reduced[j] > REDUCED_COST_TOL {
                        if best.map_or(true, |(_, v)| reduced[j] > v) {
                            best = Some((j, reduced[j]));
                        }
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(col) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };

            // Ratio test; ties broken toward the smallest basis variable
            // index so the Bland fallback stays cycle-free.
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.body.nrows() {
                let coeff = self.body[(r, col)];
                if coeff <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs[r] / coeff;
                match leaving {
                    None => leaving = Some((r, ratio)),
                    Some((prev_r, prev_ratio)) => {
                        if ratio < prev_ratio - PIVOT_TOL
                            || (ratio < prev_ratio + PIVOT_TOL
                                && self.basis[r] < self.basis[prev_r])
                        {
                            leaving = Some((r, ratio));
                        }
                    }
                }
            }
            let Some((row, ratio)) = leaving else {
                return Ok(PhaseOutcome::Unbounded);
            };
            if ratio.abs() <= PIVOT_TOL {
                self.degenerate_pivots += 1;
            }
            self.pivot(row, col);
        }
    }
}

/// Solve an inequality-form LP. Errors only on the pivot cap; infeasible
/// and unbounded problems are reported through the result status.
pub fn lp_solve(problem: &LpProblem) -> Result<LpResult, Error> {
    let n = problem.objective.len();
    let m = problem.ineq_lhs.nrows();

    if m == 0 {
        // Unconstrained free variables: bounded only for a zero objective.
        return Ok(if problem.objective.amax() <= REDUCED_COST_TOL {
            LpResult {
                status: LpStatus::Optimal,
                optimum: Some(0.0),
                argmax: Some(DVector::zeros(n)),
            }
        } else {
            LpResult::of_status(LpStatus::Unbounded)
        });
    }

    // Standard form layout: [z+ (n) | z- (n) | slacks (m) | artificials].
    let n_split = 2 * n;
    let mut negated = vec![false; m];
    let mut artificial_rows = Vec::new();
    for i in 0..m {
        if problem.ineq_rhs[i] < 0.0 {
            negated[i] = true;
            artificial_rows.push(i);
        }
    }
    let n_art = artificial_rows.len();
    let total = n_split + m + n_art;

    let mut body = DMatrix::<f64>::zeros(m, total);
    let mut rhs = DVector::<f64>::zeros(m);
    let mut basis = vec![0usize; m];
    for i in 0..m {
        let sign = if negated[i] { -1.0 } else { 1.0 };
        for j in 0..n {
            let g = sign * problem.ineq_lhs[(i, j)];
            body[(i, j)] = g;
            body[(i, n + j)] = -g;
        }
        body[(i, n_split + i)] = sign;
        rhs[i] = sign * problem.ineq_rhs[i];
        basis[i] = n_split + i;
    }
    for (k, &i) in artificial_rows.iter().enumerate() {
        let col = n_split + m + k;
        body[(i, col)] = 1.0;
        basis[i] = col;
    }

    let mut tableau = Tableau {
        body,
        rhs,
        basis,
        allowed: vec![true; total],
        pivots_done: 0,
        degenerate_pivots: 0,
    };

    if n_art > 0 {
        // Phase one: maximize minus the sum of artificials.
        let mut phase1_cost = DVector::<f64>::zeros(total);
        for k in 0..n_art {
            phase1_cost[n_split + m + k] = -1.0;
        }
        match tableau.run_phase(&phase1_cost)? {
            PhaseOutcome::Optimal => {}
            PhaseOutcome::Unbounded => {
                return Err(Error::Numerical(
                    "phase-one simplex reported an unbounded auxiliary objective".into(),
                ));
            }
        }
        let infeasibility: f64 = tableau
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= n_split + m)
            .map(|(r, _)| tableau.rhs[r])
            .sum();
        if infeasibility > FEAS_TOL {
            return Ok(LpResult::of_status(LpStatus::Infeasible));
        }

        // Pivot leftover artificials out of the basis where possible;
        // rows that cannot be cleared are redundant and may keep a zero
        // artificial, but artificial columns are barred from re-entering.
        for r in 0..m {
            if tableau.basis[r] < n_split + m {
                continue;
            }
            if let Some(col) = (0..n_split + m)
                .find(|&j| tableau.body[(r, j)].abs() > 1e-8)
            {
                tableau.pivot(r, col);
            }
        }
        for j in n_split + m..total {
            tableau.allowed[j] = false;
        }
        tableau.degenerate_pivots = 0;
    }

    // Phase two: the real objective over the split variables.
    let mut phase2_cost = DVector::<f64>::zeros(total);
    for j in 0..n {
        phase2_cost[j] = problem.objective[j];
        phase2_cost[n + j] = -problem.objective[j];
    }
    match tableau.run_phase(&phase2_cost)? {
        PhaseOutcome::Optimal => {}
        PhaseOutcome::Unbounded => {
            return Ok(LpResult::of_status(LpStatus::Unbounded));
        }
    }

    let mut z = DVector::<f64>::zeros(n);
    for (r, &var) in tableau.basis.iter().enumerate() {
        if var < n {
            z[var] += tableau.rhs[r];
        } else if var < n_split {
            z[var - n] -= tableau.rhs[r];
        }
    }
    let optimum = problem.objective.dot(&z);
    Ok(LpResult {
        status: LpStatus::Optimal,
        optimum: Some(optimum),
        argmax: Some(z),
    })
}
