//! Closed-loop simulation of plant plus anytime controller under the
//! logical-execution-time convention: the sequence computed from the
//! measurement at instant k is applied at instant k+1.
//!
//! To keep the pipeline consistent with that one-sample delay, the solve
//! performed during slot k anchors its prediction at the state the plant
//! will occupy when the result is applied, `A x(k) + B u(k)`, which only
//! uses the measurement at k and the input already committed. The
//! shifted warm start then stays feasible at every instant on the
//! nominal plant.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::numerics;
use crate::plant::{BoxSet, DiscreteLti, SteadyTarget};
use crate::qpform::{build_prediction, build_qp, Prediction, QpProblem, Weights};
use crate::reap::{
    initialize_at_k0, run_budgeted, warm_start, Budget, FlowParams, ReapIterate,
};
use crate::terminal::{
    compute_omega_star, lyapunov_terminal_set, terminal_membership, TerminalSet,
};

/// Which construction backs the terminal constraint set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalMethod {
    Prediction,
    Lyapunov,
}

/// Target specification prior to steady-state resolution.
#[derive(Debug, Clone)]
pub enum TargetSpec {
    Reference(DVector<f64>),
    Equilibrium(DVector<f64>),
}

/// Everything the controller needs at run time, assembled and validated
/// once per configuration.
#[derive(Debug, Clone)]
pub struct ControllerContext {
    pub model: DiscreteLti,
    pub x_set: BoxSet,
    pub u_set: BoxSet,
    pub weights: Weights,
    pub gain: DMatrix<f64>,
    pub target: SteadyTarget,
    pub terminal: TerminalSet,
    pub pred: Prediction,
    pub horizon: usize,
    pub flow: FlowParams,
    pub tightening: f64,
    pub method: TerminalMethod,
}

impl ControllerContext {
    /// Run the validation pipeline: controllability, target resolution
    /// and interiority, terminal-set preconditions, and the feasibility
    /// of the initial state (region of attraction, or horizon
    /// sufficiency in Lyapunov mode).
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        model: DiscreteLti,
        x_set: BoxSet,
        u_set: BoxSet,
        qx: DMatrix<f64>,
        qu: DMatrix<f64>,
        horizon: usize,
        target_spec: &TargetSpec,
        method: TerminalMethod,
        x0: &DVector<f64>,
        flow: FlowParams,
        tightening: f64,
    ) -> Result<Self, Error> {
        let n = model.num_states();
        if x_set.len() != n {
            return Err(Error::Config(format!(
                "state bounds have {} entries, expected {n}",
                x_set.len()
            )));
        }
        if u_set.len() != model.num_inputs() {
            return Err(Error::Config(format!(
                "input bounds have {} entries, expected {}",
                u_set.len(),
                model.num_inputs()
            )));
        }
        if x0.len() != n {
            return Err(Error::Config(format!(
                "initial state has {} entries, expected {n}",
                x0.len()
            )));
        }
        if horizon < 1 {
            return Err(Error::Config("prediction horizon must be at least 1".into()));
        }

        if !numerics::is_controllable(&model.a, &model.b) {
            return Err(Error::NotControllable);
        }

        let target = match target_spec {
            TargetSpec::Reference(r) => {
                crate::plant::resolve_target_from_reference(&model, &x_set, &u_set, r)?
            }
            TargetSpec::Equilibrium(xbar) => {
                crate::plant::resolve_target_from_equilibrium(&model, &x_set, &u_set, xbar)?
            }
        };

        let qn = numerics::solve_dare(&model.a, &model.b, &qx, &qu)?;
        let gain = numerics::terminal_gain(&model.a, &model.b, &qu, &qn)?;

        let terminal = match method {
            TerminalMethod::Prediction => {
                if !numerics::is_observable(&model.c, &model.a) {
                    return Err(Error::NotObservable);
                }
                let (_, set) = compute_omega_star(&model, &gain, &target, &x_set, &u_set)?;
                set
            }
            TerminalMethod::Lyapunov => {
                let acl = &model.a + &model.b * &gain;
                let psi = numerics::solve_discrete_lyapunov(&acl)?;
                lyapunov_terminal_set(&model, &gain, &psi, &target, &x_set, &u_set)?
            }
        };

        let pred = build_prediction(&model, horizon);
        let weights = Weights { qx, qu, qn };
        let ctx = Self {
            model,
            x_set,
            u_set,
            weights,
            gain,
            target,
            terminal,
            pred,
            horizon,
            flow,
            tightening,
            method,
        };
        // Region-of-attraction / horizon-sufficiency check at the
        // initial state.
        let qp0 = ctx.qp_at(x0);
        initialize_at_k0(&qp0, &ctx.flow)?;
        Ok(ctx)
    }

    pub fn qp_at(&self, x: &DVector<f64>) -> QpProblem {
        build_qp(
            &self.model,
            &self.pred,
            &self.weights,
            &self.target,
            &self.x_set,
            &self.u_set,
            &self.terminal,
            x,
            self.tightening,
        )
    }

    /// Terminal state of a stacked input sequence applied from `x`.
    pub fn predicted_terminal_state(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> DVector<f64> {
        let n = self.model.num_states();
        let stack = &self.pred.sx * x + &self.pred.su * u;
        stack.rows(self.horizon * n, n).into_owned()
    }

    /// Summary line for the terminal set, as shown by `check`.
    pub fn terminal_summary(&self) -> String {
        match &self.terminal {
            TerminalSet::Polyhedral(p) => format!(
                "prediction-based terminal set: omega_star = {}, {} rows",
                p.omega_star,
                p.normals.nrows()
            ),
            TerminalSet::Quadratic(q) => format!(
                "Lyapunov-based terminal set: gamma = {:.6e}, {} quadratic row(s)",
                q.level,
                if q.level.is_finite() { 1 } else { 0 }
            ),
        }
    }
}

/// Per-step solver allowance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BudgetSpec {
    Iterations(usize),
    DeadlineMs(f64),
}

impl BudgetSpec {
    fn to_budget(self) -> Budget {
        match self {
            BudgetSpec::Iterations(n) => Budget::Iterations(n),
            BudgetSpec::DeadlineMs(ms) => Budget::DeadlineMs(ms),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub steps: usize,
    pub budget: BudgetSpec,
    pub x0: DVector<f64>,
    /// Sleep out the sampling period each step, for watching a run in
    /// wall-clock time. Never used by tests.
    pub realtime: bool,
}

/// One recorded sampling instant.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub y: DVector<f64>,
    pub sigma: f64,
    pub iterations: usize,
    pub accepted: bool,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct SimTrace {
    pub records: Vec<StepRecord>,
    pub num_states: usize,
    pub num_inputs: usize,
    pub num_outputs: usize,
}

/// Telemetry returned by one controller step.
#[derive(Debug, Clone)]
pub struct StepTelemetry {
    pub applied_u: DVector<f64>,
    pub sigma: f64,
    pub iterations: usize,
    pub accepted: bool,
    pub cost: f64,
}

/// Stateful controller implementing the delayed pipeline; usable
/// directly against hardware measurements as well as by the simulator.
/// The context is passed to each call so the state can live anywhere,
/// including behind a foreign-function handle.
pub struct LetController {
    pending_u: DVector<f64>,
    pending_dual: DVector<f64>,
    num_inputs: usize,
}

impl LetController {
    /// Solve the initial feasibility problem at the start state; the
    /// first block of its solution is the input applied at instant 0.
    pub fn start(ctx: &ControllerContext, x0: &DVector<f64>) -> Result<Self, Error> {
        let qp0 = ctx.qp_at(x0);
        let it: ReapIterate = initialize_at_k0(&qp0, &ctx.flow)?;
        Ok(Self {
            pending_u: it.u_hat,
            pending_dual: it.lam_hat,
            num_inputs: ctx.model.num_inputs(),
        })
    }

    /// The input that will be applied at the current instant.
    pub fn current_input(&self) -> DVector<f64> {
        self.pending_u.rows(0, self.num_inputs).into_owned()
    }

    /// Process the measurement at the current instant: returns the input
    /// to apply now and runs the budgeted solve whose result will be
    /// applied at the next instant.
    pub fn step(
        &mut self,
        ctx: &ControllerContext,
        x_measured: &DVector<f64>,
        budget: BudgetSpec,
    ) -> Result<StepTelemetry, Error> {
        let u_apply = self.current_input();
        // The solve of this slot is anchored at the state the plant
        // reaches while it runs.
        let x_ahead = ctx.model.step(x_measured, &u_apply);
        let qp_next = ctx.qp_at(&x_ahead);
        let x_term = ctx.predicted_terminal_state(x_measured, &self.pending_u);
        let ws = warm_start(
            &self.pending_u,
            &self.pending_dual,
            &ctx.model,
            &ctx.gain,
            &ctx.target,
            &qp_next,
            &x_term,
            &ctx.flow,
        )?;
        let fell_back = ws.fell_back;
        let out = run_budgeted(ws.iterate, &qp_next, budget.to_budget(), &ctx.flow)?;
        let telemetry = StepTelemetry {
            applied_u: u_apply,
            sigma: out.final_sigma,
            iterations: out.iterations_run,
            accepted: out.accepted,
            cost: if out.accepted {
                out.cost_after
            } else {
                out.cost_before
            },
        };
        self.pending_u = out.applied_u;
        self.pending_dual = out.final_dual;
        if fell_back {
            return Err(Error::Numerical(
                "warm start lost feasibility on the nominal plant".into(),
            ));
        }
        Ok(telemetry)
    }
}

fn violated_bound(set: &BoxSet, v: &DVector<f64>, name: &str) -> Option<String> {
    const TOL: f64 = 1e-9;
    for i in 0..set.len() {
        if set.upper[i].is_finite() && v[i] > set.upper[i] + TOL {
            return Some(format!("{name}{} upper bound", i + 1));
        }
        if set.lower[i].is_finite() && v[i] < set.lower[i] - TOL {
            return Some(format!("{name}{} lower bound", i + 1));
        }
    }
    None
}

/// Simulate the nominal closed loop. Any constraint breach aborts with a
/// diagnostic naming the instant and the violated row; on nominal runs
/// this is a safety net that must never fire.
pub fn run_closed_loop(ctx: &ControllerContext, cfg: &SimConfig) -> Result<SimTrace, Error> {
    let mut controller = LetController::start(ctx, &cfg.x0)?;
    let mut x = cfg.x0.clone();
    let mut records = Vec::with_capacity(cfg.steps);
    for k in 0..cfg.steps {
        if let Some(row) = violated_bound(&ctx.x_set, &x, "x") {
            return Err(Error::Numerical(format!(
                "{row} violated at instant {k}"
            )));
        }
        let telemetry = controller.step(ctx, &x, cfg.budget).map_err(|e| {
            Error::Numerical(format!("controller failed at instant {k}: {e}"))
        })?;
        if let Some(row) = violated_bound(&ctx.u_set, &telemetry.applied_u, "u") {
            return Err(Error::Numerical(format!(
                "{row} violated at instant {k}"
            )));
        }
        let y = ctx.model.output(&x, &telemetry.applied_u);
        records.push(StepRecord {
            x: x.clone(),
            u: telemetry.applied_u.clone(),
            y,
            sigma: telemetry.sigma,
            iterations: telemetry.iterations,
            accepted: telemetry.accepted,
            cost: telemetry.cost,
        });
        x = ctx.model.step(&x, &telemetry.applied_u);
        if cfg.realtime {
            std::thread::sleep(std::time::Duration::from_secs_f64(ctx.model.dt));
        }
    }
    Ok(SimTrace {
        records,
        num_states: ctx.model.num_states(),
        num_inputs: ctx.model.num_inputs(),
        num_outputs: ctx.model.num_outputs(),
    })
}

fn fmt_float(v: f64) -> String {
    // 17 significant digits round-trip f64 exactly.
    format!("{v:.16e}")
}

/// Render the trace as CSV with the fixed header
/// `k,x_1..x_n,u_1..u_p,y_1..y_m,sigma,iterations,accepted,cost`.
pub fn trace_to_csv(trace: &SimTrace) -> String {
    let mut out = String::new();
    out.push('k');
    for i in 0..trace.num_states {
        let _ = write!(out, ",x_{}", i + 1);
    }
    for j in 0..trace.num_inputs {
        let _ = write!(out, ",u_{}", j + 1);
    }
    for j in 0..trace.num_outputs {
        let _ = write!(out, ",y_{}", j + 1);
    }
    out.push_str(",sigma,iterations,accepted,cost\n");
    for (k, rec) in trace.records.iter().enumerate() {
        let _ = write!(out, "{k}");
        for v in rec.x.iter().chain(rec.u.iter()).chain(rec.y.iter()) {
            let _ = write!(out, ",{}", fmt_float(*v));
        }
        let _ = writeln!(
            out,
            ",{},{},{},{}",
            fmt_float(rec.sigma),
            rec.iterations,
            u8::from(rec.accepted),
            fmt_float(rec.cost)
        );
    }
    out
}

/// The barrier-parameter series alone, for plotting.
pub fn sigma_to_csv(trace: &SimTrace) -> String {
    let mut out = String::from("k,sigma\n");
    for (k, rec) in trace.records.iter().enumerate() {
        let _ = writeln!(out, "{k},{}", fmt_float(rec.sigma));
    }
    out
}

/// Tabular summary: per-signal minimum, maximum and final value, plus
/// the worst constraint margins seen over the run.
pub fn render_report(trace: &SimTrace, x_set: &BoxSet, u_set: &BoxSet) -> String {
    let mut out = String::new();
    let steps = trace.records.len();
    let _ = writeln!(out, "closed-loop report ({steps} instants)");
    let _ = writeln!(out, "{:<10} {:>17} {:>17} {:>17}", "signal", "min", "max", "final");

    let mut signal_rows =
        |name: &str, count: usize, get: &dyn Fn(&StepRecord, usize) -> f64| {
            for i in 0..count {
                let series: Vec<f64> = trace.records.iter().map(|r| get(r, i)).collect();
                let min = series.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let last = *series.last().unwrap_or(&f64::NAN);
                let _ = writeln!(
                    out,
                    "{:<10} {:>17.10} {:>17.10} {:>17.10}",
                    format!("{name}{}", i + 1),
                    min,
                    max,
                    last
                );
            }
        };
    signal_rows("x", trace.num_states, &|r, i| r.x[i]);
    signal_rows("u", trace.num_inputs, &|r, i| r.u[i]);
    signal_rows("y", trace.num_outputs, &|r, i| r.y[i]);

    let _ = writeln!(out, "constraint margins (worst over the run):");
    for i in 0..trace.num_states {
        let mut worst = f64::INFINITY;
        for rec in &trace.records {
            if x_set.upper[i].is_finite() {
                worst = worst.min(x_set.upper[i] - rec.x[i]);
            }
            if x_set.lower[i].is_finite() {
                worst = worst.min(rec.x[i] - x_set.lower[i]);
            }
        }
        if worst.is_finite() {
            let _ = writeln!(out, "  x{}: {:.10}", i + 1, worst);
        } else {
            let _ = writeln!(out, "  x{}: unbounded", i + 1);
        }
    }
    for j in 0..trace.num_inputs {
        let mut worst = f64::INFINITY;
        for rec in &trace.records {
            if u_set.upper[j].is_finite() {
                worst = worst.min(u_set.upper[j] - rec.u[j]);
            }
            if u_set.lower[j].is_finite() {
                worst = worst.min(rec.u[j] - u_set.lower[j]);
            }
        }
        if worst.is_finite() {
            let _ = writeln!(out, "  u{}: {:.10}", j + 1, worst);
        } else {
            let _ = writeln!(out, "  u{}: unbounded", j + 1);
        }
    }
    let accepted: usize = trace.records.iter().filter(|r| r.accepted).count();
    let _ = writeln!(out, "accepted solves: {accepted}/{steps}");
    out
}

/// Verify that a trace never leaves the constraint sets.
pub fn trace_is_feasible(trace: &SimTrace, x_set: &BoxSet, u_set: &BoxSet) -> bool {
    trace.records.iter().all(|rec| {
        x_set.contains(&rec.x, -1e-9) && u_set.contains(&rec.u, -1e-9)
    })
}

/// Convenience check used in tests: membership of the horizon-end state
/// of a feasible sequence.
pub fn terminal_state_in_set(ctx: &ControllerContext, x: &DVector<f64>, u: &DVector<f64>) -> bool {
    let xt = ctx.predicted_terminal_state(x, u);
    terminal_membership(&ctx.terminal, &xt).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn mat(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    fn vec(data: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(data)
    }

    fn integrator_ctx_with(method: TerminalMethod, horizon: usize) -> ControllerContext {
        let model = DiscreteLti::new(
            mat(2, 2, &[1.0, 0.1, 0.0, 1.0]),
            mat(2, 1, &[0.005, 0.1]),
            mat(1, 2, &[1.0, 0.0]),
            mat(1, 1, &[0.0]),
            0.1,
        )
        .unwrap();
        let x_set = BoxSet::new(vec(&[-5.0, -1.0]), vec(&[5.0, 1.0])).unwrap();
        let u_set = BoxSet::new(vec(&[-2.0]), vec(&[2.0])).unwrap();
        ControllerContext::assemble(
            model,
            x_set,
            u_set,
            DMatrix::identity(2, 2),
            mat(1, 1, &[0.1]),
            horizon,
            &TargetSpec::Reference(vec(&[1.0])),
            method,
            &vec(&[0.0, 0.0]),
            FlowParams::default(),
            0.0,
        )
        .unwrap()
    }

    fn double_integrator_ctx(method: TerminalMethod) -> ControllerContext {
        // The Lyapunov level set is far smaller than the maximal
        // admissible polyhedron, so that mode needs the longer horizon.
        match method {
            TerminalMethod::Prediction => integrator_ctx_with(method, 10),
            TerminalMethod::Lyapunov => integrator_ctx_with(method, 40),
        }
    }

    #[test]
    fn equilibrium_start_is_a_fixed_point() {
        let ctx = double_integrator_ctx(TerminalMethod::Prediction);
        let cfg = SimConfig {
            steps: 20,
            budget: BudgetSpec::Iterations(5),
            x0: ctx.target.xbar.clone(),
            realtime: false,
        };
        let trace = run_closed_loop(&ctx, &cfg).unwrap();
        for rec in &trace.records {
            assert!((rec.x.clone() - &ctx.target.xbar).amax() < 1e-8);
            assert!((rec.u.clone() - &ctx.target.ubar).amax() < 1e-8);
        }
    }

    #[test]
    fn tracks_reference_with_moderate_budget() {
        let ctx = double_integrator_ctx(TerminalMethod::Prediction);
        let cfg = SimConfig {
            steps: 300,
            budget: BudgetSpec::Iterations(50),
            x0: vec(&[0.0, 0.0]),
            realtime: false,
        };
        let trace = run_closed_loop(&ctx, &cfg).unwrap();
        assert!(trace_is_feasible(&trace, &ctx.x_set, &ctx.u_set));
        let y_final = trace.records.last().unwrap().y[0];
        assert!(
            (y_final - 1.0).abs() <= 0.02,
            "final output {y_final} missed the reference"
        );
    }

    #[test]
    fn one_step_delay_is_visible_in_the_input() {
        let ctx = double_integrator_ctx(TerminalMethod::Prediction);
        let budget = BudgetSpec::Iterations(200);
        let x0 = vec(&[0.0, 0.0]);

        // Nominal pass.
        let mut nominal = LetController::start(&ctx, &x0).unwrap();
        let mut perturbed = LetController::start(&ctx, &x0).unwrap();
        let mut x_nom = x0.clone();
        let mut x_per = x0.clone();
        let mut u_nom_hist = Vec::new();
        let mut u_per_hist = Vec::new();
        for k in 0..8 {
            let mut x_meas = x_per.clone();
            if k == 4 {
                // Hand-injected measurement disturbance.
                x_meas[0] += 0.2;
            }
            let t_nom = nominal.step(&ctx, &x_nom, budget).unwrap();
            let t_per = perturbed.step(&ctx, &x_meas, budget).unwrap();
            u_nom_hist.push(t_nom.applied_u.clone());
            u_per_hist.push(t_per.applied_u.clone());
            x_nom = ctx.model.step(&x_nom, &t_nom.applied_u);
            x_per = ctx.model.step(&x_per, &t_per.applied_u);
        }
        // Identical up to and including the perturbation instant...
        for k in 0..=4 {
            assert!(
                (u_nom_hist[k].clone() - &u_per_hist[k]).amax() < 1e-12,
                "input diverged too early at {k}"
            );
        }
        // ...and different right after it.
        assert!(
            (u_nom_hist[5].clone() - &u_per_hist[5]).amax() > 1e-9,
            "perturbation never reached the input"
        );
    }

    #[test]
    fn lyapunov_mode_runs_feasibly() {
        let ctx = double_integrator_ctx(TerminalMethod::Lyapunov);
        let cfg = SimConfig {
            steps: 200,
            budget: BudgetSpec::Iterations(50),
            x0: vec(&[0.5, 0.0]),
            realtime: false,
        };
        let trace = run_closed_loop(&ctx, &cfg).unwrap();
        assert!(trace_is_feasible(&trace, &ctx.x_set, &ctx.u_set));
    }

    #[test]
    fn csv_schema_and_report_shape() {
        let ctx = double_integrator_ctx(TerminalMethod::Prediction);
        let cfg = SimConfig {
            steps: 12,
            budget: BudgetSpec::Iterations(3),
            x0: vec(&[0.2, 0.0]),
            realtime: false,
        };
        let trace = run_closed_loop(&ctx, &cfg).unwrap();
        let csv = trace_to_csv(&trace);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k,x_1,x_2,u_1,y_1,sigma,iterations,accepted,cost"
        );
        assert_eq!(csv.lines().count(), 13);
        let first = csv.lines().nth(1).unwrap();
        let fields: Vec<&str> = first.split(',').collect();
        assert_eq!(fields.len(), 9);
        assert_eq!(fields[0], "0");
        assert_eq!(fields[6], "3");
        assert!(fields[7] == "0" || fields[7] == "1");

        let sigma_csv = sigma_to_csv(&trace);
        assert_eq!(sigma_csv.lines().count(), 13);

        // The serialized floats round-trip bit-exactly.
        let last_line = csv.lines().last().unwrap();
        let fields: Vec<&str> = last_line.split(',').collect();
        let last = trace.records.last().unwrap();
        assert_eq!(fields[1].parse::<f64>().unwrap().to_bits(), last.x[0].to_bits());
        assert_eq!(fields[2].parse::<f64>().unwrap().to_bits(), last.x[1].to_bits());
        assert_eq!(fields[3].parse::<f64>().unwrap().to_bits(), last.u[0].to_bits());
        assert_eq!(
            fields[8].parse::<f64>().unwrap().to_bits(),
            last.cost.to_bits()
        );

        let report = render_report(&trace, &ctx.x_set, &ctx.u_set);
        assert!(report.contains("x1"));
        assert!(report.contains("u1"));
        assert!(report.contains("constraint margins"));
        assert!(report.contains("accepted solves"));
    }

    #[test]
    fn equilibrium_report_margins_are_constant() {
        let ctx = double_integrator_ctx(TerminalMethod::Prediction);
        let cfg = SimConfig {
            steps: 10,
            budget: BudgetSpec::Iterations(2),
            x0: ctx.target.xbar.clone(),
            realtime: false,
        };
        let trace = run_closed_loop(&ctx, &cfg).unwrap();
        let first = &trace.records[0];
        let last = trace.records.last().unwrap();
        assert!((first.x.clone() - &last.x).amax() < 1e-9);
        assert!((first.u.clone() - &last.u).amax() < 1e-9);
    }

    #[test]
    fn identical_runs_produce_identical_traces() {
        let ctx = double_integrator_ctx(TerminalMethod::Prediction);
        let cfg = SimConfig {
            steps: 60,
            budget: BudgetSpec::Iterations(7),
            x0: vec(&[0.3, -0.1]),
            realtime: false,
        };
        let a = trace_to_csv(&run_closed_loop(&ctx, &cfg).unwrap());
        let b = trace_to_csv(&run_closed_loop(&ctx, &cfg).unwrap());
        assert_eq!(a, b);
    }
}
