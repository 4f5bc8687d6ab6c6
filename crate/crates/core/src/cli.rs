//! Configuration files, the validation pipeline, and the command-line
//! interface: `check` validates a configuration and reports the terminal
//! set, `run` simulates the closed loop and writes trace files, `sweep`
//! repeats the run over several iteration budgets.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::Error;
use crate::numerics;
use crate::plant::{list_constraints, BoxSet, ContinuousLti, DiscreteLti};
use crate::reap::FlowParams;
use crate::sim::{
    run_closed_loop, render_report, sigma_to_csv, trace_to_csv, BudgetSpec, ControllerContext,
    SimConfig, TargetSpec, TerminalMethod,
};

/// Exit codes, stable and documented: 0 success, 1 configuration or file
/// errors, 2..=7 validation failures, 64 usage errors.
pub mod exit_code {
    pub const OK: u8 = 0;
    pub const CONFIG: u8 = 1;
    pub const NOT_CONTROLLABLE: u8 = 2;
    pub const TARGET: u8 = 3;
    pub const NOT_OBSERVABLE: u8 = 4;
    pub const HORIZON: u8 = 5;
    pub const REGION_OF_ATTRACTION: u8 = 6;
    pub const NUMERICAL: u8 = 7;
    pub const USAGE: u8 = 64;
}

/// A bound entry: a number, or the literals `Inf` / `-Inf` in any case.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum BoundLiteral {
    Number(f64),
    Text(String),
}

impl BoundLiteral {
    fn resolve(&self, field: &str) -> Result<f64, Error> {
        match self {
            BoundLiteral::Number(v) => Ok(*v),
            BoundLiteral::Text(s) => match s.to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                other => Err(Error::Config(format!(
                    "{field}: expected a number or Inf/-Inf, got \"{other}\""
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    domain: String,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
    dt: f64,
    /// Marks stand-in matrices the user is expected to replace.
    #[serde(default)]
    user_supplied: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintSection {
    x_upper: Vec<BoundLiteral>,
    x_lower: Vec<BoundLiteral>,
    u_upper: Vec<BoundLiteral>,
    u_lower: Vec<BoundLiteral>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightSection {
    #[serde(rename = "Qx")]
    qx: Vec<Vec<f64>>,
    #[serde(rename = "Qu")]
    qu: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetSection {
    kind: String,
    value: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TerminalSection {
    method: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationSection {
    steps: usize,
    #[serde(default)]
    budget: Option<usize>,
    #[serde(default)]
    deadline_ms: Option<f64>,
    x0: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    #[serde(default)]
    dtau: Option<f64>,
    #[serde(default)]
    tightening: Option<f64>,
}

/// Parsed configuration file mirroring the entry workflow: system,
/// constraints, weights, horizon, target, terminal method, simulation.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    system: SystemSection,
    constraints: ConstraintSection,
    weights: WeightSection,
    horizon: usize,
    target: TargetSection,
    #[serde(default)]
    terminal: Option<TerminalSection>,
    simulation: SimulationSection,
    #[serde(default)]
    solver: Option<SolverSection>,
}

fn to_matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>, Error> {
    if rows.is_empty() {
        return Err(Error::Config(format!("{field} must not be empty")));
    }
    let cols = rows[0].len();
    if cols == 0 {
        return Err(Error::Config(format!("{field} must not have empty rows")));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Config(format!(
                "{field} is not rectangular: row {} has {} entries, expected {cols}",
                i + 1,
                row.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn to_bounds(lits: &[BoundLiteral], field: &str, expected: usize) -> Result<DVector<f64>, Error> {
    if lits.len() != expected {
        return Err(Error::Config(format!(
            "{field} has {} entries, expected {expected}",
            lits.len()
        )));
    }
    let mut v = DVector::<f64>::zeros(expected);
    for (i, lit) in lits.iter().enumerate() {
        v[i] = lit.resolve(field)?;
    }
    Ok(v)
}

/// Load and schema-validate a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Parse a configuration from a JSON string (used by embedders).
pub fn parse_config_str(json: &str) -> Result<RunConfig, Error> {
    serde_json::from_str(json).map_err(|e| Error::Config(e.to_string()))
}

/// Built controller context plus everything the simulator needs.
#[derive(Debug)]
pub struct PreparedRun {
    pub ctx: ControllerContext,
    pub sim: SimConfig,
    pub user_supplied_system: bool,
}

impl RunConfig {
    pub fn discrete_model(&self) -> Result<DiscreteLti, Error> {
        let a = to_matrix(&self.system.a, "system.A")?;
        let b = to_matrix(&self.system.b, "system.B")?;
        let c = to_matrix(&self.system.c, "system.C")?;
        let d = to_matrix(&self.system.d, "system.D")?;
        match self.system.domain.as_str() {
            "continuous" => {
                let cont = ContinuousLti::new(a, b, c, d)?;
                numerics::zoh_discretize(&cont, self.system.dt)
            }
            "discrete" => DiscreteLti::new(a, b, c, d, self.system.dt),
            other => Err(Error::Config(format!(
                "system.domain must be \"continuous\" or \"discrete\", got \"{other}\""
            ))),
        }
    }

    fn terminal_method(&self, model: &DiscreteLti) -> Result<TerminalMethod, Error> {
        match self.terminal.as_ref().map(|t| t.method.as_str()) {
            Some("prediction") => Ok(TerminalMethod::Prediction),
            Some("lyapunov") => Ok(TerminalMethod::Lyapunov),
            Some(other) => Err(Error::Config(format!(
                "terminal.method must be \"prediction\" or \"lyapunov\", got \"{other}\""
            ))),
            // Default rule: prediction-based whenever it is applicable.
            None => Ok(if numerics::is_observable(&model.c, &model.a) {
                TerminalMethod::Prediction
            } else {
                TerminalMethod::Lyapunov
            }),
        }
    }

    fn budget(&self) -> Result<BudgetSpec, Error> {
        match (self.simulation.budget, self.simulation.deadline_ms) {
            (Some(_), Some(_)) => Err(Error::Config(
                "simulation.budget and simulation.deadline_ms are mutually exclusive".into(),
            )),
            (Some(n), None) => Ok(BudgetSpec::Iterations(n)),
            (None, Some(ms)) => Ok(BudgetSpec::DeadlineMs(ms)),
            (None, None) => Ok(BudgetSpec::Iterations(50)),
        }
    }

    /// Full validation pipeline, honoring command-line overrides.
    pub fn prepare(&self, overrides: &Overrides) -> Result<PreparedRun, Error> {
        let model = self.discrete_model()?;
        let n = model.num_states();
        let p = model.num_inputs();
        let m = model.num_outputs();

        let x_set = BoxSet::new(
            to_bounds(&self.constraints.x_lower, "constraints.x_lower", n)?,
            to_bounds(&self.constraints.x_upper, "constraints.x_upper", n)?,
        )?;
        let u_set = BoxSet::new(
            to_bounds(&self.constraints.u_lower, "constraints.u_lower", p)?,
            to_bounds(&self.constraints.u_upper, "constraints.u_upper", p)?,
        )?;
        let qx = to_matrix(&self.weights.qx, "weights.Qx")?;
        let qu = to_matrix(&self.weights.qu, "weights.Qu")?;

        let target = match self.target.kind.as_str() {
            "reference" => {
                if self.target.value.len() != m {
                    return Err(Error::Config(format!(
                        "target.value has {} entries, expected {m} outputs",
                        self.target.value.len()
                    )));
                }
                TargetSpec::Reference(DVector::from_row_slice(&self.target.value))
            }
            "equilibrium" => {
                if self.target.value.len() != n {
                    return Err(Error::Config(format!(
                        "target.value has {} entries, expected {n} states",
                        self.target.value.len()
                    )));
                }
                TargetSpec::Equilibrium(DVector::from_row_slice(&self.target.value))
            }
            other => {
                return Err(Error::Config(format!(
                    "target.kind must be \"reference\" or \"equilibrium\", got \"{other}\""
                )))
            }
        };

        let method = match overrides.terminal.as_deref() {
            Some("prediction") => TerminalMethod::Prediction,
            Some("lyapunov") => TerminalMethod::Lyapunov,
            Some(other) => {
                return Err(Error::Config(format!(
                    "--terminal must be prediction or lyapunov, got \"{other}\""
                )))
            }
            None => self.terminal_method(&model)?,
        };

        if self.simulation.x0.len() != n {
            return Err(Error::Config(format!(
                "simulation.x0 has {} entries, expected {n}",
                self.simulation.x0.len()
            )));
        }
        let x0 = DVector::from_row_slice(&self.simulation.x0);

        let mut flow = FlowParams::default();
        let solver = self.solver.clone().unwrap_or_default();
        if let Some(dtau) = solver.dtau {
            if !(dtau > 0.0) {
                return Err(Error::Config("solver.dtau must be positive".into()));
            }
            flow.dtau = dtau;
        }
        let tightening = solver.tightening.unwrap_or(0.0);
        if tightening < 0.0 {
            return Err(Error::Config("solver.tightening must be nonnegative".into()));
        }

        let ctx = ControllerContext::assemble(
            model, x_set, u_set, qx, qu, self.horizon, &target, method, &x0, flow, tightening,
        )?;

        let budget = match (overrides.budget, overrides.deadline_ms) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "--budget and --deadline-ms are mutually exclusive".into(),
                ))
            }
            (Some(n), None) => BudgetSpec::Iterations(n),
            (None, Some(ms)) => BudgetSpec::DeadlineMs(ms),
            (None, None) => self.budget()?,
        };

        let sim = SimConfig {
            steps: overrides.steps.unwrap_or(self.simulation.steps),
            budget,
            x0,
            realtime: overrides.realtime,
        };
        Ok(PreparedRun {
            ctx,
            sim,
            user_supplied_system: self.system.user_supplied,
        })
    }
}

/// Command-line overrides of file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub budget: Option<usize>,
    pub deadline_ms: Option<f64>,
    pub terminal: Option<String>,
    pub steps: Option<usize>,
    pub realtime: bool,
}

/// Map an error to its stable exit code.
pub fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => exit_code::CONFIG,
        Error::NotControllable => exit_code::NOT_CONTROLLABLE,
        Error::NotSteadyStateAdmissible | Error::TargetOnBoundary | Error::NotEquilibrium => {
            exit_code::TARGET
        }
        Error::NotObservable => exit_code::NOT_OBSERVABLE,
        Error::HorizonInsufficient => exit_code::HORIZON,
        Error::RegionOfAttraction => exit_code::REGION_OF_ATTRACTION,
        Error::OmegaStarCap | Error::BarrierDomain | Error::Numerical(_) => exit_code::NUMERICAL,
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "reapt",
    about = "Anytime model predictive control for constrained LTI systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonRunArgs {
    /// Configuration file (JSON)
    config: PathBuf,
    /// Per-step iteration budget (overrides the file value)
    #[arg(long)]
    budget: Option<usize>,
    /// Per-step wall-clock budget in milliseconds
    #[arg(long = "deadline-ms")]
    deadline_ms: Option<f64>,
    /// Terminal set construction: prediction or lyapunov
    #[arg(long)]
    terminal: Option<String>,
    /// Number of simulated sampling instants
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory for trace.csv, report.txt, sigma.csv
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Sleep out each sampling period in wall-clock time
    #[arg(long)]
    realtime: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a configuration and report the terminal set
    Check {
        /// Configuration file (JSON)
        config: PathBuf,
        /// Terminal set construction: prediction or lyapunov
        #[arg(long)]
        terminal: Option<String>,
    },
    /// Simulate the closed loop and write trace files
    Run(CommonRunArgs),
    /// Run the same configuration under several iteration budgets
    Sweep {
        #[command(flatten)]
        common: CommonRunArgs,
        /// Comma-separated list of per-step iteration budgets
        #[arg(long, value_delimiter = ',', required = true)]
        budgets: Vec<usize>,
    },
}

fn fail(err: &Error) -> u8 {
    eprintln!("{err}");
    exit_code_for(err)
}

fn do_check(config: &Path, terminal: Option<String>) -> u8 {
    let cfg = match load_config(config) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    let overrides = Overrides {
        terminal,
        ..Overrides::default()
    };
    let prepared = match cfg.prepare(&overrides) {
        Ok(p) => p,
        Err(e) => return fail(&e),
    };
    if prepared.user_supplied_system {
        println!("note: system matrices are user-supplied placeholders");
    }
    let ctx = &prepared.ctx;
    print!("{}", list_constraints(&ctx.x_set, &ctx.u_set));
    println!(
        "model: {} states, {} inputs, {} outputs, dt = {}",
        ctx.model.num_states(),
        ctx.model.num_inputs(),
        ctx.model.num_outputs(),
        ctx.model.dt
    );
    println!(
        "target: xbar = {:?}, ubar = {:?}, r = {:?}",
        ctx.target.xbar.as_slice(),
        ctx.target.ubar.as_slice(),
        ctx.target.r.as_slice()
    );
    println!("{}", ctx.terminal_summary());
    println!("controllability: ok");
    println!("region of attraction: ok (x0 admits a feasible sequence)");
    exit_code::OK
}

fn write_outputs(
    dir: &Path,
    trace: &crate::sim::SimTrace,
    ctx: &ControllerContext,
) -> Result<String, Error> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    let report = render_report(trace, &ctx.x_set, &ctx.u_set);
    let write = |name: &str, content: &str| -> Result<(), Error> {
        fs::write(dir.join(name), content)
            .map_err(|e| Error::Config(format!("cannot write {name}: {e}")))
    };
    write("trace.csv", &trace_to_csv(trace))?;
    write("sigma.csv", &sigma_to_csv(trace))?;
    write("report.txt", &report)?;
    Ok(report)
}

fn do_run(args: &CommonRunArgs) -> u8 {
    let cfg = match load_config(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    let overrides = Overrides {
        budget: args.budget,
        deadline_ms: args.deadline_ms,
        terminal: args.terminal.clone(),
        steps: args.steps,
        realtime: args.realtime,
    };
    let prepared = match cfg.prepare(&overrides) {
        Ok(p) => p,
        Err(e) => return fail(&e),
    };
    let trace = match run_closed_loop(&prepared.ctx, &prepared.sim) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    match write_outputs(&args.out, &trace, &prepared.ctx) {
        Ok(report) => {
            print!("{report}");
            println!("trace written to {}", args.out.join("trace.csv").display());
            exit_code::OK
        }
        Err(e) => fail(&e),
    }
}

fn do_sweep(common: &CommonRunArgs, budgets: &[usize]) -> u8 {
    let cfg = match load_config(&common.config) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    for &budget in budgets {
        let overrides = Overrides {
            budget: Some(budget),
            deadline_ms: None,
            terminal: common.terminal.clone(),
            steps: common.steps,
            realtime: false,
        };
        let prepared = match cfg.prepare(&overrides) {
            Ok(p) => p,
            Err(e) => return fail(&e),
        };
        let trace = match run_closed_loop(&prepared.ctx, &prepared.sim) {
            Ok(t) => t,
            Err(e) => return fail(&e),
        };
        let dir = common.out.join(format!("budget_{budget}"));
        if let Err(e) = write_outputs(&dir, &trace, &prepared.ctx) {
            return fail(&e);
        }
        let final_y = trace
            .records
            .last()
            .map(|r| format!("{:?}", r.y.as_slice()))
            .unwrap_or_else(|| "[]".into());
        println!(
            "budget {budget}: {} instants, final y = {}, trace in {}",
            trace.records.len(),
            final_y,
            dir.display()
        );
    }
    exit_code::OK
}

/// Entry point used by the binary; returns the process exit code.
pub fn run(args: impl Iterator<Item = String>) -> u8 {
    let argv: Vec<String> = std::iter::once("reapt".to_string()).chain(args).collect();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                exit_code::OK
            } else {
                exit_code::USAGE
            };
        }
    };
    match &cli.command {
        Command::Check { config, terminal } => do_check(config, terminal.clone()),
        Command::Run(args) => do_run(args),
        Command::Sweep { common, budgets } => do_sweep(common, budgets),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn integrator_json(extra_terminal: &str) -> String {
        format!(
            r#"{{
  "system": {{
    "domain": "discrete",
    "A": [[1.0, 0.1], [0.0, 1.0]],
    "B": [[0.005], [0.1]],
    "C": [[1.0, 0.0]],
    "D": [[0.0]],
    "dt": 0.1
  }},
  "constraints": {{
    "x_upper": [5.0, 1.0],
    "x_lower": [-5.0, -1.0],
    "u_upper": [2.0],
    "u_lower": [-2.0]
  }},
  "weights": {{
    "Qx": [[1.0, 0.0], [0.0, 1.0]],
    "Qu": [[0.1]]
  }},
  "horizon": 10,
  "target": {{ "kind": "reference", "value": [1.0] }},{extra_terminal}
  "simulation": {{ "steps": 50, "budget": 20, "x0": [0.0, 0.0] }}
}}"#
        )
    }

    #[test]
    fn loads_and_prepares_valid_config() {
        let f = write_tmp(&integrator_json(""));
        let cfg = load_config(f.path()).unwrap();
        let prepared = cfg.prepare(&Overrides::default()).unwrap();
        assert_eq!(prepared.ctx.model.num_states(), 2);
        assert_eq!(prepared.sim.steps, 50);
        assert_eq!(prepared.sim.budget, BudgetSpec::Iterations(20));
        // Default method: observable pair, so prediction-based.
        assert_eq!(prepared.ctx.method, TerminalMethod::Prediction);
    }

    #[test]
    fn missing_weight_names_the_field() {
        let broken = integrator_json("").replace("\"Qu\": [[0.1]]", "\"Qw\": [[0.1]]");
        let f = write_tmp(&broken);
        let err = load_config(f.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Qu") || msg.contains("Qw"), "message: {msg}");
    }

    #[test]
    fn wrong_bound_length_is_reported() {
        let broken = integrator_json("").replace(
            "\"x_upper\": [5.0, 1.0]",
            "\"x_upper\": [5.0]",
        );
        let f = write_tmp(&broken);
        let cfg = load_config(f.path()).unwrap();
        let err = cfg.prepare(&Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("x_upper"));
        assert_eq!(exit_code_for(&err), exit_code::CONFIG);
    }

    #[test]
    fn infinity_literals_any_case() {
        let cfg_text = integrator_json("").replace(
            "\"x_upper\": [5.0, 1.0]",
            "\"x_upper\": [\"INF\", \"inf\"]",
        );
        let f = write_tmp(&cfg_text);
        let cfg = load_config(f.path()).unwrap();
        let prepared = cfg.prepare(&Overrides::default()).unwrap();
        assert_eq!(prepared.ctx.x_set.upper[0], f64::INFINITY);

        let bad = integrator_json("").replace(
            "\"x_upper\": [5.0, 1.0]",
            "\"x_upper\": [\"big\", 1.0]",
        );
        let f = write_tmp(&bad);
        let cfg = load_config(f.path()).unwrap();
        assert!(cfg.prepare(&Overrides::default()).is_err());
    }

    #[test]
    fn terminal_section_and_override() {
        let f = write_tmp(&integrator_json(
            "\n  \"terminal\": { \"method\": \"lyapunov\" },",
        ));
        let cfg = load_config(f.path()).unwrap();
        // Lyapunov with this short horizon is insufficient from x0 far
        // away; here x0 = 0 and the target is close, so adjust: horizon
        // 10 works from the origin for this instance or fails cleanly.
        match cfg.prepare(&Overrides::default()) {
            Ok(p) => assert_eq!(p.ctx.method, TerminalMethod::Lyapunov),
            Err(e) => assert_eq!(e, Error::HorizonInsufficient),
        }

        let pred = cfg
            .prepare(&Overrides {
                terminal: Some("prediction".into()),
                ..Overrides::default()
            })
            .unwrap();
        assert_eq!(pred.ctx.method, TerminalMethod::Prediction);
    }

    #[test]
    fn exit_codes_are_stable() {
        assert_eq!(exit_code_for(&Error::NotControllable), 2);
        assert_eq!(exit_code_for(&Error::NotSteadyStateAdmissible), 3);
        assert_eq!(exit_code_for(&Error::TargetOnBoundary), 3);
        assert_eq!(exit_code_for(&Error::NotEquilibrium), 3);
        assert_eq!(exit_code_for(&Error::NotObservable), 4);
        assert_eq!(exit_code_for(&Error::HorizonInsufficient), 5);
        assert_eq!(exit_code_for(&Error::RegionOfAttraction), 6);
        assert_eq!(exit_code_for(&Error::OmegaStarCap), 7);
        assert_eq!(exit_code_for(&Error::Numerical(String::new())), 7);
        assert_eq!(exit_code_for(&Error::Config(String::new())), 1);
    }
}
