//! Closed-loop properties across randomized plants: the shifted warm
//! start never loses feasibility on the nominal loop, and larger budgets
//! never track worse on the shipped example.

mod common;

use common::{random_controllable_model, rng};
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use reapt::numerics;
use reapt::plant::BoxSet;
use reapt::reap::FlowParams;
use reapt::sim::{
    run_closed_loop, BudgetSpec, ControllerContext, LetController, SimConfig, TargetSpec,
    TerminalMethod,
};

/// Warm-start recursive feasibility: on nominal closed loops the shifted
/// sequence is feasible at every instant, so the controller never needs
/// its cold-start fallback (stepping reports an error if it does).
#[test]
fn warm_start_stays_feasible_across_random_runs() {
    let mut rng = rng(606);
    let mut runs = 0;
    let mut instants = 0usize;
    while runs < 200 {
        let model = random_controllable_model(&mut rng, 3, 2);
        if !numerics::is_observable(&model.c, &model.a) {
            continue;
        }
        let n = model.num_states();
        let p = model.num_inputs();
        let x_set = BoxSet::new(
            DVector::from_fn(n, |_, _| -rng.random_range(1.5..4.0)),
            DVector::from_fn(n, |_, _| rng.random_range(1.5..4.0)),
        )
        .unwrap();
        let u_set = BoxSet::new(
            DVector::from_fn(p, |_, _| -rng.random_range(1.0..3.0)),
            DVector::from_fn(p, |_, _| rng.random_range(1.0..3.0)),
        )
        .unwrap();
        let x0 = DVector::<f64>::from_fn(n, |i, _| {
            rng.random_range(0.3 * x_set.lower[i]..0.3 * x_set.upper[i])
        });
        let horizon = rng.random_range(2..=5);
        let Ok(ctx) = ControllerContext::assemble(
            model,
            x_set,
            u_set,
            DMatrix::identity(n, n),
            DMatrix::identity(p, p),
            horizon,
            &TargetSpec::Equilibrium(DVector::zeros(n)),
            TerminalMethod::Prediction,
            &x0,
            FlowParams::default(),
            0.0,
        ) else {
            continue;
        };

        let mut controller = LetController::start(&ctx, &x0).unwrap();
        let mut x = x0;
        let budget = BudgetSpec::Iterations(rng.random_range(0..=20));
        for k in 0..12 {
            let telemetry = controller
                .step(&ctx, &x, budget)
                .unwrap_or_else(|e| panic!("warm start failed at run {runs}, instant {k}: {e}"));
            x = ctx.model.step(&x, &telemetry.applied_u);
            instants += 1;
        }
        runs += 1;
    }
    println!("warm start feasible across {runs} runs / {instants} instants");
}

/// Soft regression check on the shipped double integrator: a generous
/// budget must not track worse than a starved one.
#[test]
fn larger_budget_never_tracks_worse_on_the_example() {
    let model = reapt::plant::DiscreteLti::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]),
        DMatrix::from_row_slice(2, 1, &[0.005, 0.1]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::from_row_slice(1, 1, &[0.0]),
        0.1,
    )
    .unwrap();
    let ctx = ControllerContext::assemble(
        model,
        BoxSet::new(
            DVector::from_row_slice(&[-5.0, -1.0]),
            DVector::from_row_slice(&[5.0, 1.0]),
        )
        .unwrap(),
        BoxSet::new(DVector::from_row_slice(&[-2.0]), DVector::from_row_slice(&[2.0]))
            .unwrap(),
        DMatrix::identity(2, 2),
        DMatrix::from_row_slice(1, 1, &[0.1]),
        10,
        &TargetSpec::Reference(DVector::from_row_slice(&[1.0])),
        TerminalMethod::Prediction,
        &DVector::zeros(2),
        FlowParams::default(),
        0.0,
    )
    .unwrap();

    let error_for = |budget: usize| {
        let cfg = SimConfig {
            steps: 300,
            budget: BudgetSpec::Iterations(budget),
            x0: DVector::zeros(2),
            realtime: false,
        };
        let trace = run_closed_loop(&ctx, &cfg).unwrap();
        (trace.records.last().unwrap().y[0] - 1.0).abs()
    };
    let err_1 = error_for(1);
    let err_50 = error_for(50);
    assert!(
        err_50 <= err_1 + 1e-12,
        "budget 50 tracked worse than budget 1: {err_50} vs {err_1}"
    );
}
