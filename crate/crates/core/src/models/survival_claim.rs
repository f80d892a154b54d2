//! One totally unpredictable default time, two markets that discount it
//! at different intensities.
//!
//! Under the reference measure the default time `τ` is exponential with
//! rate `λ_X`, making the first asset's price
//! `X_t = 1{τ>t} e^{−λ_X (T−t)}` an exact martingale in the grid
//! filtration (optional sampling at the grid's stopping times). The
//! second market uses the wrong intensity `λ_Y`, so
//! `Y_t = 1{τ>t} e^{−λ_Y (T−t)}` carries a predictable drift residual
//! on every surviving cell.
//!
//! Every martingale increment — including each cell's small compounding
//! step — is recorded as a *marked jump* with its exact two-outcome
//! compensator: given survival at the cell's left node, the increment
//! either compounds up (survival) or drops to zero (default in the
//! cell), and both the conditional mean (zero) and conditional second
//! moment (the recorded predictable quadratic variation) are closed
//! forms. Downstream deflators built from `(1 − ã ΔM)` factors then
//! have conditional mean exactly one on every cell, which is what makes
//! the unit-mass check on this model exact rather than asymptotic.
//!
//! A subtlety: the grid inserts `τ` as a node, so the cell ending at
//! `τ` is shorter than the base step. The two-outcome distribution seen
//! from that cell's left node still resolves at the *next uniform
//! node* (the inserted node exists only on the default branch), so
//! compensators use the distance to the next uniform node, not the
//! realized cell length.

use crate::grid::make_grid;
use crate::path::{
    pin_component, DecomposedPath, PathBuilder, PathEvent, PathMeta, SimMode, StepComponents,
};
use crate::simkernel::{pin_increment, sample_default_time};
use std::sync::Arc;

use super::{require, GridSpec, ModelError};

const NAME: &str = "survival_claim";

pub(super) fn simulate(
    lambda_x: f64,
    lambda_y: f64,
    grid_spec: &GridSpec,
    seed: u64,
) -> Result<DecomposedPath, ModelError> {
    require(NAME, "lambda_x", lambda_x, "(0, inf)", lambda_x > 0.0)?;
    require(NAME, "lambda_y", lambda_y, "(0, inf)", lambda_y > 0.0)?;

    let horizon = grid_spec.horizon;
    let n = grid_spec.n_steps;
    // Validates horizon and step count before any drawing happens.
    make_grid(horizon, n, &[])?;

    let tau = sample_default_time(|_| lambda_x, horizon, seed)?;
    let grid = match tau {
        Some(t) => Arc::new(make_grid(horizon, n, &[t])?),
        None => Arc::new(make_grid(horizon, n, &[])?),
    };
    let default_node = tau.map(|t| {
        grid.node_index(t)
            .expect("an event time is always a grid node")
    });

    // Uniform base nodes, reproduced with the grid's own arithmetic so
    // comparisons are bitwise.
    let mut uniform: Vec<f64> = (0..=n)
        .map(|i| horizon * (i as f64) / (n as f64))
        .collect();
    uniform[0] = 0.0;
    uniform[n] = horizon;
    let next_uniform_after = |t: f64| -> f64 {
        let pos = uniform.partition_point(|&u| u <= t);
        uniform[pos.min(n)]
    };

    let x0 = (-lambda_x * horizon).exp();
    let y0 = (-lambda_y * horizon).exp();
    let meta = PathMeta {
        model: NAME.to_owned(),
        mode: SimMode::Analytic,
        claims_drift_dominated: true,
        x_normal_form_expected: true,
        frozen_from: None,
        events: default_node
            .map(|node| {
                vec![PathEvent {
                    label: "default".to_owned(),
                    node,
                }]
            })
            .unwrap_or_default(),
    };

    let mut b = PathBuilder::new(Arc::clone(&grid), x0, y0, meta);
    let points = grid.points().to_vec();
    for k in 0..grid.n_steps() {
        let t0 = points[k];
        let t1 = points[k + 1];
        let dead = default_node.is_some_and(|e| k + 1 > e);
        if dead {
            b.push_step(k, StepComponents::default())?;
            continue;
        }

        let x_left = b.x_acc();
        let y_left = b.y_acc();
        // Distance over which the cell's two-outcome lottery resolves:
        // to the next uniform node (the inserted default node is itself
        // part of the outcome, not of the schedule).
        let delta = next_uniform_after(t0) - t0;
        let growth = (lambda_x * delta).exp_m1();
        let p_death = -(-lambda_x * delta).exp_m1();
        let p_surv = (-lambda_x * delta).exp();
        let qvx = x_left * x_left * (p_surv * (growth * growth) + p_death);

        let is_default_cell = default_node == Some(k + 1);
        let (x_target, y_target) = if is_default_cell {
            (0.0, 0.0)
        } else {
            (
                (-lambda_x * (horizon - t1)).exp(),
                (-lambda_y * (horizon - t1)).exp(),
            )
        };

        let mx_jump = pin_increment(x_left, x_target);
        let hedge = y_left / x_left;
        // The builder will derive the hedged jump as hedge·mx_jump;
        // compute the same product here to pin the drift residual so
        // the node lands exactly on the closed form.
        let m1_jump = hedge * mx_jump;
        let residual = pin_component(y_left, y_target, m1_jump);
        let (drift_up, drift_down) = if residual >= 0.0 {
            (residual, 0.0)
        } else {
            (0.0, -residual)
        };

        b.push_step(
            k,
            StepComponents {
                mx_jump: Some(mx_jump),
                qvx_pred: qvx,
                hedge,
                drift_up,
                drift_down,
                ..StepComponents::default()
            },
        )?;
    }

    Ok(b.finish(true)?)
}

/// Closed-form predictable deflator kernel. The path records the
/// *realized* drift residual per cell (zero on the default branch), but
/// a deflator kernel must be decided before each cell's lottery
/// resolves: it is the predictable compensator of the second price's
/// drift over the hedged bracket,
/// `ã¹_i = E[ΔY_i | left node] / (h_i² Δ⟨M^X⟩_i)`
/// with `E[ΔY_i] = Y_i (e^{(λ_Y−λ_X)δ_i} − 1)` and `δ_i` the distance
/// to the next uniform node. On the default cell this keeps the kernel
/// positive, so the deflator jumps up by `1 + ã¹ h X` at default —
/// exactly the tilt that makes every cell factor conditional-mean one.
pub(super) fn kernels(
    path: &DecomposedPath,
    lambda_x: f64,
    lambda_y: f64,
    base_steps: usize,
) -> super::DeflatorKernels {
    let n = path.n_steps();
    let horizon = path.grid.horizon();
    let nb = base_steps as f64;
    let mut uniform: Vec<f64> = (0..=base_steps)
        .map(|i| horizon * (i as f64) / nb)
        .collect();
    uniform[0] = 0.0;
    uniform[base_steps] = horizon;
    let hedged = (0..n)
        .map(|i| {
            let x = path.x[i];
            let h = path.hedge_ratio[i];
            let qvx = path.mart_x.qv_pred.mass()[i];
            if x <= 0.0 || qvx <= 0.0 || h == 0.0 {
                return 0.0;
            }
            let t0 = path.grid.points()[i];
            let pos = uniform.partition_point(|&u| u <= t0);
            let delta = uniform[pos.min(base_steps)] - t0;
            let drift = path.y[i] * ((lambda_y - lambda_x) * delta).exp_m1();
            drift / ((h * h) * qvx)
        })
        .collect();
    super::DeflatorKernels {
        hedged,
        ortho: vec![0.0; n],
    }
}
