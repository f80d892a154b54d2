//! Two prices of the same asset quoted under different risk attitudes:
//! the first market prices it as a driftless Brownian martingale, the
//! second prices it under an equivalent measure whose market-price-of-
//! risk process tilts the valuation, and the gap between the two
//! filtrationless views shows up — in the common filtration — as a
//! predictable drift in the second price.
//!
//! With `B, β` independent Brownian motions, `W^Y` the Ornstein–
//! Uhlenbeck-type state `dW^Y = ρ W^Y dt + d(ρB + √(1−ρ²)β)`, and a
//! deterministic calendar horizon `T̄` (the grid horizon):
//!
//! ```text
//! X_t = x0 + B_t                      (absorbed at zero),
//! dY_t = h(t) W^Y_t dt + h(t) dB_t − √(1−ρ²) (T̄−t) dβ_t,
//! h(t) = 1 − ρ (T̄ − t).
//! ```
//!
//! For `ρ > 1/2` the hedge is nonpositive on `[0, T̄ − 1/ρ]`, and cells
//! there visited while `W^Y < 0` carry upward drift against the
//! orthogonal martingale (whose variance rate `(1−ρ²)(T̄−t)²` is
//! strictly positive before the horizon) — the configuration where the
//! drift must be absorbed by the orthogonal deflator component. For
//! `ρ ≤ 0` the hedge stays positive and the hedged component alone
//! absorbs the drift. Either way the deflator has unit expectation,
//! which is what the measure-check harness verifies by simulation.
//!
//! The market terminates when `X` reaches zero (this is what keeps both
//! prices positive): the crossing is detected exactly via the within-
//! cell bridge minimum, recorded as a marked jump to the floor, and the
//! rest of the path is frozen. A second, purely protective freeze stops
//! the path if `Y` falls to half its starting value; the trigger reads
//! only start-of-cell state, so it is a stopping rule and introduces no
//! bias.

use std::sync::Arc;

use crate::path::{DecomposedPath, PathBuilder, PathEvent, PathMeta, SimMode, StepComponents};
use crate::simkernel::{
    bridge_minimum, brownian_increments, path_seed, rng_for, uniform_open_closed,
};

use super::util::absorbed_step_variance;
use super::{base_grid, require, GridSpec, ModelError};

const MODEL: &str = "risk_attitudes";

/// Fraction of the starting price below which the whole path is frozen
/// to keep `Y` (which has no natural floor) positive.
const FREEZE_FRACTION: f64 = 0.5;

pub(super) fn simulate(
    rho: f64,
    x0: f64,
    grid_spec: &GridSpec,
    seed: u64,
) -> Result<DecomposedPath, ModelError> {
    require(MODEL, "rho", rho, "(-1, 1)", rho > -1.0 && rho < 1.0)?;
    require(MODEL, "x0", x0, "(0, inf)", x0 > 0.0)?;
    let grid = base_grid(grid_spec)?;
    let n = grid.n_steps();
    let t_bar = grid_spec.horizon;
    let s = (1.0 - rho * rho).sqrt();

    let gauss_b = brownian_increments(&grid, path_seed(seed, 1));
    let mut urng = rng_for(path_seed(seed, 2));
    let gauss_beta = brownian_increments(&grid, path_seed(seed, 3));

    let meta = PathMeta {
        model: MODEL.into(),
        mode: SimMode::Analytic,
        claims_drift_dominated: true,
        x_normal_form_expected: true,
        frozen_from: None,
        events: Vec::new(),
    };
    let mut b = PathBuilder::new(Arc::clone(&grid), x0, x0, meta);
    let kappa = FREEZE_FRACTION * x0;
    let mut w_y = 0.0f64;
    let mut absorbed_at: Option<usize> = None;
    let mut frozen_at: Option<usize> = None;

    for i in 0..n {
        if absorbed_at.is_some() || frozen_at.is_some() {
            b.push_step(i, StepComponents::default())?;
            continue;
        }
        if b.y_acc() <= kappa {
            frozen_at = Some(i);
            b.push_step(i, StepComponents::default())?;
            continue;
        }

        let t = grid.points()[i];
        let dt = grid.step_len(i);
        let h = 1.0 - rho * (t_bar - t);
        let x_left = b.x_acc();
        let drift = (h * w_y) * dt;
        let (up, down) = if drift >= 0.0 { (drift, 0.0) } else { (0.0, -drift) };
        let db = gauss_b.values()[i];
        let dbeta = gauss_beta.values()[i];
        let m2_scale = -(s * (t_bar - t));
        let m2c = m2_scale * dbeta;
        let qv2 = (m2_scale * m2_scale) * dt;
        let u = uniform_open_closed(&mut urng);
        let hit = bridge_minimum(x_left, x_left + db, dt, u) <= 0.0;
        let qv_pred = absorbed_step_variance(x_left, dt);
        let comp = if hit {
            StepComponents {
                mx_jump: Some(-x_left),
                qvx_pred: qv_pred,
                hedge: h,
                drift_up: up,
                drift_down: down,
                m2_cont: m2c,
                qv2_pred: qv2,
                qv2_cont: qv2,
                ..Default::default()
            }
        } else {
            StepComponents {
                mx_cont: db,
                qvx_pred: qv_pred,
                qvx_cont: dt,
                hedge: h,
                drift_up: up,
                drift_down: down,
                m2_cont: m2c,
                qv2_pred: qv2,
                qv2_cont: qv2,
                ..Default::default()
            }
        };

        // Emergency stop for a many-standard-deviation single cell that
        // would push Y below zero: drop the cell and freeze instead.
        let m1c = comp.hedge * comp.mx_cont;
        let m1j = comp.hedge * comp.mx_jump.unwrap_or(0.0);
        let dy = (((comp.drift_up - comp.drift_down) + m1c) + m1j) + comp.m2_cont;
        if b.y_acc() + dy < 0.0 {
            frozen_at = Some(i);
            b.push_step(i, StepComponents::default())?;
            continue;
        }

        if hit {
            absorbed_at = Some(i + 1);
        }
        b.push_step(i, comp)?;
        w_y = (w_y + (rho * w_y) * dt) + (rho * db + s * dbeta);
    }

    if let Some(node) = absorbed_at {
        b.meta_mut().events.push(PathEvent {
            label: "absorption".into(),
            node,
        });
        b.meta_mut().frozen_from = Some(node);
    }
    if let Some(node) = frozen_at {
        b.meta_mut().frozen_from = Some(node);
    }
    Ok(b.finish(false)?)
}
