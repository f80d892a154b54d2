//! Two prices driven by one absorbed Brownian martingale, linked by a
//! deterministic hedge schedule that starts negative.
//!
//! The first price is the martingale itself, absorbed at zero so it
//! stays a price: `X_t = x0 + M_t` with `M` a Brownian motion stopped
//! when `X` reaches the floor. The second price integrates a
//! deterministic hedge against the same martingale and adds a
//! predictable drift proportional to the running martingale value:
//!
//! ```text
//! h(t) = 1 + e^{rt} − e^{rT},      dY_t = h(t) dM_t + M_t (−r e^{rt}) d⟨M⟩_t.
//! ```
//!
//! When `e^{rT} > 2` the hedge is nonpositive on an initial interval
//! `[0, S]`, `S = ln(e^{rT} − 1)/r`, while the drift integrand
//! `M_t·(−r e^{rt})` is positive exactly where the martingale is
//! negative. Cells inside `[0, S]` visited during a negative excursion
//! of `M` therefore carry strictly upward drift against a nonpositive
//! price covariation `h·d⟨M⟩` — the configuration the covariation-rule
//! analyzer flags, and the raw material for the exploit-construction
//! pipeline. The orthogonal martingale component is identically zero.
//!
//! Discretization: cells record the left-point drift
//! `(X_i − x0)(−r e^{r t_i})Δt_i`, the free Gaussian increment when the
//! cell survives, and a marked jump to the floor when the within-cell
//! bridge minimum crosses it (so absorption is decided exactly, not at
//! node resolution, and the recorded process is a martingale with no
//! discretization bias). The per-cell predictable variance is the
//! closed-form second moment of the absorbed step, which is bitwise
//! `Δt_i` away from the floor. After absorption the bracket of `M`
//! stops growing, so every later cell is all-zero and `Y` is constant.

use std::sync::Arc;

use crate::path::{DecomposedPath, PathBuilder, PathEvent, PathMeta, SimMode, StepComponents};
use crate::simkernel::{
    bridge_minimum, brownian_increments, path_seed, rng_for, uniform_open_closed,
};

use super::util::absorbed_step_variance;
use super::{base_grid, require, GridSpec, ModelError};

const MODEL: &str = "deterministic_h";

/// Fraction of the starting price below which the whole path is frozen,
/// protecting `Y` (which has no natural floor of its own) from ever
/// going negative. The trigger reads only start-of-cell state, so the
/// freeze is a stopping rule and leaves every martingale property
/// intact.
const FREEZE_FRACTION: f64 = 0.25;

pub(super) fn simulate(
    r: f64,
    x0: f64,
    grid_spec: &GridSpec,
    seed: u64,
) -> Result<DecomposedPath, ModelError> {
    require(MODEL, "r", r, "(0, inf)", r > 0.0)?;
    require(MODEL, "x0", x0, "(0, inf)", x0 > 0.0)?;
    let grid = base_grid(grid_spec)?;
    let n = grid.n_steps();
    let e_rt_horizon = (r * grid_spec.horizon).exp();

    let gauss = brownian_increments(&grid, path_seed(seed, 1));
    let mut urng = rng_for(path_seed(seed, 2));

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
    let mut absorbed_at: Option<usize> = None;
    let mut frozen_at: Option<usize> = None;

    for i in 0..n {
        if frozen_at.is_some() {
            b.push_step(i, StepComponents::default())?;
            continue;
        }
        let t = grid.points()[i];
        let h = 1.0 + (r * t).exp() - e_rt_horizon;
        if absorbed_at.is_some() {
            // X sits on the floor and its bracket no longer grows, so
            // both of Y's integrals are flat; only the (deterministic)
            // hedge value is still worth recording.
            b.push_step(
                i,
                StepComponents {
                    hedge: h,
                    ..Default::default()
                },
            )?;
            continue;
        }
        if b.y_acc() <= kappa {
            frozen_at = Some(i);
            b.push_step(i, StepComponents::default())?;
            continue;
        }

        let dt = grid.step_len(i);
        let x_left = b.x_acc();
        let drift = ((x_left - x0) * (-r * (r * t).exp())) * dt;
        let (up, down) = if drift >= 0.0 { (drift, 0.0) } else { (0.0, -drift) };
        let db = gauss.values()[i];
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
                ..Default::default()
            }
        };

        // Emergency stop: a single cell that would push Y below zero
        // (an eight-standard-deviation move from above the freeze
        // threshold; practically unreachable) is dropped in favor of a
        // freeze, so positive prices are unconditional.
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
    }

    if let Some(node) = absorbed_at {
        b.meta_mut().events.push(PathEvent {
            label: "absorption".into(),
            node,
        });
    }
    if let Some(node) = frozen_at {
        b.meta_mut().frozen_from = Some(node);
    }
    Ok(b.finish(false)?)
}
