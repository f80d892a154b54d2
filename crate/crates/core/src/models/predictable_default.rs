//! A default announced in advance by an observed diffusion, priced
//! against a survival claim whose whole motion is predictable finite
//! variation.
//!
//! An observed Brownian motion `W` starts one unit above a barrier; the
//! default time `τ` is the first barrier touch, so anyone watching `W`
//! sees death coming: `τ` is announced by the approach. Two prices ride
//! on this clock over the horizon `T`:
//!
//! ```text
//! X_t = P(τ > T | W_t) = 1 − 2Φ((barrier − W_t)/√(T−t)),
//! Y_t = 1{τ > t} · e^{−λʸ (T−t)}.
//! ```
//!
//! `X` is the honest conditional survival probability — an exact
//! martingale by optional sampling — and it collapses to zero
//! *continuously* as `W` slides into the barrier: an announced default
//! never makes the observer's price jump. `Y` is the price quoted by a
//! market that treats death as a surprise arriving at rate `λʸ`: while
//! alive it grows deterministically toward the payoff, and at `τ` it
//! drops to zero in one predictable step. Its martingale components are
//! identically zero, so every pre-default cell carries strictly upward
//! drift against zero quadratic variation — the exploitable
//! configuration on every path, realized by buying the claim at time
//! zero and selling it at the announcement for
//! `e^{−λʸ(T−θ)} − e^{−λʸT} > 0`, where `θ` is the cell boundary at
//! which the default is recorded.
//!
//! Discretization. The crossing cell is found with the exact bridge
//! minimum law, so the discrete default probability equals the
//! continuous one (`2Φ(−1/√T)` from a unit start). On a defaulted path
//! the midpoint of the crossing cell joins the grid as an announcement
//! node: the half-cell before it absorbs all remaining dynamics (`X`
//! finishes its slide to zero, `Y` completes its growth to the
//! pre-default value `e^{−λʸ(T−θ)}`), and the half-cell after it
//! carries the drop of `Y` alone, with every driver and every bracket
//! exactly zero — the predictable atom sits isolated on a cell whose
//! recorded quadratic variation vanishes bitwise. Both prices converge
//! to the survival indicator at the horizon. The bracket of `X` is
//! recorded as the realized squared increment per cell; the analyses
//! this model feeds read only its positivity pattern, and the price
//! covariation `h·d⟨X⟩` vanishes identically because the hedge is
//! zero.

use std::sync::Arc;

use crate::path::{DecomposedPath, PathBuilder, PathEvent, PathMeta, SimMode, StepComponents};
use crate::simkernel::{
    bridge_minimum, brownian_increments, path_seed, pin_increment, rng_for, uniform_open_closed,
};

use super::util::hit_probability;
use super::{base_grid, require, GridSpec, ModelError};

const MODEL: &str = "predictable_default";

/// Barrier for the observed diffusion, one unit below its start.
const BARRIER: f64 = -1.0;

pub(super) fn simulate(
    lambda_y: f64,
    grid_spec: &GridSpec,
    seed: u64,
) -> Result<DecomposedPath, ModelError> {
    require(MODEL, "lambda_y", lambda_y, "(0, inf)", lambda_y > 0.0)?;
    let base = base_grid(grid_spec)?;
    let n = base.n_steps();
    let horizon = grid_spec.horizon;

    // Phase one: walk the observed diffusion on the uniform grid and
    // locate the cell whose within-cell bridge minimum first touches
    // the barrier.
    let gauss = brownian_increments(&base, path_seed(seed, 1));
    let mut urng = rng_for(path_seed(seed, 2));
    let mut w_nodes = vec![0.0f64];
    let mut crossing: Option<usize> = None;
    for i in 0..n {
        let w = w_nodes[i];
        let dw = gauss.values()[i];
        let u = uniform_open_closed(&mut urng);
        if bridge_minimum(w, w + dw, base.step_len(i), u) <= BARRIER {
            crossing = Some(i);
            break;
        }
        w_nodes.push(w + dw);
    }

    let survival_price = |w: f64, t: f64| 1.0 - hit_probability(w - BARRIER, horizon - t);
    let discount = |t: f64| (-lambda_y * (horizon - t)).exp();
    let live_cell = |x_acc: f64, x_target: f64, y_acc: f64, y_target: f64| {
        let mxc = pin_increment(x_acc, x_target);
        StepComponents {
            mx_cont: mxc,
            qvx_pred: mxc * mxc,
            qvx_cont: mxc * mxc,
            drift_up: pin_increment(y_acc, y_target),
            ..Default::default()
        }
    };

    let meta = PathMeta {
        model: MODEL.into(),
        mode: SimMode::Analytic,
        claims_drift_dominated: false,
        x_normal_form_expected: true,
        frozen_from: None,
        events: Vec::new(),
    };

    // Phase two: record the prices. At the horizon the survival price
    // formula degenerates to the indicator itself, so survived paths
    // pin both prices to one exactly.
    match crossing {
        None => {
            let mut b = PathBuilder::new(
                Arc::clone(&base),
                survival_price(0.0, 0.0),
                discount(0.0),
                meta,
            );
            for i in 0..n {
                let t_next = base.points()[i + 1];
                let comp = live_cell(
                    b.x_acc(),
                    survival_price(w_nodes[i + 1], t_next),
                    b.y_acc(),
                    discount(t_next),
                );
                b.push_step(i, comp)?;
            }
            Ok(b.finish(true)?)
        }
        Some(j) => {
            let theta = base.points()[j + 1];
            let midpoint = 0.5 * (base.points()[j] + theta);
            let grid = Arc::new(crate::grid::make_grid(horizon, n, &[midpoint])?);
            debug_assert_eq!(grid.n_steps(), n + 1);
            let mut b = PathBuilder::new(
                Arc::clone(&grid),
                survival_price(0.0, 0.0),
                discount(0.0),
                meta,
            );
            for k in 0..grid.n_steps() {
                let comp = if k < j {
                    let t_next = grid.points()[k + 1];
                    live_cell(
                        b.x_acc(),
                        survival_price(w_nodes[k + 1], t_next),
                        b.y_acc(),
                        discount(t_next),
                    )
                } else if k == j {
                    // Dynamics half-cell: the observed price finishes
                    // its continuous collapse and the survival claim
                    // completes its growth to the pre-default value.
                    live_cell(b.x_acc(), 0.0, b.y_acc(), discount(theta))
                } else if k == j + 1 {
                    // Atom half-cell: nothing moves except the
                    // predictable drop of the claim to zero.
                    StepComponents {
                        drift_down: b.y_acc(),
                        ..Default::default()
                    }
                } else {
                    StepComponents::default()
                };
                b.push_step(k, comp)?;
            }
            b.meta_mut().events.push(PathEvent {
                label: "announcement".into(),
                node: j + 1,
            });
            b.meta_mut().events.push(PathEvent {
                label: "default".into(),
                node: j + 2,
            });
            Ok(b.finish(true)?)
        }
    }
}
