//! Two converging claims on a pair of independent default clocks,
//! priced under crossed information sets.
//!
//! Two independent driving diffusions `W¹`, `W²` run on deterministic
//! variance clocks calibrated so that the first passage of `Wⁱ` over
//! the barrier `bⁱ` — the default time `θⁱ` — is exponentially
//! distributed with rate `rⁱ`. The shared payoff at the horizon is
//!
//! ```text
//! ξ = 1{θ¹ > T} + 1{θ² ≤ T}.
//! ```
//!
//! The first investor watches `W²` continuously but sees only the
//! clock of `θ¹`; the second watches `W¹` continuously but sees only
//! the clock of `θ²`. Each therefore prices one leg on bare
//! survival/default odds and the other on the observed hitting
//! distance:
//!
//! ```text
//! X_t = 1{θ¹>t} e^{−r¹(T−t)}          + P(θ² ≤ T | W²_{[0,t]}),
//! Y_t = P(θ¹ > T | W¹_{[0,t]})        + [1{θ²≤t} + 1{θ²>t}(1 − e^{−r²(T−t)})].
//! ```
//!
//! Both prices end at `ξ` exactly. The odds-priced legs are where the
//! structure lives: `X` drifts up at the hazard rate and takes a
//! predictable downward jump of `e^{−r¹(T−θ¹)}` at the first default
//! (its singular finite-variation part), while `Y` decays at the
//! hazard rate and takes a predictable *upward* jump of
//! `e^{−r²(T−θ²)}` at the second default, recorded in the increasing
//! drift slot. For an observer holding both information sets the
//! jump times are announced by the observed diffusions, so the upward
//! jump is an increasing predictable move with no quadratic variation
//! under it — the exploitable cell that buying just before `θ²` and
//! selling at `θ²` converts into the jump mass. The diffusion-priced
//! legs are continuous martingales in the opposite drivers, so the two
//! prices share no martingale risk and the hedge ratio is identically
//! zero.
//!
//! Discretization. Within-cell maxima of the drivers are drawn from
//! the exact bridge law, so crossing cells carry no time-stepping
//! bias; a default is realized at the right node of its crossing cell.
//! In analytic mode the crossing cell is split so each default jump
//! occupies its own atom sub-cell (a midpoint split for one event,
//! thirds when both clocks default in the same base cell), leaving the
//! atom with exactly zero quadratic variation. In Euler mode the base
//! grid is kept and the atom lands net in its crossing cell: the
//! upward jump and the cell's decay fold into a single increasing mass
//! `e^{−r²(T−t_left)}`. Cells pin their node values to the closed
//! forms bitwise, with the closure assigned to the martingale slot on
//! stochastic cells and to the drift slot on deterministic ones.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::grid::make_grid;
use crate::path::{
    pin_component, DecomposedPath, PathBuilder, PathEvent, PathMeta, SimMode, StepComponents,
};
use crate::simkernel::{bridge_maximum, path_seed, pin_increment, rng_for, uniform_open_closed};

use super::util::{hit_probability, norm_ppf};
use super::{base_grid, require, GridSpec, ModelError};

const MODEL: &str = "two_defaults";

/// Deterministic variance clock making the barrier hit exponential:
/// solving `2Φ(−b/√A(t)) = 1 − e^{−rt}` for the accumulated variance
/// gives `A(t) = b² / Φ⁻¹((1 − e^{−rt})/2)²`.
fn clock(rate: f64, barrier: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let c_half = 0.5 * (-(-rate * t).exp_m1());
    let z = norm_ppf(c_half);
    (barrier * barrier) / (z * z)
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    /// A whole base cell (also the net default cells of Euler mode).
    Full,
    /// The compressed-dynamics part of a split crossing cell.
    Dynamics,
    /// The pure downward-jump sub-cell of the first default.
    AtomX,
    /// The pure upward-jump sub-cell of the second default.
    AtomY,
}

#[allow(clippy::too_many_arguments)]
pub(super) fn simulate(
    rate1: f64,
    rate2: f64,
    barrier1: f64,
    barrier2: f64,
    grid_spec: &GridSpec,
    mode: SimMode,
    seed: u64,
) -> Result<DecomposedPath, ModelError> {
    require(MODEL, "rate1", rate1, "(0, inf)", rate1 > 0.0)?;
    require(MODEL, "rate2", rate2, "(0, inf)", rate2 > 0.0)?;
    require(MODEL, "barrier1", barrier1, "(0, inf)", barrier1 > 0.0)?;
    require(MODEL, "barrier2", barrier2, "(0, inf)", barrier2 > 0.0)?;
    let base = base_grid(grid_spec)?;
    let horizon = grid_spec.horizon;
    let n = base.n_steps();
    let points = base.points().to_vec();

    // Drive both observed diffusions across the base grid in their own
    // variance clocks, drawing within-cell maxima from the exact
    // bridge law. All four streams advance every cell, so the draw
    // layout does not depend on the path's own events.
    let clock1: Vec<f64> = points.iter().map(|&t| clock(rate1, barrier1, t)).collect();
    let clock2: Vec<f64> = points.iter().map(|&t| clock(rate2, barrier2, t)).collect();
    let mut g1 = rng_for(path_seed(seed, 1));
    let mut g2 = rng_for(path_seed(seed, 2));
    let mut u1 = rng_for(path_seed(seed, 3));
    let mut u2 = rng_for(path_seed(seed, 4));
    let mut w1 = vec![0.0_f64; n + 1];
    let mut w2 = vec![0.0_f64; n + 1];
    let mut cross1: Option<usize> = None;
    let mut cross2: Option<usize> = None;
    for i in 0..n {
        let dv1 = clock1[i + 1] - clock1[i];
        let dv2 = clock2[i + 1] - clock2[i];
        let z1: f64 = g1.sample(StandardNormal);
        let z2: f64 = g2.sample(StandardNormal);
        let a1 = uniform_open_closed(&mut u1);
        let a2 = uniform_open_closed(&mut u2);
        w1[i + 1] = w1[i] + dv1.sqrt() * z1;
        w2[i + 1] = w2[i] + dv2.sqrt() * z2;
        if cross1.is_none() && bridge_maximum(w1[i], w1[i + 1], dv1, a1) >= barrier1 {
            cross1 = Some(i);
        }
        if cross2.is_none() && bridge_maximum(w2[i], w2[i + 1], dv2, a2) >= barrier2 {
            cross2 = Some(i);
        }
    }

    // Plan the refined grid: in analytic mode each crossing cell gets
    // its jump isolated on an inserted atom sub-cell.
    let surgery = mode == SimMode::Analytic;
    let mut inserted: Vec<f64> = Vec::new();
    let mut plan: Vec<(usize, Role)> = Vec::new();
    for i in 0..n {
        let t0 = points[i];
        let t1 = points[i + 1];
        let x_here = surgery && cross1 == Some(i);
        let y_here = surgery && cross2 == Some(i);
        match (x_here, y_here) {
            (false, false) => plan.push((i, Role::Full)),
            (true, false) => {
                inserted.push(0.5 * (t0 + t1));
                plan.push((i, Role::Dynamics));
                plan.push((i, Role::AtomX));
            }
            (false, true) => {
                inserted.push(0.5 * (t0 + t1));
                plan.push((i, Role::Dynamics));
                plan.push((i, Role::AtomY));
            }
            (true, true) => {
                let dt = t1 - t0;
                inserted.push(t0 + dt / 3.0);
                inserted.push(t0 + 2.0 * dt / 3.0);
                plan.push((i, Role::Dynamics));
                plan.push((i, Role::AtomX));
                plan.push((i, Role::AtomY));
            }
        }
    }
    let grid = if inserted.is_empty() {
        Arc::clone(&base)
    } else {
        Arc::new(make_grid(horizon, n, &inserted)?)
    };
    debug_assert_eq!(grid.n_steps(), plan.len());

    // Closed-form node values on the base grid.
    let sm1: Vec<f64> = points
        .iter()
        .map(|&t| (-rate1 * (horizon - t)).exp())
        .collect();
    let cm2: Vec<f64> = points
        .iter()
        .map(|&t| (-rate2 * (horizon - t)).exp())
        .collect();
    let p_at = |k: usize| -> f64 {
        match cross2 {
            Some(j) if k > j => 1.0,
            _ => hit_probability(barrier2 - w2[k], clock2[n] - clock2[k]),
        }
    };
    let q_at = |k: usize| -> f64 {
        match cross1 {
            Some(j) if k > j => 0.0,
            _ => 1.0 - hit_probability(barrier1 - w1[k], clock1[n] - clock1[k]),
        }
    };

    let meta = PathMeta {
        model: MODEL.into(),
        mode,
        claims_drift_dominated: false,
        x_normal_form_expected: false,
        frozen_from: None,
        events: Vec::new(),
    };
    let x0_val = sm1[0] + p_at(0);
    let y0_val = q_at(0) + (1.0 - cm2[0]);
    let mut b = PathBuilder::new(Arc::clone(&grid), x0_val, y0_val, meta);

    for (k, &(i, role)) in plan.iter().enumerate() {
        let alive1 = cross1.map_or(true, |j| i <= j);
        let alive2 = cross2.map_or(true, |j| i <= j);
        let mut c = StepComponents::default();
        match role {
            Role::AtomX => {
                // The survival leg is dropped in one predictable
                // singular move; the diffusion legs stand still.
                c.fv_singular_x = pin_increment(b.x_acc(), p_at(i + 1));
                b.meta_mut().events.push(PathEvent {
                    label: "default_x".into(),
                    node: k + 1,
                });
            }
            Role::AtomY => {
                // The default leg is restored to par in one
                // predictable increasing move with zero quadratic
                // variation under it.
                c.drift_up = pin_increment(b.y_acc(), q_at(i + 1) + 1.0);
                b.meta_mut().events.push(PathEvent {
                    label: "default_y".into(),
                    node: k + 1,
                });
            }
            Role::Full | Role::Dynamics => {
                let net = role == Role::Full;
                let x_atom_net = net && cross1 == Some(i);
                let y_atom_net = net && cross2 == Some(i);

                // First price: deterministic survival growth plus the
                // hit-odds martingale in the second driver. When both
                // clocks default in one split cell the survival leg is
                // dropped at the middle inserted node, so its growth
                // runs only that far.
                let x_cap = if surgery && cross1 == Some(i) && cross2 == Some(i) {
                    let dt = points[i + 1] - points[i];
                    let drop_node = points[i] + 2.0 * dt / 3.0;
                    (-rate1 * (horizon - drop_node)).exp()
                } else {
                    sm1[i + 1]
                };
                if alive1 {
                    c.fv_drift_x = x_cap - sm1[i];
                }
                if x_atom_net {
                    c.fv_singular_x = -x_cap;
                }
                let s_term = if alive1 && !x_atom_net { x_cap } else { 0.0 };
                let x_target = s_term + p_at(i + 1);
                if alive2 {
                    let off = c.fv_singular_x + c.fv_drift_x;
                    c.mx_cont = pin_component(b.x_acc(), x_target, off);
                    let qv = c.mx_cont * c.mx_cont;
                    c.qvx_pred = qv;
                    c.qvx_cont = qv;
                } else {
                    // The hit-odds leg is frozen at par: the cell is
                    // deterministic, so the closure lives in the drift
                    // and the martingale stays exactly flat.
                    c.fv_drift_x = pin_component(b.x_acc(), x_target, c.fv_singular_x);
                }

                // Second price: hazard decay plus the survival-odds
                // martingale in the first driver.
                let c_term = if alive2 && !y_atom_net {
                    1.0 - cm2[i + 1]
                } else {
                    1.0
                };
                let y_target = q_at(i + 1) + c_term;
                if y_atom_net {
                    // Net default cell: the upward jump and the cell's
                    // decay fold into one increasing flow worth the
                    // left-node conditional claim.
                    c.drift_up = cm2[i];
                } else if alive2 {
                    c.drift_down = cm2[i + 1] - cm2[i];
                }
                if alive1 || y_atom_net {
                    let m1c = c.hedge * c.mx_cont;
                    let m1j = c.hedge * c.mx_jump.unwrap_or(0.0);
                    let off = ((c.drift_up - c.drift_down) + m1c) + m1j;
                    c.m2_cont = pin_component(b.y_acc(), y_target, off);
                    let qv = c.m2_cont * c.m2_cont;
                    c.qv2_pred = qv;
                    c.qv2_cont = qv;
                } else {
                    // Pure decay (or frozen) cell: land exactly through
                    // the signed drift pair.
                    let v = pin_increment(b.y_acc(), y_target);
                    c.drift_up = 0.0;
                    c.drift_down = if v == 0.0 { 0.0 } else { -v };
                }

                // Net cells still mark their default instants.
                if x_atom_net {
                    b.meta_mut().events.push(PathEvent {
                        label: "default_x".into(),
                        node: k + 1,
                    });
                }
                if y_atom_net {
                    b.meta_mut().events.push(PathEvent {
                        label: "default_y".into(),
                        node: k + 1,
                    });
                }
            }
        }
        b.push_step(k, c)?;
    }

    Ok(b.finish(true)?)
}
