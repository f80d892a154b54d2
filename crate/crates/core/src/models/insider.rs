//! A defaultable growth claim priced in two one-sided information sets,
//! watched by an agent who holds both — and for whom no deflator works.
//!
//! The payoff is `ξ = 1{τ > T} ℰ(B)_T`: the terminal value of a
//! geometric Brownian motion, paid only if an independent exponential
//! default clock `τ` (rate `λ`) outlasts the horizon. The two markets
//! know complementary halves of the picture from time zero:
//!
//! * the `X` market sees the terminal level `B_T` immediately and
//!   watches only the default clock:
//!   `X_t = 1{τ > t} e^{−λ(T−t)} ℰ(B)_T` — a martingale in its own
//!   filtration, compensating default risk by deterministic growth;
//! * the `Y` market watches the Brownian path and knows the default
//!   verdict from the start: `Y_t = 1{τ > T} ℰ(B)_t`, the exponential
//!   itself on surviving paths and identically zero otherwise.
//!
//! The composite observer knows `B_T` *and* `τ` at time zero. In that
//! information set `X` is predictable and of finite variation — smooth
//! exponential growth, then a drop to zero at a default instant known
//! in advance — and the growth/drop sign change means no equivalent
//! measure of any kind can tame it. `B` itself becomes a bridge pinned
//! at `B_T`, so `Y` acquires the predictable tilt
//! `+Y_u (B_T − B_u)/(T−u) du` against its martingale noise `Y dβ`.
//! The candidate deflator kernel for that tilt,
//! `(B_T − B_u)⁺/(T−u)`, fails to be square integrable as `u → T`, so
//! the associated exponential deflates mass away instead of changing
//! measure — the failure this model exists to exhibit.
//!
//! Discretization. `B_T` is drawn first, then the default clock, then a
//! Brownian bridge into `B_T`. All node prices are exact closed forms,
//! pinned bitwise. `Y`'s per-cell drift is the *exact* conditional mean
//! of the lognormal step given the bridge state (not a left-point
//! quadrature), so the recorded orthogonal increments are exactly
//! centered, with the exact lognormal conditional variance as their
//! bracket; on the final cell the bridge step is deterministic, and the
//! recording is all drift with zero variance — which is precisely where
//! a density built from the structural ratio would need to divide by
//! zero, and why this model supplies its deflator kernel in closed form
//! instead. `X`'s motion is carried entirely by the singular
//! finite-variation slot (its martingale slots stay empty), the default
//! drop landing on the cell whose right node first reaches `τ`.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::path::{DecomposedPath, PathBuilder, PathEvent, PathMeta, SimMode, StepComponents};
use crate::simkernel::{
    brownian_bridge_increments, path_seed, pin_increment, rng_for, sample_default_time,
};

use super::{base_grid, require, DeflatorKernels, GridSpec, ModelError};

const MODEL: &str = "insider_defaultable";

pub(super) fn simulate(
    lambda: f64,
    grid_spec: &GridSpec,
    seed: u64,
) -> Result<DecomposedPath, ModelError> {
    require(MODEL, "lambda", lambda, "(0, inf)", lambda > 0.0)?;
    let grid = base_grid(grid_spec)?;
    let n = grid.n_steps();
    let horizon = grid_spec.horizon;

    // The composite observer's time-zero knowledge, in draw order: the
    // terminal Brownian level, the default verdict, then the bridge
    // that fills in the path.
    let z: f64 = rng_for(path_seed(seed, 1)).sample(StandardNormal);
    let b_terminal = horizon.sqrt() * z;
    let tau = sample_default_time(|_| lambda, horizon, path_seed(seed, 2))?;
    let bridge = brownian_bridge_increments(&grid, b_terminal, path_seed(seed, 3));

    let estar = (b_terminal - 0.5 * horizon).exp();
    let x0 = (-lambda * horizon).exp() * estar;
    // First node at or past the default instant; the drop is recorded
    // on the cell ending there.
    let default_node = tau.map(|t| grid.points().partition_point(|&p| p < t));

    let meta = PathMeta {
        model: MODEL.into(),
        mode: SimMode::Analytic,
        claims_drift_dominated: false,
        x_normal_form_expected: false,
        frozen_from: None,
        events: Vec::new(),
    };

    match default_node {
        Some(k) => {
            // The claim is void and the Y market knows it from time
            // zero: Y ≡ 0. X grows while the clock runs and drops to
            // zero on the cell reaching τ.
            let mut b = PathBuilder::new(Arc::clone(&grid), x0, 0.0, meta);
            for i in 0..n {
                let fvs = if i + 1 < k {
                    let t_next = grid.points()[i + 1];
                    pin_increment(b.x_acc(), (-lambda * (horizon - t_next)).exp() * estar)
                } else if i + 1 == k {
                    pin_increment(b.x_acc(), 0.0)
                } else {
                    0.0
                };
                b.push_step(
                    i,
                    StepComponents {
                        fv_singular_x: fvs,
                        ..Default::default()
                    },
                )?;
            }
            b.meta_mut().events.push(PathEvent {
                label: "default".into(),
                node: k,
            });
            Ok(b.finish(true)?)
        }
        None => {
            let mut b = PathBuilder::new(Arc::clone(&grid), x0, 1.0, meta);
            let mut b_left = 0.0_f64;
            for i in 0..n {
                let t = grid.points()[i];
                let t_next = grid.points()[i + 1];
                let dt = grid.step_len(i);
                let b_next = b_left + bridge.values()[i];
                let (x_target, y_target) = if i + 1 == n {
                    (estar, estar)
                } else {
                    (
                        (-lambda * (horizon - t_next)).exp() * estar,
                        (b_next - 0.5 * t_next).exp(),
                    )
                };
                let fvs = pin_increment(b.x_acc(), x_target);

                let comp = if i + 1 == n {
                    // The bridge's final step is deterministic given the
                    // left state, so the whole increment is predictable
                    // drift and the cell carries no variance at all.
                    let ed = pin_increment(b.y_acc(), y_target);
                    let (up, down) = if ed >= 0.0 { (ed, 0.0) } else { (0.0, -ed) };
                    StepComponents {
                        fv_singular_x: fvs,
                        drift_up: up,
                        drift_down: down,
                        ..Default::default()
                    }
                } else {
                    // Exact lognormal conditional moments of the step:
                    // given the bridge state, ΔB ~ N(μ, σ²) with the
                    // bridge pull μ and the shortened variance σ², so
                    // E[Y'/Y] − 1 = e^{μ − Δt/2 + σ²/2} − 1 and
                    // Var[Y'] = Y² e^{2m+σ²}(e^{σ²} − 1).
                    let remaining = horizon - t;
                    let mu = (b_terminal - b_left) * dt / remaining;
                    let sigma2 = dt * (horizon - t_next) / remaining;
                    let m = mu - 0.5 * dt + 0.5 * sigma2;
                    let y_left = b.y_acc();
                    let ed = y_left * m.exp_m1();
                    let (up, down) = if ed >= 0.0 { (ed, 0.0) } else { (0.0, -ed) };
                    let qv2 = (y_left * y_left) * (2.0 * m + sigma2).exp() * sigma2.exp_m1();
                    let m2c = crate::path::pin_component(y_left, y_target, up - down);
                    StepComponents {
                        fv_singular_x: fvs,
                        drift_up: up,
                        drift_down: down,
                        m2_cont: m2c,
                        qv2_pred: qv2,
                        qv2_cont: qv2,
                        ..Default::default()
                    }
                };
                b.push_step(i, comp)?;
                b_left = b_next;
            }
            Ok(b.finish(true)?)
        }
    }
}

/// Closed-form deflator kernels. The structural route (drift divided by
/// bracket) would hit the final cell's zero variance; the model knows
/// its own kernel `(B_T − B_i)⁺ / (Y_i (T − t_i))`, reconstructing the
/// driver level from `B_i = ln Y_i + t_i/2`. Defaulted paths have
/// `Y ≡ 0`, no orthogonal noise, and need no tilt.
pub(super) fn kernels(path: &DecomposedPath) -> DeflatorKernels {
    let n = path.n_steps();
    let hedged = vec![0.0; n];
    if path.y[0] == 0.0 {
        return DeflatorKernels {
            hedged,
            ortho: vec![0.0; n],
        };
    }
    let horizon = path.grid.horizon();
    let b_terminal = path.y[n].ln() + 0.5 * horizon;
    let ortho = (0..n)
        .map(|i| {
            let t = path.grid.points()[i];
            let b_i = path.y[i].ln() + 0.5 * t;
            (b_terminal - b_i).max(0.0) / (path.y[i] * (horizon - t))
        })
        .collect();
    DeflatorKernels { hedged, ortho }
}
