//! A price estimated from noisy observation of the other, repaired by a
//! terminal reveal.
//!
//! The first price is a Brownian martingale `X_t = x0 + W^X_t`. The
//! second market cannot see `X`; it sees the observation flow
//! `dO_t = X_t dt + dW_t` (independent unit noise) and quotes the
//! conditional-mean estimate, which for this linear setup is the
//! classical one-dimensional filter
//!
//! ```text
//! dY_t = ψ_t dN_t,      dN_t = dO_t − Y_t dt      (innovation),
//! dψ/dt = 1 − ψ²,       ψ_0 = 0,
//! ```
//!
//! whose gain solves the scalar Riccati equation above (closed form
//! `tanh t`, integrated numerically here so the schedule generalizes).
//! At the horizon the true value is revealed and the second price jumps
//! to it: `Y_T := X_T`. Seen jointly, `Y`'s noise is entirely the
//! observation noise — orthogonal to `X`'s driver, so the hedged
//! martingale component is identically zero — its drift is
//! `ψ_t (X_t − Y_t) dt`, and the reveal is a finite-variation lump of
//! either sign on the final cell, which carries no quadratic variation
//! at all. An upward lump on a variation-free cell is exactly the
//! configuration the no-exploit conditions forbid, which is the point
//! of the model.
//!
//! Discretization: the gain is advanced by a fixed-substep Runge–Kutta
//! sweep, cells record the left-point filter recursion exactly, and the
//! final cell replaces the filter update with the reveal lump, pinned so
//! the two terminal prices agree bitwise.

use std::sync::Arc;

use crate::grid::TimeGrid;
use crate::path::{DecomposedPath, PathBuilder, PathEvent, PathMeta, SimMode, StepComponents};
use crate::simkernel::{brownian_increments, path_seed, pin_increment};

use super::{base_grid, require, GridSpec, ModelError};

const MODEL: &str = "filtering";

/// Gain schedule of the observation filter at every grid node: the
/// solution of `dψ/dt = 1 − ψ²`, `ψ(0) = 0`, advanced with four
/// classical Runge–Kutta substeps per cell (global error far below the
/// `tanh` closed form's float resolution on any reasonable grid).
pub fn observation_gain(grid: &Arc<TimeGrid>) -> Vec<f64> {
    let slope = |p: f64| 1.0 - p * p;
    let mut out = Vec::with_capacity(grid.n_steps() + 1);
    let mut p = 0.0f64;
    out.push(p);
    for i in 0..grid.n_steps() {
        let h = grid.step_len(i) / 4.0;
        for _ in 0..4 {
            let k1 = slope(p);
            let k2 = slope(p + 0.5 * h * k1);
            let k3 = slope(p + 0.5 * h * k2);
            let k4 = slope(p + h * k3);
            p += (h / 6.0) * (((k1 + 2.0 * k2) + 2.0 * k3) + k4);
        }
        out.push(p);
    }
    out
}

pub(super) fn simulate(
    x0: f64,
    grid_spec: &GridSpec,
    seed: u64,
) -> Result<DecomposedPath, ModelError> {
    // The signal is a unit-volatility Brownian motion and is not
    // absorbed, so the start must leave many standard deviations of
    // headroom above zero for prices to stay positive.
    require(MODEL, "x0", x0, "[8, inf)", x0 >= 8.0)?;
    let grid = base_grid(grid_spec)?;
    let n = grid.n_steps();
    let psi = observation_gain(&grid);

    let gauss_state = brownian_increments(&grid, path_seed(seed, 1));
    let gauss_obs = brownian_increments(&grid, path_seed(seed, 2));

    let meta = PathMeta {
        model: MODEL.into(),
        mode: SimMode::Analytic,
        // The reveal lump lands on a cell with no quadratic variation.
        claims_drift_dominated: false,
        x_normal_form_expected: true,
        frozen_from: None,
        events: Vec::new(),
    };
    let mut b = PathBuilder::new(Arc::clone(&grid), x0, x0, meta);
    let mut frozen_at: Option<usize> = None;

    for i in 0..n.saturating_sub(1) {
        if frozen_at.is_some() {
            b.push_step(i, StepComponents::default())?;
            continue;
        }
        let dt = grid.step_len(i);
        let x_left = b.x_acc();
        let y_left = b.y_acc();
        let dwx = gauss_state.values()[i];
        let dw = gauss_obs.values()[i];
        let drift = (psi[i] * (x_left - y_left)) * dt;
        let (up, down) = if drift >= 0.0 { (drift, 0.0) } else { (0.0, -drift) };
        let m2c = psi[i] * dw;
        let qv2 = (psi[i] * psi[i]) * dt;
        let comp = StepComponents {
            mx_cont: dwx,
            qvx_pred: dt,
            qvx_cont: dt,
            drift_up: up,
            drift_down: down,
            m2_cont: m2c,
            qv2_pred: qv2,
            qv2_cont: qv2,
            ..Default::default()
        };
        // With the start many standard deviations above zero this
        // branch is unreachable in practice, but it makes positive
        // prices unconditional.
        let dy = (up - down) + m2c;
        if x_left + dwx < 0.0 || y_left + dy < 0.0 {
            frozen_at = Some(i);
            b.push_step(i, StepComponents::default())?;
            continue;
        }
        b.push_step(i, comp)?;
    }

    // Final cell: the signal takes its last step, the estimate drops its
    // filter update and jumps to the revealed value, pinned bitwise.
    let last = n - 1;
    let dwx = if frozen_at.is_some() {
        0.0
    } else {
        gauss_state.values()[last]
    };
    let x_next = b.x_acc() + dwx;
    if x_next < 0.0 {
        // Freakish terminal step; drop it rather than record a negative
        // price. The reveal lump below still closes the gap.
        frozen_at = Some(last);
    }
    let dwx = if frozen_at == Some(last) { 0.0 } else { dwx };
    let x_target = b.x_acc() + dwx;
    let lump = pin_increment(b.y_acc(), x_target);
    let (up, down) = if lump >= 0.0 { (lump, 0.0) } else { (0.0, -lump) };
    let comp = StepComponents {
        mx_cont: dwx,
        qvx_pred: if dwx == 0.0 { 0.0 } else { grid.step_len(last) },
        qvx_cont: if dwx == 0.0 { 0.0 } else { grid.step_len(last) },
        drift_up: up,
        drift_down: down,
        ..Default::default()
    };
    b.push_step(last, comp)?;

    b.meta_mut().events.push(PathEvent {
        label: "reveal".into(),
        node: n,
    });
    if let Some(node) = frozen_at {
        b.meta_mut().frozen_from = Some(node);
    }
    Ok(b.finish(true)?)
}

#[cfg(test)]
mod tests {
    use super::super::ModelError;
    use super::*;
    use crate::grid::make_grid;

    fn spec(n: usize) -> GridSpec {
        GridSpec {
            horizon: 1.0,
            n_steps: n,
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        for x0 in [7.9, 0.0, -1.0, f64::NAN] {
            assert!(matches!(
                simulate(x0, &spec(16), 7),
                Err(ModelError::Domain { .. })
            ));
        }
    }

    #[test]
    fn gain_solves_the_riccati_equation() {
        // Oracle: the closed form is tanh t, and tanh 1 =
        // 0.7615941559557649.
        let grid = Arc::new(make_grid(1.0, 64, &[]).unwrap());
        let psi = observation_gain(&grid);
        assert_eq!(psi[0], 0.0);
        for (i, &p) in psi.iter().enumerate() {
            let t = grid.points()[i];
            assert!((p - t.tanh()).abs() < 1e-9, "node {i}: {p} vs {}", t.tanh());
        }
        assert!((psi[64] - 0.761_594_155_955_764_9).abs() < 1e-9);
    }

    #[test]
    fn deterministic_in_the_seed() {
        let a = simulate(10.0, &spec(64), 9).unwrap();
        let b = simulate(10.0, &spec(64), 9).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        let c = simulate(10.0, &spec(64), 10).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn decomposition_matches_the_filter_recursion() {
        let p = simulate(10.0, &spec(64), 4).unwrap();
        let psi = observation_gain(&p.grid);
        for i in 0..p.n_steps() - 1 {
            let dt = p.grid.step_len(i);
            let drift = (psi[i] * (p.x[i] - p.y[i])) * dt;
            let net = p.drift_up.mass()[i] - p.drift_down.mass()[i];
            assert_eq!(net, drift, "cell {i}");
            assert_eq!(p.mart_ortho.qv_pred.mass()[i], (psi[i] * psi[i]) * dt);
            assert_eq!(p.hedge_ratio[i], 0.0);
            assert_eq!(p.mart_hedged.increments.total_on_step(i), 0.0);
            assert_eq!(p.fv_singular_x.mass()[i], 0.0);
            assert_eq!(p.fv_drift_x.mass()[i], 0.0);
        }
    }

    #[test]
    fn terminal_reveal_pins_the_prices() {
        for seed in 0..32 {
            let p = simulate(10.0, &spec(64), seed).unwrap();
            assert!(p.converges_at_horizon);
            assert_eq!(p.x_terminal(), p.y_terminal());
            let last = p.n_steps() - 1;
            assert_eq!(p.mart_ortho.increments.total_on_step(last), 0.0);
            assert_eq!(p.mart_ortho.qv_pred.mass()[last], 0.0);
            assert!(p.meta.events.iter().any(|e| e.label == "reveal" && e.node == p.n_steps()));
        }
    }

    #[test]
    fn reveal_lump_takes_both_signs() {
        let (mut ups, mut downs) = (0u32, 0u32);
        for seed in 0..400 {
            let p = simulate(10.0, &spec(64), seed).unwrap();
            let last = p.n_steps() - 1;
            if p.drift_up.mass()[last] > 0.0 {
                ups += 1;
            }
            if p.drift_down.mass()[last] > 0.0 {
                downs += 1;
            }
        }
        assert!(ups >= 20 && downs >= 20, "ups {ups}, downs {downs}");
    }

    #[test]
    fn innovation_increments_have_brownian_variance() {
        // The innovation over one cell is ΔY/ψ = (X−Y)Δt + ΔW, whose
        // variance should match the cell length within sampling error;
        // checked at a fixed mid-path cell across many paths.
        let n = 64usize;
        let cell = 32usize;
        let k = 2000u32;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        let mut psi_cell = 0.0;
        for seed in 0..u64::from(k) {
            let p = simulate(10.0, &spec(n), seed).unwrap();
            let psi = observation_gain(&p.grid);
            psi_cell = psi[cell];
            let dy = p.y[cell + 1] - p.y[cell];
            let dn = dy / psi_cell;
            sum += dn;
            sum_sq += dn * dn;
        }
        assert!(psi_cell > 0.0);
        let mean = sum / f64::from(k);
        let var = sum_sq / f64::from(k) - mean * mean;
        let dt = 1.0 / n as f64;
        let stderr = var * (2.0 / f64::from(k)).sqrt();
        assert!(
            (var - dt).abs() <= 4.0 * stderr,
            "var {var} vs dt {dt}, stderr {stderr}"
        );
    }

    #[test]
    fn estimate_is_centered_on_the_signal() {
        let n = 64usize;
        let cell = 48usize;
        let k = 2000u32;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for seed in 0..u64::from(k) {
            let p = simulate(10.0, &spec(n), seed).unwrap();
            let e = p.x[cell] - p.y[cell];
            sum += e;
            sum_sq += e * e;
        }
        let mean = sum / f64::from(k);
        let var = sum_sq / f64::from(k) - mean * mean;
        let stderr = (var / f64::from(k)).sqrt();
        assert!(mean.abs() <= 4.0 * stderr, "mean {mean}, stderr {stderr}");
    }

    #[test]
    fn validates_across_seeds() {
        for seed in 0..64 {
            let p = simulate(10.0, &spec(32), seed).unwrap();
            p.validate().unwrap();
            assert_eq!(p.meta.model, "filtering");
            assert!(!p.meta.claims_drift_dominated);
            assert!(p.meta.x_normal_form_expected);
        }
    }
}
