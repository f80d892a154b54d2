//! A claim knocked out when a Brownian motion first reaches an unseen
//! random level, watched by an observer who sees the Brownian path.
//!
//! The level `D` is exponential with rate `μ`, independent of the
//! Brownian motion `B`; the knockout happens at
//! `τ = inf{t : B_t ≥ D}`. An investor who watches only the knockout
//! clock sees a totally surprising default with hazard rate
//!
//! ```text
//! c(t) = μ φ(μ√t) / (2√t Φ(−μ√t)) − μ²/2,
//! ```
//!
//! and prices the claim as the compensated-jump exponential
//! `X_t = X₀ ℰ(−H)_t`: deterministic growth `X₀ / J(t)` with
//! `J(t) = P(τ > t) = 2 e^{μ²t/2} Φ(−μ√t)` while alive, and a drop to
//! zero at the knockout.
//!
//! The composite observer also sees `B`, and for them the surprise is
//! gone from everywhere except the running maximum: the knockout can
//! only happen while `B` is pushing into fresh territory, so the
//! default compensator rides the running-supremum measure —
//! with the exponential level it is exactly `Λ_t = μ S_{t∧τ}`, frozen
//! whenever `B` sits strictly below its past maximum. The price then
//! splits into clock-growth `∫X c(s) ds` carried by ordinary time, a
//! compensator outflow `−∫X μ dS` carried by the supremum measure, and
//! a compensated-jump martingale whose bracket `∫X² μ dS` rides the
//! same supremum measure. Growth never stops, but the risk that excuses
//! it does: on every cell where the maximum stands still the price
//! climbs with zero quadratic variation — riskless gain for the
//! composite observer, who buys below the maximum and sells a moment
//! later. Cellwise the Lebesgue/supremum orthogonality is invisible
//! (one cell can carry both kinds of mass), so the path is flagged as
//! not normal-form and the analyzers read the raw components.
//!
//! Discretization. Within-cell maxima are drawn from the exact bridge
//! law, so knockout timing is exact; on the knockout cell the
//! compensator flow stops at the level itself (`ΔS = D − S`), which
//! keeps the recorded jump martingale exactly centered. The
//! finite-variation cancel pair is recorded bitwise
//! (`fv_drift = −mx_cont`), and the per-cell bracket satisfies
//! `qv = X · mx_cont` bitwise. The second price plays no role here and
//! is carried flat at `X₀`.

use std::sync::Arc;

use crate::path::{DecomposedPath, PathBuilder, PathEvent, PathMeta, SimMode, StepComponents};
use crate::simkernel::{
    bridge_maximum, brownian_increments, path_seed, pin_increment, rng_for, uniform_open_closed,
};

use super::util::norm_cdf;
use super::{base_grid, require, GridSpec, ModelError};

const MODEL: &str = "random_barrier";

/// Survival probability `P(τ > t) = 2 e^{μ²t/2} Φ(−μ√t)`; equals one at
/// `t = 0` bitwise.
fn survival(mu: f64, t: f64) -> f64 {
    2.0 * (0.5 * (mu * mu) * t).exp() * norm_cdf(-(mu * t.sqrt()))
}

pub(super) fn simulate(
    barrier_rate: f64,
    x0: f64,
    grid_spec: &GridSpec,
    seed: u64,
) -> Result<DecomposedPath, ModelError> {
    let mu = barrier_rate;
    require(MODEL, "barrier_rate", mu, "(0, inf)", mu > 0.0)?;
    require(MODEL, "x0", x0, "(0, inf)", x0 > 0.0)?;
    let grid = base_grid(grid_spec)?;
    let n = grid.n_steps();

    let gauss = brownian_increments(&grid, path_seed(seed, 1));
    let mut urng = rng_for(path_seed(seed, 2));
    let level = {
        let u = uniform_open_closed(&mut rng_for(path_seed(seed, 3)));
        -u.ln() / mu
    };

    let meta = PathMeta {
        model: MODEL.into(),
        mode: SimMode::Analytic,
        claims_drift_dominated: true,
        x_normal_form_expected: false,
        frozen_from: None,
        events: Vec::new(),
    };
    let mut b = PathBuilder::new(Arc::clone(&grid), x0, x0, meta);

    let mut b_left = 0.0_f64; // Brownian level at the cell's left node
    let mut sup = 0.0_f64; // running maximum at the cell's left node
    let mut knocked_out: Option<usize> = None;

    for i in 0..n {
        if knocked_out.is_some() {
            b.push_step(i, StepComponents::default())?;
            continue;
        }
        let dt = grid.step_len(i);
        let db = gauss.values()[i];
        let u = uniform_open_closed(&mut urng);
        let cell_max = bridge_maximum(b_left, b_left + db, dt, u);
        let x_left = b.x_acc();

        if cell_max >= level {
            // Knockout: the compensator flow runs until the supremum
            // reaches the level, then the price jumps to zero. The
            // inner sum (−v) + v cancels exactly, so the node lands on
            // zero bitwise.
            let v = x_left * (mu * (level - sup));
            b.push_step(
                i,
                StepComponents {
                    fv_drift_x: -v,
                    mx_cont: v,
                    mx_jump: Some(-x_left),
                    qvx_pred: x_left * v,
                    ..Default::default()
                },
            )?;
            knocked_out = Some(i + 1);
            continue;
        }

        let sup_next = sup.max(cell_max);
        let ds = sup_next - sup;
        let v = x_left * (mu * ds);
        let growth = pin_increment(x_left, x0 / survival(mu, grid.points()[i + 1]));
        b.push_step(
            i,
            StepComponents {
                fv_singular_x: growth,
                fv_drift_x: -v,
                mx_cont: v,
                qvx_pred: x_left * v,
                ..Default::default()
            },
        )?;
        b_left += db;
        sup = sup_next;
    }

    if let Some(node) = knocked_out {
        b.meta_mut().events.push(PathEvent {
            label: "default".into(),
            node,
        });
    }
    Ok(b.finish(false)?)
}

#[cfg(test)]
mod tests {
    use super::super::util::norm_pdf;
    use super::super::ModelError;
    use super::*;

    fn spec(n: usize) -> GridSpec {
        GridSpec {
            horizon: 1.0,
            n_steps: n,
        }
    }

    /// Closed-form hazard rate of the knockout clock.
    fn hazard(mu: f64, t: f64) -> f64 {
        let z = mu * t.sqrt();
        mu * norm_pdf(z) / (2.0 * t.sqrt() * norm_cdf(-z)) - 0.5 * mu * mu
    }

    #[test]
    fn rejects_bad_parameters() {
        for (mu, x0) in [(0.0, 1.0), (-0.4, 1.0), (f64::NAN, 1.0), (0.8, 0.0), (0.8, -2.0)] {
            assert!(matches!(
                simulate(mu, x0, &spec(8), 7),
                Err(ModelError::Domain { .. })
            ));
        }
    }

    #[test]
    fn deterministic_in_the_seed() {
        let a = simulate(0.8, 1.0, &spec(64), 11).unwrap();
        let b = simulate(0.8, 1.0, &spec(64), 11).unwrap();
        assert_eq!(a.x, b.x);
        let c = simulate(0.8, 1.0, &spec(64), 12).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn hazard_closed_form_matches_the_survival_log_derivative() {
        // Frozen oracles: c(0.1) = 0.9014047459652471,
        // c(0.5) = 0.3528680466950802, c(1.0) = 0.22696090767296812.
        assert!((hazard(0.8, 0.1) - 0.901_404_745_965_247_1).abs() < 1e-12);
        assert!((hazard(0.8, 0.5) - 0.352_868_046_695_080_2).abs() < 1e-12);
        assert!((hazard(0.8, 1.0) - 0.226_960_907_672_968_12).abs() < 1e-12);
        // And the independent route −(ln J)′ by symmetric difference.
        for t in [0.1, 0.5, 1.0] {
            let h = 1e-4;
            let ld = -(survival(0.8, t + h).ln() - survival(0.8, t - h).ln()) / (2.0 * h);
            assert!(
                (hazard(0.8, t) - ld).abs() < 1e-6,
                "t = {t}: closed {Mu} vs log-derivative {ld}",
                Mu = hazard(0.8, t)
            );
        }
    }

    #[test]
    fn alive_path_grows_on_the_survival_schedule() {
        let mut found = false;
        for seed in 0..40 {
            let p = simulate(0.8, 1.0, &spec(64), seed).unwrap();
            if !p.meta.events.is_empty() {
                continue;
            }
            found = true;
            for i in 0..p.x.len() {
                let want = 1.0 / survival(0.8, p.grid.points()[i]);
                assert!(
                    (p.x[i] - want).abs() <= 1e-12 * want,
                    "node {i}: {} vs {want}",
                    p.x[i]
                );
                if i > 0 {
                    assert!(p.x[i] > p.x[i - 1], "strictly increasing while alive");
                }
            }
            // Per-cell growth rate sits at the hazard closed form.
            let i = 32;
            let dt = p.grid.step_len(i);
            let rate = p.fv_singular_x.mass()[i] / (p.x[i] * dt);
            let mid = 0.5 * (p.grid.points()[i] + p.grid.points()[i + 1]);
            assert!(
                (rate - hazard(0.8, mid)).abs() <= 0.01 * hazard(0.8, mid),
                "growth rate {rate} vs hazard {}",
                hazard(0.8, mid)
            );
        }
        assert!(found, "no surviving path in the scanned seeds");
    }

    #[test]
    fn compensator_mass_rides_the_running_maximum() {
        let mut saw_flat = false;
        let mut saw_rise = false;
        for seed in 0..12 {
            let p = simulate(0.8, 1.0, &spec(64), seed).unwrap();
            let end = p
                .meta
                .events
                .first()
                .map_or(p.n_steps(), |e| e.node);
            for i in 0..end {
                let fd = p.fv_drift_x.mass()[i];
                let mc = p.mart_x.increments.continuous_part().values()[i];
                let qv = p.mart_x.qv_pred.mass()[i];
                // The recorded pair cancels bitwise and the bracket is
                // the price times the compensator flow.
                assert_eq!(fd, -mc);
                assert_eq!(qv, p.x[i] * mc);
                if mc == 0.0 {
                    saw_flat = true;
                    assert_eq!(qv, 0.0);
                } else {
                    saw_rise = true;
                    assert!(mc > 0.0);
                    assert!(qv > 0.0);
                }
            }
        }
        assert!(saw_flat, "no cell with a standing maximum");
        assert!(saw_rise, "no cell with a rising maximum");
    }

    #[test]
    fn knockout_jumps_to_zero_and_stays_there() {
        let mut found = false;
        for seed in 0..40 {
            let p = simulate(0.8, 1.0, &spec(64), seed).unwrap();
            let Some(ev) = p.meta.events.iter().find(|e| e.label == "default") else {
                continue;
            };
            found = true;
            let d = ev.node;
            assert!(d >= 1);
            assert!(p.x[d - 1] > 0.0);
            assert_eq!(p.x[d], 0.0);
            assert_eq!(p.mart_x.increments.jump_on_step(d - 1), -p.x[d - 1]);
            // The knockout cell still carries its stopped compensator
            // flow, cancelled bitwise against the drift outflow.
            let mc = p.mart_x.increments.continuous_part().values()[d - 1];
            assert_eq!(p.fv_drift_x.mass()[d - 1], -mc);
            assert!(mc >= 0.0);
            assert_eq!(p.fv_singular_x.mass()[d - 1], 0.0);
            for k in d..p.x.len() {
                assert_eq!(p.x[k], 0.0);
            }
        }
        assert!(found, "no knocked-out path in the scanned seeds");
    }

    #[test]
    fn knockout_law_and_terminal_mean_match_the_oracles() {
        // P(τ ≤ 1) = 1 − 2e^{0.32}Φ(−0.8) = 0.4164960971726877, and the
        // recorded process is a martingale, so E[X_T] = X₀.
        let n_paths = 4000u32;
        let mut knocked = 0u32;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for seed in 0..u64::from(n_paths) {
            let p = simulate(0.8, 1.0, &spec(64), seed).unwrap();
            if !p.meta.events.is_empty() {
                knocked += 1;
            }
            let v = p.x_terminal();
            sum += v;
            sum_sq += v * v;
        }
        let freq = f64::from(knocked) / f64::from(n_paths);
        let sigma = (freq * (1.0 - freq) / f64::from(n_paths)).sqrt();
        assert!(
            (freq - 0.416_496_097_172_687_7).abs() <= 4.0 * sigma,
            "knockout frequency {freq}, sigma {sigma}"
        );
        let mean = sum / f64::from(n_paths);
        let var = (sum_sq / f64::from(n_paths) - mean * mean).max(0.0);
        let stderr = (var / f64::from(n_paths)).sqrt();
        assert!(
            (mean - 1.0).abs() <= 4.0 * stderr,
            "terminal mean {mean}, stderr {stderr}"
        );
    }

    #[test]
    fn second_price_is_inert() {
        for seed in 0..8 {
            let p = simulate(0.8, 1.0, &spec(32), seed).unwrap();
            assert!(p.y.iter().all(|&v| v == 1.0));
            assert!(p.drift_up.mass().iter().all(|&v| v == 0.0));
            assert!(p.drift_down.mass().iter().all(|&v| v == 0.0));
            assert!(p.mart_ortho.qv_pred.mass().iter().all(|&v| v == 0.0));
            assert!(p.hedge_ratio.iter().all(|&v| v == 0.0));
            assert!(!p.converges_at_horizon);
        }
    }

    #[test]
    fn validates_across_seeds() {
        for seed in 0..64 {
            let p = simulate(1.2, 2.0, &spec(32), seed).unwrap();
            p.validate().unwrap();
            assert_eq!(p.meta.model, "random_barrier");
            assert!(!p.meta.x_normal_form_expected);
            if let Some(ev) = p.meta.events.first() {
                assert_eq!(ev.label, "default");
                assert!(ev.node >= 1 && ev.node <= p.n_steps());
            }
        }
    }
}
