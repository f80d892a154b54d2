//! Exploitation of singular drift: window detection, portfolio
//! construction, pathwise backtesting, and announced-jump harvesting.
//!
//! The structure module isolates the second price's upward drift `A²`
//! that is singular to the hedge-aligned reference. Cells where `A²`
//! has mass while the orthogonal martingale bracket is null admit a
//! riskless harvest: hold one unit of the second price — shorting the
//! hedge-aligned exposure through a nonnegative position `(−h)⁺` in the
//! first price — and the portfolio value grows by exactly `dA²` on
//! every such cell, with no martingale exposure left.
//!
//! [`detect_arbitrage_set`] computes the cell mask and its first
//! maximal run; [`build_arbitrage_portfolio`] assembles the
//! self-financing ledger holding through that run;
//! [`backtest`] re-verifies every claimed property against the path —
//! self-financing bitwise, nonnegative holdings, value bounded below,
//! nondecreasing, and strictly increasing across the held window.
//! [`predictable_jump_harvest`] is the one-step version: buy one unit
//! at the grid node immediately before an announced jump, sell at the
//! node after it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::DiscreteMeasure;
use crate::path::DecomposedPath;

/// Errors from the arbitrage module.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ArbitrageError {
    /// A node index outside `1..=n_steps`: the harvest needs both the
    /// node before and the node at the index.
    #[error("node index {index} out of range for a path with {n_nodes} nodes")]
    OutOfRange { index: usize, n_nodes: usize },
    /// A ledger whose vectors do not match the path's grid.
    #[error("ledger length {found} does not match the path's {expected} steps")]
    LengthMismatch { expected: usize, found: usize },
}

/// Which price a harvest trades.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    X,
    Y,
}

/// The exploitable cells of one path and the first maximal run of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArbitrageWindow {
    /// Per-cell flag: singular drift above tolerance on a cell whose
    /// orthogonal bracket is null.
    pub mask: Vec<bool>,
    /// First flagged cell, if any.
    pub debut_index: Option<usize>,
    /// First unflagged cell after the debut; `None` when the run
    /// reaches the horizon (or when there is no debut).
    pub exit_index: Option<usize>,
}

impl ArbitrageWindow {
    /// Cells the portfolio holds through: `[debut, exit)`, with `exit`
    /// defaulting to the number of steps.
    pub fn held_range(&self, n_steps: usize) -> std::ops::Range<usize> {
        match self.debut_index {
            Some(d) => d..self.exit_index.unwrap_or(n_steps),
            None => 0..0,
        }
    }
}

/// Self-financing holdings ledger: per-step positions (cash, first
/// price, second price) and the portfolio value at every grid node.
/// `v[i]` is the value at node `i` before the step-`i` trade; holdings
/// are constant across each cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioLedger {
    pub pi_c: Vec<f64>,
    pub pi_x: Vec<f64>,
    pub pi_y: Vec<f64>,
    pub v: Vec<f64>,
}

/// Backtest outcome for one ledger on one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    /// Every node value reproduces the previous one plus the held
    /// price increments, bitwise.
    pub self_financing: bool,
    /// Nonnegative risky holdings and value never below `−tol`.
    pub admissible: bool,
    /// No cell loses more than `tol`.
    pub nondecreasing: bool,
    /// Cells where the value decreases beyond tolerance.
    pub violation_cells: Vec<usize>,
    /// Value gains on every held cell are nonnegative and the window
    /// gain exceeds tolerance; vacuously true for an empty window.
    pub strict_on_window: bool,
    pub terminal_value: f64,
    pub min_value: f64,
}

impl BacktestReport {
    /// All checks at once.
    pub fn clean(&self) -> bool {
        self.self_financing && self.admissible && self.nondecreasing && self.strict_on_window
    }
}

/// Flag the exploitable cells: singular drift mass above `tol` on a
/// cell whose orthogonal martingale bracket is at most `tol`, and
/// extract the first maximal run.
pub fn detect_arbitrage_set(
    path: &DecomposedPath,
    a2: &DiscreteMeasure,
    tol: f64,
) -> ArbitrageWindow {
    let qv2 = path.mart_ortho.qv_pred.mass();
    let mask: Vec<bool> = a2
        .mass()
        .iter()
        .zip(qv2)
        .map(|(&a, &q)| a > tol && q <= tol)
        .collect();
    let debut_index = mask.iter().position(|&m| m);
    let exit_index =
        debut_index.and_then(|d| mask[d..].iter().position(|&m| !m).map(|off| d + off));
    ArbitrageWindow {
        mask,
        debut_index,
        exit_index,
    }
}

/// One accumulation step of a self-financing ledger. Shared between
/// construction and verification so the comparison is bitwise.
fn ledger_step(v: f64, pi_x: f64, pi_y: f64, dx: f64, dy: f64) -> f64 {
    v + (pi_x * dx + pi_y * dy)
}

/// Build the harvesting portfolio for a window: across `[debut, exit)`
/// hold one unit of the second price and `(−h)⁺` units of the first
/// (the hedge is nonpositive on exploitable cells for every shipped
/// model, so the clip at zero keeps the position admissible without
/// changing it); zero holdings elsewhere. Starts from value zero, so
/// the cash leg is the bookkeeping balance `v − πₓx − π_y y`.
pub fn build_arbitrage_portfolio(
    path: &DecomposedPath,
    window: &ArbitrageWindow,
) -> PortfolioLedger {
    let n = path.n_steps();
    let held = window.held_range(n);
    let mut pi_x = vec![0.0; n];
    let mut pi_y = vec![0.0; n];
    let mut v = vec![0.0; n + 1];
    for i in 0..n {
        if held.contains(&i) {
            pi_x[i] = (-path.hedge_ratio[i]).max(0.0);
            pi_y[i] = 1.0;
        }
        let dx = path.x[i + 1] - path.x[i];
        let dy = path.y[i + 1] - path.y[i];
        v[i + 1] = ledger_step(v[i], pi_x[i], pi_y[i], dx, dy);
    }
    let pi_c: Vec<f64> = (0..n)
        .map(|i| v[i] - pi_x[i] * path.x[i] - pi_y[i] * path.y[i])
        .collect();
    PortfolioLedger { pi_c, pi_x, pi_y, v }
}

/// Re-verify a ledger against its path: self-financing accumulation
/// (bitwise, using the same float operations as the construction),
/// admissibility, monotonicity, and strict gain across the window.
pub fn backtest(
    path: &DecomposedPath,
    ledger: &PortfolioLedger,
    window: &ArbitrageWindow,
    tol: f64,
) -> Result<BacktestReport, ArbitrageError> {
    let n = path.n_steps();
    for (len, expected) in [
        (ledger.pi_c.len(), n),
        (ledger.pi_x.len(), n),
        (ledger.pi_y.len(), n),
        (ledger.v.len(), n + 1),
    ] {
        if len != expected {
            return Err(ArbitrageError::LengthMismatch {
                expected,
                found: len,
            });
        }
    }

    let mut self_financing = true;
    let mut violation_cells = Vec::new();
    for i in 0..n {
        let dx = path.x[i + 1] - path.x[i];
        let dy = path.y[i + 1] - path.y[i];
        if ledger.v[i + 1] != ledger_step(ledger.v[i], ledger.pi_x[i], ledger.pi_y[i], dx, dy) {
            self_financing = false;
        }
        if ledger.v[i + 1] - ledger.v[i] < -tol {
            violation_cells.push(i);
        }
    }
    let min_value = ledger.v.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let admissible = ledger.pi_x.iter().all(|&p| p >= 0.0)
        && ledger.pi_y.iter().all(|&p| p >= 0.0)
        && min_value >= -tol;
    let nondecreasing = violation_cells.is_empty();
    let held = window.held_range(n);
    let strict_on_window = if held.is_empty() {
        true
    } else {
        let gains_ok = held
            .clone()
            .all(|i| ledger.v[i + 1] - ledger.v[i] >= 0.0);
        gains_ok && ledger.v[held.end] - ledger.v[held.start] > tol
    };
    Ok(BacktestReport {
        self_financing,
        admissible,
        nondecreasing,
        violation_cells,
        strict_on_window,
        terminal_value: *ledger.v.last().unwrap(),
        min_value,
    })
}

/// Buy one unit of the chosen price at node `index − 1`, sell at node
/// `index`: the profit of trading into an announced jump. Valid for
/// any interior node; away from a jump it returns the plain price
/// increment, whose mean is zero for a martingale leg.
pub fn predictable_jump_harvest(
    path: &DecomposedPath,
    index: usize,
    side: Side,
) -> Result<f64, ArbitrageError> {
    let n_nodes = path.x.len();
    if index == 0 || index >= n_nodes {
        return Err(ArbitrageError::OutOfRange { index, n_nodes });
    }
    let series = match side {
        Side::X => &path.x,
        Side::Y => &path.y,
    };
    Ok(series[index] - series[index - 1])
}

/// Render a ledger as CSV, one row per grid step: the step's left node
/// time, the holdings across the step, and the value at that left
/// node. Numbers use shortest round-trip formatting.
pub fn ledger_csv(path: &DecomposedPath, ledger: &PortfolioLedger) -> String {
    let mut out = String::from("t,pi_c,pi_x,pi_y,v\n");
    for i in 0..ledger.pi_c.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            path.grid.points()[i],
            ledger.pi_c[i],
            ledger.pi_x[i],
            ledger.pi_y[i],
            ledger.v[i],
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{simulate, GridSpec, ModelConfig, ModelSpec};
    use crate::path::SimMode;
    use crate::structure::{default_tol, split_drift};

    fn model_path(name: &str, mode: SimMode, n_steps: usize, seed: u64) -> DecomposedPath {
        let model: ModelSpec = serde_json::from_value(serde_json::json!({ "name": name })).unwrap();
        let config = ModelConfig {
            model,
            grid: GridSpec {
                horizon: if name == "risk_attitudes" { 2.0 } else { 1.0 },
                n_steps,
            },
            mode,
        };
        simulate(&config, seed).unwrap()
    }

    fn window_for(path: &DecomposedPath) -> (ArbitrageWindow, DiscreteMeasure, f64) {
        let tol = default_tol(path);
        let split = split_drift(path, tol).unwrap();
        let window = detect_arbitrage_set(path, &split.a2, tol);
        (window, split.a2, tol)
    }

    #[test]
    fn window_mechanics_from_synthetic_masks() {
        use crate::grid::make_grid;
        use crate::path::{PathBuilder, PathMeta, StepComponents};
        use std::sync::Arc;

        let build = |ups: &[f64]| {
            let grid = Arc::new(make_grid(1.0, ups.len(), &[]).unwrap());
            let meta = PathMeta {
                model: "synthetic".into(),
                mode: SimMode::Analytic,
                claims_drift_dominated: false,
                x_normal_form_expected: true,
                frozen_from: None,
                events: Vec::new(),
            };
            let mut b = PathBuilder::new(grid, 1.0, 1.0, meta);
            for (i, &u) in ups.iter().enumerate() {
                b.push_step(
                    i,
                    StepComponents {
                        drift_up: u,
                        ..Default::default()
                    },
                )
                .unwrap();
            }
            b.finish(false).unwrap()
        };

        let p = build(&[0.0, 0.0, 0.3, 0.4, 0.0]);
        let (w, _, _) = window_for(&p);
        assert_eq!(w.mask, vec![false, false, true, true, false]);
        assert_eq!((w.debut_index, w.exit_index), (Some(2), Some(4)));
        assert_eq!(w.held_range(5), 2..4);

        let p = build(&[0.0, 0.3, 0.4]);
        let (w, _, _) = window_for(&p);
        assert_eq!((w.debut_index, w.exit_index), (Some(1), None));
        assert_eq!(w.held_range(3), 1..3);

        let p = build(&[0.0, 0.0]);
        let (w, _, _) = window_for(&p);
        assert_eq!((w.debut_index, w.exit_index), (None, None));
        assert!(w.held_range(2).is_empty());
    }

    #[test]
    fn announced_default_ledger_harvests_the_discount_gap() {
        // Hold the defaultable claim from time zero to the
        // announcement: zero first-price position (the hedge vanishes),
        // gain exactly the singular drift on every held cell, terminal
        // value the discount gap e^{-λ(1-θ)} - e^{-λ}.
        let lambda = 0.5f64;
        let mut defaulted = 0usize;
        for seed in 0..30 {
            let p = model_path("predictable_default", SimMode::Analytic, 64, seed);
            let (w, a2, tol) = window_for(&p);
            assert_eq!(w.debut_index, Some(0), "seed {seed}");
            let ledger = build_arbitrage_portfolio(&p, &w);
            let held = w.held_range(p.n_steps());
            for i in held.clone() {
                assert_eq!(ledger.pi_x[i], 0.0);
                assert_eq!(ledger.pi_y[i], 1.0);
                let gain = ledger.pi_x[i] * (p.x[i + 1] - p.x[i])
                    + ledger.pi_y[i] * (p.y[i + 1] - p.y[i]);
                assert_eq!(gain, a2.mass()[i], "seed {seed} cell {i}");
            }
            let report = backtest(&p, &ledger, &w, tol).unwrap();
            assert!(report.clean(), "seed {seed}: {report:?}");

            let theta = match p.meta.events.iter().find(|e| e.label == "announcement") {
                Some(ev) => {
                    assert_eq!(w.exit_index, Some(ev.node), "seed {seed}");
                    defaulted += 1;
                    p.grid.points()[ev.node + 1]
                }
                None => {
                    assert_eq!(w.exit_index, None, "seed {seed}");
                    1.0
                }
            };
            let expect = (-lambda * (1.0 - theta)).exp() - (-lambda).exp();
            assert!(
                (report.terminal_value - expect).abs() < 1.0e-12,
                "seed {seed}: {} vs {expect}",
                report.terminal_value
            );
        }
        assert!(defaulted > 0, "no default in the scanned seeds");
    }

    #[test]
    fn negative_hedge_window_shorts_the_first_price_exposure() {
        let mut any_window = false;
        for seed in 0..30 {
            let p = model_path("deterministic_h", SimMode::Analytic, 64, seed);
            let (w, a2, tol) = window_for(&p);
            let Some(debut) = w.debut_index else { continue };
            any_window = true;
            let ledger = build_arbitrage_portfolio(&p, &w);
            let held = w.held_range(p.n_steps());
            assert!(held.contains(&debut));
            for i in held.clone() {
                // The hedge is strictly negative on exploitable cells,
                // so the clip at zero leaves the full short exposure.
                assert!(p.hedge_ratio[i] < 0.0, "seed {seed} cell {i}");
                assert_eq!(ledger.pi_x[i], -p.hedge_ratio[i]);
                let gain = ledger.pi_x[i] * (p.x[i + 1] - p.x[i])
                    + ledger.pi_y[i] * (p.y[i + 1] - p.y[i]);
                let scale = a2.mass()[i].abs().max(1.0);
                assert!(
                    (gain - a2.mass()[i]).abs() <= 1.0e-12 * scale,
                    "seed {seed} cell {i}: {gain} vs {}",
                    a2.mass()[i]
                );
            }
            let report = backtest(&p, &ledger, &w, tol).unwrap();
            assert!(report.clean(), "seed {seed}: {report:?}");
            assert!(report.terminal_value > 0.0);
        }
        assert!(any_window, "no exploitable window in the scanned seeds");
    }

    #[test]
    fn harvest_matches_the_survival_odds_ratio() {
        // The second asset's default leg is restored to par on the atom
        // cell: buying one unit at the node before the announced jump
        // earns the conditional survival discount e^{-rate2·(T-θ)},
        // with θ the crossing cell's base right endpoint.
        let mut seen = 0usize;
        for seed in 0..60 {
            let p = model_path("two_defaults", SimMode::Analytic, 16, seed);
            let Some(ev) = p.meta.events.iter().find(|e| e.label == "default_y") else {
                continue;
            };
            let profit = predictable_jump_harvest(&p, ev.node, Side::Y).unwrap();
            let theta = p.grid.points()[ev.node];
            let expect = (-(1.0) * (1.0 - theta)).exp();
            assert!(
                (profit - expect).abs() < 1.0e-9,
                "seed {seed}: {profit} vs {expect}"
            );
            // The same trade sits on the detected single-cell window;
            // a last-cell jump runs to the horizon, so exit is open.
            let (w, _, _) = window_for(&p);
            assert_eq!(w.debut_index, Some(ev.node - 1), "seed {seed}");
            let expect_exit = if ev.node == p.n_steps() { None } else { Some(ev.node) };
            assert_eq!(w.exit_index, expect_exit, "seed {seed}");
            seen += 1;
        }
        assert!(seen > 0, "no second-asset default in the scanned seeds");
    }

    #[test]
    fn harvesting_the_dropping_side_loses() {
        for seed in 0..60 {
            let p = model_path("two_defaults", SimMode::Analytic, 16, seed);
            let Some(ev) = p.meta.events.iter().find(|e| e.label == "default_x") else {
                continue;
            };
            let profit = predictable_jump_harvest(&p, ev.node, Side::X).unwrap();
            assert!(profit < 0.0, "seed {seed}: {profit}");
            return;
        }
        panic!("no first-asset default in the scanned seeds");
    }

    #[test]
    fn harvest_rejects_out_of_range_nodes_and_passes_plain_increments() {
        let p = model_path("risk_attitudes", SimMode::Analytic, 50, 7);
        assert!(matches!(
            predictable_jump_harvest(&p, 0, Side::Y),
            Err(ArbitrageError::OutOfRange { .. })
        ));
        assert!(matches!(
            predictable_jump_harvest(&p, p.x.len(), Side::X),
            Err(ArbitrageError::OutOfRange { .. })
        ));
        let mid = 25;
        assert_eq!(
            predictable_jump_harvest(&p, mid, Side::Y).unwrap(),
            p.y[mid] - p.y[mid - 1]
        );
    }

    #[test]
    fn empty_window_means_an_inert_ledger() {
        for seed in 0..20 {
            let p = model_path("survival_claim", SimMode::Analytic, 64, seed);
            let (w, _, tol) = window_for(&p);
            assert_eq!(w.debut_index, None, "seed {seed}");
            let ledger = build_arbitrage_portfolio(&p, &w);
            assert!(ledger.pi_x.iter().all(|&v| v == 0.0));
            assert!(ledger.pi_y.iter().all(|&v| v == 0.0));
            assert!(ledger.v.iter().all(|&v| v == 0.0));
            let report = backtest(&p, &ledger, &w, tol).unwrap();
            assert!(report.clean());
            assert_eq!(report.terminal_value, 0.0);
        }
    }

    #[test]
    fn tampered_ledgers_are_caught() {
        let p = model_path("predictable_default", SimMode::Analytic, 64, 1);
        let (w, _, tol) = window_for(&p);
        let good = build_arbitrage_portfolio(&p, &w);
        assert!(backtest(&p, &good, &w, tol).unwrap().clean());

        // Injected short position: admissibility fails.
        let mut shorted = good.clone();
        let cell = w.debut_index.unwrap();
        shorted.pi_y[cell] = -1.0;
        let report = backtest(&p, &shorted, &w, tol).unwrap();
        assert!(!report.admissible);

        // Tampered value node: the self-financing identity fails.
        let mut skimmed = good.clone();
        let last = skimmed.v.len() - 1;
        skimmed.v[last] += 1.0e-9;
        let report = backtest(&p, &skimmed, &w, tol).unwrap();
        assert!(!report.self_financing);

        // Wrong shape: structured error.
        let mut truncated = good;
        truncated.pi_x.pop();
        assert!(matches!(
            backtest(&p, &truncated, &w, tol),
            Err(ArbitrageError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn csv_renders_one_row_per_step() {
        let p = model_path("predictable_default", SimMode::Analytic, 8, 1);
        let (w, _, _) = window_for(&p);
        let ledger = build_arbitrage_portfolio(&p, &w);
        let csv = ledger_csv(&p, &ledger);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines[0], "t,pi_c,pi_x,pi_y,v");
        assert_eq!(lines.len(), p.n_steps() + 1);
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first[0].parse::<f64>().unwrap(), 0.0);
        assert_eq!(first[3].parse::<f64>().unwrap(), ledger.pi_y[0]);
        // Shortest round-trip formatting: values parse back bitwise.
        assert_eq!(first[1].parse::<f64>().unwrap(), ledger.pi_c[0]);
    }
}
