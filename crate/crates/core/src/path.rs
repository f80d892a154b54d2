//! The central data artifact: a simulated trajectory of two prices
//! `(X, Y)` together with the full cellwise attribution of every
//! increment — finite-variation parts, martingale parts with their
//! quadratic variations, the predictable hedge ratio linking the two
//! martingales, and the Jordan split of `Y`'s drift.
//!
//! Models never hand out raw prices: they emit a [`DecomposedPath`]
//! whose node values are *defined* as the canonical running sums of the
//! recorded components, so the price-consistency identities hold bitwise
//! and every analyzer downstream can trust the attribution.
//!
//! The decomposition recorded for `X` is
//! `ΔX_i = fv_singular_x_i + fv_drift_x_i + ΔM^X_i`
//! (singular finite-variation part, absolutely continuous drift,
//! martingale increment), and for `Y`
//! `ΔY_i = drift_up_i − drift_down_i + ΔM¹_i + ΔM²_i`
//! where `ΔM¹_i = hedge_ratio_i·ΔM^X_i` is the hedged martingale
//! component and `ΔM²` is orthogonal to `M^X`. The hedged component and
//! its quadratic variation are always derived from `hedge_ratio` and
//! `M^X` by the builder, never supplied, so the proportionality
//! identities hold bitwise by construction.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridError, IncrementPath, JumpMarkedPath, TimeGrid};
use crate::measure::DiscreteMeasure;

/// Errors raised when a decomposed path violates its own invariants.
#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("step {step} was supplied out of order (expected {expected})")]
    StepOutOfOrder { step: usize, expected: usize },
    #[error("builder finished after {got} of {want} steps")]
    Incomplete { got: usize, want: usize },
    #[error("price consistency fails for {asset} on step {step}: node diff {diff} vs component sum {sum}")]
    PriceConsistency {
        asset: char,
        step: usize,
        diff: f64,
        sum: f64,
    },
    #[error("negative {what} on step {step}: {value}")]
    NegativeCell {
        what: &'static str,
        step: usize,
        value: f64,
    },
    #[error("negative {asset} price at node {node}: {value}")]
    NegativePrice { asset: char, node: usize, value: f64 },
    #[error("non-finite {what} on step {step}")]
    NonFinite { what: &'static str, step: usize },
    #[error("drift components overlap on step {step}: up {up}, down {down}")]
    DriftOverlap { step: usize, up: f64, down: f64 },
    #[error("drift mass on step {step} is not dominated by quadratic variation")]
    DriftNotDominated { step: usize },
    #[error("prices do not converge at the horizon: X_T = {x}, Y_T = {y}")]
    NoConvergence { x: f64, y: f64 },
    #[error("event {label:?} points at node {node}, which is off the grid")]
    EventNodeOutOfRange { label: String, node: usize },
}

/// How a model produced its increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Increments evaluated from closed forms; attribution is exact and
    /// analyzers may use null-mass tolerances at floating resolution.
    Analytic,
    /// Increments from an Euler scheme; discretization noise pollutes
    /// drift cells and analyzers must widen tolerances accordingly.
    Euler,
}

/// Model self-description carried on every path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMeta {
    /// Catalog name of the emitting model.
    pub model: String,
    /// Increment generation mode.
    pub mode: SimMode,
    /// Whether the model claims its upward drift is dominated by the
    /// quadratic variation of `Y`'s martingale part (cellwise
    /// `drift_up ≪ qv(M¹) + qv(M²)`). Models that place predictable
    /// drift atoms on quadratic-variation-free cells set this to false,
    /// and the domination invariant is then not asserted.
    pub claims_drift_dominated: bool,
    /// Whether the model expects `X` to pass the normal-form check
    /// (`fv_singular_x` decreasing and singular to `qv(M^X)`); models
    /// with structurally increasing or non-monotone singular parts set
    /// this to false so reports can distinguish intended findings from
    /// regressions.
    pub x_normal_form_expected: bool,
    /// Node index from which the whole path was frozen (all increments
    /// zero) to keep prices positive, if any.
    pub frozen_from: Option<usize>,
    /// Named events the model marked on this path (defaults,
    /// absorptions), each pointing at the grid node where the event
    /// lands. Downstream consumers use these to locate announced jumps
    /// without re-deriving event placement from the measures.
    pub events: Vec<PathEvent>,
}

/// A named per-path event marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEvent {
    /// Stable label, e.g. `"default_x"`, `"default_y"`, `"absorption"`.
    pub label: String,
    /// Grid node index at which the event takes effect (the right node
    /// of the cell that carries the event's increment).
    pub node: usize,
}

/// A martingale component: its increments (continuous flow plus marked
/// jumps), its predictable quadratic variation per cell, and the
/// quadratic variation of the continuous part per cell (the input the
/// stochastic exponential needs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingalePart {
    pub increments: JumpMarkedPath,
    pub qv_pred: DiscreteMeasure,
    pub qv_cont: IncrementPath,
}

impl MartingalePart {
    /// The all-zero martingale on `grid`.
    pub fn zeros(grid: &Arc<TimeGrid>) -> Self {
        MartingalePart {
            increments: JumpMarkedPath::pure_jumps(Arc::clone(grid), Vec::new())
                .expect("empty jumps are valid"),
            qv_pred: DiscreteMeasure::zeros(Arc::clone(grid)),
            qv_cont: IncrementPath::zeros(Arc::clone(grid)),
        }
    }

    /// Total increment over step `i` (continuous plus jump).
    pub fn total_on_step(&self, i: usize) -> f64 {
        self.increments.total_on_step(i)
    }

    /// Sum of all increments (terminal value of the martingale started
    /// at 0), accumulated left to right.
    pub fn terminal_sum(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.increments.continuous_part().len() {
            acc += self.total_on_step(i);
        }
        acc
    }
}

/// A fully attributed two-price trajectory. See the module docs for the
/// identities the fields satisfy; [`DecomposedPath::validate`] asserts
/// all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposedPath {
    pub grid: Arc<TimeGrid>,
    /// Price of the first asset at every grid point (nonnegative).
    pub x: Vec<f64>,
    /// Price of the second asset at every grid point (nonnegative).
    pub y: Vec<f64>,
    /// Singular predictable finite-variation part of `X` (no absolutely
    /// continuous component with respect to `qv(M^X)` allowed here).
    pub fv_singular_x: DiscreteMeasure,
    /// Absolutely continuous drift of `X` against `qv(M^X)`.
    pub fv_drift_x: DiscreteMeasure,
    /// Martingale part of `X`.
    pub mart_x: MartingalePart,
    /// Predictable integrand linking `M¹` to `M^X`, one left-endpoint
    /// value per step.
    pub hedge_ratio: Vec<f64>,
    /// Hedged martingale component of `Y`: `ΔM¹ = hedge_ratio·ΔM^X`.
    pub mart_hedged: MartingalePart,
    /// Martingale component of `Y` orthogonal to `M^X`.
    pub mart_ortho: MartingalePart,
    /// Upward Jordan part of `Y`'s predictable finite variation.
    pub drift_up: DiscreteMeasure,
    /// Downward Jordan part of `Y`'s predictable finite variation.
    pub drift_down: DiscreteMeasure,
    /// Whether the two prices are required (and verified) to coincide at
    /// the final grid point.
    pub converges_at_horizon: bool,
    pub meta: PathMeta,
}

impl DecomposedPath {
    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    pub fn x_terminal(&self) -> f64 {
        *self.x.last().expect("node vector is nonempty")
    }

    pub fn y_terminal(&self) -> f64 {
        *self.y.last().expect("node vector is nonempty")
    }

    /// The canonical component sum for `ΔX_i`. Node values are defined
    /// as running sums of exactly this expression, making the price
    /// consistency identity bitwise.
    pub fn x_step_sum(&self, i: usize) -> f64 {
        ((self.fv_singular_x.mass()[i] + self.fv_drift_x.mass()[i])
            + self.mart_x.increments.continuous_part().values()[i])
            + self.mart_x.increments.jump_on_step(i)
    }

    /// The canonical component sum for `ΔY_i` (see [`Self::x_step_sum`]).
    pub fn y_step_sum(&self, i: usize) -> f64 {
        ((((self.drift_up.mass()[i] - self.drift_down.mass()[i])
            + self.mart_hedged.increments.continuous_part().values()[i])
            + self.mart_hedged.increments.jump_on_step(i))
            + self.mart_ortho.increments.continuous_part().values()[i])
            + self.mart_ortho.increments.jump_on_step(i)
    }

    /// Net predictable finite variation of `Y` per cell
    /// (`drift_up − drift_down`).
    pub fn drift_net(&self) -> DiscreteMeasure {
        let mass: Vec<f64> = self
            .drift_up
            .mass()
            .iter()
            .zip(self.drift_down.mass())
            .map(|(u, d)| u - d)
            .collect();
        DiscreteMeasure::new(Arc::clone(&self.grid), mass).expect("grid length matches")
    }

    /// Assert every structural invariant the carrier promises. Identity
    /// checks are bitwise (node values are running component sums by
    /// construction); sign and domination checks are exact.
    pub fn validate(&self) -> Result<(), PathError> {
        let n = self.grid.n_steps();
        for (name, len, want) in [
            ("x nodes", self.x.len(), n + 1),
            ("y nodes", self.y.len(), n + 1),
            ("hedge_ratio", self.hedge_ratio.len(), n),
        ] {
            if len != want {
                let _ = name;
                return Err(GridError::LengthMismatch { got: len, want }.into());
            }
        }

        for i in 0..n {
            // Price consistency, bitwise: the node value is the previous
            // node plus the canonical component sum. (Stated as an update
            // identity rather than a float re-subtraction, which would
            // reintroduce rounding of its own.)
            let sx = self.x_step_sum(i);
            if self.x[i + 1] != self.x[i] + sx {
                return Err(PathError::PriceConsistency {
                    asset: 'X',
                    step: i,
                    diff: self.x[i + 1] - self.x[i],
                    sum: sx,
                });
            }
            let sy = self.y_step_sum(i);
            if self.y[i + 1] != self.y[i] + sy {
                return Err(PathError::PriceConsistency {
                    asset: 'Y',
                    step: i,
                    diff: self.y[i + 1] - self.y[i],
                    sum: sy,
                });
            }

            // Hedged-component proportionality, bitwise.
            let h = self.hedge_ratio[i];
            if !h.is_finite() {
                return Err(PathError::NonFinite {
                    what: "hedge_ratio",
                    step: i,
                });
            }
            let m1c = self.mart_hedged.increments.continuous_part().values()[i];
            let mxc = self.mart_x.increments.continuous_part().values()[i];
            if m1c != h * mxc {
                return Err(PathError::PriceConsistency {
                    asset: '1',
                    step: i,
                    diff: m1c,
                    sum: h * mxc,
                });
            }
            let m1j = self.mart_hedged.increments.jump_on_step(i);
            let mxj = self.mart_x.increments.jump_on_step(i);
            if m1j != h * mxj {
                return Err(PathError::PriceConsistency {
                    asset: '1',
                    step: i,
                    diff: m1j,
                    sum: h * mxj,
                });
            }
            let qv1 = self.mart_hedged.qv_pred.mass()[i];
            let qvx = self.mart_x.qv_pred.mass()[i];
            if qv1 != h * (h * qvx) {
                return Err(PathError::PriceConsistency {
                    asset: 'q',
                    step: i,
                    diff: qv1,
                    sum: h * (h * qvx),
                });
            }

            // Sign constraints.
            for (what, v) in [
                ("drift_up mass", self.drift_up.mass()[i]),
                ("drift_down mass", self.drift_down.mass()[i]),
                ("qv of M^X", qvx),
                ("qv of M1", qv1),
                ("qv of M2", self.mart_ortho.qv_pred.mass()[i]),
                ("continuous qv of M^X", self.mart_x.qv_cont.values()[i]),
                ("continuous qv of M1", self.mart_hedged.qv_cont.values()[i]),
                ("continuous qv of M2", self.mart_ortho.qv_cont.values()[i]),
            ] {
                if !v.is_finite() {
                    return Err(PathError::NonFinite { what, step: i });
                }
                if v < 0.0 {
                    return Err(PathError::NegativeCell { what, step: i, value: v });
                }
            }

            // Jordan orthogonality of Y's drift.
            let up = self.drift_up.mass()[i];
            let down = self.drift_down.mass()[i];
            if up.min(down) != 0.0 {
                return Err(PathError::DriftOverlap { step: i, up, down });
            }

            // Drift domination (only when the model claims it).
            if self.meta.claims_drift_dominated && up > 0.0 {
                let qv_y = self.mart_hedged.qv_pred.mass()[i] + self.mart_ortho.qv_pred.mass()[i];
                if qv_y <= 0.0 {
                    return Err(PathError::DriftNotDominated { step: i });
                }
            }
        }

        for (node, &v) in self.x.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PathError::NegativePrice {
                    asset: 'X',
                    node,
                    value: v,
                });
            }
        }
        for (node, &v) in self.y.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PathError::NegativePrice {
                    asset: 'Y',
                    node,
                    value: v,
                });
            }
        }

        if self.converges_at_horizon && self.x_terminal() != self.y_terminal() {
            return Err(PathError::NoConvergence {
                x: self.x_terminal(),
                y: self.y_terminal(),
            });
        }

        for ev in &self.meta.events {
            if ev.node >= self.grid.points().len() {
                return Err(PathError::EventNodeOutOfRange {
                    label: ev.label.clone(),
                    node: ev.node,
                });
            }
        }
        Ok(())
    }
}

/// The component value `c` such that `acc + (offset + c) == target`
/// bitwise under the builder's canonical left-to-right grouping,
/// whenever such a float exists (always the case when the quantities
/// share a scale): the naive difference nudged by at most a few ulps.
/// Models use this to land a node on an exact closed-form value while
/// other components of the same cell stay at their own exact values.
pub fn pin_component(acc: f64, target: f64, offset: f64) -> f64 {
    let mut c = (target - acc) - offset;
    for _ in 0..64 {
        let s = acc + (offset + c);
        if s == target {
            break;
        }
        c = if s < target { c.next_up() } else { c.next_down() };
    }
    c
}

/// Per-step inputs to the [`PathBuilder`]. Every field defaults to zero
/// / absent, so models spell out only the components a cell actually
/// carries. The hedged component `M¹` is not an input: the builder
/// derives it from `hedge` and the `M^X` entries.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepComponents {
    pub fv_singular_x: f64,
    pub fv_drift_x: f64,
    pub mx_cont: f64,
    pub mx_jump: Option<f64>,
    pub qvx_pred: f64,
    pub qvx_cont: f64,
    pub hedge: f64,
    pub drift_up: f64,
    pub drift_down: f64,
    pub m2_cont: f64,
    pub m2_jump: Option<f64>,
    pub qv2_pred: f64,
    pub qv2_cont: f64,
}

/// Sequential assembler for [`DecomposedPath`]. Steps are pushed in
/// order; node values accumulate as the canonical component sums, so the
/// finished path passes its consistency checks bitwise. The running
/// accumulators are exposed so models can pin later nodes (for instance
/// the terminal value) by choosing a component as an exact difference.
pub struct PathBuilder {
    grid: Arc<TimeGrid>,
    meta: PathMeta,
    x: Vec<f64>,
    y: Vec<f64>,
    fv_singular_x: Vec<f64>,
    fv_drift_x: Vec<f64>,
    mx_cont: Vec<f64>,
    mx_jumps: Vec<(usize, f64)>,
    qvx_pred: Vec<f64>,
    qvx_cont: Vec<f64>,
    hedge: Vec<f64>,
    m1_cont: Vec<f64>,
    m1_jumps: Vec<(usize, f64)>,
    qv1_pred: Vec<f64>,
    qv1_cont: Vec<f64>,
    m2_cont: Vec<f64>,
    m2_jumps: Vec<(usize, f64)>,
    qv2_pred: Vec<f64>,
    qv2_cont: Vec<f64>,
    drift_up: Vec<f64>,
    drift_down: Vec<f64>,
}

impl PathBuilder {
    pub fn new(grid: Arc<TimeGrid>, x0: f64, y0: f64, meta: PathMeta) -> Self {
        let n = grid.n_steps();
        let mut b = PathBuilder {
            grid,
            meta,
            x: Vec::with_capacity(n + 1),
            y: Vec::with_capacity(n + 1),
            fv_singular_x: Vec::with_capacity(n),
            fv_drift_x: Vec::with_capacity(n),
            mx_cont: Vec::with_capacity(n),
            mx_jumps: Vec::new(),
            qvx_pred: Vec::with_capacity(n),
            qvx_cont: Vec::with_capacity(n),
            hedge: Vec::with_capacity(n),
            m1_cont: Vec::with_capacity(n),
            m1_jumps: Vec::new(),
            qv1_pred: Vec::with_capacity(n),
            qv1_cont: Vec::with_capacity(n),
            m2_cont: Vec::with_capacity(n),
            m2_jumps: Vec::new(),
            qv2_pred: Vec::with_capacity(n),
            qv2_cont: Vec::with_capacity(n),
            drift_up: Vec::with_capacity(n),
            drift_down: Vec::with_capacity(n),
        };
        b.x.push(x0);
        b.y.push(y0);
        b
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    /// Index of the next step to be pushed.
    pub fn next_step(&self) -> usize {
        self.fv_singular_x.len()
    }

    /// Mutable access to the path's metadata, for models that discover
    /// events (absorptions, defaults, freezes) while walking the cells.
    pub fn meta_mut(&mut self) -> &mut PathMeta {
        &mut self.meta
    }

    /// Current accumulated `X` node value.
    pub fn x_acc(&self) -> f64 {
        *self.x.last().expect("x starts nonempty")
    }

    /// Current accumulated `Y` node value.
    pub fn y_acc(&self) -> f64 {
        *self.y.last().expect("y starts nonempty")
    }

    /// Push the components of step `i` (must be the next step).
    pub fn push_step(&mut self, i: usize, c: StepComponents) -> Result<(), PathError> {
        let expected = self.next_step();
        if i != expected || i >= self.grid.n_steps() {
            return Err(PathError::StepOutOfOrder { step: i, expected });
        }
        self.fv_singular_x.push(c.fv_singular_x);
        self.fv_drift_x.push(c.fv_drift_x);
        self.mx_cont.push(c.mx_cont);
        let mx_jump = c.mx_jump.unwrap_or(0.0);
        if let Some(j) = c.mx_jump {
            self.mx_jumps.push((i, j));
        }
        self.qvx_pred.push(c.qvx_pred);
        self.qvx_cont.push(c.qvx_cont);
        self.hedge.push(c.hedge);

        // Derived hedged component: ΔM¹ = h·ΔM^X, qv scaled by h².
        let m1c = c.hedge * c.mx_cont;
        self.m1_cont.push(m1c);
        if c.mx_jump.is_some() {
            self.m1_jumps.push((i, c.hedge * mx_jump));
        }
        self.qv1_pred.push(c.hedge * (c.hedge * c.qvx_pred));
        self.qv1_cont.push(c.hedge * (c.hedge * c.qvx_cont));

        self.m2_cont.push(c.m2_cont);
        if let Some(j) = c.m2_jump {
            self.m2_jumps.push((i, j));
        }
        self.qv2_pred.push(c.qv2_pred);
        self.qv2_cont.push(c.qv2_cont);
        self.drift_up.push(c.drift_up);
        self.drift_down.push(c.drift_down);

        // Canonical node update: these expressions must mirror
        // x_step_sum / y_step_sum term for term so validation is bitwise.
        let dx = ((c.fv_singular_x + c.fv_drift_x) + c.mx_cont) + mx_jump;
        self.x.push(self.x_acc() + dx);
        let m1j = c.hedge * mx_jump;
        let dy = ((((c.drift_up - c.drift_down) + m1c) + m1j) + c.m2_cont)
            + c.m2_jump.unwrap_or(0.0);
        self.y.push(self.y_acc() + dy);
        Ok(())
    }

    /// Finish the build and validate every invariant.
    pub fn finish(self, converges_at_horizon: bool) -> Result<DecomposedPath, PathError> {
        let n = self.grid.n_steps();
        let got = self.fv_singular_x.len();
        if got != n {
            return Err(PathError::Incomplete { got, want: n });
        }
        let g = &self.grid;
        let mart = |cont: Vec<f64>, jumps: Vec<(usize, f64)>, qv_pred: Vec<f64>, qv_cont: Vec<f64>| {
            Ok::<MartingalePart, PathError>(MartingalePart {
                increments: JumpMarkedPath::new(
                    Arc::clone(g),
                    IncrementPath::new(Arc::clone(g), cont).map_err(PathError::Grid)?,
                    jumps,
                )
                .map_err(PathError::Grid)?,
                qv_pred: DiscreteMeasure::new(Arc::clone(g), qv_pred)
                    .map_err(|e| match e {
                        crate::measure::MeasureError::Grid(ge) => PathError::Grid(ge),
                        other => panic!("unexpected measure error: {other}"),
                    })?,
                qv_cont: IncrementPath::new(Arc::clone(g), qv_cont).map_err(PathError::Grid)?,
            })
        };
        let measure = |mass: Vec<f64>| {
            DiscreteMeasure::new(Arc::clone(g), mass).map_err(|e| match e {
                crate::measure::MeasureError::Grid(ge) => PathError::Grid(ge),
                other => panic!("unexpected measure error: {other}"),
            })
        };
        let path = DecomposedPath {
            grid: Arc::clone(g),
            x: self.x,
            y: self.y,
            fv_singular_x: measure(self.fv_singular_x)?,
            fv_drift_x: measure(self.fv_drift_x)?,
            mart_x: mart(self.mx_cont, self.mx_jumps, self.qvx_pred, self.qvx_cont)?,
            hedge_ratio: self.hedge,
            mart_hedged: mart(self.m1_cont, self.m1_jumps, self.qv1_pred, self.qv1_cont)?,
            mart_ortho: mart(self.m2_cont, self.m2_jumps, self.qv2_pred, self.qv2_cont)?,
            drift_up: measure(self.drift_up)?,
            drift_down: measure(self.drift_down)?,
            converges_at_horizon,
            meta: self.meta,
        };
        path.validate()?;
        Ok(path)
    }
}
