//! Time grids and the cellwise data carriers that live on them.
//!
//! Everything downstream — simulated paths, drift measures, quadratic
//! variations — is stored *per grid cell*: a grid with `n + 1` points has
//! `n` cells, and a carrier holds one number per cell. Event times (a
//! default, a hitting time) are merged into the grid as exact nodes so
//! that jumps land on grid points instead of being smeared across a cell.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors for grid construction and carrier assembly.
#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("horizon must be a positive finite number, got {0}")]
    BadHorizon(f64),
    #[error("grid needs at least one step")]
    NoSteps,
    #[error("event time {0} lies outside (0, horizon]")]
    EventOutOfRange(f64),
    #[error("carrier has {got} values but the grid has {want} steps")]
    LengthMismatch { got: usize, want: usize },
    #[error("jump index {0} is not a valid grid step")]
    JumpIndexOutOfRange(usize),
    #[error("more than one jump marked on grid step {0}")]
    DuplicateJumpIndex(usize),
    #[error("carriers live on different grids")]
    GridMismatch,
}

/// A strictly increasing partition of `[0, horizon]` starting at `0`.
///
/// Nodes come from a uniform subdivision plus any requested event times;
/// an event equal (bitwise) to an existing node is collapsed onto it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
    horizon: f64,
    event_times: Vec<f64>,
}

impl TimeGrid {
    /// Grid nodes `t_0 = 0 < t_1 < … < t_n = horizon`.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Final time of the grid.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Event times that were merged into the node set, sorted.
    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    /// Number of cells (one less than the number of nodes).
    pub fn n_steps(&self) -> usize {
        self.points.len() - 1
    }

    /// Length of cell `i`, i.e. `t_{i+1} − t_i`.
    pub fn step_len(&self, i: usize) -> f64 {
        self.points[i + 1] - self.points[i]
    }

    /// Index of the node holding exactly (bitwise) the time `t`.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        self.points
            .binary_search_by(|p| p.partial_cmp(&t).unwrap())
            .ok()
    }
}

/// Build a grid of `n_steps` uniform cells over `[0, horizon]` and merge
/// in `event_times`. Deterministic: identical inputs give identical node
/// sets. Uniform nodes are computed as `horizon·i/n` so endpoints are
/// exact; an event time that coincides bitwise with an existing node is
/// collapsed rather than duplicated.
pub fn make_grid(horizon: f64, n_steps: usize, event_times: &[f64]) -> Result<TimeGrid, GridError> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(GridError::BadHorizon(horizon));
    }
    if n_steps == 0 {
        return Err(GridError::NoSteps);
    }
    for &e in event_times {
        if !(e.is_finite() && e > 0.0 && e <= horizon) {
            return Err(GridError::EventOutOfRange(e));
        }
    }

    let mut points: Vec<f64> = (0..=n_steps)
        .map(|i| horizon * (i as f64) / (n_steps as f64))
        .collect();
    // The division above is monotone in i but the endpoints deserve to be
    // exact regardless of rounding.
    points[0] = 0.0;
    points[n_steps] = horizon;

    let mut events: Vec<f64> = event_times.to_vec();
    events.sort_by(|a, b| a.partial_cmp(b).unwrap());
    events.dedup();

    for &e in &events {
        match points.binary_search_by(|p| p.partial_cmp(&e).unwrap()) {
            Ok(_) => {}
            Err(pos) => points.insert(pos, e),
        }
    }

    Ok(TimeGrid {
        points,
        horizon,
        event_times: events,
    })
}

/// True when two carriers may be combined cellwise: either they share the
/// same grid allocation or the grids are equal as values.
pub fn same_grid(a: &Arc<TimeGrid>, b: &Arc<TimeGrid>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// One number per grid cell: the increment of some process over that cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementPath {
    grid: Arc<TimeGrid>,
    values: Vec<f64>,
}

impl IncrementPath {
    /// Wrap per-cell values, checking the length against the grid.
    pub fn new(grid: Arc<TimeGrid>, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.n_steps() {
            return Err(GridError::LengthMismatch {
                got: values.len(),
                want: grid.n_steps(),
            });
        }
        Ok(IncrementPath { grid, values })
    }

    /// All-zero increments on `grid`.
    pub fn zeros(grid: Arc<TimeGrid>) -> Self {
        let n = grid.n_steps();
        IncrementPath {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Node values of the process started at `initial`: running sums of
    /// the increments, one value per grid point.
    pub fn node_values(&self, initial: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len() + 1);
        let mut acc = initial;
        out.push(acc);
        for &v in &self.values {
            acc += v;
            out.push(acc);
        }
        out
    }
}

/// A process increment series with jumps recorded separately from the
/// continuous flow. A jump marked on step `i` happens at node `i + 1`,
/// i.e. inside the cell `(t_i, t_{i+1}]`; at most one jump per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpMarkedPath {
    grid: Arc<TimeGrid>,
    continuous_part: IncrementPath,
    jumps: Vec<(usize, f64)>,
}

impl JumpMarkedPath {
    /// Assemble from a continuous increment series and marked jumps.
    /// Jump indices must be valid steps and pairwise distinct; they are
    /// stored sorted by index.
    pub fn new(
        grid: Arc<TimeGrid>,
        continuous_part: IncrementPath,
        mut jumps: Vec<(usize, f64)>,
    ) -> Result<Self, GridError> {
        if !same_grid(&grid, continuous_part.grid()) {
            return Err(GridError::GridMismatch);
        }
        jumps.sort_by_key(|&(i, _)| i);
        for w in jumps.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(GridError::DuplicateJumpIndex(w[0].0));
            }
        }
        if let Some(&(i, _)) = jumps.last() {
            if i >= grid.n_steps() {
                return Err(GridError::JumpIndexOutOfRange(i));
            }
        }
        Ok(JumpMarkedPath {
            grid,
            continuous_part,
            jumps,
        })
    }

    /// A path with zero continuous flow and the given jumps.
    pub fn pure_jumps(grid: Arc<TimeGrid>, jumps: Vec<(usize, f64)>) -> Result<Self, GridError> {
        let cont = IncrementPath::zeros(Arc::clone(&grid));
        JumpMarkedPath::new(grid, cont, jumps)
    }

    /// A path with the given continuous flow and no jumps.
    pub fn pure_continuous(continuous_part: IncrementPath) -> Self {
        let grid = Arc::clone(continuous_part.grid());
        JumpMarkedPath {
            grid,
            continuous_part,
            jumps: Vec::new(),
        }
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn continuous_part(&self) -> &IncrementPath {
        &self.continuous_part
    }

    /// Marked jumps as `(step index, jump size)`, sorted by step.
    pub fn jumps(&self) -> &[(usize, f64)] {
        &self.jumps
    }

    /// Jump size on step `i` (zero when no jump is marked there).
    pub fn jump_on_step(&self, i: usize) -> f64 {
        match self.jumps.binary_search_by_key(&i, |&(j, _)| j) {
            Ok(pos) => self.jumps[pos].1,
            Err(_) => 0.0,
        }
    }

    /// Total increment over step `i`: continuous flow plus any jump.
    pub fn total_on_step(&self, i: usize) -> f64 {
        self.continuous_part.values()[i] + self.jump_on_step(i)
    }
}
