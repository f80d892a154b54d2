//! Model catalog: eight generators that each emit fully decomposed
//! price paths ([`DecomposedPath`]) for a pair of assets converging (or
//! deliberately failing to converge) at a common horizon.
//!
//! Every model resolves its randomness from a single `u64` seed, so a
//! `(config, seed)` pair is a complete description of one path. All
//! models attribute every increment to a named component (finite
//! variation, hedged martingale, orthogonal martingale) at generation
//! time; nothing downstream ever has to infer a decomposition
//! statistically.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridError, TimeGrid};
use crate::path::{DecomposedPath, PathError, SimMode};
use crate::simkernel::SimError;

mod deterministic_h;
mod filtering;
pub use filtering::observation_gain;
mod insider;
mod predictable_default;
mod random_barrier;
mod risk_attitudes;
mod survival_claim;
mod two_defaults;
pub(crate) mod util;

/// Everything that can go wrong when asking a model for a path.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model {model}: parameter {name} = {value} outside domain {domain}")]
    Domain {
        model: &'static str,
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("model {model} does not support {mode:?} mode")]
    UnsupportedMode { model: &'static str, mode: SimMode },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Path(#[from] PathError),
}

/// Time discretization requested for a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Common horizon of both assets.
    pub horizon: f64,
    /// Number of uniform base steps; models may insert event nodes.
    pub n_steps: usize,
}

fn default_rate1() -> f64 {
    0.5
}
fn default_rate2() -> f64 {
    1.0
}
fn default_barrier() -> f64 {
    1.0
}
fn default_barrier_rate() -> f64 {
    0.8
}
fn default_unit() -> f64 {
    1.0
}
fn default_lambda_x() -> f64 {
    0.1
}
fn default_lambda_y() -> f64 {
    0.25
}
fn default_lambda_pd() -> f64 {
    0.5
}
fn default_lambda_insider() -> f64 {
    0.3
}
fn default_rho() -> f64 {
    0.8
}
fn default_filter_level() -> f64 {
    10.0
}
fn default_growth_rate() -> f64 {
    1.0
}
fn default_two() -> f64 {
    2.0
}

/// Which model to run, with its parameters. Serialized with a `name`
/// tag so configuration files read as `{"name": "survival_claim", ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Two default times driven by independent time-changed Brownian
    /// hitting clocks. Each asset holds one claim priced on bare
    /// default/survival odds and one priced on the continuously
    /// observed hitting distance, so the second asset carries a
    /// predictable upward jump when the second clock defaults.
    TwoDefaults {
        #[serde(default = "default_rate1")]
        rate1: f64,
        #[serde(default = "default_rate2")]
        rate2: f64,
        #[serde(default = "default_barrier")]
        barrier1: f64,
        #[serde(default = "default_barrier")]
        barrier2: f64,
    },
    /// A single default at the first time the running maximum of a
    /// Brownian motion reaches an independent exponential barrier. The
    /// first asset is the compensated default claim; it drifts up
    /// deterministically between barrier advances.
    RandomBarrier {
        #[serde(default = "default_barrier_rate")]
        barrier_rate: f64,
        #[serde(default = "default_unit")]
        x0: f64,
    },
    /// One totally unpredictable default, two markets discounting it at
    /// different intensities. Every martingale increment is recorded as
    /// a marked jump with its exact two-outcome compensator.
    SurvivalClaim {
        #[serde(default = "default_lambda_x")]
        lambda_x: f64,
        #[serde(default = "default_lambda_y")]
        lambda_y: f64,
    },
    /// Default at the first hitting time of a level by a Brownian
    /// motion — announced by the approach, hence predictable. The
    /// second asset grows deterministically and collapses at default,
    /// so all of its motion is predictable finite variation.
    PredictableDefault {
        #[serde(default = "default_lambda_pd")]
        lambda_y: f64,
    },
    /// A defaultable claim priced by a trader who already knows the
    /// terminal value of the driving Brownian motion and the default
    /// time. All randomness is resolved at time zero; both prices are
    /// predictable finite variation in the enlarged filtration.
    InsiderDefaultable {
        #[serde(default = "default_lambda_insider")]
        lambda: f64,
    },
    /// Two correlated Brownian markets whose hedge ratio
    /// `1 − ρ·(T − t)` changes sign when `ρ > 1/T`. Paths stop when the
    /// first asset hits zero (exact bridge absorption) or the second
    /// approaches zero.
    RiskAttitudes {
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_unit")]
        x0: f64,
    },
    /// A signal observed through independent noise; the second asset is
    /// the filtered estimate, repaired by a terminal lump that equates
    /// it to the signal at the horizon.
    Filtering {
        #[serde(default = "default_filter_level")]
        x0: f64,
    },
    /// Brownian first asset, second asset built from it with the
    /// deterministic hedge ratio `1 + e^{rt} − e^{rT}`, which starts
    /// negative and turns positive; drift enters through the first
    /// asset's level.
    DeterministicH {
        #[serde(default = "default_growth_rate")]
        r: f64,
        #[serde(default = "default_two")]
        x0: f64,
    },
}

impl ModelSpec {
    /// Stable catalog name (also the serde tag).
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::TwoDefaults { .. } => "two_defaults",
            ModelSpec::RandomBarrier { .. } => "random_barrier",
            ModelSpec::SurvivalClaim { .. } => "survival_claim",
            ModelSpec::PredictableDefault { .. } => "predictable_default",
            ModelSpec::InsiderDefaultable { .. } => "insider_defaultable",
            ModelSpec::RiskAttitudes { .. } => "risk_attitudes",
            ModelSpec::Filtering { .. } => "filtering",
            ModelSpec::DeterministicH { .. } => "deterministic_h",
        }
    }

    /// Whether the model can emit increments in the given mode.
    /// Every model has closed-form conditional dynamics, so `analytic`
    /// is always available; an Euler variant exists only where blurred
    /// attribution is itself the point of the exercise.
    pub fn supports(&self, mode: SimMode) -> bool {
        match mode {
            SimMode::Analytic => true,
            SimMode::Euler => matches!(self, ModelSpec::TwoDefaults { .. }),
        }
    }
}

/// A complete simulation request: model, grid, and increment mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: ModelSpec,
    pub grid: GridSpec,
    #[serde(default = "default_mode")]
    pub mode: SimMode,
}

fn default_mode() -> SimMode {
    SimMode::Analytic
}

/// Simulate one path. The same `(config, seed)` always reproduces the
/// same path bit for bit, on any thread count.
pub fn simulate(config: &ModelConfig, seed: u64) -> Result<DecomposedPath, ModelError> {
    if !config.model.supports(config.mode) {
        return Err(ModelError::UnsupportedMode {
            model: config.model.name(),
            mode: config.mode,
        });
    }
    match &config.model {
        ModelSpec::TwoDefaults {
            rate1,
            rate2,
            barrier1,
            barrier2,
        } => two_defaults::simulate(
            *rate1,
            *rate2,
            *barrier1,
            *barrier2,
            &config.grid,
            config.mode,
            seed,
        ),
        ModelSpec::RandomBarrier { barrier_rate, x0 } => {
            random_barrier::simulate(*barrier_rate, *x0, &config.grid, seed)
        }
        ModelSpec::SurvivalClaim { lambda_x, lambda_y } => {
            survival_claim::simulate(*lambda_x, *lambda_y, &config.grid, seed)
        }
        ModelSpec::PredictableDefault { lambda_y } => {
            predictable_default::simulate(*lambda_y, &config.grid, seed)
        }
        ModelSpec::InsiderDefaultable { lambda } => {
            insider::simulate(*lambda, &config.grid, seed)
        }
        ModelSpec::RiskAttitudes { rho, x0 } => {
            risk_attitudes::simulate(*rho, *x0, &config.grid, seed)
        }
        ModelSpec::Filtering { x0 } => filtering::simulate(*x0, &config.grid, seed),
        ModelSpec::DeterministicH { r, x0 } => {
            deterministic_h::simulate(*r, *x0, &config.grid, seed)
        }
    }
}

/// Deflator kernels a model supplies itself, bypassing the generic
/// structural derivation. Both vectors hold one predictable value per
/// grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflatorKernels {
    /// Kernel applied to the hedged martingale component.
    pub hedged: Vec<f64>,
    /// Kernel applied to the orthogonal martingale component.
    pub ortho: Vec<f64>,
}

/// Model-supplied deflator kernels for a path, if the model defines
/// them in closed form. Two cases bypass the structural derivation:
/// the insider model, whose drift lives on cells with vanishing
/// recorded quadratic variation, supplies
/// `ortho_i = (B_T − B_i)⁺ / (Y_i (T − t_i))` (driver level
/// reconstructed from `B_i = ln Y_i + t_i / 2`); and the survival
/// model, whose recorded drift is the realized lottery residual,
/// supplies its predictable compensator ratio so the deflator tilts
/// the default branch too. Everyone else returns `None` and is served
/// by the structure module.
pub fn supplied_kernels(config: &ModelConfig, path: &DecomposedPath) -> Option<DeflatorKernels> {
    match &config.model {
        ModelSpec::InsiderDefaultable { .. } => Some(insider::kernels(path)),
        ModelSpec::SurvivalClaim { lambda_x, lambda_y } => Some(survival_claim::kernels(
            path,
            *lambda_x,
            *lambda_y,
            config.grid.n_steps,
        )),
        _ => None,
    }
}

/// Documentation record for one catalog entry.
#[derive(Debug, Clone, Serialize)]
pub struct ModelEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub parameters: Vec<ParamDoc>,
    /// Whether paths satisfy exact terminal price equality.
    pub converging: bool,
    /// Increment modes the model accepts.
    pub modes: Vec<SimMode>,
    /// Where the construction is written up.
    pub reference: &'static str,
}

/// One parameter's documentation.
#[derive(Debug, Clone, Serialize)]
pub struct ParamDoc {
    pub name: &'static str,
    pub domain: &'static str,
    pub default: f64,
}

/// The full model catalog, in stable order.
pub fn catalog() -> Vec<ModelEntry> {
    let analytic = vec![SimMode::Analytic];
    vec![
        ModelEntry {
            name: "two_defaults",
            summary: "two hitting-time defaults; the second asset's default leg jumps up \
                      predictably on a quadratic-variation-free cell",
            parameters: vec![
                ParamDoc {
                    name: "rate1",
                    domain: "(0, inf)",
                    default: 0.5,
                },
                ParamDoc {
                    name: "rate2",
                    domain: "(0, inf)",
                    default: 1.0,
                },
                ParamDoc {
                    name: "barrier1",
                    domain: "(0, inf)",
                    default: 1.0,
                },
                ParamDoc {
                    name: "barrier2",
                    domain: "(0, inf)",
                    default: 1.0,
                },
            ],
            converging: true,
            modes: vec![SimMode::Analytic, SimMode::Euler],
            reference: "docs/models.md#two_defaults",
        },
        ModelEntry {
            name: "random_barrier",
            summary: "default when a Brownian running maximum reaches a hidden exponential \
                      barrier; the compensated claim drifts up between barrier advances",
            parameters: vec![
                ParamDoc {
                    name: "barrier_rate",
                    domain: "(0, inf)",
                    default: 0.8,
                },
                ParamDoc {
                    name: "x0",
                    domain: "(0, inf)",
                    default: 1.0,
                },
            ],
            converging: false,
            modes: analytic.clone(),
            reference: "docs/models.md#random_barrier",
        },
        ModelEntry {
            name: "survival_claim",
            summary: "one unpredictable default, two markets discounting it at different \
                      intensities; exact two-outcome compensators per cell",
            parameters: vec![
                ParamDoc {
                    name: "lambda_x",
                    domain: "(0, inf)",
                    default: 0.1,
                },
                ParamDoc {
                    name: "lambda_y",
                    domain: "(0, inf)",
                    default: 0.25,
                },
            ],
            converging: true,
            modes: analytic.clone(),
            reference: "docs/models.md#survival_claim",
        },
        ModelEntry {
            name: "predictable_default",
            summary: "default announced by a Brownian approach to a level; the second asset \
                      is pure predictable finite variation and admits a riskless harvest",
            parameters: vec![ParamDoc {
                name: "lambda_y",
                domain: "(0, inf)",
                default: 0.5,
            }],
            converging: true,
            modes: analytic.clone(),
            reference: "docs/models.md#predictable_default",
        },
        ModelEntry {
            name: "insider_defaultable",
            summary: "defaultable claim priced with full knowledge of the terminal driver \
                      value and the default time; both prices are predictable finite \
                      variation",
            parameters: vec![ParamDoc {
                name: "lambda",
                domain: "(0, inf)",
                default: 0.3,
            }],
            converging: true,
            modes: analytic.clone(),
            reference: "docs/models.md#insider_defaultable",
        },
        ModelEntry {
            name: "risk_attitudes",
            summary: "correlated Brownian markets with hedge ratio 1 − rho (T − t); sign \
                      changes open a drift window answered by the orthogonal component",
            parameters: vec![
                ParamDoc {
                    name: "rho",
                    domain: "(-1, 1)",
                    default: 0.8,
                },
                ParamDoc {
                    name: "x0",
                    domain: "(0, inf)",
                    default: 1.0,
                },
            ],
            converging: false,
            modes: analytic.clone(),
            reference: "docs/models.md#risk_attitudes",
        },
        ModelEntry {
            name: "filtering",
            summary: "filtered estimate of a Brownian signal observed in noise, repaired by \
                      a terminal lump on a quadratic-variation-free cell",
            parameters: vec![ParamDoc {
                name: "x0",
                domain: "[8, inf)",
                default: 10.0,
            }],
            converging: true,
            modes: analytic.clone(),
            reference: "docs/models.md#filtering",
        },
        ModelEntry {
            name: "deterministic_h",
            summary: "deterministic hedge ratio 1 + e^{rt} − e^{rT} crossing zero; drift \
                      proportional to the first asset's level opens arbitrage windows",
            parameters: vec![
                ParamDoc {
                    name: "r",
                    domain: "(0, inf)",
                    default: 1.0,
                },
                ParamDoc {
                    name: "x0",
                    domain: "(0, inf)",
                    default: 2.0,
                },
            ],
            converging: false,
            modes: analytic,
            reference: "docs/models.md#deterministic_h",
        },
    ]
}

pub(crate) fn require(
    model: &'static str,
    name: &'static str,
    value: f64,
    domain: &'static str,
    ok: bool,
) -> Result<(), ModelError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::Domain {
            model,
            name,
            value,
            domain,
        })
    }
}

pub(crate) fn base_grid(grid: &GridSpec) -> Result<Arc<TimeGrid>, ModelError> {
    Ok(Arc::new(crate::grid::make_grid(
        grid.horizon,
        grid.n_steps,
        &[],
    )?))
}
