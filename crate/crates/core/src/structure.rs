//! Structural analysis of decomposed paths.
//!
//! Four checks, each a pure function of one [`DecomposedPath`]:
//!
//! 1. **Normal form** ([`check_normal_form`]): each price's singular
//!    finite-variation part must be nonincreasing and must not charge
//!    cells where the price's own martingale bracket grows. A price
//!    whose singular part rises — a predictable upward lump — fails with
//!    [`NormalFormVerdict::JNotDecreasing`]; one whose decreasing lump
//!    shares a cell with quadratic variation fails with
//!    [`NormalFormVerdict::SingularityViolated`].
//! 2. **Drift split** ([`split_drift`]): the second price's upward drift
//!    `A` is decomposed against the reference `h⁺·d⟨M^X⟩` into a
//!    hedge-aligned part `A¹` (with density `ã¹` normalized so that
//!    `dA¹ = ã¹ h² d⟨M^X⟩` where the hedge is positive) and a part `A²`
//!    carried entirely by cells the reference does not charge.
//! 3. **Drift conditions** ([`check_drift_conditions`]): `A²` must be
//!    absolutely continuous with respect to the orthogonal martingale's
//!    bracket (its density is `ã²`), and each marked orthogonal jump
//!    must satisfy `ã²·ΔM² < 1` — the two conditions under which the
//!    deflator built from `ã¹, ã²` stays positive and kills the drift.
//!    Cells where `A²` has mass but the orthogonal bracket is null are
//!    exactly the exploitable set the arbitrage module trades on.
//! 4. **Covariation rule** ([`covariation_rule`]): when the second
//!    price has no orthogonal martingale component at all, no cell with
//!    nonpositive price covariation `h·d⟨M^X⟩` may carry upward net
//!    drift; cells that do are reported.
//!
//! [`analyze`] runs all of them and assembles a serializable
//! [`StructureReport`].
//!
//! Tolerances: every operation takes an explicit null-mass threshold;
//! [`default_tol`] supplies the scale-aware default — `10⁻¹² ×` the
//! price scale for analytic increments, and `3·√Δt ×` a path-wide
//! volatility estimate (floored at the analytic value) for Euler
//! increments, whose discretization noise pollutes drift cells. Hedge
//! values are per-cell left-endpoint reads, so every indicator built
//! from them is predictable.

use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

use crate::measure::{
    is_orthogonal, lebesgue_decompose, monotone_classify, DiscreteMeasure, MeasureError,
    Monotonicity,
};
use crate::path::{DecomposedPath, SimMode};

/// Errors from the structural analyzer.
#[derive(Debug, Error, PartialEq)]
pub enum StructureError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    /// A drift density came out negative beyond tolerance: the path's
    /// declared drift measures are corrupt (upward drift must be
    /// nonnegative), so no report is produced.
    #[error("negative drift density {value} at cell {step}: corrupted path decomposition")]
    NegativeDensity { step: usize, value: f64 },
    /// The covariation rule was asked about a path whose orthogonal
    /// martingale component is not identically zero.
    #[error(
        "the covariation rule requires a vanishing orthogonal martingale \
         component; found mass {value} on cell {step}"
    )]
    OrthogonalPartPresent { step: usize, value: f64 },
}

/// Outcome of the normal-form check for one price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalFormVerdict {
    /// Singular part nonincreasing and carried entirely by cells with
    /// no quadratic variation.
    NormalForm,
    /// The singular part has an increasing cell — a predictable upward
    /// lump. Checked first, so this verdict wins when both fail.
    JNotDecreasing,
    /// The singular part is nonincreasing but shares a cell with the
    /// price's own martingale bracket.
    SingularityViolated,
}

/// Result of [`split_drift`]: `a1 + a2 = drift_up` cellwise and
/// bitwise; `a1` is the part absorbed by the reference `h⁺·d⟨M^X⟩`,
/// `a2` the part on reference-null cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSplit {
    /// Hedge-aligned upward drift: `dA¹ = ã¹ h² d⟨M^X⟩`.
    pub a1: DiscreteMeasure,
    /// Upward drift singular to the hedge-aligned reference.
    pub a2: DiscreteMeasure,
    /// Density `ã¹` per cell, supported on `{h > 0}` and nonnegative.
    pub a1_tilde: Vec<f64>,
}

/// Verdict of an absolute-continuity check, with the offending cells
/// when it fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AbsoluteContinuity {
    Holds,
    Fails { cells: Vec<usize> },
}

impl AbsoluteContinuity {
    pub fn holds(&self) -> bool {
        matches!(self, AbsoluteContinuity::Holds)
    }
}

/// Verdict of the jump-size bound `ã·ΔM < 1`, with the offending jump
/// steps when it fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JumpBound {
    Holds,
    Fails { jumps: Vec<usize> },
}

impl JumpBound {
    pub fn holds(&self) -> bool {
        matches!(self, JumpBound::Holds)
    }
}

/// Result of [`check_drift_conditions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftConditions {
    /// Whether `a2` is absolutely continuous with respect to the
    /// orthogonal martingale's predictable bracket.
    pub absolutely_continuous: AbsoluteContinuity,
    /// Density `ã²` of `a2` against that bracket, per cell; zero on
    /// bracket-null cells and nonnegative everywhere.
    pub a2_tilde: Vec<f64>,
    /// Whether every marked orthogonal jump satisfies `ã²·ΔM² < 1`.
    pub jump_bound: JumpBound,
}

/// Result of [`covariation_rule`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovariationReport {
    /// True when no nonpositive-covariation cell carries upward net
    /// drift.
    pub holds: bool,
    /// Cells where `h·d⟨M^X⟩ ≤ tol` while the second price's net drift
    /// is above tolerance.
    pub violation_cells: Vec<usize>,
}

/// Everything the analyzer derives from one path, in one serializable
/// record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub x_verdict: NormalFormVerdict,
    pub y_verdict: NormalFormVerdict,
    /// Hedge-aligned part of the upward drift.
    pub a1: DiscreteMeasure,
    /// Part of the upward drift singular to the hedge-aligned reference.
    pub a2: DiscreteMeasure,
    /// Density of `a1`, normalized to `dA¹ = ã¹ h² d⟨M^X⟩` on `{h>0}`.
    pub a1_tilde: Vec<f64>,
    /// Density of `a2` against the orthogonal bracket.
    pub a2_tilde: Vec<f64>,
    /// Whether `a2` is absorbed by the orthogonal bracket.
    pub a2_absolutely_continuous: AbsoluteContinuity,
    /// Whether every orthogonal jump satisfies `ã²·ΔM² < 1`.
    pub a2_jump_bound: JumpBound,
    /// Whether every hedged jump satisfies `ã¹·ΔM¹ < 1`.
    pub a1_jump_bound: bool,
    /// Null-mass threshold the verdicts were computed with.
    pub tol: f64,
}

/// Scale-aware default null-mass threshold for a path's analysis:
/// `10⁻¹² ×` the price scale when increments are analytic; for Euler
/// increments, `3·√Δt̄ · σ̂` with `σ̂` the path-wide volatility estimate
/// `√(total recorded bracket mass / horizon)` and `Δt̄` the mean cell
/// width, floored at the analytic value.
pub fn default_tol(path: &DecomposedPath) -> f64 {
    let scale = path
        .x
        .iter()
        .chain(&path.y)
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let floor = 1.0e-12 * scale;
    match path.meta.mode {
        SimMode::Analytic => floor,
        SimMode::Euler => {
            let horizon = path.grid.horizon();
            let energy = path.mart_x.qv_pred.total_variation()
                + path.mart_hedged.qv_pred.total_variation()
                + path.mart_ortho.qv_pred.total_variation();
            let vol = (energy / horizon).sqrt();
            let dt = horizon / path.n_steps() as f64;
            (3.0 * dt.sqrt() * vol).max(floor)
        }
    }
}

fn measure_on(path: &DecomposedPath, mass: Vec<f64>) -> DiscreteMeasure {
    DiscreteMeasure::new(Arc::clone(&path.grid), mass).expect("mass built with grid length")
}

/// The reference measure for the drift split: `h⁺·d⟨M^X⟩` per cell,
/// with the hedge read at the cell's left endpoint.
pub fn hedged_reference(path: &DecomposedPath) -> DiscreteMeasure {
    let mass: Vec<f64> = path
        .hedge_ratio
        .iter()
        .zip(path.mart_x.qv_pred.mass())
        .map(|(h, q)| h.max(0.0) * q)
        .collect();
    measure_on(path, mass)
}

/// Predictable bracket of the second price's full martingale part:
/// hedged plus orthogonal, cellwise.
fn y_martingale_bracket(path: &DecomposedPath) -> DiscreteMeasure {
    let mass: Vec<f64> = path
        .mart_hedged
        .qv_pred
        .mass()
        .iter()
        .zip(path.mart_ortho.qv_pred.mass())
        .map(|(a, b)| a + b)
        .collect();
    measure_on(path, mass)
}

/// Normal-form verdicts for both prices.
///
/// The first price's singular part is checked directly: it must be
/// cellwise `≤ tol` and mutually singular with `d⟨M^X⟩`. The second
/// price declares only a Jordan pair, so its singular part is first
/// extracted by decomposing the net drift against the full martingale
/// bracket of the second price; the extracted part is singular by
/// construction, so only monotonicity can fail there.
pub fn check_normal_form(
    path: &DecomposedPath,
    tol: f64,
) -> Result<(NormalFormVerdict, NormalFormVerdict), StructureError> {
    let djx = &path.fv_singular_x;
    let x = if !djx.mass().iter().all(|&v| v <= tol) {
        NormalFormVerdict::JNotDecreasing
    } else if !is_orthogonal(djx, &path.mart_x.qv_pred, tol)? {
        NormalFormVerdict::SingularityViolated
    } else {
        NormalFormVerdict::NormalForm
    };

    let bracket = y_martingale_bracket(path);
    let split = lebesgue_decompose(&path.drift_net(), &bracket, tol)?;
    let jy = &split.singular;
    let (mono, _) = monotone_classify(jy, tol);
    let y = match mono {
        Monotonicity::Decreasing => NormalFormVerdict::NormalForm,
        // The all-null measure classifies as increasing by convention;
        // it is trivially a decreasing singular part.
        Monotonicity::Increasing if jy.mass().iter().all(|v| v.abs() <= tol) => {
            NormalFormVerdict::NormalForm
        }
        _ => NormalFormVerdict::JNotDecreasing,
    };
    Ok((x, y))
}

/// Split the second price's upward drift against `h⁺·d⟨M^X⟩`.
///
/// `a1 + a2 = drift_up` holds cellwise bitwise. `ã¹` is normalized so
/// that `dA¹ = ã¹ h² d⟨M^X⟩` on `{h > 0}` and vanishes elsewhere. A
/// negative density signals a negative upward-drift cell — corrupted
/// input — and aborts with [`StructureError::NegativeDensity`].
pub fn split_drift(path: &DecomposedPath, tol: f64) -> Result<DriftSplit, StructureError> {
    let reference = hedged_reference(path);
    let split = lebesgue_decompose(&path.drift_up, &reference, tol)?;
    // Same operands, same operation as the decomposition's internal
    // product, so `a1 + a2` reconstructs `drift_up` bitwise.
    let a1_mass: Vec<f64> = split
        .density
        .iter()
        .zip(reference.mass())
        .map(|(d, r)| d * r)
        .collect();
    let n = a1_mass.len();
    let mut a1_tilde = vec![0.0; n];
    for i in 0..n {
        let h = path.hedge_ratio[i];
        if h > 0.0 && split.density[i] != 0.0 {
            a1_tilde[i] = split.density[i] / h;
        }
        if a1_tilde[i] < 0.0 {
            return Err(StructureError::NegativeDensity {
                step: i,
                value: a1_tilde[i],
            });
        }
    }
    for (i, &s) in split.singular.mass().iter().enumerate() {
        if s < -tol {
            return Err(StructureError::NegativeDensity { step: i, value: s });
        }
    }
    Ok(DriftSplit {
        a1: measure_on(path, a1_mass),
        a2: split.singular,
        a1_tilde,
    })
}

/// Check the two conditions on the singular drift part: absolute
/// continuity against the orthogonal bracket (density `ã²`) and the
/// jump bound `ã²·ΔM² < 1 − tol` at every marked orthogonal jump.
pub fn check_drift_conditions(
    path: &DecomposedPath,
    a2: &DiscreteMeasure,
    tol: f64,
) -> Result<DriftConditions, StructureError> {
    let split = lebesgue_decompose(a2, &path.mart_ortho.qv_pred, tol)?;
    let cells: Vec<usize> = split
        .singular
        .mass()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > tol)
        .map(|(i, _)| i)
        .collect();
    let absolutely_continuous = if cells.is_empty() {
        AbsoluteContinuity::Holds
    } else {
        AbsoluteContinuity::Fails { cells }
    };
    let mut a2_tilde = split.density;
    for (i, d) in a2_tilde.iter_mut().enumerate() {
        if *d < 0.0 {
            if a2.mass()[i].abs() <= tol {
                // Sub-ulp residual inherited from the first split's
                // division repair; physically zero.
                *d = 0.0;
            } else {
                return Err(StructureError::NegativeDensity {
                    step: i,
                    value: *d,
                });
            }
        }
    }
    let jumps: Vec<usize> = path
        .mart_ortho
        .increments
        .jumps()
        .iter()
        .filter(|(i, dj)| a2_tilde[*i] * dj >= 1.0 - tol)
        .map(|(i, _)| *i)
        .collect();
    let jump_bound = if jumps.is_empty() {
        JumpBound::Holds
    } else {
        JumpBound::Fails { jumps }
    };
    Ok(DriftConditions {
        absolutely_continuous,
        a2_tilde,
        jump_bound,
    })
}

/// The no-upward-drift rule on nonpositive-covariation cells, for paths
/// whose second price has no orthogonal martingale component.
///
/// Precondition: the orthogonal component vanishes — any cell with an
/// orthogonal increment or predictable bracket mass beyond `tol` aborts
/// with [`StructureError::OrthogonalPartPresent`]. The rule holds when
/// no cell has `h·d⟨M^X⟩ ≤ tol` together with net drift `> tol`.
pub fn covariation_rule(
    path: &DecomposedPath,
    tol: f64,
) -> Result<CovariationReport, StructureError> {
    let n = path.n_steps();
    for i in 0..n {
        let m = path.mart_ortho.total_on_step(i);
        let q = path.mart_ortho.qv_pred.mass()[i];
        if m.abs() > tol || q > tol {
            return Err(StructureError::OrthogonalPartPresent {
                step: i,
                value: if m.abs() > tol { m } else { q },
            });
        }
    }
    let mut violation_cells = Vec::new();
    for i in 0..n {
        let cov = path.hedge_ratio[i] * path.mart_x.qv_pred.mass()[i];
        let dvy = path.drift_up.mass()[i] - path.drift_down.mass()[i];
        if cov <= tol && dvy > tol {
            violation_cells.push(i);
        }
    }
    Ok(CovariationReport {
        holds: violation_cells.is_empty(),
        violation_cells,
    })
}

/// Run every check and assemble the full report.
pub fn analyze(path: &DecomposedPath, tol: f64) -> Result<StructureReport, StructureError> {
    let (x_verdict, y_verdict) = check_normal_form(path, tol)?;
    let split = split_drift(path, tol)?;
    let conditions = check_drift_conditions(path, &split.a2, tol)?;
    let a1_jump_bound = path
        .mart_hedged
        .increments
        .jumps()
        .iter()
        .all(|(i, dj)| split.a1_tilde[*i] * dj < 1.0 - tol);
    Ok(StructureReport {
        x_verdict,
        y_verdict,
        a1: split.a1,
        a2: split.a2,
        a1_tilde: split.a1_tilde,
        a2_tilde: conditions.a2_tilde,
        a2_absolutely_continuous: conditions.absolutely_continuous,
        a2_jump_bound: conditions.jump_bound,
        a1_jump_bound,
        tol,
    })
}
