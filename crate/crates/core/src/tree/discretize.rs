//! Finite-tree quantizations of the default-driven path models.
//!
//! Each builder collapses a continuous-time model onto an event tree by
//! quantizing what can happen per period — default / no default, with a
//! pinned pre-default rise where the continuous model has one — and
//! pricing every node with the model's closed-form survival discounts,
//! rationalized so the oracle can work exactly: a continuous rate `r`
//! over a period of length `δ` becomes the per-period factor
//! `1/(1 + rδ)`, the standard discrete-compounding stand-in for
//! `e^{-rδ}`, and the same hazard gives the per-period default
//! probability `rδ/(1 + rδ)`.
//!
//! The rationalization deliberately preserves each model's structural
//! verdict rather than its exact numbers:
//!
//! * **survival claim** — both prices are wiped out by one hazard-driven
//!   default; every rise is compensated by a positive-probability drop
//!   in the same period, so down-weighting survival makes both prices
//!   supermartingales and the oracle reports *feasible*;
//! * **predictable-default variant** — the second price climbs its
//!   discount curve and every default is announced one period ahead, so
//!   there is always a node whose children all carry a strictly higher
//!   second price; no probability assignment can push its conditional
//!   expectation back down, and the oracle reports *infeasible* with a
//!   buy-the-second-asset-while-unannounced certificate;
//! * **two defaults** — the first asset's default arrives per period
//!   like the survival claim's, but the second asset's is announced and
//!   goes through a pinned rise before the drop, which again forces a
//!   sure conditional rise and an *infeasible* verdict.

use std::fmt;
use std::str::FromStr;

use num_traits::One;

use super::{rat, MarketTree, Rational, TreeBuilder, TreeError};

/// Path models with a finite-tree quantization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeModel {
    /// One shared default wipes out both prices; hazards differ.
    SurvivalClaim,
    /// Every default of the second price is announced a period ahead.
    PredictableDefaultVariant,
    /// Hazard default for the first price, announced pinned default for
    /// the second.
    TwoDefaults,
}

impl TreeModel {
    /// Canonical snake_case name.
    pub fn name(self) -> &'static str {
        match self {
            TreeModel::SurvivalClaim => "survival_claim",
            TreeModel::PredictableDefaultVariant => "predictable_default_variant",
            TreeModel::TwoDefaults => "two_defaults",
        }
    }
}

impl fmt::Display for TreeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TreeModel {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "survival_claim" => Ok(TreeModel::SurvivalClaim),
            "predictable_default_variant" => Ok(TreeModel::PredictableDefaultVariant),
            "two_defaults" => Ok(TreeModel::TwoDefaults),
            other => Err(TreeError::Malformed {
                reason: format!(
                    "unknown tree model {other:?} (expected survival_claim, \
                     predictable_default_variant, or two_defaults)"
                ),
            }),
        }
    }
}

/// Quantizes a path model onto an event tree of the given size.
///
/// `periods` must lie in `1..=6` and `branching` in `2..=3` — the trees
/// are solved in exact rational arithmetic, so their size is capped.
/// The two-defaults model needs three branches per live period (nothing
/// happens / first price defaults / second price's default is
/// announced) and rejects `branching == 2`.
pub fn discretize_model(
    model: TreeModel,
    periods: usize,
    branching: usize,
) -> Result<MarketTree, TreeError> {
    if !(1..=6).contains(&periods) || !(2..=3).contains(&branching) {
        return Err(TreeError::SizeGuard { periods, branching });
    }
    Ok(match model {
        TreeModel::SurvivalClaim => survival_tree(periods, branching, rat(1, 10), rat(1, 4)),
        TreeModel::PredictableDefaultVariant => predictable_default_tree(periods, rat(1, 2)),
        TreeModel::TwoDefaults => {
            if branching != 3 {
                return Err(TreeError::BranchingMismatch {
                    model: "two_defaults",
                    required: 3,
                    got: branching,
                });
            }
            two_defaults_tree(periods, rat(1, 2), rat(1, 1))
        }
    })
}

fn pow(base: &Rational, exp: usize) -> Rational {
    let mut acc = Rational::one();
    for _ in 0..exp {
        acc = acc * base;
    }
    acc
}

/// Per-period survival/discount factor `1/(1 + rate·δ)` for `δ = 1/periods`.
fn period_factor(rate: &Rational, periods: usize) -> Rational {
    (Rational::one() + rate * rat(1, periods as i64)).recip()
}

/// Absorbing run of zero-price nodes from period `from` to the horizon.
fn dead_chain(b: &mut TreeBuilder, mut node: usize, from: usize, periods: usize, x: Rational) {
    for _ in from..periods {
        node = b.child(node, Rational::one(), x.clone(), rat(0, 1));
    }
}

/// Both prices are claims on the same survival event with different
/// hazards: alive at period `k` they quote `s^(periods-k)` for their own
/// per-period factor `s`, and one shared default sends both to zero.
/// With `branching == 3` the survival branch splits into two
/// equal-probability copies (identical prices), exercising three-way
/// sibling sums without changing the verdict.
pub(crate) fn survival_tree(
    periods: usize,
    branching: usize,
    rate_x: Rational,
    rate_y: Rational,
) -> MarketTree {
    let sx = period_factor(&rate_x, periods);
    let sy = period_factor(&rate_y, periods);
    let mut b = TreeBuilder::new(pow(&sx, periods), pow(&sy, periods));
    let mut frontier = vec![(0usize, 0usize)];
    while let Some((node, k)) = frontier.pop() {
        if k == periods {
            continue;
        }
        let dead = b.child(node, Rational::one() - &sx, rat(0, 1), rat(0, 1));
        dead_chain(&mut b, dead, k + 1, periods, rat(0, 1));
        let splits = branching - 1;
        let branch_prob = &sx / rat(splits as i64, 1);
        for _ in 0..splits {
            let alive = b.child(
                node,
                branch_prob.clone(),
                pow(&sx, periods - k - 1),
                pow(&sy, periods - k - 1),
            );
            frontier.push((alive, k + 1));
        }
    }
    b.finish()
}

/// The first price is constant; the second climbs its discount curve
/// `g^(periods-k)` toward one and dies only by announcement: a branch
/// into an announced node (price still on the curve) whose single child
/// is the default. While unannounced, every child therefore quotes a
/// strictly higher second price — the structural mark of this model.
pub(crate) fn predictable_default_tree(periods: usize, rate: Rational) -> MarketTree {
    let g = period_factor(&rate, periods);
    let announce = Rational::one() - &g;
    let one = || rat(1, 1);
    let mut b = TreeBuilder::new(one(), pow(&g, periods));
    let mut frontier = vec![(0usize, 0usize)];
    while let Some((node, k)) = frontier.pop() {
        if k == periods {
            continue;
        }
        let curve = pow(&g, periods - k - 1);
        if k + 2 <= periods {
            let unannounced = b.child(node, Rational::one() - &announce, one(), curve.clone());
            frontier.push((unannounced, k + 1));
            let announced = b.child(node, announce.clone(), one(), curve);
            let dead = b.child(announced, Rational::one(), one(), rat(0, 1));
            dead_chain(&mut b, dead, k + 2, periods, one());
        } else {
            // Last period: an announcement could no longer resolve
            // before the horizon, so survival is certain.
            let survivor = b.child(node, Rational::one(), one(), curve);
            frontier.push((survivor, k + 1));
        }
    }
    b.finish()
}

/// Joint state of the two prices in the two-defaults quantization.
#[derive(Clone, Copy)]
enum Phase {
    /// Both prices alive on their discount curves.
    Both,
    /// First price defaulted; second still alive.
    XDead,
    /// Second price's default announced: it sits one unit above its
    /// curve (the pin) and dies next period; first price still alive.
    PinXAlive,
    /// As above with the first price already dead.
    PinXDead,
    /// Second price dead, first still alive.
    YDeadXAlive,
    /// Both dead.
    Gone,
}

/// First price: hazard default per live period (like the survival
/// claim). Second price: default only by announcement, passing through
/// a pinned value one unit above its curve before dropping to zero.
/// While the second price is alive every child quotes it strictly
/// higher (curve rise, or the pin), so its conditional expectation can
/// never be pushed back down.
pub(crate) fn two_defaults_tree(
    periods: usize,
    rate_x: Rational,
    rate_y: Rational,
) -> MarketTree {
    let ux = period_factor(&rate_x, periods);
    let uy = period_factor(&rate_y, periods);
    let qx = Rational::one() - &ux;
    let qy = Rational::one() - &uy;
    let x_at = |phase: Phase, k: usize| match phase {
        Phase::Both | Phase::PinXAlive | Phase::YDeadXAlive => pow(&ux, periods - k),
        Phase::XDead | Phase::PinXDead | Phase::Gone => rat(0, 1),
    };
    let y_at = |phase: Phase, k: usize| match phase {
        Phase::Both | Phase::XDead => pow(&uy, periods - k),
        Phase::PinXAlive | Phase::PinXDead => Rational::one() + pow(&uy, periods - k),
        Phase::YDeadXAlive | Phase::Gone => rat(0, 1),
    };
    let mut b = TreeBuilder::new(x_at(Phase::Both, 0), y_at(Phase::Both, 0));
    let mut frontier = vec![(0usize, Phase::Both, 0usize)];
    while let Some((node, phase, k)) = frontier.pop() {
        if k == periods {
            continue;
        }
        let push = |b: &mut TreeBuilder, prob: Rational, next: Phase| {
            let id = b.child(node, prob, x_at(next, k + 1), y_at(next, k + 1));
            (id, next, k + 1)
        };
        match phase {
            Phase::Both => {
                if k + 2 <= periods {
                    let stay = Rational::one() - &qx - &qy;
                    frontier.push(push(&mut b, stay, Phase::Both));
                    frontier.push(push(&mut b, qx.clone(), Phase::XDead));
                    frontier.push(push(&mut b, qy.clone(), Phase::PinXAlive));
                } else {
                    // No room left for an announced default to resolve.
                    frontier.push(push(&mut b, Rational::one() - &qx, Phase::Both));
                    frontier.push(push(&mut b, qx.clone(), Phase::XDead));
                }
            }
            Phase::XDead => {
                if k + 2 <= periods {
                    frontier.push(push(&mut b, Rational::one() - &qy, Phase::XDead));
                    frontier.push(push(&mut b, qy.clone(), Phase::PinXDead));
                } else {
                    frontier.push(push(&mut b, Rational::one(), Phase::XDead));
                }
            }
            Phase::PinXAlive => {
                // The pinned price dies now; the first price runs its
                // own lottery in the same period.
                frontier.push(push(&mut b, Rational::one() - &qx, Phase::YDeadXAlive));
                frontier.push(push(&mut b, qx.clone(), Phase::Gone));
            }
            Phase::PinXDead => {
                frontier.push(push(&mut b, Rational::one(), Phase::Gone));
            }
            Phase::YDeadXAlive => {
                frontier.push(push(&mut b, Rational::one() - &qx, Phase::YDeadXAlive));
                frontier.push(push(&mut b, qx.clone(), Phase::Gone));
            }
            Phase::Gone => {
                frontier.push(push(&mut b, Rational::one(), Phase::Gone));
            }
        }
    }
    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{analyze, default_tol};
    use crate::tree::{certificate_values, solve, verify};
    use num_traits::{Signed, Zero};

    #[test]
    fn survival_discretization_is_feasible_at_both_branchings() {
        for branching in [2, 3] {
            let tree = discretize_model(TreeModel::SurvivalClaim, 4, branching).unwrap();
            tree.validate().unwrap();
            let result = solve(&tree).unwrap();
            assert!(result.feasible, "branching {branching}");
            assert!(verify(&tree, &result), "branching {branching}");
        }
        // Degenerate single-period edge.
        let tree = discretize_model(TreeModel::SurvivalClaim, 1, 2).unwrap();
        let result = solve(&tree).unwrap();
        assert!(result.feasible && verify(&tree, &result));
    }

    #[test]
    fn equal_hazards_collapse_the_two_survival_prices() {
        let tree = survival_tree(3, 2, rat(1, 5), rat(1, 5));
        for node in &tree.nodes {
            assert_eq!(node.x, node.y);
        }
        let result = solve(&tree).unwrap();
        assert!(result.feasible);
        assert!(verify(&tree, &result));
    }

    #[test]
    fn predictable_default_discretization_has_a_second_asset_only_certificate() {
        let tree = discretize_model(TreeModel::PredictableDefaultVariant, 4, 2).unwrap();
        let result = solve(&tree).unwrap();
        assert!(!result.feasible);
        assert!(verify(&tree, &result));
        let cert = result.certificate.as_ref().unwrap();
        // The first price is constant, so the strategy trades only the
        // second asset, long-only.
        for p in &cert.positions {
            assert!(p.pi_x.is_zero());
            assert!(!p.pi_y.is_negative());
        }
        assert!(cert.positions.iter().any(|p| p.pi_y.is_positive()));
        let values = certificate_values(&tree, cert).unwrap();
        assert!(values[0].is_zero());
        let shape = tree.validate().unwrap();
        assert!(shape.leaves.iter().all(|&l| !values[l].is_negative()));
        assert!(shape.leaves.iter().any(|&l| values[l].is_positive()));
    }

    #[test]
    fn two_defaults_discretization_is_infeasible_and_contains_the_pin() {
        let tree = discretize_model(TreeModel::TwoDefaults, 3, 3).unwrap();
        let result = solve(&tree).unwrap();
        assert!(!result.feasible);
        assert!(verify(&tree, &result));
        // The announced-default pin sits strictly above the alive curve,
        // which never exceeds one.
        assert!(tree.nodes.iter().any(|n| n.y > rat(1, 1)));
        assert!(matches!(
            discretize_model(TreeModel::TwoDefaults, 3, 2),
            Err(TreeError::BranchingMismatch {
                model: "two_defaults",
                required: 3,
                got: 2
            })
        ));
    }

    #[test]
    fn size_guard_rejects_out_of_range_requests() {
        for (periods, branching) in [(0, 2), (7, 2), (3, 1), (3, 4)] {
            assert!(matches!(
                discretize_model(TreeModel::SurvivalClaim, periods, branching),
                Err(TreeError::SizeGuard { .. })
            ));
        }
    }

    #[test]
    fn model_names_round_trip() {
        for model in [
            TreeModel::SurvivalClaim,
            TreeModel::PredictableDefaultVariant,
            TreeModel::TwoDefaults,
        ] {
            assert_eq!(model.name().parse::<TreeModel>().unwrap(), model);
        }
        assert!("martingale".parse::<TreeModel>().is_err());
    }

    #[test]
    fn shipped_tree_files_match_their_generators() {
        let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/trees");
        let read = |name: &str| {
            let path = format!("{dir}/{name}");
            let text = std::fs::read_to_string(&path)
                .unwrap_or_else(|e| panic!("reading {path}: {e}"));
            MarketTree::from_json(&text).unwrap()
        };
        for (file, model, periods, branching) in [
            ("survival_tree.json", TreeModel::SurvivalClaim, 4, 2),
            (
                "predictable_default_tree.json",
                TreeModel::PredictableDefaultVariant,
                4,
                2,
            ),
            ("two_defaults_tree.json", TreeModel::TwoDefaults, 3, 3),
        ] {
            let shipped = read(file);
            let generated = discretize_model(model, periods, branching).unwrap();
            assert_eq!(shipped, generated, "{file} drifted from its generator");
        }
        for (file, expect_feasible) in [
            ("one_period_up.json", true),
            ("one_period_overpriced.json", false),
            ("martingale_pair.json", true),
        ] {
            let tree = read(file);
            tree.validate().unwrap();
            let result = solve(&tree).unwrap();
            assert_eq!(result.feasible, expect_feasible, "{file}");
            assert!(verify(&tree, &result), "{file}");
        }
    }

    /// The oracle's verdict on a discretized model must match what the
    /// drift-continuity analysis concludes on the corresponding
    /// continuous-path model: feasible exactly when no cell charges
    /// drift against a vanishing bracket.
    #[test]
    fn discretized_verdicts_match_the_path_analyzer() {
        use crate::models::{simulate, GridSpec, ModelConfig};
        use crate::path::SimMode;

        let path_for = |name: &str, seed: u64| {
            let model = serde_json::from_value(serde_json::json!({ "name": name })).unwrap();
            let cfg = ModelConfig {
                model,
                grid: GridSpec {
                    horizon: 1.0,
                    n_steps: 48,
                },
                mode: SimMode::Analytic,
            };
            simulate(&cfg, seed).unwrap()
        };

        let survival = path_for("survival_claim", 2);
        let report = analyze(&survival, default_tol(&survival)).unwrap();
        assert!(report.a2_absolutely_continuous.holds());
        let tree = discretize_model(TreeModel::SurvivalClaim, 4, 2).unwrap();
        assert!(solve(&tree).unwrap().feasible);

        let announced = path_for("predictable_default", 1);
        let report = analyze(&announced, default_tol(&announced)).unwrap();
        assert!(!report.a2_absolutely_continuous.holds());
        let tree = discretize_model(TreeModel::PredictableDefaultVariant, 4, 2).unwrap();
        assert!(!solve(&tree).unwrap().feasible);

        let defaulted = (0..40)
            .map(|seed| path_for("two_defaults", seed))
            .find(|p| p.meta.events.iter().any(|e| e.label == "default_y"))
            .expect("no second-price default in the scanned seeds");
        let report = analyze(&defaulted, default_tol(&defaulted)).unwrap();
        assert!(!report.a2_absolutely_continuous.holds());
        let tree = discretize_model(TreeModel::TwoDefaults, 3, 3).unwrap();
        assert!(!solve(&tree).unwrap().feasible);
    }
}
