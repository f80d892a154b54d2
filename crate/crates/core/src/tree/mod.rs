//! Exact finite-market oracle.
//!
//! At small scale the question the rest of this crate studies by
//! simulation can be decided exactly: on a finite event tree with
//! rational branch probabilities and rational prices for the two assets,
//! "is there an equivalent probability measure under which both quoted
//! prices are supermartingales?" is a linear program. This module builds
//! that program, solves it in exact rational arithmetic, and returns one
//! of two machine-checkable artifacts:
//!
//! * a **measure** — strictly positive atom masses summing to one that
//!   make both prices supermartingales at every node, or
//! * a **certificate** — a long-only, self-financing strategy with zero
//!   initial cost whose terminal value is nonnegative on every outcome
//!   and strictly positive on at least one, read off the dual of the
//!   program.
//!
//! Exactly one of the two always exists, and [`verify`] re-checks either
//! against the tree from scratch, so the oracle can serve as ground
//! truth for the floating-point analyses elsewhere in the crate.
//!
//! The encoding maximizes the minimum atom mass `m` subject to
//! `q_ω ≥ m`, `Σ q_ω ≤ 1`, and the per-node supermartingale
//! inequalities for both assets. The maximum is strictly positive
//! exactly when an equivalent supermartingale measure exists (any such
//! measure bounds its smallest atom away from zero; conversely a
//! feasible point with `m > 0` rescales to one), and because the data
//! are rational the comparison with zero is exact — there is no
//! epsilon-feasibility margin anywhere.

mod discretize;
mod simplex;

pub use discretize::{discretize_model, TreeModel};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exact rational scalar used throughout the tree oracle.
pub type Rational = num_rational::BigRational;

/// Errors from tree validation, serialization, and the oracle itself.
#[derive(Debug, Error)]
pub enum TreeError {
    /// The node list violates a structural invariant.
    #[error("malformed tree: {reason}")]
    Malformed {
        /// What failed, phrased against the offending node(s).
        reason: String,
    },
    /// A discretization request exceeds the exact-arithmetic size guard.
    #[error(
        "tree size guard exceeded: {periods} period(s) at branching {branching} \
         (allowed: 1..=6 periods, branching 2..=3)"
    )]
    SizeGuard {
        /// Requested number of periods.
        periods: usize,
        /// Requested branching factor.
        branching: usize,
    },
    /// A model demands a branching factor the request did not grant.
    #[error("model {model} needs branching {required} (got {got})")]
    BranchingMismatch {
        /// Model name.
        model: &'static str,
        /// Branching the model requires.
        required: usize,
        /// Branching that was requested.
        got: usize,
    },
    /// JSON (de)serialization failed.
    #[error("tree serialization: {0}")]
    Json(#[from] serde_json::Error),
    /// The oracle program had no finite optimum. A validated tree never
    /// produces this; it guards the solver boundary.
    #[error("the oracle program is unbounded on this tree")]
    Unbounded,
}

fn malformed(reason: impl Into<String>) -> TreeError {
    TreeError::Malformed {
        reason: reason.into(),
    }
}

pub(crate) fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Serde adapter storing rationals as `"numerator/denominator"` strings.
pub(crate) mod rat_string {
    use num_bigint::BigInt;
    use num_traits::Zero;
    use serde::{de, Deserialize, Deserializer, Serializer};
    use std::str::FromStr;

    use super::Rational;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(de::Error::custom)
    }

    /// Parses `"a/b"` (or a bare integer `"a"`) into a reduced rational.
    pub fn parse(text: &str) -> Result<Rational, String> {
        let (num, den) = match text.split_once('/') {
            Some((n, d)) => (n, d),
            None => (text, "1"),
        };
        let n = BigInt::from_str(num.trim())
            .map_err(|e| format!("bad numerator in {text:?}: {e}"))?;
        let d = BigInt::from_str(den.trim())
            .map_err(|e| format!("bad denominator in {text:?}: {e}"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in {text:?}"));
        }
        Ok(Rational::new(n, d))
    }
}

/// One node of a finite market tree.
///
/// Nodes are stored in a flat list, ids equal to list positions, parents
/// before children; node 0 is the root. `prob` is the reference
/// probability of the branch *into* this node (1 for the root), and `x`,
/// `y` are the two asset prices quoted at the node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// Node id; must equal the node's position in the list.
    pub id: usize,
    /// Time index: 0 at the root, parent's plus one below.
    pub t: usize,
    /// Parent id (`None` only for the root).
    pub parent: Option<usize>,
    /// Reference probability of the branch leading here; positive, and
    /// sibling probabilities sum to one.
    #[serde(with = "rat_string")]
    pub prob: Rational,
    /// First asset's price at this node (nonnegative).
    #[serde(rename = "X", with = "rat_string")]
    pub x: Rational,
    /// Second asset's price at this node (nonnegative).
    #[serde(rename = "Y", with = "rat_string")]
    pub y: Rational,
}

/// A finite two-asset market: an event tree with rational data.
///
/// Terminal nodes are the atoms of the outcome space; every atom sits at
/// the same final period, and each intermediate node's children carry
/// sibling probabilities summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketTree {
    /// Flat node list in id order.
    pub nodes: Vec<TreeNode>,
}

/// Derived structure of a validated tree.
#[derive(Debug, Clone)]
pub struct TreeShape {
    /// Children ids per node (empty for terminal nodes).
    pub children: Vec<Vec<usize>>,
    /// Terminal node ids in increasing order — the outcome atoms.
    pub leaves: Vec<usize>,
    /// Number of periods (every leaf's time index).
    pub depth: usize,
}

impl MarketTree {
    /// Checks every structural invariant and returns the derived shape.
    ///
    /// Rejected: id/position mismatches, a non-root without parent or a
    /// parent after its child, time indices not increasing by one,
    /// nonpositive branch probabilities, sibling probabilities not
    /// summing to one exactly, negative prices, and leaves at unequal
    /// depths.
    pub fn validate(&self) -> Result<TreeShape, TreeError> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(malformed("tree has no nodes"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return Err(malformed(format!(
                    "node at position {i} carries id {}; ids must be 0..n in order",
                    node.id
                )));
            }
            if node.x.is_negative() || node.y.is_negative() {
                return Err(malformed(format!("node {i} quotes a negative price")));
            }
        }
        let root = &self.nodes[0];
        if root.parent.is_some() {
            return Err(malformed("node 0 must be the root and have no parent"));
        }
        if root.t != 0 {
            return Err(malformed("the root's time index must be 0"));
        }
        if root.prob != Rational::one() {
            return Err(malformed("the root's probability must be exactly 1"));
        }
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for node in &self.nodes[1..] {
            let Some(p) = node.parent else {
                return Err(malformed(format!(
                    "node {} has no parent; only node 0 is the root",
                    node.id
                )));
            };
            if p >= node.id {
                return Err(malformed(format!(
                    "node {} must be listed after its parent {p}",
                    node.id
                )));
            }
            if node.t != self.nodes[p].t + 1 {
                return Err(malformed(format!(
                    "node {} has time index {}, expected its parent's plus one ({})",
                    node.id,
                    node.t,
                    self.nodes[p].t + 1
                )));
            }
            if !node.prob.is_positive() {
                return Err(malformed(format!(
                    "branch probability into node {} must be positive",
                    node.id
                )));
            }
            children[p].push(node.id);
        }
        for (i, kids) in children.iter().enumerate() {
            if kids.is_empty() {
                continue;
            }
            let total: Rational = kids.iter().map(|&c| self.nodes[c].prob.clone()).sum();
            if total != Rational::one() {
                return Err(malformed(format!(
                    "sibling probabilities under node {i} sum to {total}, not 1"
                )));
            }
        }
        let depth = self.nodes.iter().map(|nd| nd.t).max().unwrap_or(0);
        let leaves: Vec<usize> = (0..n).filter(|&i| children[i].is_empty()).collect();
        for &leaf in &leaves {
            if self.nodes[leaf].t != depth {
                return Err(malformed(format!(
                    "leaf {leaf} resolves at period {}, but the horizon is period {depth}; \
                     every outcome must resolve at the same final period",
                    self.nodes[leaf].t
                )));
            }
        }
        Ok(TreeShape {
            children,
            leaves,
            depth,
        })
    }

    /// Serializes the tree to pretty-printed JSON with rationals as
    /// `"num/den"` strings.
    pub fn to_json(&self) -> Result<String, TreeError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a tree from JSON. Structural invariants are *not* checked
    /// here; call [`MarketTree::validate`] (or [`solve`], which does).
    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Incremental builder for canonical node lists.
pub(crate) struct TreeBuilder {
    nodes: Vec<TreeNode>,
}

impl TreeBuilder {
    pub fn new(x0: Rational, y0: Rational) -> Self {
        TreeBuilder {
            nodes: vec![TreeNode {
                id: 0,
                t: 0,
                parent: None,
                prob: Rational::one(),
                x: x0,
                y: y0,
            }],
        }
    }

    pub fn child(&mut self, parent: usize, prob: Rational, x: Rational, y: Rational) -> usize {
        let id = self.nodes.len();
        let t = self.nodes[parent].t + 1;
        self.nodes.push(TreeNode {
            id,
            t,
            parent: Some(parent),
            prob,
            x,
            y,
        });
        id
    }

    pub fn finish(self) -> MarketTree {
        MarketTree { nodes: self.nodes }
    }
}

/// Mass assigned to one outcome atom (a terminal node).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomMass {
    /// Terminal node id.
    pub node: usize,
    /// Strictly positive rational mass.
    #[serde(with = "rat_string")]
    pub mass: Rational,
}

/// Holdings over the period following one non-terminal node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Position {
    /// The non-terminal node where the position is taken.
    pub node: usize,
    /// Units of the first asset held to the node's children (≥ 0).
    #[serde(with = "rat_string")]
    pub pi_x: Rational,
    /// Units of the second asset held to the node's children (≥ 0).
    #[serde(with = "rat_string")]
    pub pi_y: Rational,
    /// Cash balance making the strategy self-financing at this node.
    #[serde(with = "rat_string")]
    pub cash: Rational,
}

/// A long-only, self-financing strategy with zero initial cost whose
/// terminal value is nonnegative on every atom and positive on at least
/// one — exact evidence that no equivalent supermartingale measure
/// exists on the tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// One position per non-terminal node, in increasing node order.
    pub positions: Vec<Position>,
}

/// Outcome of [`solve`]: the verdict plus exactly one witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Whether an equivalent supermartingale measure exists.
    pub feasible: bool,
    /// The program's exact optimum: the largest attainable minimum atom
    /// mass. Positive exactly when `feasible`.
    #[serde(with = "rat_string")]
    pub optimum: Rational,
    /// The witnessing measure (present iff `feasible`).
    pub measure: Option<Vec<AtomMass>>,
    /// The witnessing strategy (present iff not `feasible`).
    pub certificate: Option<Certificate>,
}

impl OracleResult {
    /// Serializes the result to pretty-printed JSON with rationals as
    /// `"num/den"` strings.
    pub fn to_json(&self) -> Result<String, TreeError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a result from JSON.
    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Decides whether the tree admits an equivalent supermartingale measure
/// and returns the witnessing measure or, failing that, the dual
/// strategy certificate.
///
/// The linear program maximizes the minimum atom mass `m` over
/// `{q ≥ 0 : q_ω ≥ m, Σ q_ω ≤ 1, E_q[ΔZ | n] ≤ 0 for each non-terminal
/// node n and asset Z}` in exact rational arithmetic. A positive optimum
/// rescales to a measure; at optimum zero the dual multipliers of the
/// supermartingale rows are the asset holdings of a long-only arbitrage,
/// with cash filled in by the self-financing condition.
pub fn solve(tree: &MarketTree) -> Result<OracleResult, TreeError> {
    let shape = tree.validate()?;
    let leaves = &shape.leaves;
    let nl = leaves.len();
    let nonterminal: Vec<usize> = (0..tree.nodes.len())
        .filter(|&i| !shape.children[i].is_empty())
        .collect();
    let mut nonterm_index = vec![usize::MAX; tree.nodes.len()];
    for (k, &nid) in nonterminal.iter().enumerate() {
        nonterm_index[nid] = k;
    }

    // Variables: [m, q_0 .. q_{nl-1}] in leaf order.
    let n_vars = 1 + nl;
    let mut rows: Vec<Vec<Rational>> = Vec::new();
    let mut rhs: Vec<Rational> = Vec::new();
    for col in 0..nl {
        let mut row = vec![Rational::zero(); n_vars];
        row[0] = Rational::one();
        row[1 + col] = -Rational::one();
        rows.push(row);
        rhs.push(Rational::zero());
    }
    let mut sum_row = vec![Rational::zero(); n_vars];
    for col in 0..nl {
        sum_row[1 + col] = Rational::one();
    }
    rows.push(sum_row);
    rhs.push(Rational::one());
    let base = rows.len();
    for _ in 0..2 * nonterminal.len() {
        rows.push(vec![Rational::zero(); n_vars]);
        rhs.push(Rational::zero());
    }
    // Row (n, Z): Σ_ω q_ω (Z at n's child toward ω − Z at n) ≤ 0.
    // Walking each leaf up to the root visits exactly the (ancestor,
    // child-toward-leaf) pairs the rows need.
    for (col, &leaf) in leaves.iter().enumerate() {
        let mut node = leaf;
        while let Some(parent) = tree.nodes[node].parent {
            let k = nonterm_index[parent];
            rows[base + 2 * k][1 + col] = &tree.nodes[node].x - &tree.nodes[parent].x;
            rows[base + 2 * k + 1][1 + col] = &tree.nodes[node].y - &tree.nodes[parent].y;
            node = parent;
        }
    }
    let mut objective = vec![Rational::zero(); n_vars];
    objective[0] = Rational::one();

    let sol = simplex::simplex_max(&objective, &rows, &rhs).ok_or(TreeError::Unbounded)?;
    let optimum = sol.value;
    debug_assert!(!optimum.is_negative(), "the origin is always feasible");

    if optimum.is_positive() {
        // Any optimal point has Σ q = 1 (otherwise rescaling would beat
        // it); the division is a defensive no-op.
        let total: Rational = sol.x[1..].iter().cloned().sum();
        debug_assert!(total == Rational::one());
        let measure = leaves
            .iter()
            .zip(&sol.x[1..])
            .map(|(&node, q)| AtomMass {
                node,
                mass: q / &total,
            })
            .collect();
        Ok(OracleResult {
            feasible: true,
            optimum,
            measure: Some(measure),
            certificate: None,
        })
    } else {
        let mut positions = Vec::with_capacity(nonterminal.len());
        let mut value_at = vec![Rational::zero(); tree.nodes.len()];
        for (k, &nid) in nonterminal.iter().enumerate() {
            let pi_x = sol.duals[base + 2 * k].clone();
            let pi_y = sol.duals[base + 2 * k + 1].clone();
            debug_assert!(!pi_x.is_negative() && !pi_y.is_negative());
            let here = &tree.nodes[nid];
            let cash = &value_at[nid] - &(&pi_x * &here.x + &pi_y * &here.y);
            for &c in &shape.children[nid] {
                let child = &tree.nodes[c];
                value_at[c] = &pi_x * &child.x + &pi_y * &child.y + &cash;
            }
            positions.push(Position {
                node: nid,
                pi_x,
                pi_y,
                cash,
            });
        }
        Ok(OracleResult {
            feasible: false,
            optimum,
            measure: None,
            certificate: Some(Certificate { positions }),
        })
    }
}

/// Marked-to-market value of the certificate's strategy at every node.
///
/// Index 0 holds the initial cost (holdings plus cash at the root); each
/// other entry is the value the parent's position rolls into that node.
/// Fails if the positions don't cover exactly the non-terminal nodes.
pub fn certificate_values(
    tree: &MarketTree,
    certificate: &Certificate,
) -> Result<Vec<Rational>, TreeError> {
    let shape = tree.validate()?;
    let n = tree.nodes.len();
    let mut pos_of: Vec<Option<usize>> = vec![None; n];
    for (k, p) in certificate.positions.iter().enumerate() {
        if p.node >= n {
            return Err(malformed(format!(
                "certificate position {k} targets unknown node {}",
                p.node
            )));
        }
        if pos_of[p.node].replace(k).is_some() {
            return Err(malformed(format!(
                "certificate holds node {} more than once",
                p.node
            )));
        }
    }
    for (i, kids) in shape.children.iter().enumerate() {
        if kids.is_empty() && pos_of[i].is_some() {
            return Err(malformed(format!(
                "certificate takes a position at terminal node {i}"
            )));
        }
        if !kids.is_empty() && pos_of[i].is_none() {
            return Err(malformed(format!(
                "certificate misses non-terminal node {i}"
            )));
        }
    }
    let mut value = vec![Rational::zero(); n];
    for (i, kids) in shape.children.iter().enumerate() {
        let Some(k) = pos_of[i] else { continue };
        let p = &certificate.positions[k];
        if i == 0 {
            let root = &tree.nodes[0];
            value[0] = &p.pi_x * &root.x + &p.pi_y * &root.y + &p.cash;
        }
        for &c in kids {
            let child = &tree.nodes[c];
            value[c] = &p.pi_x * &child.x + &p.pi_y * &child.y + &p.cash;
        }
    }
    Ok(value)
}

fn verify_measure(tree: &MarketTree, shape: &TreeShape, masses: &[AtomMass]) -> bool {
    let n = tree.nodes.len();
    let mut at: Vec<Option<Rational>> = vec![None; n];
    for am in masses {
        if am.node >= n || at[am.node].replace(am.mass.clone()).is_some() {
            return false;
        }
    }
    for i in 0..n {
        let is_leaf = shape.children[i].is_empty();
        match &at[i] {
            Some(mass) if is_leaf => {
                if !mass.is_positive() {
                    return false;
                }
            }
            None if !is_leaf => {}
            _ => return false,
        }
    }
    let total: Rational = shape
        .leaves
        .iter()
        .map(|&l| at[l].clone().expect("leaf coverage checked above"))
        .sum();
    if total != Rational::one() {
        return false;
    }
    // Subtree masses, children before parents.
    let mut node_mass = vec![Rational::zero(); n];
    for &l in &shape.leaves {
        node_mass[l] = at[l].clone().expect("leaf coverage checked above");
    }
    for i in (1..n).rev() {
        let p = tree.nodes[i].parent.expect("validated: only node 0 lacks a parent");
        let add = node_mass[i].clone();
        node_mass[p] = &node_mass[p] + add;
    }
    for (i, kids) in shape.children.iter().enumerate() {
        if kids.is_empty() {
            continue;
        }
        let here = &tree.nodes[i];
        let mut ex = Rational::zero();
        let mut ey = Rational::zero();
        for &c in kids {
            let child = &tree.nodes[c];
            ex = ex + &node_mass[c] * &child.x;
            ey = ey + &node_mass[c] * &child.y;
        }
        if ex > &node_mass[i] * &here.x || ey > &node_mass[i] * &here.y {
            return false;
        }
    }
    true
}

fn verify_certificate(tree: &MarketTree, shape: &TreeShape, certificate: &Certificate) -> bool {
    for p in &certificate.positions {
        if p.pi_x.is_negative() || p.pi_y.is_negative() {
            return false;
        }
    }
    let Ok(value) = certificate_values(tree, certificate) else {
        return false;
    };
    if !value[0].is_zero() {
        return false;
    }
    // Rebalancing at an interior node must neither inject nor withdraw
    // wealth: the incoming value funds the new position exactly.
    for p in &certificate.positions {
        if p.node == 0 {
            continue;
        }
        let here = &tree.nodes[p.node];
        let cost = &p.pi_x * &here.x + &p.pi_y * &here.y + &p.cash;
        if cost != value[p.node] {
            return false;
        }
    }
    let mut some_gain = false;
    for &leaf in &shape.leaves {
        if value[leaf].is_negative() {
            return false;
        }
        if value[leaf].is_positive() {
            some_gain = true;
        }
    }
    some_gain
}

/// Re-checks a solve result against the tree from scratch, in exact
/// arithmetic. Returns `true` iff everything holds: the verdict flag
/// matches the optimum's sign, exactly one witness is present, and that
/// witness satisfies every defining inequality (measure: full support on
/// the atoms, total mass one, per-node supermartingale property for both
/// assets; certificate: long-only, self-financing, zero initial cost,
/// terminal value nonnegative everywhere and positive somewhere).
pub fn verify(tree: &MarketTree, result: &OracleResult) -> bool {
    let Ok(shape) = tree.validate() else {
        return false;
    };
    if result.feasible != result.optimum.is_positive() {
        return false;
    }
    match (&result.measure, &result.certificate) {
        (Some(masses), None) if result.feasible => verify_measure(tree, &shape, masses),
        (None, Some(cert)) if !result.feasible => {
            result.optimum.is_zero() && verify_certificate(tree, &shape, cert)
        }
        _ => false,
    }
}

/// Deterministic random market tree for exercising the oracle.
///
/// Depth is drawn from `1..=max_periods` and each node's child count
/// from `1..=max_branching`; sibling probabilities are normalized small
/// integer weights and prices are small nonnegative rationals (zeros
/// included), so both oracle outcomes occur with healthy frequency.
pub fn random_tree(seed: u64, max_periods: usize, max_branching: usize) -> MarketTree {
    use rand::Rng;
    let mut rng = crate::simkernel::rng_for(seed);
    let depth = rng.random_range(1..=max_periods.max(1));
    let x0 = rat(rng.random_range(0..=8), rng.random_range(1..=4));
    let y0 = rat(rng.random_range(0..=8), rng.random_range(1..=4));
    let mut builder = TreeBuilder::new(x0, y0);
    let mut frontier = vec![0usize];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &node in &frontier {
            let kids = rng.random_range(1..=max_branching.max(1));
            let weights: Vec<i64> = (0..kids).map(|_| rng.random_range(1..=6)).collect();
            let total: i64 = weights.iter().sum();
            for w in weights {
                let x = rat(rng.random_range(0..=8), rng.random_range(1..=4));
                let y = rat(rng.random_range(0..=8), rng.random_range(1..=4));
                next.push(builder.child(node, rat(w, total), x, y));
            }
        }
        frontier = next;
    }
    builder.finish()
}
