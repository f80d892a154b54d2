//! Core library for simulating and analysing pairs of converging asset
//! prices traded under short-sales constraints.
//!
//! The crate is organised around a single data artifact, the
//! [`path::DecomposedPath`]: a simulated trajectory of two prices `(X, Y)`
//! together with every increment series the downstream analyses need
//! (finite-variation parts, martingale parts, quadratic variations, the
//! hedge ratio linking the two martingales). The modules are:
//!
//! * [`grid`] — time grids and the increment/jump carriers living on them;
//! * [`simkernel`] — seeded stochastic primitives (Gaussian increments,
//!   bridges, hitting-time sampling, stochastic exponentials);
//! * [`measure`] — cellwise calculus of signed measures on a grid
//!   (Lebesgue decomposition, orthogonality, monotone classification);
//! * [`models`] — the model library; each model emits `DecomposedPath`s
//!   with analytically exact increment attribution;
//! * [`structure`] — the structure analyzer: normal-form checks, drift
//!   splits, absolute-continuity and jump-bound conditions;
//! * [`arbitrage`] — arbitrage-set detection, the explicit long-only
//!   portfolio, and its backtest;
//! * [`density`] — the candidate supermartingale deflator and its Monte
//!   Carlo verification;
//! * [`tree`] — an exact-rational LP oracle on finite market trees, used
//!   as ground truth at small scale.

pub mod arbitrage;
pub mod density;
pub mod grid;
pub mod measure;
pub mod models;
pub mod path;
pub mod simkernel;
pub mod structure;
pub mod tree;
