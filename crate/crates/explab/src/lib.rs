//! Numerical evaluation of error exponents for discrete memoryless channels
//! under generalized likelihood decoding, together with an exact
//! small-blocklength random-code ensemble simulator.
//!
//! The crate is organized in five layers:
//!
//! - [`info`] — alphabets, probability distributions, empirical types, and
//!   the information functionals (entropy, mutual information, weighted
//!   divergence) everything else is built on. All quantities are in nats.
//! - [`metrics`] — decoding metrics `g(Q_XY)` (likelihood, mismatched,
//!   maximum mutual information, linear, and the deterministic ML limit) and
//!   the stochastic decoder posterior they induce.
//! - [`opt`] — deterministic constrained optimization over probability
//!   simplices and transportation polytopes, realized as exact rational
//!   grids with nested refinement and marginal-preserving local descent.
//! - [`exponents`] — the single-letter exponent formulas: typical-random-code,
//!   random-coding, expurgated, ML-limit, list-decoding, and erasure/list
//!   undetected-error exponents.
//! - [`sim`] — exact (fully enumerated over the output space) error
//!   probabilities of sampled fixed-composition codebooks, quenched and
//!   annealed ensemble averages, and pair-type enumerator statistics.
//!
//! [`verify`] bundles the cross-checking suites used both by the CLI and by
//! the acceptance tests.

pub mod exponents;
pub mod info;
pub mod metrics;
pub mod opt;
pub mod sim;
pub mod verify;
