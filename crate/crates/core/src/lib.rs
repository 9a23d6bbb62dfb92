//! Portfolio choice of high- and low-financially-literate households before
//! and after the introduction of an interest-bearing CBDC.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: preferences, returns, income, allocations, expected utility
//!   and its first-order conditions.
//! - [`solver`]: damped Newton maximization with a lattice-search oracle.
//! - [`calibration`]: binomial compounding of annual returns into a
//!   two-point period distribution, rate conversions, income processes,
//!   and liquidity-weight calibration.
//! - [`analysis`]: the liquidity limit, comparative-statics sweeps, and
//!   share sensitivities to the CBDC return.
//! - [`inference`]: pooled panel logit with household-clustered sandwich
//!   covariance, odds transforms, and a one-sided Wald test.
//! - [`cli`]: config parsing, CSV and SVG output, and the command
//!   dispatcher behind the `cbdc` binary.

pub mod analysis;
pub mod calibration;
pub(crate) mod numfmt;
pub mod cli;
pub mod inference;
pub mod model;
pub mod solver;

pub use model::{
    AgentKind, Allocation, Economy, IncomeProcess, ModelError, ModelInstance, Preferences,
    ReturnStructure,
};
pub use solver::{solve, solve_path, Solution, SolveError, SolverConfig};
