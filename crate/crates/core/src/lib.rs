//! Exact evolutionary dynamics of a two-group service platform whose
//! recommender guarantees Good-rated (and optionally marginalised
//! Good-rated) slots in every list shown to users.
//!
//! Pipeline: [`recsel`] choice probabilities → [`payoff`] utilities →
//! [`dynamics`] transition matrix and stationary distribution →
//! [`metrics`]. [`sweep`] drives parameter scans and policy optimisation,
//! [`oracle`] is the seeded Monte Carlo check of the first two stages.

// `!(x > 0.0)` style guards are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod metrics;
pub mod numeric;
pub mod oracle;
pub mod payoff;
pub mod recsel;
pub mod sweep;

pub use domain::{
    validate, Group, ModelConfig, PlatformPolicy, ProviderPopulation, Rating, State, Strategy, UserPopulation,
};
pub use error::{Error, Result};
pub use metrics::{MetricsReport, Regime};
pub use sweep::{evaluate, Evaluation};
