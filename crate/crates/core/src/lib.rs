//! Risk-sensitive human-machine routing games with a privately known human
//! risk aversion.
//!
//! The model code is generic over [`scalar::Scalar`]; the aliases below fix
//! the common choices.

pub mod baseline_planners;
pub mod belief_filter;
pub mod cli_bench;
pub mod coordinator;
pub mod evaluation;
pub mod game_model;
pub mod risk_measures;
pub mod scalar;

pub use scalar::{Rational, Scalar};

pub type GameSpecF64 = game_model::GameSpec<f64>;
pub type GameSpecF32 = game_model::GameSpec<f32>;
pub type ExactGameSpec = game_model::GameSpec<Rational>;
pub type PolicyF64 = coordinator::CoordinatorPolicy<f64>;
pub type ExactPolicy = coordinator::CoordinatorPolicy<Rational>;
pub type RegretRowF64 = evaluation::RegretRow<f64>;
pub type ExactRegretRow = evaluation::RegretRow<Rational>;
