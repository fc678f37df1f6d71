//! Learner-user data obfuscation as a Stackelberg game: utilities, best
//! responses and equilibria, the Gaussian mechanism's privacy guarantee,
//! and an ERM lab for checking the accuracy bounds on synthetic data.

pub mod config;
pub mod dp_mechanism;
pub mod erm_lab;
pub mod error;
pub mod game_model;
pub mod oracle;
pub mod response_solver;
pub mod stats;
pub mod validation;

pub use error::{Error, Result};
pub use game_model::{GameConfig, LearnerParams, StrategyProfile, UserParams};
pub use response_solver::{EquilibriumResult, SolverSettings, Threshold};
