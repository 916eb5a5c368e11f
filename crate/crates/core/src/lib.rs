//! Kuhn poker and Leduc Hold'em lab: exact engines, toy opponents, equilibrium
//! solvers, best-response oracles and a cross-hand transformer agent trained
//! with PPO against a league.

pub mod cli;
pub mod engine;
pub mod error;
pub mod evalharness;
pub mod histenc;
pub mod net;
pub mod oracle;
pub mod play;
pub mod policy;
pub mod solver;
pub mod toys;
pub mod trainer;

pub use error::{Error, Result};
