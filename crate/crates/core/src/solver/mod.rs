//! Equilibrium construction and exact evaluation.

mod cfr;
mod ev;
mod kuhn;
mod table;
pub mod tree;

pub use cfr::{cfr_solve, rows_to_table, CfrState};
pub use ev::{exact_ev, exact_ev_at, exact_session_ev, exploitability};
pub use kuhn::{kuhn_ne_profile, kuhn_ne_strategy, validate_alpha, KUHN_ALPHA_MAX};
pub use table::PolicyTable;
pub use tree::PublicTree;
