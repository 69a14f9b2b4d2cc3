//! Strategically robust Wardrop equilibria for aggregative games with
//! affine prices, and the EV-charging experiments built on them.
//!
//! Each player minimises the worst-case expected cost over a Wasserstein
//! ball of aggregates centred at the emergent one. The worst case is
//! computed through its one-dimensional dual ([`robust::robust_cost`]) and
//! equilibria through proximal best responses in the augmented game
//! ([`equilibrium::solve_srwe`]). [`oracle`] holds brute-force checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(a > b)` also rejects NaN

pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod io;
pub mod oracle;
pub mod robust;
pub mod scenarios;
pub mod search;

pub use error::{Error, Result};
