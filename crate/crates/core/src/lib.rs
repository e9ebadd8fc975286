//! Verification engine for feed-forward networks built from linear, ReLU and
//! MaxPool nodes.
//!
//! Given a network and a conjunction of linear constraints over its node
//! values, the engine decides whether some input drives the network into a
//! valuation satisfying every constraint. The search combines a CDCL solver
//! over node phases with a linear relaxation of the whole network:
//!
//! 1. interval arithmetic seeds per-node bounds ([`relaxation::compute_initial_bounds`]),
//! 2. LP optimisation tightens them ([`relaxation::refine_bounds`]),
//! 3. the SAT core ([`sat::Solver`]) picks phases, while interval propagation
//!    ([`inference`]) and LP feasibility checks ([`fixture`]) feed it implied
//!    phases, conflict clauses and learned clauses.
//!
//! The crate is `no_std` and only needs `alloc`. Parsing, file formats and the
//! command line live in the `nnverify` companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod fixture;
pub mod inference;
pub mod lp;
pub mod network;
pub mod oracle;
pub mod relaxation;
pub mod sat;
pub mod verifier;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use network::{
    LinearConstraint, Network, NetworkBuilder, NodeId, NodeKind, Relation, Valuation, VerificationProblem,
};
pub use oracle::{brute_force_oracle, OracleResult};
pub use relaxation::{Phase, PhaseFixture};
pub use verifier::{verify, verify_with_clock, Clock, Config, NoClock, Stats, Status, VerificationResult};

/// Comparison margin used wherever two node values are compared, and the
/// default witness tolerance.
pub const SAFETY_MARGIN: f64 = 1e-4;
