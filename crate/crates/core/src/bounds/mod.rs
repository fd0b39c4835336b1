//! Value-function bounds.
//!
//! The lower bound is a set of masked α-vectors grown by point-based
//! backups. The upper bound is a sawtooth point set grown by Bellman
//! updates. Both start from cheap closed-form relaxations (blind policies
//! below, the MDP and fast informed bound above).

mod alpha;
mod init;
mod policy_file;
mod upper;

pub use alpha::{
    argmax, backup, backup_with_children, lower_q_values, value_floor, AlphaVector, BackupMode,
    LowerBound,
};
pub use init::{
    blind_floor, blind_vectors, init_lower_blind, init_upper_fib, init_upper_mdp, Convergence,
    FibBound, MdpBound, DEFAULT_MAX_ITERS, DEFAULT_RESIDUAL_TOL,
};
pub use policy_file::{read_policy, write_policy, PolicyFileError, PolicyHeader};
pub use upper::{UpperBound, UpperPoint, UPPER_PRUNE_TOL};

use crate::model::Belief;

/// `V̂ = [V̲, V̄]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsPair {
    pub lower: LowerBound,
    pub upper: UpperBound,
}

impl BoundsPair {
    pub fn width(&self, b: &Belief) -> f64 {
        self.upper.value(b) - self.lower.value(b)
    }
}
