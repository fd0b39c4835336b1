//! Point-based POMDP planning with heuristic search value iteration.
//!
//! The crate is organised bottom-up: [`model`] holds the sparse problem
//! representation and belief dynamics, [`ingest`] loads or generates
//! problems, [`bounds`] maintains the value-function bounds, [`solver`]
//! runs the search, [`sim`] evaluates policies, and [`theory`] checks the
//! convergence bounds numerically on small instances.

pub mod bounds;
pub mod ingest;
pub mod model;
pub mod sim;
pub mod solver;
pub mod theory;
