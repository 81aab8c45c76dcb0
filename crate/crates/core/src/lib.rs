//! Multivariate ranks, signs and signed-ranks from optimal transport, and
//! the distribution-free tests built on them.
//!
//! The pipeline for every test is the same: match the observations to a
//! fixed reference grid by solving an exact assignment problem (under a
//! group-quotient cost for symmetry tests), compute a statistic of the
//! matched grid points, and calibrate it against a null law that depends
//! only on the grid.
//!
//! * [`assignment`] – exact linear assignment solver.
//! * [`group`] – symmetry groups and their orbit geometry.
//! * [`reference`] – reference grids.
//! * [`ranks`] – rank, sign and signed-rank maps.
//! * [`stats`] – test statistics, kernels, score functions.
//! * [`calibration`] – Monte Carlo nulls, p-values, the null cache.
//! * [`harness`] – power studies over simulated scenarios.
//! * [`ingest`] – CSV samples and price-to-return panels.

pub mod assignment;
pub mod calibration;
pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod group;
pub mod harness;
pub mod ingest;
pub mod points;
pub mod procedures;
pub mod ranks;
pub mod reference;
pub mod rng;
pub mod stats;

pub use assignment::{solve_assignment, Assignment, CostMatrix};
pub use error::{Error, Result};
pub use exec::Execution;
pub use group::{GroupElement, GroupKind, SymmetryGroup};
pub use points::{Points, Sample};
pub use ranks::{pooled_rank_map, rank_map, signed_rank_map, RankAssignment};
pub use reference::{Generator, ReferenceGrid};
