//! Multi-stakeholder prioritization of quality attributes.
//!
//! The crate is organised around the pipeline a group of stakeholders walks
//! through when they agree on the weights of a utility function:
//!
//! - [`ahp`]: pairwise comparison matrices, principal-eigenvector priorities
//!   and consistency analysis.
//! - [`consensus`]: rankings, Kendall's coefficient of concordance, ranking
//!   conflicts and aggregation of individual priorities.
//! - [`session`]: the negotiation workflow as an event-sourced state machine.
//! - [`utility`]: weighted-sum utility functions over per-attribute preference
//!   functions.
//!
//! Everything here is pure and clock-free; callers supply timestamps.

pub mod ahp;
pub mod canonical;
pub mod consensus;
pub mod ids;
pub mod priority;
pub mod session;
pub mod utility;

pub use ahp::{
    consistency, principal_eigen, random_index, ComparisonMatrix, ConsistencyOptions,
    ConsistencyReport, Judgment, JudgmentLevel, QualityAttribute,
};
pub use ids::{AttributeId, StakeholderId};
pub use priority::PriorityVector;
