//! Sample-average planning under rank-list (utility-maximizing) choice.
//!
//! Scenarios fix each customer's utilities and the planner's rewards; the
//! planner picks which options to offer and every scenario picks its most
//! preferred offered option. The solver is a two-stage Benders
//! branch-and-bound with closed-form cuts.

pub mod apps;
pub mod benders;
pub mod engine;
pub mod io;
pub mod error;
pub mod model;
pub mod sampling;
pub mod simplex;
pub mod stats;

pub use engine::{solve, Method, Solution, SolveConfig, SolveRecord, SolveStats, SolveStatus};
pub use error::{Error, Result};
pub use model::{
    choose, cooperative_fraction, enumerate_feasible, enumerate_optimal, sample_objective, AppTag,
    BinaryDecision, DecisionSpace, Instance, LinearRow, Provenance, ScenarioSet,
};
pub use stats::{estimate_gap, replicate_solve, z_score, GapReport, Replication};
pub use sampling::{Distribution, SampleMatrix, Scheme};
