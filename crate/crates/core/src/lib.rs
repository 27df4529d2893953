//! Stochastic simulator for ready/realized state reduction.
//!
//! A system is a weighted set of decoherent components. Scenario edges move
//! probability mass between components; the reduction engine picks ready
//! components stochastically at a rate set by their net inflow, collapses
//! onto them, and blocks currents between components that share a ready
//! object. The [`oracle`] computes the resulting outcome laws exactly.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acceptance;
pub mod config;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod oracle;
pub mod reduction;
pub mod scenario;
pub mod stats;

pub use config::{export_config, parse_config, ScenarioSpec};
pub use dynamics::{activate_interactions, advance, compute_flows, FlowSnapshot};
pub use ensemble::{
    run_ensemble, run_ensemble_with, run_trajectory, run_trajectory_with, EnsembleReport,
    TrajectoryObserver,
};
pub use error::{
    ConfigError, EngineError, ModelError, OracleError, ScenarioError, TrajectoryError,
};
pub use model::{
    contains_ready, total_modulus, Component, ComponentId, EdgeId, Event, EventKind, ObjectId,
    Status, SubsystemState, SystemState, TrajectoryRecord,
};
pub use oracle::{hit_time_cdf, outcome_law};
pub use reduction::{blocked, blocked_edges, collapse, hazards, sample_next_hit, HazardState};
pub use scenario::Scenario;
