use thiserror::Error;

use crate::model::ObjectId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("object `{0}` appears more than once in a component")]
    DuplicateObject(ObjectId),
    #[error("component weight must be finite and nonnegative, got {0}")]
    InvalidWeight(f64),
    #[error("piece {piece}: window [{start}, {end}) is empty or inverted")]
    InvertedWindow { piece: usize, start: f64, end: f64 },
    #[error("piece {piece}: rate {rate} is negative or not finite")]
    NegativeRate { piece: usize, rate: f64 },
    #[error("piece {0} overlaps the previous piece")]
    OverlappingPieces(usize),
    #[error("component index {0} is not part of the scenario")]
    UnknownComponent(usize),
    #[error("component index {0} given twice")]
    DuplicateComponent(usize),
}

/// Failures of the dynamics and reduction engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("step would drive component `{component}` to weight {weight} at t = {time}")]
    NegativeWeight {
        component: String,
        weight: f64,
        time: f64,
    },
    #[error("step [{from}, {to}] crosses the activation of edge `{edge}` at {at}")]
    StepCrossesActivation {
        edge: String,
        from: f64,
        to: f64,
        at: f64,
    },
    #[error("step length must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("total square modulus is zero")]
    DegenerateSystem,
    #[error("collapse target `{0}` does not exist")]
    MissingComponent(String),
    #[error("collapse target `{0}` holds no ready state")]
    NotReady(String),
    #[error("scenario is recurrent; a finite horizon is required")]
    HorizonRequired,
}

/// Errors raised while building or validating a scenario.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("unknown built-in scenario `{0}`")]
    UnknownBuiltin(String),
}

impl ScenarioError {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Semantic(#[from] ScenarioError),
    #[error("could not serialize scenario: {0}")]
    Export(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("scenario is recurrent; a finite horizon is required")]
    HorizonRequired,
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("component `{component}` would reach weight {weight} at t = {time}")]
    NegativeWeight {
        component: String,
        weight: f64,
        time: f64,
    },
    #[error("event tree exceeded {0} nodes")]
    TreeTooLarge(usize),
}

/// A trajectory that could not be completed.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("trajectory {index} (seed {seed:#018x}): {source}")]
pub struct TrajectoryError {
    pub index: u64,
    pub seed: u64,
    #[source]
    pub source: EngineError,
}
