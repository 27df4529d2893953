//! TOML scenario documents.
//!
//! A document maps one-to-one onto [`ScenarioSpec`]; see the README for the
//! grammar. Parsing validates the result into a [`Scenario`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::model::{Anchor, RateBasis, RatePiece};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub objects: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default = "yes")]
    pub blocking: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub schedule: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub declared: BTreeMap<String, f64>,
    pub classifier: ClassifierSpec,
    pub components: Vec<ComponentSpec>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_weight: Option<f64>,
    pub states: Vec<StateSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub object: String,
    pub label: String,
    #[serde(default)]
    pub ready: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: String,
    pub source: String,
    pub target: String,
    #[serde(default = "absolute")]
    pub anchor: Anchor,
    #[serde(default = "system")]
    pub basis: RateBasis,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub creates_ready: bool,
    /// Shorthand for a single constant piece carrying `total`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pieces: Vec<RatePiece>,
}

fn absolute() -> Anchor {
    Anchor::Absolute
}

fn system() -> RateBasis {
    RateBasis::System
}

impl EdgeSpec {
    pub fn new(
        id: impl Into<String>,
        source: impl Into<String>,
        target: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            source: source.into(),
            target: target.into(),
            anchor: Anchor::Absolute,
            basis: RateBasis::System,
            creates_ready: true,
            window: None,
            total: None,
            pieces: Vec::new(),
        }
    }

    pub fn piece(mut self, start: f64, end: f64, rate: f64) -> Self {
        self.pieces.push(RatePiece { start, end, rate });
        self
    }

    pub fn carrying(mut self, start: f64, end: f64, total: f64) -> Self {
        self.window = Some([start, end]);
        self.total = Some(total);
        self
    }

    pub fn anchored(mut self, anchor: Anchor) -> Self {
        self.anchor = anchor;
        self
    }

    pub fn basis(mut self, basis: RateBasis) -> Self {
        self.basis = basis;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClassifierSpec {
    /// First matching rule wins; `*` matches any run of collapses and a
    /// trailing `*` inside a token matches component names by prefix.
    Rules { rules: Vec<RuleSpec> },
    /// Label is the collapse path, component names joined by `>`.
    Path,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub label: String,
    pub path: Vec<String>,
}

impl RuleSpec {
    pub fn new(label: &str, path: &[&str]) -> Self {
        Self {
            label: label.to_string(),
            path: path.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_spec(text: &str) -> Result<ScenarioSpec, ConfigError> {
    if text.trim().is_empty() {
        return Err(ConfigError::Syntax {
            line: 1,
            column: 1,
            message: "empty document".into(),
        });
    }
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        ConfigError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })
}

pub fn parse_config(text: &str) -> Result<Scenario, ConfigError> {
    Ok(Scenario::from_spec(parse_spec(text)?)?)
}

pub fn export_config(sc: &Scenario) -> Result<String, ConfigError> {
    toml::to_string(sc.spec()).map_err(|e| ConfigError::Export(e.to_string()))
}
