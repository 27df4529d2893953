//! Wavefunction-component data model.
//!
//! A system is a set of decoherent components, each a product of per-object
//! subsystem states carrying a ready/realized tag and a nonnegative square
//! modulus. Probability currents between components are described by
//! [`CurrentEdge`]s with piecewise-constant rate profiles.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Label of a physical object ("detector", "observer", ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(String);

impl ObjectId {
    pub fn new(label: impl Into<String>) -> Self {
        Self(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ObjectId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Ready,
    Realized,
}

/// One object's state inside a component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemState {
    pub object: ObjectId,
    pub label: String,
    pub status: Status,
}

impl SubsystemState {
    pub fn new(object: impl Into<ObjectId>, label: impl Into<String>, status: Status) -> Self {
        Self {
            object: object.into(),
            label: label.into(),
            status,
        }
    }

    pub fn ready(object: impl Into<ObjectId>, label: impl Into<String>) -> Self {
        Self::new(object, label, Status::Ready)
    }

    pub fn realized(object: impl Into<ObjectId>, label: impl Into<String>) -> Self {
        Self::new(object, label, Status::Realized)
    }

    pub fn is_ready(&self) -> bool {
        self.status == Status::Ready
    }
}

impl fmt::Display for SubsystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.status {
            Status::Ready => write!(f, "_{}_", self.label),
            Status::Realized => f.write_str(&self.label),
        }
    }
}

/// Index of a component template within a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComponentId(pub(crate) u32);

impl ComponentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(index: usize) -> Self {
        Self(index as u32)
    }
}

/// Index of a current edge within a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub(crate) u32);

impl EdgeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(index: usize) -> Self {
        Self(index as u32)
    }
}

/// Sorts states by object and rejects duplicate objects.
pub(crate) fn normalize_states(
    mut states: Vec<SubsystemState>,
) -> Result<Vec<SubsystemState>, ModelError> {
    states.sort_by(|a, b| a.object.cmp(&b.object));
    for pair in states.windows(2) {
        if pair[0].object == pair[1].object {
            return Err(ModelError::DuplicateObject(pair[0].object.clone()));
        }
    }
    Ok(states)
}

/// A decoherent branch of the system wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub(crate) id: ComponentId,
    pub(crate) states: Vec<SubsystemState>,
    pub(crate) weight: f64,
    pub(crate) created_at: f64,
}

impl Component {
    pub fn new(
        id: ComponentId,
        states: Vec<SubsystemState>,
        weight: f64,
        created_at: f64,
    ) -> Result<Self, ModelError> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(ModelError::InvalidWeight(weight));
        }
        Ok(Self {
            id,
            states: normalize_states(states)?,
            weight,
            created_at,
        })
    }

    pub fn id(&self) -> ComponentId {
        self.id
    }

    /// States sorted by object.
    pub fn states(&self) -> &[SubsystemState] {
        &self.states
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn created_at(&self) -> f64 {
        self.created_at
    }

    pub fn state(&self, object: &ObjectId) -> Option<&SubsystemState> {
        self.states
            .binary_search_by(|s| s.object.cmp(object))
            .ok()
            .map(|i| &self.states[i])
    }

    pub fn contains_ready(&self, object: &ObjectId) -> bool {
        self.state(object).is_some_and(SubsystemState::is_ready)
    }

    /// True if any state in the component is ready.
    pub fn has_ready(&self) -> bool {
        self.states.iter().any(SubsystemState::is_ready)
    }

    pub(crate) fn realize(&mut self) {
        for s in &mut self.states {
            s.status = Status::Realized;
        }
    }
}

/// True iff `c` holds a ready state of object `o`.
pub fn contains_ready(c: &Component, o: &ObjectId) -> bool {
    c.contains_ready(o)
}

/// Blueprint of a component: its states and, for components present at the
/// start, the initial weight.
///
/// For an interaction-created component the `status` of a state copied
/// unchanged from the source component is taken from the template; every
/// other state is created ready.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTemplate {
    pub name: String,
    pub states: Vec<SubsystemState>,
    pub initial_weight: Option<f64>,
}

impl ComponentTemplate {
    /// States of the component when created by an edge from `source`.
    pub fn instantiate_from(
        &self,
        source: &[SubsystemState],
        creates_ready: bool,
    ) -> Vec<SubsystemState> {
        self.states
            .iter()
            .map(|st| {
                let copied = source
                    .iter()
                    .any(|s| s.object == st.object && s.label == st.label);
                let status = if !creates_ready || copied {
                    st.status
                } else {
                    Status::Ready
                };
                SubsystemState::new(st.object.clone(), st.label.clone(), status)
            })
            .collect()
    }
}

/// One constant piece of a rate profile, over `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePiece {
    pub start: f64,
    pub end: f64,
    pub rate: f64,
}

/// Piecewise-constant nonnegative rate, zero outside its window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateProfile {
    pieces: Vec<RatePiece>,
}

impl RateProfile {
    pub fn new(mut pieces: Vec<RatePiece>) -> Result<Self, ModelError> {
        pieces.sort_by(|a, b| a.start.total_cmp(&b.start));
        for (i, p) in pieces.iter().enumerate() {
            if !(p.start.is_finite() && p.end.is_finite()) || p.start >= p.end {
                return Err(ModelError::InvertedWindow {
                    piece: i,
                    start: p.start,
                    end: p.end,
                });
            }
            if !(p.rate.is_finite() && p.rate >= 0.0) {
                return Err(ModelError::NegativeRate {
                    piece: i,
                    rate: p.rate,
                });
            }
        }
        for (i, pair) in pieces.windows(2).enumerate() {
            if pair[1].start < pair[0].end {
                return Err(ModelError::OverlappingPieces(i + 1));
            }
        }
        Ok(Self { pieces })
    }

    /// Constant rate over `[start, end)` carrying `total` in all.
    pub fn constant_total(start: f64, end: f64, total: f64) -> Result<Self, ModelError> {
        Self::new(vec![RatePiece {
            start,
            end,
            rate: total / (end - start),
        }])
    }

    pub fn pieces(&self) -> &[RatePiece] {
        &self.pieces
    }

    pub fn window(&self) -> Option<(f64, f64)> {
        Some((self.pieces.first()?.start, self.pieces.last()?.end))
    }

    /// Rate at local time `t` (half-open pieces).
    pub fn rate_at(&self, t: f64) -> f64 {
        self.pieces
            .iter()
            .find(|p| p.start <= t && t < p.end)
            .map_or(0.0, |p| p.rate)
    }

    pub fn total(&self) -> f64 {
        self.pieces.iter().map(|p| p.rate * (p.end - p.start)).sum()
    }

    /// Integral of the rate over local `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.pieces
            .iter()
            .map(|p| {
                let lo = p.start.max(a);
                let hi = p.end.min(b);
                if hi > lo {
                    p.rate * (hi - lo)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Local piece boundaries, ascending.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces.iter().flat_map(|p| [p.start, p.end])
    }
}

/// Time origin of an edge's rate profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anchor {
    /// Profile times are absolute simulation times.
    Absolute,
    /// Profile times are relative to the moment the source component was
    /// created or last realized by a collapse.
    Source,
}

/// What a profile rate is a fraction of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateBasis {
    /// Mass per unit time per unit of total modulus `s`.
    System,
    /// Fraction of the source weight at the moment the edge switched on.
    SourceWeight,
}

/// Directed probability-current channel between two components.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentEdge {
    pub name: String,
    pub source: ComponentId,
    pub target: ComponentId,
    pub profile: RateProfile,
    pub anchor: Anchor,
    pub basis: RateBasis,
    pub creates_ready: bool,
}

impl CurrentEdge {
    /// Absolute-time offset of the profile given when the source was armed.
    pub fn offset(&self, source_armed_at: f64) -> f64 {
        match self.anchor {
            Anchor::Absolute => 0.0,
            Anchor::Source => source_armed_at,
        }
    }
}

/// Static structure shared by every trajectory of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioGraph {
    pub(crate) objects: Vec<ObjectId>,
    pub(crate) templates: Vec<ComponentTemplate>,
    pub(crate) edges: Vec<CurrentEdge>,
    /// When false, transition blocking between ready components is switched
    /// off (diagnostic use only).
    pub(crate) blocking: bool,
}

impl ScenarioGraph {
    pub fn objects(&self) -> &[ObjectId] {
        &self.objects
    }

    pub fn templates(&self) -> &[ComponentTemplate] {
        &self.templates
    }

    pub fn template(&self, id: ComponentId) -> &ComponentTemplate {
        &self.templates[id.index()]
    }

    pub fn edges(&self) -> &[CurrentEdge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &CurrentEdge {
        &self.edges[id.index()]
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edges.len()).map(EdgeId::from_index)
    }

    pub fn blocking(&self) -> bool {
        self.blocking
    }

    pub fn component_id(&self, name: &str) -> Option<ComponentId> {
        self.templates
            .iter()
            .position(|t| t.name == name)
            .map(ComponentId::from_index)
    }

    pub fn edge_id(&self, name: &str) -> Option<EdgeId> {
        self.edges
            .iter()
            .position(|e| e.name == name)
            .map(EdgeId::from_index)
    }

    pub fn component_name(&self, id: ComponentId) -> &str {
        &self.templates[id.index()].name
    }

    pub fn edge_name(&self, id: EdgeId) -> &str {
        &self.edges[id.index()].name
    }
}

/// Lifecycle of an edge relative to the current arming of its source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgePhase {
    Pending,
    Active,
    Blocked,
    Done,
}

/// Full dynamical state of one trajectory.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub(crate) graph: Arc<ScenarioGraph>,
    pub(crate) slots: Vec<Option<Component>>,
    pub(crate) armed_at: Vec<f64>,
    pub(crate) phases: Vec<EdgePhase>,
    pub(crate) scales: Vec<f64>,
    pub(crate) time: f64,
    pub(crate) s: f64,
}

impl SystemState {
    /// State holding the graph's initial components at time `t0`.
    pub fn initial(graph: Arc<ScenarioGraph>, t0: f64) -> Result<Self, ModelError> {
        let comps = graph
            .templates
            .iter()
            .enumerate()
            .filter_map(|(i, t)| {
                t.initial_weight
                    .map(|w| Component::new(ComponentId::from_index(i), t.states.clone(), w, t0))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_components(graph, comps, t0)
    }

    /// State with an explicit component set; all edges start pending.
    pub fn from_components(
        graph: Arc<ScenarioGraph>,
        components: Vec<Component>,
        time: f64,
    ) -> Result<Self, ModelError> {
        let mut slots = vec![None; graph.templates.len()];
        let mut armed_at = vec![time; graph.templates.len()];
        for c in components {
            let slot = slots
                .get_mut(c.id.index())
                .ok_or(ModelError::UnknownComponent(c.id.index()))?;
            if slot.is_some() {
                return Err(ModelError::DuplicateComponent(c.id.index()));
            }
            armed_at[c.id.index()] = c.created_at;
            *slot = Some(c);
        }
        let n_edges = graph.edges.len();
        let mut state = Self {
            graph,
            slots,
            armed_at,
            phases: vec![EdgePhase::Pending; n_edges],
            scales: vec![0.0; n_edges],
            time,
            s: 0.0,
        };
        state.s = state.total_modulus();
        Ok(state)
    }

    pub fn graph(&self) -> &Arc<ScenarioGraph> {
        &self.graph
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Maintained total square modulus.
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn component(&self, id: ComponentId) -> Option<&Component> {
        self.slots.get(id.index()).and_then(Option::as_ref)
    }

    pub fn contains(&self, id: ComponentId) -> bool {
        self.component(id).is_some()
    }

    /// Present components in id order.
    pub fn components(&self) -> impl Iterator<Item = &Component> {
        self.slots.iter().flatten()
    }

    pub fn component_count(&self) -> usize {
        self.components().count()
    }

    pub fn phase(&self, edge: EdgeId) -> EdgePhase {
        self.phases[edge.index()]
    }

    /// Time the component was created or last realized.
    pub fn armed_at(&self, id: ComponentId) -> f64 {
        self.armed_at[id.index()]
    }

    /// Sum of component weights, recomputed.
    pub fn total_modulus(&self) -> f64 {
        self.components().map(|c| c.weight).sum()
    }

    /// Weight held by components with no ready state.
    pub fn unreduced_modulus(&self) -> f64 {
        self.components()
            .filter(|c| !c.has_ready())
            .map(|c| c.weight)
            .sum()
    }

    pub fn weights(&self) -> Vec<(ComponentId, f64)> {
        self.components().map(|c| (c.id, c.weight)).collect()
    }

    /// Multiplies every weight and `s` by `factor`.
    pub fn scale_weights(&mut self, factor: f64) {
        for c in self.slots.iter_mut().flatten() {
            c.weight *= factor;
        }
        self.s *= factor;
        for scale in &mut self.scales {
            *scale *= factor;
        }
    }
}

/// Sum of component weights.
pub fn total_modulus(state: &SystemState) -> f64 {
    state.total_modulus()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    ComponentCreated,
    EdgeBlocked,
    StochasticHit,
    Collapse,
    InteractionStart,
    InteractionEnd,
    /// Dense weight sample; only emitted when requested.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub component: Option<ComponentId>,
    pub edge: Option<EdgeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoggedEvent {
    pub event: Event,
    pub weights: Vec<(ComponentId, f64)>,
}

/// Ordered log of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub events: Vec<LoggedEvent>,
    pub outcome: String,
    /// Collapses in order, with their times.
    pub collapses: Vec<(f64, ComponentId)>,
    pub final_components: Vec<Component>,
}

impl TrajectoryRecord {
    pub fn collapse_path(&self) -> Vec<ComponentId> {
        self.collapses.iter().map(|&(_, c)| c).collect()
    }
}
