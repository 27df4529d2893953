//! Continuity-equation bookkeeping: switching interactions on and off,
//! instantaneous flows, and exact integration of piecewise-constant currents.

use crate::error::EngineError;
use crate::model::{
    Component, ComponentId, EdgeId, EdgePhase, Event, EventKind, RateBasis, SystemState,
};
use crate::reduction::blocked_states;

/// Weights this far below zero (relative to `s`) are rounding and get clamped.
pub(crate) const NEGATIVE_WEIGHT_TOLERANCE: f64 = 1e-12;

/// Instantaneous currents at one time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowSnapshot {
    pub time: f64,
    /// Per edge, indexed by edge id; zero for inactive or blocked edges.
    pub edge_rates: Vec<f64>,
    /// Per component template, indexed by component id.
    pub inflow: Vec<f64>,
    pub outflow: Vec<f64>,
}

impl FlowSnapshot {
    pub fn net(&self, id: ComponentId) -> f64 {
        self.inflow[id.index()] - self.outflow[id.index()]
    }

    /// Net inflow clamped at zero from below.
    pub fn net_positive(&self, id: ComponentId) -> f64 {
        self.net(id).max(0.0)
    }

    pub fn edge_rate(&self, id: EdgeId) -> f64 {
        self.edge_rates[id.index()]
    }
}

/// Absolute window of an edge for the current arming of its source.
pub(crate) fn effective_window(state: &SystemState, edge: EdgeId) -> Option<(f64, f64)> {
    let e = state.graph.edge(edge);
    let (a, b) = e.profile.window()?;
    let off = e.offset(state.armed_at[e.source.index()]);
    Some((a + off, b + off))
}

/// Current carried by an edge at absolute time `t`.
pub(crate) fn edge_rate(state: &SystemState, edge: EdgeId, t: f64) -> f64 {
    if state.phases[edge.index()] != EdgePhase::Active {
        return 0.0;
    }
    let e = state.graph.edge(edge);
    if !(state.contains(e.source) && state.contains(e.target)) {
        return 0.0;
    }
    let off = e.offset(state.armed_at[e.source.index()]);
    e.profile.rate_at(t - off) * state.scales[edge.index()]
}

/// Marks every outgoing edge of `id` pending, as after a fresh arming.
pub(crate) fn rearm(state: &mut SystemState, id: ComponentId, t: f64) {
    state.armed_at[id.index()] = t;
    for (i, e) in state.graph.edges.iter().enumerate() {
        if e.source == id {
            state.phases[i] = EdgePhase::Pending;
            state.scales[i] = 0.0;
        }
    }
}

/// Switches on every interaction whose window is open at `t`, creating
/// target components (weight 0) where the interaction is not blocked, and
/// retires interactions whose window has closed.
pub fn activate_interactions(state: &mut SystemState, t: f64) -> Vec<Event> {
    let mut events = Vec::new();
    activate_interactions_into(state, t, &mut events);
    events
}

pub(crate) fn activate_interactions_into(state: &mut SystemState, t: f64, out: &mut Vec<Event>) {
    state.time = t;
    let graph = state.graph.clone();
    loop {
        let mut created = false;
        for (i, edge) in graph.edges.iter().enumerate() {
            let id = EdgeId::from_index(i);
            let Some(src) = state.slots[edge.source.index()].as_ref() else {
                continue;
            };
            let Some((start, end)) = effective_window(state, id) else {
                state.phases[i] = EdgePhase::Done;
                continue;
            };
            match state.phases[i] {
                EdgePhase::Pending if t >= end => state.phases[i] = EdgePhase::Done,
                EdgePhase::Pending if t >= start => {
                    out.push(Event {
                        time: t,
                        kind: EventKind::InteractionStart,
                        component: Some(edge.source),
                        edge: Some(id),
                    });
                    state.scales[i] = match edge.basis {
                        RateBasis::System => state.s,
                        RateBasis::SourceWeight => src.weight,
                    };
                    let target = state.slots[edge.target.index()].as_ref();
                    let blocked = graph.blocking
                        && match target {
                            Some(tc) => blocked_states(&src.states, &tc.states),
                            None => blocked_states(
                                &src.states,
                                &graph
                                    .template(edge.target)
                                    .instantiate_from(&src.states, edge.creates_ready),
                            ),
                        };
                    if blocked {
                        state.phases[i] = EdgePhase::Blocked;
                        out.push(Event {
                            time: t,
                            kind: EventKind::EdgeBlocked,
                            component: Some(edge.target),
                            edge: Some(id),
                        });
                    } else {
                        state.phases[i] = EdgePhase::Active;
                        if target.is_none() {
                            let states = graph
                                .template(edge.target)
                                .instantiate_from(&src.states, edge.creates_ready);
                            state.slots[edge.target.index()] = Some(Component {
                                id: edge.target,
                                states,
                                weight: 0.0,
                                created_at: t,
                            });
                            rearm(state, edge.target, t);
                            out.push(Event {
                                time: t,
                                kind: EventKind::ComponentCreated,
                                component: Some(edge.target),
                                edge: Some(id),
                            });
                            created = true;
                        }
                    }
                }
                EdgePhase::Active | EdgePhase::Blocked if t >= end => {
                    state.phases[i] = EdgePhase::Done;
                    out.push(Event {
                        time: t,
                        kind: EventKind::InteractionEnd,
                        component: Some(edge.source),
                        edge: Some(id),
                    });
                }
                _ => {}
            }
        }
        if !created {
            break;
        }
    }
}

pub fn compute_flows(state: &SystemState, t: f64) -> FlowSnapshot {
    let mut snap = FlowSnapshot::default();
    compute_flows_into(state, t, &mut snap);
    snap
}

pub(crate) fn compute_flows_into(state: &SystemState, t: f64, snap: &mut FlowSnapshot) {
    let n = state.slots.len();
    snap.time = t;
    snap.edge_rates.clear();
    snap.edge_rates.resize(state.graph.edges.len(), 0.0);
    snap.inflow.clear();
    snap.inflow.resize(n, 0.0);
    snap.outflow.clear();
    snap.outflow.resize(n, 0.0);
    for (i, e) in state.graph.edges.iter().enumerate() {
        let r = edge_rate(state, EdgeId::from_index(i), t);
        if r > 0.0 {
            snap.edge_rates[i] = r;
            snap.inflow[e.target.index()] += r;
            snap.outflow[e.source.index()] += r;
        }
    }
}

/// Earliest time after now at which an interaction switches on or off.
pub(crate) fn next_structural_time(state: &SystemState) -> Option<f64> {
    let t = state.time;
    let mut best: Option<f64> = None;
    for (i, e) in state.graph.edges.iter().enumerate() {
        if !state.contains(e.source) {
            continue;
        }
        let Some((start, end)) = effective_window(state, EdgeId::from_index(i)) else {
            continue;
        };
        let candidate = match state.phases[i] {
            EdgePhase::Pending => start,
            EdgePhase::Active | EdgePhase::Blocked => end,
            EdgePhase::Done => continue,
        };
        if candidate > t {
            best = Some(best.map_or(candidate, |b: f64| b.min(candidate)));
        }
    }
    best
}

/// Next rate-piece boundary of an active edge strictly after `t`.
pub(crate) fn next_piece_boundary(state: &SystemState, t: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (i, e) in state.graph.edges.iter().enumerate() {
        if state.phases[i] != EdgePhase::Active || !state.contains(e.source) {
            continue;
        }
        let off = e.offset(state.armed_at[e.source.index()]);
        if let Some(b) = e.profile.breakpoints().map(|b| b + off).find(|&b| b > t) {
            best = Some(best.map_or(b, |x: f64| x.min(b)));
        }
    }
    best
}

/// Integrates currents over `[t, t + dt]`, splitting at rate-piece
/// boundaries so that every sub-step is exact.
pub fn advance(state: &mut SystemState, dt: f64) -> Result<(), EngineError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(EngineError::InvalidStep(dt));
    }
    advance_to(state, state.time + dt)
}

/// Like [`advance`], landing exactly on `end`.
pub(crate) fn advance_to(state: &mut SystemState, end: f64) -> Result<(), EngineError> {
    let start = state.time;
    if !(end > start && end.is_finite()) {
        return Err(EngineError::InvalidStep(end - start));
    }
    for (i, e) in state.graph.edges.iter().enumerate() {
        if state.phases[i] != EdgePhase::Pending || !state.contains(e.source) {
            continue;
        }
        if let Some((a, _)) = effective_window(state, EdgeId::from_index(i)) {
            if a > start && a < end {
                return Err(EngineError::StepCrossesActivation {
                    edge: e.name.clone(),
                    from: start,
                    to: end,
                    at: a,
                });
            }
        }
    }
    let mut u = start;
    while u < end {
        let v = next_piece_boundary(state, u)
            .filter(|&b| b < end)
            .unwrap_or(end);
        transfer(state, u, v)?;
        u = v;
    }
    state.time = end;
    Ok(())
}

/// Point inside `(u, v)` at which to read rates that are constant there.
/// Reading at `u` itself can land on the wrong side of a source-anchored
/// breakpoint, since `(b + off) - off` need not round back to `b`.
pub(crate) fn segment_probe(u: f64, v: f64) -> f64 {
    if v.is_finite() {
        0.5 * (u + v)
    } else {
        u + 1.0
    }
}

/// Moves mass over `[u, v)`; rates are constant on the open interval.
fn transfer(state: &mut SystemState, u: f64, v: f64) -> Result<(), EngineError> {
    let len = v - u;
    let probe = segment_probe(u, v);
    for i in 0..state.graph.edges.len() {
        let r = edge_rate(state, EdgeId::from_index(i), probe);
        if r > 0.0 {
            let (src, tgt) = {
                let e = &state.graph.edges[i];
                (e.source.index(), e.target.index())
            };
            let mass = r * len;
            if let Some(c) = state.slots[src].as_mut() {
                c.weight -= mass;
            }
            if let Some(c) = state.slots[tgt].as_mut() {
                c.weight += mass;
            }
        }
    }
    let tol = NEGATIVE_WEIGHT_TOLERANCE * state.s.max(1.0);
    for c in state.slots.iter_mut().flatten() {
        if c.weight < 0.0 {
            if c.weight < -tol {
                return Err(EngineError::NegativeWeight {
                    component: state.graph.component_name(c.id).to_string(),
                    weight: c.weight,
                    time: v,
                });
            }
            c.weight = 0.0;
        }
    }
    Ok(())
}
