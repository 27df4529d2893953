//! Stochastic choice, collapse, and transition blocking.
//!
//! The hit hazard of a ready component is its positive net inflow divided by
//! the weight still held by components without ready states. With that
//! denominator the probability of a first hit on a ready sink equals the
//! time integral of the current into it, so scenario transfer totals are
//! outcome probabilities.

use std::collections::BTreeSet;

use rand::RngCore;

use crate::dynamics::{
    activate_interactions_into, advance_to, compute_flows_into, next_piece_boundary,
    next_structural_time, rearm, segment_probe, FlowSnapshot,
};
use crate::error::EngineError;
use crate::model::{
    Component, ComponentId, EdgeId, EdgePhase, Event, EventKind, SubsystemState, SystemState,
};

/// True iff both components hold a ready state of a common object.
pub fn blocked(a: &Component, b: &Component) -> bool {
    blocked_states(&a.states, &b.states)
}

pub(crate) fn blocked_states(a: &[SubsystemState], b: &[SubsystemState]) -> bool {
    a.iter()
        .filter(|s| s.is_ready())
        .any(|s| b.iter().any(|t| t.is_ready() && t.object == s.object))
}

/// Edges out of present components whose endpoints block each other. A
/// target that does not exist yet is judged by the states it would be
/// created with.
pub fn blocked_edges(state: &SystemState) -> BTreeSet<EdgeId> {
    let graph = &state.graph;
    if !graph.blocking {
        return BTreeSet::new();
    }
    graph
        .edge_ids()
        .filter(|&id| {
            let e = graph.edge(id);
            let Some(src) = state.component(e.source) else {
                return false;
            };
            match state.component(e.target) {
                Some(tgt) => blocked(src, tgt),
                None => blocked_states(
                    &src.states,
                    &graph
                        .template(e.target)
                        .instantiate_from(&src.states, e.creates_ready),
                ),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HazardState {
    pub time: f64,
    /// Per component id; zero for absent or non-ready components.
    pub per_component: Vec<f64>,
    pub total: f64,
    /// Weight held by components without ready states.
    pub unreduced: f64,
}

impl HazardState {
    pub fn of(&self, id: ComponentId) -> f64 {
        self.per_component[id.index()]
    }
}

pub fn hazards(state: &SystemState, flows: &FlowSnapshot) -> Result<HazardState, EngineError> {
    if !(state.s > 0.0) {
        return Err(EngineError::DegenerateSystem);
    }
    let sigma = state.unreduced_modulus();
    let mut per_component = vec![0.0; state.slots.len()];
    for c in state.components().filter(|c| c.has_ready()) {
        let j = flows.net_positive(c.id);
        if j > 0.0 {
            per_component[c.id.index()] = if sigma > 0.0 {
                j / sigma
            } else {
                f64::INFINITY
            };
        }
    }
    Ok(HazardState {
        time: flows.time,
        total: per_component.iter().sum(),
        per_component,
        unreduced: sigma,
    })
}

/// Uniform variate on (0, 1].
fn uniform_open0(rng: &mut dyn RngCore) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Integrated hazard over a segment of length `len` with constant positive
/// inflow `p`, net ready inflow `c`, and unreduced weight `sigma` at its start.
pub(crate) fn segment_hazard(p: f64, c: f64, sigma: f64, len: f64) -> f64 {
    if p <= 0.0 || len <= 0.0 {
        return 0.0;
    }
    if sigma <= 0.0 {
        return f64::INFINITY;
    }
    if c == 0.0 {
        return p * len / sigma;
    }
    let x = -c * len / sigma;
    if x <= -1.0 {
        return f64::INFINITY;
    }
    -(p / c) * libm::log1p(x)
}

/// Time into a segment at which the integrated hazard reaches `budget`.
pub(crate) fn segment_inverse(p: f64, c: f64, sigma: f64, budget: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    if c == 0.0 {
        return sigma * budget / p;
    }
    -sigma * libm::expm1(-budget * c / p) / c
}

/// Exponential budget for the first hit of the current epoch. One draw
/// covers the whole stretch between collapses, so splitting the time axis
/// into more steps does not change the sampled trajectory.
#[derive(Debug, Clone, Default)]
pub struct HazardClock {
    remaining: Option<f64>,
    scratch: FlowSnapshot,
}

impl HazardClock {
    pub fn new() -> Self {
        Self::default()
    }

    /// Forgets the current budget; call after a collapse.
    pub fn reset(&mut self) {
        self.remaining = None;
    }

    /// Looks for the first hit in `[state.time, limit]` assuming no
    /// interaction switches on or off before `limit`. Does not modify
    /// weights.
    pub fn next_hit(
        &mut self,
        state: &SystemState,
        limit: f64,
        rng: &mut dyn RngCore,
    ) -> Result<Option<(f64, ComponentId)>, EngineError> {
        if !(state.s > 0.0) {
            return Err(EngineError::DegenerateSystem);
        }
        let mut budget = match self.remaining {
            Some(b) => b,
            None => -libm::log(uniform_open0(rng)),
        };
        let mut u = state.time;
        let mut sigma = state.unreduced_modulus();
        while u < limit {
            let v = next_piece_boundary(state, u)
                .filter(|&b| b < limit)
                .unwrap_or(limit);
            compute_flows_into(state, segment_probe(u, v), &mut self.scratch);
            let (mut p, mut c) = (0.0, 0.0);
            for comp in state.components().filter(|c| c.has_ready()) {
                let net = self.scratch.net(comp.id);
                c += net;
                p += net.max(0.0);
            }
            let len = v - u;
            let lambda = segment_hazard(p, c, sigma, len);
            if lambda >= budget {
                let dt = segment_inverse(p, c, sigma, budget).clamp(0.0, len);
                let chosen = self.choose(state, p, rng);
                self.remaining = None;
                return Ok(Some(((u + dt).min(v), chosen)));
            }
            budget -= lambda;
            sigma -= c * len;
            u = v;
        }
        self.remaining = Some(budget);
        Ok(None)
    }

    /// Categorical choice among ready components by positive net inflow.
    fn choose(&self, state: &SystemState, p: f64, rng: &mut dyn RngCore) -> ComponentId {
        let target = (1.0 - uniform_open0(rng)) * p;
        let mut acc = 0.0;
        let mut last = None;
        for comp in state.components().filter(|c| c.has_ready()) {
            let j = self.scratch.net_positive(comp.id);
            if j > 0.0 {
                acc += j;
                last = Some(comp.id);
                if target < acc {
                    return comp.id;
                }
            }
        }
        last.expect("positive total inflow implies a candidate")
    }
}

/// Evolves `state` until the first hit or `limit`, switching interactions
/// on and off along the way. On a hit the state is left at the hit time,
/// before collapse.
pub(crate) fn run_until_hit(
    state: &mut SystemState,
    clock: &mut HazardClock,
    rng: &mut dyn RngCore,
    limit: f64,
    events: &mut Vec<Event>,
    emit: &mut dyn FnMut(&Event, &SystemState),
) -> Result<Option<(f64, ComponentId)>, EngineError> {
    loop {
        let t = state.time;
        if t >= limit {
            return Ok(None);
        }
        let Some(bound) = next_structural_time(state)
            .map(|b| b.min(limit))
            .or_else(|| limit.is_finite().then_some(limit))
        else {
            // Nothing active and nothing scheduled: the system is quiescent.
            return Ok(None);
        };
        if let Some((th, chosen)) = clock.next_hit(state, bound, rng)? {
            if th > t {
                advance_to(state, th)?;
            }
            return Ok(Some((th, chosen)));
        }
        advance_to(state, bound)?;
        events.clear();
        activate_interactions_into(state, bound, events);
        for e in events.iter() {
            emit(e, state);
        }
    }
}

/// Samples the next hit from `state` up to `horizon` with a fresh budget,
/// evolving a private copy of the state.
pub fn sample_next_hit(
    state: &SystemState,
    horizon: f64,
    rng: &mut dyn RngCore,
) -> Result<Option<(f64, ComponentId)>, EngineError> {
    let mut copy = state.clone();
    let mut clock = HazardClock::new();
    let mut events = Vec::new();
    run_until_hit(
        &mut copy,
        &mut clock,
        rng,
        horizon,
        &mut events,
        &mut |_, _| {},
    )
}

/// Realizes every state of `chosen`, removes all other components and
/// renormalizes to unit modulus.
pub fn collapse(
    state: &mut SystemState,
    chosen: ComponentId,
    t: f64,
) -> Result<Event, EngineError> {
    let name = || state.graph.component_name(chosen).to_string();
    let Some(comp) = state.component(chosen) else {
        return Err(EngineError::MissingComponent(name()));
    };
    if !comp.has_ready() {
        return Err(EngineError::NotReady(name()));
    }
    for (i, slot) in state.slots.iter_mut().enumerate() {
        if i != chosen.index() {
            *slot = None;
        }
    }
    let comp = state.slots[chosen.index()].as_mut().expect("checked above");
    comp.realize();
    comp.weight = 1.0;
    state.s = 1.0;
    state.time = t;
    for (i, e) in state.graph.edges.iter().enumerate() {
        if e.source != chosen && state.phases[i] != EdgePhase::Done {
            state.phases[i] = EdgePhase::Done;
        }
    }
    rearm(state, chosen, t);
    Ok(Event {
        time: t,
        kind: EventKind::Collapse,
        component: Some(chosen),
        edge: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{activate_interactions, advance, compute_flows};
    use crate::model::ObjectId;
    use crate::scenario;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn comp(id: usize, states: Vec<SubsystemState>) -> Component {
        Component::new(ComponentId::from_index(id), states, 0.0, 0.0).unwrap()
    }

    #[test]
    fn ready_detector_pair_is_blocked() {
        let second = comp(
            1,
            vec![
                SubsystemState::ready("detector", "D1"),
                SubsystemState::realized("observer", "X"),
            ],
        );
        let fourth = comp(
            3,
            vec![
                SubsystemState::ready("detector", "D1'"),
                SubsystemState::ready("observer", "B1"),
            ],
        );
        assert!(blocked(&second, &fourth));
    }

    #[test]
    fn ready_rows_block_each_other() {
        let third = comp(
            2,
            vec![
                SubsystemState::ready("particle", "psi'"),
                SubsystemState::ready("detector", "D0"),
                SubsystemState::ready("observer", "B0"),
            ],
        );
        let fourth = comp(
            3,
            vec![
                SubsystemState::ready("detector", "D1'"),
                SubsystemState::ready("observer", "B1"),
            ],
        );
        assert!(blocked(&third, &fourth));
    }

    #[test]
    fn realized_source_does_not_block() {
        let first = comp(
            0,
            vec![
                SubsystemState::realized("particle", "psi"),
                SubsystemState::realized("detector", "D0"),
                SubsystemState::realized("observer", "X"),
            ],
        );
        let third = comp(
            2,
            vec![
                SubsystemState::ready("particle", "psi'"),
                SubsystemState::ready("detector", "D0"),
                SubsystemState::ready("observer", "B0"),
            ],
        );
        assert!(!blocked(&first, &third));
    }

    #[test]
    fn no_ready_states_means_no_blocked_edges() {
        let sc = scenario::primary_only();
        let st = SystemState::initial(sc.graph().clone(), 0.0).unwrap();
        assert!(blocked_edges(&st).is_empty());
    }

    #[test]
    fn fourth_component_edge_is_blocked_at_observation() {
        let sc = scenario::observer();
        let mut st = SystemState::initial(sc.graph().clone(), 0.0).unwrap();
        activate_interactions(&mut st, 0.0);
        let t_ob = sc.schedule()["t_ob"];
        advance(&mut st, t_ob).unwrap();
        activate_interactions(&mut st, t_ob);
        let look = sc.graph().edge_id("look-capture").unwrap();
        assert!(blocked_edges(&st).contains(&look));
        assert_eq!(st.phase(look), EdgePhase::Blocked);
    }

    #[test]
    fn hazard_equals_inflow_at_unit_modulus() {
        let sc = scenario::primary_only();
        let mut st = SystemState::initial(sc.graph().clone(), 0.0).unwrap();
        activate_interactions(&mut st, 0.0);
        let f = compute_flows(&st, 0.0);
        let h = hazards(&st, &f).unwrap();
        let d1 = sc.component_id("D1").unwrap();
        assert!((h.of(d1) - 0.06).abs() < 1e-15);
        assert_eq!(h.total, h.of(d1));
    }

    #[test]
    fn quiescent_system_has_no_hazard_and_no_hit() {
        let sc = scenario::primary_only();
        let st = SystemState::initial(sc.graph().clone(), 0.0).unwrap();
        let f = compute_flows(&st, 0.0);
        assert_eq!(hazards(&st, &f).unwrap().total, 0.0);
        let mut late = st.clone();
        late.time = 20.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_next_hit(&late, 100.0, &mut rng).unwrap(), None);
    }

    #[test]
    fn zero_modulus_is_degenerate() {
        let sc = scenario::primary_only();
        let mut st = SystemState::initial(sc.graph().clone(), 0.0).unwrap();
        st.scale_weights(0.0);
        let f = compute_flows(&st, 0.0);
        assert_eq!(hazards(&st, &f), Err(EngineError::DegenerateSystem));
    }

    #[test]
    fn segment_hazard_inverts() {
        for &(p, c, sigma) in &[(0.3, 0.3, 0.8), (0.3, 0.0, 0.8), (0.5, -0.2, 0.4)] {
            let lambda = segment_hazard(p, c, sigma, 1.0);
            let dt = segment_inverse(p, c, sigma, lambda);
            assert!((dt - 1.0).abs() < 1e-12, "{p} {c} {sigma}");
        }
        assert_eq!(segment_hazard(0.5, 0.5, 0.5, 1.0), f64::INFINITY);
    }

    #[test]
    fn collapse_realizes_and_renormalizes() {
        let sc = scenario::primary_only();
        let mut st = SystemState::initial(sc.graph().clone(), 0.0).unwrap();
        activate_interactions(&mut st, 0.0);
        advance(&mut st, 5.0).unwrap();
        let d1 = sc.component_id("D1").unwrap();
        let ev = collapse(&mut st, d1, 5.0).unwrap();
        assert_eq!(ev.kind, EventKind::Collapse);
        assert_eq!(st.component_count(), 1);
        let c = st.component(d1).unwrap();
        assert!(!c.has_ready());
        assert_eq!(c.weight(), 1.0);
        assert_eq!(st.s(), 1.0);
        assert!(matches!(
            collapse(&mut st, d1, 5.0),
            Err(EngineError::NotReady(_))
        ));
    }

    #[test]
    fn collapse_on_realized_component_is_a_violation() {
        let sc = scenario::primary_only();
        let mut st = SystemState::initial(sc.graph().clone(), 0.0).unwrap();
        let src = sc.component_id("psi-D0").unwrap();
        assert!(matches!(
            collapse(&mut st, src, 0.0),
            Err(EngineError::NotReady(_))
        ));
        let d1 = sc.component_id("D1").unwrap();
        assert!(matches!(
            collapse(&mut st, d1, 0.0),
            Err(EngineError::MissingComponent(_))
        ));
    }

    #[test]
    fn clock_outcome_is_independent_of_step_splitting() {
        let sc = scenario::primary_only();
        let mut base = SystemState::initial(sc.graph().clone(), 0.0).unwrap();
        activate_interactions(&mut base, 0.0);
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut clock = HazardClock::new();
            let whole = clock.next_hit(&base, 10.0, &mut rng).unwrap();

            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut clock = HazardClock::new();
            let mut st = base.clone();
            let mut split = None;
            for k in 1..=10 {
                if let Some(hit) = clock.next_hit(&st, k as f64, &mut rng).unwrap() {
                    split = Some(hit);
                    break;
                }
                advance(&mut st, 1.0).unwrap();
            }
            match (whole, split) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert_eq!(a.1, b.1);
                    assert!((a.0 - b.0).abs() < 1e-9);
                }
                other => panic!("seed {seed}: {other:?}"),
            }
        }
    }

    proptest! {
        #[test]
        fn blocking_is_symmetric(
            a in proptest::collection::vec((0usize..4, any::<bool>()), 0..4),
            b in proptest::collection::vec((0usize..4, any::<bool>()), 0..4),
        ) {
            let build = |spec: &[(usize, bool)]| {
                let mut seen = BTreeSet::new();
                let states = spec
                    .iter()
                    .filter(|(o, _)| seen.insert(*o))
                    .map(|&(o, ready)| {
                        let obj = ObjectId::new(format!("o{o}"));
                        if ready {
                            SubsystemState::ready(obj, "x")
                        } else {
                            SubsystemState::realized(obj, "x")
                        }
                    })
                    .collect();
                comp(0, states)
            };
            let (ca, cb) = (build(&a), build(&b));
            prop_assert_eq!(blocked(&ca, &cb), blocked(&cb, &ca));
        }
    }
}
