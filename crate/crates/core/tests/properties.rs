//! Property tests over randomly generated scenarios.

use nurules::ensemble::{run_trajectory_with, InvariantMonitor, RunOptions, TrajectoryObserver};
use nurules::oracle::outcome_law;
use nurules::reduction::hazards;
use nurules::scenario::{random_scenario, Scenario};
use nurules::{compute_flows, export_config, parse_config, Event, EventKind, SystemState};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scenario_from(seed: u64) -> Scenario {
    random_scenario(&mut ChaCha8Rng::seed_from_u64(seed), seed as usize)
}

/// Checks creation weights, pure-sink monotonicity and hazard scaling at
/// every logged event.
struct Probe {
    factor: f64,
    created_nonzero: u64,
    scaling_mismatch: u64,
    sink_weights: Vec<Option<f64>>,
    sink_decreases: u64,
}

impl TrajectoryObserver for Probe {
    fn on_event(&mut self, e: &Event, state: &SystemState) {
        if e.kind == EventKind::ComponentCreated {
            let c = e.component.and_then(|c| state.component(c));
            if c.is_some_and(|c| c.weight() != 0.0) {
                self.created_nonzero += 1;
            }
        }
        if e.kind == EventKind::Collapse {
            self.sink_weights.iter_mut().for_each(|w| *w = None);
        } else if state.s() > 0.0 {
            let graph = state.graph();
            for id in graph.edge_ids().map(|x| graph.edge(x).target) {
                let is_sink = graph.edge_ids().all(|x| graph.edge(x).source != id);
                let Some(c) = state.component(id).filter(|_| is_sink) else {
                    continue;
                };
                let slot = &mut self.sink_weights[id.index()];
                if slot.is_some_and(|w| c.weight() < w - 1e-12) {
                    self.sink_decreases += 1;
                }
                *slot = Some(c.weight());
            }
            let flows = compute_flows(state, state.time());
            let mut scaled = state.clone();
            scaled.scale_weights(self.factor);
            let scaled_flows = compute_flows(&scaled, scaled.time());
            if let (Ok(a), Ok(b)) = (hazards(state, &flows), hazards(&scaled, &scaled_flows)) {
                for (x, y) in a.per_component.iter().zip(&b.per_component) {
                    if (x - y).abs() > 1e-9 * x.abs().max(1.0) {
                        self.scaling_mismatch += 1;
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectories_conserve_modulus(seed in any::<u64>(), trajectory in any::<u64>()) {
        let sc = scenario_from(seed);
        let mut monitor = InvariantMonitor::new();
        run_trajectory_with(&sc, trajectory, &mut monitor, RunOptions::default()).unwrap();
        prop_assert_eq!(monitor.violations.total(), 0);
        prop_assert!(monitor.max_drift < 1e-9);
    }

    #[test]
    fn hazards_ignore_overall_scale(
        seed in any::<u64>(),
        trajectory in any::<u64>(),
        factor in 0.01f64..100.0,
    ) {
        let sc = scenario_from(seed);
        let mut probe = Probe {
            factor,
            created_nonzero: 0,
            scaling_mismatch: 0,
            sink_weights: vec![None; sc.graph().templates().len()],
            sink_decreases: 0,
        };
        run_trajectory_with(&sc, trajectory, &mut probe, RunOptions::default()).unwrap();
        prop_assert_eq!(probe.created_nonzero, 0);
        prop_assert_eq!(probe.scaling_mismatch, 0);
        prop_assert_eq!(probe.sink_decreases, 0);
    }

    #[test]
    fn outcome_law_ignores_overall_scale(seed in any::<u64>(), factor in 0.01f64..100.0) {
        let sc = scenario_from(seed);
        let mut spec = sc.spec().clone();
        for c in &mut spec.components {
            c.initial_weight = c.initial_weight.map(|w| w * factor);
        }
        let scaled = Scenario::from_spec(spec).unwrap();
        let a = outcome_law(&sc).unwrap();
        let b = outcome_law(&scaled).unwrap();
        let labels: std::collections::BTreeSet<_> =
            a.probabilities.keys().chain(b.probabilities.keys()).collect();
        for label in labels {
            prop_assert!((a.get(label) - b.get(label)).abs() < 1e-9, "{}", label);
        }
    }

    #[test]
    fn config_round_trips(seed in any::<u64>()) {
        let sc = scenario_from(seed);
        let text = export_config(&sc).unwrap();
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(back.spec(), sc.spec());
        prop_assert_eq!(back.graph(), sc.graph());
    }
}
