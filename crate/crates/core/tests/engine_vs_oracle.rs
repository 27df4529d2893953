//! Ensemble frequencies against the exact laws at moderate trial counts.

use nurules::ensemble::{run_trajectory_with, RunOptions, TrajectoryObserver};
use nurules::oracle::{hit_time_cdf, outcome_law};
use nurules::run_ensemble;
use nurules::scenario::{self, Scenario};
use nurules::stats::{binomial_std_error, ks_critical, ks_statistic};
use nurules::{Event, EventKind, SystemState};

const N: u64 = 20_000;

fn assert_matches_law(sc: &Scenario, seed: u64) {
    let law = outcome_law(sc).unwrap();
    let report = run_ensemble(sc, N, seed, 0).unwrap();
    assert_eq!(report.violations.total(), 0, "{}", sc.name());
    for (label, &p) in &law.probabilities {
        let f = report.frequency(label);
        let se = binomial_std_error(p, N);
        assert!(
            (f - p).abs() <= 4.0 * se + 1e-12,
            "{} {label}: {f} vs {p}",
            sc.name()
        );
    }
    for label in report.labels.keys() {
        assert!(
            law.get(label) > 0.0,
            "{} produced impossible {label}",
            sc.name()
        );
    }
}

#[test]
fn builtins_match_their_laws() {
    for (k, name) in [
        "primary-only",
        "observer",
        "two-observers",
        "two-observers-late",
        "counter-chain",
    ]
    .iter()
    .enumerate()
    {
        assert_matches_law(&scenario::builtin(name).unwrap(), 100 + k as u64);
    }
}

#[test]
fn unblocked_chain_matches_its_law() {
    let sc = scenario::counter_chain(4).unwrap().with_blocking(false);
    assert_matches_law(&sc, 7);
}

#[test]
fn overlapping_observation_matches_its_law() {
    let sc = scenario::observer_with(scenario::ObserverOptions {
        overlap: true,
        ..Default::default()
    })
    .unwrap();
    assert_matches_law(&sc, 8);
}

#[derive(Default)]
struct FirstHit(Option<f64>);

impl TrajectoryObserver for FirstHit {
    fn on_event(&mut self, e: &Event, _: &SystemState) {
        if e.kind == EventKind::StochasticHit && self.0.is_none() {
            self.0 = Some(e.time);
        }
    }
}

#[test]
fn first_hit_times_follow_the_oracle_cdf() {
    let sc = scenario::primary_only();
    let cdf = hit_time_cdf(&sc, "D1").unwrap();
    let limit = cdf.limit();
    let mut times = Vec::new();
    for seed in 0..N {
        let mut obs = FirstHit::default();
        run_trajectory_with(&sc, seed, &mut obs, RunOptions::default()).unwrap();
        if let Some(t) = obs.0 {
            times.push(t);
        }
    }
    let d = ks_statistic(&times, |t| cdf.eval(t) / limit);
    assert!(d <= ks_critical(times.len(), 0.01), "D = {d}");
}

/// A two-piece edge anchored at its source's collapse time, with breakpoints
/// that do not survive `(b + t) - t` exactly. The law follows
/// from the transfer totals: P(c1) = 0.4 * (1 - 0.25), P(c1 then c3) = 0.4 * 0.25.
#[test]
fn rearmed_multi_piece_edge_carries_its_total() {
    use nurules::config::{parse_config, ClassifierSpec};
    let text = r#"
name = "rearm"
objects = ["o"]
[classifier]
kind = "path"
[[components]]
id = "c0"
initial_weight = 1.0
states = [{ object = "o", label = "L0" }]
[[components]]
id = "c1"
states = [{ object = "o", label = "L1", ready = true }]
[[components]]
id = "c3"
states = [{ object = "o", label = "L3", ready = true }]
[[edges]]
id = "feed"
source = "c0"
target = "c1"
pieces = [{ start = 1.5, end = 5.5, rate = 0.1 }]
[[edges]]
id = "onward"
source = "c1"
target = "c3"
anchor = "source"
pieces = [
    { start = 0.21, end = 0.54, rate = 0.45454545454545453 },
    { start = 0.54, end = 1.37, rate = 0.12048192771084337 },
]
"#;
    let sc = parse_config(text).unwrap();
    assert!(matches!(sc.spec().classifier, ClassifierSpec::Path));
    let law = outcome_law(&sc).unwrap();
    for (label, p) in [("c1", 0.3), ("c1>c3", 0.1), ("none", 0.6)] {
        assert!(
            (law.get(label) - p).abs() < 1e-9,
            "{label}: {}",
            law.get(label)
        );
    }
    assert_matches_law(&sc, 9);
}
