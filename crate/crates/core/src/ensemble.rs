//! Seeded trajectories and parallel ensembles.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{activate_interactions_into, next_structural_time};
use crate::error::{EngineError, TrajectoryError};
use crate::model::{
    ComponentId, Event, EventKind, LoggedEvent, ObjectId, Status, SystemState, TrajectoryRecord,
};
use crate::reduction::{blocked_states, collapse, run_until_hit, HazardClock};
use crate::scenario::Scenario;
use crate::stats::binomial_std_error;

/// Environment variable holding the default worker count.
pub const PARALLELISM_ENV: &str = "NURULES_PARALLELISM";

/// Receives every event of a trajectory together with the state right
/// after it.
pub trait TrajectoryObserver {
    fn on_event(&mut self, event: &Event, state: &SystemState);
}

impl TrajectoryObserver for () {
    fn on_event(&mut self, _: &Event, _: &SystemState) {}
}

impl<T: TrajectoryObserver + ?Sized> TrajectoryObserver for &mut T {
    fn on_event(&mut self, event: &Event, state: &SystemState) {
        (**self).on_event(event, state);
    }
}

impl<A: TrajectoryObserver, B: TrajectoryObserver> TrajectoryObserver for (A, B) {
    fn on_event(&mut self, event: &Event, state: &SystemState) {
        self.0.on_event(event, state);
        self.1.on_event(event, state);
    }
}

impl<A: TrajectoryObserver, B: TrajectoryObserver, C: TrajectoryObserver> TrajectoryObserver
    for (A, B, C)
{
    fn on_event(&mut self, event: &Event, state: &SystemState) {
        self.0.on_event(event, state);
        self.1.on_event(event, state);
        self.2.on_event(event, state);
    }
}

/// Logs every event with a weight snapshot.
#[derive(Debug, Clone, Default)]
pub struct RecordCollector {
    pub events: Vec<LoggedEvent>,
}

impl TrajectoryObserver for RecordCollector {
    fn on_event(&mut self, event: &Event, state: &SystemState) {
        self.events.push(LoggedEvent {
            event: *event,
            weights: state.weights(),
        });
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ViolationCounts {
    pub event_order: u64,
    pub hit_without_collapse: u64,
    pub negative_weight: u64,
    pub modulus_drift: u64,
    pub realized_to_ready: u64,
    pub blocked_weight: u64,
}

impl ViolationCounts {
    pub fn total(&self) -> u64 {
        self.event_order
            + self.hit_without_collapse
            + self.negative_weight
            + self.modulus_drift
            + self.realized_to_ready
            + self.blocked_weight
    }

    fn merge(&mut self, o: &Self) {
        self.event_order += o.event_order;
        self.hit_without_collapse += o.hit_without_collapse;
        self.negative_weight += o.negative_weight;
        self.modulus_drift += o.modulus_drift;
        self.realized_to_ready += o.realized_to_ready;
        self.blocked_weight += o.blocked_weight;
    }
}

/// Tolerance on `|sum of weights - s|` between collapses.
pub const MODULUS_TOLERANCE: f64 = 1e-9;

/// Checks log-level invariants as events stream past.
#[derive(Debug, Clone, Default)]
pub struct InvariantMonitor {
    pub violations: ViolationCounts,
    pub max_drift: f64,
    last_time: f64,
    pending_hit: Option<(f64, Option<ComponentId>)>,
    /// Objects seen realized, per present component.
    realized: Vec<Option<Vec<ObjectId>>>,
}

impl InvariantMonitor {
    pub fn new() -> Self {
        Self {
            last_time: f64::NEG_INFINITY,
            ..Self::default()
        }
    }
}

impl TrajectoryObserver for InvariantMonitor {
    fn on_event(&mut self, event: &Event, state: &SystemState) {
        if event.time < self.last_time {
            self.violations.event_order += 1;
        }
        self.last_time = event.time;
        if let Some((t, c)) = self.pending_hit.take() {
            if event.kind != EventKind::Collapse || event.time != t || event.component != c {
                self.violations.hit_without_collapse += 1;
            }
        }
        if event.kind == EventKind::StochasticHit {
            self.pending_hit = Some((event.time, event.component));
        }

        let mut sum = 0.0;
        for c in state.components() {
            sum += c.weight();
            if c.weight() < 0.0 {
                self.violations.negative_weight += 1;
            }
        }
        let drift = (sum - state.s()).abs();
        self.max_drift = self.max_drift.max(drift);
        if drift > MODULUS_TOLERANCE {
            self.violations.modulus_drift += 1;
        }

        let n = state.graph().templates().len();
        self.realized.resize(n, None);
        for (i, slot) in self.realized.iter_mut().enumerate() {
            let Some(c) = state.component(ComponentId::from_index(i)) else {
                *slot = None;
                continue;
            };
            let seen = slot.get_or_insert_with(Vec::new);
            for s in c.states() {
                match s.status {
                    Status::Ready if seen.contains(&s.object) => {
                        self.violations.realized_to_ready += 1;
                    }
                    Status::Realized if !seen.contains(&s.object) => seen.push(s.object.clone()),
                    _ => {}
                }
            }
        }

        // A component whose every live feeder is blocked must be empty.
        let graph = state.graph();
        if graph.blocking() {
            for c in state.components().filter(|c| c.weight() > 0.0) {
                let mut feeders = graph
                    .edges()
                    .iter()
                    .filter(|e| e.target == c.id())
                    .filter_map(|e| state.component(e.source))
                    .peekable();
                if feeders.peek().is_some()
                    && feeders.all(|src| blocked_states(src.states(), c.states()))
                {
                    self.violations.blocked_weight += 1;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    /// Overrides the scenario horizon.
    pub horizon: Option<f64>,
    /// Emit a weight sample every `dense_dt` time units.
    pub dense_dt: Option<f64>,
}

/// Result of one trajectory without the event log.
#[derive(Debug, Clone)]
pub struct TrajectoryOutcome {
    pub seed: u64,
    pub outcome: String,
    pub collapses: Vec<(f64, ComponentId)>,
    pub final_state: SystemState,
}

/// Seed of trajectory `index` under `master_seed`.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(master_seed) ^ index)
}

pub fn run_trajectory(sc: &Scenario, seed: u64) -> Result<TrajectoryRecord, EngineError> {
    let mut log = RecordCollector::default();
    let out = run_trajectory_with(sc, seed, &mut log, RunOptions::default())?;
    Ok(TrajectoryRecord {
        seed,
        events: log.events,
        outcome: out.outcome,
        collapses: out.collapses,
        final_components: out.final_state.components().cloned().collect(),
    })
}

pub fn run_trajectory_with(
    sc: &Scenario,
    seed: u64,
    mut observer: impl TrajectoryObserver,
    options: RunOptions,
) -> Result<TrajectoryOutcome, EngineError> {
    let horizon = options.horizon.or(sc.horizon()).unwrap_or(f64::INFINITY);
    if horizon.is_infinite() && sc.is_recurrent() {
        return Err(EngineError::HorizonRequired);
    }
    let dense = options.dense_dt.filter(|d| *d > 0.0 && d.is_finite());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = sc.initial_state();
    let mut clock = HazardClock::new();
    let mut events = Vec::new();
    let mut collapses = Vec::new();
    let mut samples = 0u64;
    let mut next_sample = dense;

    activate_interactions_into(&mut state, 0.0, &mut events);
    for e in &events {
        observer.on_event(e, &state);
    }
    loop {
        let limit = next_sample.map_or(horizon, |s| s.min(horizon));
        let hit = run_until_hit(
            &mut state,
            &mut clock,
            &mut rng,
            limit,
            &mut events,
            &mut |e, s| observer.on_event(e, s),
        )?;
        match hit {
            Some((t, chosen)) => {
                let hit = Event {
                    time: t,
                    kind: EventKind::StochasticHit,
                    component: Some(chosen),
                    edge: None,
                };
                observer.on_event(&hit, &state);
                let done = collapse(&mut state, chosen, t)?;
                observer.on_event(&done, &state);
                clock.reset();
                collapses.push((t, chosen));
                events.clear();
                activate_interactions_into(&mut state, t, &mut events);
                for e in &events {
                    observer.on_event(e, &state);
                }
            }
            None if state.time() >= horizon => break,
            None => match (next_sample, dense) {
                (Some(s), Some(dt)) if state.time() >= s => {
                    let sample = Event {
                        time: state.time(),
                        kind: EventKind::Sample,
                        component: None,
                        edge: None,
                    };
                    observer.on_event(&sample, &state);
                    samples += 1;
                    next_sample = Some(dt * (samples + 1) as f64);
                    if horizon.is_infinite() && next_structural_time(&state).is_none() {
                        break;
                    }
                }
                _ => break,
            },
        }
    }
    let path: Vec<ComponentId> = collapses.iter().map(|&(_, c)| c).collect();
    Ok(TrajectoryOutcome {
        seed,
        outcome: sc.classify(&path),
        collapses,
        final_state: state,
    })
}

/// Worker count from the environment, else the machine's parallelism.
pub fn default_parallelism() -> usize {
    std::env::var(PARALLELISM_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f(index, seed)` for every trajectory index on `parallelism`
/// workers (0 = default), returning results in index order.
pub fn map_trajectories<T, F>(n: u64, master_seed: u64, parallelism: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync + Send,
{
    let workers = if parallelism == 0 {
        default_parallelism()
    } else {
        parallelism
    };
    let run = || {
        (0..n)
            .into_par_iter()
            .map(|i| f(i, trajectory_seed(master_seed, i)))
            .collect()
    };
    if workers == 1 {
        return (0..n)
            .map(|i| f(i, trajectory_seed(master_seed, i)))
            .collect();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_or_else(|_| run(), |pool| pool.install(run))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelStat {
    pub count: u64,
    pub frequency: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeEntry {
    pub index: u64,
    pub seed: u64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub scenario: String,
    pub trials: u64,
    pub master_seed: u64,
    pub labels: BTreeMap<String, LabelStat>,
    pub violations: ViolationCounts,
    pub max_modulus_drift: f64,
    pub wall_clock_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<OutcomeEntry>>,
}

impl EnsembleReport {
    pub fn frequency(&self, label: &str) -> f64 {
        self.labels.get(label).map_or(0.0, |s| s.frequency)
    }

    pub fn count(&self, label: &str) -> u64 {
        self.labels.get(label).map_or(0, |s| s.count)
    }

    /// True if everything but the timing agrees.
    pub fn same_statistics(&self, other: &Self) -> bool {
        Self {
            wall_clock_seconds: 0.0,
            ..self.clone()
        } == Self {
            wall_clock_seconds: 0.0,
            ..other.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnsembleOptions {
    pub run: RunOptions,
    pub keep_outcomes: bool,
}

pub fn run_ensemble(
    sc: &Scenario,
    n: u64,
    master_seed: u64,
    parallelism: usize,
) -> Result<EnsembleReport, TrajectoryError> {
    run_ensemble_with(sc, n, master_seed, parallelism, EnsembleOptions::default())
}

pub fn run_ensemble_with(
    sc: &Scenario,
    n: u64,
    master_seed: u64,
    parallelism: usize,
    options: EnsembleOptions,
) -> Result<EnsembleReport, TrajectoryError> {
    let started = Instant::now();
    let results = map_trajectories(n, master_seed, parallelism, |index, seed| {
        let mut monitor = InvariantMonitor::new();
        run_trajectory_with(sc, seed, &mut monitor, options.run)
            .map(|out| (out.outcome, monitor.violations, monitor.max_drift))
            .map_err(|source| TrajectoryError {
                index,
                seed,
                source,
            })
    });
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut violations = ViolationCounts::default();
    let mut max_drift: f64 = 0.0;
    let mut outcomes = options.keep_outcomes.then(Vec::new);
    for (index, r) in results.into_iter().enumerate() {
        let (label, v, drift) = r?;
        violations.merge(&v);
        max_drift = max_drift.max(drift);
        if let Some(list) = outcomes.as_mut() {
            list.push(OutcomeEntry {
                index: index as u64,
                seed: trajectory_seed(master_seed, index as u64),
                label: label.clone(),
            });
        }
        *counts.entry(label).or_insert(0) += 1;
    }
    let labels = counts
        .into_iter()
        .map(|(label, count)| {
            let frequency = count as f64 / n as f64;
            (
                label,
                LabelStat {
                    count,
                    frequency,
                    std_error: binomial_std_error(frequency, n),
                },
            )
        })
        .collect();
    Ok(EnsembleReport {
        scenario: sc.name().to_string(),
        trials: n,
        master_seed,
        labels,
        violations,
        max_modulus_drift: max_drift,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        outcomes,
    })
}
