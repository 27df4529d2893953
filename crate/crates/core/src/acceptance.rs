//! Acceptance suite shared by the `verify` command and the acceptance test
//! target. Every criterion derives its tolerance from the trial count.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{
    map_trajectories, run_ensemble, run_trajectory_with, trajectory_seed, InvariantMonitor,
    RunOptions, TrajectoryObserver, TrajectoryOutcome, ViolationCounts,
};
use crate::error::TrajectoryError;
use crate::model::{ComponentId, Event, EventKind, SystemState};
use crate::oracle::{self, OutcomeLaw};
use crate::scenario::{self, IntervalTracker, Scenario};
use crate::stats::{binomial_std_error, ks_critical, ks_p_value, ks_statistic};

pub const DEFAULT_MASTER_SEED: u64 = 0x5EED_0001;
pub const TRIALS: u64 = 100_000;
pub const CHAIN_TRIALS: u64 = 10_000;
pub const DARK_INTERVALS: usize = 10_000;
pub const RANDOM_SCENARIOS: usize = 50;
/// Random scenarios allowed to miss at 3 sigma before a rerun.
pub const MARGINAL_ALLOWANCE: usize = 2;
pub const KS_ALPHA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} {} {}: {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

/// Outcome counts and invariant tallies of one checked ensemble.
#[derive(Debug, Clone)]
struct Batch<T> {
    trials: u64,
    counts: BTreeMap<String, u64>,
    violations: ViolationCounts,
    max_drift: f64,
    items: Vec<T>,
}

impl<T> Batch<T> {
    fn frequency(&self, label: &str) -> f64 {
        self.counts.get(label).copied().unwrap_or(0) as f64 / self.trials as f64
    }
}

fn checked_runs<O, T, F, G>(
    sc: &Scenario,
    n: u64,
    master_seed: u64,
    parallelism: usize,
    options: RunOptions,
    make: F,
    finish: G,
) -> Result<Batch<T>, TrajectoryError>
where
    O: TrajectoryObserver,
    T: Send,
    F: Fn() -> O + Sync + Send,
    G: Fn(&TrajectoryOutcome, O) -> T + Sync + Send,
{
    let results = map_trajectories(n, master_seed, parallelism, |index, seed| {
        let mut monitor = InvariantMonitor::new();
        let mut obs = make();
        let out =
            run_trajectory_with(sc, seed, (&mut monitor, &mut obs), options).map_err(|source| {
                TrajectoryError {
                    index,
                    seed,
                    source,
                }
            })?;
        let item = finish(&out, obs);
        Ok::<_, TrajectoryError>((out.outcome, monitor.violations, monitor.max_drift, item))
    });
    let mut batch = Batch {
        trials: n,
        counts: BTreeMap::new(),
        violations: ViolationCounts::default(),
        max_drift: 0.0,
        items: Vec::with_capacity(n as usize),
    };
    for r in results {
        let (label, v, drift, item) = r?;
        *batch.counts.entry(label).or_insert(0) += 1;
        add_violations(&mut batch.violations, &v);
        batch.max_drift = batch.max_drift.max(drift);
        batch.items.push(item);
    }
    Ok(batch)
}

fn add_violations(total: &mut ViolationCounts, v: &ViolationCounts) {
    total.event_order += v.event_order;
    total.hit_without_collapse += v.hit_without_collapse;
    total.negative_weight += v.negative_weight;
    total.modulus_drift += v.modulus_drift;
    total.realized_to_ready += v.realized_to_ready;
    total.blocked_weight += v.blocked_weight;
}

/// Labels whose frequency misses the law by more than 3 standard errors.
/// Zero-probability labels must never occur.
fn law_misses(counts: &BTreeMap<String, u64>, n: u64, law: &BTreeMap<String, f64>) -> Vec<String> {
    let mut labels: Vec<&String> = law.keys().chain(counts.keys()).collect();
    labels.sort();
    labels.dedup();
    labels
        .into_iter()
        .filter_map(|label| {
            let p = law.get(label).copied().unwrap_or(0.0).clamp(0.0, 1.0);
            let count = counts.get(label).copied().unwrap_or(0);
            let f = count as f64 / n as f64;
            let se = binomial_std_error(p, n);
            let ok = if se == 0.0 {
                (f - p).abs() < 0.5 / n as f64
            } else {
                (f - p).abs() <= 3.0 * se
            };
            (!ok).then(|| format!("{label}: {f:.5} vs {p:.5} (3se {:.5})", 3.0 * se))
        })
        .collect()
}

/// Fourth-row check for the single-observer ensemble: while the unobserved
/// capture row is still ready, the row it would feed holds no weight.
#[derive(Debug, Clone, Copy, Default)]
struct FourthRow {
    unobserved: Option<ComponentId>,
    fourth: Option<ComponentId>,
    look_edge: Option<crate::model::EdgeId>,
    violations: u64,
    blocked_logged: bool,
}

impl TrajectoryObserver for FourthRow {
    fn on_event(&mut self, event: &Event, state: &SystemState) {
        let (Some(row), Some(fourth)) = (self.unobserved, self.fourth) else {
            return;
        };
        if state.component(row).is_some_and(|c| c.has_ready()) {
            if let Some(c) = state.component(fourth) {
                if c.weight() != 0.0 {
                    self.violations += 1;
                }
            }
        }
        if event.kind == EventKind::EdgeBlocked && event.edge == self.look_edge {
            self.blocked_logged = true;
        }
    }
}

/// Events attributable to the phantom row while it is still ready.
#[derive(Debug, Clone, Copy, Default)]
struct PhantomWatch {
    phantom: Option<ComponentId>,
    window_end: f64,
    weight_after_window: Option<f64>,
    driven: u64,
    second_look_blocked: bool,
    second_look_edge: Option<crate::model::EdgeId>,
}

impl TrajectoryObserver for PhantomWatch {
    fn on_event(&mut self, event: &Event, state: &SystemState) {
        let Some(p) = self.phantom else { return };
        let Some(c) = state.component(p) else { return };
        if !c.has_ready() {
            return;
        }
        let graph = state.graph();
        let from_phantom = event.edge.is_some_and(|e| graph.edge(e).source == p);
        match event.kind {
            EventKind::StochasticHit | EventKind::Collapse if event.component == Some(p) => {
                self.driven += 1
            }
            EventKind::ComponentCreated if from_phantom => self.driven += 1,
            EventKind::EdgeBlocked if event.edge == self.second_look_edge => {
                self.second_look_blocked = true
            }
            _ => {}
        }
        if event.time >= self.window_end {
            match self.weight_after_window {
                None => self.weight_after_window = Some(c.weight()),
                Some(w) if w != c.weight() => self.driven += 1,
                _ => {}
            }
        }
    }
}

fn state_label(sc: &Scenario, c: ComponentId, object: &str) -> Option<String> {
    sc.graph()
        .template(c)
        .states
        .iter()
        .find(|s| s.object.as_str() == object)
        .map(|s| s.label.clone())
}

#[derive(Debug, Clone, Copy, Default)]
struct AgreementCheck {
    early_b1: bool,
    disagree: bool,
}

fn agreement(sc: &Scenario, out: &TrajectoryOutcome) -> AgreementCheck {
    let mut check = AgreementCheck::default();
    let mut captured = false;
    let mut second_seen = false;
    for &(_, c) in &out.collapses {
        let detector = state_label(sc, c, "detector");
        let first = state_label(sc, c, "observer");
        let second = state_label(sc, c, "observer2");
        if detector.as_deref().is_some_and(|d| d.starts_with("D1")) {
            captured = true;
        }
        if let Some(b2) = second.filter(|l| l.starts_with('B')) {
            if !second_seen && b2 == "B1" && !captured {
                check.early_b1 = true;
            }
            second_seen = true;
            if first.as_deref() != Some(b2.as_str()) {
                check.disagree = true;
            }
        }
    }
    check
}

type Health = (String, ViolationCounts, f64);

/// Lazily evaluated acceptance criteria.
pub struct Suite {
    pub master_seed: u64,
    pub parallelism: usize,
    health: Mutex<Vec<Health>>,
    observer: OnceLock<Result<Batch<(u64, bool)>, String>>,
    results: [OnceLock<CriterionResult>; 10],
}

impl Suite {
    pub fn new(master_seed: u64, parallelism: usize) -> Self {
        Self {
            master_seed,
            parallelism,
            health: Mutex::new(Vec::new()),
            observer: OnceLock::new(),
            results: Default::default(),
        }
    }

    fn record<T>(&self, name: &str, batch: &Batch<T>) {
        self.health.lock().expect("health log poisoned").push((
            name.to_string(),
            batch.violations,
            batch.max_drift,
        ));
    }

    fn seed_for(&self, tag: u64) -> u64 {
        trajectory_seed(self.master_seed, tag)
    }

    pub fn run_all(&self) -> Vec<CriterionResult> {
        (1..=9).map(|id| self.criterion(id)).collect()
    }

    /// Result of criterion `id`, evaluated at most once per suite.
    pub fn criterion(&self, id: u8) -> CriterionResult {
        match self.results.get(usize::from(id)) {
            Some(cell) => cell.get_or_init(|| self.evaluate(id)).clone(),
            None => self.evaluate(id),
        }
    }

    fn evaluate(&self, id: u8) -> CriterionResult {
        match id {
            1 => self.observer_law(),
            2 => self.fourth_component(),
            3 => self.two_observer_agreement(),
            4 => self.phantom_inertness(),
            5 => self.oracle_equivalence(),
            6 => self.conservation(),
            7 => self.sequential_counter(),
            8 => self.fluorescent_pulsing(),
            9 => self.determinism(),
            _ => CriterionResult {
                id,
                name: "unknown",
                passed: false,
                detail: "no such criterion".into(),
            },
        }
    }

    fn observer_batch(&self) -> &Result<Batch<(u64, bool)>, String> {
        self.observer.get_or_init(|| {
            let sc = scenario::observer();
            let make = || FourthRow {
                unobserved: sc.component_id("D1-X"),
                fourth: sc.component_id("D1'-B1"),
                look_edge: sc.graph().edge_id("look-capture"),
                ..Default::default()
            };
            let batch = checked_runs(
                &sc,
                TRIALS,
                self.seed_for(1),
                self.parallelism,
                RunOptions::default(),
                make,
                |out, obs| {
                    let unobserved_at_look = out.outcome.starts_with("ground");
                    (obs.violations, !unobserved_at_look || obs.blocked_logged)
                },
            )
            .map_err(|e| e.to_string())?;
            self.record("observer", &batch);
            Ok(batch)
        })
    }

    fn observer_law(&self) -> CriterionResult {
        let name = "observer outcome law";
        let batch = match self.observer_batch() {
            Ok(b) => b,
            Err(e) => return fail(1, name, e.clone()),
        };
        let sc = scenario::observer();
        let declared = sc.declared().expect("observer declares its law").clone();
        let oracle_ok = match oracle::outcome_law(&sc) {
            Ok(law) => declared.iter().all(|(l, &p)| (law.get(l) - p).abs() < 1e-9),
            Err(_) => false,
        };
        let misses = law_misses(&batch.counts, batch.trials, &declared);
        let capture =
            batch.frequency("capture-at-first-look") + batch.frequency("ground-then-capture");
        let capture_ok = (capture - 0.6).abs() <= 0.005;
        let detail = format!(
            "N={} first-look={:.5} ground-then-capture={:.5} ground-no-capture={:.5} total-capture={:.5} oracle-agrees={oracle_ok}{}",
            batch.trials,
            batch.frequency("capture-at-first-look"),
            batch.frequency("ground-then-capture"),
            batch.frequency("ground-no-capture"),
            capture,
            if misses.is_empty() { String::new() } else { format!(" misses: {}", misses.join("; ")) }
        );
        CriterionResult {
            id: 1,
            name,
            passed: misses.is_empty() && capture_ok && oracle_ok,
            detail,
        }
    }

    fn fourth_component(&self) -> CriterionResult {
        let name = "fourth-component elimination";
        let batch = match self.observer_batch() {
            Ok(b) => b,
            Err(e) => return fail(2, name, e.clone()),
        };
        let weight_violations: u64 = batch.items.iter().map(|&(v, _)| v).sum();
        let unblocked = batch.items.iter().filter(|&&(_, logged)| !logged).count();
        let blocked_weight = batch.violations.blocked_weight;
        CriterionResult {
            id: 2,
            name,
            passed: weight_violations == 0 && unblocked == 0 && blocked_weight == 0,
            detail: format!(
                "N={} nonzero-fourth-weight={weight_violations} looks-without-blocking={unblocked} blocked-weight={blocked_weight}",
                batch.trials
            ),
        }
    }

    fn two_observer_agreement(&self) -> CriterionResult {
        let name = "two-observer agreement";
        let sc = scenario::two_observers();
        let batch = match checked_runs(
            &sc,
            TRIALS,
            self.seed_for(3),
            self.parallelism,
            RunOptions::default(),
            || (),
            |out, ()| agreement(&sc, out),
        ) {
            Ok(b) => b,
            Err(e) => return fail(3, name, e.to_string()),
        };
        self.record("two-observers", &batch);
        let early = batch.items.iter().filter(|c| c.early_b1).count();
        let disagree = batch.items.iter().filter(|c| c.disagree).count();
        CriterionResult {
            id: 3,
            name,
            passed: early == 0 && disagree == 0,
            detail: format!(
                "N={} second-observer-B1-without-capture={early} disagreements={disagree}",
                batch.trials
            ),
        }
    }

    fn phantom_inertness(&self) -> CriterionResult {
        let name = "phantom inertness";
        let sc = scenario::two_observers_late();
        let window_end = sc.schedule()["window_end"];
        let make = || PhantomWatch {
            phantom: sc.component_id("D1-B1"),
            window_end,
            second_look_edge: sc.graph().edge_id("look2-capture"),
            ..Default::default()
        };
        let batch = match checked_runs(
            &sc,
            TRIALS,
            self.seed_for(4),
            self.parallelism,
            RunOptions::default(),
            make,
            |out, w| {
                (
                    out.outcome == "ground-no-capture",
                    w.driven,
                    w.second_look_blocked,
                )
            },
        ) {
            Ok(b) => b,
            Err(e) => return fail(4, name, e.to_string()),
        };
        self.record("two-observers-late", &batch);
        let relevant: Vec<_> = batch.items.iter().filter(|i| i.0).collect();
        let driven: u64 = relevant.iter().map(|i| i.1).sum();
        let unwatched = relevant.iter().filter(|i| !i.2).count();
        CriterionResult {
            id: 4,
            name,
            passed: driven == 0 && unwatched == 0 && !relevant.is_empty(),
            detail: format!(
                "N={} ground-no-capture={} phantom-driven-events={driven} second-look-not-blocked={unwatched}",
                batch.trials,
                relevant.len()
            ),
        }
    }

    /// Built-ins checked against the oracle.
    pub fn oracle_builtins() -> Vec<Scenario> {
        let chain = scenario::counter_chain(5).expect("valid chain");
        vec![
            scenario::primary_only(),
            scenario::observer(),
            scenario::two_observers(),
            scenario::two_observers_late(),
            chain.clone(),
            chain.with_blocking(false),
        ]
    }

    /// Random scenarios for the oracle comparison; rejects laws with labels
    /// too rare to be resolved at the trial count.
    pub fn random_scenarios(seed: u64, count: usize) -> Vec<(Scenario, OutcomeLaw)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let mut index = 0;
        while out.len() < count {
            let sc = scenario::random_scenario(&mut rng, index);
            index += 1;
            let Ok(law) = oracle::outcome_law(&sc) else {
                continue;
            };
            if law.probabilities.values().any(|&p| p > 0.0 && p < 1e-3) {
                continue;
            }
            out.push((sc, law));
        }
        out
    }

    fn compare(&self, sc: &Scenario, law: &OutcomeLaw, seed: u64) -> Result<Vec<String>, String> {
        let batch = checked_runs(
            sc,
            TRIALS,
            seed,
            self.parallelism,
            RunOptions::default(),
            || (),
            |_, ()| (),
        )
        .map_err(|e| format!("{}: {e}", sc.name()))?;
        self.record(sc.name(), &batch);
        Ok(law_misses(&batch.counts, batch.trials, &law.probabilities))
    }

    fn oracle_equivalence(&self) -> CriterionResult {
        let name = "oracle equivalence";
        let mut notes = Vec::new();
        let mut builtin_fail = 0;
        for (k, sc) in Self::oracle_builtins().iter().enumerate() {
            let label = if sc.graph().blocking() {
                sc.name().to_string()
            } else {
                format!("{} (unblocked)", sc.name())
            };
            let law = match oracle::outcome_law(sc) {
                Ok(l) => l,
                Err(e) => return fail(5, name, format!("{label}: oracle failed: {e}")),
            };
            let mut misses = match self.compare(sc, &law, self.seed_for(500 + k as u64)) {
                Ok(m) => m,
                Err(e) => return fail(5, name, e),
            };
            if !misses.is_empty() {
                notes.push(format!("{label} rerun after: {}", misses.join("; ")));
                misses = match self.compare(sc, &law, self.seed_for(600 + k as u64)) {
                    Ok(m) => m,
                    Err(e) => return fail(5, name, e),
                };
                if !misses.is_empty() {
                    builtin_fail += 1;
                    notes.push(format!("{label} failed: {}", misses.join("; ")));
                }
            }
        }
        let randoms = Self::random_scenarios(self.seed_for(700), RANDOM_SCENARIOS);
        let run_batch = |salt: u64| -> Result<Vec<String>, String> {
            let mut failed = Vec::new();
            for (k, (sc, law)) in randoms.iter().enumerate() {
                let misses = self.compare(sc, law, self.seed_for(salt + k as u64))?;
                if !misses.is_empty() {
                    failed.push(format!("{}: {}", sc.name(), misses.join("; ")));
                }
            }
            Ok(failed)
        };
        let mut failed = match run_batch(1_000) {
            Ok(f) => f,
            Err(e) => return fail(5, name, e),
        };
        let mut rerun = false;
        if failed.len() > MARGINAL_ALLOWANCE {
            notes.push(format!("random batch rerun after {} misses", failed.len()));
            rerun = true;
            failed = match run_batch(2_000) {
                Ok(f) => f,
                Err(e) => return fail(5, name, e),
            };
        }
        notes.extend(failed.iter().cloned());
        CriterionResult {
            id: 5,
            name,
            passed: builtin_fail == 0 && failed.len() <= MARGINAL_ALLOWANCE,
            detail: format!(
                "builtins={} random={} N={TRIALS} builtin-failures={builtin_fail} random-misses={}{}{}",
                Self::oracle_builtins().len(),
                randoms.len(),
                failed.len(),
                if rerun { " (after rerun)" } else { "" },
                if notes.is_empty() { String::new() } else { format!(" [{}]", notes.join(" | ")) }
            ),
        }
    }

    fn sequential_counter(&self) -> CriterionResult {
        let name = "sequential counter";
        let sc = scenario::counter_chain(5).expect("valid chain");
        let skips = |sc: &Scenario, seed| {
            checked_runs(
                sc,
                CHAIN_TRIALS,
                seed,
                self.parallelism,
                RunOptions::default(),
                || (),
                |out, ()| {
                    let readings: Vec<usize> =
                        out.collapses.iter().map(|&(_, c)| c.index()).collect();
                    let expected: Vec<usize> = (1..=readings.len()).collect();
                    readings != expected || readings.len() != 4
                },
            )
        };
        let batch = match skips(&sc, self.seed_for(7)) {
            Ok(b) => b,
            Err(e) => return fail(7, name, e.to_string()),
        };
        self.record("counter-chain", &batch);
        let skipped = batch.items.iter().filter(|&&s| s).count();
        let open = match skips(&sc.with_blocking(false), self.seed_for(8)) {
            Ok(b) => b.items.iter().filter(|&&s| s).count(),
            Err(e) => return fail(7, name, e.to_string()),
        };
        CriterionResult {
            id: 7,
            name,
            passed: skipped == 0,
            detail: format!(
                "k=5 N={CHAIN_TRIALS} skipped-readings={skipped} (blocking disabled: {open} trajectories skip)"
            ),
        }
    }

    fn fluorescent_pulsing(&self) -> CriterionResult {
        let name = "fluorescent pulsing";
        let (strong, weak) = (100.0, 1.0);
        let sc = match scenario::three_level_atom(strong, weak) {
            Ok(sc) => sc,
            Err(e) => return fail(8, name, e.to_string()),
        };
        let cdf = match oracle::hit_time_cdf_from(&sc, "dark-0", 0.0, "bright-1") {
            Ok(c) => c,
            Err(e) => return fail(8, name, e.to_string()),
        };
        let mut dark = Vec::new();
        let mut bright = Vec::new();
        let mut strong_in_dark = 0;
        let mut strong_hits = 0;
        let mut round = 0;
        let mut health = (ViolationCounts::default(), 0.0f64);
        let mut idle_rounds = 0;
        while dark.len() < DARK_INTERVALS {
            if idle_rounds == 4 {
                return fail(8, name, format!("no dark intervals after {round} rounds"));
            }
            let graph = sc.graph().clone();
            let batch = match checked_runs(
                &sc,
                16,
                self.seed_for(800 + round),
                self.parallelism,
                RunOptions::default(),
                || Tracker(IntervalTracker::new(), graph.clone()),
                |_, t| t.0,
            ) {
                Ok(b) => b,
                Err(e) => return fail(8, name, e.to_string()),
            };
            add_violations(&mut health.0, &batch.violations);
            health.1 = health.1.max(batch.max_drift);
            let before = dark.len();
            for t in batch.items {
                dark.extend(t.dark);
                bright.extend(t.bright);
                strong_in_dark += t.strong_in_dark;
                strong_hits += t.strong_hits;
            }
            idle_rounds = if dark.len() == before {
                idle_rounds + 1
            } else {
                0
            };
            round += 1;
        }
        self.health.lock().expect("health log poisoned").push((
            "three-level-atom".into(),
            health.0,
            health.1,
        ));
        dark.truncate(DARK_INTERVALS);
        let d = ks_statistic(&dark, |x| cdf.eval(x));
        let p = ks_p_value(d, dark.len());
        let critical = ks_critical(dark.len(), KS_ALPHA);
        let mean_bright = bright.iter().sum::<f64>() / bright.len().max(1) as f64;
        let mean_dark = dark.iter().sum::<f64>() / dark.len() as f64;
        CriterionResult {
            id: 8,
            name,
            passed: d <= critical && strong_in_dark == 0 && !bright.is_empty(),
            detail: format!(
                "strong={strong} weak={weak} intervals={} KS D={d:.5} crit={critical:.5} p={p:.3} mean-dark={mean_dark:.4} mean-bright={mean_bright:.4} strong-photons={strong_hits} strong-in-dark={strong_in_dark}",
                dark.len()
            ),
        }
    }

    fn conservation(&self) -> CriterionResult {
        let name = "conservation and monotonicity";
        // Make sure every other ensemble has contributed.
        for id in [1, 3, 4, 5, 7, 8] {
            self.criterion(id);
        }
        let log = self.health.lock().expect("health log poisoned");
        let mut total = ViolationCounts::default();
        let mut drift: f64 = 0.0;
        for (_, v, d) in log.iter() {
            add_violations(&mut total, v);
            drift = drift.max(*d);
        }
        CriterionResult {
            id: 6,
            name,
            passed: drift < 1e-9
                && total.realized_to_ready == 0
                && total.negative_weight == 0
                && total.total() == 0,
            detail: format!(
                "ensembles={} max|s-sum|={drift:.3e} realized-to-ready={} negative-weights={} other-violations={}",
                log.len(),
                total.realized_to_ready,
                total.negative_weight,
                total.total() - total.realized_to_ready - total.negative_weight
            ),
        }
    }

    fn determinism(&self) -> CriterionResult {
        let name = "determinism";
        let sc = scenario::observer();
        let seed = self.seed_for(9);
        let a = run_ensemble(&sc, TRIALS, seed, 1);
        let b = run_ensemble(&sc, TRIALS, seed, 8);
        match (a, b) {
            (Ok(a), Ok(b)) => CriterionResult {
                id: 9,
                name,
                passed: a.same_statistics(&b),
                detail: format!(
                    "observer N={TRIALS} parallelism 1 vs 8 identical={}",
                    a.same_statistics(&b)
                ),
            },
            (Err(e), _) | (_, Err(e)) => fail(9, name, e.to_string()),
        }
    }
}

struct Tracker(IntervalTracker, std::sync::Arc<crate::model::ScenarioGraph>);

impl TrajectoryObserver for Tracker {
    fn on_event(&mut self, event: &Event, _: &SystemState) {
        self.0.observe(&self.1, event);
    }
}

fn fail(id: u8, name: &'static str, detail: String) -> CriterionResult {
    CriterionResult {
        id,
        name,
        passed: false,
        detail,
    }
}
