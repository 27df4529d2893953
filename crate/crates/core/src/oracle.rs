//! Exact outcome laws by enumeration of the collapse event tree.
//!
//! Between collapses the component weights are piecewise linear in time and
//! the survival function has a closed form on every constant-rate segment.
//! A hit at time `t` starts a fresh epoch whose law depends smoothly on `t`
//! between critical times, so the tree integrates children with
//! Gauss-Legendre rules on those pieces and rescales the node masses to the
//! exact segment hit mass. Nothing here calls into the trajectory engine.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use crate::error::OracleError;
use crate::model::{Anchor, ComponentId, RateBasis, ScenarioGraph, Status, SubsystemState};
use crate::scenario::Scenario;

/// Relative size below which the unreduced weight counts as fully drained.
const DRAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Abort once this many epochs have been expanded.
    pub max_nodes: usize,
    /// Hit masses below this are not expanded and count as truncated.
    pub prune: f64,
    pub max_depth: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            max_nodes: 20_000_000,
            prune: 1e-15,
            max_depth: 256,
        }
    }
}

/// Leaves of the collapse tree keyed by collapse path.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTree {
    pub leaves: BTreeMap<Vec<ComponentId>, f64>,
    /// Mass dropped by pruning or the depth limit.
    pub truncated: f64,
    pub nodes: usize,
    /// Largest weight each component reaches on any branch of nonnegligible
    /// probability.
    pub max_weight: Vec<f64>,
}

impl EventTree {
    pub fn total(&self) -> f64 {
        self.leaves.values().sum::<f64>() + self.truncated
    }

    pub fn law(&self, sc: &Scenario) -> OutcomeLaw {
        let mut probabilities = BTreeMap::new();
        for (path, p) in &self.leaves {
            *probabilities.entry(sc.classify(path)).or_insert(0.0) += p;
        }
        OutcomeLaw {
            probabilities,
            truncated: self.truncated,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeLaw {
    pub probabilities: BTreeMap<String, f64>,
    pub truncated: f64,
}

impl OutcomeLaw {
    pub fn get(&self, label: &str) -> f64 {
        self.probabilities.get(label).copied().unwrap_or(0.0)
    }
}

pub fn outcome_law(sc: &Scenario) -> Result<OutcomeLaw, OracleError> {
    Ok(event_tree(sc)?.law(sc))
}

pub fn event_tree(sc: &Scenario) -> Result<EventTree, OracleError> {
    event_tree_with(sc, OracleOptions::default())
}

pub fn event_tree_with(sc: &Scenario, opts: OracleOptions) -> Result<EventTree, OracleError> {
    let walker = Walker::new(sc, opts)?;
    let mut out = Output {
        leaves: HashMap::new(),
        truncated: 0.0,
        nodes: 0,
        max_weight: vec![0.0; sc.graph().templates().len()],
    };
    let mut path = Vec::new();
    walker.explore(walker.initial_config(), 1.0, &mut path, &mut out)?;
    Ok(EventTree {
        leaves: out.leaves.into_iter().collect(),
        truncated: out.truncated,
        nodes: out.nodes,
        max_weight: out.max_weight,
    })
}

/// CDF of the time of the first collapse, restricted to collapses onto one
/// component. Exact on every constant-rate segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCdf {
    pieces: Vec<CdfPiece>,
    start: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct CdfPiece {
    u: f64,
    v: f64,
    base: f64,
    survival: f64,
    sigma: f64,
    p: f64,
    c: f64,
    j: f64,
}

impl PiecewiseCdf {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.start {
            return 0.0;
        }
        let mut last = 0.0;
        for piece in &self.pieces {
            if t < piece.u {
                return last;
            }
            let x = (t.min(piece.v)) - piece.u;
            let s = survival_at(piece.survival, piece.sigma, piece.p, piece.c, x);
            let value = if piece.p > 0.0 {
                piece.base + piece.j / piece.p * (piece.survival - s)
            } else {
                piece.base
            };
            if t < piece.v {
                return value;
            }
            last = value;
        }
        last
    }

    /// Total probability that the first collapse is onto this component.
    pub fn limit(&self) -> f64 {
        self.eval(f64::INFINITY)
    }

    /// Segment boundaries of the CDF.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.pieces.iter().flat_map(|p| [p.u, p.v]).collect();
        v.dedup();
        v
    }
}

/// First-collapse CDF for `component` from the scenario's initial state.
pub fn hit_time_cdf(sc: &Scenario, component: &str) -> Result<PiecewiseCdf, OracleError> {
    let target = lookup(sc, component)?;
    let walker = Walker::new_unchecked(sc, OracleOptions::default());
    walker.cdf(walker.initial_config(), target)
}

/// First-collapse CDF for `target` in the epoch that starts when `start` has
/// just been realized at time `at`.
pub fn hit_time_cdf_from(
    sc: &Scenario,
    start: &str,
    at: f64,
    target: &str,
) -> Result<PiecewiseCdf, OracleError> {
    let start = lookup(sc, start)?;
    let target = lookup(sc, target)?;
    let walker = Walker::new_unchecked(sc, OracleOptions::default());
    let states = realized(&sc.graph().template(start).states);
    walker.cdf(walker.collapsed_config(start, states, at), target)
}

fn lookup(sc: &Scenario, name: &str) -> Result<ComponentId, OracleError> {
    sc.component_id(name)
        .ok_or_else(|| OracleError::UnknownComponent(name.to_string()))
}

fn realized(states: &[SubsystemState]) -> Vec<SubsystemState> {
    states
        .iter()
        .map(|s| SubsystemState::new(s.object.clone(), s.label.clone(), Status::Realized))
        .collect()
}

/// `S(u + x)` on a segment with survival `s0` and unreduced weight `sigma` at `u`.
fn survival_at(s0: f64, sigma: f64, p: f64, c: f64, x: f64) -> f64 {
    if p <= 0.0 || x <= 0.0 {
        return s0;
    }
    if sigma <= 0.0 {
        return 0.0;
    }
    if c == 0.0 {
        return s0 * (-p * x / sigma).exp();
    }
    let ratio = 1.0 - c * x / sigma;
    if ratio <= DRAIN_EPS {
        return 0.0;
    }
    s0 * (p / c * ratio.ln()).exp()
}

fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    (1..=m)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn rule(m: usize) -> &'static [(f64, f64)] {
    static LOW: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    static HIGH: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    match m {
        6 => LOW.get_or_init(|| gauss_legendre(6)),
        _ => HIGH.get_or_init(|| gauss_legendre(16)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Waiting,
    Flowing,
    Stopped,
    Over,
}

#[derive(Debug, Clone)]
struct Config {
    states: Vec<Option<Vec<SubsystemState>>>,
    weight: Vec<f64>,
    armed: Vec<f64>,
    time: f64,
}

#[derive(Debug, Clone)]
struct Segment {
    u: f64,
    v: f64,
    survival: f64,
    sigma: f64,
    p: f64,
    c: f64,
    /// Ready components with positive net inflow.
    hits: Vec<(ComponentId, f64)>,
}

struct Epoch {
    segments: Vec<Segment>,
    final_survival: f64,
    states: Vec<Option<Vec<SubsystemState>>>,
    max_weight: Vec<f64>,
}

struct Output {
    leaves: HashMap<Vec<ComponentId>, f64>,
    truncated: f64,
    nodes: usize,
    max_weight: Vec<f64>,
}

struct Walker<'a> {
    graph: &'a ScenarioGraph,
    horizon: f64,
    critical: Vec<f64>,
    opts: OracleOptions,
}

impl<'a> Walker<'a> {
    fn new(sc: &'a Scenario, opts: OracleOptions) -> Result<Self, OracleError> {
        if sc.horizon().is_none() && sc.is_recurrent() {
            return Err(OracleError::HorizonRequired);
        }
        Ok(Self::new_unchecked(sc, opts))
    }

    fn new_unchecked(sc: &'a Scenario, opts: OracleOptions) -> Self {
        let graph = sc.graph().as_ref();
        let horizon = sc.horizon().unwrap_or(f64::INFINITY);
        let mut fixed: Vec<f64> = graph
            .edges()
            .iter()
            .filter(|e| e.anchor == Anchor::Absolute)
            .flat_map(|e| e.profile.breakpoints().collect::<Vec<_>>())
            .collect();
        if horizon.is_finite() {
            fixed.push(horizon);
        }
        let offsets: Vec<f64> = graph
            .edges()
            .iter()
            .filter(|e| e.anchor == Anchor::Source)
            .flat_map(|e| e.profile.breakpoints().collect::<Vec<_>>())
            .filter(|&d| d > 0.0)
            .collect();
        let mut critical = fixed.clone();
        for &b in &fixed {
            for &d in &offsets {
                critical.push(b - d);
            }
        }
        critical.sort_by(f64::total_cmp);
        critical.dedup();
        Self {
            graph,
            horizon,
            critical,
            opts,
        }
    }

    fn initial_config(&self) -> Config {
        let n = self.graph.templates().len();
        let mut cfg = Config {
            states: vec![None; n],
            weight: vec![0.0; n],
            armed: vec![0.0; n],
            time: 0.0,
        };
        for (i, t) in self.graph.templates().iter().enumerate() {
            if let Some(w) = t.initial_weight {
                let mut states = t.states.clone();
                states.sort_by(|a, b| a.object.cmp(&b.object));
                cfg.states[i] = Some(states);
                cfg.weight[i] = w;
            }
        }
        cfg
    }

    fn collapsed_config(&self, id: ComponentId, states: Vec<SubsystemState>, t: f64) -> Config {
        let n = self.graph.templates().len();
        let mut cfg = Config {
            states: vec![None; n],
            weight: vec![0.0; n],
            armed: vec![t; n],
            time: t,
        };
        cfg.states[id.index()] = Some(states);
        cfg.weight[id.index()] = 1.0;
        cfg
    }

    fn blocks(&self, a: &[SubsystemState], b: &[SubsystemState]) -> bool {
        self.graph.blocking()
            && a.iter().any(|x| {
                x.status == Status::Ready
                    && b.iter()
                        .any(|y| y.status == Status::Ready && y.object == x.object)
            })
    }

    /// Builds the piecewise-constant picture of one inter-collapse epoch.
    fn epoch(&self, mut cfg: Config) -> Result<Epoch, OracleError> {
        let edges = self.graph.edges();
        let mut stage = vec![Stage::Waiting; edges.len()];
        let mut scale = vec![0.0; edges.len()];
        let s_total: f64 = cfg.weight.iter().sum();
        let mut survival = 1.0;
        let mut segments = Vec::new();
        let mut max_weight = cfg.weight.clone();
        loop {
            let now = cfg.time;
            // Switch interactions on and off until nothing new appears.
            loop {
                let mut grew = false;
                for (k, e) in edges.iter().enumerate() {
                    let src = e.source.index();
                    let Some(src_states) = cfg.states[src].clone() else {
                        continue;
                    };
                    let Some((a, b)) = e.profile.window() else {
                        stage[k] = Stage::Over;
                        continue;
                    };
                    let off = match e.anchor {
                        Anchor::Absolute => 0.0,
                        Anchor::Source => cfg.armed[src],
                    };
                    let (a, b) = (a + off, b + off);
                    match stage[k] {
                        Stage::Waiting if now >= b => stage[k] = Stage::Over,
                        Stage::Waiting if now >= a => {
                            scale[k] = match e.basis {
                                RateBasis::System => s_total,
                                RateBasis::SourceWeight => cfg.weight[src],
                            };
                            let tgt = e.target.index();
                            let target_states = match &cfg.states[tgt] {
                                Some(s) => s.clone(),
                                None => self
                                    .graph
                                    .template(e.target)
                                    .instantiate_from(&src_states, e.creates_ready),
                            };
                            if self.blocks(&src_states, &target_states) {
                                stage[k] = Stage::Stopped;
                            } else {
                                stage[k] = Stage::Flowing;
                                if cfg.states[tgt].is_none() {
                                    let mut sorted = target_states;
                                    sorted.sort_by(|x, y| x.object.cmp(&y.object));
                                    cfg.states[tgt] = Some(sorted);
                                    cfg.weight[tgt] = 0.0;
                                    cfg.armed[tgt] = now;
                                    for (q, f) in edges.iter().enumerate() {
                                        if f.source == e.target {
                                            stage[q] = Stage::Waiting;
                                        }
                                    }
                                    grew = true;
                                }
                            }
                        }
                        Stage::Flowing | Stage::Stopped if now >= b => stage[k] = Stage::Over,
                        _ => {}
                    }
                }
                if !grew {
                    break;
                }
            }

            // Next time anything changes.
            let mut next = self.horizon;
            for (k, e) in edges.iter().enumerate() {
                if cfg.states[e.source.index()].is_none() {
                    continue;
                }
                let off = match e.anchor {
                    Anchor::Absolute => 0.0,
                    Anchor::Source => cfg.armed[e.source.index()],
                };
                let candidates: Vec<f64> = match stage[k] {
                    Stage::Waiting => e
                        .profile
                        .window()
                        .map(|(a, _)| a + off)
                        .into_iter()
                        .collect(),
                    Stage::Stopped => e
                        .profile
                        .window()
                        .map(|(_, b)| b + off)
                        .into_iter()
                        .collect(),
                    Stage::Flowing => e.profile.breakpoints().map(|x| x + off).collect(),
                    Stage::Over => Vec::new(),
                };
                for x in candidates {
                    if x > now && x < next {
                        next = x;
                    }
                }
            }
            if !(next > now) || next.is_infinite() || survival == 0.0 {
                break;
            }

            let n = cfg.states.len();
            let mut inflow = vec![0.0; n];
            let mut outflow = vec![0.0; n];
            let mut rates = vec![0.0; edges.len()];
            for (k, e) in edges.iter().enumerate() {
                if stage[k] != Stage::Flowing {
                    continue;
                }
                let (src, tgt) = (e.source.index(), e.target.index());
                if cfg.states[src].is_none() || cfg.states[tgt].is_none() {
                    continue;
                }
                let off = match e.anchor {
                    Anchor::Absolute => 0.0,
                    Anchor::Source => cfg.armed[src],
                };
                // Midpoint: `now - off` can round below a breakpoint.
                let r = e.profile.rate_at(0.5 * (now + next) - off) * scale[k];
                rates[k] = r;
                outflow[src] += r;
                inflow[tgt] += r;
            }
            let mut sigma = 0.0;
            let (mut p, mut c) = (0.0, 0.0);
            let mut hits = Vec::new();
            for i in 0..n {
                let Some(states) = &cfg.states[i] else {
                    continue;
                };
                if states.iter().any(|s| s.status == Status::Ready) {
                    let net = inflow[i] - outflow[i];
                    c += net;
                    if net > 0.0 {
                        p += net;
                        hits.push((ComponentId::from_index(i), net));
                    }
                } else {
                    sigma += cfg.weight[i];
                }
            }
            let len = next - now;
            let end_survival = survival_at(survival, sigma, p, c, len);
            segments.push(Segment {
                u: now,
                v: next,
                survival,
                sigma,
                p,
                c,
                hits,
            });
            for (k, e) in edges.iter().enumerate() {
                if rates[k] > 0.0 {
                    cfg.weight[e.source.index()] -= rates[k] * len;
                    cfg.weight[e.target.index()] += rates[k] * len;
                }
            }
            for i in 0..n {
                if cfg.weight[i] < 0.0 {
                    if cfg.weight[i] < -1e-12 * s_total.max(1.0) {
                        return Err(OracleError::NegativeWeight {
                            component: self.graph.component_name(ComponentId::from_index(i)).into(),
                            weight: cfg.weight[i],
                            time: next,
                        });
                    }
                    cfg.weight[i] = 0.0;
                }
                if end_survival > 0.0 || survival > 0.0 {
                    max_weight[i] = max_weight[i].max(cfg.weight[i]);
                }
            }
            survival = end_survival;
            cfg.time = next;
        }
        Ok(Epoch {
            segments,
            final_survival: survival,
            states: cfg.states,
            max_weight,
        })
    }

    fn explore(
        &self,
        cfg: Config,
        mass: f64,
        path: &mut Vec<ComponentId>,
        out: &mut Output,
    ) -> Result<(), OracleError> {
        out.nodes += 1;
        if out.nodes > self.opts.max_nodes {
            return Err(OracleError::TreeTooLarge(self.opts.max_nodes));
        }
        if path.len() >= self.opts.max_depth {
            out.truncated += mass;
            return Ok(());
        }
        let epoch = self.epoch(cfg)?;
        for (m, w) in out.max_weight.iter_mut().zip(&epoch.max_weight) {
            if mass > self.opts.prune {
                *m = m.max(*w);
            }
        }
        if epoch.final_survival > 0.0 {
            *out.leaves.entry(path.clone()).or_insert(0.0) += mass * epoch.final_survival;
        }
        for seg in &epoch.segments {
            if seg.p <= 0.0 {
                continue;
            }
            let seg_end = survival_at(seg.survival, seg.sigma, seg.p, seg.c, seg.v - seg.u);
            let seg_mass = mass * (seg.survival - seg_end);
            if seg_mass <= 0.0 {
                continue;
            }
            let order = if (seg.p - seg.c).abs() <= 1e-12 * seg.p {
                6
            } else {
                16
            };
            // Subdivide at times where the children's structure can change.
            let mut cuts = vec![seg.u];
            cuts.extend(
                self.critical
                    .iter()
                    .copied()
                    .filter(|&x| x > seg.u && x < seg.v),
            );
            cuts.push(seg.v);
            for &(id, j) in &seg.hits {
                let share = j / seg.p;
                if seg_mass * share <= self.opts.prune {
                    out.truncated += seg_mass * share;
                    continue;
                }
                let states = realized(
                    epoch.states[id.index()]
                        .as_ref()
                        .expect("hit target exists"),
                );
                path.push(id);
                for win in cuts.windows(2) {
                    let (a, b) = (win[0], win[1]);
                    let s_a = survival_at(seg.survival, seg.sigma, seg.p, seg.c, a - seg.u);
                    let s_b = survival_at(seg.survival, seg.sigma, seg.p, seg.c, b - seg.u);
                    let exact = mass * share * (s_a - s_b);
                    if exact <= 0.0 {
                        continue;
                    }
                    if exact <= self.opts.prune {
                        out.truncated += exact;
                        continue;
                    }
                    let nodes = rule(order);
                    let half = 0.5 * (b - a);
                    let mid = 0.5 * (a + b);
                    let dens: Vec<(f64, f64)> = nodes
                        .iter()
                        .map(|&(x, w)| {
                            let t = mid + half * x;
                            let s = survival_at(seg.survival, seg.sigma, seg.p, seg.c, t - seg.u);
                            let sigma_t = seg.sigma - seg.c * (t - seg.u);
                            let f = if sigma_t > 0.0 { s * j / sigma_t } else { 0.0 };
                            (t, w * half * f)
                        })
                        .collect();
                    let raw: f64 = dens.iter().map(|&(_, w)| w).sum();
                    if !(raw > 0.0) {
                        // Density concentrated where sigma vanishes: give the
                        // mass to the right end of the piece.
                        let child = self.collapsed_config(id, states.clone(), b);
                        self.explore(child, exact, path, out)?;
                        continue;
                    }
                    for (t, w) in dens {
                        let child = self.collapsed_config(id, states.clone(), t);
                        self.explore(child, exact * w / raw, path, out)?;
                    }
                }
                path.pop();
            }
        }
        Ok(())
    }

    fn cdf(&self, cfg: Config, target: ComponentId) -> Result<PiecewiseCdf, OracleError> {
        let start = cfg.time;
        let epoch = self.epoch(cfg)?;
        let mut base = 0.0;
        let mut pieces = Vec::with_capacity(epoch.segments.len());
        for seg in &epoch.segments {
            let j = seg
                .hits
                .iter()
                .find(|(id, _)| *id == target)
                .map_or(0.0, |&(_, j)| j);
            pieces.push(CdfPiece {
                u: seg.u,
                v: seg.v,
                base,
                survival: seg.survival,
                sigma: seg.sigma,
                p: seg.p,
                c: seg.c,
                j,
            });
            if seg.p > 0.0 {
                let end = survival_at(seg.survival, seg.sigma, seg.p, seg.c, seg.v - seg.u);
                base += j / seg.p * (seg.survival - end);
            }
        }
        Ok(PiecewiseCdf { pieces, start })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{self, PrimaryOptions};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for m in [6, 16] {
            let nodes = gauss_legendre(m);
            let total: f64 = nodes.iter().map(|&(_, w)| w).sum();
            assert!(close(total, 2.0, 1e-14));
            let deg = 2 * m - 1;
            let integral: f64 = nodes.iter().map(|&(x, w)| w * x.powi(deg as i32 - 1)).sum();
            assert!(close(integral, 2.0 / deg as f64, 1e-13), "{m}");
        }
    }

    #[test]
    fn primary_only_law() {
        let law = outcome_law(&scenario::primary_only()).unwrap();
        assert!(close(law.get("capture"), 0.6, 1e-12));
        assert!(close(law.get("no-capture"), 0.4, 1e-12));
    }

    #[test]
    fn zero_total_never_captures() {
        let sc = scenario::primary_only_with(PrimaryOptions {
            total: 0.0,
            ..Default::default()
        })
        .unwrap();
        let law = outcome_law(&sc).unwrap();
        assert_eq!(law.get("no-capture"), 1.0);
        assert_eq!(law.get("capture"), 0.0);
    }

    #[test]
    fn split_profile_gives_same_law() {
        let sc = scenario::primary_only_with(PrimaryOptions {
            split: true,
            ..Default::default()
        })
        .unwrap();
        let law = outcome_law(&sc).unwrap();
        assert!(close(law.get("capture"), 0.6, 1e-12));
    }

    #[test]
    fn observer_law() {
        let sc = scenario::observer();
        let tree = event_tree(&sc).unwrap();
        assert!(close(tree.total(), 1.0, 1e-12));
        let law = tree.law(&sc);
        assert!(
            close(law.get("capture-at-first-look"), 0.5, 1e-9),
            "{law:?}"
        );
        assert!(close(law.get("ground-then-capture"), 0.1, 1e-9), "{law:?}");
        assert!(close(law.get("ground-no-capture"), 0.4, 1e-9), "{law:?}");
        let fourth = sc.component_id("D1'-B1").unwrap();
        // Created only on the capture branch, where it takes everything.
        assert!(tree.max_weight[fourth.index()] > 0.99);
    }

    #[test]
    fn two_observer_laws_match_declared() {
        for sc in [scenario::two_observers(), scenario::two_observers_late()] {
            let law = outcome_law(&sc).unwrap();
            for (label, &p) in sc.declared().unwrap() {
                assert!(
                    close(law.get(label), p, 1e-9),
                    "{}: {label} {law:?}",
                    sc.name()
                );
            }
        }
    }

    #[test]
    fn unblocked_second_look_feeds_the_fourth_component() {
        let sc = scenario::two_observers();
        let fourth = sc.component_id("D1'-B1-B1").unwrap();
        let blocked = event_tree(&sc).unwrap();
        let open = event_tree(&sc.with_blocking(false)).unwrap();
        // With blocking the component is only ever reached from realized
        // sources; without it the phantom feeds it as well.
        let from_phantom = |tree: &EventTree| {
            tree.leaves
                .iter()
                .filter(|(p, _)| p.len() == 2 && p[1] == fourth)
                .map(|(_, m)| m)
                .sum::<f64>()
        };
        assert_eq!(from_phantom(&blocked), 0.0);
        assert!(from_phantom(&open) > 0.0);
    }

    #[test]
    fn chain_is_sequential_only_with_blocking() {
        let sc = scenario::counter_chain(5).unwrap();
        let law = outcome_law(&sc).unwrap();
        assert!(close(
            law.get("reading-1>reading-2>reading-3>reading-4"),
            1.0,
            1e-9
        ));
        let open = outcome_law(&sc.with_blocking(false)).unwrap();
        let skipping: f64 = open
            .probabilities
            .iter()
            .filter(|(l, _)| !l.starts_with("reading-1>"))
            .map(|(_, p)| p)
            .sum();
        assert!(skipping > 0.1, "{open:?}");
        let first_is_one: f64 = open
            .probabilities
            .iter()
            .filter(|(l, _)| l.starts_with("reading-1"))
            .map(|(_, p)| p)
            .sum();
        assert!(close(first_is_one, 0.5, 1e-6), "{first_is_one}");
    }

    #[test]
    fn recurrent_scenario_needs_horizon() {
        let sc = scenario::three_level_atom(100.0, 1.0)
            .unwrap()
            .with_horizon(None)
            .unwrap();
        assert_eq!(outcome_law(&sc), Err(OracleError::HorizonRequired));
    }

    #[test]
    fn short_horizon_atom_law_sums_to_one() {
        let sc = scenario::three_level_atom(20.0, 1.0)
            .unwrap()
            .with_horizon(Some(0.01))
            .unwrap();
        let tree = event_tree(&sc).unwrap();
        assert!(close(tree.total(), 1.0, 1e-9), "{}", tree.total());
    }

    #[test]
    fn constant_rate_cdf_is_linear() {
        let sc = scenario::primary_only();
        let cdf = hit_time_cdf(&sc, "D1").unwrap();
        for t in [0.0, 1.0, 2.5, 7.0, 10.0] {
            assert!(close(cdf.eval(t), 0.06 * t, 1e-12), "{t}");
        }
        assert!(close(cdf.eval(15.0), 0.6, 1e-12));
        let never = hit_time_cdf(&sc, "psi-D0").unwrap();
        assert_eq!(never.eval(5.0), 0.0);
        assert!(matches!(
            hit_time_cdf(&sc, "nope"),
            Err(OracleError::UnknownComponent(_))
        ));
    }

    #[test]
    fn ground_row_hit_is_certain_inside_the_look() {
        let sc = scenario::observer();
        let t_ob = sc.schedule()["t_ob"];
        let w = sc.schedule()["observation_width"];
        let cdf = hit_time_cdf(&sc, "psi'-D0-B0").unwrap();
        assert_eq!(cdf.eval(t_ob), 0.0);
        assert!(close(cdf.eval(t_ob + w), 0.5, 1e-12));
        assert!(close(cdf.limit(), 0.5, 1e-12));
    }

    #[test]
    fn dark_duration_is_uniform() {
        let sc = scenario::three_level_atom(100.0, 1.0).unwrap();
        let cdf = hit_time_cdf_from(&sc, "dark-0", 3.0, "bright-1").unwrap();
        for x in [0.1, 0.5, 0.9] {
            assert!(close(cdf.eval(3.0 + x), x, 1e-12));
        }
        assert!(close(cdf.limit(), 1.0, 1e-12));
    }

    #[test]
    fn three_sink_dag_law() {
        use crate::config::{ClassifierSpec, ComponentSpec, EdgeSpec, ScenarioSpec, StateSpec};
        let (a, b, c) = (0.2, 0.35, 0.15);
        let st = |l: &str, ready| StateSpec {
            object: "d".into(),
            label: l.into(),
            ready,
        };
        let comp = |id: &str, w: Option<f64>, ready| ComponentSpec {
            id: id.into(),
            initial_weight: w,
            states: vec![st(id, ready)],
        };
        let sc = Scenario::from_spec(ScenarioSpec {
            name: "sinks".into(),
            objects: vec!["d".into()],
            horizon: None,
            blocking: true,
            schedule: Default::default(),
            declared: Default::default(),
            classifier: ClassifierSpec::Path,
            components: vec![
                comp("root", Some(1.0), false),
                comp("a", None, true),
                comp("b", None, true),
                comp("c", None, true),
            ],
            edges: vec![
                EdgeSpec::new("ea", "root", "a").carrying(0.0, 3.0, a),
                EdgeSpec::new("eb", "root", "b")
                    .piece(1.0, 2.0, b / 2.0)
                    .piece(2.5, 4.0, b / 3.0),
                EdgeSpec::new("ec", "root", "c").carrying(2.0, 6.0, c),
            ],
        })
        .unwrap();
        let law = outcome_law(&sc).unwrap();
        assert!(close(law.get("a"), a, 1e-12));
        assert!(close(law.get("b"), b, 1e-12));
        assert!(close(law.get("c"), c, 1e-12));
        assert!(close(law.get("none"), 1.0 - a - b - c, 1e-12));
    }
}
