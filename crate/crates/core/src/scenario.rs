//! Built-in scenarios, scenario validation, and outcome classification.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::Rng;

use crate::config::{ClassifierSpec, ComponentSpec, EdgeSpec, RuleSpec, ScenarioSpec, StateSpec};
use crate::error::{ModelError, ScenarioError};
use crate::model::{
    Anchor, ComponentId, ComponentTemplate, CurrentEdge, Event, EventKind, ObjectId, RateBasis,
    RateProfile, ScenarioGraph, Status, SubsystemState, SystemState,
};

pub const BUILTIN_NAMES: [&str; 6] = [
    "primary-only",
    "observer",
    "two-observers",
    "two-observers-late",
    "counter-chain",
    "three-level-atom",
];

/// Label for trajectories no rule matches.
pub const UNCLASSIFIED: &str = "unclassified";

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Any,
    Prefix(String),
    Exact(ComponentId),
}

#[derive(Debug, Clone, PartialEq)]
struct Rule {
    label: String,
    pattern: Vec<Token>,
}

fn matches(pattern: &[Token], path: &[ComponentId], names: &dyn Fn(ComponentId) -> String) -> bool {
    match pattern.split_first() {
        None => path.is_empty(),
        Some((Token::Any, rest)) => (0..=path.len()).any(|k| matches(rest, &path[k..], names)),
        Some((tok, rest)) => match path.split_first() {
            None => false,
            Some((&c, tail)) => {
                let ok = match tok {
                    Token::Exact(id) => *id == c,
                    Token::Prefix(p) => names(c).starts_with(p.as_str()),
                    Token::Any => unreachable!(),
                };
                ok && matches(rest, tail, names)
            }
        },
    }
}

/// Maps a collapse path to an outcome label.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    rules: Option<Vec<Rule>>,
}

impl Classifier {
    pub fn classify(&self, graph: &ScenarioGraph, path: &[ComponentId]) -> String {
        let name = |c: ComponentId| graph.component_name(c).to_string();
        match &self.rules {
            None => path_label(graph, path),
            Some(rules) => rules
                .iter()
                .find(|r| matches(&r.pattern, path, &name))
                .map_or_else(|| UNCLASSIFIED.to_string(), |r| r.label.clone()),
        }
    }

    /// Labels named by rules, in rule order; empty for path classifiers.
    pub fn labels(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.rules
            .iter()
            .flatten()
            .filter(|r| seen.insert(r.label.clone()))
            .map(|r| r.label.clone())
            .collect()
    }
}

pub fn path_label(graph: &ScenarioGraph, path: &[ComponentId]) -> String {
    if path.is_empty() {
        return "none".to_string();
    }
    path.iter()
        .map(|&c| graph.component_name(c))
        .collect::<Vec<_>>()
        .join(">")
}

/// A validated scenario: component graph, schedule, classifier and the
/// outcome law it is expected to produce, if known.
#[derive(Debug, Clone)]
pub struct Scenario {
    spec: ScenarioSpec,
    graph: Arc<ScenarioGraph>,
    classifier: Classifier,
}

fn model_err(path: String, subject: &str, e: ModelError) -> ScenarioError {
    ScenarioError::invalid(path, format!("{subject}: {e}"))
}

impl Scenario {
    pub fn from_spec(spec: ScenarioSpec) -> Result<Self, ScenarioError> {
        if spec.name.trim().is_empty() {
            return Err(ScenarioError::invalid("name", "must not be empty"));
        }
        let mut objects: Vec<ObjectId> = Vec::new();
        for (i, o) in spec.objects.iter().enumerate() {
            let id = ObjectId::new(o.as_str());
            if objects.contains(&id) {
                return Err(ScenarioError::invalid(
                    format!("objects[{i}]"),
                    format!("object `{o}` declared twice"),
                ));
            }
            objects.push(id);
        }
        let declared_objects = !objects.is_empty();

        let mut templates = Vec::with_capacity(spec.components.len());
        let mut names = BTreeMap::new();
        for (i, c) in spec.components.iter().enumerate() {
            if names.insert(c.id.as_str(), i).is_some() {
                return Err(ScenarioError::invalid(
                    format!("components[{i}].id"),
                    format!("component `{}` declared twice", c.id),
                ));
            }
            let mut states = Vec::with_capacity(c.states.len());
            for (j, s) in c.states.iter().enumerate() {
                let obj = ObjectId::new(s.object.as_str());
                if !objects.contains(&obj) {
                    if declared_objects {
                        return Err(ScenarioError::invalid(
                            format!("components[{i}].states[{j}].object"),
                            format!("unknown object `{}`", s.object),
                        ));
                    }
                    objects.push(obj.clone());
                }
                let status = if s.ready {
                    Status::Ready
                } else {
                    Status::Realized
                };
                states.push(SubsystemState::new(obj, s.label.as_str(), status));
            }
            let states = crate::model::normalize_states(states)
                .map_err(|e| model_err(format!("components[{i}].states"), &c.id, e))?;
            if let Some(w) = c.initial_weight {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(ScenarioError::invalid(
                        format!("components[{i}].initial_weight"),
                        format!("`{}`: weight must be finite and nonnegative, got {w}", c.id),
                    ));
                }
            }
            templates.push(ComponentTemplate {
                name: c.id.clone(),
                states,
                initial_weight: c.initial_weight,
            });
        }
        let initial_total: f64 = templates.iter().filter_map(|t| t.initial_weight).sum();
        if !(initial_total > 0.0) {
            return Err(ScenarioError::invalid(
                "components",
                "at least one component needs a positive initial_weight",
            ));
        }

        let mut edges = Vec::with_capacity(spec.edges.len());
        let mut edge_names = BTreeSet::new();
        for (i, e) in spec.edges.iter().enumerate() {
            let at = |field: &str| format!("edges[{i}].{field}");
            if !edge_names.insert(e.id.as_str()) {
                return Err(ScenarioError::invalid(
                    at("id"),
                    format!("edge `{}` declared twice", e.id),
                ));
            }
            let resolve = |field: &str, name: &str| {
                names
                    .get(name)
                    .map(|&k| ComponentId::from_index(k))
                    .ok_or_else(|| {
                        ScenarioError::invalid(
                            at(field),
                            format!("edge `{}` refers to unknown component `{name}`", e.id),
                        )
                    })
            };
            let source = resolve("source", &e.source)?;
            let target = resolve("target", &e.target)?;
            if source == target {
                return Err(ScenarioError::invalid(
                    at("target"),
                    format!("edge `{}` loops onto its source", e.id),
                ));
            }
            let profile = edge_profile(e, i)?;
            edges.push(CurrentEdge {
                name: e.id.clone(),
                source,
                target,
                profile,
                anchor: e.anchor,
                basis: e.basis,
                creates_ready: e.creates_ready,
            });
        }
        for (k, t) in templates.iter().enumerate() {
            let id = ComponentId::from_index(k);
            for basis in [RateBasis::System, RateBasis::SourceWeight] {
                let total: f64 = edges
                    .iter()
                    .filter(|e| e.source == id && e.basis == basis)
                    .map(|e| e.profile.total())
                    .sum();
                if total > 1.0 + 1e-9 {
                    return Err(ScenarioError::invalid(
                        format!("components[{k}]"),
                        format!(
                            "outgoing transfer totals of `{}` sum to {total}, more than 1",
                            t.name
                        ),
                    ));
                }
            }
        }

        let classifier = match &spec.classifier {
            ClassifierSpec::Path => Classifier { rules: None },
            ClassifierSpec::Rules { rules } => {
                let mut out = Vec::with_capacity(rules.len());
                for (i, r) in rules.iter().enumerate() {
                    let mut pattern = Vec::with_capacity(r.path.len());
                    for (j, tok) in r.path.iter().enumerate() {
                        pattern.push(if tok == "*" {
                            Token::Any
                        } else if let Some(p) = tok.strip_suffix('*') {
                            Token::Prefix(p.to_string())
                        } else {
                            Token::Exact(
                                names
                                    .get(tok.as_str())
                                    .map(|&k| ComponentId::from_index(k))
                                    .ok_or_else(|| {
                                        ScenarioError::invalid(
                                            format!("classifier.rules[{i}].path[{j}]"),
                                            format!("unknown component `{tok}`"),
                                        )
                                    })?,
                            )
                        });
                    }
                    out.push(Rule {
                        label: r.label.clone(),
                        pattern,
                    });
                }
                Classifier { rules: Some(out) }
            }
        };

        if !spec.declared.is_empty() {
            let mut sum = 0.0;
            for (label, &p) in &spec.declared {
                if !(0.0..=1.0).contains(&p) {
                    return Err(ScenarioError::invalid(
                        format!("declared.{label}"),
                        format!("probability {p} outside [0, 1]"),
                    ));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(ScenarioError::invalid(
                    "declared",
                    format!("declared probabilities sum to {sum}, not 1"),
                ));
            }
        }
        if let Some(h) = spec.horizon {
            if !(h.is_finite() && h > 0.0) {
                return Err(ScenarioError::invalid(
                    "horizon",
                    format!("horizon must be positive and finite, got {h}"),
                ));
            }
        }
        for (k, v) in &spec.schedule {
            if !v.is_finite() {
                return Err(ScenarioError::invalid(
                    format!("schedule.{k}"),
                    "must be finite",
                ));
            }
        }

        let graph = Arc::new(ScenarioGraph {
            objects,
            templates,
            edges,
            blocking: spec.blocking,
        });
        Ok(Self {
            spec,
            graph,
            classifier,
        })
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn graph(&self) -> &Arc<ScenarioGraph> {
        &self.graph
    }

    pub fn component_id(&self, name: &str) -> Option<ComponentId> {
        self.graph.component_id(name)
    }

    pub fn schedule(&self) -> &BTreeMap<String, f64> {
        &self.spec.schedule
    }

    pub fn horizon(&self) -> Option<f64> {
        self.spec.horizon
    }

    /// Declared outcome law, if the scenario carries one.
    pub fn declared(&self) -> Option<&BTreeMap<String, f64>> {
        (!self.spec.declared.is_empty()).then_some(&self.spec.declared)
    }

    pub fn classifier(&self) -> &Classifier {
        &self.classifier
    }

    pub fn classify(&self, path: &[ComponentId]) -> String {
        self.classifier.classify(&self.graph, path)
    }

    pub fn initial_state(&self) -> SystemState {
        SystemState::initial(self.graph.clone(), 0.0)
            .expect("validated scenarios have valid initial components")
    }

    pub fn with_horizon(&self, horizon: Option<f64>) -> Result<Self, ScenarioError> {
        let mut spec = self.spec.clone();
        spec.horizon = horizon;
        Self::from_spec(spec)
    }

    /// Copy with transition blocking switched on or off. Declared
    /// probabilities are dropped when blocking is disabled.
    pub fn with_blocking(&self, blocking: bool) -> Self {
        let mut spec = self.spec.clone();
        spec.blocking = blocking;
        if !blocking {
            spec.declared.clear();
        }
        Self::from_spec(spec).expect("only the blocking flag changed")
    }

    /// True if the edge graph has a cycle, so collapses can recur forever.
    pub fn is_recurrent(&self) -> bool {
        let n = self.graph.templates.len();
        let mut adj = vec![Vec::new(); n];
        for e in &self.graph.edges {
            adj[e.source.index()].push(e.target.index());
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut mark = vec![0u8; n];
        fn visit(v: usize, adj: &[Vec<usize>], mark: &mut [u8]) -> bool {
            mark[v] = 1;
            for &w in &adj[v] {
                if mark[w] == 1 || (mark[w] == 0 && visit(w, adj, mark)) {
                    return true;
                }
            }
            mark[v] = 2;
            false
        }
        (0..n).any(|v| mark[v] == 0 && visit(v, &adj, &mut mark))
    }
}

fn edge_profile(e: &EdgeSpec, i: usize) -> Result<RateProfile, ScenarioError> {
    let at = |field: String| format!("edges[{i}].{field}");
    match (e.window, e.total, e.pieces.is_empty()) {
        (Some([a, b]), Some(total), true) => {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(ScenarioError::invalid(
                    at("window".into()),
                    format!("edge `{}`: window [{a}, {b}] is empty or inverted", e.id),
                ));
            }
            if !(total.is_finite() && total >= 0.0) {
                return Err(ScenarioError::invalid(
                    at("total".into()),
                    format!("edge `{}`: total {total} is negative", e.id),
                ));
            }
            RateProfile::constant_total(a, b, total)
                .map_err(|err| model_err(at("window".into()), &format!("edge `{}`", e.id), err))
        }
        (None, None, false) => RateProfile::new(e.pieces.clone()).map_err(|err| {
            let field = match &err {
                ModelError::InvertedWindow { piece, .. } => format!("pieces[{piece}].end"),
                ModelError::NegativeRate { piece, .. } => format!("pieces[{piece}].rate"),
                ModelError::OverlappingPieces(piece) => format!("pieces[{piece}].start"),
                _ => "pieces".to_string(),
            };
            model_err(at(field), &format!("edge `{}`", e.id), err)
        }),
        _ => Err(ScenarioError::invalid(
            format!("edges[{i}]"),
            format!(
                "edge `{}` needs either `pieces` or both `window` and `total`",
                e.id
            ),
        )),
    }
}

fn state(object: &str, label: &str, ready: bool) -> StateSpec {
    StateSpec {
        object: object.into(),
        label: label.into(),
        ready,
    }
}

fn component(id: &str, weight: Option<f64>, states: Vec<StateSpec>) -> ComponentSpec {
    ComponentSpec {
        id: id.into(),
        initial_weight: weight,
        states,
    }
}

fn rules(list: &[(&str, &[&str])]) -> ClassifierSpec {
    ClassifierSpec::Rules {
        rules: list.iter().map(|(l, p)| RuleSpec::new(l, p)).collect(),
    }
}

fn declared(list: &[(&str, f64)]) -> BTreeMap<String, f64> {
    list.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    match name {
        "primary-only" => Ok(primary_only()),
        "observer" => Ok(observer()),
        "two-observers" => Ok(two_observers()),
        "two-observers-late" => Ok(two_observers_late()),
        "counter-chain" => counter_chain(5),
        "three-level-atom" => three_level_atom(100.0, 1.0),
        _ => Err(ScenarioError::UnknownBuiltin(name.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimaryOptions {
    /// Mass moved into the capture component over the window.
    pub total: f64,
    pub window_end: f64,
    /// Carry the total in two unequal constant pieces instead of one.
    pub split: bool,
}

impl Default for PrimaryOptions {
    fn default() -> Self {
        Self {
            total: 0.6,
            window_end: 10.0,
            split: false,
        }
    }
}

pub fn primary_only() -> Scenario {
    primary_only_with(PrimaryOptions::default()).expect("default primary scenario is valid")
}

pub fn primary_only_with(opts: PrimaryOptions) -> Result<Scenario, ScenarioError> {
    let t = opts.window_end;
    let mut capture = EdgeSpec::new("capture", "psi-D0", "D1");
    capture = if opts.split {
        let mid = 0.4 * t;
        capture.piece(0.0, mid, opts.total / 3.0 / mid).piece(
            mid,
            t,
            2.0 * opts.total / 3.0 / (t - mid),
        )
    } else {
        capture.piece(0.0, t, opts.total / t)
    };
    Scenario::from_spec(ScenarioSpec {
        name: "primary-only".into(),
        objects: vec!["particle".into(), "detector".into()],
        horizon: None,
        blocking: true,
        schedule: BTreeMap::new(),
        declared: declared(&[("capture", opts.total), ("no-capture", 1.0 - opts.total)]),
        classifier: rules(&[("capture", &["D1"]), ("no-capture", &[])]),
        components: vec![
            component(
                "psi-D0",
                Some(1.0),
                vec![
                    state("particle", "psi", false),
                    state("detector", "D0", false),
                ],
            ),
            component("D1", None, vec![state("detector", "D1", true)]),
        ],
        edges: vec![capture],
    })
}

/// Timing of the observer scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverOptions {
    /// End of the primary window.
    pub window_end: f64,
    /// Total primary transfer.
    pub total: f64,
    /// Primary transfer completed when the observer looks.
    pub before_look: f64,
    /// Duration of each physiological interaction.
    pub look_width: f64,
    /// Keep the primary current flowing during the look.
    pub overlap: bool,
}

impl Default for ObserverOptions {
    fn default() -> Self {
        Self {
            window_end: 10.0,
            total: 0.6,
            before_look: 0.5,
            look_width: 0.01,
            overlap: false,
        }
    }
}

fn observer_base_components(second: bool) -> Vec<ComponentSpec> {
    let mut x = vec![state("observer", "X", false)];
    if second {
        x.push(state("observer2", "X", false));
    }
    let with_x = |mut v: Vec<StateSpec>| {
        v.extend(x.iter().cloned());
        v
    };
    vec![
        component(
            "psi-D0-X",
            Some(1.0),
            with_x(vec![
                state("particle", "psi", false),
                state("detector", "D0", false),
            ]),
        ),
        component("D1-X", None, with_x(vec![state("detector", "D1", true)])),
        component(
            "psi'-D0-B0",
            None,
            vec![
                state("particle", "psi'", true),
                state("detector", "D0", true),
                state("observer", "B0", true),
            ],
        ),
        component(
            "D1'-B1",
            None,
            vec![
                state("detector", "D1'", true),
                state("observer", "B1", true),
            ],
        ),
        component(
            "D1-B1",
            None,
            vec![state("detector", "D1", true), state("observer", "B1", true)],
        ),
    ]
}

pub fn observer() -> Scenario {
    observer_with(ObserverOptions::default()).expect("default observer scenario is valid")
}

pub fn observer_with(o: ObserverOptions) -> Result<Scenario, ScenarioError> {
    let rate = o.total / o.window_end;
    let t_ob = o.before_look / rate;
    let w = o.look_width;
    let after = t_ob + w;
    if !(after < o.window_end) {
        return Err(ScenarioError::invalid(
            "look_width",
            "the look must end inside the primary window",
        ));
    }
    let remaining = o.total - o.before_look;
    let (primary, ground_fraction) = if o.overlap {
        (
            EdgeSpec::new("primary", "psi-D0-X", "D1-X").piece(0.0, o.window_end, rate),
            1.0 - rate * w / (1.0 - o.before_look),
        )
    } else {
        (
            EdgeSpec::new("primary", "psi-D0-X", "D1-X")
                .piece(0.0, t_ob, rate)
                .piece(after, o.window_end, remaining / (o.window_end - after)),
            1.0,
        )
    };
    // Conditional capture probability once the ground state has been seen.
    let residual = remaining / (1.0 - o.before_look);
    let mut schedule = BTreeMap::new();
    schedule.insert("t_ob".to_string(), t_ob);
    schedule.insert("observation_width".to_string(), w);
    schedule.insert("window_end".to_string(), o.window_end);
    let mut classifier = vec![
        ("capture-at-first-look", &["D1-X", "D1'-B1"][..]),
        ("ground-then-capture", &["psi'-D0-B0", "D1-B1"][..]),
        ("ground-no-capture", &["psi'-D0-B0"][..]),
    ];
    if o.overlap {
        classifier.push(("capture-during-look", &["D1-X"][..]));
    }
    let declared_law = if o.overlap {
        BTreeMap::new()
    } else {
        declared(&[
            ("capture-at-first-look", o.before_look),
            ("ground-then-capture", remaining),
            ("ground-no-capture", 1.0 - o.total),
        ])
    };
    Scenario::from_spec(ScenarioSpec {
        name: "observer".into(),
        objects: vec!["particle".into(), "detector".into(), "observer".into()],
        horizon: None,
        blocking: true,
        schedule,
        declared: declared_law,
        classifier: rules(&classifier),
        components: observer_base_components(false),
        edges: vec![
            primary,
            EdgeSpec::new("look-capture", "D1-X", "D1'-B1")
                .piece(t_ob, after, 1.0 / w)
                .basis(RateBasis::SourceWeight),
            EdgeSpec::new("look-ground", "psi-D0-X", "psi'-D0-B0")
                .piece(t_ob, after, ground_fraction / w)
                .basis(RateBasis::SourceWeight),
            EdgeSpec::new("residual", "psi'-D0-B0", "D1-B1").piece(
                after,
                o.window_end,
                residual / (o.window_end - after),
            ),
        ],
    })
}

pub fn two_observers() -> Scenario {
    two_observers_with(9.0).expect("default two-observer scenario is valid")
}

/// Second observer arriving after the primary window has closed.
pub fn two_observers_late() -> Scenario {
    let mut sc = two_observers_with(11.0).expect("late two-observer scenario is valid");
    sc.spec.name = "two-observers-late".into();
    sc
}

/// Two observers; the second looks at `second_look`.
pub fn two_observers_with(second_look: f64) -> Result<Scenario, ScenarioError> {
    let o = ObserverOptions::default();
    let rate = o.total / o.window_end;
    let t_ob = o.before_look / rate;
    let w = o.look_width;
    let t_end = o.window_end;
    let remaining = o.total - o.before_look;
    // Residual capture mass per unit time, as a fraction of the ground branch.
    let residual = remaining / (1.0 - o.before_look);
    if !(second_look > t_ob + w) {
        return Err(ScenarioError::invalid(
            "second_look",
            "the second observer must look after the first",
        ));
    }
    let inside = second_look + w < t_end;
    if !inside && second_look < t_end {
        return Err(ScenarioError::invalid(
            "second_look",
            "the second look must fit inside the primary window or follow it",
        ));
    }
    let mut components = observer_base_components(true);
    // The ground-branch rows also carry the untouched second observer.
    for c in &mut components[2..] {
        c.states.push(state("observer2", "X", false));
    }
    components.extend([
        component(
            "psi'-D0-B0-B0",
            None,
            vec![
                state("particle", "psi'", true),
                state("detector", "D0", true),
                state("observer", "B0", true),
                state("observer2", "B0", true),
            ],
        ),
        component(
            "D1'-B1-B1",
            None,
            vec![
                state("detector", "D1'", true),
                state("observer", "B1", true),
                state("observer2", "B1", true),
            ],
        ),
        component(
            "D1-B1-B1",
            None,
            vec![
                state("detector", "D1", true),
                state("observer", "B1", true),
                state("observer2", "B1", true),
            ],
        ),
    ]);
    let after = t_ob + w;
    let after2 = second_look + w;
    let mut edges = vec![
        EdgeSpec::new("primary", "psi-D0-X", "D1-X")
            .piece(0.0, t_ob, rate)
            .piece(after, t_end, remaining / (t_end - after)),
        EdgeSpec::new("look-capture", "D1-X", "D1'-B1")
            .piece(t_ob, after, 1.0 / w)
            .basis(RateBasis::SourceWeight),
        EdgeSpec::new("look-ground", "psi-D0-X", "psi'-D0-B0")
            .piece(t_ob, after, 1.0 / w)
            .basis(RateBasis::SourceWeight),
    ];
    let mut schedule = BTreeMap::new();
    schedule.insert("t_ob".to_string(), t_ob);
    schedule.insert("t_ob2".to_string(), second_look);
    schedule.insert("observation_width".to_string(), w);
    schedule.insert("window_end".to_string(), t_end);
    let law = if inside {
        let rho = residual / (t_end - t_ob - 2.0 * w);
        let early = rho * (second_look - after);
        edges.push(
            EdgeSpec::new("residual", "psi'-D0-B0", "D1-B1")
                .piece(after, second_look, rho)
                .piece(after2, t_end, rho),
        );
        edges.push(
            EdgeSpec::new("residual2", "psi'-D0-B0-B0", "D1-B1-B1").piece(
                after2,
                t_end,
                rho / (1.0 - early),
            ),
        );
        let ground = 1.0 - o.before_look;
        declared(&[
            ("capture-at-first-look", o.before_look),
            ("ground-then-capture", ground * early),
            ("ground-both-then-capture", remaining - ground * early),
            ("ground-no-capture", 1.0 - o.total),
        ])
    } else {
        edges.push(EdgeSpec::new("residual", "psi'-D0-B0", "D1-B1").piece(
            after,
            t_end,
            residual / (t_end - after),
        ));
        declared(&[
            ("capture-at-first-look", o.before_look),
            ("ground-then-capture", remaining),
            ("ground-no-capture", 1.0 - o.total),
        ])
    };
    edges.extend([
        EdgeSpec::new("look2-ground", "psi'-D0-B0", "psi'-D0-B0-B0")
            .piece(second_look, after2, 1.0 / w)
            .basis(RateBasis::SourceWeight),
        EdgeSpec::new("look2-capture", "D1-B1", "D1'-B1-B1")
            .piece(second_look, after2, 1.0 / w)
            .basis(RateBasis::SourceWeight),
        EdgeSpec::new("look2-first", "D1'-B1", "D1'-B1-B1")
            .piece(second_look, after2, 1.0 / w)
            .basis(RateBasis::SourceWeight),
    ]);
    let mut classifier: Vec<(&str, &[&str])> = vec![
        ("capture-at-first-look", &["D1-X", "D1'-B1", "D1'-B1-B1"]),
        ("ground-then-capture", &["psi'-D0-B0", "D1-B1", "D1'-B1-B1"]),
    ];
    if inside {
        classifier.push((
            "ground-both-then-capture",
            &["psi'-D0-B0", "psi'-D0-B0-B0", "D1-B1-B1"],
        ));
    }
    classifier.push(("ground-no-capture", &["psi'-D0-B0", "psi'-D0-B0-B0"]));
    Scenario::from_spec(ScenarioSpec {
        name: "two-observers".into(),
        objects: vec![
            "particle".into(),
            "detector".into(),
            "observer".into(),
            "observer2".into(),
        ],
        horizon: None,
        blocking: true,
        schedule,
        declared: law,
        classifier: rules(&classifier),
        components,
        edges,
    })
}

pub fn reading_name(i: usize) -> String {
    format!("reading-{i}")
}

/// A counter stepping through readings `0..k`, each reading entangled with
/// the observer's brain state. Reading `i` feeds reading `i + 1` at rate
/// `1 / (i + 1)` per unit modulus for `i + 1` time units after it was
/// created or realized.
pub fn counter_chain(k: usize) -> Result<Scenario, ScenarioError> {
    if k < 2 {
        return Err(ScenarioError::invalid(
            "k",
            "a counter needs at least two readings",
        ));
    }
    let components = (0..k)
        .map(|i| {
            component(
                &reading_name(i),
                (i == 0).then_some(1.0),
                vec![
                    state("counter", &format!("C{i}"), i > 0),
                    state("observer", &format!("B{i}"), i > 0),
                ],
            )
        })
        .collect();
    let edges = (0..k - 1)
        .map(|i| {
            let len = (i + 1) as f64;
            EdgeSpec::new(format!("advance-{i}"), reading_name(i), reading_name(i + 1))
                .piece(0.0, len, 1.0 / len)
                .anchored(Anchor::Source)
        })
        .collect();
    let sequence = (1..k).map(reading_name).collect::<Vec<_>>().join(">");
    Scenario::from_spec(ScenarioSpec {
        name: "counter-chain".into(),
        objects: vec!["counter".into(), "observer".into()],
        horizon: None,
        blocking: true,
        schedule: BTreeMap::from([("readings".to_string(), k as f64)]),
        declared: BTreeMap::from([(sequence, 1.0)]),
        classifier: ClassifierSpec::Path,
        components,
        edges,
    })
}

pub fn bright_name(k: usize) -> String {
    format!("bright-{k}")
}

pub fn dark_name(k: usize) -> String {
    format!("dark-{k}")
}

/// Photon-counter period of the atom scenario's component ring.
const ATOM_RING: usize = 3;

/// Three-level atom with a strong and a weak decay channel. Bright
/// components hold the ground level and a photon count modulo three; a weak
/// hit shelves the atom in the dark level until it decays back.
pub fn three_level_atom(strong: f64, weak: f64) -> Result<Scenario, ScenarioError> {
    if !(weak > 0.0 && weak.is_finite()) {
        return Err(ScenarioError::invalid("weak_rate", "must be positive"));
    }
    if !(strong >= 10.0 * weak && strong.is_finite()) {
        return Err(ScenarioError::invalid(
            "strong_rate",
            format!("strong rate {strong} must be at least ten times the weak rate {weak}"),
        ));
    }
    let mut components = Vec::new();
    for k in 0..ATOM_RING {
        components.push(component(
            &bright_name(k),
            (k == 0).then_some(1.0),
            vec![
                state("atom", "g", false),
                state("counter", &format!("n{k}"), k > 0),
            ],
        ));
        components.push(component(
            &dark_name(k),
            None,
            vec![
                state("atom", "w", true),
                state("counter", &format!("n{k}"), true),
            ],
        ));
    }
    let burst = 1.0 / (strong + weak);
    let mut edges = Vec::new();
    for k in 0..ATOM_RING {
        let next = (k + 1) % ATOM_RING;
        edges.push(
            EdgeSpec::new(format!("strong-{k}"), bright_name(k), bright_name(next))
                .piece(0.0, burst, strong)
                .anchored(Anchor::Source),
        );
        edges.push(
            EdgeSpec::new(format!("shelve-{k}"), bright_name(k), dark_name(k))
                .piece(0.0, burst, weak)
                .anchored(Anchor::Source),
        );
        edges.push(
            EdgeSpec::new(format!("decay-{k}"), dark_name(k), bright_name(next))
                .piece(0.0, 1.0 / weak, weak)
                .anchored(Anchor::Source),
        );
    }
    Scenario::from_spec(ScenarioSpec {
        name: "three-level-atom".into(),
        objects: vec!["atom".into(), "counter".into()],
        horizon: Some(200.0 / weak),
        blocking: true,
        schedule: BTreeMap::from([
            ("strong_rate".to_string(), strong),
            ("weak_rate".to_string(), weak),
        ]),
        declared: BTreeMap::new(),
        classifier: rules(&[("ended-dark", &["*", "dark-*"]), ("ended-bright", &["*"])]),
        components,
        edges,
    })
}

/// Bright/dark interval extraction for the atom scenario.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntervalTracker {
    dark_since: Option<f64>,
    bright_since: Option<f64>,
    pub dark: Vec<f64>,
    pub bright: Vec<f64>,
    /// Strong-channel components created while the atom was dark.
    pub strong_in_dark: u64,
    /// Strong-channel hits, i.e. collapses onto a bright component from a
    /// bright one.
    pub strong_hits: u64,
    last_bright: bool,
}

impl IntervalTracker {
    pub fn new() -> Self {
        Self {
            last_bright: true,
            bright_since: Some(0.0),
            ..Self::default()
        }
    }

    pub fn observe(&mut self, graph: &ScenarioGraph, event: &Event) {
        match event.kind {
            EventKind::Collapse => {
                let Some(c) = event.component else { return };
                let bright = graph.component_name(c).starts_with("bright-");
                match (self.last_bright, bright) {
                    (true, false) => {
                        if let Some(s) = self.bright_since.take() {
                            self.bright.push(event.time - s);
                        }
                        self.dark_since = Some(event.time);
                    }
                    (false, true) => {
                        if let Some(s) = self.dark_since.take() {
                            self.dark.push(event.time - s);
                        }
                        self.bright_since = Some(event.time);
                    }
                    (true, true) => self.strong_hits += 1,
                    (false, false) => {}
                }
                self.last_bright = bright;
            }
            EventKind::ComponentCreated if !self.last_bright => {
                if let Some(e) = event.edge {
                    if graph.edge_name(e).starts_with("strong-") {
                        self.strong_in_dark += 1;
                    }
                }
            }
            _ => {}
        }
    }
}

/// Random small acyclic scenario for oracle cross-checks. Every component
/// holds a state of one shared object, so a ready component cannot feed
/// another until it has been realized.
pub fn random_scenario(rng: &mut impl Rng, index: usize) -> Scenario {
    let n = rng.random_range(2..=5usize);
    let names: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
    let components = (0..n)
        .map(|i| {
            component(
                &names[i],
                (i == 0).then_some(1.0),
                vec![state("o0", &format!("L{i}"), i > 0)],
            )
        })
        .collect();
    let n_edges = rng.random_range(1..=4usize);
    let mut budget = vec![1.0f64; n];
    let mut edges = Vec::new();
    let mut used = BTreeSet::new();
    for k in 0..n_edges {
        // Acyclic: sources precede targets. The first edge leaves the root.
        let source = if k == 0 {
            0
        } else {
            rng.random_range(0..n - 1)
        };
        let target = rng.random_range(source + 1..n);
        if !used.insert((source, target)) {
            continue;
        }
        let total = budget[source] * rng.random_range(0.1..0.9);
        budget[source] -= total;
        let anchored = source > 0 && rng.random_bool(0.5);
        let start = if anchored {
            rng.random_range(0.0..2.0)
        } else {
            rng.random_range(0.0..6.0)
        };
        let len = rng.random_range(0.5..4.0);
        let mut e = EdgeSpec::new(
            format!("e{k}"),
            names[source].clone(),
            names[target].clone(),
        );
        if rng.random_bool(0.5) {
            let cut = start + len * rng.random_range(0.2..0.8);
            let share = rng.random_range(0.1..0.9);
            e = e.piece(start, cut, total * share / (cut - start)).piece(
                cut,
                start + len,
                total * (1.0 - share) / (start + len - cut),
            );
        } else {
            e = e.piece(start, start + len, total / len);
        }
        if anchored {
            e = e.anchored(Anchor::Source);
        }
        edges.push(e);
    }
    Scenario::from_spec(ScenarioSpec {
        name: format!("random-{index}"),
        objects: vec!["o0".into()],
        horizon: None,
        blocking: true,
        schedule: BTreeMap::new(),
        declared: BTreeMap::new(),
        classifier: ClassifierSpec::Path,
        components,
        edges,
    })
    .expect("generated scenarios are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve() {
        for name in BUILTIN_NAMES {
            let sc = builtin(name).unwrap();
            assert_eq!(sc.name(), name);
        }
        assert!(matches!(
            builtin("nope"),
            Err(ScenarioError::UnknownBuiltin(_))
        ));
    }

    #[test]
    fn declared_laws_sum_to_one() {
        for name in BUILTIN_NAMES {
            let sc = builtin(name).unwrap();
            if let Some(law) = sc.declared() {
                let sum: f64 = law.values().sum();
                assert!((sum - 1.0).abs() < 1e-12, "{name}: {sum}");
            }
        }
    }

    #[test]
    fn look_happens_at_half_transfer() {
        let sc = observer();
        let t_ob = sc.schedule()["t_ob"];
        let primary = &sc.graph().edges()[0].profile;
        assert!((primary.integral(0.0, t_ob) - 0.5).abs() < 1e-12);
        assert!((primary.total() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn rules_classify_paths() {
        let sc = observer();
        let id = |n: &str| sc.component_id(n).unwrap();
        assert_eq!(
            sc.classify(&[id("D1-X"), id("D1'-B1")]),
            "capture-at-first-look"
        );
        assert_eq!(sc.classify(&[id("psi'-D0-B0")]), "ground-no-capture");
        assert_eq!(sc.classify(&[id("D1-X")]), UNCLASSIFIED);
        let atom = three_level_atom(100.0, 1.0).unwrap();
        let a = |n: &str| atom.component_id(n).unwrap();
        assert_eq!(atom.classify(&[a("bright-1"), a("dark-1")]), "ended-dark");
        assert_eq!(atom.classify(&[a("dark-0"), a("bright-1")]), "ended-bright");
        assert_eq!(atom.classify(&[]), "ended-bright");
    }

    #[test]
    fn path_classifier_joins_names() {
        let sc = counter_chain(3).unwrap();
        let id = |n: &str| sc.component_id(n).unwrap();
        assert_eq!(
            sc.classify(&[id("reading-1"), id("reading-2")]),
            "reading-1>reading-2"
        );
        assert_eq!(sc.classify(&[]), "none");
    }

    #[test]
    fn atom_rejects_comparable_rates() {
        let err = three_level_atom(5.0, 1.0).unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid { ref path, .. } if path == "strong_rate"));
        assert!(three_level_atom(10.0, 1.0).is_ok());
    }

    #[test]
    fn chain_needs_two_readings() {
        assert!(counter_chain(1).is_err());
        assert!(counter_chain(2).is_ok());
    }

    #[test]
    fn recurrence_detection() {
        assert!(three_level_atom(100.0, 1.0).unwrap().is_recurrent());
        assert!(!observer().is_recurrent());
        assert!(!counter_chain(5).unwrap().is_recurrent());
    }

    #[test]
    fn over_budget_source_is_rejected() {
        let mut spec = primary_only().spec().clone();
        spec.edges[0].pieces[0].rate = 0.2;
        let err = Scenario::from_spec(spec).unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid { ref path, .. } if path == "components[0]"));
    }

    #[test]
    fn random_scenarios_are_valid_and_acyclic() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for i in 0..200 {
            let sc = random_scenario(&mut rng, i);
            assert!(!sc.is_recurrent());
            assert!(sc.graph().edges().len() <= 4);
            assert!(sc.graph().templates().len() <= 5);
        }
    }

    #[test]
    fn interval_tracker_splits_bright_and_dark() {
        let sc = three_level_atom(100.0, 1.0).unwrap();
        let g = sc.graph();
        let id = |n: &str| sc.component_id(n).unwrap();
        let collapse = |t: f64, c: ComponentId| Event {
            time: t,
            kind: EventKind::Collapse,
            component: Some(c),
            edge: None,
        };
        let mut tr = IntervalTracker::new();
        tr.observe(g, &collapse(0.1, id("bright-1")));
        tr.observe(g, &collapse(0.3, id("dark-1")));
        tr.observe(g, &collapse(0.8, id("bright-2")));
        tr.observe(g, &collapse(0.9, id("dark-2")));
        assert_eq!(tr.strong_hits, 1);
        assert_eq!(tr.bright.len(), 2);
        assert!((tr.bright[0] - 0.3).abs() < 1e-15);
        assert_eq!(tr.dark.len(), 1);
        assert!((tr.dark[0] - 0.5).abs() < 1e-15);
    }
}
