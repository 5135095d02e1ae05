//! The interaction game on a directed graph with random edge costs.
//!
//! Movement is deterministic given the effective action; randomness lives in
//! the edge and terminal costs, which are independent. The human may override
//! the machine's move at a fixed transmission cost charged to the mean.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::risk_measures::{CostDistribution, RiskParameter};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("no out-edge labelled {direction} at node `{node}`")]
    IllegalMove { node: String, direction: Direction },
    #[error("STOP at non-terminal node `{0}`")]
    StopAtNonTerminal(String),
    #[error("path is disconnected at position {0}")]
    DisconnectedPath(usize),
    #[error("path does not start at the start node")]
    WrongStart,
    #[error("path ends at non-terminal node `{0}`")]
    NonTerminalEnd(String),
    #[error("path needs {needed} periods but the horizon is {horizon}")]
    TooLong { needed: usize, horizon: usize },
    #[error("edge index {0} out of range")]
    UnknownEdge(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

pub type EdgeId = usize;
pub type TypeIndex = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    N,
    S,
    E,
    W,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::N, Direction::S, Direction::E, Direction::W];

    pub fn label(self) -> &'static str {
        match self {
            Direction::N => "N",
            Direction::S => "S",
            Direction::E => "E",
            Direction::W => "W",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.label() == text)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Machine action; declaration order is the solver's tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MachineAction {
    Move(Direction),
    Stop,
}

impl MachineAction {
    pub const ALL: [MachineAction; 5] = [
        MachineAction::Move(Direction::N),
        MachineAction::Move(Direction::S),
        MachineAction::Move(Direction::E),
        MachineAction::Move(Direction::W),
        MachineAction::Stop,
    ];
}

impl fmt::Display for MachineAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MachineAction::Move(d) => write!(f, "{d}"),
            MachineAction::Stop => f.write_str("STOP"),
        }
    }
}

/// Human action; `Silent` sends nothing and costs nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HumanAction {
    Silent,
    Move(Direction),
    Stop,
}

impl HumanAction {
    pub const ALL: [HumanAction; 6] = [
        HumanAction::Silent,
        HumanAction::Move(Direction::N),
        HumanAction::Move(Direction::S),
        HumanAction::Move(Direction::E),
        HumanAction::Move(Direction::W),
        HumanAction::Stop,
    ];

    /// The move this signal requests, if any.
    pub fn as_move(self) -> Option<MachineAction> {
        match self {
            HumanAction::Silent => None,
            HumanAction::Move(d) => Some(MachineAction::Move(d)),
            HumanAction::Stop => Some(MachineAction::Stop),
        }
    }
}

impl fmt::Display for HumanAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HumanAction::Silent => f.write_str("SILENT"),
            HumanAction::Move(d) => write!(f, "{d}"),
            HumanAction::Stop => f.write_str("STOP"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge<S> {
    pub from: NodeId,
    pub to: NodeId,
    pub direction: Direction,
    pub cost: CostDistribution<S>,
}

/// How the machine aggregates per-type criteria over its belief.
#[derive(Debug, Clone, PartialEq)]
pub enum MachineAggregator<S> {
    Expectation,
    Cvar(S),
}

/// The game instantiated on a graph with horizon `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec<S> {
    node_names: Vec<String>,
    edges: Vec<Edge<S>>,
    out_edges: Vec<Vec<EdgeId>>,
    terminals: BTreeMap<NodeId, CostDistribution<S>>,
    start: NodeId,
    horizon: usize,
    types: Vec<RiskParameter<S>>,
    prior: Vec<S>,
    transmission_cost: S,
    aggregator: MachineAggregator<S>,
}

/// Result of one joint action.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<S> {
    pub next: NodeId,
    pub cost: CostDistribution<S>,
    pub overridden: bool,
    pub stopped: bool,
    pub edge: Option<EdgeId>,
}

impl<S: Scalar> GameSpec<S> {
    pub fn builder() -> GameSpecBuilder<S> {
        GameSpecBuilder::default()
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_names.len()).map(NodeId)
    }

    pub fn node_name(&self, node: NodeId) -> &str {
        &self.node_names[node.0]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.node_names.iter().position(|n| n == name).map(NodeId)
    }

    pub fn edges(&self) -> &[Edge<S>] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge<S> {
        &self.edges[id]
    }

    pub fn out_edges(&self, node: NodeId) -> impl Iterator<Item = (EdgeId, &Edge<S>)> {
        self.out_edges[node.0].iter().map(move |&e| (e, &self.edges[e]))
    }

    /// First out-edge with the given label.
    pub fn out_edge(&self, node: NodeId, direction: Direction) -> Option<EdgeId> {
        self.out_edges[node.0].iter().copied().find(|&e| self.edges[e].direction == direction)
    }

    pub fn terminals(&self) -> &BTreeMap<NodeId, CostDistribution<S>> {
        &self.terminals
    }

    pub fn is_terminal(&self, node: NodeId) -> bool {
        self.terminals.contains_key(&node)
    }

    pub fn terminal_cost(&self, node: NodeId) -> Option<&CostDistribution<S>> {
        self.terminals.get(&node)
    }

    pub fn start(&self) -> NodeId {
        self.start
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn types(&self) -> &[RiskParameter<S>] {
        &self.types
    }

    pub fn type_count(&self) -> usize {
        self.types.len()
    }

    pub fn theta(&self, index: TypeIndex) -> &S {
        &self.types[index].0
    }

    pub fn prior(&self) -> &[S] {
        &self.prior
    }

    pub fn transmission_cost(&self) -> &S {
        &self.transmission_cost
    }

    pub fn aggregator(&self) -> &MachineAggregator<S> {
        &self.aggregator
    }

    pub fn with_prior(&self, prior: Vec<S>) -> Self {
        Self { prior, ..self.clone() }
    }

    pub fn with_transmission_cost(&self, q: S) -> Self {
        Self { transmission_cost: q, ..self.clone() }
    }

    pub fn with_aggregator(&self, aggregator: MachineAggregator<S>) -> Self {
        Self { aggregator, ..self.clone() }
    }

    pub fn with_types(&self, types: Vec<RiskParameter<S>>, prior: Vec<S>) -> Self {
        Self { types, prior, ..self.clone() }
    }

    /// Prior-weighted mean risk coefficient.
    pub fn mean_theta(&self) -> S {
        self.prior
            .iter()
            .zip(&self.types)
            .map(|(p, t)| p.clone() * t.0.clone())
            .sum()
    }

    /// Re-expresses every parameter in another scalar type via its decimal form.
    pub fn convert<T: Scalar>(&self) -> GameSpec<T> {
        let c = |x: &S| T::from_f64(x.to_f64());
        let dist = |d: &CostDistribution<S>| CostDistribution::new(c(&d.mean), c(&d.variance));
        GameSpec {
            node_names: self.node_names.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| Edge { from: e.from, to: e.to, direction: e.direction, cost: dist(&e.cost) })
                .collect(),
            out_edges: self.out_edges.clone(),
            terminals: self.terminals.iter().map(|(n, d)| (*n, dist(d))).collect(),
            start: self.start,
            horizon: self.horizon,
            types: self.types.iter().map(|t| RiskParameter(c(&t.0))).collect(),
            prior: self.prior.iter().map(c).collect(),
            transmission_cost: c(&self.transmission_cost),
            aggregator: match &self.aggregator {
                MachineAggregator::Expectation => MachineAggregator::Expectation,
                MachineAggregator::Cvar(a) => MachineAggregator::Cvar(c(a)),
            },
        }
    }

    pub fn legal_machine_actions(&self, node: NodeId) -> Vec<MachineAction> {
        MachineAction::ALL
            .into_iter()
            .filter(|a| match a {
                MachineAction::Move(d) => self.out_edge(node, *d).is_some(),
                MachineAction::Stop => self.is_terminal(node),
            })
            .collect()
    }

    pub fn legal_human_actions(&self, node: NodeId) -> Vec<HumanAction> {
        HumanAction::ALL
            .into_iter()
            .filter(|a| match a {
                HumanAction::Silent => true,
                HumanAction::Move(d) => self.out_edge(node, *d).is_some(),
                HumanAction::Stop => self.is_terminal(node),
            })
            .collect()
    }

    /// Fewest edges from `node` to any terminal.
    pub fn hops_to_terminal(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        let mut queue = VecDeque::new();
        for &t in self.terminals.keys() {
            dist[t.0] = Some(0);
            queue.push_back(t);
        }
        // reverse BFS
        let mut incoming: Vec<Vec<NodeId>> = vec![Vec::new(); self.node_count()];
        for e in &self.edges {
            incoming[e.to.0].push(e.from);
        }
        while let Some(n) = queue.pop_front() {
            let d = dist[n.0].expect("queued nodes have a distance");
            for &p in &incoming[n.0] {
                if dist[p.0].is_none() {
                    dist[p.0] = Some(d + 1);
                    queue.push_back(p);
                }
            }
        }
        dist
    }

    /// Final node of a path that starts at the start node.
    pub fn path_end(&self, path: &[EdgeId]) -> NodeId {
        path.last().map_or(self.start, |&e| self.edges[e].to)
    }

    /// Moments of the path's edge costs plus the terminal cost at its end.
    pub fn path_moments(&self, path: &[EdgeId]) -> CostDistribution<S> {
        let edges: CostDistribution<S> = path.iter().map(|&e| self.edges[e].cost.clone()).sum();
        match self.terminals.get(&self.path_end(path)) {
            Some(t) => edges + t.clone(),
            None => edges,
        }
    }

    pub fn describe_path(&self, path: &[EdgeId]) -> String {
        let mut out = self.node_name(self.start).to_string();
        for &e in path {
            out.push_str(&format!(" -{}-> {}", self.edges[e].direction, self.node_name(self.edges[e].to)));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct GameSpecBuilder<S> {
    nodes: Vec<String>,
    edges: Vec<(String, String, Direction, S, S)>,
    terminals: Vec<(String, S, S)>,
    start: Option<String>,
    horizon: usize,
    types: Vec<S>,
    prior: Vec<S>,
    transmission_cost: Option<S>,
    aggregator: Option<MachineAggregator<S>>,
}

impl<S> Default for GameSpecBuilder<S> {
    fn default() -> Self {
        Self {
            nodes: Vec::new(),
            edges: Vec::new(),
            terminals: Vec::new(),
            start: None,
            horizon: 1,
            types: Vec::new(),
            prior: Vec::new(),
            transmission_cost: None,
            aggregator: None,
        }
    }
}

impl<S: Scalar> GameSpecBuilder<S> {
    pub fn nodes<I, T>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        self.nodes.extend(names.into_iter().map(Into::into));
        self
    }

    pub fn edge(mut self, from: &str, to: &str, direction: Direction, mean: S, variance: S) -> Self {
        self.edges.push((from.into(), to.into(), direction, mean, variance));
        self
    }

    pub fn terminal(mut self, node: &str, mean: S, variance: S) -> Self {
        self.terminals.push((node.into(), mean, variance));
        self
    }

    pub fn start(mut self, node: &str) -> Self {
        self.start = Some(node.into());
        self
    }

    pub fn horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn types(mut self, types: impl IntoIterator<Item = S>) -> Self {
        self.types = types.into_iter().collect();
        self
    }

    pub fn prior(mut self, prior: impl IntoIterator<Item = S>) -> Self {
        self.prior = prior.into_iter().collect();
        self
    }

    pub fn transmission_cost(mut self, q: S) -> Self {
        self.transmission_cost = Some(q);
        self
    }

    pub fn aggregator(mut self, aggregator: MachineAggregator<S>) -> Self {
        self.aggregator = Some(aggregator);
        self
    }

    /// Resolves node names. Semantic invariants are left to [`validate_spec`].
    pub fn build(self) -> Result<GameSpec<S>, GameError> {
        let lookup = |name: &str| {
            self.nodes
                .iter()
                .position(|n| n == name)
                .map(NodeId)
                .ok_or_else(|| GameError::UnknownNode(name.to_string()))
        };
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut out_edges = vec![Vec::new(); self.nodes.len()];
        for (from, to, direction, mean, var) in &self.edges {
            let (from, to) = (lookup(from)?, lookup(to)?);
            out_edges[from.0].push(edges.len());
            edges.push(Edge { from, to, direction: *direction, cost: CostDistribution::new(mean.clone(), var.clone()) });
        }
        let mut terminals = BTreeMap::new();
        for (node, mean, var) in &self.terminals {
            terminals.insert(lookup(node)?, CostDistribution::new(mean.clone(), var.clone()));
        }
        let start = match &self.start {
            Some(s) => lookup(s)?,
            None => return Err(GameError::UnknownNode("<start unset>".into())),
        };
        Ok(GameSpec {
            node_names: self.nodes.clone(),
            edges,
            out_edges,
            terminals,
            start,
            horizon: self.horizon,
            types: self.types.iter().cloned().map(RiskParameter).collect(),
            prior: self.prior.clone(),
            transmission_cost: self.transmission_cost.clone().unwrap_or_else(S::zero),
            aggregator: self.aggregator.clone().unwrap_or(MachineAggregator::Expectation),
        })
    }
}

/// One broken invariant found by [`validate_spec`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub invariant: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

/// Most types the belief-state solvers accept (supports are bitmasks).
pub const MAX_TYPES: usize = 16;

/// Checks every structural invariant; empty result means the spec is valid.
pub fn validate_spec<S: Scalar>(spec: &GameSpec<S>) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |invariant: &'static str, detail: String| out.push(Violation { invariant, detail });

    if spec.types.is_empty() {
        push("types empty", "at least one type is required".into());
    }
    if spec.types.len() > MAX_TYPES {
        push("too many types", format!("{} types, at most {MAX_TYPES} supported", spec.types.len()));
    }
    for (i, t) in spec.types.iter().enumerate() {
        if !t.is_valid() {
            push("invalid type", format!("type {i} has theta {} (must be finite and >= 0)", t.0));
        }
    }
    for (i, pair) in spec.types.windows(2).enumerate() {
        if pair[0].0 >= pair[1].0 {
            push(
                "types not strictly increasing",
                format!("type {} ({}) >= type {} ({})", i, pair[0].0, i + 1, pair[1].0),
            );
        }
    }
    if spec.prior.len() != spec.types.len() {
        push("prior length", format!("{} prior weights for {} types", spec.prior.len(), spec.types.len()));
    }
    for (i, p) in spec.prior.iter().enumerate() {
        if *p < S::zero() || !p.is_finite_value() {
            push("negative prior", format!("prior weight {i} is {p}"));
        }
    }
    let total: S = spec.prior.iter().cloned().sum();
    if (total.to_f64() - 1.0).abs() > S::prior_slack() {
        push("prior does not sum to 1", format!("prior sums to {total}"));
    }
    if spec.transmission_cost < S::zero() || !spec.transmission_cost.is_finite_value() {
        push("negative transmission cost", format!("q_h = {}", spec.transmission_cost));
    }
    if let MachineAggregator::Cvar(alpha) = &spec.aggregator {
        if *alpha < S::zero() || *alpha >= S::one() {
            push("invalid cvar level", format!("alpha = {alpha} outside [0, 1)"));
        }
    }
    if spec.horizon == 0 {
        push("horizon", "horizon must be positive".into());
    }
    for (node, edges) in spec.out_edges.iter().enumerate() {
        for d in Direction::ALL {
            let n = edges.iter().filter(|&&e| spec.edges[e].direction == d).count();
            if n > 1 {
                push("duplicate direction", format!("node `{}` has {n} out-edges labelled {d}", spec.node_names[node]));
            }
        }
    }
    for (i, e) in spec.edges.iter().enumerate() {
        if !e.cost.is_valid() {
            push(
                "invalid edge cost",
                format!("edge {i} ({} -> {}) has variance {}", spec.node_name(e.from), spec.node_name(e.to), e.cost.variance),
            );
        }
    }
    for (n, d) in &spec.terminals {
        if !d.is_valid() {
            push("invalid terminal cost", format!("terminal `{}` has variance {}", spec.node_name(*n), d.variance));
        }
    }
    if spec.terminals.is_empty() {
        push("no terminal", "at least one terminal node is required".into());
    } else {
        let hops = spec.hops_to_terminal()[spec.start.0];
        match hops {
            Some(h) if h < spec.horizon => {}
            Some(h) => push(
                "terminal unreachable within horizon",
                format!("nearest terminal needs {} periods, horizon is {}", h + 1, spec.horizon),
            ),
            None => push("terminal unreachable within horizon", "no terminal reachable from start".into()),
        }
    }
    out
}

/// Resolves who moves the car: a non-silent human signal replaces the
/// machine's action.
pub fn effective_action<S: Scalar>(
    spec: &GameSpec<S>,
    node: NodeId,
    human: HumanAction,
    machine: MachineAction,
) -> Result<(MachineAction, bool), GameError> {
    match human.as_move() {
        None => Ok((machine, false)),
        Some(MachineAction::Move(d)) => {
            if spec.out_edge(node, d).is_none() {
                return Err(GameError::IllegalMove { node: spec.node_name(node).into(), direction: d });
            }
            Ok((MachineAction::Move(d), true))
        }
        Some(MachineAction::Stop) => Ok((MachineAction::Stop, true)),
    }
}

/// Applies an already-resolved move from `node`.
pub fn apply_move<S: Scalar>(
    spec: &GameSpec<S>,
    node: NodeId,
    action: MachineAction,
    overridden: bool,
) -> Result<StepOutcome<S>, GameError> {
    let q = if overridden { spec.transmission_cost.clone() } else { S::zero() };
    match action {
        MachineAction::Move(d) => {
            let e = spec
                .out_edge(node, d)
                .ok_or_else(|| GameError::IllegalMove { node: spec.node_name(node).into(), direction: d })?;
            let edge = &spec.edges[e];
            Ok(StepOutcome { next: edge.to, cost: edge.cost.shifted(q), overridden, stopped: false, edge: Some(e) })
        }
        MachineAction::Stop => {
            let t = spec
                .terminals
                .get(&node)
                .ok_or_else(|| GameError::StopAtNonTerminal(spec.node_name(node).into()))?;
            Ok(StepOutcome { next: node, cost: t.shifted(q), overridden, stopped: true, edge: None })
        }
    }
}

/// One period of play.
pub fn step<S: Scalar>(
    spec: &GameSpec<S>,
    node: NodeId,
    human: HumanAction,
    machine: MachineAction,
) -> Result<StepOutcome<S>, GameError> {
    let (action, overridden) = effective_action(spec, node, human, machine)?;
    apply_move(spec, node, action, overridden)
}

/// Per-type criterion of a complete path: the mean (plus `q_h` per
/// override) plus `theta` times the variance, summed over independent edges
/// and the terminal.
pub fn path_criterion<S: Scalar>(
    spec: &GameSpec<S>,
    path: &[EdgeId],
    overrides: usize,
    theta: &RiskParameter<S>,
) -> Result<S, GameError> {
    check_path(spec, path)?;
    let moments = spec.path_moments(path);
    let mean = moments.mean + S::from_usize(overrides) * spec.transmission_cost.clone();
    Ok(mean + theta.0.clone() * moments.variance)
}

/// Connected from the start, ends at a terminal, fits the horizon with STOP.
pub fn check_path<S: Scalar>(spec: &GameSpec<S>, path: &[EdgeId]) -> Result<(), GameError> {
    let mut at = spec.start;
    for (i, &e) in path.iter().enumerate() {
        let edge = spec.edges.get(e).ok_or(GameError::UnknownEdge(e))?;
        if edge.from != at {
            return Err(if i == 0 { GameError::WrongStart } else { GameError::DisconnectedPath(i) });
        }
        at = edge.to;
    }
    if !spec.is_terminal(at) {
        return Err(GameError::NonTerminalEnd(spec.node_name(at).into()));
    }
    if path.len() + 1 > spec.horizon {
        return Err(GameError::TooLong { needed: path.len() + 1, horizon: spec.horizon });
    }
    Ok(())
}

/// Observed play: `(state, human action, machine action)` per period and the
/// current node.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicHistory {
    pub steps: Vec<(NodeId, HumanAction, MachineAction)>,
    pub current: NodeId,
}

impl PublicHistory {
    pub fn new(start: NodeId) -> Self {
        Self { steps: Vec::new(), current: start }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// A realized play with sampled per-period costs.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    pub history: PublicHistory,
    pub step_costs: Vec<S>,
    pub total_cost: S,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond(q: f64) -> GameSpec<f64> {
        GameSpec::builder()
            .nodes(["a", "b", "c", "d"])
            .edge("a", "b", Direction::N, 2.0, 1.0)
            .edge("a", "c", Direction::E, 3.0, 0.0)
            .edge("b", "d", Direction::E, 1.0, 4.0)
            .edge("c", "d", Direction::N, 1.0, 1.0)
            .terminal("d", -10.0, 4.0)
            .start("a")
            .horizon(3)
            .types([0.0, 0.5])
            .prior([0.5, 0.5])
            .transmission_cost(q)
            .build()
            .unwrap()
    }

    #[test]
    fn silent_human_never_overrides() {
        let spec = diamond(0.5);
        let a = spec.start();
        for m in spec.legal_machine_actions(a) {
            assert_eq!(effective_action(&spec, a, HumanAction::Silent, m).unwrap(), (m, false));
        }
    }

    #[test]
    fn override_replaces_machine_move() {
        let spec = diamond(0.5);
        let a = spec.start();
        let got = effective_action(&spec, a, HumanAction::Move(Direction::E), MachineAction::Move(Direction::N));
        assert_eq!(got.unwrap(), (MachineAction::Move(Direction::E), true));
        let bad = effective_action(&spec, a, HumanAction::Move(Direction::W), MachineAction::Move(Direction::N));
        assert!(matches!(bad, Err(GameError::IllegalMove { .. })));
    }

    #[test]
    fn step_charges_transmission_to_mean_only() {
        let spec = diamond(0.5);
        let a = spec.start();
        let quiet = step(&spec, a, HumanAction::Silent, MachineAction::Move(Direction::N)).unwrap();
        assert_eq!(quiet.cost, CostDistribution::new(2.0, 1.0));
        assert!(!quiet.overridden);
        let loud = step(&spec, a, HumanAction::Move(Direction::N), MachineAction::Move(Direction::E)).unwrap();
        assert_eq!(loud.next, spec.node_by_name("b").unwrap());
        assert_eq!(loud.cost, CostDistribution::new(2.5, 1.0));
        assert!(loud.overridden);
    }

    #[test]
    fn stop_is_absorbing_and_terminal_only() {
        let spec = diamond(0.5);
        let d = spec.node_by_name("d").unwrap();
        let out = step(&spec, d, HumanAction::Silent, MachineAction::Stop).unwrap();
        assert_eq!((out.next, out.stopped, out.cost.clone()), (d, true, CostDistribution::new(-10.0, 4.0)));
        let out = step(&spec, d, HumanAction::Stop, MachineAction::Stop).unwrap();
        assert!(out.overridden);
        let err = step(&spec, spec.start(), HumanAction::Silent, MachineAction::Stop);
        assert_eq!(err, Err(GameError::StopAtNonTerminal("a".into())));
    }

    #[test]
    fn path_criterion_adds_independent_moments() {
        let spec = diamond(0.25);
        let path = [0, 2];
        // means 2 + 1 - 10, variances 1 + 4 + 4
        assert_eq!(path_criterion(&spec, &path, 0, &RiskParameter(0.5)).unwrap(), -7.0 + 4.5);
        assert_eq!(path_criterion(&spec, &path, 2, &RiskParameter(0.0)).unwrap(), -7.0 + 0.5);
        assert!(matches!(path_criterion(&spec, &[0], 0, &RiskParameter(0.0)), Err(GameError::NonTerminalEnd(_))));
        assert!(matches!(path_criterion(&spec, &[0, 3], 0, &RiskParameter(0.0)), Err(GameError::DisconnectedPath(1))));
        assert!(matches!(path_criterion(&spec, &[2], 0, &RiskParameter(0.0)), Err(GameError::WrongStart)));
    }

    #[test]
    fn path_criterion_respects_horizon() {
        let spec = diamond(0.0);
        let short = GameSpec { horizon: 2, ..spec };
        assert_eq!(
            path_criterion(&short, &[0, 2], 0, &RiskParameter(0.0)),
            Err(GameError::TooLong { needed: 3, horizon: 2 })
        );
    }

    #[test]
    fn valid_spec_has_no_violations() {
        assert!(validate_spec(&diamond(0.1)).is_empty());
    }

    #[test]
    fn validation_reports_every_problem() {
        let spec = GameSpec::builder()
            .nodes(["a", "b"])
            .edge("a", "b", Direction::E, 1.0, 1.0)
            .edge("a", "b", Direction::E, 2.0, -1.0)
            .terminal("b", 0.0, 0.0)
            .start("a")
            .horizon(1)
            .types([0.2, 0.1])
            .prior([0.5, 0.4])
            .build()
            .unwrap();
        let v = validate_spec(&spec);
        let names: Vec<_> = v.iter().map(|v| v.invariant).collect();
        assert!(names.contains(&"prior does not sum to 1"));
        assert!(names.contains(&"duplicate direction"));
        assert!(names.contains(&"types not strictly increasing"));
        assert!(names.contains(&"invalid edge cost"));
        assert!(names.contains(&"terminal unreachable within horizon"));
    }

    #[test]
    fn unknown_node_is_a_build_error() {
        let err = GameSpec::<f64>::builder().nodes(["a"]).edge("a", "z", Direction::N, 0.0, 0.0).start("a").build();
        assert_eq!(err.unwrap_err(), GameError::UnknownNode("z".into()));
    }

    #[test]
    fn mean_theta_is_prior_weighted() {
        let spec = diamond(0.0).with_types(
            vec![RiskParameter(0.01), RiskParameter(0.1), RiskParameter(0.2)],
            vec![0.0, 0.5, 0.5],
        );
        assert!((spec.mean_theta() - 0.15).abs() < 1e-15);
    }
}
