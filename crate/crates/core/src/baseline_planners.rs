//! Comparison planners: risk-adjusted shortest paths, the best-case
//! benchmark, and the machine-neutral and machine-average baselines.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::belief_filter::Belief;
use crate::coordinator::stage_value_for;
use crate::game_model::{
    apply_move, path_criterion, validate_spec, EdgeId, GameError, GameSpec, HumanAction, MachineAction, NodeId,
    TypeIndex, Violation,
};
use crate::risk_measures::RiskParameter;
use crate::scalar::{strictly_less, Scalar};

/// Node-count cap for path enumeration.
pub const PATH_ORACLE_MAX_NODES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid game: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidSpec(Vec<Violation>),
    #[error("no terminal reachable from the start within the horizon")]
    Unreachable,
    #[error("path enumeration is limited to {limit} nodes, graph has {nodes}")]
    TooManyNodes { nodes: usize, limit: usize },
    #[error(transparent)]
    Game(#[from] GameError),
}

/// A single route chosen by a planner, scored for every type.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerResult<S> {
    pub path: Vec<EdgeId>,
    pub per_type_criterion: BTreeMap<TypeIndex, S>,
    pub planner_theta: S,
    /// Criterion of the path under `planner_theta`.
    pub criterion: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    Neutral,
    Average,
}

/// One simple start-to-terminal path with its summed moments.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEntry<S> {
    pub edges: Vec<EdgeId>,
    pub terminal: NodeId,
    /// Edge sums plus the terminal's cost.
    pub mean: S,
    pub variance: S,
    pub terminal_mean: S,
    pub terminal_variance: S,
    /// Whether the path plus STOP fits in the horizon.
    pub fits_horizon: bool,
}

impl<S: Scalar> PathEntry<S> {
    pub fn criterion(&self, theta: &S) -> S {
        self.mean.clone() + theta.clone() * self.variance.clone()
    }
}

/// Every simple path from the start that ends at a terminal. A path may
/// run through a terminal and continue; each terminal visit is an entry.
pub fn enumerate_paths_oracle<S: Scalar>(spec: &GameSpec<S>) -> Result<Vec<PathEntry<S>>, PlanError> {
    if spec.node_count() > PATH_ORACLE_MAX_NODES {
        return Err(PlanError::TooManyNodes { nodes: spec.node_count(), limit: PATH_ORACLE_MAX_NODES });
    }
    let mut out = Vec::new();
    let mut visited = vec![false; spec.node_count()];
    let mut path = Vec::new();
    dfs(spec, spec.start(), &mut visited, &mut path, &mut out);
    Ok(out)
}

fn dfs<S: Scalar>(
    spec: &GameSpec<S>,
    node: NodeId,
    visited: &mut [bool],
    path: &mut Vec<EdgeId>,
    out: &mut Vec<PathEntry<S>>,
) {
    visited[node.0] = true;
    if let Some(t) = spec.terminal_cost(node) {
        let moments = spec.path_moments(path);
        out.push(PathEntry {
            edges: path.clone(),
            terminal: node,
            mean: moments.mean,
            variance: moments.variance,
            terminal_mean: t.mean.clone(),
            terminal_variance: t.variance.clone(),
            fits_horizon: path.len() < spec.horizon(),
        });
    }
    let next: Vec<(EdgeId, NodeId)> = spec.out_edges(node).map(|(e, edge)| (e, edge.to)).collect();
    for (e, to) in next {
        if !visited[to.0] {
            path.push(e);
            dfs(spec, to, visited, path, out);
            path.pop();
        }
    }
    visited[node.0] = false;
}

/// Cost-to-go table over `(node, periods left)` for edge weights
/// `mean + theta * variance`. Ties go to the first action in N, S, E, W,
/// STOP order.
struct HopTable {
    choice: Vec<Vec<Option<MachineAction>>>,
}

impl HopTable {
    fn build<S: Scalar>(spec: &GameSpec<S>, theta: &S) -> Self {
        let horizon = spec.horizon();
        let n = spec.node_count();
        let mut value: Vec<Vec<Option<S>>> = vec![vec![None; horizon + 1]; n];
        let mut choice = vec![vec![None; horizon + 1]; n];
        for left in 1..=horizon {
            for node in spec.nodes() {
                let mut best: Option<(S, MachineAction)> = None;
                for m in spec.legal_machine_actions(node) {
                    let out = apply_move(spec, node, m, false).expect("legal move");
                    let stage = out.cost.mean.clone() + theta.clone() * out.cost.variance.clone();
                    let total = if out.stopped {
                        Some(stage)
                    } else {
                        value[out.next.0][left - 1].clone().map(|v| stage + v)
                    };
                    if let Some(total) = total {
                        if best.as_ref().map_or(true, |(b, _)| strictly_less(&total, b)) {
                            best = Some((total, m));
                        }
                    }
                }
                if let Some((v, m)) = best {
                    value[node.0][left] = Some(v);
                    choice[node.0][left] = Some(m);
                }
            }
        }
        Self { choice }
    }

    fn action(&self, node: NodeId, left: usize) -> Option<MachineAction> {
        self.choice[node.0][left]
    }

    /// Route from `node` with `left` periods.
    fn route<S: Scalar>(&self, spec: &GameSpec<S>, mut node: NodeId, mut left: usize) -> Option<Vec<EdgeId>> {
        let mut path = Vec::new();
        loop {
            match self.action(node, left)? {
                MachineAction::Stop => return Some(path),
                MachineAction::Move(d) => {
                    let e = spec.out_edge(node, d)?;
                    path.push(e);
                    node = spec.edge(e).to;
                    left -= 1;
                }
            }
        }
    }
}

fn check<S: Scalar>(spec: &GameSpec<S>) -> Result<(), PlanError> {
    let violations = validate_spec(spec);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(PlanError::InvalidSpec(violations))
    }
}

fn scored<S: Scalar>(spec: &GameSpec<S>, path: Vec<EdgeId>, theta: S) -> Result<PlannerResult<S>, PlanError> {
    let mut per_type_criterion = BTreeMap::new();
    for (t, th) in spec.types().iter().enumerate() {
        per_type_criterion.insert(t, path_criterion(spec, &path, 0, th)?);
    }
    let criterion = path_criterion(spec, &path, 0, &RiskParameter(theta.clone()))?;
    Ok(PlannerResult { path, per_type_criterion, planner_theta: theta, criterion })
}

/// Path minimizing `mean + theta * variance` among routes that stop at a
/// terminal within the horizon.
pub fn risk_adjusted_shortest_path<S: Scalar>(
    spec: &GameSpec<S>,
    theta: &RiskParameter<S>,
) -> Result<PlannerResult<S>, PlanError> {
    check(spec)?;
    let table = HopTable::build(spec, &theta.0);
    let path = table.route(spec, spec.start(), spec.horizon()).ok_or(PlanError::Unreachable)?;
    scored(spec, path, theta.0.clone())
}

/// Prior-weighted sum of each type's own optimum: the value reachable if
/// the machine knew the type from the start. Zero-weight types are skipped.
pub fn best_case_value<S: Scalar>(spec: &GameSpec<S>) -> Result<S, PlanError> {
    check(spec)?;
    let mut total = S::zero();
    for (t, th) in spec.types().iter().enumerate() {
        let w = spec.prior()[t].clone();
        if w > S::zero() {
            total = total + w * risk_adjusted_shortest_path(spec, th)?.criterion;
        }
    }
    Ok(total)
}

/// The route a machine plans for a single assumed risk level, with the
/// human never intervening.
pub fn baseline_policy<S: Scalar>(spec: &GameSpec<S>, mode: BaselineMode) -> Result<PlannerResult<S>, PlanError> {
    let theta = match mode {
        BaselineMode::Neutral => S::zero(),
        BaselineMode::Average => spec.mean_theta(),
    };
    risk_adjusted_shortest_path(spec, &RiskParameter(theta))
}

/// Each type's best response to a machine that keeps following its
/// risk-neutral plan and ignores what overrides reveal.
#[derive(Debug, Clone, PartialEq)]
pub struct OverrideResponse<S> {
    pub per_type: BTreeMap<TypeIndex, (Vec<EdgeId>, usize, S)>,
}

impl<S: Scalar> OverrideResponse<S> {
    pub fn play(&self, t: TypeIndex) -> Option<(&[EdgeId], usize)> {
        self.per_type.get(&t).map(|(p, n, _)| (p.as_slice(), *n))
    }
}

pub fn neutral_with_overrides<S: Scalar>(spec: &GameSpec<S>) -> Result<OverrideResponse<S>, PlanError> {
    check(spec)?;
    let machine = HopTable::build(spec, &S::zero());
    let support = Belief::from_prior(spec.prior()).map_err(|_| PlanError::Unreachable)?.support();
    let horizon = spec.horizon();
    let mut per_type = BTreeMap::new();
    for t in support.iter() {
        // value[node][left] for type t against the fixed machine plan
        let mut value: Vec<Vec<Option<(S, HumanAction)>>> = vec![vec![None; horizon + 1]; spec.node_count()];
        for left in 1..=horizon {
            for node in spec.nodes() {
                let Some(m) = machine.action(node, left) else { continue };
                let mut best: Option<(S, HumanAction)> = None;
                for h in spec.legal_human_actions(node) {
                    let (eff, overridden) = match h.as_move() {
                        Some(e) => (e, true),
                        None => (m, false),
                    };
                    let out = apply_move(spec, node, eff, overridden)?;
                    let stage = stage_value_for(spec.theta(t), &out.cost);
                    let total = if out.stopped {
                        Some(stage)
                    } else {
                        value[out.next.0][left - 1].as_ref().map(|(v, _)| stage + v.clone())
                    };
                    if let Some(total) = total {
                        if best.as_ref().map_or(true, |(b, _)| strictly_less(&total, b)) {
                            best = Some((total, h));
                        }
                    }
                }
                value[node.0][left] = best;
            }
        }
        let mut node = spec.start();
        let mut left = horizon;
        let mut path = Vec::new();
        let mut overrides = 0;
        loop {
            let (_, h) = value[node.0][left].clone().ok_or(PlanError::Unreachable)?;
            let m = machine.action(node, left).ok_or(PlanError::Unreachable)?;
            let (eff, overridden) = match h.as_move() {
                Some(e) => (e, true),
                None => (m, false),
            };
            overrides += usize::from(overridden);
            let out = apply_move(spec, node, eff, overridden)?;
            if out.stopped {
                break;
            }
            path.extend(out.edge);
            node = out.next;
            left -= 1;
        }
        let criterion = path_criterion(spec, &path, overrides, &spec.types()[t])?;
        per_type.insert(t, (path, overrides, criterion));
    }
    Ok(OverrideResponse { per_type })
}
