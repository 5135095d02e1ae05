//! Coordinator formulation: one planner picks the machine's action and a
//! human action for every type still in the belief support.
//!
//! The belief-augmented problem is solved exactly by backward induction over
//! `(node, support, period)` ([`solve_dp`]), cross-checked by exhaustive plan
//! enumeration ([`brute_force_oracle`]), and its output is audited against the
//! equilibrium conditions by [`verify_equilibrium`].

mod dp;
mod oracle;
mod verify;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use dp::solve_dp;
pub use oracle::{aggregate_criteria, brute_force_oracle, JointPlan, OracleResult, TypePlan, DEFAULT_ORACLE_LIMIT};
pub use verify::{verify_equilibrium, BeliefCheck, CheckResult, DeviationBudget, EquilibriumReport};

use crate::belief_filter::{FilterError, TypeSet};
use crate::game_model::{
    apply_move, effective_action, EdgeId, GameError, GameSpec, HumanAction, MachineAction, NodeId, TypeIndex,
    Violation,
};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid game: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidSpec(Vec<Violation>),
    #[error("exact backward induction needs the expectation aggregator")]
    UnsupportedAggregator,
    #[error("no terminal reachable within the horizon from {0}")]
    Infeasible(BeliefState),
    #[error("policy undefined at {0}")]
    PolicyUndefined(BeliefState),
    #[error("policy has no posterior for {action} at {state}")]
    MissingPosterior { state: BeliefState, action: HumanAction },
    #[error("enumeration exceeds the guard of {limit} candidates")]
    SizeGuard { limit: usize },
    #[error("deviation enumeration exceeds the budget of {budget} evaluations")]
    BudgetExceeded { budget: usize },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Risk(#[from] crate::risk_measures::RiskError),
}

/// State of the belief-augmented decision process. Periods start at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BeliefState {
    pub node: NodeId,
    pub support: TypeSet,
    pub period: usize,
}

impl BeliefState {
    pub fn new(node: NodeId, support: TypeSet, period: usize) -> Self {
        Self { node, support, period }
    }
}

impl fmt::Display for BeliefState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(node #{}, support {}, period {})", self.node.0, self.support, self.period)
    }
}

/// The coordinator's decision at one belief state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prescription {
    pub machine: MachineAction,
    pub human: BTreeMap<TypeIndex, HumanAction>,
}

impl Prescription {
    pub fn human_action(&self, t: TypeIndex) -> Option<HumanAction> {
        self.human.get(&t).copied()
    }

    /// Types prescribed `action`.
    pub fn group(&self, action: HumanAction) -> TypeSet {
        self.human.iter().filter(|(_, a)| **a == action).map(|(t, _)| *t).collect()
    }
}

/// Decision and value tables over belief states, plus the posterior the
/// machine adopts after each prescribed observation.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatorPolicy<S> {
    root: BeliefState,
    decisions: BTreeMap<BeliefState, Prescription>,
    values: BTreeMap<BeliefState, S>,
    posteriors: BTreeMap<(BeliefState, HumanAction), TypeSet>,
}

/// One period of a type's play under a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub state: BeliefState,
    pub human: HumanAction,
    pub machine: MachineAction,
    pub effective: MachineAction,
    pub overridden: bool,
    pub edge: Option<EdgeId>,
    /// Support after observing `human`; `None` once stopped.
    pub posterior: Option<TypeSet>,
}

impl<S: Scalar> CoordinatorPolicy<S> {
    pub(crate) fn empty(root: BeliefState) -> Self {
        Self { root, decisions: BTreeMap::new(), values: BTreeMap::new(), posteriors: BTreeMap::new() }
    }

    /// Builds a policy from a decision rule evaluated on every state whose
    /// support lies inside the prior's support. Posteriors follow the
    /// restriction rule; values are left empty.
    pub fn from_rule<F>(spec: &GameSpec<S>, mut rule: F) -> Result<Self, SolveError>
    where
        F: FnMut(&BeliefState) -> Option<Prescription>,
    {
        let root_support = crate::belief_filter::Belief::from_prior(spec.prior())?.support();
        let mut policy = Self::empty(BeliefState::new(spec.start(), root_support, 1));
        for period in 1..=spec.horizon() {
            for node in spec.nodes() {
                for support in root_support.subsets() {
                    let state = BeliefState::new(node, support, period);
                    if let Some(p) = rule(&state) {
                        for a in p.human.values() {
                            policy.posteriors.insert((state, *a), p.group(*a));
                        }
                        policy.decisions.insert(state, p);
                    }
                }
            }
        }
        Ok(policy)
    }

    pub fn root(&self) -> BeliefState {
        self.root
    }

    /// Optimal weighted criterion at the root, when values were computed.
    pub fn root_value(&self) -> Option<&S> {
        self.values.get(&self.root)
    }

    pub fn decision(&self, state: &BeliefState) -> Option<&Prescription> {
        self.decisions.get(state)
    }

    pub fn value(&self, state: &BeliefState) -> Option<&S> {
        self.values.get(state)
    }

    pub fn posterior(&self, state: &BeliefState, action: HumanAction) -> Option<TypeSet> {
        self.posteriors.get(&(*state, action)).copied()
    }

    pub fn decisions(&self) -> &BTreeMap<BeliefState, Prescription> {
        &self.decisions
    }

    pub fn set_decision(&mut self, state: BeliefState, prescription: Prescription) {
        self.decisions.insert(state, prescription);
    }

    pub fn set_posterior(&mut self, state: BeliefState, action: HumanAction, support: TypeSet) {
        self.posteriors.insert((state, action), support);
    }

    pub(crate) fn set_value(&mut self, state: BeliefState, value: S) {
        self.values.insert(state, value);
    }

    /// Play of type `t` from the root, following the policy's own posteriors.
    pub fn trace(&self, spec: &GameSpec<S>, t: TypeIndex) -> Result<Vec<TraceStep>, SolveError> {
        let mut state = self.root;
        let mut steps = Vec::new();
        loop {
            if state.period > spec.horizon() {
                return Err(SolveError::Infeasible(state));
            }
            let p = self.decisions.get(&state).ok_or(SolveError::PolicyUndefined(state))?;
            let human = p.human_action(t).ok_or(SolveError::PolicyUndefined(state))?;
            let (effective, overridden) = effective_action(spec, state.node, human, p.machine)?;
            let out = apply_move(spec, state.node, effective, overridden)?;
            if out.stopped {
                steps.push(TraceStep { state, human, machine: p.machine, effective, overridden, edge: None, posterior: None });
                return Ok(steps);
            }
            let posterior = self
                .posterior(&state, human)
                .ok_or(SolveError::MissingPosterior { state, action: human })?;
            steps.push(TraceStep {
                state,
                human,
                machine: p.machine,
                effective,
                overridden,
                edge: out.edge,
                posterior: Some(posterior),
            });
            state = BeliefState::new(out.next, posterior, state.period + 1);
        }
    }

    /// Edges travelled and overrides sent by type `t`.
    pub fn realize(&self, spec: &GameSpec<S>, t: TypeIndex) -> Result<(Vec<EdgeId>, usize), SolveError> {
        let steps = self.trace(spec, t)?;
        let edges = steps.iter().filter_map(|s| s.edge).collect();
        let overrides = steps.iter().filter(|s| s.overridden).count();
        Ok((edges, overrides))
    }
}

/// Unweighted stage criterion of type `t`: `mean + theta * variance`.
/// `cost` already carries the transmission charge.
pub(crate) fn stage_value<S: Scalar>(
    spec: &GameSpec<S>,
    t: TypeIndex,
    cost: &crate::risk_measures::CostDistribution<S>,
) -> S {
    stage_value_for(spec.theta(t), cost)
}

pub(crate) fn stage_value_for<S: Scalar>(theta: &S, cost: &crate::risk_measures::CostDistribution<S>) -> S {
    cost.mean.clone() + theta.clone() * cost.variance.clone()
}
