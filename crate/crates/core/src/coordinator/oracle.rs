use std::collections::{BTreeMap, BTreeSet};

use crate::belief_filter::{Belief, TypeSet};
use crate::game_model::{
    apply_move, path_criterion, validate_spec, EdgeId, GameSpec, HumanAction, MachineAction, MachineAggregator,
    NodeId, TypeIndex,
};
use crate::risk_measures::{cvar_aggregate, EmpiricalOutcome};
use crate::scalar::{approx_eq, Scalar};

use super::SolveError;

/// Default cap on enumerated candidates.
pub const DEFAULT_ORACLE_LIMIT: usize = 10_000_000;

/// What one type does under a coordinator plan.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypePlan {
    pub edges: Vec<EdgeId>,
    pub overrides: usize,
    /// Human signal in each period, ending with the period that stopped.
    pub signals: Vec<HumanAction>,
}

/// A complete coordinator plan, summarized by each type's realized play.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPlan<S> {
    pub plans: BTreeMap<TypeIndex, TypePlan>,
    pub criteria: BTreeMap<TypeIndex, S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<S> {
    pub value: S,
    pub minimizers: Vec<JointPlan<S>>,
    /// Candidates enumerated before pruning.
    pub enumerated: usize,
}

struct Search<'a, S> {
    spec: &'a GameSpec<S>,
    limit: usize,
    enumerated: usize,
}

/// Exhaustive search over deterministic coordinator plans.
///
/// Starting from the root, every prescription (machine action plus one human
/// action per pooled type) is tried. Types that send the same signal stay
/// pooled; the rest continue independently. Each complete plan is scored by
/// `path_criterion` on every type's full path, and the machine aggregator is
/// applied to the resulting per-type criteria. Candidates strictly dominated
/// type-by-type inside a pooled group are discarded, which is safe for any
/// monotone aggregator; for strictly monotone ones (expectation with positive
/// weights) the minimizer list is complete.
pub fn brute_force_oracle<S: Scalar>(spec: &GameSpec<S>, limit: usize) -> Result<OracleResult<S>, SolveError> {
    let violations = validate_spec(spec);
    if !violations.is_empty() {
        return Err(SolveError::InvalidSpec(violations));
    }
    let root_support = Belief::from_prior(spec.prior())?.support();
    let mut search = Search { spec, limit, enumerated: 0 };
    let prefix: BTreeMap<TypeIndex, TypePlan> = root_support
        .iter()
        .map(|t| (t, TypePlan { edges: Vec::new(), overrides: 0, signals: Vec::new() }))
        .collect();
    let candidates = search.explore(spec.start(), root_support, 1, &prefix)?;
    if candidates.is_empty() {
        return Err(SolveError::Infeasible(super::BeliefState::new(spec.start(), root_support, 1)));
    }

    let mut scored = Vec::with_capacity(candidates.len());
    for c in candidates {
        let v = aggregate_criteria(spec, &c.criteria)?;
        scored.push((v, c));
    }
    let best = scored
        .iter()
        .map(|(v, _)| v.clone())
        .reduce(|a, b| if b < a { b } else { a })
        .expect("non-empty");
    let minimizers = scored.into_iter().filter(|(v, _)| approx_eq(v, &best)).map(|(_, c)| c).collect();
    Ok(OracleResult { value: best, minimizers, enumerated: search.enumerated })
}

/// Machine aggregator over per-type criteria, weighted by the prior.
pub fn aggregate_criteria<S: Scalar>(spec: &GameSpec<S>, criteria: &BTreeMap<TypeIndex, S>) -> Result<S, SolveError> {
    let prior = spec.prior();
    match spec.aggregator() {
        MachineAggregator::Expectation => {
            Ok(criteria.iter().map(|(t, c)| prior[*t].clone() * c.clone()).sum())
        }
        MachineAggregator::Cvar(alpha) => {
            let outcomes = EmpiricalOutcome::new(criteria.iter().map(|(t, c)| (c.clone(), prior[*t].clone())).collect())?;
            Ok(cvar_aggregate(&outcomes, alpha)?)
        }
    }
}

impl<S: Scalar> Search<'_, S> {
    fn charge(&mut self, n: usize) -> Result<(), SolveError> {
        self.enumerated = self.enumerated.saturating_add(n);
        if self.enumerated > self.limit {
            return Err(SolveError::SizeGuard { limit: self.limit });
        }
        Ok(())
    }

    fn explore(
        &mut self,
        node: NodeId,
        group: TypeSet,
        period: usize,
        prefix: &BTreeMap<TypeIndex, TypePlan>,
    ) -> Result<Vec<JointPlan<S>>, SolveError> {
        let spec = self.spec;
        if period > spec.horizon() {
            return Ok(Vec::new());
        }
        let types: Vec<TypeIndex> = group.iter().collect();
        let human_actions = spec.legal_human_actions(node);
        let mut seen: BTreeSet<Vec<(HumanAction, MachineAction)>> = BTreeSet::new();
        let mut out: Vec<JointPlan<S>> = Vec::new();

        for m in spec.legal_machine_actions(node) {
            for assignment in assignments(types.len(), human_actions.len()) {
                let signature: Vec<(HumanAction, MachineAction)> = assignment
                    .iter()
                    .map(|&a| {
                        let h = human_actions[a];
                        (h, h.as_move().unwrap_or(m))
                    })
                    .collect();
                // prescriptions differing only in an ignored machine action
                if !seen.insert(signature.clone()) {
                    continue;
                }

                // pool by signal
                let mut groups: BTreeMap<HumanAction, (MachineAction, Vec<TypeIndex>)> = BTreeMap::new();
                for (slot, (h, eff)) in signature.iter().enumerate() {
                    groups.entry(*h).or_insert((*eff, Vec::new())).1.push(types[slot]);
                }

                let mut partial: Vec<JointPlan<S>> =
                    vec![JointPlan { plans: BTreeMap::new(), criteria: BTreeMap::new() }];
                for (h, (eff, members)) in &groups {
                    let overridden = *h != HumanAction::Silent;
                    let outcome = apply_move(spec, node, *eff, overridden)?;
                    let mut extended: BTreeMap<TypeIndex, TypePlan> = BTreeMap::new();
                    for t in members {
                        let mut plan = prefix[t].clone();
                        plan.signals.push(*h);
                        plan.overrides += usize::from(overridden);
                        if let Some(e) = outcome.edge {
                            plan.edges.push(e);
                        }
                        extended.insert(*t, plan);
                    }
                    let sub = if outcome.stopped {
                        self.charge(1)?;
                        let mut criteria = BTreeMap::new();
                        for (t, plan) in &extended {
                            criteria.insert(*t, path_criterion(spec, &plan.edges, plan.overrides, &spec.types()[*t])?);
                        }
                        vec![JointPlan { plans: extended, criteria }]
                    } else {
                        let members: TypeSet = members.iter().copied().collect();
                        self.explore(outcome.next, members, period + 1, &extended)?
                    };
                    if sub.is_empty() {
                        partial.clear();
                        break;
                    }
                    self.charge(partial.len().saturating_mul(sub.len()))?;
                    partial = partial
                        .iter()
                        .flat_map(|p| {
                            sub.iter().map(move |s| {
                                let mut merged = p.clone();
                                merged.plans.extend(s.plans.clone());
                                merged.criteria.extend(s.criteria.clone());
                                merged
                            })
                        })
                        .collect();
                }
                out.extend(partial);
            }
        }
        Ok(prune(out))
    }
}

/// All vectors in `{0..radix}^len`, lexicographic.
fn assignments(len: usize, radix: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = radix.pow(len as u32);
    (0..total).map(move |mut code| {
        let mut v = vec![0; len];
        for slot in (0..len).rev() {
            v[slot] = code % radix;
            code /= radix;
        }
        v
    })
}

/// Drops duplicate plans and plans strictly dominated type-by-type.
fn prune<S: Scalar>(candidates: Vec<JointPlan<S>>) -> Vec<JointPlan<S>> {
    let mut unique: Vec<JointPlan<S>> = Vec::new();
    for c in candidates {
        if !unique.iter().any(|u| u.plans == c.plans) {
            unique.push(c);
        }
    }
    let dominated = |a: &JointPlan<S>, b: &JointPlan<S>| {
        // b strictly dominates a
        let mut strict = false;
        for (t, ca) in &a.criteria {
            let cb = &b.criteria[t];
            if cb > ca {
                return false;
            }
            if cb < ca {
                strict = true;
            }
        }
        strict
    };
    unique
        .iter()
        .filter(|a| !unique.iter().any(|b| dominated(a, b)))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coordinator::solve_dp;
    use crate::game_model::Direction;
    use crate::scalar::Rational;

    fn r(x: f64) -> Rational {
        Rational::from_f64(x)
    }

    fn diamond(prior: [f64; 2], q: f64) -> GameSpec<Rational> {
        GameSpec::builder()
            .nodes(["s", "a", "b", "t"])
            .edge("s", "a", Direction::N, r(1.0), r(30.0))
            .edge("s", "b", Direction::E, r(3.0), r(2.0))
            .edge("a", "t", Direction::E, r(2.0), r(30.0))
            .edge("b", "t", Direction::N, r(2.0), r(1.0))
            .terminal("t", r(-1.0), r(1.0))
            .start("s")
            .horizon(3)
            .types([r(0.05), r(0.5)])
            .prior([r(prior[0]), r(prior[1])])
            .transmission_cost(r(q))
            .build()
            .unwrap()
    }

    #[test]
    fn agrees_with_backward_induction_on_diamond() {
        for q in [0.0, 0.3, 5.0] {
            let spec = diamond([0.4, 0.6], q);
            let exact = brute_force_oracle(&spec, DEFAULT_ORACLE_LIMIT).unwrap();
            let dp = solve_dp(&spec).unwrap();
            assert_eq!(&exact.value, dp.root_value().unwrap(), "q = {q}");
            assert!(!exact.minimizers.is_empty());
        }
    }

    #[test]
    fn single_type_is_its_best_path() {
        let spec = diamond([1.0, 0.0], 0.3);
        let exact = brute_force_oracle(&spec, DEFAULT_ORACLE_LIMIT).unwrap();
        // N route: 3 - 1 + 0.05 * 61 = 5.05 ; E route: 4 + 0.05 * 4 = 4.2
        assert_eq!(exact.value, r(4.2));
        assert!(exact.minimizers.iter().all(|m| m.plans[&0].overrides == 0));
    }

    #[test]
    fn guard_trips_on_tiny_limit() {
        let spec = diamond([0.5, 0.5], 0.3);
        assert_eq!(brute_force_oracle(&spec, 3).unwrap_err(), SolveError::SizeGuard { limit: 3 });
    }

    #[test]
    fn cvar_aggregator_is_supported() {
        let spec = diamond([0.5, 0.5], 0.3).with_aggregator(MachineAggregator::Cvar(r(0.5)));
        let exact = brute_force_oracle(&spec, DEFAULT_ORACLE_LIMIT).unwrap();
        // CVaR at 0.5 of two equal-weight types is the worse type's criterion
        let worst = exact.minimizers[0].criteria.values().max().unwrap().clone();
        assert_eq!(exact.value, worst);
    }
}
