use std::collections::BTreeMap;
use std::fmt;

use crate::belief_filter::{bayes_update, Belief, TypeSet};
use crate::game_model::{apply_move, path_criterion, EdgeId, GameSpec, HumanAction, TypeIndex};
use crate::scalar::{strictly_less, Scalar};

use super::oracle::aggregate_criteria;
use super::{stage_value, BeliefState, CoordinatorPolicy, SolveError};

/// Cap on deviation evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviationBudget(pub usize);

impl Default for DeviationBudget {
    fn default() -> Self {
        DeviationBudget(10_000_000)
    }
}

/// One incentive check: the value under the policy against the best
/// unilateral deviation found.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult<S> {
    pub passed: bool,
    pub equilibrium_value: S,
    pub best_deviation_value: S,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefCheck {
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport<S> {
    pub machine_ic: CheckResult<S>,
    pub human_ic: Vec<(TypeIndex, CheckResult<S>)>,
    pub beliefs: BeliefCheck,
}

impl<S> EquilibriumReport<S> {
    pub fn all_pass(&self) -> bool {
        self.machine_ic.passed && self.human_ic.iter().all(|(_, c)| c.passed) && self.beliefs.passed
    }
}

impl<S: fmt::Display> fmt::Display for EquilibriumReport<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = |p: bool| if p { "PASS" } else { "FAIL" };
        writeln!(
            f,
            "machine IC: {} (policy {}, best deviation {}) {}",
            verdict(self.machine_ic.passed),
            self.machine_ic.equilibrium_value,
            self.machine_ic.best_deviation_value,
            self.machine_ic.detail
        )?;
        for (t, c) in &self.human_ic {
            writeln!(
                f,
                "human IC θ{}: {} (policy {}, best deviation {}) {}",
                t + 1,
                verdict(c.passed),
                c.equilibrium_value,
                c.best_deviation_value,
                c.detail
            )?;
        }
        write!(f, "beliefs: {}", verdict(self.beliefs.passed))?;
        if !self.beliefs.detail.is_empty() {
            write!(f, " {}", self.beliefs.detail)?;
        }
        Ok(())
    }
}

/// Checks a coordinator policy against the equilibrium conditions.
///
/// Machine: every deterministic machine strategy is tried against the
/// policy's human prescriptions, with beliefs following the policy's
/// posteriors. Human: each type best-responds to the machine's policy; an
/// observation no supported type was prescribed leaves the support as it
/// was. Beliefs: along each type's play, the policy's posterior must equal
/// the Bayes update of the current support.
pub fn verify_equilibrium<S: Scalar>(
    spec: &GameSpec<S>,
    policy: &CoordinatorPolicy<S>,
    budget: DeviationBudget,
) -> Result<EquilibriumReport<S>, SolveError> {
    let root = policy.root();
    let mut criteria = BTreeMap::new();
    for t in root.support.iter() {
        let (edges, overrides) = policy.realize(spec, t)?;
        criteria.insert(t, path_criterion(spec, &edges, overrides, &spec.types()[t])?);
    }
    let mut counter = Counter { used: 0, budget: budget.0 };

    let machine_ic = {
        let eq = aggregate_criteria(spec, &criteria)?;
        let prefix = root.support.iter().map(|t| (t, (Vec::new(), 0))).collect();
        let candidates = machine_deviations(spec, policy, root, &prefix, &mut counter)?;
        let mut best: Option<(S, Vec<(TypeIndex, S)>)> = None;
        for c in candidates {
            let v = aggregate_criteria(spec, &c)?;
            if best.as_ref().map_or(true, |(b, _)| v < *b) {
                best = Some((v, c.into_iter().collect()));
            }
        }
        let (dev, detail) = match best {
            Some((v, per_type)) => {
                let parts: Vec<String> = per_type.iter().map(|(t, c)| format!("θ{}={}", t + 1, c)).collect();
                (v, parts.join(" "))
            }
            None => (eq.clone(), "no feasible deviation".to_string()),
        };
        CheckResult { passed: !strictly_less(&dev, &eq), equilibrium_value: eq, best_deviation_value: dev, detail }
    };

    let mut human_ic = Vec::new();
    for t in root.support.iter() {
        let eq = criteria[&t].clone();
        let mut memo = BTreeMap::new();
        let best = human_best_response(spec, policy, t, root, &mut memo, &mut counter)?;
        let (dev, detail) = match best {
            Some((v, first)) => (v, format!("first action {first}")),
            None => (eq.clone(), "no feasible deviation".to_string()),
        };
        human_ic.push((
            t,
            CheckResult { passed: !strictly_less(&dev, &eq), equilibrium_value: eq, best_deviation_value: dev, detail },
        ));
    }

    let beliefs = check_beliefs(spec, policy)?;
    Ok(EquilibriumReport { machine_ic, human_ic, beliefs })
}

struct Counter {
    used: usize,
    budget: usize,
}

impl Counter {
    fn charge(&mut self, n: usize) -> Result<(), SolveError> {
        self.used = self.used.saturating_add(n);
        if self.used > self.budget {
            return Err(SolveError::BudgetExceeded { budget: self.budget });
        }
        Ok(())
    }
}

type Prefix = BTreeMap<TypeIndex, (Vec<EdgeId>, usize)>;

/// Per-type criteria for every machine strategy from `state`, with
/// dominated ones removed.
fn machine_deviations<S: Scalar>(
    spec: &GameSpec<S>,
    policy: &CoordinatorPolicy<S>,
    state: BeliefState,
    prefix: &Prefix,
    counter: &mut Counter,
) -> Result<Vec<BTreeMap<TypeIndex, S>>, SolveError> {
    if state.period > spec.horizon() {
        return Ok(Vec::new());
    }
    let Some(p) = policy.decision(&state) else {
        return Ok(Vec::new());
    };
    let mut groups: BTreeMap<HumanAction, Vec<TypeIndex>> = BTreeMap::new();
    for t in prefix.keys() {
        let h = p.human_action(*t).ok_or(SolveError::PolicyUndefined(state))?;
        groups.entry(h).or_default().push(*t);
    }

    let mut out = Vec::new();
    for m in spec.legal_machine_actions(state.node) {
        // a machine action ignored by every group repeats another candidate
        if m != p.machine && groups.keys().all(|h| h.as_move().is_some()) {
            continue;
        }
        let mut partial: Vec<BTreeMap<TypeIndex, S>> = vec![BTreeMap::new()];
        for (h, members) in &groups {
            let (eff, overridden) = match h.as_move() {
                Some(e) => (e, true),
                None => (m, false),
            };
            let outcome = apply_move(spec, state.node, eff, overridden)?;
            let extended: Prefix = members
                .iter()
                .map(|t| {
                    let (mut edges, mut n) = prefix[t].clone();
                    edges.extend(outcome.edge);
                    n += usize::from(overridden);
                    (*t, (edges, n))
                })
                .collect();
            let sub = if outcome.stopped {
                counter.charge(1)?;
                let mut c = BTreeMap::new();
                for (t, (edges, n)) in &extended {
                    c.insert(*t, path_criterion(spec, edges, *n, &spec.types()[*t])?);
                }
                vec![c]
            } else {
                let support = policy
                    .posterior(&state, *h)
                    .ok_or(SolveError::MissingPosterior { state, action: *h })?;
                let next = BeliefState::new(outcome.next, support, state.period + 1);
                machine_deviations(spec, policy, next, &extended, counter)?
            };
            if sub.is_empty() {
                partial.clear();
                break;
            }
            counter.charge(partial.len().saturating_mul(sub.len()))?;
            partial = partial
                .iter()
                .flat_map(|a| {
                    sub.iter().map(move |b| {
                        let mut merged = a.clone();
                        merged.extend(b.clone());
                        merged
                    })
                })
                .collect();
        }
        out.extend(partial);
    }
    Ok(pareto_front(out))
}

fn pareto_front<S: Scalar>(candidates: Vec<BTreeMap<TypeIndex, S>>) -> Vec<BTreeMap<TypeIndex, S>> {
    let dominates = |b: &BTreeMap<TypeIndex, S>, a: &BTreeMap<TypeIndex, S>| {
        b.iter().all(|(t, v)| *v <= a[t]) && b.iter().any(|(t, v)| *v < a[t])
    };
    let mut front: Vec<BTreeMap<TypeIndex, S>> = Vec::new();
    for c in candidates {
        if front.iter().any(|f| dominates(f, &c) || *f == c) {
            continue;
        }
        front.retain(|f| !dominates(&c, f));
        front.push(c);
    }
    front
}

/// Best criterion type `t` can reach from `state` against the machine's
/// policy, with the first action that reaches it.
fn human_best_response<S: Scalar>(
    spec: &GameSpec<S>,
    policy: &CoordinatorPolicy<S>,
    t: TypeIndex,
    state: BeliefState,
    memo: &mut BTreeMap<BeliefState, Option<(S, HumanAction)>>,
    counter: &mut Counter,
) -> Result<Option<(S, HumanAction)>, SolveError> {
    if let Some(v) = memo.get(&state) {
        return Ok(v.clone());
    }
    if state.period > spec.horizon() {
        return Ok(None);
    }
    let Some(p) = policy.decision(&state) else {
        memo.insert(state, None);
        return Ok(None);
    };
    let mut best: Option<(S, HumanAction)> = None;
    for h in spec.legal_human_actions(state.node) {
        counter.charge(1)?;
        let (eff, overridden) = match h.as_move() {
            Some(e) => (e, true),
            None => (p.machine, false),
        };
        let outcome = apply_move(spec, state.node, eff, overridden)?;
        let stage = stage_value(spec, t, &outcome.cost);
        let total = if outcome.stopped {
            Some(stage)
        } else {
            let support = match policy.posterior(&state, h) {
                Some(s) => s,
                None if p.group(h).is_empty() => state.support,
                None => return Err(SolveError::MissingPosterior { state, action: h }),
            };
            let next = BeliefState::new(outcome.next, support, state.period + 1);
            human_best_response(spec, policy, t, next, memo, counter)?.map(|(v, _)| stage + v)
        };
        if let Some(total) = total {
            if best.as_ref().map_or(true, |(b, _)| strictly_less(&total, b)) {
                best = Some((total, h));
            }
        }
    }
    memo.insert(state, best.clone());
    Ok(best)
}

fn check_beliefs<S: Scalar>(spec: &GameSpec<S>, policy: &CoordinatorPolicy<S>) -> Result<BeliefCheck, SolveError> {
    for t in policy.root().support.iter() {
        for step in policy.trace(spec, t)? {
            if !step.state.support.contains(t) {
                return Ok(BeliefCheck {
                    passed: false,
                    detail: format!("θ{} outside support at {}", t + 1, step.state),
                });
            }
            let Some(posterior) = step.posterior else { continue };
            let p = policy.decision(&step.state).ok_or(SolveError::PolicyUndefined(step.state))?;
            let belief = Belief::restricted(spec.prior(), step.state.support)?;
            let slice: BTreeMap<TypeIndex, HumanAction> =
                p.human.iter().filter(|(u, _)| step.state.support.contains(**u)).map(|(u, a)| (*u, *a)).collect();
            let expected: TypeSet = bayes_update(&belief, step.human, &slice)?.support();
            if expected != posterior {
                return Ok(BeliefCheck {
                    passed: false,
                    detail: format!(
                        "θ{} at period {} node {}: posterior {} but Bayes gives {}",
                        t + 1,
                        step.state.period,
                        spec.node_name(step.state.node),
                        posterior,
                        expected
                    ),
                });
            }
        }
    }
    Ok(BeliefCheck { passed: true, detail: String::new() })
}
