use crate::belief_filter::{Belief, TypeSet};
use crate::game_model::{
    apply_move, validate_spec, GameSpec, HumanAction, MachineAction, MachineAggregator, NodeId,
};
use crate::risk_measures::CostDistribution;
use crate::scalar::{strictly_less, Scalar};

use super::{stage_value, BeliefState, CoordinatorPolicy, Prescription, SolveError};

/// Outcome of one effective move from a node.
struct MoveInfo<S> {
    next: Option<NodeId>,
    cost: CostDistribution<S>,
}

/// Exact backward induction over `(node, support, period)`.
///
/// With deterministic movement and independent edge costs each type's
/// mean-variance criterion is a sum of per-edge terms, so the weighted
/// objective splits across the groups of a prescription and Bellman
/// optimality holds. Ties go to the first candidate in machine order
/// (N, S, E, W, STOP), then human order (SILENT, N, S, E, W, STOP) compared
/// type by type from the lowest index.
pub fn solve_dp<S: Scalar>(spec: &GameSpec<S>) -> Result<CoordinatorPolicy<S>, SolveError> {
    let violations = validate_spec(spec);
    if !violations.is_empty() {
        return Err(SolveError::InvalidSpec(violations));
    }
    if !matches!(spec.aggregator(), MachineAggregator::Expectation) {
        return Err(SolveError::UnsupportedAggregator);
    }

    let weights = spec.prior();
    let root_support = Belief::from_prior(weights)?.support();
    let horizon = spec.horizon();
    let n_nodes = spec.node_count();
    let table_width = 1usize << spec.type_count();
    let index = |period: usize, node: NodeId, support: TypeSet| {
        (period * n_nodes + node.0) * table_width + support.bits() as usize
    };
    // values[period][node][support]; period horizon+1 is all infeasible
    let mut values: Vec<Option<S>> = vec![None; (horizon + 2) * n_nodes * table_width];
    let mut policy = CoordinatorPolicy::empty(BeliefState::new(spec.start(), root_support, 1));


    for period in (1..=horizon).rev() {
        for node in spec.nodes() {
            let machine_actions = spec.legal_machine_actions(node);
            let human_actions = spec.legal_human_actions(node);
            // every effective move, silent and overridden
            let moves: Vec<(MachineAction, [MoveInfo<S>; 2])> = machine_actions
                .iter()
                .map(|&m| {
                    let info = |o: bool| {
                        let out = apply_move(spec, node, m, o).expect("legal move");
                        MoveInfo { next: (!out.stopped).then_some(out.next), cost: out.cost }
                    };
                    (m, [info(false), info(true)])
                })
                .collect();
            let move_of = |m: MachineAction| moves.iter().position(|(a, _)| *a == m).expect("legal move");

            for support in root_support.subsets() {
                let types: Vec<usize> = support.iter().collect();
                // weighted stage contribution per (type slot, move, override)
                let contribution: Vec<Vec<[S; 2]>> = types
                    .iter()
                    .map(|&t| {
                        moves
                            .iter()
                            .map(|(_, info)| {
                                [0, 1].map(|o| weights[t].clone() * stage_value(spec, t, &info[o].cost))
                            })
                            .collect()
                    })
                    .collect();

                // value of one group of types taking the same human action
                let group_value = |members: TypeSet, slots: &[usize], move_idx: usize, o: usize| -> Option<S> {
                    let info = &moves[move_idx].1[o];
                    let stage: S = slots.iter().map(|&k| contribution[k][move_idx][o].clone()).sum();
                    match info.next {
                        None => Some(stage),
                        Some(next) => values[index(period + 1, next, members)].clone().map(|v| stage + v),
                    }
                };

                let mut best: Option<(S, Prescription)> = None;
                let mut assignment = vec![0usize; types.len()];
                for &(m, _) in &moves {
                    assignment.iter_mut().for_each(|a| *a = 0);
                    loop {
                        // group slots by human action
                        let mut groups: Vec<(HumanAction, TypeSet, Vec<usize>)> = Vec::new();
                        for (slot, &a_idx) in assignment.iter().enumerate() {
                            let a = human_actions[a_idx];
                            match groups.iter_mut().find(|g| g.0 == a) {
                                Some(g) => {
                                    g.1.insert(types[slot]);
                                    g.2.push(slot);
                                }
                                None => groups.push((a, TypeSet::singleton(types[slot]), vec![slot])),
                            }
                        }
                        let mut total = Some(S::zero());
                        for (a, members, slots) in &groups {
                            let (eff, o) = match a.as_move() {
                                None => (m, 0),
                                Some(e) => (e, 1),
                            };
                            total = match (total, group_value(*members, slots, move_of(eff), o)) {
                                (Some(t), Some(v)) => Some(t + v),
                                _ => None,
                            };
                        }
                        if let Some(total) = total {
                            let better = match &best {
                                None => true,
                                Some((b, _)) => strictly_less(&total, b),
                            };
                            if better {
                                let human = types
                                    .iter()
                                    .zip(&assignment)
                                    .map(|(&t, &a)| (t, human_actions[a]))
                                    .collect();
                                best = Some((total, Prescription { machine: m, human }));
                            }
                        }
                        if !advance(&mut assignment, human_actions.len()) {
                            break;
                        }
                    }
                }

                if let Some((value, prescription)) = best {
                    let state = BeliefState::new(node, support, period);
                    for a in prescription.human.values() {
                        policy.set_posterior(state, *a, prescription.group(*a));
                    }
                    policy.set_decision(state, prescription);
                    policy.set_value(state, value.clone());
                    values[index(period, node, support)] = Some(value);
                }
            }
        }
    }

    if policy.root_value().is_none() {
        return Err(SolveError::Infeasible(policy.root()));
    }
    Ok(policy)
}

/// Odometer step, last slot fastest. Returns false after the last assignment.
fn advance(assignment: &mut [usize], radix: usize) -> bool {
    for slot in assignment.iter_mut().rev() {
        *slot += 1;
        if *slot < radix {
            return true;
        }
        *slot = 0;
    }
    false
}
