//! Exact and sampled evaluation of policies, regrets against the best-case
//! benchmark, and prior sweeps.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::baseline_planners::{
    baseline_policy, best_case_value, neutral_with_overrides, BaselineMode, OverrideResponse, PlanError, PlannerResult,
};
use crate::belief_filter::Belief;
use crate::coordinator::{aggregate_criteria, brute_force_oracle, solve_dp, CoordinatorPolicy, SolveError, DEFAULT_ORACLE_LIMIT};
use crate::game_model::{path_criterion, EdgeId, GameError, GameSpec, MachineAggregator, TypeIndex};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("policy has no play for type {0}")]
    UnknownType(TypeIndex),
    #[error("grid value {0} outside [0, 1]")]
    GridValue(f64),
    #[error("sweep axis {axis} out of range for {types} types")]
    Axis { axis: usize, types: usize },
    #[error("a single-type sweep only admits probability 1, got {0}")]
    SingleType(f64),
    #[error("at least one sample is required")]
    NoSamples,
}

/// Anything that fixes a path and an override count for each type.
pub trait RealizedPlay<S: Scalar> {
    fn play(&self, spec: &GameSpec<S>, t: TypeIndex) -> Result<(Vec<EdgeId>, usize), EvalError>;
}

impl<S: Scalar> RealizedPlay<S> for CoordinatorPolicy<S> {
    fn play(&self, spec: &GameSpec<S>, t: TypeIndex) -> Result<(Vec<EdgeId>, usize), EvalError> {
        Ok(self.realize(spec, t)?)
    }
}

impl<S: Scalar> RealizedPlay<S> for PlannerResult<S> {
    fn play(&self, _: &GameSpec<S>, _: TypeIndex) -> Result<(Vec<EdgeId>, usize), EvalError> {
        Ok((self.path.clone(), 0))
    }
}

impl<S: Scalar> RealizedPlay<S> for OverrideResponse<S> {
    fn play(&self, _: &GameSpec<S>, t: TypeIndex) -> Result<(Vec<EdgeId>, usize), EvalError> {
        self.play(t).map(|(p, n)| (p.to_vec(), n)).ok_or(EvalError::UnknownType(t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeEvaluation<S> {
    pub mean: S,
    pub variance: S,
    pub overrides: usize,
    pub criterion: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation<S> {
    pub per_type: BTreeMap<TypeIndex, TypeEvaluation<S>>,
    pub weighted_criterion: S,
}

/// Exact moments of type `t`'s realized play; overrides add `q_h` each to
/// the mean.
pub fn evaluate_policy_exact<S: Scalar, P: RealizedPlay<S> + ?Sized>(
    spec: &GameSpec<S>,
    policy: &P,
    t: TypeIndex,
) -> Result<TypeEvaluation<S>, EvalError> {
    let (path, overrides) = policy.play(spec, t)?;
    let moments = spec.path_moments(&path);
    let mean = moments.mean + S::from_usize(overrides) * spec.transmission_cost().clone();
    let criterion = path_criterion(spec, &path, overrides, &spec.types()[t])?;
    Ok(TypeEvaluation { mean, variance: moments.variance, overrides, criterion })
}

/// Evaluates every type with positive prior weight and aggregates with the
/// machine aggregator.
pub fn evaluate_policy<S: Scalar, P: RealizedPlay<S> + ?Sized>(
    spec: &GameSpec<S>,
    policy: &P,
) -> Result<PolicyEvaluation<S>, EvalError> {
    let support = Belief::from_prior(spec.prior()).map_err(SolveError::from)?.support();
    let mut per_type = BTreeMap::new();
    for t in support.iter() {
        per_type.insert(t, evaluate_policy_exact(spec, policy, t)?);
    }
    let criteria = per_type.iter().map(|(t, e)| (*t, e.criterion.clone())).collect();
    let weighted_criterion = aggregate_criteria(spec, &criteria)?;
    Ok(PolicyEvaluation { per_type, weighted_criterion })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    /// Unbiased sample variance; 0 for a single sample.
    pub variance: f64,
    pub samples: usize,
}

impl MonteCarloEstimate {
    pub fn standard_error(&self) -> f64 {
        (self.variance / self.samples as f64).sqrt()
    }
}

/// Samples the total cost of type `t`'s play with Gaussian edge and
/// terminal costs.
pub fn monte_carlo_evaluate<S: Scalar, P: RealizedPlay<S> + ?Sized>(
    spec: &GameSpec<S>,
    policy: &P,
    t: TypeIndex,
    n_samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate, EvalError> {
    if n_samples == 0 {
        return Err(EvalError::NoSamples);
    }
    let (path, overrides) = policy.play(spec, t)?;
    let mut parts: Vec<Normal<f64>> = path
        .iter()
        .map(|&e| {
            let c = &spec.edge(e).cost;
            Normal::new(c.mean.to_f64(), c.variance.to_f64().sqrt()).expect("valid moments")
        })
        .collect();
    if let Some(c) = spec.terminal_cost(spec.path_end(&path)) {
        parts.push(Normal::new(c.mean.to_f64(), c.variance.to_f64().sqrt()).expect("valid moments"));
    }
    let fixed = overrides as f64 * spec.transmission_cost().to_f64();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for k in 1..=n_samples {
        let x: f64 = fixed + parts.iter().map(|d| d.sample(&mut rng)).sum::<f64>();
        let delta = x - mean;
        mean += delta / k as f64;
        m2 += delta * (x - mean);
    }
    let variance = if n_samples > 1 { m2 / (n_samples - 1) as f64 } else { 0.0 };
    Ok(MonteCarloEstimate { mean, variance, samples: n_samples })
}

/// Weighted criterion minus the best-case benchmark.
pub fn compute_regret<S: Scalar>(spec: &GameSpec<S>, evaluation: &PolicyEvaluation<S>) -> Result<S, EvalError> {
    Ok(evaluation.weighted_criterion.clone() - best_case_value(spec)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretRow<S> {
    pub sweep_value: S,
    pub regret_hm: S,
    pub regret_ma: S,
    pub regret_mn: S,
    pub bcp: S,
    pub weighted_hm: S,
    pub weighted_ma: S,
    pub weighted_mn: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    /// Lets each type override the neutral machine.
    pub neutral_with_overrides: bool,
    /// Enumeration guard when the aggregator needs the exhaustive solver.
    pub oracle_limit: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { neutral_with_overrides: false, oracle_limit: DEFAULT_ORACLE_LIMIT }
    }
}

/// `n` evenly spaced points in `[0, 1]`.
pub fn default_grid<S: Scalar>(n: usize) -> Vec<S> {
    match n {
        0 => Vec::new(),
        1 => vec![S::one()],
        _ => (0..n).map(|i| S::from_usize(i) / S::from_usize(n - 1)).collect(),
    }
}

/// Prior with mass `p` on type `k` and the rest split evenly.
pub fn sweep_prior<S: Scalar>(k: TypeIndex, p: &S, types: usize) -> Result<Vec<S>, EvalError> {
    if *p < S::zero() || *p > S::one() {
        return Err(EvalError::GridValue(p.to_f64()));
    }
    if k >= types {
        return Err(EvalError::Axis { axis: k + 1, types });
    }
    if types == 1 {
        return if *p == S::one() { Ok(vec![S::one()]) } else { Err(EvalError::SingleType(p.to_f64())) };
    }
    let rest = (S::one() - p.clone()) / S::from_usize(types - 1);
    Ok((0..types).map(|i| if i == k { p.clone() } else { rest.clone() }).collect())
}

/// Regrets of the coordinator, machine-average and machine-neutral
/// strategies at each prior on the sweep axis. Rows follow grid order.
pub fn prior_sweep<S: Scalar>(
    spec: &GameSpec<S>,
    k: TypeIndex,
    grid: &[S],
    options: SweepOptions,
) -> Result<Vec<RegretRow<S>>, EvalError> {
    let priors: Vec<Vec<S>> = grid.iter().map(|p| sweep_prior(k, p, spec.type_count())).collect::<Result<_, _>>()?;
    grid.par_iter()
        .zip(priors.into_par_iter())
        .map(|(p, prior)| regret_row(&spec.with_prior(prior), p.clone(), options))
        .collect()
}

/// One sweep point.
pub fn regret_row<S: Scalar>(spec: &GameSpec<S>, sweep_value: S, options: SweepOptions) -> Result<RegretRow<S>, EvalError> {
    let bcp = best_case_value(spec)?;
    let weighted_hm = match spec.aggregator() {
        MachineAggregator::Expectation => evaluate_policy(spec, &solve_dp(spec)?)?.weighted_criterion,
        MachineAggregator::Cvar(_) => brute_force_oracle(spec, options.oracle_limit)?.value,
    };
    let weighted_ma = evaluate_policy(spec, &baseline_policy(spec, BaselineMode::Average)?)?.weighted_criterion;
    let weighted_mn = if options.neutral_with_overrides {
        evaluate_policy(spec, &neutral_with_overrides(spec)?)?.weighted_criterion
    } else {
        evaluate_policy(spec, &baseline_policy(spec, BaselineMode::Neutral)?)?.weighted_criterion
    };
    Ok(RegretRow {
        sweep_value,
        regret_hm: weighted_hm.clone() - bcp.clone(),
        regret_ma: weighted_ma.clone() - bcp.clone(),
        regret_mn: weighted_mn.clone() - bcp.clone(),
        bcp,
        weighted_hm,
        weighted_ma,
        weighted_mn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_model::Direction;
    use crate::risk_measures::RiskParameter;
    use crate::baseline_planners::risk_adjusted_shortest_path;
    use crate::scalar::{ratio, Rational};

    fn r(x: f64) -> Rational {
        Rational::from_f64(x)
    }

    fn fork(prior: [f64; 2]) -> GameSpec<Rational> {
        GameSpec::builder()
            .nodes(["s", "a", "b", "t"])
            .edge("s", "a", Direction::N, r(1.0), r(50.0))
            .edge("s", "b", Direction::E, r(4.0), r(0.0))
            .edge("a", "t", Direction::E, r(1.0), r(50.0))
            .edge("b", "t", Direction::N, r(4.0), r(0.0))
            .terminal("t", r(0.0), r(0.0))
            .start("s")
            .horizon(3)
            .types([r(0.01), r(0.2)])
            .prior([r(prior[0]), r(prior[1])])
            .transmission_cost(r(0.5))
            .build()
            .unwrap()
    }

    #[test]
    fn exact_evaluation_adds_override_charges() {
        let spec = fork([0.5, 0.5]);
        let policy = solve_dp(&spec).unwrap();
        let e = evaluate_policy_exact(&spec, &policy, 1).unwrap();
        assert_eq!((e.mean.clone(), e.variance.clone(), e.overrides), (r(8.5), r(0.0), 1));
        assert_eq!(e.criterion, r(8.5));
        let all = evaluate_policy(&spec, &policy).unwrap();
        assert_eq!(&all.weighted_criterion, policy.root_value().unwrap());
    }

    #[test]
    fn zero_prior_types_are_not_evaluated() {
        let spec = fork([1.0, 0.0]);
        let policy = solve_dp(&spec).unwrap();
        let all = evaluate_policy(&spec, &policy).unwrap();
        assert_eq!(all.per_type.keys().copied().collect::<Vec<_>>(), vec![0]);
        assert_eq!(compute_regret(&spec, &all).unwrap(), ratio(0, 1));
    }

    #[test]
    fn best_case_plans_have_zero_regret() {
        let spec = fork([0.5, 0.5]);
        let mut per_type = BTreeMap::new();
        for t in 0..2 {
            let plan = risk_adjusted_shortest_path(&spec, &spec.types()[t]).unwrap();
            per_type.insert(t, evaluate_policy_exact(&spec, &plan, t).unwrap());
        }
        let weighted = per_type.values().map(|e| r(0.5) * e.criterion.clone()).sum();
        let evaluation = PolicyEvaluation { per_type, weighted_criterion: weighted };
        assert_eq!(compute_regret(&spec, &evaluation).unwrap(), ratio(0, 1));
    }

    #[test]
    fn single_sample_and_constant_costs() {
        let spec = fork([0.5, 0.5]);
        let plan = risk_adjusted_shortest_path(&spec, &RiskParameter(r(0.2))).unwrap();
        let est = monte_carlo_evaluate(&spec, &plan, 1, 1000, 7).unwrap();
        assert_eq!((est.mean, est.variance), (8.0, 0.0));
        let noisy = risk_adjusted_shortest_path(&spec, &RiskParameter(r(0.0))).unwrap();
        let one = monte_carlo_evaluate(&spec, &noisy, 0, 1, 3).unwrap();
        assert_eq!(one.variance, 0.0);
        assert_ne!(one.mean, 2.0);
        assert_eq!(monte_carlo_evaluate(&spec, &noisy, 0, 1, 3).unwrap(), one);
        assert_eq!(monte_carlo_evaluate(&spec, &noisy, 0, 0, 3).unwrap_err(), EvalError::NoSamples);
    }

    #[test]
    fn sampled_mean_is_near_exact() {
        let spec = fork([0.5, 0.5]).convert::<f64>();
        let plan = risk_adjusted_shortest_path(&spec, &RiskParameter(0.0)).unwrap();
        let est = monte_carlo_evaluate(&spec, &plan, 0, 100_000, 11).unwrap();
        assert!((est.mean - 2.0).abs() <= 4.0 * (100.0f64 / 1e5).sqrt(), "{est:?}");
        assert!((est.variance - 100.0).abs() < 5.0, "{est:?}");
    }

    #[test]
    fn sweep_priors_split_the_remainder() {
        let p: Vec<Rational> = sweep_prior(0, &ratio(1, 4), 3).unwrap();
        assert_eq!(p, vec![ratio(1, 4), ratio(3, 8), ratio(3, 8)]);
        assert!(matches!(sweep_prior(0, &r(1.5), 3), Err(EvalError::GridValue(_))));
        assert!(matches!(sweep_prior::<Rational>(3, &r(0.5), 3), Err(EvalError::Axis { .. })));
        let grid: Vec<Rational> = default_grid(21);
        assert_eq!(grid.len(), 21);
        assert_eq!(grid[20], ratio(1, 1));
        assert_eq!(grid[1], ratio(1, 20));
    }

    #[test]
    fn sweep_rows_are_ordered_and_dominance_holds() {
        let spec = fork([0.5, 0.5]);
        let grid: Vec<Rational> = default_grid(5);
        let rows = prior_sweep(&spec, 0, &grid, SweepOptions::default()).unwrap();
        assert_eq!(rows.iter().map(|r| r.sweep_value.clone()).collect::<Vec<_>>(), grid);
        for row in &rows {
            assert!(row.regret_hm >= ratio(0, 1));
            assert!(row.regret_hm <= row.regret_ma && row.regret_ma <= row.regret_mn, "{row:?}");
        }
        let last = rows.last().unwrap();
        assert_eq!((last.regret_hm.clone(), last.regret_ma.clone()), (ratio(0, 1), ratio(0, 1)));
    }
}
