mod common;

use common::{bundled, scenario_path};
use hmrisk::baseline_planners::{
    baseline_policy, best_case_value, enumerate_paths_oracle, risk_adjusted_shortest_path, BaselineMode,
};
use hmrisk::belief_filter::TypeSet;
use hmrisk::cli_bench::{load_scenario, parse_scenario, ScenarioError};
use hmrisk::coordinator::solve_dp;
use hmrisk::evaluation::{
    compute_regret, evaluate_policy, evaluate_policy_exact, monte_carlo_evaluate, regret_row, SweepOptions,
};
use hmrisk::game_model::{Direction, GameSpec, HumanAction};
use hmrisk::risk_measures::RiskParameter;
use hmrisk::scalar::{ratio, Rational, Scalar};

fn r(x: f64) -> Rational {
    Rational::from_f64(x)
}

#[test]
fn bundled_scenarios_load() {
    let a = load_scenario(scenario_path("graph_a")).unwrap().spec::<f64>().unwrap();
    assert_eq!(a.node_count(), 8);
    assert_eq!(a.types().iter().map(|t| t.0).collect::<Vec<_>>(), vec![0.01, 0.05]);
    let b = load_scenario(scenario_path("graph_b")).unwrap().spec::<f64>().unwrap();
    assert_eq!(b.types().iter().map(|t| t.0).collect::<Vec<_>>(), vec![0.01, 0.1, 0.2]);
}

#[test]
fn prior_not_summing_to_one_is_named() {
    let text = std::fs::read_to_string(scenario_path("graph_a")).unwrap();
    let bad = text.replacen("\"prior\": [\n    0.5,\n    0.5\n  ]", "\"prior\": [0.5, 0.4]", 1);
    assert_ne!(bad, text);
    match parse_scenario(&bad).unwrap_err() {
        ScenarioError::Invalid(v) => assert!(v.iter().any(|x| x.invariant == "prior does not sum to 1"), "{v:?}"),
        e => panic!("{e}"),
    }
}

#[test]
fn graph_a_paths_carry_the_reference_totals() {
    let spec = bundled("graph_a");
    let totals: Vec<(Rational, Rational)> =
        enumerate_paths_oracle(&spec).unwrap().into_iter().map(|p| (p.mean, p.variance)).collect();
    assert!(totals.contains(&(r(30.0), r(400.0))));
    assert!(totals.contains(&(r(35.0), r(100.0))));
}

#[test]
fn single_edge_graph_has_one_path() {
    let spec = GameSpec::builder()
        .nodes(["s", "t"])
        .edge("s", "t", Direction::E, r(1.0), r(1.0))
        .terminal("t", r(0.0), r(0.0))
        .start("s")
        .horizon(2)
        .types([r(0.0)])
        .prior([r(1.0)])
        .build()
        .unwrap();
    assert_eq!(enumerate_paths_oracle(&spec).unwrap().len(), 1);
}

#[test]
fn graph_b_types_prefer_three_different_paths() {
    let spec = bundled("graph_b");
    let paths = enumerate_paths_oracle(&spec).unwrap();
    assert!(paths.len() >= 3);
    let mut argmins = Vec::new();
    let mut bcp = r(0.0);
    for t in 0..3 {
        let theta = spec.theta(t);
        let best = paths.iter().filter(|p| p.fits_horizon).min_by(|a, b| a.criterion(theta).cmp(&b.criterion(theta))).unwrap();
        argmins.push(best.edges.clone());
        bcp += ratio(1, 3) * best.criterion(theta);
        let plan = risk_adjusted_shortest_path(&spec, &spec.types()[t]).unwrap();
        assert_eq!(plan.criterion, best.criterion(theta));
        assert_eq!(plan.path, best.edges);
    }
    argmins.dedup();
    assert_eq!(argmins.len(), 3);
    assert_eq!(best_case_value(&spec).unwrap(), bcp);
}

#[test]
fn planners_match_enumeration_on_bundled_graphs() {
    for name in ["graph_a", "graph_b"] {
        let spec = bundled(name);
        let paths = enumerate_paths_oracle(&spec).unwrap();
        for k in 0..=40 {
            let theta = ratio(k, 100);
            let best = paths.iter().filter(|p| p.fits_horizon).map(|p| p.criterion(&theta)).min().unwrap();
            let plan = risk_adjusted_shortest_path(&spec, &RiskParameter(theta.clone())).unwrap();
            assert_eq!(plan.criterion, best, "{name} θ={theta}");
        }
    }
}

#[test]
fn graph_a_best_case_is_37() {
    assert_eq!(best_case_value(&bundled("graph_a")).unwrap(), ratio(37, 1));
}

#[test]
fn neutral_baseline_ignores_the_prior() {
    let spec = bundled("graph_a");
    for p in [0.0, 0.3, 1.0] {
        let plan = baseline_policy(&spec.with_prior(vec![r(p), r(1.0) - r(p)]), BaselineMode::Neutral).unwrap();
        assert_eq!(spec.path_moments(&plan.path).mean, r(30.0));
        assert_eq!(spec.path_moments(&plan.path).variance, r(400.0));
    }
}

#[test]
fn average_baseline_is_exact_under_point_mass() {
    let spec = bundled("graph_b");
    for k in 0..3 {
        let mut prior = vec![r(0.0); 3];
        prior[k] = r(1.0);
        let point = spec.with_prior(prior);
        let plan = baseline_policy(&point, BaselineMode::Average).unwrap();
        assert_eq!(&plan.planner_theta, spec.theta(k));
        assert_eq!(compute_regret(&point, &evaluate_policy(&point, &plan).unwrap()).unwrap(), r(0.0));
    }
}

#[test]
fn neutral_regret_exceeds_average_regret_on_graph_b() {
    let spec = bundled("graph_b");
    let row = regret_row(&spec, r(0.0), SweepOptions::default()).unwrap();
    assert!(row.regret_mn > r(0.0));
    assert!(row.regret_mn >= row.regret_ma);
}

#[test]
fn coordinator_criterion_on_graph_a_adds_override_charges() {
    let spec = bundled("graph_a");
    let policy = solve_dp(&spec).unwrap();
    let e = evaluate_policy_exact(&spec, &policy, 0).unwrap();
    assert_eq!(e.criterion, r(34.0) + spec.transmission_cost().clone() * Rational::from_usize(e.overrides));
    assert_eq!(&evaluate_policy(&spec, &policy).unwrap().weighted_criterion, policy.root_value().unwrap());
}

/// Period-3 separation on graph_a: the types part ways at node 3 with the
/// risk-tolerant type taking S and the cautious one N, each revealed.
#[test]
fn graph_a_types_separate_at_period_three() {
    let spec = bundled("graph_a");
    let policy = solve_dp(&spec).unwrap();
    let want = [Direction::S, Direction::N];
    for (t, dir) in want.iter().enumerate() {
        let steps = policy.trace(&spec, t).unwrap();
        for s in &steps {
            if s.state.period == 3 {
                assert_eq!(s.effective, hmrisk::game_model::MachineAction::Move(*dir));
                assert_eq!(s.posterior, Some(TypeSet::singleton(t)));
            } else {
                assert_eq!(s.human, HumanAction::Silent, "θ{} period {}", t + 1, s.state.period);
            }
        }
    }
    let root = policy.root();
    let s1 = &policy.trace(&spec, 0).unwrap()[2];
    assert_eq!(s1.human, HumanAction::Move(Direction::S));
    assert_eq!(s1.state.support, root.support);
}

#[test]
fn sampled_means_agree_with_exact_moments() {
    for name in ["graph_a", "graph_b"] {
        let spec: GameSpec<f64> = bundled(name).convert();
        for (i, p) in enumerate_paths_oracle(&spec).unwrap().iter().enumerate() {
            let plan = hmrisk::baseline_planners::PlannerResult {
                path: p.edges.clone(),
                per_type_criterion: Default::default(),
                planner_theta: 0.0,
                criterion: 0.0,
            };
            let est = monte_carlo_evaluate(&spec, &plan, 0, 100_000, 1000 + i as u64).unwrap();
            let se = (p.variance / 1e5).sqrt();
            assert!((est.mean - p.mean).abs() <= 4.0 * se, "{name} path {i}: {} vs {}", est.mean, p.mean);
        }
    }
}

#[test]
fn risk_neutral_path_sample_mean_is_within_three_standard_errors() {
    let spec: GameSpec<f64> = bundled("graph_a").convert();
    let plan = risk_adjusted_shortest_path(&spec, &RiskParameter(0.01)).unwrap();
    let est = monte_carlo_evaluate(&spec, &plan, 0, 100_000, 42).unwrap();
    assert!((est.mean - 30.0).abs() <= 3.0 * (400.0f64 / 1e5).sqrt(), "{est:?}");
}
