#![allow(dead_code)]

use std::path::PathBuf;

use hmrisk::game_model::{validate_spec, Direction, GameSpec};
use hmrisk::scalar::{ratio, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.scenario"))
}

pub fn bundled(name: &str) -> GameSpec<Rational> {
    hmrisk::cli_bench::load_scenario(scenario_path(name)).unwrap().spec().unwrap()
}

#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_nodes: usize,
    pub max_types: usize,
    pub max_horizon: usize,
    pub max_out_degree: usize,
}

const THETAS: [(i64, i64); 7] = [(0, 1), (1, 100), (1, 20), (1, 10), (1, 5), (1, 2), (1, 1)];
const Q: [(i64, i64); 4] = [(0, 1), (1, 4), (1, 1), (3, 1)];

/// Seeded random game that passes validation. Costs are small integers and
/// halves so exact arithmetic stays cheap.
pub fn random_game(seed: u64, limits: Limits) -> GameSpec<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(2..=limits.max_nodes);
        let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let mut b = GameSpec::builder().nodes(names.iter().map(String::as_str));
        for from in 0..n {
            let degree = rng.gen_range(1..=limits.max_out_degree.min(4));
            let mut dirs = Direction::ALL.to_vec();
            for _ in 0..degree {
                let d = dirs.remove(rng.gen_range(0..dirs.len()));
                let mut to = rng.gen_range(0..n);
                if to == from {
                    to = (to + 1) % n;
                }
                let mean = ratio(rng.gen_range(0..=40), 2);
                let var = ratio(rng.gen_range(0..=60), 1);
                b = b.edge(&names[from], &names[to], d, mean, var);
            }
        }
        let mut terminals = 0;
        for (i, name) in names.iter().enumerate().skip(1) {
            if rng.gen_bool(0.4) || (i == n - 1 && terminals == 0) {
                b = b.terminal(name, ratio(rng.gen_range(-10..=10), 1), ratio(rng.gen_range(0..=20), 1));
                terminals += 1;
            }
        }
        let k = rng.gen_range(1..=limits.max_types);
        let mut picks: Vec<usize> = (0..THETAS.len()).collect();
        let mut chosen = Vec::new();
        for _ in 0..k {
            chosen.push(picks.remove(rng.gen_range(0..picks.len())));
        }
        chosen.sort_unstable();
        let types: Vec<Rational> = chosen.iter().map(|&i| ratio(THETAS[i].0, THETAS[i].1)).collect();
        let weights: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
        let total: i64 = weights.iter().sum();
        let prior: Vec<Rational> = weights.iter().map(|&w| ratio(w, total)).collect();
        let (qn, qd) = Q[rng.gen_range(0..Q.len())];
        let spec = b
            .start(&names[0])
            .horizon(rng.gen_range(2..=limits.max_horizon))
            .types(types)
            .prior(prior)
            .transmission_cost(ratio(qn, qd))
            .build()
            .unwrap();
        if validate_spec(&spec).is_empty() {
            return spec;
        }
    }
}
