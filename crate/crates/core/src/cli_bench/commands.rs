use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use super::csv::{format_sig, render_rows};
use super::scenario::{load_scenario, ScenarioError, ScenarioFile};
use crate::baseline_planners::{
    baseline_policy, best_case_value, enumerate_paths_oracle, neutral_with_overrides, risk_adjusted_shortest_path,
    BaselineMode, PlanError,
};
use crate::coordinator::{
    brute_force_oracle, solve_dp, verify_equilibrium, CoordinatorPolicy, DeviationBudget, SolveError,
    DEFAULT_ORACLE_LIMIT,
};
use crate::evaluation::{
    default_grid, evaluate_policy, monte_carlo_evaluate, prior_sweep, regret_row, EvalError, SweepOptions,
};
use crate::game_model::{GameSpec, MachineAggregator};
use crate::scalar::{parse_number, Rational, Scalar};

#[derive(Debug, Parser)]
#[command(name = "hmrisk", version, about = "Risk-sensitive human-machine routing games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the coordinator problem and print each type's play.
    Solve(SolveArgs),
    /// Per-type criteria of the neutral, average and best-case plans.
    Baselines(BaselineArgs),
    /// Solve, then check the equilibrium conditions. Exits 1 on failure.
    Verify(CommonArgs),
    /// Regret table over a prior sweep, as CSV.
    Sweep(SweepArgs),
    /// Every simple start-to-terminal path.
    Paths(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Overrides the scenario's machine aggregator: `expectation` or `cvar:<alpha>`.
    #[arg(long)]
    pub aggregator: Option<String>,
    /// Exact rational arithmetic instead of f64.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Monte Carlo samples per type for a sampled cost check.
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Writes the solved play as JSON.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub neutral_with_overrides: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// 1-based type whose prior is swept.
    #[arg(long)]
    pub axis: Option<usize>,
    /// Number of evenly spaced grid points in [0, 1].
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accepted for interface symmetry; the sweep is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub neutral_with_overrides: bool,
    /// Writes every row, including weighted criteria, as JSON.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("solver: {0}")]
    Solve(#[from] SolveError),
    #[error("planner: {0}")]
    Plan(#[from] PlanError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error("io: {0}")]
    Io(String),
    #[error("usage: {0}")]
    Usage(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Runs one command, writing its report to `out`. Returns the exit status.
pub fn run_command(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let common = match &cli.command {
        Command::Solve(a) => &a.common,
        Command::Baselines(a) => &a.common,
        Command::Verify(a) | Command::Paths(a) => a,
        Command::Sweep(a) => &a.common,
    };
    let file = load_scenario(&common.scenario)?;
    if common.exact {
        dispatch::<Rational>(cli, &file, out)
    } else {
        dispatch::<f64>(cli, &file, out)
    }
}

fn dispatch<S: Scalar>(cli: &Cli, file: &ScenarioFile, out: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Solve(a) => solve::<S>(file, a, out),
        Command::Baselines(a) => baselines::<S>(file, a, out),
        Command::Verify(a) => verify::<S>(file, a, out),
        Command::Sweep(a) => sweep::<S>(file, a, out),
        Command::Paths(a) => paths::<S>(file, a, out),
    }
}

fn load_spec<S: Scalar>(file: &ScenarioFile, common: &CommonArgs) -> Result<GameSpec<S>, CliError> {
    let spec = file.spec::<S>()?;
    Ok(match &common.aggregator {
        None => spec,
        Some(text) => spec.with_aggregator(parse_aggregator(text)?),
    })
}

/// `expectation` or `cvar:<alpha>`.
pub fn parse_aggregator<S: Scalar>(text: &str) -> Result<MachineAggregator<S>, CliError> {
    if text == "expectation" {
        return Ok(MachineAggregator::Expectation);
    }
    let alpha = text
        .strip_prefix("cvar:")
        .and_then(parse_number)
        .ok_or_else(|| CliError::Usage(format!("aggregator `{text}` is not `expectation` or `cvar:<alpha>`")))?;
    if alpha < Rational::from_f64(0.0) || alpha >= Rational::from_f64(1.0) {
        return Err(CliError::Usage(format!("cvar level {alpha} outside [0, 1)")));
    }
    Ok(MachineAggregator::Cvar(S::from_rational(&alpha)))
}

/// Exact values print as fractions, floats with 12 significant digits.
fn show<S: Scalar>(x: &S) -> String {
    if S::tie_tolerance().is_zero() {
        x.to_string()
    } else {
        format_sig(x.to_f64())
    }
}

fn type_label<S: Scalar>(spec: &GameSpec<S>, t: usize) -> String {
    format!("θ{} ({})", t + 1, show(spec.theta(t)))
}

fn solve<S: Scalar>(file: &ScenarioFile, args: &SolveArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let spec = load_spec::<S>(file, &args.common)?;
    if let MachineAggregator::Cvar(alpha) = spec.aggregator() {
        let result = brute_force_oracle(&spec, DEFAULT_ORACLE_LIMIT)?;
        writeln!(out, "aggregator: cvar {}", show(alpha))?;
        writeln!(out, "root value: {}", show(&result.value))?;
        writeln!(out, "minimizing plans: {}", result.minimizers.len())?;
        let best = &result.minimizers[0];
        for (t, plan) in &best.plans {
            let signals: Vec<String> = plan.signals.iter().map(|s| s.to_string()).collect();
            writeln!(
                out,
                "{}: path {}, overrides {}, criterion {}",
                type_label(&spec, *t),
                spec.describe_path(&plan.edges),
                plan.overrides,
                show(&best.criteria[t])
            )?;
            writeln!(out, "  signals: {}", signals.join(" "))?;
        }
        return Ok(0);
    }

    let policy = solve_dp(&spec)?;
    let root_value = policy.root_value().expect("solved root").clone();
    writeln!(out, "root value: {}", show(&root_value))?;
    let evaluation = evaluate_policy(&spec, &policy)?;
    let seed = args.seed.unwrap_or_else(|| file.seed());
    let mut dump_types = Vec::new();
    for (t, e) in &evaluation.per_type {
        let steps = policy.trace(&spec, *t)?;
        let path: Vec<usize> = steps.iter().filter_map(|s| s.edge).collect();
        writeln!(
            out,
            "{}: path {}, mean {}, variance {}, overrides {}, criterion {}",
            type_label(&spec, *t),
            spec.describe_path(&path),
            show(&e.mean),
            show(&e.variance),
            e.overrides,
            show(&e.criterion)
        )?;
        let mut dump_steps = Vec::new();
        for s in &steps {
            let mut line = format!(
                "  period {} at {}: human {}, machine {}",
                s.state.period,
                spec.node_name(s.state.node),
                s.human,
                s.machine
            );
            if s.overridden {
                let _ = write!(line, ", override {}", s.effective);
            }
            let _ = write!(line, ", support {}", s.state.support);
            if let Some(post) = s.posterior {
                let _ = write!(line, " -> {post}");
            }
            writeln!(out, "{line}")?;
            dump_steps.push(json!({
                "period": s.state.period,
                "node": spec.node_name(s.state.node),
                "human": s.human.to_string(),
                "machine": s.machine.to_string(),
                "effective": s.effective.to_string(),
                "overridden": s.overridden,
                "support": s.state.support.iter().map(|u| u + 1).collect::<Vec<_>>(),
                "posterior": s.posterior.map(|p| p.iter().map(|u| u + 1).collect::<Vec<_>>()),
            }));
        }
        if args.samples > 0 {
            let mc = monte_carlo_evaluate(&spec, &policy, *t, args.samples, seed)?;
            writeln!(
                out,
                "  sampled mean {} (std error {}), sampled variance {}",
                format_sig(mc.mean),
                format_sig(mc.standard_error()),
                format_sig(mc.variance)
            )?;
        }
        dump_types.push(json!({
            "type": t + 1,
            "theta": spec.theta(*t).to_f64(),
            "mean": e.mean.to_f64(),
            "variance": e.variance.to_f64(),
            "overrides": e.overrides,
            "criterion": e.criterion.to_f64(),
            "steps": dump_steps,
        }));
    }
    if let Some(path) = &args.dump {
        let doc = json!({
            "root_value": root_value.to_f64(),
            "weighted_criterion": evaluation.weighted_criterion.to_f64(),
            "types": dump_types,
        });
        fs::write(path, serde_json::to_string_pretty(&doc).expect("json") + "\n")?;
    }
    Ok(0)
}

fn baselines<S: Scalar>(file: &ScenarioFile, args: &BaselineArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let spec = load_spec::<S>(file, &args.common)?;
    let neutral = baseline_policy(&spec, BaselineMode::Neutral)?;
    let average = baseline_policy(&spec, BaselineMode::Average)?;
    writeln!(out, "neutral plan (theta 0): {}", spec.describe_path(&neutral.path))?;
    writeln!(out, "average plan (theta {}): {}", show(&average.planner_theta), spec.describe_path(&average.path))?;
    writeln!(out, "type,theta,prior,best,neutral,average")?;
    for t in 0..spec.type_count() {
        let best = risk_adjusted_shortest_path(&spec, &spec.types()[t])?;
        writeln!(
            out,
            "θ{},{},{},{},{},{}",
            t + 1,
            show(spec.theta(t)),
            show(&spec.prior()[t]),
            show(&best.criterion),
            show(&neutral.per_type_criterion[&t]),
            show(&average.per_type_criterion[&t])
        )?;
    }
    if args.neutral_with_overrides {
        let response = neutral_with_overrides(&spec)?;
        for (t, (path, n, c)) in &response.per_type {
            writeln!(
                out,
                "θ{} against the neutral machine: path {}, overrides {}, criterion {}",
                t + 1,
                spec.describe_path(path),
                n,
                show(c)
            )?;
        }
    }
    let options = SweepOptions { neutral_with_overrides: args.neutral_with_overrides, ..SweepOptions::default() };
    let row = regret_row(&spec, S::zero(), options)?;
    writeln!(out, "bcp: {}", show(&best_case_value(&spec)?))?;
    writeln!(
        out,
        "weighted: coordinator {}, average {}, neutral {}",
        show(&row.weighted_hm),
        show(&row.weighted_ma),
        show(&row.weighted_mn)
    )?;
    writeln!(
        out,
        "regret: coordinator {}, average {}, neutral {}",
        show(&row.regret_hm),
        show(&row.regret_ma),
        show(&row.regret_mn)
    )?;
    Ok(0)
}

fn verify<S: Scalar>(file: &ScenarioFile, args: &CommonArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let spec = load_spec::<S>(file, args)?;
    let policy: CoordinatorPolicy<S> = solve_dp(&spec)?;
    let report = verify_equilibrium(&spec, &policy, DeviationBudget::default())?;
    writeln!(out, "{report}")?;
    let pass = report.all_pass();
    writeln!(out, "{}", if pass { "all checks passed" } else { "equilibrium check failed" })?;
    Ok(if pass { 0 } else { 1 })
}

fn sweep<S: Scalar>(file: &ScenarioFile, args: &SweepArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let spec = load_spec::<S>(file, &args.common)?;
    let axis = args.axis.unwrap_or_else(|| file.sweep_axis());
    if axis == 0 || axis > spec.type_count() {
        return Err(CliError::Usage(format!("axis {axis} outside 1..={}", spec.type_count())));
    }
    let grid: Vec<S> = match args.grid {
        Some(0) => return Err(CliError::Usage("grid needs at least one point".into())),
        Some(n) => default_grid(n),
        None => file.sweep_grid().unwrap_or_else(|| default_grid(21)),
    };
    let options = SweepOptions { neutral_with_overrides: args.neutral_with_overrides, ..SweepOptions::default() };
    let rows = prior_sweep(&spec, axis - 1, &grid, options)?;
    let csv = render_rows(&rows);
    match &args.out {
        Some(path) => fs::write(path, &csv)?,
        None => out.write_all(csv.as_bytes())?,
    }
    if let Some(path) = &args.dump {
        let doc: Vec<_> = rows
            .iter()
            .map(|r| {
                json!({
                    "sweep_value": r.sweep_value.to_f64(),
                    "bcp": r.bcp.to_f64(),
                    "weighted_hm": r.weighted_hm.to_f64(),
                    "weighted_ma": r.weighted_ma.to_f64(),
                    "weighted_mn": r.weighted_mn.to_f64(),
                    "regret_hm": r.regret_hm.to_f64(),
                    "regret_ma": r.regret_ma.to_f64(),
                    "regret_mn": r.regret_mn.to_f64(),
                })
            })
            .collect();
        fs::write(path, serde_json::to_string_pretty(&doc).expect("json") + "\n")?;
    }
    Ok(0)
}

fn paths<S: Scalar>(file: &ScenarioFile, args: &CommonArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let spec = load_spec::<S>(file, args)?;
    let entries = enumerate_paths_oracle(&spec)?;
    let mut header = String::from("path,mean,variance,fits_horizon");
    for t in 0..spec.type_count() {
        let _ = write!(header, ",criterion_θ{}", t + 1);
    }
    writeln!(out, "{header}")?;
    for e in &entries {
        let mut line = format!(
            "{},{},{},{}",
            spec.describe_path(&e.edges),
            show(&e.mean),
            show(&e.variance),
            e.fits_horizon
        );
        for t in 0..spec.type_count() {
            let _ = write!(line, ",{}", show(&e.criterion(spec.theta(t))));
        }
        writeln!(out, "{line}")?;
    }
    Ok(0)
}
