//! On-disk scenario format (JSON).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game_model::{validate_spec, Direction, GameSpec, MachineAggregator, Violation};
use crate::scalar::{parse_number, Rational, Scalar};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scenario: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// A number written either as a JSON number or as a string holding a
/// decimal or an `a/b` fraction (for priors such as `"1/3"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Float(f64),
    Text(String),
}

impl Number {
    pub fn exact(&self) -> Option<Rational> {
        match self {
            Number::Float(x) if x.is_finite() => Some(Rational::from_f64(*x)),
            Number::Float(_) => None,
            Number::Text(s) => parse_number(s),
        }
    }
}

impl From<f64> for Number {
    fn from(x: f64) -> Self {
        Number::Float(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub from: String,
    pub to: String,
    pub dir: String,
    pub mean: Number,
    pub var: Number,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Moments {
    pub mean: Number,
    pub var: Number,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AggregatorEntry {
    Named(String),
    Cvar { cvar: Number },
}

impl Default for AggregatorEntry {
    fn default() -> Self {
        AggregatorEntry::Named("expectation".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEntry {
    /// 1-based type index.
    pub axis: usize,
    pub grid: Vec<Number>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub nodes: Vec<String>,
    pub edges: Vec<EdgeEntry>,
    pub terminals: BTreeMap<String, Moments>,
    pub start: String,
    pub horizon: usize,
    pub types: Vec<Number>,
    pub prior: Vec<Number>,
    pub q_h: Number,
    #[serde(default)]
    pub aggregator: AggregatorEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Reads, parses and validates a scenario. Validation problems are
/// reported together.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioFile, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    file.spec::<Rational>()?;
    Ok(file)
}

pub fn save_scenario(path: impl AsRef<Path>, file: &ScenarioFile) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    fs::write(path, to_json(file))
        .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn to_json(file: &ScenarioFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("scenario serializes");
    s.push('\n');
    s
}

impl ScenarioFile {
    /// Builds and validates the game in scalar type `S`.
    pub fn spec<S: Scalar>(&self) -> Result<GameSpec<S>, ScenarioError> {
        let mut problems = Vec::new();
        let mut num = |field: String, n: &Number| -> S {
            match n.exact() {
                Some(r) => S::from_rational(&r),
                None => {
                    problems.push(Violation { invariant: "bad number", detail: format!("{field}: {n:?}") });
                    S::zero()
                }
            }
        };
        let mut builder = GameSpec::builder().nodes(self.nodes.iter().map(String::as_str));
        let mut edges = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            let mean = num(format!("edges[{i}].mean"), &e.mean);
            let var = num(format!("edges[{i}].var"), &e.var);
            edges.push((i, e, mean, var));
        }
        let mut terminals = Vec::new();
        for (name, m) in &self.terminals {
            let mean = num(format!("terminals.{name}.mean"), &m.mean);
            let var = num(format!("terminals.{name}.var"), &m.var);
            terminals.push((name, mean, var));
        }
        let types: Vec<S> = self.types.iter().enumerate().map(|(i, t)| num(format!("types[{i}]"), t)).collect();
        let prior: Vec<S> = self.prior.iter().enumerate().map(|(i, p)| num(format!("prior[{i}]"), p)).collect();
        let q = num("q_h".into(), &self.q_h);
        let aggregator = match &self.aggregator {
            AggregatorEntry::Named(name) if name == "expectation" => MachineAggregator::Expectation,
            AggregatorEntry::Named(name) => {
                problems.push(Violation { invariant: "unknown aggregator", detail: name.clone() });
                MachineAggregator::Expectation
            }
            AggregatorEntry::Cvar { cvar } => MachineAggregator::Cvar(num("aggregator.cvar".into(), cvar)),
        };

        let unknown = |problems: &mut Vec<Violation>, field: String, n: &str| {
            if !self.nodes.iter().any(|m| m == n) {
                problems.push(Violation { invariant: "unknown node", detail: format!("{field}: `{n}`") });
            }
        };
        for (i, e, mean, var) in edges {
            unknown(&mut problems, format!("edges[{i}].from"), &e.from);
            unknown(&mut problems, format!("edges[{i}].to"), &e.to);
            match Direction::parse(&e.dir) {
                Some(d) => builder = builder.edge(&e.from, &e.to, d, mean, var),
                None => problems.push(Violation { invariant: "unknown direction", detail: format!("edges[{i}].dir: `{}`", e.dir) }),
            }
        }
        for (name, mean, var) in terminals {
            unknown(&mut problems, format!("terminals.{name}"), name);
            builder = builder.terminal(name, mean, var);
        }
        unknown(&mut problems, "start".into(), &self.start);
        if let Some(sweep) = &self.sweep {
            if sweep.axis == 0 || sweep.axis > self.types.len() {
                problems.push(Violation {
                    invariant: "sweep axis",
                    detail: format!("axis {} outside 1..={}", sweep.axis, self.types.len()),
                });
            }
            for (i, g) in sweep.grid.iter().enumerate() {
                match g.exact() {
                    Some(p) if p >= Rational::from_f64(0.0) && p <= Rational::from_f64(1.0) => {}
                    _ => problems.push(Violation { invariant: "sweep grid", detail: format!("grid[{i}]: {g:?} outside [0, 1]") }),
                }
            }
        }
        if !problems.is_empty() {
            return Err(ScenarioError::Invalid(problems));
        }

        let spec = builder
            .start(&self.start)
            .horizon(self.horizon)
            .types(types)
            .prior(prior)
            .transmission_cost(q)
            .aggregator(aggregator)
            .build()
            .map_err(|e| ScenarioError::Invalid(vec![Violation { invariant: "structure", detail: e.to_string() }]))?;
        let violations = validate_spec(&spec);
        if !violations.is_empty() {
            return Err(ScenarioError::Invalid(violations));
        }
        Ok(spec)
    }

    /// 1-based sweep axis, 1 when unset.
    pub fn sweep_axis(&self) -> usize {
        self.sweep.as_ref().map_or(1, |s| s.axis)
    }

    /// Declared grid, if any.
    pub fn sweep_grid<S: Scalar>(&self) -> Option<Vec<S>> {
        let sweep = self.sweep.as_ref()?;
        sweep.grid.iter().map(|g| g.exact().map(|r| S::from_rational(&r))).collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"{
        "nodes": ["s", "t"],
        "edges": [{"from": "s", "to": "t", "dir": "E", "mean": 1.5, "var": 2}],
        "terminals": {"t": {"mean": 0, "var": 0}},
        "start": "s",
        "horizon": 2,
        "types": [0.01, 0.2],
        "prior": ["1/3", "2/3"],
        "q_h": 0.5
    }"#;

    #[test]
    fn fractions_are_exact() {
        let file = parse_scenario(TINY).unwrap();
        let spec = file.spec::<Rational>().unwrap();
        assert_eq!(spec.prior()[0], crate::scalar::ratio(1, 3));
        assert_eq!(file.sweep_axis(), 1);
        assert!(file.sweep_grid::<f64>().is_none());
    }

    #[test]
    fn round_trip() {
        let file = parse_scenario(TINY).unwrap();
        assert_eq!(parse_scenario(&to_json(&file)).unwrap(), file);
    }

    #[test]
    fn problems_are_reported_together() {
        let bad = TINY.replace("\"dir\": \"E\"", "\"dir\": \"Q\"").replace("\"start\": \"s\"", "\"start\": \"x\"");
        match parse_scenario(&bad).unwrap_err() {
            ScenarioError::Invalid(v) => {
                let names: Vec<_> = v.iter().map(|x| x.invariant).collect();
                assert_eq!(names, vec!["unknown direction", "unknown node"]);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_scenario("{\n  \"nodes\": [,]\n}").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 2, .. }), "{err}");
        let missing = parse_scenario("{\"nodes\": []}").unwrap_err();
        assert!(missing.to_string().contains("missing field"), "{missing}");
    }
}
