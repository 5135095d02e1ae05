//! Command-line front end: scenario files, solver and baseline reports,
//! equilibrium checks, prior sweeps and CSV output.

pub mod commands;
pub mod csv;
pub mod scenario;

pub use commands::{run_command, Cli, CliError, Command};
pub use csv::{format_sig, render_rows, HEADER};
pub use scenario::{load_scenario, parse_scenario, save_scenario, ScenarioError, ScenarioFile};
