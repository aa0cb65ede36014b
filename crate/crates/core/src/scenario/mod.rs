//! Scenario files, built-in experiments and the run driver.

pub mod config;
pub mod registry;
pub mod run;

pub use config::{
    parse_scenario, parse_scenario_str, Benchmark, Domain, MeshSource, OutputFormat, ScenarioConfig, SolverConfig,
};
pub use registry::{builtin, BUILTINS};
pub use run::{build_mesh, run_scenario, ErrorReport, FinalFields, Monitors, RunOutcome, Snapshot, StepRecord};
