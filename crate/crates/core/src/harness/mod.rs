//! Scenario registry, runner, and result reporting.

pub mod config;
pub mod registry;
pub mod report;
pub mod run;

pub use config::{AlphaPolicy, ObservableConfig, ScenarioConfig, ScenarioId};
pub use registry::{default_config, entry, ScenarioEntry, ANCHORS, REGISTRY};
pub use report::{find_results, report, Report, ReportRow, TABLE_HEADER};
pub use run::{run_scenario, summary_text, write_artifacts, AlphaRun, RunMeta, ScenarioResult, SCHEMA};
