//! Command-line runs: defaults, the repeat-and-aggregate protocol, event
//! logs and comparison reports.

pub mod cli;
pub mod datasets;
pub mod defaults;
pub mod events;
mod pipeline;
mod record;
pub mod report;

pub use cli::{parse_cli, Cli, Invocation, RunConfig, TrainConfig};
pub use defaults::default_params;
pub use events::{read_events, strip_volatile, Event, EventLog};
pub use pipeline::{replay_logs, run_pipeline, run_train_baseline, train_baseline, EVENTS_FILE};
pub use record::{Aggregate, RepetitionResult, Resources, RunRecord, RunStatus};
pub use report::{render_report, MetricKind, Report, ReportOptions, REPORT_SCHEMA};
