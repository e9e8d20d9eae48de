//! On-disk formats: metrics CSV, trajectory JSON lines, suite summaries.

mod metrics;
mod summary;
mod trajectory;

pub use metrics::{format_float, read_metrics, MetricsWriter, METRICS_HEADER};
pub use summary::{
    load_run_record, render_summary, summarize_suite, write_summary_csv, RunRecord, SummaryRow,
};
pub use trajectory::{
    export_trajectory, read_trajectory, replay_positions, TrajectoryHeader, TrajectoryStep,
};
