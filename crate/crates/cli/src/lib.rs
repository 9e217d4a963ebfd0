//! Pipeline runner behind the `dnrisk` command: configuration, the staged
//! workflow, report writing and figure data.

pub mod config;
pub mod figures;
pub mod pipeline;
pub mod report;

pub use config::PipelineConfig;
pub use pipeline::{run_pipeline, RunSummary, Stage, StageError};
