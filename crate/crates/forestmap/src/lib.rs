//! File formats, pipeline runner and command-line front end for
//! `forestmap-core`.

pub mod config;
pub mod inputs;
pub mod metrics;
pub mod output;
pub mod pipeline;
pub mod ply;
pub mod sensors;

pub use config::{ConfigError, Mode, RunConfig};
pub use pipeline::{run_pipeline, PipelineError, RunSummary};
