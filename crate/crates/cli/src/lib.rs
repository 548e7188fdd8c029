//! Pipeline plumbing behind the `steamrec` binary.

pub mod config;
pub mod files;
pub mod pipeline;

pub use config::RunConfig;
pub use pipeline::{run_pipeline, Artifacts};
