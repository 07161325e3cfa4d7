//! Command line and HTTP front end for the correction pipeline and the
//! evaluation tools.

pub mod commands;
pub mod service;
pub mod setup;

pub use service::{router, AppState, MetricsSnapshot};
pub use setup::{assemble, AppConfig, Assembled, PipelineOptions};
