pub mod bench;
pub mod codec;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod orchestrator;
pub mod profiler;
pub mod renderer;
pub mod stages;
pub mod types;

pub use error::{Error, Result};
