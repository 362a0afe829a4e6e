//! File formats, scene configuration and task runners for the `elastrm`
//! command line tool.

pub mod analysis;
pub mod artifacts;
pub mod config;
pub mod error;
pub mod tasks;

pub use config::{RunConfig, SceneFile, Task};
pub use error::CliError;
