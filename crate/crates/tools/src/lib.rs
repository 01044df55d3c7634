//! File formats, scene loading, run manifests and the subcommands of the
//! `asfnet` command line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod model;
pub mod scene;

pub use error::{ToolError, ToolResult};
