//! Batch pipeline behind the `objreid` binary.
//!
//! Each subcommand reads its inputs, runs one stage of `objreid-core` and
//! writes its outputs plus a `manifest.json` (config hash, input and output
//! hashes, per-class counts) into `--out`.

pub mod commands;
pub mod config;
pub mod error;
pub mod layout;
pub mod manifest;
pub mod split;

pub use config::RunConfig;
pub use error::CliError;
pub use manifest::{Manifest, OutDir};
