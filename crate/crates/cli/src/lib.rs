//! The `abkit` command line.
//!
//! Every subcommand resolves its settings from an optional TOML file (one
//! table per subcommand) overlaid with command-line flags, writes its
//! artifacts under one output directory and records a `manifest.json` there.
//! Exit codes: 0 on success, 1 on a domain error, 2 on a usage error.

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

mod cli;
mod cmd;
mod config;
mod manifest;
mod output;

pub use cli::Cli;
pub use config::UsageError;
pub use manifest::{FileDigest, RunManifest};
pub use cmd::train::ModelBundle;

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cmd::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e:#}\n\nRun `abkit --help` for usage.");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
