//! Command-line driver for `spinbath-core`: run configuration, initial-state
//! files, CSV/JSON tables and parallel parameter sweeps.

pub mod config;
pub mod emit;
pub mod error;
pub mod init;
pub mod runner;
pub mod sweep;

use std::io::Write;

pub use config::{Command, Format, InitSpec, RunConfig, Samples, SweepGrid, SweepLayer};
pub use emit::Table;
pub use error::{CliError, CliResult};

/// Runs `config` to completion.
///
/// The table goes to `config.output`, or to `stdout` when no path is set; in
/// the latter case summary lines move to `stderr` so `stdout` stays parseable.
pub fn execute(
    config: &RunConfig,
    threads: Option<usize>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult<()> {
    let console = |source| CliError::Io { path: "<console>".into(), source };
    if config.command == Command::Sweep {
        for line in sweep::run_sweep(config, threads)? {
            writeln!(stdout, "{line}").map_err(console)?;
        }
        return Ok(());
    }
    let out = runner::run_single(config)?;
    for w in &out.warnings {
        writeln!(stderr, "warning: {w}").map_err(console)?;
    }
    let table_on_stdout = out.table.is_some() && config.output.is_none();
    match (&out.table, &config.output) {
        (Some(table), Some(path)) => table.write_file(config, config.format, path)?,
        (Some(table), None) => table.write_to(config, config.format, &mut *stdout).map_err(console)?,
        (None, _) => {}
    }
    let summary: &mut dyn Write = if table_on_stdout { stderr } else { stdout };
    for line in &out.summary {
        writeln!(summary, "{line}").map_err(console)?;
    }
    Ok(())
}
