//! Cartesian parameter grids run in parallel, one output file per cell.

use std::path::Path;

use rayon::prelude::*;
use spinbath_core::liouville::SystemParams;

use crate::config::RunConfig;
use crate::emit::Table;
use crate::error::{CliError, CliResult};
use crate::runner::{check_command, run_single};

pub const THREADS_ENV: &str = "SPINBATH_THREADS";

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub config: RunConfig,
    pub file: String,
}

/// Cells in row-major order over (N, nbar, gamma).
pub fn cells(config: &RunConfig) -> Vec<Cell> {
    let grid = &config.sweep;
    let mut out = Vec::new();
    for &n in &grid.n_particles {
        for &nbar in &grid.nbar {
            for &gamma in &grid.gamma {
                let index = out.len();
                let cell = RunConfig {
                    command: grid.layer.command(),
                    params: SystemParams { n_particles: n, nbar, gamma, ..config.params },
                    output: None,
                    ..config.clone()
                };
                let file = format!("cell_{index:04}.{}", config.format.extension());
                out.push(Cell { index, config: cell, file });
            }
        }
    }
    out
}

/// Runs every cell into `config.output` (a directory) and then writes `index.csv`.
/// Cell results do not depend on `threads`.
pub fn run_sweep(config: &RunConfig, threads: Option<usize>) -> CliResult<Vec<String>> {
    config.validate()?;
    check_command(config)?;
    let dir = config.output.as_deref().ok_or_else(|| CliError::config("sweep needs --output DIR"))?;
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let cells = cells(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    let results: Vec<CliResult<f64>> = pool.install(|| cells.par_iter().map(|cell| run_cell(cell, dir)).collect());

    let mut finals = Vec::with_capacity(cells.len());
    for r in results {
        finals.push(r?);
    }
    let index = dir.join("index.csv");
    write_index(&index, &cells, &finals).map_err(|source| CliError::Io { path: index.clone(), source })?;
    Ok(vec![format!("{} cells written to {}", cells.len(), dir.display())])
}

fn run_cell(cell: &Cell, dir: &Path) -> CliResult<f64> {
    let table: Table = run_single(&cell.config)?.table.expect("trajectory commands always tabulate");
    table.write_file(&cell.config, cell.config.format, &dir.join(&cell.file))?;
    Ok(table.last("rho_ee").expect("base column"))
}

fn write_index(path: &Path, cells: &[Cell], finals: &[f64]) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(["cell", "n_particles", "nbar", "gamma", "file", "rho_ee_final"])?;
    for (cell, rho) in cells.iter().zip(finals) {
        let p = &cell.config.params;
        w.write_record([
            cell.index.to_string(),
            p.n_particles.to_string(),
            format!("{:.16e}", p.nbar),
            format!("{:.16e}", p.gamma),
            cell.file.clone(),
            format!("{rho:.16e}"),
        ])?;
    }
    w.flush()
}

/// `--threads` wins over the environment; unset or `0` means one thread per core.
pub fn thread_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::config(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Command, Samples, SweepGrid};

    fn sweep_config(dir: &Path) -> RunConfig {
        RunConfig {
            command: Command::Sweep,
            t_final: 2.0,
            samples: Samples::Count(5),
            output: Some(dir.to_path_buf()),
            sweep: SweepGrid {
                n_particles: vec![1, 5],
                nbar: vec![0.0, 0.5],
                gamma: vec![1.0, 2.0],
                ..SweepGrid::default()
            },
            ..RunConfig::default()
        }
    }

    #[test]
    fn grid_order_and_names() {
        let c = sweep_config(Path::new("x"));
        let cells = cells(&c);
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[3].file, "cell_0003.csv");
        let p = cells[3].config.params;
        assert_eq!((p.n_particles, p.nbar, p.gamma), (1, 0.5, 2.0));
        assert!(cells.iter().all(|c| c.config.command == Command::Meanfield && c.config.output.is_none()));
    }

    #[test]
    fn files_do_not_depend_on_thread_count() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_sweep(&sweep_config(a.path()), Some(1)).unwrap();
        run_sweep(&sweep_config(b.path()), Some(4)).unwrap();
        let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert_eq!(names.len(), 9);
        for name in names {
            let x = std::fs::read(a.path().join(&name)).unwrap();
            let y = std::fs::read(b.path().join(&name)).unwrap();
            assert_eq!(x, y, "{name:?}");
        }
    }

    #[test]
    fn sweep_requires_a_directory() {
        let c = RunConfig { output: None, ..sweep_config(Path::new("x")) };
        assert_eq!(run_sweep(&c, Some(1)).unwrap_err().exit_code(), 2);
    }
}
