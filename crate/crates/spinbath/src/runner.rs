//! One run of one command: build the layer, integrate, tabulate.

use spinbath_core::correlations::{evolve_pair_closure, matrix3_max_diff, pair_decompose_matrix, Matrix3};
use spinbath_core::liouville::{build_model_dicke, build_model_full, evolve, Evolution, LindbladModel};
use spinbath_core::meanfield::{
    closed_form_no_dissipation, evolve_meanfield, n1_solution, stationary, BlochState, MeanFieldParams,
};
use spinbath_core::qops::{expectation_matrix, partial_trace_matrix, DensityMatrix, DEFAULT_MAX_SITES};
use spinbath_core::{Complex64, Error};

use crate::config::{Command, RunConfig};
use crate::emit::Table;
use crate::error::{CliError, CliResult};
use crate::init::{resolve, InitialState};

/// Largest N for which `compare` and `correlations` add the full-space exact reference.
pub const EXACT_REFERENCE_MAX: usize = 8;

/// What a single (non-sweep) command produced.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutput {
    /// `None` when the command has nothing to tabulate (e.g. `stationary` without an output file).
    pub table: Option<Table>,
    /// Human-readable result lines.
    pub summary: Vec<String>,
    /// Non-fatal diagnostics.
    pub warnings: Vec<String>,
}

impl RunOutput {
    fn table(table: Table) -> Self {
        Self { table: Some(table), ..Self::default() }
    }
}

/// Rejects combinations that validate field by field but cannot run.
pub fn check_command(config: &RunConfig) -> CliResult<()> {
    let n = config.params.n_particles;
    let command = match config.command {
        Command::Sweep => config.sweep.layer.command(),
        c => c,
    };
    let ns: Vec<usize> = if config.command == Command::Sweep { config.sweep.n_particles.clone() } else { vec![n] };
    match command {
        Command::Exact => {
            if let Some(&big) = ns.iter().find(|&&n| n > DEFAULT_MAX_SITES) {
                return Err(CliError::config(format!(
                    "the full-space layer is capped at N = {DEFAULT_MAX_SITES} (got {big}); use dicke"
                )));
            }
        }
        Command::Correlations if n < 3 => {
            return Err(CliError::config("the pair closure needs N >= 3"));
        }
        Command::Closedform if config.dissipation && n > 1 => {
            return Err(CliError::config(
                "no closed form with dissipation for N > 1; use --no-dissipation or the meanfield command",
            ));
        }
        Command::Stationary if config.params.gamma == 0.0 => {
            return Err(CliError::config("no stationary state without relaxation (gamma = 0)"));
        }
        _ => {}
    }
    if command == Command::Correlations
        && config.mode == spinbath_core::correlations::ClosureMode::LinearResponse
        && config.params.gamma == 0.0
    {
        return Err(CliError::config("linear-response mode needs gamma > 0"));
    }
    if !config.dissipation && !matches!(command, Command::Meanfield | Command::Closedform | Command::Compare) {
        return Err(CliError::config(format!(
            "dissipation can only be switched off for meanfield, closedform and compare (not {})",
            command.name()
        )));
    }
    Ok(())
}

/// Runs any command except `sweep`.
pub fn run_single(config: &RunConfig) -> CliResult<RunOutput> {
    config.validate()?;
    check_command(config)?;
    let init = resolve(&config.init, config.seed)?;
    match config.command {
        Command::Exact => run_exact(config, &init, false),
        Command::Dicke => run_exact(config, &init, true),
        Command::Meanfield => Ok(RunOutput::table(meanfield_table(config, &init)?)),
        Command::Closedform => Ok(RunOutput::table(closed_form_table(config, &init)?)),
        Command::Stationary => run_stationary(config),
        Command::Compare => run_compare(config, &init),
        Command::Correlations => run_correlations(config, &init),
        Command::Sweep => Err(CliError::config("sweep cells cannot themselves be sweeps")),
    }
}

/// Per-particle Bloch state of a collective state.
fn per_particle(rho: &DensityMatrix, model_ops: &LayerOps) -> CliResult<BlochState> {
    let n = model_ops.n as f64;
    let s0 = expectation_matrix(rho.matrix(), &model_ops.s_0)?.re / n;
    let s_plus = expectation_matrix(rho.matrix(), &model_ops.s_plus)? / n;
    Ok(BlochState { s0, s_plus })
}

struct LayerOps {
    n: usize,
    s_0: spinbath_core::qops::ComplexMatrix,
    s_plus: spinbath_core::qops::ComplexMatrix,
}

fn exact_evolution(config: &RunConfig, init: &InitialState, dicke: bool) -> CliResult<(Evolution, LayerOps)> {
    let p = &config.params;
    let n = p.n_particles;
    let (model, rho0): (LindbladModel, DensityMatrix) =
        if dicke { (build_model_dicke(p)?, init.dicke(n)?) } else { (build_model_full(p)?, init.full_space(n)?) };
    let ops = if dicke {
        spinbath_core::liouville::DickeLadder::new(n)?.into_operators()
    } else {
        spinbath_core::liouville::CollectiveOperators::full(n, DEFAULT_MAX_SITES)?
    };
    let ev = evolve(&model, &rho0, config.t_final, &config.integrator, &config.sample_times())?;
    Ok((ev, LayerOps { n, s_0: ops.s_0, s_plus: ops.s_plus }))
}

fn run_exact(config: &RunConfig, init: &InitialState, dicke: bool) -> CliResult<RunOutput> {
    let (ev, ops) = exact_evolution(config, init, dicke)?;
    let mut table = Table::new(&["trace", "min_eig"]);
    for ((t, rho), raw) in ev.times.iter().zip(&ev.states).zip(&ev.raw_traces) {
        let state = per_particle(rho, &ops)?;
        table.push(*t, &state, &[*raw, rho.matrix().min_hermitian_eigenvalue()]);
    }
    Ok(RunOutput::table(table))
}

fn meanfield_table(config: &RunConfig, init: &InitialState) -> CliResult<Table> {
    let p = MeanFieldParams::new(config.params)?;
    let traj = evolve_meanfield(
        &init.single()?,
        &p,
        config.dissipation,
        config.t_final,
        &config.integrator,
        &config.sample_times(),
    )?;
    let mut table = Table::new(&[]);
    for s in &traj.samples {
        table.push(s.t, &s.state, &[]);
    }
    Ok(table)
}

/// The analytic trajectory, or `None` when no closed form covers the config.
fn closed_form_states(config: &RunConfig, init: &BlochState) -> CliResult<Option<Vec<BlochState>>> {
    let times = config.sample_times();
    if config.dissipation {
        if config.params.n_particles != 1 {
            return Ok(None);
        }
        return Ok(Some(times.iter().map(|&t| n1_solution(t, init, &config.params)).collect()));
    }
    let p = MeanFieldParams::new(config.params)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in &times {
        out.push(match closed_form_no_dissipation(t, init, &p) {
            Ok(s) => s,
            // a pole stays put
            Err(Error::EquilibriumPoint) => *init,
            Err(e) => return Err(e.into()),
        });
    }
    Ok(Some(out))
}

fn closed_form_table(config: &RunConfig, init: &InitialState) -> CliResult<Table> {
    let states = closed_form_states(config, &init.single()?)?
        .ok_or_else(|| CliError::config("no closed form with dissipation for N > 1"))?;
    let mut table = Table::new(&[]);
    for (t, s) in config.sample_times().iter().zip(&states) {
        table.push(*t, s, &[]);
    }
    Ok(table)
}

fn run_stationary(config: &RunConfig) -> CliResult<RunOutput> {
    let s = stationary(&config.params)?;
    let mut out = RunOutput {
        summary: vec![format!("s0 = {}", s.s0), format!("rho_ee = {}", s.rho_ee())],
        ..RunOutput::default()
    };
    if config.output.is_some() {
        let mut table = Table::new(&[]);
        table.push(config.t_final, &s, &[]);
        out.table = Some(table);
    }
    Ok(out)
}

fn max_deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn run_compare(config: &RunConfig, init: &InitialState) -> CliResult<RunOutput> {
    let mf = meanfield_table(config, init)?;
    let mf_rho = mf.column("rho_ee").expect("base column");
    let n = config.params.n_particles;
    let mut extra: Vec<(&str, Vec<f64>)> = Vec::new();

    if config.dissipation && n <= EXACT_REFERENCE_MAX {
        let (ev, ops) = exact_evolution(config, init, false)?;
        let col = ev.states.iter().map(|r| per_particle(r, &ops).map(|s| s.rho_ee())).collect::<CliResult<_>>()?;
        extra.push(("rho_ee_exact", col));
    }
    let pure = init.pure_single().is_ok();
    if config.dissipation && pure {
        let (ev, ops) = exact_evolution(config, init, true)?;
        let col = ev.states.iter().map(|r| per_particle(r, &ops).map(|s| s.rho_ee())).collect::<CliResult<_>>()?;
        extra.push(("rho_ee_dicke", col));
    }
    if let Some(states) = closed_form_states(config, &init.single()?)? {
        extra.push(("rho_ee_closedform", states.iter().map(BlochState::rho_ee).collect()));
    }

    let mut summary = Vec::new();
    for (name, col) in &extra {
        let layer = name.trim_start_matches("rho_ee_");
        summary.push(format!("max|{layer}-meanfield| = {:.6e}", max_deviation(col, &mf_rho)));
    }
    let exact = extra.iter().find(|(n, _)| *n == "rho_ee_exact");
    let dicke = extra.iter().find(|(n, _)| *n == "rho_ee_dicke");
    if let (Some((_, e)), Some((_, d))) = (exact, dicke) {
        summary.push(format!("max|exact-dicke| = {:.6e}", max_deviation(e, d)));
    }

    let names: Vec<&str> = extra.iter().map(|(n, _)| *n).collect();
    let mut table = Table::new(&names);
    for (i, row) in mf.rows.iter().enumerate() {
        let state = BlochState { s0: row[1], s_plus: Complex64::new(row[2], row[3]) };
        let values: Vec<f64> = extra.iter().map(|(_, c)| c[i]).collect();
        table.push(row[0], &state, &values);
    }
    Ok(RunOutput { table: Some(table), summary, warnings: Vec::new() })
}

const CHI_COLUMNS: [&str; 9] =
    ["chi_xx", "chi_xy", "chi_xz", "chi_yx", "chi_yy", "chi_yz", "chi_zx", "chi_zy", "chi_zz"];

/// Exact two-particle covariances from the full N-particle evolution.
fn exact_pair_covariances(config: &RunConfig, init: &InitialState) -> CliResult<Vec<Matrix3>> {
    let n = config.params.n_particles;
    let (ev, _) = exact_evolution(config, init, false)?;
    ev.states
        .iter()
        .map(|rho| Ok(pair_decompose_matrix(&partial_trace_matrix(rho.matrix(), n, &[1, 2])?).chi))
        .collect()
}

fn run_correlations(config: &RunConfig, init: &InitialState) -> CliResult<RunOutput> {
    let traj = evolve_pair_closure(
        &init.pair()?,
        &config.params,
        config.t_final,
        &config.integrator,
        &config.sample_times(),
        config.mode,
    )?;
    let reference = if init.is_product() && config.params.n_particles <= EXACT_REFERENCE_MAX {
        Some(exact_pair_covariances(config, init)?)
    } else {
        None
    };

    let mut names: Vec<&str> = CHI_COLUMNS.to_vec();
    names.extend(["min_eig", "trace", "swap_defect"]);
    if reference.is_some() {
        names.extend(["chi_err_closure", "chi_err_meanfield"]);
    }
    let zero: Matrix3 = [[0.0; 3]; 3];
    let mut table = Table::new(&names);
    let (mut closure_sum, mut meanfield_sum) = (0.0, 0.0);
    for (i, s) in traj.samples.iter().enumerate() {
        let mut values: Vec<f64> = s.chi.iter().flatten().copied().collect();
        values.extend([s.min_eigenvalue, s.trace, s.swap_defect]);
        if let Some(exact) = &reference {
            let (c, m) = (matrix3_max_diff(&s.chi, &exact[i]), matrix3_max_diff(&zero, &exact[i]));
            closure_sum += c;
            meanfield_sum += m;
            values.extend([c, m]);
        }
        table.push(s.t, &s.bloch, &values);
    }

    let mut summary = Vec::new();
    if reference.is_some() {
        let count = traj.samples.len() as f64;
        summary.push(format!("mean|chi_closure-chi_exact| = {:.6e}", closure_sum / count));
        summary.push(format!("mean|chi_meanfield-chi_exact| = {:.6e}", meanfield_sum / count));
    }
    let warnings = traj
        .warnings
        .iter()
        .map(|w| format!("pair state lost positivity at t = {}: smallest eigenvalue {:e}", w.t, w.min_eigenvalue))
        .collect();
    Ok(RunOutput { table: Some(table), summary, warnings })
}
