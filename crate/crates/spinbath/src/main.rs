use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use spinbath::config::{Command, Format, InitSpec, RunConfig, Samples, SweepLayer};
use spinbath::{execute, sweep, CliError, CliResult};
use spinbath_core::correlations::ClosureMode;
use spinbath_core::integrate::Method;

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum ModeArg {
    Full,
    LinearResponse,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum MethodArg {
    Rk4,
    Rk45,
}

/// Collective spins in a thermal bath: exact, mean-field and pair-correlation dynamics.
///
/// Flags override values from `--config`; anything unset keeps its default.
#[derive(Debug, Parser)]
#[command(name = "spinbath", version)]
struct Cli {
    /// Command to run; defaults to the one in `--config`, else `meanfield`.
    #[arg(value_enum)]
    command: Option<Command>,

    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long = "N", value_name = "N")]
    n_particles: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    omega0: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    nbar: Option<f64>,
    /// Quantization volume; only 1 is supported.
    #[arg(long)]
    volume: Option<f64>,

    #[arg(long)]
    t_final: Option<f64>,
    /// Number of evenly spaced samples on [0, t_final].
    #[arg(long, conflicts_with = "times")]
    samples: Option<usize>,
    /// Explicit sample times, comma separated.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    /// all_excited | near_excited:EPS | bloch:S0,RE,IM | random | file:PATH
    #[arg(long, allow_hyphen_values = true)]
    init: Option<InitSpec>,
    #[arg(long, conflicts_with = "no_dissipation")]
    dissipation: bool,
    #[arg(long)]
    no_dissipation: bool,
    /// Closure variant for `correlations`.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,

    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,

    /// Output file (a directory for `sweep`); stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep worker threads (also `SPINBATH_THREADS`); 0 means one per core.
    #[arg(long)]
    threads: Option<usize>,

    #[arg(long, value_delimiter = ',')]
    sweep_n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    sweep_nbar: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    sweep_gamma: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    sweep_layer: Option<SweepLayer>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Cli {
    fn into_config(self) -> CliResult<RunConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
                RunConfig::from_json(&text)?
            }
            None => RunConfig::default(),
        };
        set(&mut c.command, self.command);
        set(&mut c.params.n_particles, self.n_particles);
        set(&mut c.params.omega0, self.omega0);
        set(&mut c.params.gamma, self.gamma);
        set(&mut c.params.nbar, self.nbar);
        set(&mut c.params.volume, self.volume);
        set(&mut c.t_final, self.t_final);
        set(&mut c.samples, self.samples.map(Samples::Count));
        set(&mut c.samples, self.times.map(Samples::Times));
        set(&mut c.init, self.init);
        if self.dissipation {
            c.dissipation = true;
        }
        if self.no_dissipation {
            c.dissipation = false;
        }
        set(
            &mut c.mode,
            self.mode.map(|m| match m {
                ModeArg::Full => ClosureMode::Full,
                ModeArg::LinearResponse => ClosureMode::LinearResponse,
            }),
        );
        set(
            &mut c.integrator.method,
            self.method.map(|m| match m {
                MethodArg::Rk4 => Method::Rk4Fixed,
                MethodArg::Rk45 => Method::Rk45Adaptive,
            }),
        );
        set(&mut c.integrator.step, self.step);
        set(&mut c.integrator.rtol, self.rtol);
        set(&mut c.integrator.atol, self.atol);
        set(&mut c.integrator.max_steps, self.max_steps);
        if self.output.is_some() {
            c.output = self.output;
        }
        set(&mut c.format, self.format);
        set(&mut c.seed, self.seed);
        set(&mut c.sweep.n_particles, self.sweep_n);
        set(&mut c.sweep.nbar, self.sweep_nbar);
        set(&mut c.sweep.gamma, self.sweep_gamma);
        set(&mut c.sweep.layer, self.sweep_layer);
        Ok(c)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let result = cli.into_config().and_then(|config| {
        let threads = sweep::thread_count(threads)?;
        execute(&config, threads, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spinbath: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
