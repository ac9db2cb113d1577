//! Run configuration: everything a command needs, serializable so that every
//! output file can echo it back.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use spinbath_core::correlations::ClosureMode;
use spinbath_core::integrate::{linspace, IntegratorConfig};
use spinbath_core::liouville::SystemParams;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Exact master equation on the full 2^N space.
    Exact,
    /// Exact master equation on the symmetric (N+1)-level ladder.
    Dicke,
    /// Mean-field equations for one representative particle.
    Meanfield,
    /// Analytic solutions (dissipation-free flow, or N = 1 with dissipation).
    Closedform,
    /// The stationary mean-field state.
    Stationary,
    /// Exact, Dicke, mean-field and closed-form excited populations side by side.
    Compare,
    /// Pair-correlation closure of the second hierarchy equation.
    Correlations,
    /// Cartesian grid over N, nbar and Gamma.
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Dicke => "dicke",
            Self::Meanfield => "meanfield",
            Self::Closedform => "closedform",
            Self::Stationary => "stationary",
            Self::Compare => "compare",
            Self::Correlations => "correlations",
            Self::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

/// Either a number of evenly spaced samples on `[0, t_final]` or explicit times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Samples {
    Count(usize),
    Times(Vec<f64>),
}

impl Default for Samples {
    fn default() -> Self {
        Self::Count(101)
    }
}

impl Samples {
    pub fn times(&self, t_final: f64) -> Vec<f64> {
        match self {
            Self::Count(n) => linspace(0.0, t_final, *n),
            Self::Times(t) => t.clone(),
        }
    }
}

/// Named initial state. Text forms: `all_excited`, `near_excited:EPS`,
/// `bloch:S0,RE,IM`, `random`, `file:PATH`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitSpec {
    AllExcited,
    /// Pure state with excited probability `1 - eps` and real `<sigma+>`.
    NearExcited(f64),
    Bloch {
        s0: f64,
        re: f64,
        im: f64,
    },
    /// Pure single-particle state drawn from the run seed.
    Random,
    File(PathBuf),
}

impl Default for InitSpec {
    fn default() -> Self {
        Self::NearExcited(1e-3)
    }
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::AllExcited => write!(f, "all_excited"),
            Self::NearExcited(eps) => write!(f, "near_excited:{eps:e}"),
            Self::Bloch { s0, re, im } => write!(f, "bloch:{s0:e},{re:e},{im:e}"),
            Self::Random => write!(f, "random"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for InitSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let number = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("bad number {v:?} in init: {e}"));
        match (head, arg) {
            ("all_excited", None) => Ok(Self::AllExcited),
            ("random", None) => Ok(Self::Random),
            ("near_excited", Some(a)) => Ok(Self::NearExcited(number(a)?)),
            ("bloch", Some(a)) => {
                let parts: Vec<&str> = a.split(',').collect();
                if parts.len() != 3 {
                    return Err(format!("bloch init needs three numbers S0,RE,IM, got {a:?}"));
                }
                Ok(Self::Bloch { s0: number(parts[0])?, re: number(parts[1])?, im: number(parts[2])? })
            }
            ("file", Some(a)) if !a.is_empty() => Ok(Self::File(PathBuf::from(a))),
            _ => Err(format!(
                "unknown init {s:?}; expected all_excited, near_excited:EPS, bloch:S0,RE,IM, random or file:PATH"
            )),
        }
    }
}

impl TryFrom<String> for InitSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<InitSpec> for String {
    fn from(i: InitSpec) -> String {
        i.to_string()
    }
}

/// Which layer each sweep cell runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepLayer {
    #[default]
    Meanfield,
    Dicke,
    Exact,
}

impl SweepLayer {
    pub fn command(self) -> Command {
        match self {
            Self::Meanfield => Command::Meanfield,
            Self::Dicke => Command::Dicke,
            Self::Exact => Command::Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub n_particles: Vec<usize>,
    pub nbar: Vec<f64>,
    pub gamma: Vec<f64>,
    pub layer: SweepLayer,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { n_particles: vec![1, 20, 40], nbar: vec![0.0, 0.5], gamma: vec![1.0], layer: SweepLayer::Meanfield }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub params: SystemParams,
    pub integrator: IntegratorConfig,
    pub t_final: f64,
    pub samples: Samples,
    pub init: InitSpec,
    /// Include the dissipative terms (mean-field and closed-form commands).
    pub dissipation: bool,
    /// Closure variant for the correlations command.
    pub mode: ClosureMode,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub sweep: SweepGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Meanfield,
            params: SystemParams::default(),
            integrator: IntegratorConfig::default(),
            t_final: 10.0,
            samples: Samples::default(),
            init: InitSpec::default(),
            dissipation: true,
            mode: ClosureMode::Full,
            output: None,
            format: Format::Csv,
            seed: 0,
            sweep: SweepGrid::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("config file: {e}")))
    }

    pub fn sample_times(&self) -> Vec<f64> {
        self.samples.times(self.t_final)
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(CliError::config("t_final must be positive and finite"));
        }
        match &self.samples {
            Samples::Count(n) if *n < 2 => return Err(CliError::config("samples must be at least 2")),
            Samples::Times(t) => {
                if t.len() < 2 {
                    return Err(CliError::config("an explicit sample list needs at least 2 times"));
                }
                if t.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
                    return Err(CliError::config("sample times must be strictly increasing"));
                }
                if t[0] < 0.0 || t[t.len() - 1] > self.t_final {
                    return Err(CliError::config("sample times must lie within [0, t_final]"));
                }
            }
            _ => {}
        }
        if let InitSpec::NearExcited(eps) = self.init {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(CliError::config("near_excited epsilon must lie in (0, 1)"));
            }
        }
        self.params.validate().map_err(|e| CliError::config(e.to_string()))?;
        if self.params.volume != 1.0 {
            return Err(CliError::config("volume is fixed to 1 by the command-line driver"));
        }
        self.integrator.validate().map_err(|e| CliError::config(e.to_string()))?;
        if self.command == Command::Sweep {
            let g = &self.sweep;
            if g.n_particles.is_empty() || g.nbar.is_empty() || g.gamma.is_empty() {
                return Err(CliError::config("every sweep axis needs at least one value"));
            }
            for &n in &g.n_particles {
                for &nbar in &g.nbar {
                    for &gamma in &g.gamma {
                        SystemParams { n_particles: n, nbar, gamma, ..self.params }
                            .validate()
                            .map_err(|e| CliError::config(format!("sweep cell: {e}")))?;
                    }
                }
            }
        }
        Ok(())
    }
}
