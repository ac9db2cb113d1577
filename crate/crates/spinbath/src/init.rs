//! Turning an [`InitSpec`] into the state each layer starts from.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;
use spinbath_core::liouville::{coherent_state, Basis};
use spinbath_core::meanfield::BlochState;
use spinbath_core::qops::{ComplexMatrix, DensityMatrix};
use spinbath_core::Complex64;

use crate::config::InitSpec;
use crate::error::{CliError, CliResult};

/// How far `s0^2 + 4|s+|^2` may sit below 1 for a state to count as pure.
pub const PURITY_TOLERANCE: f64 = 1e-12;

/// A resolved initial state: either one particle (copied onto every site) or
/// an explicit matrix whose dimension picks the layer it can feed.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    Single(BlochState),
    Matrix(DensityMatrix),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StateFile {
    Bloch { s0: f64, s_plus: [f64; 2] },
    Matrix { dim: usize, re: Vec<f64>, im: Vec<f64> },
}

/// Pure state drawn uniformly from the Bloch sphere.
pub fn random_pure_bloch(rng: &mut impl rand::Rng) -> BlochState {
    loop {
        let v: [f64; 3] = [StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1e-6 {
            return BlochState { s0: v[2] / norm, s_plus: Complex64::new(v[0], v[1]) / (2.0 * norm) };
        }
    }
}

pub fn resolve(spec: &InitSpec, seed: u64) -> CliResult<InitialState> {
    let bloch =
        |s0: f64, sp: Complex64| BlochState::new(s0, sp).map_err(|e| CliError::config(format!("initial state: {e}")));
    Ok(match spec {
        InitSpec::AllExcited => InitialState::Single(BlochState::excited()),
        InitSpec::NearExcited(eps) => InitialState::Single(
            BlochState::on_pure_sphere(1.0 - eps, 0.0).map_err(|e| CliError::config(format!("initial state: {e}")))?,
        ),
        InitSpec::Bloch { s0, re, im } => InitialState::Single(bloch(*s0, Complex64::new(*re, *im))?),
        InitSpec::Random => InitialState::Single(random_pure_bloch(&mut ChaCha8Rng::seed_from_u64(seed))),
        InitSpec::File(path) => read_state_file(path)?,
    })
}

fn read_state_file(path: &Path) -> CliResult<InitialState> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read initial state {}: {e}", path.display())))?;
    let parsed: StateFile = serde_json::from_str(&text).map_err(|_| {
        CliError::config(format!(
            "{}: expected {{\"s0\", \"s_plus\": [re, im]}} or {{\"dim\", \"re\", \"im\"}}",
            path.display()
        ))
    })?;
    let invalid = |e: spinbath_core::Error| CliError::config(format!("initial state {}: {e}", path.display()));
    match parsed {
        StateFile::Bloch { s0, s_plus } => {
            Ok(InitialState::Single(BlochState::new(s0, Complex64::new(s_plus[0], s_plus[1])).map_err(invalid)?))
        }
        StateFile::Matrix { dim, re, im } => {
            if re.len() != dim * dim || im.len() != dim * dim {
                return Err(CliError::config(format!(
                    "{}: re and im need dim^2 = {} entries each",
                    path.display(),
                    dim * dim
                )));
            }
            let data = re.iter().zip(&im).map(|(&r, &i)| Complex64::new(r, i)).collect();
            let m = ComplexMatrix::from_row_major(data).map_err(invalid)?;
            Ok(InitialState::Matrix(DensityMatrix::new(m).map_err(invalid)?))
        }
    }
}

impl InitialState {
    pub fn is_product(&self) -> bool {
        matches!(self, Self::Single(_))
    }

    pub fn single(&self) -> CliResult<BlochState> {
        match self {
            Self::Single(b) => Ok(*b),
            Self::Matrix(m) if m.dim() == 2 => {
                BlochState::from_matrix(m.matrix()).map_err(|e| CliError::config(format!("initial state: {e}")))
            }
            Self::Matrix(m) => {
                Err(CliError::config(format!("this command needs a single-particle state, got dimension {}", m.dim())))
            }
        }
    }

    /// Product state on `2^n` levels, or the file matrix if it already has that size.
    pub fn full_space(&self, n: usize) -> CliResult<DensityMatrix> {
        if let Self::Matrix(m) = self {
            if m.dim() == 1usize << n {
                return Ok(m.clone());
            }
        }
        let rho1 = DensityMatrix::new(self.single()?.to_matrix())
            .map_err(|e| CliError::config(format!("initial state: {e}")))?;
        Ok(rho1.product_power(n))
    }

    /// Symmetric-ladder state. A single-particle state must be pure, since
    /// only then does its product lie inside the ladder.
    pub fn dicke(&self, n: usize) -> CliResult<DensityMatrix> {
        if let Self::Matrix(m) = self {
            if m.dim() == n + 1 && n > 1 {
                return Ok(m.clone());
            }
        }
        let b = self.pure_single()?;
        coherent_state(n, Basis::Dicke, b.rho_ee(), b.s_plus.arg())
            .map_err(|e| CliError::config(format!("initial state: {e}")))
    }

    pub fn pure_single(&self) -> CliResult<BlochState> {
        let b = self.single()?;
        if (1.0 - b.radius_sq()).abs() > PURITY_TOLERANCE {
            return Err(CliError::config(format!(
                "the symmetric ladder needs a pure initial state (s0^2 + 4|s+|^2 = {})",
                b.radius_sq()
            )));
        }
        Ok(b)
    }

    /// Two-particle state: `rho1 (x) rho1`, or a 4-level file matrix.
    pub fn pair(&self) -> CliResult<DensityMatrix> {
        if let Self::Matrix(m) = self {
            if m.dim() == 4 {
                return Ok(m.clone());
            }
        }
        self.full_space(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn named_states() {
        let s = resolve(&InitSpec::NearExcited(1e-3), 0).unwrap().single().unwrap();
        assert!((s.rho_ee() - (1.0 - 1e-3)).abs() < 1e-15);
        assert!(s.s_plus.im == 0.0 && s.s_plus.re > 0.0);
        assert!((s.radius_sq() - 1.0).abs() < 1e-14);
        assert_eq!(resolve(&InitSpec::AllExcited, 0).unwrap().single().unwrap(), BlochState::excited());
        assert_eq!(resolve(&InitSpec::Bloch { s0: 0.0, re: 2.0, im: 0.0 }, 0).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn random_state_depends_only_on_seed() {
        let a = resolve(&InitSpec::Random, 7).unwrap();
        assert_eq!(a, resolve(&InitSpec::Random, 7).unwrap());
        assert_ne!(a, resolve(&InitSpec::Random, 8).unwrap());
        assert!((a.single().unwrap().radius_sq() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn layer_states_share_the_single_particle_marginal() {
        let init = resolve(&InitSpec::Bloch { s0: 0.6, re: 0.4 * 0.5f64.sqrt(), im: 0.4 * 0.5f64.sqrt() }, 0).unwrap();
        let full = init.full_space(3).unwrap();
        assert_eq!(full.dim(), 8);
        let dicke = init.dicke(3).unwrap();
        assert_eq!(dicke.dim(), 4);
        assert!((dicke.purity() - 1.0).abs() < 1e-12);
        let mixed = resolve(&InitSpec::Bloch { s0: 0.5, re: 0.0, im: 0.0 }, 0).unwrap();
        assert_eq!(mixed.dicke(3).unwrap_err().exit_code(), 2);
        assert_eq!(mixed.pair().unwrap().dim(), 4);
    }

    #[test]
    fn state_files() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"s0": -0.2, "s_plus": [0.1, -0.3]}}"#).unwrap();
        let s = resolve(&InitSpec::File(f.path().into()), 0).unwrap().single().unwrap();
        assert_eq!(s.s0, -0.2);
        assert_eq!(s.s_plus, Complex64::new(0.1, -0.3));

        let mut g = tempfile::NamedTempFile::new().unwrap();
        write!(g, r#"{{"dim": 2, "re": [0.25, 0.0, 0.0, 0.75], "im": [0, 0, 0, 0]}}"#).unwrap();
        let m = resolve(&InitSpec::File(g.path().into()), 0).unwrap();
        assert!((m.single().unwrap().s0 + 0.5).abs() < 1e-15);
        assert_eq!(m.full_space(2).unwrap().dim(), 4);

        let mut h = tempfile::NamedTempFile::new().unwrap();
        write!(h, r#"{{"dim": 2, "re": [1.5, 0.0, 0.0, -0.5], "im": [0, 0, 0, 0]}}"#).unwrap();
        assert_eq!(resolve(&InitSpec::File(h.path().into()), 0).unwrap_err().exit_code(), 2);
        assert_eq!(resolve(&InitSpec::File("/nonexistent/state.json".into()), 0).unwrap_err().exit_code(), 2);
    }
}
