//! Two-particle correlations beyond mean field.
//!
//! A pair state is split as `rho_2 = rho_1 ⊗ rho_1 + chi`, with the
//! correlation operator `chi = sum_ij chi_ij sigma_i ⊗ sigma_j` carrying no
//! single-particle content (both partial traces vanish). In Pauli
//! coefficients `B_ij = <sigma_i(1) sigma_j(2)> = <sigma_i><sigma_j> + 4 chi_ij`.
//!
//! The pair closure truncates the hierarchy at `K = 2` by replacing the
//! three-particle state with
//!
//! ```text
//! rho_3 ≈ rho_1 rho_1 rho_1 + rho_1(1) chi(2,3) + rho_1(2) chi(1,3) + rho_1(3) chi(1,2)
//! ```
//!
//! and feeding it to the exact second hierarchy equation. In
//! [`ClosureMode::LinearResponse`] the one-particle state is held at the
//! mean-field stationary state and only `chi` evolves. That mode is this
//! crate's reading of the linear-response idea: the time derivative of the
//! pair state is projected onto the space of correlation operators, dropping
//! the part that would move `rho_1`.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hierarchy::ReducedGenerator;
use crate::integrate::{integrate, IntegrationStats, IntegratorConfig, OdeProblem, OdeSystem};
use crate::liouville::{hermitize_interleaved, SystemParams};
use crate::meanfield::{stationary, BlochState};
use crate::qops::{
    expectation_matrix, partial_trace_matrix, pauli_xyz, permute_sites, swap_operator, ComplexMatrix, DensityMatrix,
};

/// Slack on the vanishing partial traces of a [`CorrelationOperator`].
pub const TRACE_FREE_TOLERANCE: f64 = 1e-12;
/// Slack on `rho_2 = SWAP rho_2 SWAP` for closure inputs.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Negative eigenvalue of the pair state that is reported as a warning.
pub const POSITIVITY_WARN: f64 = 1e-6;
/// Negative eigenvalue of the pair state that aborts a closure run.
pub const POSITIVITY_ABORT: f64 = 1e-3;

pub type Matrix3 = [[f64; 3]; 3];

/// `(<sigma_x>, <sigma_y>, <sigma_z>)`.
pub fn bloch_decompose(rho1: &DensityMatrix) -> [f64; 3] {
    bloch_vector(rho1.matrix())
}

/// Bloch vector of any 2x2 operator (real parts of the Pauli expectations).
pub fn bloch_vector(m: &ComplexMatrix) -> [f64; 3] {
    let paulis = pauli_xyz();
    core::array::from_fn(|i| expectation_matrix(m, &paulis[i]).expect("2x2 operator").re)
}

/// `(I + v . sigma) / 2`.
pub fn bloch_reconstruct(v: &[f64; 3]) -> ComplexMatrix {
    let mut m = ComplexMatrix::identity(2);
    for (s, &vi) in pauli_xyz().iter().zip(v) {
        m.add_scaled(Complex64::new(vi, 0.0), s);
    }
    m.scale_real(0.5)
}

/// Pauli-basis coordinates of a two-particle state.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairDecomposition {
    pub bloch1: [f64; 3],
    pub bloch2: [f64; 3],
    /// `B_ij = <sigma_i(1) sigma_j(2)>`
    pub b: Matrix3,
    /// `chi_ij = (B_ij - bloch1_i bloch2_j) / 4`
    pub chi: Matrix3,
}

impl PairDecomposition {
    /// `(I⊗I + a.sigma⊗I + I⊗b.sigma + sum B_ij sigma_i⊗sigma_j) / 4`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let paulis = pauli_xyz();
        let id = ComplexMatrix::identity(2);
        let mut m = ComplexMatrix::identity(4);
        for i in 0..3 {
            m.add_scaled(Complex64::new(self.bloch1[i], 0.0), &paulis[i].kron(&id));
            m.add_scaled(Complex64::new(self.bloch2[i], 0.0), &id.kron(&paulis[i]));
            for j in 0..3 {
                m.add_scaled(Complex64::new(self.b[i][j], 0.0), &paulis[i].kron(&paulis[j]));
            }
        }
        m.scale_real(0.25)
    }
}

pub fn pair_decompose(rho2: &DensityMatrix) -> PairDecomposition {
    pair_decompose_matrix(rho2.matrix())
}

/// [`pair_decompose`] for any hermitian 4x4 operator.
pub fn pair_decompose_matrix(m: &ComplexMatrix) -> PairDecomposition {
    let paulis = pauli_xyz();
    let id = ComplexMatrix::identity(2);
    let ev = |op: &ComplexMatrix| expectation_matrix(m, op).expect("4x4 operator").re;
    let bloch1 = core::array::from_fn(|i| ev(&paulis[i].kron(&id)));
    let bloch2 = core::array::from_fn(|i| ev(&id.kron(&paulis[i])));
    let b: Matrix3 = core::array::from_fn(|i| core::array::from_fn(|j| ev(&paulis[i].kron(&paulis[j]))));
    let chi = core::array::from_fn(|i| core::array::from_fn(|j| 0.25 * (b[i][j] - bloch1[i] * bloch2[j])));
    PairDecomposition { bloch1, bloch2, b, chi }
}

/// A hermitian 4x4 operator whose single-site partial traces both vanish.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationOperator {
    matrix: ComplexMatrix,
}

impl CorrelationOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        matrix.check_dim(4)?;
        let residual = trace_free_defect(&matrix).max(matrix.hermiticity_defect());
        if residual > TRACE_FREE_TOLERANCE {
            return Err(Error::IdentityViolation { label: "correlation operator", residual });
        }
        Ok(Self { matrix })
    }

    pub fn zero() -> Self {
        Self { matrix: ComplexMatrix::zeros(4) }
    }

    /// `rho_2 - Tr_2(rho_2) ⊗ Tr_1(rho_2)`.
    pub fn from_state(rho2: &DensityMatrix) -> Result<Self> {
        let m = rho2.matrix();
        m.check_dim(4)?;
        let r1 = partial_trace_matrix(m, 2, &[1])?;
        let r2 = partial_trace_matrix(m, 2, &[2])?;
        Self::new(m - &r1.kron(&r2))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Covariance coefficients `chi_ij = Tr(chi sigma_i⊗sigma_j) / 4`.
    pub fn coefficients(&self) -> Matrix3 {
        let paulis = pauli_xyz();
        core::array::from_fn(|i| {
            core::array::from_fn(|j| {
                0.25 * expectation_matrix(&self.matrix, &paulis[i].kron(&paulis[j])).expect("4x4").re
            })
        })
    }
}

/// Largest entry of either single-site partial trace.
pub fn trace_free_defect(m: &ComplexMatrix) -> f64 {
    let t1 = partial_trace_matrix(m, 2, &[1]).expect("4x4").max_norm();
    let t2 = partial_trace_matrix(m, 2, &[2]).expect("4x4").max_norm();
    t1.max(t2)
}

/// `sum_ij chi_ij sigma_i ⊗ sigma_j`.
pub fn chi_operator(d: &PairDecomposition) -> CorrelationOperator {
    CorrelationOperator { matrix: chi_from_coefficients(&d.chi) }
}

pub fn chi_from_coefficients(chi: &Matrix3) -> ComplexMatrix {
    let paulis = pauli_xyz();
    let mut m = ComplexMatrix::zeros(4);
    for i in 0..3 {
        for j in 0..3 {
            m.add_scaled(Complex64::new(chi[i][j], 0.0), &paulis[i].kron(&paulis[j]));
        }
    }
    m
}

/// Three-particle state built from one-particle states and pair
/// correlations. `chi_ab` acts on particles `a < b` in that order.
pub fn rho3_ansatz(
    r1: &DensityMatrix,
    r2: &DensityMatrix,
    r3: &DensityMatrix,
    chi12: &CorrelationOperator,
    chi13: &CorrelationOperator,
    chi23: &CorrelationOperator,
) -> ComplexMatrix {
    rho3_ansatz_matrix(r1.matrix(), r2.matrix(), r3.matrix(), &chi12.matrix, &chi13.matrix, &chi23.matrix)
}

pub(crate) fn rho3_ansatz_matrix(
    r1: &ComplexMatrix,
    r2: &ComplexMatrix,
    r3: &ComplexMatrix,
    chi12: &ComplexMatrix,
    chi13: &ComplexMatrix,
    chi23: &ComplexMatrix,
) -> ComplexMatrix {
    let mut out = r1.kron(r2).kron(r3);
    out += &r1.kron(chi23);
    // r2 ⊗ chi13 has particles in slot order (2, 1, 3)
    out += &permute_sites(&r2.kron(chi13), 3, &[2, 1, 3]).expect("three sites");
    out += &chi12.kron(r3);
    out
}

/// The same ansatz written with pair states:
/// `rho_1(1) rho_2(2,3) + rho_1(2) rho_2(1,3) + rho_1(3) rho_2(1,2) - 2 rho_1 rho_1 rho_1`.
pub fn rho3_from_pairs(
    r1: &DensityMatrix,
    r2: &DensityMatrix,
    r3: &DensityMatrix,
    rho12: &DensityMatrix,
    rho13: &DensityMatrix,
    rho23: &DensityMatrix,
) -> ComplexMatrix {
    let (r1, r2, r3) = (r1.matrix(), r2.matrix(), r3.matrix());
    let mut out = r1.kron(rho23.matrix());
    out += &permute_sites(&r2.kron(rho13.matrix()), 3, &[2, 1, 3]).expect("three sites");
    out += &rho12.matrix().kron(r3);
    out.add_scaled(Complex64::new(-2.0, 0.0), &r1.kron(r2).kron(r3));
    out
}

/// `max |rho - SWAP rho SWAP|` for a two-particle operator.
pub fn swap_defect(rho2: &ComplexMatrix) -> f64 {
    let s = swap_operator();
    rho2.max_abs_diff(&s.matmul(rho2).matmul(&s))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum ClosureMode {
    /// Evolve `rho_1` and `chi` together.
    Full,
    /// Hold `rho_1` at the stationary state and evolve `chi` only.
    LinearResponse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosureSample {
    pub t: f64,
    /// One-particle state (the average of both marginals).
    pub rho1: ComplexMatrix,
    pub bloch: BlochState,
    pub chi: Matrix3,
    /// Reconstructed pair state `rho_1 ⊗ rho_1 + chi`.
    pub rho2: ComplexMatrix,
    pub min_eigenvalue: f64,
    pub trace: f64,
    pub swap_defect: f64,
}

/// A sample whose pair state left the physical set by more than
/// [`POSITIVITY_WARN`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositivityWarning {
    pub t: f64,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosureTrajectory {
    pub samples: Vec<ClosureSample>,
    pub warnings: Vec<PositivityWarning>,
    pub stats: IntegrationStats,
}

struct PairFlow {
    generator: ReducedGenerator,
    mode: ClosureMode,
    // frozen one-particle state (linear response only)
    frozen: ComplexMatrix,
}

impl PairFlow {
    /// `(rho_1, rho_2, chi)` for the integrated vector.
    fn split(&self, y: &[f64]) -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
        let m = ComplexMatrix::from_interleaved(4, y).expect("state length");
        match self.mode {
            ClosureMode::Full => {
                let rho1 = average_marginal(&m);
                let chi = &m - &rho1.kron(&rho1);
                (rho1, m, chi)
            }
            ClosureMode::LinearResponse => {
                let rho2 = &self.frozen.kron(&self.frozen) + &m;
                (self.frozen.clone(), rho2, m)
            }
        }
    }
}

impl OdeSystem for PairFlow {
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let (rho1, rho2, chi) = self.split(y);
        let rho3 = rho3_ansatz_matrix(&rho1, &rho1, &rho1, &chi, &chi, &chi);
        let d_rho2 = self.generator.apply(&rho2, &rho3);
        let out = match self.mode {
            ClosureMode::Full => d_rho2,
            ClosureMode::LinearResponse => {
                let d1 = partial_trace_matrix(&d_rho2, 2, &[1]).expect("4x4");
                let d2 = partial_trace_matrix(&d_rho2, 2, &[2]).expect("4x4");
                let mut projected = d_rho2;
                projected -= &d1.kron(&self.frozen);
                projected -= &self.frozen.kron(&d2);
                projected
            }
        };
        out.write_interleaved(dy);
    }

    fn after_step(&self, t: f64, y: &mut [f64]) -> Result<bool> {
        hermitize_interleaved(4, y);
        let (_, rho2, _) = self.split(y);
        let min_eigenvalue = rho2.min_hermitian_eigenvalue();
        if min_eigenvalue < -POSITIVITY_ABORT {
            return Err(Error::PositivityViolation { t, min_eigenvalue });
        }
        Ok(true)
    }
}

fn average_marginal(rho2: &ComplexMatrix) -> ComplexMatrix {
    let a = partial_trace_matrix(rho2, 2, &[1]).expect("4x4");
    let b = partial_trace_matrix(rho2, 2, &[2]).expect("4x4");
    (&a + &b).scale_real(0.5)
}

/// Integrates the pair closure of the second hierarchy equation from `t = 0`.
///
/// `init2` must be exchange symmetric and `params.n_particles >= 3`. In
/// linear-response mode the initial correlations are taken from `init2`
/// (relative to its own marginals) and `Gamma > 0` is required.
pub fn evolve_pair_closure(
    init2: &DensityMatrix,
    params: &SystemParams,
    t1: f64,
    config: &IntegratorConfig,
    samples: &[f64],
    mode: ClosureMode,
) -> Result<ClosureTrajectory> {
    params.validate()?;
    init2.matrix().check_dim(4)?;
    if params.n_particles < 3 {
        return Err(Error::InvalidParameter { name: "n_particles", reason: "pair closure needs N >= 3" });
    }
    let defect = swap_defect(init2.matrix());
    if defect > SYMMETRY_TOLERANCE {
        return Err(Error::NotExchangeSymmetric { residual: defect });
    }
    let generator = ReducedGenerator::new(params, 2)?;
    let (frozen, y0) = match mode {
        ClosureMode::Full => (ComplexMatrix::zeros(2), init2.matrix().to_interleaved()),
        ClosureMode::LinearResponse => {
            let st = stationary(params)?.to_matrix();
            let rho1 = average_marginal(init2.matrix());
            let chi = init2.matrix() - &rho1.kron(&rho1);
            (st, chi.to_interleaved())
        }
    };
    let flow = PairFlow { generator, mode, frozen };
    let problem = OdeProblem::new(flow, 0.0, t1, y0)?;
    let traj = integrate(&problem, config, samples)?;

    let flow = &problem.system;
    let mut out = Vec::with_capacity(traj.len());
    let mut warnings = Vec::new();
    for (t, y) in traj.iter() {
        let (rho1, rho2, chi) = flow.split(y);
        let min_eigenvalue = rho2.min_hermitian_eigenvalue();
        if min_eigenvalue < -POSITIVITY_WARN {
            warnings.push(PositivityWarning { t, min_eigenvalue });
        }
        out.push(ClosureSample {
            t,
            bloch: BlochState::from_matrix(&rho1)?,
            chi: CorrelationOperator { matrix: chi }.coefficients(),
            trace: rho2.trace().re,
            swap_defect: swap_defect(&rho2),
            rho1,
            rho2,
            min_eigenvalue,
        });
    }
    Ok(ClosureTrajectory { samples: out, warnings, stats: traj.stats })
}

/// `max_ij |a_ij - b_ij|`.
pub fn matrix3_max_diff(a: &Matrix3, b: &Matrix3) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
