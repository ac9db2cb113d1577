//! Exact master-equation dynamics of the collectively damped spin ensemble.
//!
//! The generator is
//!
//! ```text
//! drho/dt = -i[H, rho] - sum_k (rate_k / 2) L[A_k] rho,
//! L[A] rho = [A, A^dagger rho] - [A^dagger, rho A],
//! ```
//!
//! with `H = (omega0 / 2) S0` and jump operators `A = S+` at rate
//! `(nbar + 1) Gamma / V` (emission) and `A = S-` at rate `nbar Gamma / V`
//! (absorption). Note that `-(rate / 2) L[A]` is the usual dissipator
//! `rate * (A^dagger rho A - {A A^dagger, rho} / 2)`, so the `S+` channel
//! lowers the excitation.
//!
//! Two representations are provided: the full `2^N` tensor-product space and
//! the `N + 1` dimensional symmetric (Dicke) ladder, which is exact for
//! permutation-symmetric states because every operator involved is collective.

use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegrationStats, IntegratorConfig, OdeProblem, OdeSystem};
use crate::qops::{
    collective_with_cap, expectation_matrix, ComplexMatrix, DensityMatrix, SparseMatrix, SpinOp, DEFAULT_MAX_SITES,
};

/// Largest dimension for which [`superoperator`] builds the dense generator.
pub const MAX_SUPEROPERATOR_DIM: usize = 16;
/// Largest ensemble accepted by [`build_model_dicke`].
pub const MAX_DICKE_PARTICLES: usize = 10_000;
/// Trace drift repaired by renormalization in [`evolve`]; anything larger is an error.
pub const RENORMALIZE_THRESHOLD: f64 = 1e-8;
/// Slack on positivity and hermiticity for states produced by [`evolve`].
pub const EVOLVE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct SystemParams {
    pub n_particles: usize,
    pub omega0: f64,
    pub gamma: f64,
    pub nbar: f64,
    pub volume: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self { n_particles: 1, omega0: 1.0, gamma: 1.0, nbar: 0.0, volume: 1.0 }
    }
}

impl SystemParams {
    pub fn new(n_particles: usize, omega0: f64, gamma: f64, nbar: f64) -> Result<Self> {
        let p = Self { n_particles, omega0, gamma, nbar, volume: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn with_particles(self, n_particles: usize) -> Self {
        Self { n_particles, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::InvalidParameter { name: "n_particles", reason: "must be at least 1" });
        }
        if !self.omega0.is_finite() {
            return Err(Error::InvalidParameter { name: "omega0", reason: "must be finite" });
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter { name: "gamma", reason: "must be finite and non-negative" });
        }
        if !(self.nbar >= 0.0 && self.nbar.is_finite()) {
            return Err(Error::InvalidParameter { name: "nbar", reason: "must be finite and non-negative" });
        }
        if !(self.volume > 0.0 && self.volume.is_finite()) {
            return Err(Error::InvalidParameter { name: "volume", reason: "must be finite and positive" });
        }
        Ok(())
    }

    /// `Gamma / V`, the rate unit of every dissipative term.
    pub fn rate_per_volume(&self) -> f64 {
        self.gamma / self.volume
    }

    /// Rate of the `S+` channel, `(nbar + 1) Gamma / V`.
    pub fn emission_rate(&self) -> f64 {
        (self.nbar + 1.0) * self.rate_per_volume()
    }

    /// Rate of the `S-` channel, `nbar Gamma / V`.
    pub fn absorption_rate(&self) -> f64 {
        self.nbar * self.rate_per_volume()
    }
}

/// One term `-(rate / 2) L[operator] rho` of the generator.
#[derive(Clone, Debug, PartialEq)]
pub struct Jump {
    pub operator: ComplexMatrix,
    pub rate: f64,
}

/// Hamiltonian plus jump channels, with the sparse forms the right-hand side needs.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    hamiltonian: ComplexMatrix,
    jumps: Vec<Jump>,
    // H - (i/2) sum rate A A^dagger, and its adjoint
    effective: SparseMatrix,
    effective_dagger: SparseMatrix,
    // (rate, A, A^dagger) for the sandwich term rate * A^dagger rho A
    sandwiches: Vec<(f64, SparseMatrix, SparseMatrix)>,
}

impl LindbladModel {
    pub fn new(hamiltonian: ComplexMatrix, jumps: Vec<Jump>) -> Result<Self> {
        let dim = hamiltonian.dim();
        let defect = hamiltonian.hermiticity_defect();
        if defect > 1e-12 {
            return Err(Error::InvalidParameter { name: "hamiltonian", reason: "not hermitian" });
        }
        for j in &jumps {
            j.operator.check_dim(dim)?;
            if !(j.rate >= 0.0 && j.rate.is_finite()) {
                return Err(Error::InvalidParameter { name: "rate", reason: "must be finite and non-negative" });
            }
        }
        let mut effective = hamiltonian.clone();
        let mut sandwiches = Vec::new();
        for j in jumps.iter().filter(|j| j.rate > 0.0) {
            let a_adag = j.operator.matmul(&j.operator.dagger());
            effective.add_scaled(Complex64::new(0.0, -0.5 * j.rate), &a_adag);
            let a = SparseMatrix::from_dense(&j.operator);
            let a_dag = a.dagger();
            sandwiches.push((j.rate, a, a_dag));
        }
        let effective = SparseMatrix::from_dense(&effective);
        let effective_dagger = effective.dagger();
        Ok(Self { hamiltonian, jumps, effective, effective_dagger, sandwiches })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Same generator without its Hamiltonian.
    pub fn dissipator_only(&self) -> Self {
        Self::new(ComplexMatrix::zeros(self.dim()), self.jumps.clone()).expect("validated")
    }

    /// Writes `drho/dt` into `out` (overwritten).
    pub fn apply_into(&self, rho: &ComplexMatrix, out: &mut ComplexMatrix) {
        out.as_mut_slice().fill(Complex64::new(0.0, 0.0));
        let minus_i = Complex64::new(0.0, -1.0);
        self.effective.left_mul_acc(rho, minus_i, out);
        self.effective_dagger.right_mul_acc(rho, -minus_i, out);
        for (rate, a, a_dag) in &self.sandwiches {
            let rho_a = a.right_mul(rho);
            a_dag.left_mul_acc(&rho_a, Complex64::new(*rate, 0.0), out);
        }
    }
}

/// `S+`, `S-`, `S0` of an `N`-particle ensemble in a chosen representation.
#[derive(Clone, Debug, PartialEq)]
pub struct CollectiveOperators {
    pub n_particles: usize,
    pub s_plus: ComplexMatrix,
    pub s_minus: ComplexMatrix,
    pub s_0: ComplexMatrix,
}

impl CollectiveOperators {
    /// Full tensor-product representation, dimension `2^N`.
    pub fn full(n_particles: usize, max_sites: usize) -> Result<Self> {
        Ok(Self {
            n_particles,
            s_plus: collective_with_cap(SpinOp::Plus, n_particles, max_sites)?,
            s_minus: collective_with_cap(SpinOp::Minus, n_particles, max_sites)?,
            s_0: collective_with_cap(SpinOp::Zero, n_particles, max_sites)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.s_0.dim()
    }

    pub fn get(&self, op: SpinOp) -> &ComplexMatrix {
        match op {
            SpinOp::Plus => &self.s_plus,
            SpinOp::Minus => &self.s_minus,
            SpinOp::Zero => &self.s_0,
        }
    }

    pub fn model(&self, params: &SystemParams) -> Result<LindbladModel> {
        params.validate()?;
        let h = self.s_0.scale_real(0.5 * params.omega0);
        LindbladModel::new(
            h,
            alloc::vec![
                Jump { operator: self.s_plus.clone(), rate: params.emission_rate() },
                Jump { operator: self.s_minus.clone(), rate: params.absorption_rate() },
            ],
        )
    }
}

/// The symmetric `j = N/2` multiplet. Basis index `k` carries `m = j - k`,
/// so index 0 is the all-excited state, matching the full-space ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct DickeLadder {
    ops: CollectiveOperators,
}

impl DickeLadder {
    pub fn new(n_particles: usize) -> Result<Self> {
        if n_particles == 0 || n_particles > MAX_DICKE_PARTICLES {
            return Err(Error::InvalidParameter { name: "n_particles", reason: "Dicke ladder needs 1..=10000" });
        }
        let dim = n_particles + 1;
        let j = 0.5 * n_particles as f64;
        let mut s_plus = ComplexMatrix::zeros(dim);
        let mut s_0 = ComplexMatrix::zeros(dim);
        for k in 0..dim {
            let m = j - k as f64;
            s_0[(k, k)] = Complex64::new(2.0 * m, 0.0);
            if k > 0 {
                s_plus[(k - 1, k)] = Complex64::new(Float::sqrt(j * (j + 1.0) - m * (m + 1.0)), 0.0);
            }
        }
        let s_minus = s_plus.dagger();
        Ok(Self { ops: CollectiveOperators { n_particles, s_plus, s_minus, s_0 } })
    }

    pub fn n_particles(&self) -> usize {
        self.ops.n_particles
    }

    pub fn dim(&self) -> usize {
        self.ops.dim()
    }

    pub fn s_plus(&self) -> &ComplexMatrix {
        &self.ops.s_plus
    }

    pub fn s_minus(&self) -> &ComplexMatrix {
        &self.ops.s_minus
    }

    pub fn s_0(&self) -> &ComplexMatrix {
        &self.ops.s_0
    }

    pub fn operators(&self) -> &CollectiveOperators {
        &self.ops
    }

    pub fn into_operators(self) -> CollectiveOperators {
        self.ops
    }
}

/// Which space an exact evolution runs in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum Basis {
    Full,
    Dicke,
}

pub fn collective_operators(n_particles: usize, basis: Basis) -> Result<CollectiveOperators> {
    match basis {
        Basis::Full => CollectiveOperators::full(n_particles, DEFAULT_MAX_SITES),
        Basis::Dicke => Ok(DickeLadder::new(n_particles)?.into_operators()),
    }
}

pub fn build_model_full(params: &SystemParams) -> Result<LindbladModel> {
    build_model_full_with_cap(params, DEFAULT_MAX_SITES)
}

pub fn build_model_full_with_cap(params: &SystemParams, max_sites: usize) -> Result<LindbladModel> {
    params.validate()?;
    CollectiveOperators::full(params.n_particles, max_sites)?.model(params)
}

pub fn build_model_dicke(params: &SystemParams) -> Result<LindbladModel> {
    params.validate()?;
    DickeLadder::new(params.n_particles)?.operators().model(params)
}

/// `drho/dt` for `rho` (any square matrix of the model's dimension).
pub fn lindblad_rhs(model: &LindbladModel, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    rho.check_dim(model.dim())?;
    let mut out = ComplexMatrix::zeros(model.dim());
    model.apply_into(rho, &mut out);
    Ok(out)
}

/// Dense generator acting on row-major `vec(rho)`; only for `dim <= 16`.
pub fn superoperator(model: &LindbladModel) -> Result<ComplexMatrix> {
    let d = model.dim();
    if d > MAX_SUPEROPERATOR_DIM {
        return Err(Error::InvalidParameter { name: "model", reason: "dense superoperator limited to dim <= 16" });
    }
    let mut sup = ComplexMatrix::zeros(d * d);
    let mut basis = ComplexMatrix::zeros(d);
    let mut image = ComplexMatrix::zeros(d);
    for col in 0..d * d {
        basis.as_mut_slice()[col] = Complex64::new(1.0, 0.0);
        model.apply_into(&basis, &mut image);
        basis.as_mut_slice()[col] = Complex64::new(0.0, 0.0);
        for (row, &z) in image.as_slice().iter().enumerate() {
            sup[(row, col)] = z;
        }
    }
    Ok(sup)
}

/// All particles excited: basis state 0 in either representation.
pub fn all_excited(n_particles: usize, basis: Basis) -> Result<DensityMatrix> {
    let dim = match basis {
        Basis::Full => 1usize << n_particles,
        Basis::Dicke => n_particles + 1,
    };
    DensityMatrix::basis_state(dim, 0)
}

/// `N` copies of the pure single-particle state with excited probability
/// `excited_probability` and `arg <sigma+> = phase`, in either representation.
pub fn coherent_state(n_particles: usize, basis: Basis, excited_probability: f64, phase: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&excited_probability) {
        return Err(Error::InvalidParameter { name: "excited_probability", reason: "must lie in [0, 1]" });
    }
    let a = Float::sqrt(excited_probability);
    let b = Complex64::from_polar(Float::sqrt(1.0 - excited_probability), phase);
    let amplitudes: Vec<Complex64> = match basis {
        Basis::Full => {
            let dim = 1usize << n_particles;
            (0..dim)
                .map(|idx| {
                    let ground = idx.count_ones() as i32;
                    let excited = n_particles as i32 - ground;
                    b.powi(ground) * Float::powi(a, excited)
                })
                .collect()
        }
        Basis::Dicke => {
            // sqrt(C(N, k)) a^(N-k) b^k, accumulated in log space
            let n = n_particles as f64;
            let mut log_binom = 0.0;
            (0..=n_particles)
                .map(|k| {
                    if k > 0 {
                        log_binom += Float::ln((n - k as f64 + 1.0) / k as f64);
                    }
                    let mag_b = b.norm();
                    if (a == 0.0 && k < n_particles) || (mag_b == 0.0 && k > 0) {
                        return Complex64::new(0.0, 0.0);
                    }
                    let mut log_mag = 0.5 * log_binom;
                    if k < n_particles {
                        log_mag += (n - k as f64) * Float::ln(a);
                    }
                    if k > 0 {
                        log_mag += k as f64 * Float::ln(mag_b);
                    }
                    Complex64::from_polar(Float::exp(log_mag), phase * k as f64)
                })
                .collect()
        }
    };
    DensityMatrix::pure(&amplitudes)
}

/// Sampled states of an exact evolution.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Trace of each sample before renormalization.
    pub raw_traces: Vec<f64>,
    pub stats: IntegrationStats,
}

struct LindbladFlow<'a> {
    model: &'a LindbladModel,
}

impl OdeSystem for LindbladFlow<'_> {
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let d = self.model.dim();
        let rho = ComplexMatrix::from_interleaved(d, y).expect("state length");
        let mut out = ComplexMatrix::zeros(d);
        self.model.apply_into(&rho, &mut out);
        out.write_interleaved(dy);
    }

    fn after_step(&self, _t: f64, y: &mut [f64]) -> Result<bool> {
        hermitize_interleaved(self.model.dim(), y);
        Ok(true)
    }
}

/// `(rho + rho^dagger) / 2` on interleaved storage.
pub(crate) fn hermitize_interleaved(d: usize, y: &mut [f64]) {
    for i in 0..d {
        y[2 * (i * d + i) + 1] = 0.0;
        for j in (i + 1)..d {
            let (ij, ji) = (2 * (i * d + j), 2 * (j * d + i));
            let re = 0.5 * (y[ij] + y[ji]);
            let im = 0.5 * (y[ij + 1] - y[ji + 1]);
            y[ij] = re;
            y[ij + 1] = im;
            y[ji] = re;
            y[ji + 1] = -im;
        }
    }
}

/// Turns a raw integrated matrix into a validated state: renormalizes a
/// small trace drift, rejects a large one or a negative eigenvalue.
pub(crate) fn validate_sample(t: f64, mut m: ComplexMatrix) -> Result<DensityMatrix> {
    let tr = m.trace();
    let drift = (tr - Complex64::new(1.0, 0.0)).norm();
    if drift > RENORMALIZE_THRESHOLD {
        return Err(Error::TraceDrift { t, trace: tr.re });
    }
    m = m.scale_real(1.0 / tr.re);
    m.hermitize_in_place();
    DensityMatrix::with_tolerance(m, EVOLVE_TOLERANCE).map_err(|e| match e {
        Error::InvalidDensityMatrix { reason: "negative eigenvalue", deviation } => {
            Error::PositivityViolation { t, min_eigenvalue: -deviation }
        }
        other => other,
    })
}

/// Integrates the master equation from `t = 0` and returns validated states
/// at `samples` (all within `[0, t1]`).
pub fn evolve(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t1: f64,
    config: &IntegratorConfig,
    samples: &[f64],
) -> Result<Evolution> {
    rho0.matrix().check_dim(model.dim())?;
    let problem = OdeProblem::new(LindbladFlow { model }, 0.0, t1, rho0.matrix().to_interleaved())?;
    let traj = integrate(&problem, config, samples)?;
    let d = model.dim();
    let mut states = Vec::with_capacity(traj.len());
    let mut raw_traces = Vec::with_capacity(traj.len());
    for (t, y) in traj.iter() {
        let m = ComplexMatrix::from_interleaved(d, y)?;
        raw_traces.push(m.trace().re);
        states.push(validate_sample(t, m)?);
    }
    Ok(Evolution { times: traj.times, states, raw_traces, stats: traj.stats })
}

/// Per-sample expectation values of named operators.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSeries {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    /// `values[sample][operator]`
    pub values: Vec<Vec<Complex64>>,
}

impl ObservableSeries {
    pub fn column(&self, name: &str) -> Option<Vec<Complex64>> {
        let idx = self.names.iter().position(|n| n == name)?;
        Some(self.values.iter().map(|row| row[idx]).collect())
    }
}

pub fn observables(evolution: &Evolution, ops: &[(&str, &ComplexMatrix)]) -> Result<ObservableSeries> {
    let values = evolution
        .states
        .iter()
        .map(|rho| ops.iter().map(|(_, op)| expectation_matrix(rho.matrix(), op)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(ObservableSeries {
        names: ops.iter().map(|(n, _)| String::from(*n)).collect(),
        times: evolution.times.clone(),
        values,
    })
}

/// Single-particle excited probability `(1 + <S0>/N) / 2`.
pub fn excited_probability(rho: &DensityMatrix, s_0: &ComplexMatrix, n_particles: usize) -> Result<f64> {
    let s0 = expectation_matrix(rho.matrix(), s_0)?.re;
    Ok(0.5 * (1.0 + s0 / n_particles as f64))
}
