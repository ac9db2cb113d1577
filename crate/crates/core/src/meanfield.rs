//! Mean-field (Hartree) dynamics of one representative particle.
//!
//! Factorizing `rho_2 = rho_1 ⊗ rho_1` in the first hierarchy equation gives
//! a nonlinear single-particle master equation whose Hamiltonian carries the
//! polarization field of the other `N - 1` particles:
//!
//! ```text
//! H_ef = (omega0/2) sigma0 + i (g/2) (<sigma+> sigma- - <sigma-> sigma+),   g = (N - 1) Gamma / V
//! ```
//!
//! In mean values, with `s0 = <sigma0>` and `s+ = <sigma+>`:
//!
//! ```text
//! ds0/dt = -2 g |s+|^2             - (Gamma/V) [(2 nbar + 1) s0 + 1]
//! ds+/dt = i omega0 s+ + (g/2) s0 s+ - (Gamma/V) (2 nbar + 1) s+ / 2
//! ```
//!
//! The dissipative terms are switchable; without them `R^2 = 4|s+|^2 + s0^2`
//! is conserved and the flow has the closed form in
//! [`closed_form_no_dissipation`].

use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::integrate::{integrate, IntegrationStats, IntegratorConfig, OdeProblem, OdeSystem};
use crate::liouville::{build_model_full, hermitize_interleaved, LindbladModel, SystemParams};
use crate::qops::{pauli, ComplexMatrix, Pauli};

/// Slack on `s0^2 + 4|s+|^2 <= 1` for constructed states.
pub const PHYSICAL_TOLERANCE: f64 = 1e-12;
/// Excess of `R^2` over 1 at which an integration aborts.
pub const ABORT_TOLERANCE: f64 = 1e-6;

/// `(<sigma0>, <sigma+>)`; `<sigma->` is the conjugate of `s_plus`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlochState {
    pub s0: f64,
    pub s_plus: Complex64,
}

impl BlochState {
    pub fn new(s0: f64, s_plus: Complex64) -> Result<Self> {
        let state = Self { s0, s_plus };
        if !(s0.is_finite() && s_plus.re.is_finite() && s_plus.im.is_finite()) {
            return Err(Error::InvalidParameter { name: "bloch state", reason: "non-finite component" });
        }
        let r2 = state.radius_sq();
        if r2 > 1.0 + PHYSICAL_TOLERANCE {
            return Err(Error::Unphysical { t: 0.0, radius_sq: r2 });
        }
        Ok(state)
    }

    /// Pure state with excited probability `rho_ee` and `arg <sigma+> = phase`.
    pub fn on_pure_sphere(rho_ee: f64, phase: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho_ee) {
            return Err(Error::InvalidParameter { name: "rho_ee", reason: "must lie in [0, 1]" });
        }
        let s0 = 2.0 * rho_ee - 1.0;
        let magnitude = 0.5 * Float::sqrt((1.0 - s0 * s0).max(0.0));
        Self::new(s0, Complex64::from_polar(magnitude, phase))
    }

    pub fn excited() -> Self {
        Self { s0: 1.0, s_plus: Complex64::new(0.0, 0.0) }
    }

    pub fn s_minus(&self) -> Complex64 {
        self.s_plus.conj()
    }

    pub fn rho_ee(&self) -> f64 {
        0.5 * (1.0 + self.s0)
    }

    /// `4 <sigma+><sigma-> + <sigma0>^2`.
    pub fn radius_sq(&self) -> f64 {
        4.0 * self.s_plus.norm_sqr() + self.s0 * self.s0
    }

    /// `[[rho_ee, <sigma->], [<sigma+>, 1 - rho_ee]]`.
    pub fn to_matrix(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(2);
        m[(0, 0)] = Complex64::new(self.rho_ee(), 0.0);
        m[(1, 1)] = Complex64::new(1.0 - self.rho_ee(), 0.0);
        m[(0, 1)] = self.s_minus();
        m[(1, 0)] = self.s_plus;
        m
    }

    /// Reads the mean values of a single-particle operator (no validation).
    pub fn from_matrix(rho: &ComplexMatrix) -> Result<Self> {
        rho.check_dim(2)?;
        Ok(Self { s0: (rho[(0, 0)] - rho[(1, 1)]).re, s_plus: rho[(1, 0)] })
    }

    fn to_vec(self) -> [f64; 3] {
        [self.s0, self.s_plus.re, self.s_plus.im]
    }

    fn from_slice(y: &[f64]) -> Self {
        Self { s0: y[0], s_plus: Complex64::new(y[1], y[2]) }
    }
}

/// Time derivative of a [`BlochState`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochDerivative {
    pub ds0: f64,
    pub ds_plus: Complex64,
}

impl BlochDerivative {
    pub fn max_abs(&self) -> f64 {
        self.ds0.abs().max(self.ds_plus.re.abs()).max(self.ds_plus.im.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanFieldParams {
    params: SystemParams,
    coupling: f64,
}

impl MeanFieldParams {
    pub fn new(params: SystemParams) -> Result<Self> {
        params.validate()?;
        let coupling = (params.n_particles - 1) as f64 * params.rate_per_volume();
        Ok(Self { params, coupling })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    /// `g = (N - 1) Gamma / V`.
    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    fn decay(&self) -> f64 {
        (2.0 * self.params.nbar + 1.0) * self.params.rate_per_volume()
    }
}

pub fn effective_hamiltonian(state: &BlochState, p: &MeanFieldParams) -> ComplexMatrix {
    let mut h = pauli(Pauli::Sigma0).scale_real(0.5 * p.params.omega0);
    let field = Complex64::new(0.0, 0.5 * p.coupling);
    h.add_scaled(field * state.s_plus, &pauli(Pauli::SigmaMinus));
    h.add_scaled(-field * state.s_minus(), &pauli(Pauli::SigmaPlus));
    h
}

pub fn meanfield_rhs(state: &BlochState, p: &MeanFieldParams, dissipation: bool) -> BlochDerivative {
    let g = p.coupling;
    // |<sigma->|^2 = <sigma+><sigma-> because s- is stored as conj(s+)
    let mut ds0 = -2.0 * g * state.s_plus.norm_sqr();
    let mut ds_plus = Complex64::new(0.0, p.params.omega0) * state.s_plus + 0.5 * g * state.s0 * state.s_plus;
    if dissipation {
        let rate = p.params.rate_per_volume();
        ds0 -= rate * ((2.0 * p.params.nbar + 1.0) * state.s0 + 1.0);
        ds_plus -= 0.5 * p.decay() * state.s_plus;
    }
    BlochDerivative { ds0, ds_plus }
}

/// `R^2 = 4|<sigma+>|^2 + <sigma0>^2`.
pub fn constant_of_motion(state: &BlochState) -> f64 {
    state.radius_sq()
}

/// Dissipation-free mean-field state at time `t`.
///
/// `R = 0` is a fixed point and returns `init`. When `|s0(0)| = R` the
/// integration constant `atanh(s0/R)` is infinite: the state is an
/// equilibrium (`s+ = 0`) and [`Error::EquilibriumPoint`] is returned so the
/// caller can use the constant solution.
pub fn closed_form_no_dissipation(t: f64, init: &BlochState, p: &MeanFieldParams) -> Result<BlochState> {
    let r = Float::sqrt(init.radius_sq());
    if r == 0.0 {
        return Ok(*init);
    }
    let ratio = init.s0 / r;
    if !(ratio.abs() < 1.0) {
        return Err(Error::EquilibriumPoint);
    }
    let a = Float::atanh(ratio);
    let u = 0.5 * p.coupling * r * t - a;
    let s0 = -r * Float::tanh(u);
    // cosh(a) / cosh(u) without overflowing either factor
    let (a_abs, u_abs) = (a.abs(), u.abs());
    let envelope = Float::exp(a_abs - u_abs) * (1.0 + Float::exp(-2.0 * a_abs)) / (1.0 + Float::exp(-2.0 * u_abs));
    let s_plus = init.s_plus * Complex64::from_polar(envelope, p.params.omega0 * t);
    Ok(BlochState { s0, s_plus })
}

/// Exact single-particle (`N = 1`) solution with dissipation.
pub fn n1_solution(t: f64, init: &BlochState, params: &SystemParams) -> BlochState {
    let k = 2.0 * params.nbar + 1.0;
    let decay = Float::exp(-k * params.rate_per_volume() * t);
    let s0 = init.s0 * decay + (decay - 1.0) / k;
    let s_plus = init.s_plus * Complex64::from_polar(Float::sqrt(decay), params.omega0 * t);
    BlochState { s0, s_plus }
}

/// `(-1 / (2 nbar + 1), 0)`, the same for every `N`.
pub fn stationary(params: &SystemParams) -> Result<BlochState> {
    params.validate()?;
    if params.gamma == 0.0 {
        return Err(Error::NoStationaryState);
    }
    Ok(BlochState { s0: -1.0 / (2.0 * params.nbar + 1.0), s_plus: Complex64::new(0.0, 0.0) })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanFieldSample {
    pub t: f64,
    pub state: BlochState,
    pub rho_ee: f64,
    pub r_squared: f64,
}

impl MeanFieldSample {
    pub fn new(t: f64, state: BlochState) -> Self {
        Self { t, state, rho_ee: state.rho_ee(), r_squared: state.radius_sq() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldTrajectory {
    pub samples: Vec<MeanFieldSample>,
    pub stats: IntegrationStats,
}

struct BlochFlow {
    p: MeanFieldParams,
    dissipation: bool,
}

impl OdeSystem for BlochFlow {
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let d = meanfield_rhs(&BlochState::from_slice(y), &self.p, self.dissipation);
        dy[0] = d.ds0;
        dy[1] = d.ds_plus.re;
        dy[2] = d.ds_plus.im;
    }

    fn after_step(&self, t: f64, y: &mut [f64]) -> Result<bool> {
        check_physical(t, BlochState::from_slice(y).radius_sq())?;
        Ok(false)
    }
}

fn check_physical(t: f64, radius_sq: f64) -> Result<()> {
    if radius_sq > 1.0 + ABORT_TOLERANCE {
        return Err(Error::Unphysical { t, radius_sq });
    }
    Ok(())
}

/// Integrates the mean-value equations from `t = 0`.
pub fn evolve_meanfield(
    init: &BlochState,
    p: &MeanFieldParams,
    dissipation: bool,
    t1: f64,
    config: &IntegratorConfig,
    samples: &[f64],
) -> Result<MeanFieldTrajectory> {
    let init = BlochState::new(init.s0, init.s_plus)?;
    let problem = OdeProblem::new(BlochFlow { p: *p, dissipation }, 0.0, t1, init.to_vec().to_vec())?;
    let traj = integrate(&problem, config, samples)?;
    let samples = traj.iter().map(|(t, y)| MeanFieldSample::new(t, BlochState::from_slice(y))).collect();
    Ok(MeanFieldTrajectory { samples, stats: traj.stats })
}

struct SingleParticleFlow {
    p: MeanFieldParams,
    dissipator: Option<LindbladModel>,
}

impl OdeSystem for SingleParticleFlow {
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let rho = ComplexMatrix::from_interleaved(2, y).expect("state length");
        let state = BlochState::from_matrix(&rho).expect("dim 2");
        let h = effective_hamiltonian(&state, &self.p);
        let mut out = h.commutator(&rho).scale(Complex64::new(0.0, -1.0));
        if let Some(d) = &self.dissipator {
            let mut diss = ComplexMatrix::zeros(2);
            d.apply_into(&rho, &mut diss);
            out += &diss;
        }
        out.write_interleaved(dy);
    }

    fn after_step(&self, t: f64, y: &mut [f64]) -> Result<bool> {
        hermitize_interleaved(2, y);
        let rho = ComplexMatrix::from_interleaved(2, y)?;
        check_physical(t, BlochState::from_matrix(&rho)?.radius_sq())?;
        Ok(true)
    }
}

/// The same dynamics integrated as a 2x2 master equation with the
/// self-consistent [`effective_hamiltonian`]; an independent route to
/// [`evolve_meanfield`].
pub fn evolve_single_particle(
    init: &BlochState,
    p: &MeanFieldParams,
    dissipation: bool,
    t1: f64,
    config: &IntegratorConfig,
    samples: &[f64],
) -> Result<MeanFieldTrajectory> {
    let init = BlochState::new(init.s0, init.s_plus)?;
    let dissipator =
        if dissipation { Some(build_model_full(&p.params.with_particles(1))?.dissipator_only()) } else { None };
    let flow = SingleParticleFlow { p: *p, dissipator };
    let problem = OdeProblem::new(flow, 0.0, t1, init.to_matrix().to_interleaved())?;
    let traj = integrate(&problem, config, samples)?;
    let samples = traj
        .iter()
        .map(|(t, y)| {
            let rho = ComplexMatrix::from_interleaved(2, y)?;
            Ok(MeanFieldSample::new(t, BlochState::from_matrix(&rho)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeanFieldTrajectory { samples, stats: traj.stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::linspace;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mf(n: usize, nbar: f64) -> MeanFieldParams {
        MeanFieldParams::new(SystemParams { n_particles: n, nbar, ..SystemParams::default() }).unwrap()
    }

    #[test]
    fn effective_hamiltonian_examples() {
        let p = mf(5, 0.0);
        let zero_field = effective_hamiltonian(&BlochState { s0: 0.3, s_plus: c(0.0, 0.0) }, &p);
        assert!(zero_field.max_abs_diff(&pauli(Pauli::Sigma0).scale_real(0.5)) == 0.0);
        let single = effective_hamiltonian(&BlochState { s0: 0.0, s_plus: c(0.5, 0.0) }, &mf(1, 0.0));
        assert!(single.max_abs_diff(&pauli(Pauli::Sigma0).scale_real(0.5)) == 0.0);

        // g = 2, omega0 = 0, s+ = 1/2
        let p = MeanFieldParams::new(SystemParams { n_particles: 3, omega0: 0.0, ..SystemParams::default() }).unwrap();
        assert_eq!(p.coupling(), 2.0);
        let h = effective_hamiltonian(&BlochState { s0: 0.0, s_plus: c(0.5, 0.0) }, &p);
        let mut expected = ComplexMatrix::zeros(2);
        expected[(0, 1)] = c(0.0, -0.5);
        expected[(1, 0)] = c(0.0, 0.5);
        assert!(h.max_abs_diff(&expected) < 1e-15);
        assert!(h.is_hermitian(0.0));
    }

    #[test]
    fn rhs_examples() {
        for n in [1, 20, 40] {
            for nbar in [0.0, 0.5, 3.0] {
                let st = stationary(mf(n, nbar).params()).unwrap();
                assert_eq!(meanfield_rhs(&st, &mf(n, nbar), true).max_abs(), 0.0);
            }
        }
        let unpolarized = BlochState { s0: -0.4, s_plus: c(0.0, 0.0) };
        assert_eq!(meanfield_rhs(&unpolarized, &mf(20, 0.0), false).max_abs(), 0.0);
        let d = meanfield_rhs(&BlochState::excited(), &mf(1, 0.0), true);
        assert_eq!(d.ds0, -2.0);
    }

    #[test]
    fn rhs_matches_effective_hamiltonian_route() {
        // unitary part of d<sigma>/dt = i<[H_ef, sigma]>
        let p = mf(7, 0.0);
        let state = BlochState::on_pure_sphere(0.8, 0.7).unwrap();
        let rho = state.to_matrix();
        let h = effective_hamiltonian(&state, &p);
        let drho = h.commutator(&rho).scale(c(0.0, -1.0));
        let d = BlochState::from_matrix(&drho).unwrap();
        let rhs = meanfield_rhs(&state, &p, false);
        assert!((d.s0 - rhs.ds0).abs() < 1e-14);
        assert!((d.s_plus - rhs.ds_plus).norm() < 1e-14);
    }

    #[test]
    fn constant_of_motion_examples() {
        assert_eq!(constant_of_motion(&BlochState::excited()), 1.0);
        assert!((constant_of_motion(&BlochState { s0: 0.6, s_plus: c(0.4, 0.0) }) - 1.0).abs() < 1e-15);
        assert!((constant_of_motion(&BlochState { s0: -1.0 / 3.0, s_plus: c(0.0, 0.0) }) - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn physicality_is_checked() {
        assert!(BlochState::new(0.9, c(0.3, 0.0)).is_err());
        assert!(BlochState::new(f64::NAN, c(0.0, 0.0)).is_err());
        assert!(BlochState::on_pure_sphere(1.2, 0.0).is_err());
        let s = BlochState::on_pure_sphere(0.999, 0.0).unwrap();
        assert!((s.radius_sq() - 1.0).abs() < 1e-12);
        assert!((s.rho_ee() - 0.999).abs() < 1e-15);
    }

    #[test]
    fn closed_form_edges() {
        let p = mf(20, 0.0);
        let init = BlochState::on_pure_sphere(0.9, 0.3).unwrap();
        let at0 = closed_form_no_dissipation(0.0, &init, &p).unwrap();
        assert!((at0.s0 - init.s0).abs() < 1e-15);
        assert!((at0.s_plus - init.s_plus).norm() < 1e-15);
        let late = closed_form_no_dissipation(1e4, &init, &p).unwrap();
        assert!((late.s0 + 1.0).abs() < 1e-12 && late.s_plus.norm() < 1e-12);
        let origin = BlochState { s0: 0.0, s_plus: c(0.0, 0.0) };
        assert_eq!(closed_form_no_dissipation(3.0, &origin, &p).unwrap(), origin);
        assert!(matches!(closed_form_no_dissipation(1.0, &BlochState::excited(), &p), Err(Error::EquilibriumPoint)));
    }

    #[test]
    fn closed_form_matches_integration() {
        let p = mf(20, 0.0);
        let s0 = 0.998;
        let init = BlochState::new(s0, c((0.25 * (1.0 - s0 * s0)).sqrt(), 0.0)).unwrap();
        let times = [0.5, 1.0, 2.0];
        let cfg = IntegratorConfig::default();
        let traj = evolve_meanfield(&init, &p, false, 2.0, &cfg, &times).unwrap();
        for s in &traj.samples {
            let exact = closed_form_no_dissipation(s.t, &init, &p).unwrap();
            assert!((exact.s0 - s.state.s0).abs() <= 1e-6);
            assert!((exact.s_plus - s.state.s_plus).norm() <= 1e-6);
        }
    }

    #[test]
    fn n1_solution_limits() {
        let params = SystemParams { nbar: 0.5, omega0: 2.0, ..SystemParams::default() };
        let init = BlochState::on_pure_sphere(0.7, 0.2).unwrap();
        let late = n1_solution(100.0, &init, &params);
        assert!((late.s0 + 0.5).abs() < 1e-15 && late.s_plus.norm() < 1e-20);
        let cold = SystemParams::default();
        for t in [0.0, 0.3, 2.0, 7.0] {
            assert!((n1_solution(t, &BlochState::excited(), &cold).rho_ee() - (-t).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn single_particle_meanfield_is_exact() {
        let params = SystemParams { nbar: 0.3, omega0: 1.5, ..SystemParams::default() };
        let p = MeanFieldParams::new(params).unwrap();
        let init = BlochState::on_pure_sphere(0.6, 0.4).unwrap();
        let times = linspace(0.0, 5.0, 20);
        let traj = evolve_meanfield(&init, &p, true, 5.0, &IntegratorConfig::default(), &times).unwrap();
        for s in &traj.samples {
            let exact = n1_solution(s.t, &init, &params);
            assert!((exact.s0 - s.state.s0).abs() <= 1e-8);
            assert!((exact.s_plus - s.state.s_plus).norm() <= 1e-8);
        }
    }

    #[test]
    fn stationary_examples() {
        let p = |nbar| SystemParams { nbar, ..SystemParams::default() };
        assert_eq!(stationary(&p(0.0)).unwrap().s0, -1.0);
        assert_eq!(stationary(&p(0.5)).unwrap().s0, -0.5);
        assert!(stationary(&p(1e12)).unwrap().s0.abs() < 1e-12);
        let frozen = SystemParams { gamma: 0.0, ..SystemParams::default() };
        assert!(matches!(stationary(&frozen), Err(Error::NoStationaryState)));
    }

    #[test]
    fn excited_state_is_an_equilibrium_without_dissipation() {
        let traj = evolve_meanfield(
            &BlochState::excited(),
            &mf(40, 0.0),
            false,
            5.0,
            &IntegratorConfig::default(),
            &linspace(0.0, 5.0, 11),
        )
        .unwrap();
        assert!(traj.samples.iter().all(|s| s.state == BlochState::excited()));
    }

    #[test]
    fn larger_ensembles_decay_earlier() {
        let init = BlochState::on_pure_sphere(1.0 - 1e-3, 0.0).unwrap();
        let times = linspace(0.0, 6.0, 61);
        let run =
            |n| evolve_meanfield(&init, &mf(n, 0.0), true, 6.0, &IntegratorConfig::default(), &times).unwrap().samples;
        let (one, twenty, forty) = (run(1), run(20), run(40));
        for i in 10..times.len() {
            assert!(forty[i].rho_ee <= twenty[i].rho_ee + 1e-12);
            assert!(twenty[i].rho_ee <= one[i].rho_ee + 1e-12);
        }
    }

    #[test]
    fn matrix_route_agrees_with_bloch_route() {
        for (dissipation, nbar) in [(true, 0.0), (true, 0.4), (false, 0.0)] {
            let p =
                MeanFieldParams::new(SystemParams { n_particles: 12, nbar, omega0: 0.9, ..SystemParams::default() })
                    .unwrap();
            let init = BlochState::on_pure_sphere(0.95, 1.1).unwrap();
            let times = linspace(0.0, 4.0, 17);
            let cfg = IntegratorConfig::default();
            let a = evolve_meanfield(&init, &p, dissipation, 4.0, &cfg, &times).unwrap();
            let b = evolve_single_particle(&init, &p, dissipation, 4.0, &cfg, &times).unwrap();
            for (x, y) in a.samples.iter().zip(&b.samples) {
                assert!((x.state.s0 - y.state.s0).abs() <= 1e-8);
                assert!((x.state.s_plus - y.state.s_plus).norm() <= 1e-8);
            }
        }
    }

    #[test]
    fn unphysical_start_rejected() {
        let bad = BlochState { s0: 1.0, s_plus: c(0.1, 0.0) };
        let r = evolve_meanfield(&bad, &mf(2, 0.0), true, 1.0, &IntegratorConfig::default(), &[1.0]);
        assert!(matches!(r, Err(Error::Unphysical { .. })));
    }

    fn physical_state() -> impl Strategy<Value = BlochState> {
        (0.0f64..1.0, 0.0f64..1.0, -3.2f64..3.2).prop_map(|(r, cos_t, phase)| {
            let s0 = r * (2.0 * cos_t - 1.0);
            let mag = 0.5 * (r * r - s0 * s0).max(0.0).sqrt();
            BlochState { s0, s_plus: Complex64::from_polar(mag, phase) }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn closed_form_solves_the_ode(init in physical_state(), t in 0.0f64..6.0, n in 2usize..40) {
            let p = mf(n, 0.0);
            prop_assume!(init.radius_sq() > 1e-6 && (init.s0 / init.radius_sq().sqrt()).abs() < 0.999);
            let h = 1e-5;
            let plus = closed_form_no_dissipation(t + h, &init, &p).unwrap();
            let minus = closed_form_no_dissipation((t - h).max(0.0), &init, &p).unwrap();
            let dt = t + h - (t - h).max(0.0);
            let mid = closed_form_no_dissipation(t, &init, &p).unwrap();
            let rhs = meanfield_rhs(&mid, &p, false);
            prop_assert!(((plus.s0 - minus.s0) / dt - rhs.ds0).abs() <= 1e-6 * (1.0 + p.coupling()));
            prop_assert!(((plus.s_plus - minus.s_plus) / dt - rhs.ds_plus).norm() <= 1e-6 * (1.0 + p.coupling()));
            prop_assert!((constant_of_motion(&mid) - init.radius_sq()).abs() <= 1e-12);
        }

        #[test]
        fn dissipation_free_phase_rotates_at_omega0(init in physical_state(), t in 0.0f64..5.0) {
            prop_assume!(init.s_plus.norm() > 1e-3 && init.radius_sq() > 1e-6);
            let p = MeanFieldParams::new(SystemParams { n_particles: 10, omega0: 1.7, ..SystemParams::default() }).unwrap();
            let later = closed_form_no_dissipation(t, &init, &p).unwrap();
            let turned = later.s_plus / init.s_plus;
            let expected = Complex64::from_polar(1.0, 1.7 * t);
            prop_assert!((turned / turned.norm() - expected).norm() <= 1e-6);
        }
    }
}
