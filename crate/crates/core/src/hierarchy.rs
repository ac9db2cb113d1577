//! Exact reduced equations of motion (the BBGKY hierarchy).
//!
//! Tracing the `N`-particle master equation over particles `K+1..N` of an
//! exchange-symmetric state gives a closed expression in `rho_K` and
//! `rho_{K+1}`:
//!
//! ```text
//! drho_K/dt = -i[(omega0/2) S0^(K), rho_K] + sum_c D_c^(K) rho_K
//!           + (N - K) sum_c (r_c / 2) sum_{i<=K} ([a_c(i)^dagger, X_c] + [Y_c, a_c(i)])
//! X_c = Tr_{K+1}(a_c(K+1) rho_{K+1}),   Y_c = Tr_{K+1}(a_c(K+1)^dagger rho_{K+1})
//! ```
//!
//! where `c` runs over the emission (`a = sigma+`) and absorption (`a = sigma-`)
//! channels and `D_c^(K)` is the collective dissipator restricted to the first
//! `K` particles. For hermitian `rho_{K+1}` one has `Y = X^dagger`, and the
//! cross term is `[a^dagger, X]` plus its hermitian conjugate.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::liouville::{CollectiveOperators, LindbladModel, SystemParams};
use crate::qops::{
    collective_with_cap, embed, partial_trace_matrix, pauli, ComplexMatrix, DensityMatrix, SiteIndex, SpinOp,
};

/// Largest register accepted by [`trace_identity_lambda`] and
/// [`reduction_consistency_check`].
pub const MAX_CHECK_PARTICLES: usize = 6;
/// Slack on the exact trace identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
/// Slack on `Tr_{K+1} rho_{K+1} = rho_K`.
pub const MARGINAL_TOLERANCE: f64 = 1e-10;
/// Pass threshold of [`reduction_consistency_check`].
pub const CONSISTENCY_TOLERANCE: f64 = 1e-10;

/// The `K`-particle marginal of an `N`-particle ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedState {
    k: usize,
    rho: DensityMatrix,
    n_total: usize,
    params: SystemParams,
}

impl ReducedState {
    /// `params.n_particles` is the total `N`; requires `1 <= K <= N - 1`.
    pub fn new(rho: DensityMatrix, params: SystemParams) -> Result<Self> {
        params.validate()?;
        let k =
            rho.matrix().qubit_count().ok_or(Error::InvalidSiteSet { reason: "dimension is not a power of two" })?;
        let n_total = params.n_particles;
        if k == 0 || k >= n_total {
            return Err(Error::InvalidParameter { name: "k", reason: "reduced order must satisfy 1 <= K <= N - 1" });
        }
        Ok(Self { k, rho, n_total, params })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }
}

struct Channel {
    rate: f64,
    // a(K+1) and a(K+1)^dagger on the K+1 register
    next_site: ComplexMatrix,
    next_site_dagger: ComplexMatrix,
    // sum_{i<=K} a(i) and its adjoint on the K register
    local: ComplexMatrix,
    local_dagger: ComplexMatrix,
}

/// The right-hand side of the `K`-th hierarchy equation for fixed
/// parameters, with all operators precomputed.
pub struct ReducedGenerator {
    k: usize,
    n_total: usize,
    local: LindbladModel,
    channels: Vec<Channel>,
}

impl ReducedGenerator {
    pub fn new(params: &SystemParams, k: usize) -> Result<Self> {
        params.validate()?;
        let n_total = params.n_particles;
        if k == 0 || k >= n_total {
            return Err(Error::InvalidParameter { name: "k", reason: "reduced order must satisfy 1 <= K <= N - 1" });
        }
        // the K-particle model keeps the full-system rates: only N enters the cross term
        let ops = CollectiveOperators::full(k, MAX_CHECK_PARTICLES.max(k))?;
        let local = ops.model(&params.with_particles(k))?;
        let next = SiteIndex::new(k + 1, k + 1)?;
        let channels = [(SpinOp::Plus, params.emission_rate()), (SpinOp::Minus, params.absorption_rate())]
            .into_iter()
            .filter(|&(_, rate)| rate > 0.0)
            .map(|(op, rate)| {
                let single = pauli(op.pauli());
                let next_site = embed(&single, next);
                let local = ops.get(op).clone();
                Channel { rate, next_site_dagger: next_site.dagger(), next_site, local_dagger: local.dagger(), local }
            })
            .collect();
        Ok(Self { k, n_total, local, channels })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    /// Evaluates the hierarchy equation without validating the inputs, so it
    /// also accepts correlation operators and other non-state matrices.
    pub fn apply(&self, rho_k: &ComplexMatrix, rho_k_plus_1: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(rho_k.dim());
        self.local.apply_into(rho_k, &mut out);
        let keep: Vec<usize> = (1..=self.k).collect();
        let multiplicity = (self.n_total - self.k) as f64;
        for ch in &self.channels {
            let x = partial_trace_matrix(&ch.next_site.matmul(rho_k_plus_1), self.k + 1, &keep).expect("dims");
            let y = partial_trace_matrix(&ch.next_site_dagger.matmul(rho_k_plus_1), self.k + 1, &keep).expect("dims");
            let mut cross = ch.local_dagger.commutator(&x);
            cross += &y.commutator(&ch.local);
            out.add_scaled(Complex64::new(0.5 * multiplicity * ch.rate, 0.0), &cross);
        }
        out
    }
}

/// `sum_{i<=K} [sigma_lambda(i), rho_K]`, after asserting that it equals
/// `Tr_{K+1..N} [S_lambda, rho_N]` computed directly.
pub fn trace_identity_lambda(rho_n: &DensityMatrix, lambda: SpinOp, k: usize) -> Result<ComplexMatrix> {
    let n = register_size(rho_n)?;
    if k == 0 || k > n {
        return Err(Error::InvalidParameter { name: "k", reason: "must satisfy 1 <= K <= N" });
    }
    let keep: Vec<usize> = (1..=k).collect();
    let s_n = collective_with_cap(lambda, n, MAX_CHECK_PARTICLES)?;
    let traced = partial_trace_matrix(&s_n.commutator(rho_n.matrix()), n, &keep)?;
    let rho_k = partial_trace_matrix(rho_n.matrix(), n, &keep)?;
    let s_k = collective_with_cap(lambda, k, MAX_CHECK_PARTICLES)?;
    let reduced = s_k.commutator(&rho_k);
    let residual = traced.max_abs_diff(&reduced);
    if residual > IDENTITY_TOLERANCE {
        return Err(Error::IdentityViolation { label: lambda.label(), residual });
    }
    Ok(reduced)
}

/// `d rho_K / dt` from the hierarchy, after checking that `rho_{K+1}`
/// reduces to `state.rho`.
pub fn bbgky_rhs(state: &ReducedState, rho_k_plus_1: &DensityMatrix) -> Result<ComplexMatrix> {
    let k = state.k;
    rho_k_plus_1.matrix().check_dim(1 << (k + 1))?;
    let keep: Vec<usize> = (1..=k).collect();
    let marginal = partial_trace_matrix(rho_k_plus_1.matrix(), k + 1, &keep)?;
    let residual = marginal.max_abs_diff(state.rho.matrix());
    if residual > MARGINAL_TOLERANCE {
        return Err(Error::InconsistentMarginals { residual });
    }
    let generator = ReducedGenerator::new(&state.params, k)?;
    Ok(generator.apply(state.rho.matrix(), rho_k_plus_1.matrix()))
}

/// Outcome of comparing the traced full generator with the hierarchy equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub n_total: usize,
    pub k: usize,
    /// `max |Tr_{K+1..N}(L rho_N) - bbgky(rho_K, rho_{K+1})|`
    pub residual: f64,
    /// Worst residual of the intermediate trace identities.
    pub identity_residual: f64,
    pub passed: bool,
}

/// Checks the `K`-th hierarchy equation against the full `N`-particle generator.
///
/// The intermediate identities are evaluated too and reported in
/// `identity_residual`: the commutator traces for every `S_lambda`, the
/// vanishing of fully traced dissipator terms, and the replacement of
/// `sum_{j>K} Tr_{...}(a(j) rho_N)` by `(N-K) Tr_{K+1}(a(K+1) rho_{K+1})`.
/// The last one needs exchange symmetry among the traced particles.
pub fn reduction_consistency_check(
    params: &SystemParams,
    rho_n: &DensityMatrix,
    k: usize,
) -> Result<ConsistencyReport> {
    params.validate()?;
    let n = register_size(rho_n)?;
    if n != params.n_particles {
        return Err(Error::DimensionMismatch { expected: 1 << params.n_particles, found: rho_n.dim() });
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter { name: "k", reason: "reduced order must satisfy 1 <= K <= N - 1" });
    }
    let keep_k: Vec<usize> = (1..=k).collect();
    let keep_k1: Vec<usize> = (1..=k + 1).collect();

    let full = CollectiveOperators::full(n, MAX_CHECK_PARTICLES)?;
    let model = full.model(params)?;
    let mut full_rhs = ComplexMatrix::zeros(rho_n.dim());
    model.apply_into(rho_n.matrix(), &mut full_rhs);
    let traced = partial_trace_matrix(&full_rhs, n, &keep_k)?;

    let rho_k = partial_trace_matrix(rho_n.matrix(), n, &keep_k)?;
    let rho_k1 = partial_trace_matrix(rho_n.matrix(), n, &keep_k1)?;
    let reduced = ReducedGenerator::new(params, k)?.apply(&rho_k, &rho_k1);
    let residual = traced.max_abs_diff(&reduced);

    let mut identity_residual: f64 = 0.0;
    for op in SpinOp::ALL {
        identity_residual = identity_residual.max(commutator_trace_residual(rho_n, k, op)?);
        identity_residual = identity_residual.max(exchange_residual(rho_n, n, k, op)?);
    }
    identity_residual = identity_residual.max(traced_out_dissipator_residual(rho_n, n, k)?);

    Ok(ConsistencyReport { n_total: n, k, residual, identity_residual, passed: residual <= CONSISTENCY_TOLERANCE })
}

fn register_size(rho: &DensityMatrix) -> Result<usize> {
    let n = rho.matrix().qubit_count().ok_or(Error::InvalidSiteSet { reason: "dimension is not a power of two" })?;
    if n > MAX_CHECK_PARTICLES {
        return Err(Error::DimensionOverflow { n_sites: n, cap: MAX_CHECK_PARTICLES });
    }
    Ok(n)
}

fn commutator_trace_residual(rho_n: &DensityMatrix, k: usize, op: SpinOp) -> Result<f64> {
    match trace_identity_lambda(rho_n, op, k) {
        Ok(_) => Ok(0.0),
        Err(Error::IdentityViolation { residual, .. }) => Ok(residual),
        Err(e) => Err(e),
    }
}

// sum_{j>K} Tr_{not 1..K}(a(j) rho_N) against (N-K) Tr_{K+1}(a(K+1) rho_{K+1})
fn exchange_residual(rho_n: &DensityMatrix, n: usize, k: usize, op: SpinOp) -> Result<f64> {
    let single = pauli(op.pauli());
    let keep_k: Vec<usize> = (1..=k).collect();
    let mut summed = ComplexMatrix::zeros(1 << k);
    for j in (k + 1)..=n {
        let a_j = embed(&single, SiteIndex::new(j, n)?);
        summed += &partial_trace_matrix(&a_j.matmul(rho_n.matrix()), n, &keep_k)?;
    }
    let keep_k1: Vec<usize> = (1..=k + 1).collect();
    let rho_k1 = partial_trace_matrix(rho_n.matrix(), n, &keep_k1)?;
    let a_next = embed(&single, SiteIndex::new(k + 1, k + 1)?);
    let one = partial_trace_matrix(&a_next.matmul(&rho_k1), k + 1, &keep_k)?;
    Ok(summed.max_abs_diff(&one.scale_real((n - k) as f64)))
}

// terms of the dissipator with both site labels among the traced particles vanish
fn traced_out_dissipator_residual(rho_n: &DensityMatrix, n: usize, k: usize) -> Result<f64> {
    let keep_k: Vec<usize> = (1..=k).collect();
    let mut worst: f64 = 0.0;
    for op in [SpinOp::Plus, SpinOp::Minus] {
        let single = pauli(op.pauli());
        let mut a = ComplexMatrix::zeros(rho_n.dim());
        for j in (k + 1)..=n {
            a += &embed(&single, SiteIndex::new(j, n)?);
        }
        let ad = a.dagger();
        let rho = rho_n.matrix();
        let mut d = ad.matmul(rho).matmul(&a).scale_real(2.0);
        d -= &a.matmul(&ad).anticommutator(rho);
        worst = worst.max(partial_trace_matrix(&d, n, &keep_k)?.max_norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouville::build_model_full;
    use crate::qops::{random_density_matrix, symmetrize_sites, Pauli};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn params(n: usize) -> SystemParams {
        SystemParams { n_particles: n, omega0: 1.3, gamma: 0.7, nbar: 0.4, volume: 1.0 }
    }

    fn random_rho(dim: usize, seed: u64) -> DensityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_density_matrix(dim, || StandardNormal.sample(&mut rng))
    }

    fn symmetric_rho(n: usize, seed: u64) -> DensityMatrix {
        let raw = random_rho(1 << n, seed);
        DensityMatrix::new(symmetrize_sites(raw.matrix(), n).unwrap()).unwrap()
    }

    #[test]
    fn commutator_identity_on_product_state() {
        let r1 = random_rho(2, 3);
        let prod = r1.kron(&r1);
        let out = trace_identity_lambda(&prod, SpinOp::Zero, 1).unwrap();
        let expected = pauli(Pauli::Sigma0).commutator(r1.matrix());
        assert!(out.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn commutator_identity_vanishes_for_identity_state() {
        let rho = DensityMatrix::maximally_mixed(8);
        for op in SpinOp::ALL {
            assert_eq!(trace_identity_lambda(&rho, op, 2).unwrap().max_norm(), 0.0);
        }
    }

    #[test]
    fn commutator_identity_random_three_particles() {
        let rho = random_rho(8, 17);
        for op in SpinOp::ALL {
            let out = trace_identity_lambda(&rho, op, 2).unwrap();
            // brute force: sum of single-site commutators on the traced state
            let rho2 = partial_trace_matrix(rho.matrix(), 3, &[1, 2]).unwrap();
            let mut expected = ComplexMatrix::zeros(4);
            for i in 1..=2 {
                let a = embed(&pauli(op.pauli()), SiteIndex::new(i, 2).unwrap());
                expected += &a.commutator(&rho2);
            }
            assert!(out.max_abs_diff(&expected) <= 1e-13);
        }
    }

    #[test]
    fn two_particles_first_order_matches_full_trace() {
        let p = params(2);
        let r1 = random_rho(2, 1);
        let prod = r1.kron(&r1);
        let report = reduction_consistency_check(&p, &prod, 1).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn three_particles_against_full_trace() {
        let p = params(3);
        let rho3 = symmetric_rho(3, 8);
        let rho2 = DensityMatrix::new(partial_trace_matrix(rho3.matrix(), 3, &[1, 2]).unwrap()).unwrap();
        let rho1 = DensityMatrix::new(partial_trace_matrix(rho3.matrix(), 3, &[1]).unwrap()).unwrap();
        let state = ReducedState::new(rho1, p).unwrap();
        let out = bbgky_rhs(&state, &rho2).unwrap();
        let model = build_model_full(&p).unwrap();
        let full = crate::liouville::lindblad_rhs(&model, rho3.matrix()).unwrap();
        let traced = partial_trace_matrix(&full, 3, &[1]).unwrap();
        assert!(out.max_abs_diff(&traced) <= 1e-10);
    }

    #[test]
    fn ghz_like_state_passes() {
        let h = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        let ghz = DensityMatrix::pure(&[h, z, z, z, z, z, z, h]).unwrap();
        let report = reduction_consistency_check(&params(3), &ghz, 2).unwrap();
        assert!(report.passed && report.identity_residual < 1e-13, "{report:?}");
    }

    #[test]
    fn maximally_mixed_residual_is_tiny() {
        let report = reduction_consistency_check(&params(3), &DensityMatrix::maximally_mixed(8), 1).unwrap();
        assert!(report.residual <= 1e-13);
    }

    #[test]
    fn asymmetric_state_breaks_exchange_identity() {
        let rho = random_rho(8, 4);
        let report = reduction_consistency_check(&params(3), &rho, 1).unwrap();
        assert!(report.identity_residual > 1e-6);
    }

    #[test]
    fn cross_term_vanishes_for_unpolarized_partner() {
        // product rho_1 ⊗ rho with <sigma±> = 0 on the second particle
        let p = params(2);
        let r1 = random_rho(2, 6);
        let partner = DensityMatrix::new(ComplexMatrix::from_real_diagonal(&[0.3, 0.7])).unwrap();
        let state = ReducedState::new(r1.clone(), p).unwrap();
        let out = bbgky_rhs(&state, &r1.kron(&partner)).unwrap();
        let single = build_model_full(&p.with_particles(1)).unwrap();
        let local = crate::liouville::lindblad_rhs(&single, r1.matrix()).unwrap();
        assert!(out.max_abs_diff(&local) < 1e-14);
    }

    #[test]
    fn inconsistent_marginals_rejected() {
        let p = params(2);
        let state = ReducedState::new(random_rho(2, 1), p).unwrap();
        let other = random_rho(4, 2);
        assert!(matches!(bbgky_rhs(&state, &other), Err(Error::InconsistentMarginals { .. })));
    }

    #[test]
    fn order_bounds() {
        assert!(ReducedState::new(random_rho(2, 1), params(1)).is_err());
        assert!(ReducedState::new(random_rho(4, 1), params(2)).is_err());
        assert!(reduction_consistency_check(&params(2), &random_rho(4, 1), 2).is_err());
        assert!(reduction_consistency_check(&params(3), &random_rho(4, 1), 1).is_err());
        assert!(trace_identity_lambda(&random_rho(4, 1), SpinOp::Plus, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn hierarchy_is_trace_free_and_hermitian(seed in 0u64..10_000, k in 1usize..3) {
            let rho3 = symmetric_rho(3, seed);
            let keep: Vec<usize> = (1..=k).collect();
            let keep1: Vec<usize> = (1..=k + 1).collect();
            let rho_k = partial_trace_matrix(rho3.matrix(), 3, &keep).unwrap();
            let rho_k1 = partial_trace_matrix(rho3.matrix(), 3, &keep1).unwrap();
            let out = ReducedGenerator::new(&params(3), k).unwrap().apply(&rho_k, &rho_k1);
            prop_assert!(out.trace().norm() <= 1e-13);
            prop_assert!(out.hermiticity_defect() <= 1e-13);
        }

        #[test]
        fn hierarchy_is_linear(seed in 0u64..10_000, alpha in -2.0f64..2.0) {
            let g = ReducedGenerator::new(&params(4), 2).unwrap();
            let a3 = random_rho(8, seed);
            let b3 = random_rho(8, seed + 1);
            let a2 = partial_trace_matrix(a3.matrix(), 3, &[1, 2]).unwrap();
            let b2 = partial_trace_matrix(b3.matrix(), 3, &[1, 2]).unwrap();
            let mut mix2 = a2.clone();
            mix2.add_scaled(Complex64::new(alpha, 0.3), &b2);
            let mut mix3 = a3.matrix().clone();
            mix3.add_scaled(Complex64::new(alpha, 0.3), b3.matrix());
            let mut expected = g.apply(&a2, a3.matrix());
            expected.add_scaled(Complex64::new(alpha, 0.3), &g.apply(&b2, b3.matrix()));
            prop_assert!(g.apply(&mix2, &mix3).max_abs_diff(&expected) <= 1e-12);
        }

        #[test]
        fn symmetric_states_satisfy_every_order(seed in 0u64..10_000, n in 2usize..5) {
            let rho = symmetric_rho(n, seed);
            for k in 1..n {
                let report = reduction_consistency_check(&params(n), &rho, k).unwrap();
                prop_assert!(report.passed, "{:?}", report);
                prop_assert!(report.identity_residual <= 1e-12, "{:?}", report);
            }
        }
    }
}
