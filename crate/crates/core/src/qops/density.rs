use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;

use super::matrix::ComplexMatrix;
use super::spin::{partial_trace_matrix, SiteIndex};
use crate::error::{Error, Result};

/// Default slack for density-matrix validation.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// A validated state: unit trace, hermitian, positive semidefinite, each up
/// to `tolerance`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    tolerance: f64,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tolerance: f64) -> Result<Self> {
        let trace_err = (matrix.trace() - Complex64::new(1.0, 0.0)).norm();
        if !(trace_err <= tolerance) {
            return Err(Error::InvalidDensityMatrix { reason: "trace differs from 1", deviation: trace_err });
        }
        let herm = matrix.hermiticity_defect();
        if !(herm <= tolerance) {
            return Err(Error::InvalidDensityMatrix { reason: "not hermitian", deviation: herm });
        }
        let min_eig = matrix.min_hermitian_eigenvalue();
        if !(min_eig >= -tolerance) {
            return Err(Error::InvalidDensityMatrix { reason: "negative eigenvalue", deviation: -min_eig });
        }
        Ok(Self { matrix, tolerance })
    }

    /// Pure state `|psi><psi|` from an (unnormalized) amplitude vector.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !(norm_sq > 0.0) {
            return Err(Error::InvalidParameter { name: "amplitudes", reason: "zero vector" });
        }
        let m = ComplexMatrix::from_fn(amplitudes.len(), |i, j| amplitudes[i] * amplitudes[j].conj() / norm_sq);
        Self::new(m)
    }

    /// Basis projector `|index><index|`.
    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidParameter { name: "index", reason: "outside the basis" });
        }
        let mut m = ComplexMatrix::zeros(dim);
        m[(index, index)] = Complex64::new(1.0, 0.0);
        Self::new(m)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64), tolerance: DEFAULT_TOLERANCE }
    }

    /// `rho ⊗ rho ⊗ ... ⊗ rho` (`n` copies).
    pub fn product_power(&self, n: usize) -> Self {
        assert!(n >= 1);
        let mut acc = self.matrix.clone();
        for _ in 1..n {
            acc = acc.kron(&self.matrix);
        }
        Self { matrix: acc, tolerance: self.tolerance }
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self { matrix: self.matrix.kron(&other.matrix), tolerance: self.tolerance.max(other.tolerance) }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn purity(&self) -> f64 {
        self.matrix.matmul(&self.matrix).trace().re
    }
}

/// Reduced state on `keep`; sites are ascending, all from the same register.
pub fn partial_trace(rho: &DensityMatrix, keep: &[SiteIndex]) -> Result<DensityMatrix> {
    let n = rho.matrix.qubit_count().ok_or(Error::InvalidSiteSet { reason: "dimension is not a power of two" })?;
    if keep.iter().any(|s| s.n_sites() != n) {
        return Err(Error::InvalidSiteSet { reason: "site belongs to a register of different size" });
    }
    let keep: Vec<usize> = keep.iter().map(|s| s.index()).collect();
    let reduced = partial_trace_matrix(&rho.matrix, n, &keep)?;
    // partial traces of valid states are valid; skip re-diagonalizing
    Ok(DensityMatrix { matrix: reduced, tolerance: rho.tolerance })
}

/// `Tr(rho op)`.
pub fn expectation(rho: &DensityMatrix, op: &ComplexMatrix) -> Result<Complex64> {
    expectation_matrix(&rho.matrix, op)
}

pub fn expectation_matrix(rho: &ComplexMatrix, op: &ComplexMatrix) -> Result<Complex64> {
    op.check_dim(rho.dim())?;
    let n = rho.dim();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += rho[(i, k)] * op[(k, i)];
        }
    }
    Ok(acc)
}

/// `G G^dagger / Tr(G G^dagger)` with `G` filled from `standard_normal`,
/// real part first then imaginary, row-major.
pub fn random_density_matrix(dim: usize, mut standard_normal: impl FnMut() -> f64) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(dim, |_, _| {
        let re = standard_normal();
        let im = standard_normal();
        Complex64::new(re, im) * Float::sqrt(0.5)
    });
    let mut m = g.matmul(&g.dagger());
    let tr = m.trace().re;
    m = m.scale_real(1.0 / tr);
    m.hermitize_in_place();
    DensityMatrix { matrix: m, tolerance: DEFAULT_TOLERANCE }
}
