//! Complex matrices, single-site spin operators and their tensor-product
//! embedding, collective operators and partial traces.
//!
//! Basis conventions: index 0 of a site is the excited state, so
//! `sigma_0 = diag(1, -1)`. Site 1 is the leftmost tensor factor, i.e. the
//! most significant bit of a basis index.

mod density;
mod matrix;
mod sparse;
mod spin;

pub use density::{
    expectation, expectation_matrix, partial_trace, random_density_matrix, DensityMatrix, DEFAULT_TOLERANCE,
};
pub use matrix::ComplexMatrix;
pub use sparse::SparseMatrix;
pub use spin::{
    check_site_count, collective, collective_with_cap, embed, partial_trace_matrix, pauli, pauli_xyz, permute_sites,
    swap_operator, symmetrize_sites, Pauli, SiteIndex, SpinOp, DEFAULT_MAX_SITES,
};

/// `A ⊗ B` as a free function.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.commutator(b)
}
