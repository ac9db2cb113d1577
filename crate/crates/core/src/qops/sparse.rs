use alloc::vec::Vec;

use num_complex::Complex64;

use super::matrix::{ComplexMatrix, ZERO};

/// Coordinate-list view of a mostly-zero operator, used to apply ladder and
/// collective operators to dense states in `O(nnz * dim)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseMatrix {
    pub fn from_dense(m: &ComplexMatrix) -> Self {
        let n = m.dim();
        let entries = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                let z = m[(i, j)];
                (z != ZERO).then_some((i, j, z))
            })
            .collect();
        Self { dim: n, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn dagger(&self) -> Self {
        let mut entries: Vec<_> = self.entries.iter().map(|&(i, j, z)| (j, i, z.conj())).collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        Self { dim: self.dim, entries }
    }

    /// `out += factor * self * rhs`
    pub fn left_mul_acc(&self, rhs: &ComplexMatrix, factor: Complex64, out: &mut ComplexMatrix) {
        let n = self.dim;
        debug_assert_eq!(rhs.dim(), n);
        debug_assert_eq!(out.dim(), n);
        let src = rhs.as_slice();
        let dst = out.as_mut_slice();
        for &(i, k, z) in &self.entries {
            let a = factor * z;
            let (row_out, row_in) = (&mut dst[i * n..(i + 1) * n], &src[k * n..(k + 1) * n]);
            for (o, &b) in row_out.iter_mut().zip(row_in) {
                *o += a * b;
            }
        }
    }

    /// `out += factor * lhs * self`
    pub fn right_mul_acc(&self, lhs: &ComplexMatrix, factor: Complex64, out: &mut ComplexMatrix) {
        let n = self.dim;
        debug_assert_eq!(lhs.dim(), n);
        debug_assert_eq!(out.dim(), n);
        let src = lhs.as_slice();
        let dst = out.as_mut_slice();
        for &(k, j, z) in &self.entries {
            let a = factor * z;
            for i in 0..n {
                dst[i * n + j] += src[i * n + k] * a;
            }
        }
    }

    pub fn left_mul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim);
        self.left_mul_acc(rhs, Complex64::new(1.0, 0.0), &mut out);
        out
    }

    pub fn right_mul(&self, lhs: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim);
        self.right_mul_acc(lhs, Complex64::new(1.0, 0.0), &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_products_match_dense() {
        let a = ComplexMatrix::from_fn(4, |i, j| {
            if (i + j) % 3 == 0 {
                Complex64::new(i as f64 + 1.0, j as f64 - 0.5)
            } else {
                ZERO
            }
        });
        let b = ComplexMatrix::from_fn(4, |i, j| Complex64::new((i * 4 + j) as f64, 1.0 / (1.0 + i as f64)));
        let s = SparseMatrix::from_dense(&a);
        assert!(s.left_mul(&b).max_abs_diff(&a.matmul(&b)) < 1e-13);
        assert!(s.right_mul(&b).max_abs_diff(&b.matmul(&a)) < 1e-13);
        assert!(s.dagger().left_mul(&b).max_abs_diff(&a.dagger().matmul(&b)) < 1e-13);
    }
}
