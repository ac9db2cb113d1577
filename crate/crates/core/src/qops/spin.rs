use alloc::vec::Vec;

use num_complex::Complex64;

use super::matrix::{ComplexMatrix, ONE, ZERO};
use crate::error::{Error, Result};

/// Default cap on the number of sites in the full tensor-product space (dim 4096).
pub const DEFAULT_MAX_SITES: usize = 12;

/// Single-site operators. `Sigma0` is `sigma_z = diag(1, -1)`, basis index 0
/// being the excited state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    Identity,
    Sigma0,
    SigmaPlus,
    SigmaMinus,
    SigmaX,
    SigmaY,
    SigmaZ,
}

/// The three spin operators appearing in the collective algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpinOp {
    Plus,
    Minus,
    Zero,
}

impl SpinOp {
    pub const ALL: [SpinOp; 3] = [SpinOp::Plus, SpinOp::Minus, SpinOp::Zero];

    pub fn pauli(self) -> Pauli {
        match self {
            SpinOp::Plus => Pauli::SigmaPlus,
            SpinOp::Minus => Pauli::SigmaMinus,
            SpinOp::Zero => Pauli::Sigma0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SpinOp::Plus => "S+",
            SpinOp::Minus => "S-",
            SpinOp::Zero => "S0",
        }
    }
}

pub fn pauli(which: Pauli) -> ComplexMatrix {
    let i = Complex64::new(0.0, 1.0);
    let entries = match which {
        Pauli::Identity => [ONE, ZERO, ZERO, ONE],
        Pauli::Sigma0 | Pauli::SigmaZ => [ONE, ZERO, ZERO, -ONE],
        Pauli::SigmaPlus => [ZERO, ONE, ZERO, ZERO],
        Pauli::SigmaMinus => [ZERO, ZERO, ONE, ZERO],
        Pauli::SigmaX => [ZERO, ONE, ONE, ZERO],
        Pauli::SigmaY => [ZERO, -i, i, ZERO],
    };
    ComplexMatrix::from_row_major(entries.to_vec()).expect("2x2")
}

/// The Cartesian Pauli triple `(sigma_x, sigma_y, sigma_z)`.
pub fn pauli_xyz() -> [ComplexMatrix; 3] {
    [pauli(Pauli::SigmaX), pauli(Pauli::SigmaY), pauli(Pauli::SigmaZ)]
}

/// 1-based particle label within an `n_sites` register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SiteIndex {
    index: usize,
    n_sites: usize,
}

impl SiteIndex {
    pub fn new(index: usize, n_sites: usize) -> Result<Self> {
        if index == 0 || index > n_sites {
            return Err(Error::InvalidSite { index, n_sites });
        }
        Ok(Self { index, n_sites })
    }

    pub fn index(self) -> usize {
        self.index
    }

    pub fn n_sites(self) -> usize {
        self.n_sites
    }

    /// All sites `1..=k` of an `n_sites` register.
    pub fn leading(k: usize, n_sites: usize) -> Result<Vec<Self>> {
        (1..=k).map(|i| Self::new(i, n_sites)).collect()
    }
}

pub fn check_site_count(n_sites: usize, cap: usize) -> Result<()> {
    if n_sites == 0 {
        return Err(Error::InvalidParameter { name: "n_sites", reason: "must be at least 1" });
    }
    if n_sites > cap {
        return Err(Error::DimensionOverflow { n_sites, cap });
    }
    Ok(())
}

/// `op` acting on `site`, identity elsewhere; site 1 is the leftmost factor.
pub fn embed(op: &ComplexMatrix, site: SiteIndex) -> ComplexMatrix {
    assert_eq!(op.dim(), 2, "embed expects a single-site operator");
    let n = site.n_sites();
    let dim = 1usize << n;
    // bit of `site` counted from the least significant end
    let shift = n - site.index();
    let mask = 1usize << shift;
    let mut out = ComplexMatrix::zeros(dim);
    for row in 0..dim {
        let a = (row >> shift) & 1;
        for b in 0..2 {
            let z = op[(a, b)];
            if z == ZERO {
                continue;
            }
            let col = (row & !mask) | (b << shift);
            out[(row, col)] = z;
        }
    }
    out
}

/// `S_plus`, `S_minus` or `S_0` summed over all sites.
pub fn collective(op: SpinOp, n_sites: usize) -> Result<ComplexMatrix> {
    collective_with_cap(op, n_sites, DEFAULT_MAX_SITES)
}

pub fn collective_with_cap(op: SpinOp, n_sites: usize, cap: usize) -> Result<ComplexMatrix> {
    check_site_count(n_sites, cap)?;
    let single = pauli(op.pauli());
    let mut total = ComplexMatrix::zeros(1 << n_sites);
    for i in 1..=n_sites {
        total += &embed(&single, SiteIndex::new(i, n_sites)?);
    }
    Ok(total)
}

/// Traces out every site not in `keep` (1-based, strictly increasing).
///
/// Works on any operator of dimension `2^n_sites`, not only on states.
pub fn partial_trace_matrix(m: &ComplexMatrix, n_sites: usize, keep: &[usize]) -> Result<ComplexMatrix> {
    m.check_dim(1 << n_sites)?;
    if keep.is_empty() {
        return Err(Error::InvalidSiteSet { reason: "keep set is empty" });
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSiteSet { reason: "keep set must be strictly increasing" });
    }
    if keep[0] == 0 || *keep.last().unwrap() > n_sites {
        return Err(Error::InvalidSiteSet { reason: "site outside the register" });
    }
    let traced: Vec<usize> = (1..=n_sites).filter(|s| !keep.contains(s)).collect();
    let k = keep.len();
    let out_dim = 1usize << k;
    let traced_dim = 1usize << traced.len();

    // Scatter a compact index over the bits belonging to `sites`.
    let spread = |compact: usize, sites: &[usize]| -> usize {
        let len = sites.len();
        sites.iter().enumerate().fold(0usize, |acc, (pos, &s)| {
            let bit = (compact >> (len - 1 - pos)) & 1;
            acc | (bit << (n_sites - s))
        })
    };
    let keep_offsets: Vec<usize> = (0..out_dim).map(|c| spread(c, keep)).collect();
    let traced_offsets: Vec<usize> = (0..traced_dim).map(|c| spread(c, &traced)).collect();

    let mut out = ComplexMatrix::zeros(out_dim);
    for (r, &row_base) in keep_offsets.iter().enumerate() {
        for (c, &col_base) in keep_offsets.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &traced_offsets {
                acc += m[(row_base | t, col_base | t)];
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

/// Reorders the tensor factors: factor `j` of the result is factor `order[j]`
/// (1-based) of `m`.
pub fn permute_sites(m: &ComplexMatrix, n_sites: usize, order: &[usize]) -> Result<ComplexMatrix> {
    m.check_dim(1 << n_sites)?;
    if order.len() != n_sites {
        return Err(Error::InvalidSiteSet { reason: "permutation length differs from site count" });
    }
    let mut seen = alloc::vec![false; n_sites];
    for &s in order {
        if s == 0 || s > n_sites || core::mem::replace(&mut seen[s - 1], true) {
            return Err(Error::InvalidSiteSet { reason: "not a permutation of the sites" });
        }
    }
    let dim = 1usize << n_sites;
    let map = |idx: usize| -> usize {
        // bit for new factor j comes from old factor order[j]
        order.iter().enumerate().fold(0usize, |acc, (j, &old)| {
            let bit = (idx >> (n_sites - old)) & 1;
            acc | (bit << (n_sites - 1 - j))
        })
    };
    let new_index: Vec<usize> = (0..dim).map(map).collect();
    let mut out = ComplexMatrix::zeros(dim);
    for r in 0..dim {
        for c in 0..dim {
            out[(new_index[r], new_index[c])] = m[(r, c)];
        }
    }
    Ok(out)
}

/// Average of `P m P^dagger` over every site permutation `P` (n! terms).
pub fn symmetrize_sites(m: &ComplexMatrix, n_sites: usize) -> Result<ComplexMatrix> {
    m.check_dim(1 << n_sites)?;
    let mut order: Vec<usize> = (1..=n_sites).collect();
    let mut acc = ComplexMatrix::zeros(m.dim());
    let mut count = 0usize;
    loop {
        acc += &permute_sites(m, n_sites, &order)?;
        count += 1;
        if !next_permutation(&mut order) {
            break;
        }
    }
    Ok(acc.scale_real(1.0 / count as f64))
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Swap of the two factors of a two-qubit space.
pub fn swap_operator() -> ComplexMatrix {
    ComplexMatrix::from_fn(4, |i, j| {
        let swapped = ((i & 1) << 1) | (i >> 1);
        if swapped == j {
            ONE
        } else {
            ZERO
        }
    })
}
