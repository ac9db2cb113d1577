//! Exact and approximate dynamics of `N` spin-1/2 particles coupled
//! collectively to a thermal bath.
//!
//! The layers, from exact to approximate:
//!
//! * [`liouville`]: the full Lindblad master equation, on the `2^N`
//!   tensor-product space or on the `N + 1` dimensional Dicke ladder.
//! * [`hierarchy`]: the reduced `K`-particle (BBGKY) equation of motion and
//!   its consistency with the traced full generator.
//! * [`meanfield`]: the nonlinear single-particle equations obtained from the
//!   product closure `rho_2 = rho_1 rho_1`, with closed-form solutions.
//! * [`correlations`]: pair covariances and the three-particle closure that
//!   keeps them.
//!
//! Everything integrates through [`integrate`], a small explicit Runge–Kutta
//! driver over flat real vectors. The crate is `no_std` and needs only `alloc`.

#![no_std]
// `!(x > 0.0)` is how parameter checks reject NaN along with the bad range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod correlations;
pub mod error;
pub mod hierarchy;
pub mod integrate;
pub mod liouville;
pub mod meanfield;
pub mod qops;

pub use error::{Error, Result};
pub use num_complex::Complex64;
