//! Quantum hyperbolic state sums on branched ideal triangulations.
//!
//! The crate is organized bottom-up:
//!
//! - [`specialfn`]: principal logs, N-th roots, the cyclic dilogarithm `g`, ω-factors,
//!   the extended Rogers dilogarithm and the Lobachevsky function.
//! - [`tetra`]: decorated tetrahedra (moduli, flattenings, charges, log-branches).
//! - [`dilog`]: matrix dilogarithm tensors of level N and the N=1 scalar.
//! - [`mesh`]: face pairings, edge and vertex classes, totals, normal paths.
//! - [`latsolve`]: integer solver for flattenings and charges.
//! - [`statesum`]: tensor contraction, trace tensors, comparison up to roots of unity.
//! - [`moves`]: 2↔3 and bubble transits, the pentagon harness.
//! - [`characters`]: PSL(2,C) cocycles, idealization, surface holonomy.
//! - [`fig8`]: the figure-eight knot complement worked end to end.
//! - [`cli`]: the `qhg` command-line driver.

pub mod characters;
pub mod cli;
pub mod dilog;
pub mod error;
pub mod fig8;
pub mod latsolve;
pub mod mesh;
pub mod moves;
pub mod specialfn;
pub mod statesum;
pub mod tetra;

pub use error::{QhgError, Result};
pub use num_complex::Complex64 as CNum;
