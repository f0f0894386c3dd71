//! Transport with arbitrary path-length distributions.
//!
//! This crate simulates monoenergetic particle transport in an infinite
//! homogeneous medium where the distance between interactions follows an
//! arbitrary density `p(s)` rather than the classical exponential. The same
//! problem is solved by three independent routes:
//!
//! * [`mc`] — analog Monte Carlo random walks with radial collision tallies,
//! * [`integral`] — source iteration on the radial reduction of the Peierls
//!   integral equation,
//! * [`diffusion`] — closed-form point-source solutions of the matching
//!   diffusion equation.
//!
//! For the gamma-shape-2 law `p(s) = lambda^2 s e^{-lambda s}` with
//! `lambda^2 = 6 / <s^2>` the three routes agree exactly (up to statistics
//! and discretization), which is the property the test suite pins down.
//!
//! Histories and kernel rows are data-parallel; the `parallel` feature
//! (default) runs them on rayon. Disabling it yields a sequential build that
//! produces bit-identical results.

pub mod diffusion;
pub mod error;
pub mod integral;
pub mod mc;
pub mod pathlen;
pub mod quadrature;
pub mod stats;

pub use error::Error;
pub use pathlen::{Moments, PathLengthLaw};
