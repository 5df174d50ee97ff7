//! Radially symmetric spectral solver for the defocusing nonlinear Schrödinger
//! equation `i u_t + Δu = |u|^{p-1} u` in three dimensions, together with the
//! harmonic-analysis diagnostics used to probe its long-time behaviour:
//! Littlewood-Paley pieces, Besov and Sobolev norms, Strichartz-type space-time
//! norms, the pseudoconformal energy and dispersive decay ratios.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod decomposition;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod grid;
pub mod littlewood_paley;

pub use error::{Error, Result};
pub use evolution::{Equation, NormPair, StepPolicy, Trajectory};
pub use grid::{RadialField, RadialGrid, Spectrum};
