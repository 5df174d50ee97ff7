//! Shared inputs for the benchmarks.

use nls_core::{RadialField, RadialGrid};

/// Unit Gaussian on a grid of radius 64 with `n` points.
pub fn gaussian(n: usize) -> RadialField {
    let grid = RadialGrid::new(64.0, n).expect("benchmark grid");
    grid.sample(|r: f64| (-r * r / 2.0).exp())
}
