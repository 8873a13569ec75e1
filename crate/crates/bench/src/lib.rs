//! Shared fixtures for the criterion benchmarks.

use resonex_core::bie::NystromGrid;
use resonex_core::geometry;

/// Two-row disk grid at the near-defective radii used throughout the
/// benchmarks.
pub fn two_row_grid(cols: usize, n: usize) -> NystromGrid {
    let domain = geometry::grid_domain(cols, 2, 1.0, 1.0, (0.35, 0.28)).unwrap();
    NystromGrid::new(domain, n).unwrap()
}
