//! Shared inputs for the benchmarks.

use nnolab_core::field::{Field, Grid2D};
use nnolab_core::random_field::{sample_grf_one, GrfSpec};

/// One periodic random field on an `n x n` unit-square grid.
pub fn periodic_input(n: usize, seed: u64) -> Field {
    let grid = Grid2D::unit(n).expect("power-of-two grid");
    sample_grf_one(&GrfSpec::periodic(seed), &grid, 0).expect("valid spec")
}

/// One Neumann random field on an `n x n` unit-square grid.
pub fn neumann_input(n: usize, seed: u64) -> Field {
    let grid = Grid2D::unit(n).expect("power-of-two grid");
    sample_grf_one(&GrfSpec::neumann(seed), &grid, 0).expect("valid spec")
}
