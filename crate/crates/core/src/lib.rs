//! Nonlocal neural operators (averaging, Fourier and Laplace-eigenbasis
//! variants) together with everything needed to train and evaluate them:
//! grid fields, spectral transforms, Gaussian random field priors, PDE
//! reference solvers, a small reverse-mode differentiation core and the
//! training loop.

pub mod diff;
pub mod error;
pub mod field;
pub mod neuralop;
pub mod pde;
pub mod random_field;
pub mod spectral;
pub mod train;
pub mod universality;

pub use error::{Error, Result};
pub use field::{
    coords_field, inner_product, l2_norm, mean_over_domain, rel_l2_error, Field, Grid2D,
};
