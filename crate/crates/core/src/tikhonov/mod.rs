//! Conventional Tikhonov inversion: smallness and first-order smoothness
//! with p-norms via IRLS, optional sensitivity weighting, β cooling and
//! inexact Gauss-Newton steps built from `J`/`Jᵀ` products only.

mod gauss_newton;
mod regularization;

pub use gauss_newton::{cg_operator, gauss_newton_invert, GnConfig};
pub use regularization::{
    build_difference_operators, irls_weights, sensitivity_weights, DifferenceOperators,
    Regularization, RegularizationConfig,
};
