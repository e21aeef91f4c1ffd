//! Finite-volume DC resistivity forward modelling, data weighting and
//! adjoint-state sensitivities.

mod data;
mod operator;
mod simulation;
mod solver;
mod sparse;

pub use data::{
    build_data_weights, chi_factor, default_floor, phi_d, weighted_residual, DataWeights,
};
pub use operator::{assemble_from_conductances, assemble_system, mesh_faces, Face};
pub use simulation::{
    electrode_weights, j_vec, jt_vec, predict, DcFields, DcSimulation, ForwardSimulation,
};
pub use solver::{pcg, SolveInfo, SolverOptions};
pub use sparse::CsrMatrix;

/// Log-conductivity per mesh cell, flattened by [`crate::mesh::GridIndexMap`].
pub type ModelVector = Vec<f64>;
/// Potential differences per datum, in survey order (V per A).
pub type DataVector = Vec<f64>;
