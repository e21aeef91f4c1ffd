//! Two-dimensional DC resistivity inversion.
//!
//! The log-conductivity model is either estimated directly by a
//! Tikhonov-regularized Gauss-Newton inversion with sparse norms, or
//! reparameterized as the output of a small untrained convolutional network
//! whose weights are fitted to the data with Adam.

pub mod ablation;
pub mod cli;
pub mod config;
pub mod dip;
pub mod error;
pub mod forward;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod net;
pub mod render;
pub mod scenarios;
pub mod selfcheck;
pub mod survey;
pub mod tikhonov;
pub mod trace;
pub mod workflow;

pub use error::{Error, Result};
