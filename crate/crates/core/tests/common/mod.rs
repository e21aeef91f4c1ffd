#![allow(dead_code)]

use dipinv::forward::{DcSimulation, SolverOptions};
use dipinv::mesh::TensorMesh2D;
use dipinv::net::{ArchConfig, LatentVector, NetParams, Upsampler};
use dipinv::survey::{build_dipole_dipole_survey, Survey};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn tight() -> SolverOptions {
    SolverOptions {
        rtol: 1e-14,
        max_iter_factor: 50,
    }
}

/// Unit-cell mesh with one padding cell and a short line across the core.
pub fn small_problem(nx: usize, nz: usize) -> DcSimulation {
    let mesh = TensorMesh2D::build(nx, nz, 1.0, 1.0, 1, 1.5).unwrap();
    let n_stations = nx.saturating_sub(1).max(3);
    let survey = build_dipole_dipole_survey(n_stations as f64 - 1.0, 1.0, 3)
        .unwrap()
        .centered();
    DcSimulation::new(mesh, survey).unwrap().with_solver(tight())
}

/// 3 x 2 cell mesh matching the output of [`tiny_arch`] after cropping.
pub fn tiny_simulation() -> DcSimulation {
    let mesh = TensorMesh2D::uniform(3, 2, 1.0, 1.0).unwrap();
    let survey = Survey::new(
        vec![-1.0, -0.5, 0.5, 1.0],
        vec![(0, 1), (1, 3)],
        vec![vec![(2, 3)], vec![(0, 2)]],
    )
    .unwrap();
    DcSimulation::new(mesh, survey).unwrap().with_solver(tight())
}

/// Latent size 3, hidden size 12, one block: a 2 x 4 image cropped to 2 x 3.
pub fn tiny_arch(upsampler: Upsampler) -> ArchConfig {
    ArchConfig {
        latent_dim: 3,
        reshape: (3, 4),
        channels: vec![2],
        upsampler,
        ..ArchConfig::canonical()
    }
}

pub fn random_params(arch: &ArchConfig, rng: &mut ChaCha8Rng, scale: f64) -> NetParams {
    let values = random_vec(rng, arch.n_params(), -scale, scale);
    NetParams::new(arch.clone(), values).unwrap()
}

pub fn tiny_latent() -> LatentVector {
    LatentVector::from_values(vec![0.9, -1.3, 0.4]).unwrap()
}

/// Relative 2-norm error of `approx` against `exact`.
pub fn rel_err(approx: &[f64], exact: &[f64]) -> f64 {
    let num: f64 = approx.iter().zip(exact).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = exact.iter().map(|b| b * b).sum::<f64>().sqrt();
    num / den
}

/// Central differences of `f` in every coordinate of `x`.
pub fn fd_gradient(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + h;
            let fp = f(&xp);
            xp[i] = orig - h;
            let fm = f(&xp);
            xp[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
