//! Quick numerical self-tests behind the `check` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dip::{beta, surrogate_step};
use crate::error::Result;
use crate::forward::{build_data_weights, phi_d, DcSimulation, ForwardSimulation, SolverOptions};
use crate::mesh::TensorMesh2D;
use crate::net::{net_backward, net_forward, ArchConfig, LatentVector, Mode, NetParams, Upsampler};
use crate::survey::{build_dipole_dipole_survey, Survey};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn result(name: &str, err: f64, tol: f64) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed: err <= tol,
        detail: format!("worst relative error {err:.2e} (tolerance {tol:.0e})"),
    }
}

fn tight() -> SolverOptions {
    SolverOptions { rtol: 1e-14, max_iter_factor: 50 }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 { num } else { num / den }
}

fn fd_gradient(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
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

fn small_simulation(nx: usize, nz: usize) -> Result<DcSimulation> {
    let mesh = TensorMesh2D::build(nx, nz, 1.0, 1.0, 1, 1.5)?;
    let stations = nx.saturating_sub(1).max(3);
    let survey = build_dipole_dipole_survey(stations as f64 - 1.0, 1.0, 3)?.centered();
    Ok(DcSimulation::new(mesh, survey)?.with_solver(tight()))
}

fn adjoint(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let sim = small_simulation(rng.random_range(4..=10), rng.random_range(2..=6))?;
        let m = random_vec(rng, sim.n_model(), -6.0, -2.0);
        let f = sim.fields(&m)?;
        let w = random_vec(rng, sim.n_model(), -1.0, 1.0);
        let v = random_vec(rng, sim.n_data(), -1.0, 1.0);
        let (a, b) = (dot(&sim.j_vec(&f, &w)?, &v), dot(&w, &sim.jt_vec(&f, &v)?));
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
    }
    Ok(result("adjoint identity <Jw, v> = <w, J^T v>", worst, 1e-8))
}

fn scale_law(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let sim = small_simulation(8, 4)?;
    let m = random_vec(rng, sim.n_model(), -6.0, -2.0);
    let c = 0.7;
    let shifted: Vec<f64> = m.iter().map(|v| v + c).collect();
    let d = sim.predict(&m)?;
    let expected: Vec<f64> = d.iter().map(|v| v * (-c).exp()).collect();
    Ok(result("conductivity scale law", rel_err(&sim.predict(&shifted)?, &expected), 1e-8))
}

fn network_gradient(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for up in Upsampler::ALL {
        let arch = ArchConfig { latent_dim: 3, reshape: (3, 3), channels: vec![3, 2, 2], upsampler: up, ..ArchConfig::canonical() };
        let params = NetParams::new(arch.clone(), random_vec(rng, arch.n_params(), -0.7, 0.7))?;
        let z = LatentVector::from_values(vec![0.8, -0.6, 1.1])?;
        let shape = (6, 7);
        let g = random_vec(rng, shape.0 * shape.1, -1.0, 1.0);
        let (_, trace) = net_forward(&params, &z, shape, Mode::Eval)?;
        let analytic = net_backward(&params, &trace, &g)?;
        let fd = fd_gradient(&params.values, 1e-6, |v| {
            let p = NetParams::new(arch.clone(), v.to_vec()).expect("same length");
            let (m, _) = net_forward(&p, &z, shape, Mode::Eval).expect("valid shape");
            dot(&m, &g)
        });
        worst = worst.max(rel_err(&analytic, &fd));
    }
    Ok(result("network backpropagation vs finite differences", worst, 1e-6))
}

fn surrogate(rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mesh = TensorMesh2D::uniform(3, 2, 1.0, 1.0)?;
    let survey = Survey::new(vec![-1.0, -0.5, 0.5, 1.0], vec![(0, 1), (1, 3)], vec![vec![(2, 3)], vec![(0, 2)]])?;
    let sim = DcSimulation::new(mesh, survey)?.with_solver(tight());
    let shape = sim.mesh.shape();
    let truth = random_vec(rng, sim.n_model(), -5.0, -2.0);
    let d_obs = sim.predict(&truth)?;
    let w = build_data_weights(&d_obs, 0.05, 0.0)?;
    let m_ref = vec![-4.0; sim.n_model()];
    let z = LatentVector::from_values(vec![0.9, -1.3, 0.4])?;
    let mut worst: f64 = 0.0;
    for up in Upsampler::ALL {
        let arch = ArchConfig { latent_dim: 3, reshape: (3, 4), channels: vec![2], upsampler: up, ..ArchConfig::canonical() };
        let params = NetParams::new(arch.clone(), random_vec(rng, arch.n_params(), -0.7, 0.7))?;
        let b = 0.3;
        let eval = surrogate_step(&sim, shape, &params, &z, &d_obs, &w, &m_ref, b, Mode::Eval)?;
        let fd = fd_gradient(&params.values, 1e-6, |v| {
            let p = NetParams::new(arch.clone(), v.to_vec()).expect("same length");
            let (m, _) = net_forward(&p, &z, shape, Mode::Eval).expect("valid shape");
            let pd = phi_d(&sim.predict(&m).expect("forward solve"), &d_obs, &w).expect("same length");
            let l1: f64 = m.iter().zip(&m_ref).map(|(a, r)| (a - r).abs()).sum();
            (1.0 - b) * pd + b * l1
        });
        worst = worst.max(rel_err(&eval.grad, &fd));
    }
    Ok(result("surrogate loss gradient vs true objective", worst, 1e-6))
}

fn beta_schedule() -> Result<CheckResult> {
    let tau = 1000.0;
    let mut ok = beta(0, tau)? == 1.0 && (beta(1000, tau)? - (-1.0f64).exp()).abs() < 1e-15;
    let mut prev = beta(0, tau)?;
    for t in 1..10_000 {
        let b = beta(t, tau)?;
        ok &= b < prev;
        prev = b;
    }
    Ok(CheckResult {
        name: "beta schedule".into(),
        passed: ok,
        detail: "beta(0) = 1, beta(tau) = 1/e, strictly decreasing over 10^4 epochs".into(),
    })
}

/// Runs every self-test. Each check reports its own pass/fail; an `Err`
/// means a check could not run at all.
pub fn run_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(vec![
        adjoint(&mut rng)?,
        scale_law(&mut rng)?,
        network_gradient(&mut rng)?,
        surrogate(&mut rng)?,
        beta_schedule()?,
    ])
}
