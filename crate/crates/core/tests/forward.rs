use dipinv::forward::{
    assemble_system, build_data_weights, pcg, phi_d, DcSimulation, ForwardSimulation,
    SolverOptions,
};
use dipinv::mesh::TensorMesh2D;
use dipinv::survey::{build_dipole_dipole_survey, Survey};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn tight() -> SolverOptions {
    SolverOptions {
        rtol: 1e-14,
        max_iter_factor: 50,
    }
}

/// 10 x 6 cell instance with a four-electrode line across its middle.
fn small_problem(nx: usize, nz: usize) -> DcSimulation {
    let mesh = TensorMesh2D::build(nx, nz, 1.0, 1.0, 1, 1.5).unwrap();
    let n_stations = nx.saturating_sub(1).max(3);
    let survey = build_dipole_dipole_survey(n_stations as f64 - 1.0, 1.0, 3)
        .unwrap()
        .centered();
    DcSimulation::new(mesh, survey).unwrap().with_solver(tight())
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

#[test]
fn single_cell_solve_is_division() {
    let mesh = TensorMesh2D::uniform(1, 1, 1.0, 1.0).unwrap();
    let a = assemble_system(&mesh, &[2.0]).unwrap();
    let (x, _) = pcg(&a, &[2.0], &SolverOptions::default()).unwrap();
    assert!((x[0] - 2.0 / a.get(0, 0)).abs() < 1e-15);
}

#[test]
fn pcg_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mesh = TensorMesh2D::uniform(5, 1, 1.0, 2.0).unwrap();
    let sigma = random_vec(&mut rng, 5, 0.01, 1.0);
    let a = assemble_system(&mesh, &sigma).unwrap();
    let b = random_vec(&mut rng, 5, -1.0, 1.0);
    let (x, _) = pcg(&a, &b, &SolverOptions::default()).unwrap();
    let dense = nalgebra::DMatrix::from_fn(5, 5, |i, j| a.get(i, j));
    let exact = dense.lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
    let err: f64 = x.iter().zip(exact.iter()).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    assert!(err <= 1e-10 * exact.norm(), "error {err}");
}

#[test]
fn scaling_conductivity_scales_data() {
    let sim = small_problem(10, 6);
    let n = sim.n_model();
    let base = sim.predict(&vec![-3.0; n]).unwrap();
    for c in [0.5f64, 2.0, 10.0] {
        let d = sim.predict(&vec![-3.0 + c.ln(); n]).unwrap();
        for (x, y) in d.iter().zip(&base) {
            assert!((x - y / c).abs() <= 1e-9 * y.abs());
        }
    }
}

#[test]
fn log_shift_scale_law_heterogeneous() {
    let sim = small_problem(10, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = random_vec(&mut rng, sim.n_model(), -6.0, -1.0);
    let base = sim.predict(&m).unwrap();
    let c = 0.7;
    let shifted: Vec<f64> = m.iter().map(|v| v + c).collect();
    let d = sim.predict(&shifted).unwrap();
    for (x, y) in d.iter().zip(&base) {
        assert!((x - (-c).exp() * y).abs() <= 1e-9 * y.abs());
    }
}

#[test]
fn higher_conductivity_lowers_voltages() {
    let sim = small_problem(10, 6);
    let n = sim.n_model();
    let lo = sim.predict(&vec![-4.0; n]).unwrap();
    let hi = sim.predict(&vec![-3.0; n]).unwrap();
    for (a, b) in lo.iter().zip(&hi) {
        assert!(b.abs() < a.abs());
    }
}

#[test]
fn reciprocity() {
    let mesh = TensorMesh2D::build(16, 6, 5.0, 5.0, 3, 1.5).unwrap();
    let xs = vec![-30.0, -20.0, 10.0, 20.0];
    let forward = Survey::new(xs.clone(), vec![(0, 1)], vec![vec![(2, 3)]]).unwrap();
    let swapped = Survey::new(xs, vec![(2, 3)], vec![vec![(0, 1)]]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = random_vec(&mut rng, mesh.n_cells(), -5.0, -2.0);
    let d1 = dipinv::forward::predict(&mesh, &forward, &m).unwrap();
    let d2 = dipinv::forward::predict(&mesh, &swapped, &m).unwrap();
    assert!((d1[0] - d2[0]).abs() <= 1e-8 * d1[0].abs(), "{} vs {}", d1[0], d2[0]);
}

/// Uniform half-space against the surface line-source solution
/// φ(r) = −(ρ/π) ln r + C.
#[test]
fn half_space_matches_line_source_solution() {
    let mesh = TensorMesh2D::build(50, 12, 5.0, 5.0, 7, 1.5).unwrap();
    let survey = build_dipole_dipole_survey(200.0, 10.0, 24).unwrap().centered();
    let sigma: f64 = 0.01;
    let sim = DcSimulation::new(mesh.clone(), survey.clone()).unwrap();
    let d = sim.predict(&vec![sigma.ln(); mesh.n_cells()]).unwrap();
    let rho = 1.0 / sigma;
    let limit = mesh.lateral_padding_width() / 5.0;
    let mut checked = 0;
    for (g, &v) in survey.datum_geometry().iter().zip(&d) {
        let offset = (g.m - g.b).abs();
        if offset > limit {
            continue;
        }
        let ln = |p: f64, q: f64| (p - q).abs().ln();
        let exact = -(rho / std::f64::consts::PI)
            * (ln(g.a, g.m) - ln(g.a, g.n) - ln(g.b, g.m) + ln(g.b, g.n));
        let rel = (v - exact).abs() / exact.abs();
        assert!(rel <= 0.03, "datum {g:?}: {v} vs {exact} ({rel})");
        checked += 1;
    }
    assert!(checked > 20);
}

#[test]
fn zero_vectors_give_zero_products() {
    let sim = small_problem(8, 4);
    let m = vec![-3.0; sim.n_model()];
    let f = sim.fields(&m).unwrap();
    assert!(sim.jt_vec(&f, &vec![0.0; sim.n_data()]).unwrap().iter().all(|&x| x == 0.0));
    assert!(sim.j_vec(&f, &vec![0.0; sim.n_model()]).unwrap().iter().all(|&x| x == 0.0));
}

#[test]
fn misfit_gradient_matches_central_differences() {
    let sim = small_problem(8, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = sim.n_model();
    let m = random_vec(&mut rng, n, -5.0, -2.0);
    let truth = random_vec(&mut rng, n, -5.0, -2.0);
    let d_obs = sim.predict(&truth).unwrap();
    let w = build_data_weights(&d_obs, 0.05, 0.0).unwrap();
    let f = sim.fields(&m).unwrap();
    let d = sim.dpred(&f);
    let r: Vec<f64> = d.iter().zip(&d_obs).map(|(p, o)| p - o).collect();
    let grad = sim.jt_vec(&f, &w.apply_squared(&r)).unwrap();
    let eps = 1e-5;
    for _ in 0..10 {
        let dir = random_vec(&mut rng, n, -1.0, 1.0);
        let plus: Vec<f64> = m.iter().zip(&dir).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = m.iter().zip(&dir).map(|(a, b)| a - eps * b).collect();
        let fp = phi_d(&sim.predict(&plus).unwrap(), &d_obs, &w).unwrap();
        let fm = phi_d(&sim.predict(&minus).unwrap(), &d_obs, &w).unwrap();
        let fd = (fp - fm) / (2.0 * eps);
        let an = dot(&grad, &dir);
        assert!((fd - an).abs() <= 1e-5 * an.abs(), "fd {fd} vs adjoint {an}");
    }
}

#[test]
fn jvec_taylor_remainder_is_second_order() {
    let sim = small_problem(8, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let n = sim.n_model();
    let m = random_vec(&mut rng, n, -5.0, -2.0);
    let w = random_vec(&mut rng, n, -1.0, 1.0);
    let f = sim.fields(&m).unwrap();
    let d0 = sim.dpred(&f);
    let jw = sim.j_vec(&f, &w).unwrap();
    let eps = [1e-2, 1e-3, 1e-4];
    let rem: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let mp: Vec<f64> = m.iter().zip(&w).map(|(a, b)| a + e * b).collect();
            let dp = sim.predict(&mp).unwrap();
            dp.iter()
                .zip(&d0)
                .zip(&jw)
                .map(|((p, q), j)| (p - q - e * j).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    for k in 0..2 {
        let order = (rem[k] / rem[k + 1]).log10();
        assert!(order >= 1.9, "observed order {order} ({rem:?})");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn adjoint_identity(nx in 5usize..=10, nz in 2usize..=6, seed in any::<u64>()) {
        let sim = small_problem(nx, nz);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_vec(&mut rng, sim.n_model(), -6.0, -1.0);
        let w = random_vec(&mut rng, sim.n_model(), -1.0, 1.0);
        let v = random_vec(&mut rng, sim.n_data(), -1.0, 1.0);
        let f = sim.fields(&m).unwrap();
        let lhs = dot(&sim.j_vec(&f, &w).unwrap(), &v);
        let rhs = dot(&w, &sim.jt_vec(&f, &v).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(rhs.abs()), "{} vs {}", lhs, rhs);
    }
}
