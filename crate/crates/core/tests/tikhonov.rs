mod common;

use common::*;
use dipinv::forward::{build_data_weights, DataWeights, DcSimulation, ForwardSimulation};
use dipinv::mesh::TensorMesh2D;
use dipinv::survey::build_dipole_dipole_survey;
use dipinv::tikhonov::{
    build_difference_operators, gauss_newton_invert, sensitivity_weights, GnConfig, RegularizationConfig,
};
use dipinv::Result;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// F(m) = G m.
struct Linear {
    g: DMatrix<f64>,
}

impl ForwardSimulation for Linear {
    type Fields = Vec<f64>;

    fn n_model(&self) -> usize {
        self.g.ncols()
    }

    fn n_data(&self) -> usize {
        self.g.nrows()
    }

    fn fields(&self, m: &[f64]) -> Result<Vec<f64>> {
        Ok(m.to_vec())
    }

    fn dpred(&self, m: &Vec<f64>) -> Vec<f64> {
        (&self.g * DVector::from_column_slice(m)).as_slice().to_vec()
    }

    fn j_vec(&self, _: &Vec<f64>, w: &[f64]) -> Result<Vec<f64>> {
        Ok((&self.g * DVector::from_column_slice(w)).as_slice().to_vec())
    }

    fn jt_vec(&self, _: &Vec<f64>, v: &[f64]) -> Result<Vec<f64>> {
        Ok((self.g.transpose() * DVector::from_column_slice(v)).as_slice().to_vec())
    }
}

#[test]
fn linear_problem_matches_dense_normal_equations() {
    let mut rng = seeded(41);
    let mesh = TensorMesh2D::uniform(3, 2, 1.0, 1.0).unwrap();
    let (n, nd) = (6, 4);
    let g = DMatrix::from_vec(nd, n, random_vec(&mut rng, nd * n, -1.0, 1.0));
    let sim = Linear { g: g.clone() };
    let d_obs = random_vec(&mut rng, nd, -2.0, 2.0);
    let std = random_vec(&mut rng, nd, 0.2, 1.0);
    let w = DataWeights::from_std(&std).unwrap();
    let m_ref = random_vec(&mut rng, n, -1.0, 1.0);
    let reg = RegularizationConfig { alpha_s: 0.3, alpha_x: 1.1, alpha_z: 0.6, ..Default::default() };
    let beta = 0.7;
    let gn = GnConfig {
        beta0: Some(beta),
        max_beta_steps: 1,
        iterations_per_beta: 1,
        cg_tol: 1e-14,
        cg_maxiter: 100,
        target_chi: 0.0,
        ..Default::default()
    };
    let trace = gauss_newton_invert(&sim, &mesh, &d_obs, &w, &reg, &gn, &m_ref, &vec![0.0; n]).unwrap();
    assert_eq!(trace.len(), 1);

    // unit cells: every area weight is one
    let mut dx = DMatrix::zeros(4, n);
    for (row, (a, b)) in [(0, 1), (1, 2), (3, 4), (4, 5)].into_iter().enumerate() {
        dx[(row, a)] = -1.0;
        dx[(row, b)] = 1.0;
    }
    let mut dz = DMatrix::zeros(3, n);
    for (row, (a, b)) in [(0, 3), (1, 4), (2, 5)].into_iter().enumerate() {
        dz[(row, a)] = -1.0;
        dz[(row, b)] = 1.0;
    }
    let wd2 = DMatrix::from_diagonal(&DVector::from_iterator(nd, std.iter().map(|s| 1.0 / (s * s))));
    let lhs = g.transpose() * &wd2 * &g
        + 2.0 * beta
            * (reg.alpha_s * DMatrix::identity(n, n)
                + reg.alpha_x * dx.transpose() * &dx
                + reg.alpha_z * dz.transpose() * &dz);
    let rhs = g.transpose() * &wd2 * DVector::from_column_slice(&d_obs)
        + 2.0 * beta * reg.alpha_s * DVector::from_column_slice(&m_ref);
    let exact = lhs.lu().solve(&rhs).unwrap();
    let err = rel_err(&trace.final_model, exact.as_slice());
    assert!(err <= 1e-8, "relative error {err}");
}

#[test]
fn half_space_start_at_truth_needs_no_iterations() {
    let mesh = TensorMesh2D::build(12, 5, 5.0, 5.0, 3, 1.5).unwrap();
    let survey = build_dipole_dipole_survey(50.0, 5.0, 6).unwrap().centered();
    let sim = DcSimulation::new(mesh.clone(), survey).unwrap();
    let m = vec![(0.01f64).ln(); mesh.n_cells()];
    let d = sim.predict(&m).unwrap();
    let w = build_data_weights(&d, 0.05, 0.0).unwrap();
    let trace = gauss_newton_invert(
        &sim,
        &mesh,
        &d,
        &w,
        &RegularizationConfig::default(),
        &GnConfig::default(),
        &m,
        &m,
    )
    .unwrap();
    assert!(trace.is_empty());
    assert!(trace.converged && trace.final_chi == 0.0);
}

/// Explicit `W_d J` column norms by one `J` product per cell.
fn explicit_column_norms(sim: &DcSimulation, m: &[f64], w: &DataWeights) -> Vec<f64> {
    let f = sim.fields(m).unwrap();
    (0..sim.n_model())
        .map(|j| {
            let mut e = vec![0.0; sim.n_model()];
            e[j] = 1.0;
            let col = sim.j_vec(&f, &e).unwrap();
            col.iter().zip(&w.values).map(|(c, w)| (c * w).powi(2)).sum::<f64>().sqrt()
        })
        .collect()
}

#[test]
fn sensitivity_probes_match_explicit_jacobian() {
    let mesh = TensorMesh2D::uniform(6, 4, 1.0, 1.0).unwrap();
    let survey = dipinv::survey::Survey::new(
        vec![-2.5, -1.5, -0.5, 0.5, 1.5, 2.5],
        vec![(0, 1), (1, 2), (0, 1)],
        vec![vec![(2, 3), (3, 4), (4, 5)], vec![(3, 4), (4, 5)], vec![(3, 5)]],
    )
    .unwrap();
    let sim = DcSimulation::new(mesh.clone(), survey).unwrap().with_solver(tight());
    let m = vec![(0.02f64).ln(); mesh.n_cells()];
    let d = sim.predict(&m).unwrap();
    let w = build_data_weights(&d, 0.05, 0.0).unwrap();
    let exact = explicit_column_norms(&sim, &m, &w);
    let max = exact.iter().cloned().fold(0.0, f64::max);
    let exact: Vec<f64> = exact.iter().map(|v| (v / max).max(1e-4)).collect();
    let f = sim.fields(&m).unwrap();
    let est = sensitivity_weights(&sim, &f, Some(&w), 256, 5).unwrap();
    assert!(est.iter().all(|&v| v > 0.0 && v <= 1.0));
    let err = rel_err(&est, &exact);
    assert!(err <= 0.15, "probe estimate off by {err}");
    let est32 = sensitivity_weights(&sim, &f, Some(&w), 32, 6).unwrap();
    assert!(est32.iter().all(|&v| v > 0.0 && v <= 1.0));

    // vertical profile under the array centre: sensitivity decays with depth
    let nx = mesh.nx();
    for ix in [2, 3] {
        let col: Vec<f64> = (0..mesh.nz()).map(|iz| exact[iz * nx + ix]).collect();
        assert!(col.windows(2).all(|p| p[1] < p[0]), "column {ix}: {col:?}");
    }
}

#[test]
fn l2_inversion_reaches_target_with_monotone_objective() {
    let mesh = TensorMesh2D::build(12, 5, 5.0, 5.0, 3, 1.5).unwrap();
    let survey = build_dipole_dipole_survey(50.0, 5.0, 6).unwrap().centered();
    let sim = DcSimulation::new(mesh.clone(), survey).unwrap();
    let background = (0.01f64).ln();
    let mut truth = vec![background; mesh.n_cells()];
    let map = mesh.index_map();
    for iz in 1..3 {
        for ix in 7..10 {
            truth[map.flatten(ix, iz)] = (0.1f64).ln();
        }
    }
    let d = sim.predict(&truth).unwrap();
    let w = build_data_weights(&d, 0.05, 0.0).unwrap();
    let m_ref = vec![background; mesh.n_cells()];
    let reg = RegularizationConfig::default();
    let trace =
        gauss_newton_invert(&sim, &mesh, &d, &w, &reg, &GnConfig::default(), &m_ref, &m_ref).unwrap();
    assert!(trace.converged && trace.final_chi <= 1.0, "chi {}", trace.final_chi);
    for pair in trace.records.windows(2) {
        if pair[0].beta == pair[1].beta {
            assert!(pair[1].loss <= pair[0].loss);
        }
    }
    let core = dipinv::metrics::core_values(&mesh, &trace.final_model);
    let core_truth = dipinv::metrics::core_values(&mesh, &truth);
    assert!(dipinv::metrics::pearson(&core, &core_truth) > 0.0);
}

proptest! {
    #[test]
    fn differences_annihilate_constants(nx in 1usize..8, nz in 1usize..6, pad in 0usize..3, c in -9.0f64..3.0) {
        let mesh = TensorMesh2D::build(nx, nz, 2.5, 1.5, pad, 1.3).unwrap();
        let ops = build_difference_operators(&mesh);
        let m = vec![c; mesh.n_cells()];
        prop_assert!(ops.dx.matvec(&m).iter().all(|v| v.abs() < 1e-12));
        prop_assert!(ops.dz.matvec(&m).iter().all(|v| v.abs() < 1e-12));
    }
}
