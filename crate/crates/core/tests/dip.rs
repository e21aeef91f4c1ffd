mod common;

use common::*;
use dipinv::dip::{
    invert_stage2, pretrain_stage1, run_dip, surrogate_step, DipConfig,
};
use dipinv::forward::{build_data_weights, phi_d, DcSimulation, ForwardSimulation};
use dipinv::mesh::TensorMesh2D;
use dipinv::net::{init_params, net_forward, ArchConfig, LatentVector, Mode, NetParams, Upsampler};
use dipinv::survey::build_dipole_dipole_survey;

/// The weight gradient of the surrogate loss equals the weight gradient of
/// the actual objective (1−β)φ_d + β‖m − m_ref‖₁.
#[test]
fn surrogate_gradient_matches_true_objective() {
    let sim = tiny_simulation();
    let mesh_shape = sim.mesh.shape();
    let mut rng = seeded(31);
    let truth = random_vec(&mut rng, sim.n_model(), -5.0, -2.0);
    let d_obs = sim.predict(&truth).unwrap();
    let w = build_data_weights(&d_obs, 0.05, 0.0).unwrap();
    let m_ref = vec![-4.0; sim.n_model()];
    let z = tiny_latent();
    for (k, up) in Upsampler::ALL.into_iter().enumerate() {
        let params = random_params(&tiny_arch(up), &mut rng, 0.7);
        for beta in [0.0, 0.3, 0.9] {
            let eval = surrogate_step(&sim, mesh_shape, &params, &z, &d_obs, &w, &m_ref, beta, Mode::Eval)
                .unwrap();
            let objective = |v: &[f64]| -> f64 {
                let p = NetParams::new(params.arch.clone(), v.to_vec()).unwrap();
                let (m, _) = net_forward(&p, &z, mesh_shape, Mode::Eval).unwrap();
                let pd = phi_d(&sim.predict(&m).unwrap(), &d_obs, &w).unwrap();
                let l1: f64 = m.iter().zip(&m_ref).map(|(a, b)| (a - b).abs()).sum();
                (1.0 - beta) * pd + beta * l1
            };
            let fd = fd_gradient(&params.values, 1e-6, objective);
            let err = rel_err(&eval.grad, &fd);
            assert!(err <= 1e-6, "variant {k}, beta {beta}: relative error {err}");
        }
    }
}

fn desk_like() -> (DcSimulation, ArchConfig) {
    let mesh = TensorMesh2D::build(12, 5, 5.0, 5.0, 3, 1.5).unwrap();
    let survey = build_dipole_dipole_survey(50.0, 5.0, 6).unwrap().centered();
    let (nz, nx) = mesh.shape();
    let arch = ArchConfig::for_mesh(nz, nx, 3, Upsampler::Bilinear).unwrap();
    (DcSimulation::new(mesh, survey).unwrap(), arch)
}

#[test]
fn stage1_reaches_threshold_and_stops_immediately_when_pretrained() {
    let (sim, arch) = desk_like();
    let shape = sim.mesh.shape();
    let m_ref = vec![(0.01f64).ln(); sim.n_model()];
    let cfg = DipConfig::default();
    let z = LatentVector::sample(8, 10.0, &mut seeded(1)).unwrap();
    let report = pretrain_stage1(init_params(2, &arch).unwrap(), &z, shape, &m_ref, &cfg).unwrap();
    assert!(report.converged && report.loss <= 0.05, "{} after {}", report.loss, report.epochs);
    assert!(report.epochs > 0 && report.epochs <= 5000);
    let again = pretrain_stage1(report.params.clone(), &z, shape, &m_ref, &cfg).unwrap();
    assert_eq!(again.epochs, 0);
    assert_eq!(again.params, report.params);
}

#[test]
fn stage1_is_deterministic() {
    let (sim, arch) = desk_like();
    let shape = sim.mesh.shape();
    let m_ref = vec![-4.6; sim.n_model()];
    let cfg = DipConfig { epochs_stage1: 50, stage1_threshold: 0.0, ..Default::default() };
    let z = LatentVector::sample(8, 10.0, &mut seeded(3)).unwrap();
    let a = pretrain_stage1(init_params(4, &arch).unwrap(), &z, shape, &m_ref, &cfg).unwrap();
    let b = pretrain_stage1(init_params(4, &arch).unwrap(), &z, shape, &m_ref, &cfg).unwrap();
    assert_eq!(a.epochs, 50);
    assert_eq!(a.loss.to_bits(), b.loss.to_bits());
    assert_eq!(a.params, b.params);
}

#[test]
fn half_space_with_true_reference_fits_quickly() {
    let (sim, arch) = desk_like();
    let shape = sim.mesh.shape();
    let m_true = vec![(0.01f64).ln(); sim.n_model()];
    let d_obs = sim.predict(&m_true).unwrap();
    let w = build_data_weights(&d_obs, 0.05, 0.0).unwrap();
    let cfg = DipConfig { epochs_stage2: 200, lr: 1e-4, ..Default::default() };
    let run = run_dip(&sim, shape, &arch, &d_obs, &w, &m_true, &cfg).unwrap();
    let first_le_one = run.trace.records.iter().position(|r| r.chi <= 1.0);
    assert!(first_le_one.is_some(), "chi never reached 1: final {}", run.trace.final_chi);
    assert!(run.trace.final_chi <= 1.0);
}

#[test]
fn stage2_trace_properties() {
    let (sim, arch) = desk_like();
    let shape = sim.mesh.shape();
    let mut truth = vec![(0.01f64).ln(); sim.n_model()];
    for k in sim.mesh.core_indices().into_iter().filter(|k| k % 3 == 0) {
        truth[k] = (0.05f64).ln();
    }
    let d_obs = sim.predict(&truth).unwrap();
    let w = build_data_weights(&d_obs, 0.05, 0.0).unwrap();
    let m_ref = vec![(0.01f64).ln(); sim.n_model()];
    let z = LatentVector::sample(8, 10.0, &mut seeded(8)).unwrap();
    let init = init_params(9, &arch).unwrap();
    let base = DipConfig {
        epochs_stage1: 40,
        epochs_stage2: 30,
        tau: 10.0,
        lr: 1e-3,
        keep_models: true,
        ..Default::default()
    };
    let pre = pretrain_stage1(init, &z, shape, &m_ref, &base).unwrap().params;

    // zero epochs: empty trace, pretrained output returned
    let none = invert_stage2(
        &sim, shape, &pre, &z, &d_obs, &w, &m_ref, &DipConfig { epochs_stage2: 0, ..base.clone() },
    )
    .unwrap();
    assert!(none.trace.is_empty());
    assert_eq!(none.trace.final_model, net_forward(&pre, &z, shape, Mode::Eval).unwrap().0);

    for dropout in [0.0, 0.1] {
        let cfg = DipConfig { dropout_rate: dropout, ..base.clone() };
        let a = invert_stage2(&sim, shape, &pre, &z, &d_obs, &w, &m_ref, &cfg).unwrap();
        let b = invert_stage2(&sim, shape, &pre, &z, &d_obs, &w, &m_ref, &cfg).unwrap();
        assert_eq!(a.trace.to_text(), b.trace.to_text(), "dropout {dropout}");
        assert_eq!(a.trace.len(), 30);
        for (r, m) in a.trace.records.iter().zip(&a.trace.models) {
            let again = phi_d(&sim.predict(m).unwrap(), &d_obs, &w).unwrap();
            assert!((again - r.phi_d).abs() <= 1e-12 * r.phi_d.abs());
            assert!(m.iter().all(|&v| v < 0.0 && v > -8.0));
        }
        let betas: Vec<f64> = a.trace.records.iter().map(|r| r.beta).collect();
        assert!(betas.windows(2).all(|p| p[1] < p[0]));
    }
}
