use serde::{Deserialize, Serialize};

use super::regularization::{power_iteration, sensitivity_weights, Regularization, RegularizationConfig};
use crate::error::{Error, Result};
use crate::forward::{chi_factor, phi_d, DataWeights, ForwardSimulation};
use crate::mesh::TensorMesh2D;
use crate::trace::{InversionTrace, TraceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnConfig {
    /// Initial trade-off; estimated from curvatures when absent.
    pub beta0: Option<f64>,
    /// Multiplier on the curvature ratio used for the estimate.
    pub beta0_ratio: f64,
    pub cooling_factor: f64,
    pub iterations_per_beta: usize,
    pub max_beta_steps: usize,
    pub cg_tol: f64,
    pub cg_maxiter: usize,
    pub target_chi: f64,
    /// Sparse-norm iterations after the L2 phase reaches the target.
    pub max_irls_iterations: usize,
    /// Relative change in φ_m below which the sparse phase stops.
    pub irls_tolerance: f64,
    /// Half-width of the accepted χ band around the target in the sparse
    /// phase, as a fraction of the target.
    pub chi_tolerance: f64,
    pub line_search_steps: usize,
    pub power_iterations: usize,
    pub seed: u64,
}

impl Default for GnConfig {
    fn default() -> Self {
        Self {
            beta0: None,
            beta0_ratio: 1.0,
            cooling_factor: 0.5,
            iterations_per_beta: 2,
            max_beta_steps: 30,
            cg_tol: 1e-2,
            cg_maxiter: 30,
            target_chi: 1.0,
            max_irls_iterations: 20,
            irls_tolerance: 1e-2,
            chi_tolerance: 0.1,
            line_search_steps: 10,
            power_iterations: 10,
            seed: 0,
        }
    }
}

impl GnConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.beta0 {
            if !(b > 0.0) {
                return Err(Error::invalid(format!("beta0 must be positive, got {b}")));
            }
        }
        if !(self.cooling_factor > 0.0 && self.cooling_factor < 1.0) {
            return Err(Error::invalid(format!(
                "cooling factor must lie in (0, 1), got {}",
                self.cooling_factor
            )));
        }
        if self.iterations_per_beta == 0 || self.cg_maxiter == 0 {
            return Err(Error::invalid("iteration counts must be positive"));
        }
        if !(self.beta0_ratio > 0.0) || !(self.cg_tol > 0.0) || !(self.target_chi >= 0.0) {
            return Err(Error::invalid("beta0_ratio and cg_tol must be positive"));
        }
        Ok(())
    }
}

/// Conjugate gradients on a symmetric positive semi-definite operator.
/// Stops at relative residual `tol` or `maxiter` iterations, whichever comes
/// first, and returns the current iterate either way.
pub fn cg_operator(
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    tol: f64,
    maxiter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..maxiter {
        let ap = apply(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let a = rr / pap;
        for i in 0..n {
            x[i] += a * p[i];
            r[i] -= a * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * bnorm {
            break;
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct State<F> {
    m: Vec<f64>,
    fields: F,
    residual: Vec<f64>,
    phi_d: f64,
    chi: f64,
}

fn evaluate<S: ForwardSimulation>(
    sim: &S,
    m: Vec<f64>,
    d_obs: &[f64],
    w: &DataWeights,
) -> Result<State<S::Fields>> {
    let fields = sim.fields(&m)?;
    let d = sim.dpred(&fields);
    let phi = phi_d(&d, d_obs, w)?;
    let chi = chi_factor(&d, d_obs, w)?;
    let residual = d.iter().zip(d_obs).map(|(p, o)| p - o).collect();
    Ok(State { m, fields, residual, phi_d: phi, chi })
}

/// One inexact Gauss-Newton step with backtracking. `None` when no trial
/// step decreased the objective.
fn gn_step<S: ForwardSimulation>(
    sim: &S,
    reg: &Regularization,
    state: &State<S::Fields>,
    d_obs: &[f64],
    w: &DataWeights,
    beta: f64,
    cfg: &GnConfig,
) -> Result<Option<State<S::Fields>>> {
    let g_d = sim.jt_vec(&state.fields, &w.apply_squared(&state.residual))?;
    let (phi_m, g_m) = reg.phi_m(&state.m)?;
    let g: Vec<f64> = g_d.iter().zip(&g_m).map(|(a, b)| a + beta * b).collect();
    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
    let delta = cg_operator(
        |v| {
            let jv = sim.j_vec(&state.fields, v)?;
            let jtwjv = sim.jt_vec(&state.fields, &w.apply_squared(&jv))?;
            let hv = reg.hess_vec(v);
            Ok(jtwjv.iter().zip(&hv).map(|(a, b)| a + beta * b).collect())
        },
        &neg,
        cfg.cg_tol,
        cfg.cg_maxiter,
    )?;
    let slope = dot(&g, &delta);
    if !(slope < 0.0) {
        return Ok(None);
    }
    let f0 = state.phi_d + beta * phi_m;
    let mut step = 1.0;
    for _ in 0..cfg.line_search_steps.max(1) {
        let trial: Vec<f64> = state.m.iter().zip(&delta).map(|(a, b)| a + step * b).collect();
        // a trial that breaks the forward solve is treated as a rejected step
        if let Ok(next) = evaluate(sim, trial, d_obs, w) {
            let f = next.phi_d + beta * reg.phi_m(&next.m)?.0;
            if f.is_finite() && f <= f0 + 1e-4 * step * slope {
                return Ok(Some(next));
            }
        }
        step *= 0.5;
    }
    Ok(None)
}

/// Largest eigenvalue of `Jᵀ W_dᵀ W_d J` at the current model.
fn data_curvature<S: ForwardSimulation>(
    sim: &S,
    fields: &S::Fields,
    w: &DataWeights,
    cfg: &GnConfig,
) -> Result<f64> {
    power_iteration(sim.n_model(), cfg.power_iterations, cfg.seed, |v| {
        let jv = sim.j_vec(fields, v)?;
        sim.jt_vec(fields, &w.apply_squared(&jv))
    })
}

#[derive(PartialEq)]
enum Phase {
    L2,
    Sparse,
}

/// Tikhonov inversion with β cooling. The smooth L2 problem is solved until
/// the misfit reaches the target; if any norm is below 2 the IRLS phase then
/// reweights after every iteration while β is nudged to hold the misfit near
/// the target.
#[allow(clippy::too_many_arguments)]
pub fn gauss_newton_invert<S: ForwardSimulation>(
    sim: &S,
    mesh: &TensorMesh2D,
    d_obs: &[f64],
    w: &DataWeights,
    reg_cfg: &RegularizationConfig,
    cfg: &GnConfig,
    m_ref: &[f64],
    m0: &[f64],
) -> Result<InversionTrace> {
    cfg.validate()?;
    reg_cfg.validate()?;
    if m0.len() != sim.n_model() || m_ref.len() != sim.n_model() {
        return Err(Error::invalid(format!(
            "starting and reference models need {} cells",
            sim.n_model()
        )));
    }
    let mut state = evaluate(sim, m0.to_vec(), d_obs, w)?;
    let sens = if reg_cfg.use_sensitivity_weights {
        Some(sensitivity_weights(sim, &state.fields, Some(w), reg_cfg.sensitivity_probes, cfg.seed)?)
    } else {
        None
    };
    let mut reg = Regularization::new(mesh, reg_cfg.clone(), m_ref.to_vec(), sens.as_deref())?;
    let mut trace = InversionTrace::default();
    let finish = |mut trace: InversionTrace, state: State<S::Fields>, converged: bool| {
        trace.final_model = state.m;
        trace.final_phi_d = state.phi_d;
        trace.final_chi = state.chi;
        trace.converged = converged;
        trace
    };
    if state.chi <= cfg.target_chi {
        return Ok(finish(trace, state, true));
    }

    let mut beta = match cfg.beta0 {
        Some(b) => b,
        None => {
            let ld = data_curvature(sim, &state.fields, w, cfg)?;
            let lm = reg.max_curvature(cfg.power_iterations, cfg.seed.wrapping_add(1));
            if !(lm > 0.0) || !(ld > 0.0) {
                return Err(Error::NumericalFailure(format!(
                    "cannot estimate beta0 from curvatures {ld} and {lm}"
                )));
            }
            cfg.beta0_ratio * ld / lm
        }
    };

    let sparse = reg_cfg.is_sparse();
    let mut phase = Phase::L2;
    let mut at_beta = 0;
    let mut beta_steps = 0;
    let mut irls_iters = 0;
    let mut prev_phi_m = f64::NAN;
    let lo = cfg.target_chi * (1.0 - cfg.chi_tolerance);
    let hi = cfg.target_chi * (1.0 + cfg.chi_tolerance);
    let mut iteration = 0;
    loop {
        let Some(next) = gn_step(sim, &reg, &state, d_obs, w, beta, cfg)? else {
            return Ok(finish(trace, state, false));
        };
        state = next;
        let phi_m = reg.phi_m(&state.m)?.0;
        trace.records.push(TraceRecord {
            epoch: iteration,
            beta,
            phi_d: state.phi_d,
            phi_m,
            chi: state.chi,
            loss: state.phi_d + beta * phi_m,
        });
        iteration += 1;

        match phase {
            Phase::L2 => {
                if state.chi <= cfg.target_chi {
                    if !sparse {
                        return Ok(finish(trace, state, true));
                    }
                    phase = Phase::Sparse;
                    reg.update_irls(&state.m)?;
                    prev_phi_m = reg.phi_m(&state.m)?.0;
                    continue;
                }
                at_beta += 1;
                if at_beta >= cfg.iterations_per_beta {
                    at_beta = 0;
                    beta_steps += 1;
                    if beta_steps >= cfg.max_beta_steps {
                        return Ok(finish(trace, state, false));
                    }
                    beta *= cfg.cooling_factor;
                }
            }
            Phase::Sparse => {
                irls_iters += 1;
                let change = (phi_m - prev_phi_m).abs() / prev_phi_m.abs().max(f64::MIN_POSITIVE);
                let in_band = state.chi >= lo && state.chi <= hi;
                if in_band && change <= cfg.irls_tolerance {
                    return Ok(finish(trace, state, true));
                }
                if irls_iters >= cfg.max_irls_iterations {
                    let ok = state.chi <= hi;
                    return Ok(finish(trace, state, ok));
                }
                if state.chi > hi {
                    beta *= cfg.cooling_factor;
                } else if state.chi < lo {
                    beta /= cfg.cooling_factor;
                }
                reg.update_irls(&state.m)?;
                prev_phi_m = reg.phi_m(&state.m)?.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_solves_spd_system() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let b = [1.0, 2.0, 3.0];
        let x = cg_operator(
            |v| Ok((0..3).map(|i| (0..3).map(|j| a[i][j] * v[j]).sum()).collect()),
            &b,
            1e-14,
            10,
        )
        .unwrap();
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a[i][j] * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        assert!(GnConfig::default().validate().is_ok());
        assert!(GnConfig { cooling_factor: 1.0, ..Default::default() }.validate().is_err());
        assert!(GnConfig { beta0: Some(0.0), ..Default::default() }.validate().is_err());
    }
}
