//! Network-reparameterized inversion.
//!
//! Stage 1 fits the network output to the reference model. Stage 2 then
//! minimises `(1−β)·φ_d(F(net(z))) + β·‖net(z) − m_ref‖₁` with β decaying
//! exponentially over epochs. The data-term gradient with respect to the
//! model comes from one adjoint solve per epoch and is pushed through the
//! network by backpropagation.

mod adam;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamState};

use crate::error::{Error, Result};
use crate::forward::{chi_factor, phi_d, DataWeights, ForwardSimulation};
use crate::net::{init_params, net_backward, net_forward, ArchConfig, LatentVector, Mode, NetParams};
use crate::trace::{InversionTrace, TraceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DipConfig {
    /// Decay rate of β in epochs.
    pub tau: f64,
    /// Adam step size in stage 2.
    pub lr: f64,
    /// Adam step size in stage 1.
    pub lr_stage1: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs_stage1: usize,
    /// Stage 1 stops once mean |m − m_ref| falls to this value.
    pub stage1_threshold: f64,
    pub epochs_stage2: usize,
    pub chi_target: f64,
    /// Stage 2 stops after this many consecutive epochs at or below
    /// `chi_target`; 0 disables early stopping.
    pub patience: usize,
    pub dropout_rate: f64,
    pub latent_std: f64,
    pub rng_seed: u64,
    /// Keep the model of every stage-2 epoch in the trace.
    pub keep_models: bool,
}

impl Default for DipConfig {
    fn default() -> Self {
        Self {
            tau: 1000.0,
            lr: 1e-4,
            lr_stage1: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            epochs_stage1: 5000,
            stage1_threshold: 0.05,
            epochs_stage2: 2000,
            chi_target: 1.0,
            patience: 50,
            dropout_rate: 0.0,
            latent_std: 10.0,
            rng_seed: 0,
            keep_models: false,
        }
    }
}

impl DipConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::invalid(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.lr > 0.0) || !(self.lr_stage1 > 0.0) {
            return Err(Error::invalid("learning rates must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if !(self.latent_std > 0.0) {
            return Err(Error::invalid("latent std must be positive"));
        }
        AdamState::new(0, self.adam_beta1, self.adam_beta2, self.adam_eps)?;
        Ok(())
    }

    fn adam(&self, n: usize) -> Result<AdamState> {
        AdamState::new(n, self.adam_beta1, self.adam_beta2, self.adam_eps)
    }
}

/// `β = exp(−t/τ)`.
pub fn beta(t: usize, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    Ok((-(t as f64) / tau).exp())
}

fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("{what}: lengths {a} and {b} differ")));
    }
    Ok(())
}

/// Value of `(1−β)⟨Jv, m⟩ + β‖m − m_ref‖₁` and its gradient with respect to
/// `m`, with `Jv` held constant.
pub fn surrogate_loss(m: &[f64], jv: &[f64], beta: f64, m_ref: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len(m.len(), jv.len(), "model and Jv")?;
    check_len(m.len(), m_ref.len(), "model and reference")?;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(m.len());
    for ((&mi, &ji), &ri) in m.iter().zip(jv).zip(m_ref) {
        let d = mi - ri;
        value += (1.0 - beta) * ji * mi + beta * d.abs();
        grad.push((1.0 - beta) * ji + beta * sign(d));
    }
    Ok((value, grad))
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn l1(m: &[f64], m_ref: &[f64]) -> f64 {
    m.iter().zip(m_ref).map(|(a, b)| (a - b).abs()).sum()
}

/// One stage-2 evaluation at the current weights.
#[derive(Debug, Clone)]
pub struct EpochEval {
    pub model: Vec<f64>,
    pub phi_d: f64,
    pub phi_m: f64,
    pub chi: f64,
    pub loss: f64,
    /// Gradient of the surrogate loss with respect to the weights.
    pub grad: Vec<f64>,
}

/// Forward pass, one forward and one adjoint simulation, surrogate loss and
/// backpropagation.
#[allow(clippy::too_many_arguments)]
pub fn surrogate_step<S: ForwardSimulation>(
    sim: &S,
    mesh_shape: (usize, usize),
    params: &NetParams,
    z: &LatentVector,
    d_obs: &[f64],
    w: &DataWeights,
    m_ref: &[f64],
    beta: f64,
    mode: Mode<'_>,
) -> Result<EpochEval> {
    let (model, trace) = net_forward(params, z, mesh_shape, mode)?;
    check_len(model.len(), sim.n_model(), "network output and simulation")?;
    let fields = sim.fields(&model)?;
    let d = sim.dpred(&fields);
    check_len(d.len(), d_obs.len(), "predicted and observed data")?;
    let r: Vec<f64> = d.iter().zip(d_obs).map(|(p, o)| p - o).collect();
    let jv = sim.jt_vec(&fields, &w.apply_squared(&r))?;
    let pd = phi_d(&d, d_obs, w)?;
    let chi = chi_factor(&d, d_obs, w)?;
    let (loss, g_m) = surrogate_loss(&model, &jv, beta, m_ref)?;
    if !loss.is_finite() || !pd.is_finite() {
        return Err(Error::NumericalFailure(format!("non-finite loss {loss} (phi_d {pd})")));
    }
    let grad = net_backward(params, &trace, &g_m)?;
    let phi_m = l1(&model, m_ref);
    Ok(EpochEval { model, phi_d: pd, phi_m, chi, loss, grad })
}

#[derive(Debug, Clone)]
pub struct Stage1Report {
    pub params: NetParams,
    pub epochs: usize,
    /// Final mean absolute deviation from the reference model.
    pub loss: f64,
    pub converged: bool,
}

/// Fits the network output to `m_ref` under the mean-absolute loss.
pub fn pretrain_stage1(
    mut params: NetParams,
    z: &LatentVector,
    mesh_shape: (usize, usize),
    m_ref: &[f64],
    config: &DipConfig,
) -> Result<Stage1Report> {
    config.validate()?;
    let n = m_ref.len() as f64;
    let mut adam = config.adam(params.len())?;
    let mut epoch = 0;
    loop {
        let (m, trace) = net_forward(&params, z, mesh_shape, Mode::Eval)?;
        check_len(m.len(), m_ref.len(), "network output and reference")?;
        let loss = l1(&m, m_ref) / n;
        if !loss.is_finite() {
            return Err(Error::AtEpoch {
                epoch,
                source: Box::new(Error::NumericalFailure(format!("stage-1 loss is {loss}"))),
            });
        }
        if loss <= config.stage1_threshold || epoch >= config.epochs_stage1 {
            return Ok(Stage1Report {
                params,
                epochs: epoch,
                loss,
                converged: loss <= config.stage1_threshold,
            });
        }
        let g: Vec<f64> = m.iter().zip(m_ref).map(|(a, b)| sign(a - b) / n).collect();
        let grad = net_backward(&params, &trace, &g)?;
        adam_step(&mut params.values, &grad, &mut adam, config.lr_stage1)?;
        epoch += 1;
    }
}

#[derive(Debug, Clone)]
pub struct Stage2Outcome {
    pub trace: InversionTrace,
    pub params: NetParams,
}

/// Stage-2 optimisation starting from pretrained weights. The returned final
/// model is evaluated with dropout switched off.
#[allow(clippy::too_many_arguments)]
pub fn invert_stage2<S: ForwardSimulation>(
    sim: &S,
    mesh_shape: (usize, usize),
    pretrained: &NetParams,
    z: &LatentVector,
    d_obs: &[f64],
    w: &DataWeights,
    m_ref: &[f64],
    config: &DipConfig,
) -> Result<Stage2Outcome> {
    config.validate()?;
    let mut params = pretrained.clone();
    let mut adam = config.adam(params.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    rng.set_stream(2);
    let mut trace = InversionTrace::default();
    let mut below = 0;
    for epoch in 0..config.epochs_stage2 {
        let at = |e: Error| Error::AtEpoch { epoch, source: Box::new(e) };
        let b = beta(epoch, config.tau)?;
        let mode = if config.dropout_rate > 0.0 {
            Mode::Train { dropout_rate: config.dropout_rate, rng: &mut rng }
        } else {
            Mode::Eval
        };
        let eval = surrogate_step(sim, mesh_shape, &params, z, d_obs, w, m_ref, b, mode).map_err(at)?;
        adam_step(&mut params.values, &eval.grad, &mut adam, config.lr).map_err(at)?;
        trace.records.push(TraceRecord {
            epoch,
            beta: b,
            phi_d: eval.phi_d,
            phi_m: eval.phi_m,
            chi: eval.chi,
            loss: eval.loss,
        });
        if config.keep_models {
            trace.models.push(eval.model);
        }
        below = if eval.chi <= config.chi_target { below + 1 } else { 0 };
        if config.patience > 0 && below >= config.patience {
            break;
        }
    }
    let (model, _) = net_forward(&params, z, mesh_shape, Mode::Eval)?;
    let d = sim.predict(&model)?;
    trace.final_phi_d = phi_d(&d, d_obs, w)?;
    trace.final_chi = chi_factor(&d, d_obs, w)?;
    trace.converged = trace.final_chi <= config.chi_target
        || (config.patience > 0 && below >= config.patience);
    trace.final_model = model;
    Ok(Stage2Outcome { trace, params })
}

/// Everything produced by a complete two-stage run.
#[derive(Debug, Clone)]
pub struct DipRun {
    pub latent: LatentVector,
    pub stage1: Stage1Report,
    pub trace: InversionTrace,
    pub params: NetParams,
}

/// Draws the latent vector and initial weights from `config.rng_seed`, then
/// runs both stages.
#[allow(clippy::too_many_arguments)]
pub fn run_dip<S: ForwardSimulation>(
    sim: &S,
    mesh_shape: (usize, usize),
    arch: &ArchConfig,
    d_obs: &[f64],
    w: &DataWeights,
    m_ref: &[f64],
    config: &DipConfig,
) -> Result<DipRun> {
    config.validate()?;
    let mut zrng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    zrng.set_stream(1);
    let latent = LatentVector::sample(arch.latent_dim, config.latent_std, &mut zrng)?;
    let init = init_params(config.rng_seed, arch)?;
    let stage1 = pretrain_stage1(init, &latent, mesh_shape, m_ref, config)?;
    let out = invert_stage2(sim, mesh_shape, &stage1.params, &latent, d_obs, w, m_ref, config)?;
    Ok(DipRun { latent, stage1, trace: out.trace, params: out.params })
}
