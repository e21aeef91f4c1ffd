//! End-to-end runs: synthesize data, invert it with either method, write
//! the artifacts, and record a manifest that reproduces the run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dip::{run_dip, DipRun};
use crate::error::{Error, Result};
use crate::forward::{default_floor, DataWeights, DcSimulation, ForwardSimulation};
use crate::io::{read_text, write_text, DataSet, Grid};
use crate::mesh::TensorMesh2D;
use crate::metrics::{core_values, mean_abs_gradient, pearson, rmse};
use crate::net::checkpoint_to_string;
use crate::scenarios::{add_noise, ScenarioSpec};
use crate::tikhonov::gauss_newton_invert;
use crate::trace::InversionTrace;

pub const MANIFEST_FORMAT: &str = "dipinv-manifest v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    InvertDip,
    InvertConv,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::InvertDip => "invert-dip",
            Command::InvertConv => "invert-conv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dip,
    Conventional,
}

/// A painted scene on its mesh.
#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: ScenarioSpec,
    pub mesh: TensorMesh2D,
    pub truth: Vec<f64>,
}

impl Scene {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let spec = cfg.scenario_spec();
        let truth = spec.paint()?;
        let mesh = spec.mesh.build()?;
        Ok(Self { spec, mesh, truth })
    }
}

/// Noisy synthetic data for the configured scene. Data whose generating std
/// is zero (noise-free runs) get the default floor instead.
pub fn synthesize(cfg: &RunConfig, scene: &Scene) -> Result<DataSet> {
    let survey = cfg.survey.build()?;
    let sim = DcSimulation::new(scene.mesh.clone(), survey.clone())?.with_solver(cfg.forward);
    let clean = sim.predict(&scene.truth)?;
    let (noisy, mut std) = add_noise(&clean, cfg.noise.rel, cfg.noise.seed)?;
    let floor = default_floor(&clean);
    for s in std.iter_mut().filter(|s| **s <= 0.0) {
        *s = floor;
    }
    DataSet::new(survey, noisy, std)
}

/// Final statistics of one inversion, compared with the scene's truth over
/// the core cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    pub scenario: String,
    pub iterations: usize,
    pub converged: bool,
    pub chi: f64,
    pub phi_d: f64,
    pub rmse: f64,
    pub pearson: f64,
    /// Mean absolute difference between neighbouring core cells.
    pub smoothness: f64,
    /// Correlation of the half-space starting model with the truth.
    pub start_pearson: f64,
}

impl RunSummary {
    fn new(method: Method, scene: &Scene, start: &[f64], trace: &InversionTrace) -> Self {
        let truth = core_values(&scene.mesh, &scene.truth);
        let model = core_values(&scene.mesh, &trace.final_model);
        Self {
            method,
            scenario: scene.spec.scene.name.clone(),
            iterations: trace.len(),
            converged: trace.converged,
            chi: trace.final_chi,
            phi_d: trace.final_phi_d,
            rmse: rmse(&model, &truth),
            pearson: pearson(&model, &truth),
            smoothness: mean_abs_gradient(&scene.mesh, &trace.final_model),
            start_pearson: pearson(&core_values(&scene.mesh, start), &truth),
        }
    }
}

fn simulation(cfg: &RunConfig, scene: &Scene, data: &DataSet) -> Result<(DcSimulation, DataWeights)> {
    let sim = DcSimulation::new(scene.mesh.clone(), data.survey.clone())?.with_solver(cfg.forward);
    Ok((sim, DataWeights::from_std(&data.std)?))
}

/// Both stages of the network inversion, reference and start at the
/// background half-space.
pub fn invert_dip(cfg: &RunConfig, scene: &Scene, data: &DataSet) -> Result<(DipRun, RunSummary)> {
    let (sim, w) = simulation(cfg, scene, data)?;
    let m_ref = scene.spec.half_space()?;
    let run = run_dip(&sim, scene.mesh.shape(), &cfg.arch()?, &data.values, &w, &m_ref, &cfg.dip)?;
    let summary = RunSummary::new(Method::Dip, scene, &m_ref, &run.trace);
    Ok((run, summary))
}

/// Gauss-Newton Tikhonov inversion from the background half-space.
pub fn invert_conv(cfg: &RunConfig, scene: &Scene, data: &DataSet) -> Result<(InversionTrace, RunSummary)> {
    let (sim, w) = simulation(cfg, scene, data)?;
    let m_ref = scene.spec.half_space()?;
    let trace = gauss_newton_invert(
        &sim,
        &scene.mesh,
        &data.values,
        &w,
        &cfg.conv.regularization,
        &cfg.conv.gauss_newton,
        &m_ref,
        &m_ref,
    )?;
    let summary = RunSummary::new(Method::Conventional, scene, &m_ref, &trace);
    Ok((trace, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub noise: u64,
    pub dip: u64,
    pub conv: u64,
}

/// Everything needed to rerun a command and get the same files back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub format: String,
    pub command: Command,
    pub method: Option<Method>,
    pub scenario: String,
    /// Input data file; absent when the run synthesized its own data.
    pub data: Option<PathBuf>,
    pub seeds: Seeds,
    /// Output files by role.
    pub outputs: BTreeMap<String, PathBuf>,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::Config(format!("malformed manifest: {e}")))?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::Config(format!(
                "unsupported manifest format '{}' (expected '{MANIFEST_FORMAT}')",
                m.format
            )));
        }
        m.config.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?)
    }
}

/// Result of [`execute`].
#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub summary: Option<RunSummary>,
    pub n_data: usize,
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(e.to_string()))
}

/// Runs `command` with `cfg`, writing every artifact under
/// `cfg.output.dir` together with `manifest.toml`.
pub fn execute(command: Command, cfg: &RunConfig, data_path: Option<&Path>) -> Result<RunReport> {
    cfg.validate()?;
    let dir = cfg.output.dir.clone();
    let scene = Scene::build(cfg)?;
    let data_path = match data_path {
        Some(p) if command != Command::Simulate => Some(std::path::absolute(p)?),
        _ => None,
    };
    let data = match &data_path {
        Some(p) => DataSet::load(p)?,
        None => synthesize(cfg, &scene)?,
    };
    let mut outputs = BTreeMap::new();
    let mut put = |role: &str, name: &str, text: &str| -> Result<()> {
        let path = dir.join(name);
        write_text(&path, text)?;
        outputs.insert(role.to_string(), path);
        Ok(())
    };
    put("data", "data.txt", &data.to_text())?;
    put("truth", "truth.grid", &Grid::from_model(&scene.mesh, &scene.truth)?.to_text())?;
    let (method, summary) = match command {
        Command::Simulate => {
            put("survey", "survey.txt", &data.survey.to_text())?;
            (None, None)
        }
        Command::InvertDip => {
            let (run, summary) = invert_dip(cfg, &scene, &data)?;
            put("checkpoint", "checkpoint.toml", &checkpoint_to_string(&run.stage1.params, &run.latent)?)?;
            put("trace", "trace.txt", &run.trace.to_text())?;
            put("model", "model.grid", &Grid::from_model(&scene.mesh, &run.trace.final_model)?.to_text())?;
            put("summary", "summary.toml", &to_toml(&summary)?)?;
            (Some(Method::Dip), Some(summary))
        }
        Command::InvertConv => {
            let (trace, summary) = invert_conv(cfg, &scene, &data)?;
            put("trace", "trace.txt", &trace.to_text())?;
            put("model", "model.grid", &Grid::from_model(&scene.mesh, &trace.final_model)?.to_text())?;
            put("summary", "summary.toml", &to_toml(&summary)?)?;
            (Some(Method::Conventional), Some(summary))
        }
    };
    let manifest = RunManifest {
        format: MANIFEST_FORMAT.into(),
        command,
        method,
        scenario: scene.spec.scene.name.clone(),
        data: data_path,
        seeds: Seeds { noise: cfg.noise.seed, dip: cfg.dip.rng_seed, conv: cfg.conv.gauss_newton.seed },
        outputs,
        config: cfg.clone(),
    };
    let manifest_path = dir.join("manifest.toml");
    write_text(&manifest_path, &manifest.to_toml()?)?;
    Ok(RunReport { manifest, manifest_path, summary, n_data: data.values.len() })
}

/// Reruns a recorded command into `out`, or into `replay/` beside the
/// original outputs.
pub fn replay(manifest_path: &Path, out: Option<&Path>) -> Result<RunReport> {
    let manifest = RunManifest::load(manifest_path)?;
    let mut cfg = manifest.config.clone();
    cfg.output.dir = match out {
        Some(o) => o.to_path_buf(),
        None => cfg.output.dir.join("replay"),
    };
    execute(manifest.command, &cfg, manifest.data.as_deref())
}
