//! Run configuration, stored as TOML.
//!
//! ```toml
//! version = 1
//!
//! [mesh]        # n_core_x, n_core_z, dx, dz, n_pad, pad_factor
//! [survey]      # line_length, station_spacing, max_receivers
//! [scenario]    # name, background/target/layer sigma, layer_thickness,
//!               # [[scenario.dikes]] and [[scenario.cylinders]]
//! [noise]       # rel, seed
//! [forward]     # rtol, max_iter_factor
//! [net]         # blocks, upsampler
//! [dip]         # tau, lr, epochs_stage2, dropout_rate, rng_seed, ...
//! [conv.regularization]   # alpha_*, p_*, irls_*, sensitivity weights
//! [conv.gauss_newton]     # beta0, cooling_factor, cg_*, target_chi, ...
//! [output]      # dir
//! ```
//!
//! Every section is optional and falls back to the full-scale preset with
//! the 45° Case-1 scene.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dip::DipConfig;
use crate::error::{Error, Result};
use crate::forward::SolverOptions;
use crate::io::{read_text, write_text};
use crate::net::{ArchConfig, Upsampler};
use crate::scenarios::{MeshSpec, NoiseSpec, Preset, ScenarioSpec, SceneSpec, SurveySpec};
use crate::tikhonov::{GnConfig, RegularizationConfig};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    /// Number of upsampling blocks.
    pub blocks: usize,
    pub upsampler: Upsampler,
}

impl Default for NetSection {
    fn default() -> Self {
        Self { blocks: 3, upsampler: Upsampler::Bilinear }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvSection {
    pub regularization: RegularizationConfig,
    pub gauss_newton: GnConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Which built-in scene to paint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Case {
    One { dip: f64 },
    /// Cylinder beside a dike.
    TwoA,
    TwoB,
}

impl Case {
    pub fn parse(case: &str, dip: f64) -> Result<Self> {
        match case {
            "1" => Ok(Case::One { dip }),
            "2" | "2a" => Ok(Case::TwoA),
            "2b" => Ok(Case::TwoB),
            other => Err(Error::invalid(format!("unknown case '{other}' (expected 1, 2a or 2b)"))),
        }
    }

    pub fn scenario(self, preset: Preset) -> Result<ScenarioSpec> {
        match self {
            Case::One { dip } => ScenarioSpec::case1(preset, dip),
            Case::TwoA => ScenarioSpec::case2(preset, false),
            Case::TwoB => ScenarioSpec::case2(preset, true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub mesh: MeshSpec,
    pub survey: SurveySpec,
    pub scenario: SceneSpec,
    pub noise: NoiseSpec,
    pub forward: SolverOptions,
    pub net: NetSection,
    pub dip: DipConfig,
    pub conv: ConvSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(Preset::Full)
    }
}

impl RunConfig {
    /// Mesh, survey, and inversion settings for a preset, with the 45°
    /// Case-1 scene.
    pub fn preset(preset: Preset) -> Self {
        let spec = ScenarioSpec::case1(preset, 45.0).expect("preset scene is valid");
        let dip = match preset {
            Preset::Desk => DipConfig { tau: 200.0, lr: 1e-3, epochs_stage2: 600, dropout_rate: 0.1, ..Default::default() },
            Preset::Full => DipConfig { dropout_rate: 0.1, ..Default::default() },
        };
        let conv = ConvSection {
            regularization: RegularizationConfig {
                alpha_s: 0.005,
                alpha_x: 0.5,
                alpha_z: 0.5,
                p_s: 0.0,
                p_x: 1.0,
                p_z: 1.0,
                ..Default::default()
            },
            gauss_newton: GnConfig::default(),
        };
        Self {
            version: CONFIG_VERSION,
            mesh: spec.mesh,
            survey: spec.survey,
            scenario: spec.scene,
            noise: spec.noise,
            forward: SolverOptions::default(),
            net: NetSection::default(),
            dip,
            conv,
            output: OutputSection::default(),
        }
    }

    pub fn set_scenario(&mut self, spec: ScenarioSpec) {
        self.mesh = spec.mesh;
        self.survey = spec.survey;
        self.scenario = spec.scene;
        self.noise.rel = spec.noise.rel;
    }

    pub fn scenario_spec(&self) -> ScenarioSpec {
        ScenarioSpec {
            mesh: self.mesh.clone(),
            survey: self.survey.clone(),
            scene: self.scenario.clone(),
            noise: self.noise.clone(),
        }
    }

    /// One seed for noise, network initialisation and probing.
    pub fn set_seed(&mut self, seed: u64) {
        self.noise.seed = seed;
        self.dip.rng_seed = seed;
        self.conv.gauss_newton.seed = seed;
    }

    pub fn arch(&self) -> Result<ArchConfig> {
        let (nz, nx) = self.mesh.build()?.shape();
        ArchConfig::for_mesh(nz, nx, self.net.blocks, self.net.upsampler)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.scenario_spec().validate()?;
        self.survey.build()?;
        self.arch()?;
        self.dip.validate()?;
        self.conv.regularization.validate()?;
        self.conv.gauss_newton.validate()?;
        if !(self.forward.rtol > 0.0) || self.forward.max_iter_factor == 0 {
            return Err(Error::Config("forward solver needs rtol > 0 and max_iter_factor >= 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_text(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_toml()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_exactly() {
        for p in [Preset::Desk, Preset::Full] {
            let cfg = RunConfig::preset(p);
            cfg.validate().unwrap();
            let text = cfg.to_toml().unwrap();
            assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = RunConfig::from_toml("version = 1\n[dip]\ntau = 55.0\n").unwrap();
        assert_eq!(cfg.dip.tau, 55.0);
        assert_eq!(cfg.dip.lr, DipConfig::default().lr);
        assert_eq!(cfg.mesh, RunConfig::default().mesh);
        let cfg = RunConfig::from_toml("[net]\nupsampler = \"nearest\"\n").unwrap();
        assert_eq!(cfg.net.upsampler, Upsampler::Nearest);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(RunConfig::from_toml("version = 2\n"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("[dip]\nbogus = 1\n"), Err(Error::Config(_))));
        assert!(RunConfig::from_toml("[dip]\ntau = -1.0\n").is_err());
        assert!(RunConfig::from_toml("[net]\nupsampler = \"cubic\"\n").is_err());
        assert!(RunConfig::from_toml("[mesh]\nn_core_x = 4\n").is_err());
    }

    #[test]
    fn case_selection() {
        assert_eq!(Case::parse("1", 30.0).unwrap(), Case::One { dip: 30.0 });
        assert_eq!(Case::parse("2b", 0.0).unwrap(), Case::TwoB);
        assert!(Case::parse("3", 45.0).is_err());
        let mut cfg = RunConfig::default();
        cfg.set_scenario(Case::TwoB.scenario(Preset::Desk).unwrap());
        cfg.validate().unwrap();
        assert_eq!(cfg.scenario.cylinders.len(), 2);
    }
}
