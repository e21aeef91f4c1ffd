//! Synthetic conductivity scenes, the mesh/survey presets they live on, and
//! noise injection.
//!
//! Target geometry (layer thickness, dike width, cylinder radii and
//! positions) is not given numerically anywhere; the defaults below are
//! estimates read off the published figures.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TensorMesh2D;
use crate::survey::{build_dipole_dipole_survey, Survey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 50×12 core cells and a 200 m line; runs in minutes.
    Desk,
    /// 200×25 core cells and the 700 m, 348-datum line.
    Full,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            other => Err(Error::invalid(format!("unknown preset '{other}' (expected desk or full)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub n_core_x: usize,
    pub n_core_z: usize,
    pub dx: f64,
    pub dz: f64,
    pub n_pad: usize,
    pub pad_factor: f64,
}

impl MeshSpec {
    pub fn preset(p: Preset) -> Self {
        let (n_core_x, n_core_z) = match p {
            Preset::Desk => (50, 12),
            Preset::Full => (200, 25),
        };
        Self { n_core_x, n_core_z, dx: 5.0, dz: 5.0, n_pad: 7, pad_factor: 1.5 }
    }

    pub fn build(&self) -> Result<TensorMesh2D> {
        TensorMesh2D::build(self.n_core_x, self.n_core_z, self.dx, self.dz, self.n_pad, self.pad_factor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveySpec {
    pub line_length: f64,
    pub station_spacing: f64,
    pub max_receivers: usize,
}

impl SurveySpec {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Desk => Self { line_length: 200.0, station_spacing: 10.0, max_receivers: 24 },
            Preset::Full => Self { line_length: 700.0, station_spacing: 25.0, max_receivers: 24 },
        }
    }

    /// The line, centred on x = 0 like the mesh core.
    pub fn build(&self) -> Result<Survey> {
        Ok(build_dipole_dipole_survey(self.line_length, self.station_spacing, self.max_receivers)?.centered())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Standard deviation as a fraction of |d|.
    pub rel: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { rel: 0.05, seed: 0 }
    }
}

/// Dipping tabular body. Its horizontal width is held fixed so the painted
/// area does not depend on the dip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dike {
    pub dip: f64,
    pub width: f64,
    /// Horizontal position of the dike centre line at mid-depth.
    pub x_mid: f64,
    pub top: f64,
    pub bottom: f64,
}

impl Dike {
    fn centre_at(&self, z: f64) -> f64 {
        if self.dip == 90.0 {
            return self.x_mid;
        }
        let mid = 0.5 * (self.top + self.bottom);
        self.x_mid + (z - mid) / self.dip.to_radians().tan()
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        z >= self.top && z <= self.bottom && (x - self.centre_at(z)).abs() <= 0.5 * self.width
    }

    fn x_extent(&self) -> (f64, f64) {
        let a = self.centre_at(self.top);
        let b = self.centre_at(self.bottom);
        (a.min(b) - 0.5 * self.width, a.max(b) + 0.5 * self.width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cylinder {
    pub x: f64,
    pub z: f64,
    pub radius: f64,
}

impl Cylinder {
    pub fn contains(&self, x: f64, z: f64) -> bool {
        (x - self.x).powi(2) + (z - self.z).powi(2) <= self.radius * self.radius
    }
}

/// Conductivities (S/m) and target geometry (m, depth positive down).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub name: String,
    pub background_sigma: f64,
    pub target_sigma: f64,
    pub layer_sigma: f64,
    /// Zero for no surface layer.
    pub layer_thickness: f64,
    #[serde(default)]
    pub dikes: Vec<Dike>,
    #[serde(default)]
    pub cylinders: Vec<Cylinder>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub mesh: MeshSpec,
    pub survey: SurveySpec,
    pub scene: SceneSpec,
    pub noise: NoiseSpec,
}

/// 25 m wide, from below the 20 m layer to one cell above the core bottom.
fn default_dike(p: Preset, dip: f64, x_mid: f64) -> Dike {
    let mesh = MeshSpec::preset(p);
    Dike {
        dip,
        width: 25.0,
        x_mid,
        top: 20.0,
        bottom: mesh.n_core_z as f64 * mesh.dz - mesh.dz,
    }
}

impl ScenarioSpec {
    /// Layer over a dipping dike.
    pub fn case1(preset: Preset, dip: f64) -> Result<Self> {
        if !(dip > 0.0 && dip <= 90.0) {
            return Err(Error::invalid(format!("dip must be in (0, 90] degrees, got {dip}")));
        }
        let spec = Self {
            mesh: MeshSpec::preset(preset),
            survey: SurveySpec::preset(preset),
            scene: SceneSpec {
                name: format!("case1-dip{dip}"),
                background_sigma: 0.01,
                target_sigma: 0.1,
                layer_sigma: 0.02,
                layer_thickness: 20.0,
                dikes: vec![default_dike(preset, dip, 0.0)],
                cylinders: vec![],
            },
            noise: NoiseSpec::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Variant A: a cylinder beside a 45° dike. Variant B: two cylinders.
    pub fn case2(preset: Preset, two_cylinders: bool) -> Result<Self> {
        let (radius, depth, offset) = match preset {
            Preset::Desk => (12.5, 30.0, 75.0),
            Preset::Full => (25.0, 60.0, 150.0),
        };
        let left = Cylinder { x: -offset, z: depth, radius };
        let (dikes, cylinders, name) = if two_cylinders {
            (vec![], vec![left, Cylinder { x: offset, z: depth, radius }], "case2-two-cylinders")
        } else {
            (vec![default_dike(preset, 45.0, offset)], vec![left], "case2-cylinder-dike")
        };
        let spec = Self {
            mesh: MeshSpec::preset(preset),
            survey: SurveySpec::preset(preset),
            scene: SceneSpec {
                name: name.to_string(),
                background_sigma: 0.01,
                target_sigma: 0.1,
                layer_sigma: 0.01,
                layer_thickness: 0.0,
                dikes,
                cylinders,
            },
            noise: NoiseSpec::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let sc = &self.scene;
        for (what, v) in [
            ("background_sigma", sc.background_sigma),
            ("target_sigma", sc.target_sigma),
            ("layer_sigma", sc.layer_sigma),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{what} must be positive, got {v}")));
            }
        }
        if !(self.noise.rel >= 0.0) {
            return Err(Error::invalid(format!("noise fraction must be >= 0, got {}", self.noise.rel)));
        }
        let mesh = self.mesh.build()?;
        let (x0, x1) = mesh.core_x_bounds();
        let depth = mesh.core_depth();
        if !(sc.layer_thickness >= 0.0 && sc.layer_thickness <= depth) {
            return Err(Error::invalid(format!(
                "layer thickness {} outside the core depth {depth}",
                sc.layer_thickness
            )));
        }
        for d in &sc.dikes {
            if !(d.dip > 0.0 && d.dip <= 90.0) {
                return Err(Error::invalid(format!("dip must be in (0, 90] degrees, got {}", d.dip)));
            }
            let (a, b) = d.x_extent();
            if !(d.width > 0.0) || d.top < 0.0 || d.bottom > depth || d.top >= d.bottom || a < x0 || b > x1 {
                return Err(Error::invalid(format!(
                    "dike spanning x {a:.1}..{b:.1}, depth {}..{} lies outside the core mesh",
                    d.top, d.bottom
                )));
            }
        }
        for c in &sc.cylinders {
            if !(c.radius > 0.0)
                || c.x - c.radius < x0
                || c.x + c.radius > x1
                || c.z - c.radius < 0.0
                || c.z + c.radius > depth
            {
                return Err(Error::invalid(format!(
                    "cylinder at ({}, {}) with radius {} lies outside the core mesh",
                    c.x, c.z, c.radius
                )));
            }
        }
        Ok(())
    }

    /// Log-conductivity model, each cell painted by where its centre falls.
    pub fn paint(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let mesh = self.mesh.build()?;
        let (xs, zs) = mesh.cell_centers();
        let sc = &self.scene;
        let mut m = Vec::with_capacity(mesh.n_cells());
        for &z in &zs {
            for &x in &xs {
                let sigma = if sc.dikes.iter().any(|d| d.contains(x, z))
                    || sc.cylinders.iter().any(|c| c.contains(x, z))
                {
                    sc.target_sigma
                } else if z < sc.layer_thickness {
                    sc.layer_sigma
                } else {
                    sc.background_sigma
                };
                m.push(sigma.ln());
            }
        }
        Ok(m)
    }

    /// Uniform half-space at the background conductivity.
    pub fn half_space(&self) -> Result<Vec<f64>> {
        let n = self.mesh.build()?.n_cells();
        Ok(vec![self.scene.background_sigma.ln(); n])
    }
}

pub fn build_case1(preset: Preset, dip: f64) -> Result<(ScenarioSpec, Vec<f64>)> {
    let spec = ScenarioSpec::case1(preset, dip)?;
    let m = spec.paint()?;
    Ok((spec, m))
}

pub fn build_case2(preset: Preset, two_cylinders: bool) -> Result<(ScenarioSpec, Vec<f64>)> {
    let spec = ScenarioSpec::case2(preset, two_cylinders)?;
    let m = spec.paint()?;
    Ok((spec, m))
}

/// Adds seeded Gaussian noise with std `rel·|d_i|`; returns the noisy data
/// and the std of every datum.
pub fn add_noise(d: &[f64], rel: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(rel >= 0.0) || !rel.is_finite() {
        return Err(Error::invalid(format!("noise fraction must be >= 0, got {rel}")));
    }
    let std: Vec<f64> = d.iter().map(|v| rel * v.abs()).collect();
    if rel == 0.0 {
        return Ok((d.to_vec(), std));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = d
        .iter()
        .zip(&std)
        .map(|(v, s)| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v + s * e
        })
        .collect();
    Ok((noisy, std))
}
