//! Model grids as binary PPM (P6) images.
//!
//! The colour ramp interpolates linearly between five stops
//! (0 → #440154, 0.25 → #3B528B, 0.5 → #21918C, 0.75 → #5EC962,
//! 1 → #FDE725), each channel rounded to the nearest integer. Values are
//! mapped to `t = (v − vmin) / (vmax − vmin)`, clamped to [0, 1].

use crate::error::{Error, Result};
use crate::io::Grid;

const STOPS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

const OUTLINE: [u8; 3] = [255, 255, 255];

pub fn ramp(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let s = t * (STOPS.len() - 1) as f64;
    let k = (s.floor() as usize).min(STOPS.len() - 2);
    let f = s - k as f64;
    let mut rgb = [0u8; 3];
    for (c, out) in rgb.iter_mut().enumerate() {
        *out = (STOPS[k][c] + f * (STOPS[k + 1][c] - STOPS[k][c])).round() as u8;
    }
    rgb
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    /// Colour-scale bounds; the grid's own range when absent.
    pub vmin: Option<f64>,
    pub vmax: Option<f64>,
    /// Pixels per cell along each axis.
    pub scale: usize,
    /// Padding cells on the left, right and bottom; the core is outlined
    /// when this is set and `scale >= 3`.
    pub pad: Option<usize>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { vmin: None, vmax: None, scale: 1, pad: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

impl Image {
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::parse(1, "truncated PPM header"));
            }
            fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if fields[0] != "P6" || fields[3] != "255" {
            return Err(Error::parse(1, "expected a P6 image with maxval 255"));
        }
        let dim = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(1, format!("bad size {s:?}: {e}")));
        let (width, height) = (dim(&fields[1])?, dim(&fields[2])?);
        let rgb = bytes.get(pos + 1..).unwrap_or_default().to_vec();
        if rgb.len() != 3 * width * height {
            return Err(Error::parse(1, format!("expected {} pixel bytes, found {}", 3 * width * height, rgb.len())));
        }
        Ok(Self { width, height, rgb })
    }
}

pub fn render_grid(grid: &Grid, opts: &RenderOptions) -> Result<Image> {
    if opts.scale == 0 {
        return Err(Error::invalid("image scale must be at least 1"));
    }
    let lo = opts.vmin.unwrap_or_else(|| grid.values.iter().cloned().fold(f64::INFINITY, f64::min));
    let hi = opts.vmax.unwrap_or_else(|| grid.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("colour bounds must satisfy vmin <= vmax, got {lo} and {hi}")));
    }
    let s = opts.scale;
    let (width, height) = (grid.nx * s, grid.nz * s);
    let mut rgb = vec![0u8; 3 * width * height];
    for iz in 0..grid.nz {
        for ix in 0..grid.nx {
            let t = if hi > lo { (grid.at(ix, iz) - lo) / (hi - lo) } else { 0.0 };
            let c = ramp(t);
            for y in iz * s..(iz + 1) * s {
                for x in ix * s..(ix + 1) * s {
                    rgb[3 * (y * width + x)..3 * (y * width + x) + 3].copy_from_slice(&c);
                }
            }
        }
    }
    let mut img = Image { width, height, rgb };
    if let Some(pad) = opts.pad {
        if s >= 3 && grid.nx > 2 * pad && grid.nz > pad {
            outline(&mut img, pad * s, (grid.nx - pad) * s - 1, (grid.nz - pad) * s - 1);
        }
    }
    Ok(img)
}

/// Draws the left, right and bottom core edges one pixel inside the core.
fn outline(img: &mut Image, x0: usize, x1: usize, y1: usize) {
    let w = img.width;
    let mut set = |x: usize, y: usize| img.rgb[3 * (y * w + x)..3 * (y * w + x) + 3].copy_from_slice(&OUTLINE);
    for y in 0..=y1 {
        set(x0, y);
        set(x1, y);
    }
    for x in x0..=x1 {
        set(x, y1);
    }
}
