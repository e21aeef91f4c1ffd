//! Rectilinear 2D tensor mesh (x lateral, z depth) with a uniform core and
//! geometrically expanding padding on both lateral sides and at the bottom.
//!
//! Depth is measured positive downward from the surface at z = 0. Cells are
//! flattened row-major with rows = depth slices, row 0 the shallowest; every
//! model-space vector in this crate uses that ordering (see [`GridIndexMap`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flattening rule between `(ix, iz)` grid coordinates and the model vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridIndexMap {
    pub nx: usize,
    pub nz: usize,
}

impl GridIndexMap {
    pub fn new(nx: usize, nz: usize) -> Self {
        Self { nx, nz }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn flatten(&self, ix: usize, iz: usize) -> usize {
        debug_assert!(ix < self.nx && iz < self.nz);
        iz * self.nx + ix
    }

    #[inline]
    pub fn unflatten(&self, i: usize) -> (usize, usize) {
        debug_assert!(i < self.len());
        (i % self.nx, i / self.nx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorMesh2D {
    /// Cell widths in x, left to right (m).
    pub hx: Vec<f64>,
    /// Cell heights in z, top to bottom (m).
    pub hz: Vec<f64>,
    /// x of the left mesh edge (m).
    pub origin_x: f64,
    /// z of the top edge; always the surface.
    pub surface_z: f64,
    pub n_core_x: usize,
    pub n_core_z: usize,
    pub n_pad: usize,
    pub pad_factor: f64,
}

impl TensorMesh2D {
    /// Builds a core + padding mesh whose core region is centred on x = 0.
    pub fn build(
        n_core_x: usize,
        n_core_z: usize,
        dx: f64,
        dz: f64,
        n_pad: usize,
        factor: f64,
    ) -> Result<Self> {
        if n_core_x == 0 || n_core_z == 0 {
            return Err(Error::invalid("core cell counts must be at least 1"));
        }
        if !(dx > 0.0 && dz > 0.0) || !dx.is_finite() || !dz.is_finite() {
            return Err(Error::invalid(format!(
                "core cell sizes must be positive, got dx={dx}, dz={dz}"
            )));
        }
        if !(factor >= 1.0) || !factor.is_finite() {
            return Err(Error::invalid(format!(
                "padding factor must be >= 1, got {factor}"
            )));
        }

        let pad_x: Vec<f64> = (1..=n_pad).map(|k| dx * factor.powi(k as i32)).collect();
        let pad_z: Vec<f64> = (1..=n_pad).map(|k| dz * factor.powi(k as i32)).collect();

        let mut hx = Vec::with_capacity(n_core_x + 2 * n_pad);
        hx.extend(pad_x.iter().rev());
        hx.extend(std::iter::repeat_n(dx, n_core_x));
        hx.extend(pad_x.iter());

        let mut hz = Vec::with_capacity(n_core_z + n_pad);
        hz.extend(std::iter::repeat_n(dz, n_core_z));
        hz.extend(pad_z.iter());

        let left_pad: f64 = pad_x.iter().sum();
        let origin_x = -left_pad - 0.5 * dx * n_core_x as f64;

        Ok(Self {
            hx,
            hz,
            origin_x,
            surface_z: 0.0,
            n_core_x,
            n_core_z,
            n_pad,
            pad_factor: factor,
        })
    }

    /// Uniform mesh without padding; convenient for small test problems.
    pub fn uniform(nx: usize, nz: usize, dx: f64, dz: f64) -> Result<Self> {
        Self::build(nx, nz, dx, dz, 0, 1.0)
    }

    pub fn with_origin_x(mut self, origin_x: f64) -> Self {
        self.origin_x = origin_x;
        self
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.hx.len()
    }

    #[inline]
    pub fn nz(&self) -> usize {
        self.hz.len()
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.nx() * self.nz()
    }

    pub fn index_map(&self) -> GridIndexMap {
        GridIndexMap::new(self.nx(), self.nz())
    }

    /// (nz, nx): the spatial shape the network output is cropped to.
    pub fn shape(&self) -> (usize, usize) {
        (self.nz(), self.nx())
    }

    pub fn x_edges(&self) -> Vec<f64> {
        edges(self.origin_x, &self.hx)
    }

    /// Depths of the horizontal edges, starting at the surface.
    pub fn z_edges(&self) -> Vec<f64> {
        edges(self.surface_z, &self.hz)
    }

    /// Cell-centre x positions and depths.
    pub fn cell_centers(&self) -> (Vec<f64>, Vec<f64>) {
        (centers(self.origin_x, &self.hx), centers(self.surface_z, &self.hz))
    }

    /// Cell areas in flattened order.
    pub fn cell_volumes(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_cells());
        for &h in &self.hz {
            for &w in &self.hx {
                v.push(w * h);
            }
        }
        v
    }

    pub fn total_width(&self) -> f64 {
        self.hx.iter().sum()
    }

    pub fn total_depth(&self) -> f64 {
        self.hz.iter().sum()
    }

    /// Half-open index range of the core columns.
    pub fn core_x_range(&self) -> std::ops::Range<usize> {
        self.n_pad..self.n_pad + self.n_core_x
    }

    pub fn core_z_range(&self) -> std::ops::Range<usize> {
        0..self.n_core_z
    }

    /// Lateral extent of the core region (m).
    pub fn core_x_bounds(&self) -> (f64, f64) {
        let e = self.x_edges();
        (e[self.n_pad], e[self.n_pad + self.n_core_x])
    }

    pub fn core_depth(&self) -> f64 {
        self.hz[..self.n_core_z].iter().sum()
    }

    pub fn is_core(&self, ix: usize, iz: usize) -> bool {
        self.core_x_range().contains(&ix) && self.core_z_range().contains(&iz)
    }

    /// Flat indices of all core cells in flattened order.
    pub fn core_indices(&self) -> Vec<usize> {
        let map = self.index_map();
        let mut out = Vec::with_capacity(self.n_core_x * self.n_core_z);
        for iz in self.core_z_range() {
            for ix in self.core_x_range() {
                out.push(map.flatten(ix, iz));
            }
        }
        out
    }

    /// Index of the x-edge located at `x`, if any edge lies within `tol`.
    pub fn x_edge_index(&self, x: f64, tol: f64) -> Option<usize> {
        self.x_edges().iter().position(|&e| (e - x).abs() <= tol)
    }

    /// Summed width of the padding cells on one lateral side.
    pub fn lateral_padding_width(&self) -> f64 {
        self.hx[..self.n_pad].iter().sum()
    }
}

fn edges(origin: f64, widths: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(widths.len() + 1);
    let mut acc = origin;
    out.push(acc);
    for &w in widths {
        acc += w;
        out.push(acc);
    }
    out
}

fn centers(origin: f64, widths: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(widths.len());
    let mut acc = origin;
    for &w in widths {
        out.push(acc + 0.5 * w);
        acc += w;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_mesh_counts() {
        let mesh = TensorMesh2D::build(200, 25, 5.0, 5.0, 7, 1.5).unwrap();
        assert_eq!(mesh.nx(), 214);
        assert_eq!(mesh.nz(), 32);
        assert_eq!(mesh.n_cells(), 6848);
    }

    #[test]
    fn padding_width_is_geometric_series() {
        let mesh = TensorMesh2D::build(200, 25, 5.0, 5.0, 7, 1.5).unwrap();
        let expected = 5.0 * 1.5 * (1.5f64.powi(7) - 1.0) / 0.5;
        assert!((mesh.lateral_padding_width() - expected).abs() < 1e-9);
        assert!((expected - 241.2890625).abs() < 1e-9);
    }

    #[test]
    fn padding_expands_outward_by_factor() {
        let mesh = TensorMesh2D::build(10, 4, 5.0, 5.0, 7, 1.5).unwrap();
        for k in 0..6 {
            // left side runs outward towards index 0
            assert!((mesh.hx[k] / mesh.hx[k + 1] - 1.5).abs() < 1e-12);
            let r = mesh.hx.len() - 1 - k;
            assert!((mesh.hx[r] / mesh.hx[r - 1] - 1.5).abs() < 1e-12);
            let b = mesh.hz.len() - 1 - k;
            assert!((mesh.hz[b] / mesh.hz[b - 1] - 1.5).abs() < 1e-12);
        }
        assert_eq!(mesh.hz[0], 5.0);
    }

    #[test]
    fn tiny_uniform_mesh() {
        let mesh = TensorMesh2D::build(2, 2, 1.0, 1.0, 0, 1.0).unwrap();
        assert_eq!(mesh.hx, vec![1.0, 1.0]);
        assert_eq!(mesh.total_width(), 2.0);
        assert_eq!(mesh.n_cells(), 4);
    }

    #[test]
    fn core_is_centred_on_zero() {
        let mesh = TensorMesh2D::build(50, 12, 5.0, 5.0, 7, 1.5).unwrap();
        let (lo, hi) = mesh.core_x_bounds();
        assert!((lo + 125.0).abs() < 1e-9);
        assert!((hi - 125.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(TensorMesh2D::build(0, 2, 1.0, 1.0, 0, 1.0).is_err());
        assert!(TensorMesh2D::build(2, 2, -1.0, 1.0, 0, 1.0).is_err());
        assert!(TensorMesh2D::build(2, 2, 1.0, 0.0, 0, 1.0).is_err());
        assert!(TensorMesh2D::build(2, 2, 1.0, 1.0, 3, 0.9).is_err());
    }

    #[test]
    fn centers_from_widths() {
        assert_eq!(centers(0.0, &[1.0, 1.0]), vec![0.5, 1.5]);
        assert_eq!(centers(0.0, &[5.0, 7.5]), vec![2.5, 8.75]);
        assert_eq!(centers(-2.5, &[5.0]), vec![0.0]);
    }

    #[test]
    fn cell_centers_are_monotone() {
        let mesh = TensorMesh2D::build(8, 3, 5.0, 5.0, 4, 1.3).unwrap();
        let (xc, zc) = mesh.cell_centers();
        assert!(xc.windows(2).all(|w| w[1] > w[0]));
        assert!(zc.windows(2).all(|w| w[1] > w[0]));
        assert!((zc[0] - 2.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn unit_factor_gives_exact_width(n_core in 1usize..40, n_pad in 0usize..10, dx in 0.5f64..20.0) {
            let mesh = TensorMesh2D::build(n_core, 3, dx, 1.0, n_pad, 1.0).unwrap();
            prop_assert!(mesh.hx.iter().all(|&w| w == dx));
            prop_assert_eq!(mesh.nx(), n_core + 2 * n_pad);
            let total = (n_core + 2 * n_pad) as f64 * dx;
            prop_assert!((mesh.total_width() - total).abs() <= 1e-9 * total);
        }

        #[test]
        fn build_is_deterministic(n_core in 1usize..30, n_pad in 0usize..8, f in 1.0f64..2.0) {
            let a = TensorMesh2D::build(n_core, 5, 5.0, 5.0, n_pad, f).unwrap();
            let b = TensorMesh2D::build(n_core, 5, 5.0, 5.0, n_pad, f).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn index_map_round_trip(nx in 1usize..60, nz in 1usize..40) {
            let map = GridIndexMap::new(nx, nz);
            for i in 0..map.len() {
                let (ix, iz) = map.unflatten(i);
                prop_assert_eq!(map.flatten(ix, iz), i);
            }
        }
    }
}
