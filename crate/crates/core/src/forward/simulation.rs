//! DC resistivity simulation `F(m)` and its sensitivity products.
//!
//! For source `s` the potential solves `A(σ) u_s = q_s` with `σ = exp(m)`.
//! Each datum is `(e_M − e_N)ᵀ u_s`, so with `G_s w = ∂(A u_s)/∂m · w`:
//!
//! ```text
//! J w  = −P A⁻¹ G_s w
//! Jᵀ v = −G_sᵀ A⁻¹ Pᵀ v_s      (A symmetric: one adjoint solve per source)
//! ```

use rayon::prelude::*;

use super::operator::{assemble_from_conductances, check_sigma, mesh_faces, Face};
use super::solver::{pcg, SolverOptions};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::mesh::TensorMesh2D;
use crate::survey::Survey;

/// A forward operator with Jacobian products, evaluated around cached
/// fields so that repeated `J`/`Jᵀ` products at one model reuse the forward
/// solves.
pub trait ForwardSimulation: Sync {
    type Fields: Send + Sync;

    fn n_model(&self) -> usize;
    fn n_data(&self) -> usize;

    fn fields(&self, m: &[f64]) -> Result<Self::Fields>;
    fn dpred(&self, fields: &Self::Fields) -> Vec<f64>;
    fn j_vec(&self, fields: &Self::Fields, w: &[f64]) -> Result<Vec<f64>>;
    fn jt_vec(&self, fields: &Self::Fields, v: &[f64]) -> Result<Vec<f64>>;

    fn predict(&self, m: &[f64]) -> Result<Vec<f64>> {
        let f = self.fields(m)?;
        Ok(self.dpred(&f))
    }
}

/// Sparse weights that spread an electrode over the surface cell(s) under it.
/// An electrode on a cell edge is split evenly between the two cells.
pub fn electrode_weights(mesh: &TensorMesh2D, x: f64) -> Result<Vec<(usize, f64)>> {
    let edges = mesh.x_edges();
    let nx = mesh.nx();
    let tol = 1e-9 * mesh.total_width().max(1.0);
    if x <= edges[0] + tol || x >= edges[nx] - tol {
        return Err(Error::invalid(format!(
            "electrode at x={x} lies outside the mesh interior [{}, {}]",
            edges[0], edges[nx]
        )));
    }
    if let Some(k) = mesh.x_edge_index(x, tol) {
        return Ok(vec![(k - 1, 0.5), (k, 0.5)]);
    }
    let ix = edges.windows(2).position(|w| w[0] <= x && x < w[1]).unwrap();
    Ok(vec![(ix, 1.0)])
}

#[derive(Debug, Clone)]
pub struct DcSimulation {
    pub mesh: TensorMesh2D,
    pub survey: Survey,
    pub solver: SolverOptions,
    faces: Vec<Face>,
    electrodes: Vec<Vec<(usize, f64)>>,
}

/// Forward state at one model: operator, conductances and per-source
/// potentials.
#[derive(Debug, Clone)]
pub struct DcFields {
    pub sigma: Vec<f64>,
    pub operator: CsrMatrix,
    conductance: Vec<f64>,
    pub potentials: Vec<Vec<f64>>,
}

impl DcSimulation {
    pub fn new(mesh: TensorMesh2D, survey: Survey) -> Result<Self> {
        let electrodes = survey
            .electrodes
            .iter()
            .map(|&x| electrode_weights(&mesh, x))
            .collect::<Result<Vec<_>>>()?;
        let faces = mesh_faces(&mesh);
        Ok(Self {
            mesh,
            survey,
            solver: SolverOptions::default(),
            faces,
            electrodes,
        })
    }

    pub fn with_solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    fn dipole_vector(&self, p: usize, q: usize, scale: f64, out: &mut [f64]) {
        for &(c, w) in &self.electrodes[p] {
            out[c] += scale * w;
        }
        for &(c, w) in &self.electrodes[q] {
            out[c] -= scale * w;
        }
    }

    fn dipole_reading(&self, p: usize, q: usize, u: &[f64]) -> f64 {
        let read = |e: usize| -> f64 { self.electrodes[e].iter().map(|&(c, w)| w * u[c]).sum() };
        read(p) - read(q)
    }

    /// Offsets of each source's block within the data vector.
    fn data_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.survey.n_sources() + 1);
        let mut acc = 0;
        off.push(0);
        for rx in &self.survey.receivers {
            acc += rx.len();
            off.push(acc);
        }
        off
    }

    /// `G(u) w`: derivative of `A(exp(m)) u` along `w`.
    fn dau_dm(&self, f: &DcFields, u: &[f64], w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for (face, &g) in self.faces.iter().zip(&f.conductance) {
            let (dga, dgb) = face.dconductance_dm(&f.sigma, g);
            match face.b {
                Some(b) => {
                    let dg = dga * w[face.a] + dgb * w[b];
                    let flux = dg * (u[face.a] - u[b]);
                    out[face.a] += flux;
                    out[b] -= flux;
                }
                None => out[face.a] += dga * w[face.a] * u[face.a],
            }
        }
        out
    }

    /// Accumulates `scale · G(u)ᵀ λ` into `out`.
    fn dau_dm_t(&self, f: &DcFields, u: &[f64], lambda: &[f64], scale: f64, out: &mut [f64]) {
        for (face, &g) in self.faces.iter().zip(&f.conductance) {
            let (dga, dgb) = face.dconductance_dm(&f.sigma, g);
            match face.b {
                Some(b) => {
                    let prod = scale * (u[face.a] - u[b]) * (lambda[face.a] - lambda[b]);
                    out[face.a] += dga * prod;
                    out[b] += dgb * prod;
                }
                None => out[face.a] += scale * dga * u[face.a] * lambda[face.a],
            }
        }
    }

    fn check_model(&self, m: &[f64]) -> Result<()> {
        if m.len() != self.mesh.n_cells() {
            return Err(Error::invalid(format!(
                "model has {} entries, mesh has {} cells",
                m.len(),
                self.mesh.n_cells()
            )));
        }
        if let Some(i) = m.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("model entry {i} is not finite")));
        }
        Ok(())
    }
}

impl ForwardSimulation for DcSimulation {
    type Fields = DcFields;

    fn n_model(&self) -> usize {
        self.mesh.n_cells()
    }

    fn n_data(&self) -> usize {
        self.survey.n_data()
    }

    fn fields(&self, m: &[f64]) -> Result<DcFields> {
        self.check_model(m)?;
        let sigma: Vec<f64> = m.iter().map(|v| v.exp()).collect();
        check_sigma(&sigma, self.mesh.n_cells())?;
        let conductance: Vec<f64> = self.faces.iter().map(|f| f.conductance(&sigma)).collect();
        let operator = assemble_from_conductances(self.mesh.n_cells(), &self.faces, &conductance);
        let n = self.mesh.n_cells();
        let potentials = self
            .survey
            .sources
            .par_iter()
            .map(|&(a, b)| {
                let mut q = vec![0.0; n];
                self.dipole_vector(a, b, 1.0, &mut q);
                pcg(&operator, &q, &self.solver).map(|(u, _)| u)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DcFields {
            sigma,
            operator,
            conductance,
            potentials,
        })
    }

    fn dpred(&self, f: &DcFields) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.n_data());
        for (u, rx) in f.potentials.iter().zip(&self.survey.receivers) {
            for &(mi, ni) in rx {
                d.push(self.dipole_reading(mi, ni, u));
            }
        }
        d
    }

    fn j_vec(&self, f: &DcFields, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.n_model() {
            return Err(Error::invalid(format!(
                "model-space vector has {} entries, expected {}",
                w.len(),
                self.n_model()
            )));
        }
        let blocks = f
            .potentials
            .par_iter()
            .zip(self.survey.receivers.par_iter())
            .map(|(u, rx)| {
                let rhs = self.dau_dm(f, u, w);
                let (du, _) = pcg(&f.operator, &rhs, &self.solver)?;
                Ok(rx
                    .iter()
                    .map(|&(mi, ni)| -self.dipole_reading(mi, ni, &du))
                    .collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(blocks.concat())
    }

    fn jt_vec(&self, f: &DcFields, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n_data() {
            return Err(Error::invalid(format!(
                "data-space vector has {} entries, expected {}",
                v.len(),
                self.n_data()
            )));
        }
        let n = self.n_model();
        let off = self.data_offsets();
        let parts = (0..self.survey.n_sources())
            .into_par_iter()
            .map(|s| {
                let vs = &v[off[s]..off[s + 1]];
                let mut out = vec![0.0; n];
                if vs.iter().all(|&x| x == 0.0) {
                    return Ok(out);
                }
                let mut rhs = vec![0.0; n];
                for (&(mi, ni), &val) in self.survey.receivers[s].iter().zip(vs) {
                    self.dipole_vector(mi, ni, val, &mut rhs);
                }
                let (lambda, _) = pcg(&f.operator, &rhs, &self.solver)?;
                self.dau_dm_t(f, &f.potentials[s], &lambda, -1.0, &mut out);
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = vec![0.0; n];
        for p in parts {
            for (t, x) in total.iter_mut().zip(p) {
                *t += x;
            }
        }
        Ok(total)
    }
}

/// `F(m)` for a mesh and survey.
pub fn predict(mesh: &TensorMesh2D, survey: &Survey, m: &[f64]) -> Result<Vec<f64>> {
    DcSimulation::new(mesh.clone(), survey.clone())?.predict(m)
}

/// `J(m) w`.
pub fn j_vec(mesh: &TensorMesh2D, survey: &Survey, m: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let sim = DcSimulation::new(mesh.clone(), survey.clone())?;
    let f = sim.fields(m)?;
    sim.j_vec(&f, w)
}

/// `J(m)ᵀ v` by the adjoint-state method.
pub fn jt_vec(mesh: &TensorMesh2D, survey: &Survey, m: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let sim = DcSimulation::new(mesh.clone(), survey.clone())?;
    let f = sim.fields(m)?;
    sim.jt_vec(&f, v)
}
