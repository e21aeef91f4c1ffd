//! Cell-centred finite-volume discretization of −∇·σ∇ on a tensor mesh.
//!
//! The operator is assembled in cell-integrated form, so it is symmetric and
//! the right-hand side of a point electrode carries the injected current
//! itself. Boundary conditions: zero flux through the surface, φ = 0 on the
//! left, right and bottom mesh faces.

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::mesh::TensorMesh2D;

/// A face shared by cell `a` and cell `b`, or a Dirichlet boundary face of
/// cell `a` when `b` is `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub a: usize,
    pub b: Option<usize>,
    /// Face length (m).
    pub length: f64,
    /// Distance from the centre of `a` to the face.
    pub da: f64,
    /// Distance from the centre of `b` to the face (0 on the boundary).
    pub db: f64,
}

impl Face {
    /// Distance-weighted harmonic conductance `L / (da/σa + db/σb)`.
    #[inline]
    pub fn conductance(&self, sigma: &[f64]) -> f64 {
        match self.b {
            Some(b) => self.length / (self.da / sigma[self.a] + self.db / sigma[b]),
            None => self.length * sigma[self.a] / self.da,
        }
    }

    /// Derivatives of the conductance with respect to log-conductivity of
    /// `a` and `b`.
    #[inline]
    pub fn dconductance_dm(&self, sigma: &[f64], g: f64) -> (f64, f64) {
        match self.b {
            Some(b) => (
                g * g * self.da / (self.length * sigma[self.a]),
                g * g * self.db / (self.length * sigma[b]),
            ),
            None => (g, 0.0),
        }
    }
}

/// Enumerates every conducting face of the mesh in a fixed order.
pub fn mesh_faces(mesh: &TensorMesh2D) -> Vec<Face> {
    let (nx, nz) = (mesh.nx(), mesh.nz());
    let map = mesh.index_map();
    let mut faces = Vec::with_capacity(2 * nx * nz + nx + 2 * nz);
    for iz in 0..nz {
        let hz = mesh.hz[iz];
        // left Dirichlet face
        faces.push(Face {
            a: map.flatten(0, iz),
            b: None,
            length: hz,
            da: 0.5 * mesh.hx[0],
            db: 0.0,
        });
        for ix in 0..nx - 1 {
            faces.push(Face {
                a: map.flatten(ix, iz),
                b: Some(map.flatten(ix + 1, iz)),
                length: hz,
                da: 0.5 * mesh.hx[ix],
                db: 0.5 * mesh.hx[ix + 1],
            });
        }
        faces.push(Face {
            a: map.flatten(nx - 1, iz),
            b: None,
            length: hz,
            da: 0.5 * mesh.hx[nx - 1],
            db: 0.0,
        });
    }
    for ix in 0..nx {
        let hx = mesh.hx[ix];
        for iz in 0..nz - 1 {
            faces.push(Face {
                a: map.flatten(ix, iz),
                b: Some(map.flatten(ix, iz + 1)),
                length: hx,
                da: 0.5 * mesh.hz[iz],
                db: 0.5 * mesh.hz[iz + 1],
            });
        }
        faces.push(Face {
            a: map.flatten(ix, nz - 1),
            b: None,
            length: hx,
            da: 0.5 * mesh.hz[nz - 1],
            db: 0.0,
        });
    }
    faces
}

pub(crate) fn check_sigma(sigma: &[f64], n: usize) -> Result<()> {
    if sigma.len() != n {
        return Err(Error::invalid(format!(
            "conductivity has {} entries, mesh has {n} cells",
            sigma.len()
        )));
    }
    if let Some((i, s)) = sigma.iter().enumerate().find(|(_, s)| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::invalid(format!(
            "conductivity must be positive and finite, cell {i} has {s}"
        )));
    }
    Ok(())
}

/// Assembles the operator from precomputed face conductances.
pub fn assemble_from_conductances(n_cells: usize, faces: &[Face], g: &[f64]) -> CsrMatrix {
    let mut t = Vec::with_capacity(4 * faces.len());
    for (f, &gf) in faces.iter().zip(g) {
        t.push((f.a, f.a, gf));
        if let Some(b) = f.b {
            t.push((b, b, gf));
            t.push((f.a, b, -gf));
            t.push((b, f.a, -gf));
        }
    }
    CsrMatrix::from_triplets(n_cells, n_cells, &t)
}

/// Assembles `A(σ)` for conductivity `sigma` (S/m) per cell.
pub fn assemble_system(mesh: &TensorMesh2D, sigma: &[f64]) -> Result<CsrMatrix> {
    check_sigma(sigma, mesh.n_cells())?;
    let faces = mesh_faces(mesh);
    let g: Vec<f64> = faces.iter().map(|f| f.conductance(sigma)).collect();
    Ok(assemble_from_conductances(mesh.n_cells(), &faces, &g))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_interior_conductance_equals_sigma() {
        let mesh = TensorMesh2D::uniform(2, 1, 1.0, 1.0).unwrap();
        let faces = mesh_faces(&mesh);
        let interior: Vec<_> = faces.iter().filter(|f| f.b.is_some()).collect();
        assert_eq!(interior.len(), 1);
        assert!((interior[0].conductance(&[0.3, 0.3]) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn harmonic_mean_of_contrasting_cells() {
        let mesh = TensorMesh2D::uniform(2, 1, 1.0, 1.0).unwrap();
        let f = mesh_faces(&mesh).into_iter().find(|f| f.b.is_some()).unwrap();
        assert!((f.conductance(&[1.0, 3.0]) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn single_cell_operator() {
        let mesh = TensorMesh2D::uniform(1, 1, 1.0, 1.0).unwrap();
        let a = assemble_system(&mesh, &[1.0]).unwrap();
        // three Dirichlet faces at half a cell each, no flux through the top
        assert_eq!(a.to_dense(), vec![vec![6.0]]);
    }

    #[test]
    fn rejects_nonpositive_sigma() {
        let mesh = TensorMesh2D::uniform(2, 1, 1.0, 1.0).unwrap();
        assert!(assemble_system(&mesh, &[1.0, 0.0]).is_err());
        assert!(assemble_system(&mesh, &[1.0, -2.0]).is_err());
        assert!(assemble_system(&mesh, &[1.0]).is_err());
    }

    #[test]
    fn operator_is_symmetric_positive_definite() {
        let mesh = TensorMesh2D::uniform(3, 3, 1.0, 1.0).unwrap();
        let a = assemble_system(&mesh, &[0.5; 9]).unwrap();
        assert_eq!(a.max_asymmetry(), 0.0);
        let dense = nalgebra::DMatrix::from_fn(9, 9, |i, j| a.get(i, j));
        let eig = dense.symmetric_eigen();
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.0, "smallest eigenvalue {min}");
    }

    #[test]
    fn conductance_derivative_matches_finite_difference() {
        let mesh = TensorMesh2D::build(3, 2, 2.0, 1.5, 1, 1.7).unwrap();
        let n = mesh.n_cells();
        let m: Vec<f64> = (0..n).map(|i| -2.0 + 0.37 * i as f64).collect();
        let sigma: Vec<f64> = m.iter().map(|v| v.exp()).collect();
        let h = 1e-6;
        for f in mesh_faces(&mesh) {
            let g = f.conductance(&sigma);
            let (da, db) = f.dconductance_dm(&sigma, g);
            let mut mp = m.clone();
            mp[f.a] += h;
            let mut mm = m.clone();
            mm[f.a] -= h;
            let sp: Vec<f64> = mp.iter().map(|v| v.exp()).collect();
            let sm: Vec<f64> = mm.iter().map(|v| v.exp()).collect();
            let fd = (f.conductance(&sp) - f.conductance(&sm)) / (2.0 * h);
            assert!((fd - da).abs() <= 1e-7 * da.abs().max(1e-12));
            if let Some(b) = f.b {
                let mut mp = m.clone();
                mp[b] += h;
                let mut mm = m.clone();
                mm[b] -= h;
                let sp: Vec<f64> = mp.iter().map(|v| v.exp()).collect();
                let sm: Vec<f64> = mm.iter().map(|v| v.exp()).collect();
                let fd = (f.conductance(&sp) - f.conductance(&sm)) / (2.0 * h);
                assert!((fd - db).abs() <= 1e-7 * db.abs());
            }
        }
    }
}
