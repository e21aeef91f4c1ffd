//! Model comparison statistics.

use crate::mesh::TensorMesh2D;

/// Pearson correlation; zero when either input has no variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if n == 0 || constant(&a[..n]) || constant(&b[..n]) {
        return 0.0;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n as f64).sqrt()
}

/// Restricts a full-mesh model to the core cells (row-major over the core).
pub fn core_values(mesh: &TensorMesh2D, m: &[f64]) -> Vec<f64> {
    mesh.core_indices().into_iter().map(|i| m[i]).collect()
}

/// Mean absolute difference between neighbouring core cells, horizontally
/// and vertically.
pub fn mean_abs_gradient(mesh: &TensorMesh2D, m: &[f64]) -> f64 {
    let nx = mesh.nx();
    let (xr, zr) = (mesh.core_x_range(), mesh.core_z_range());
    let (x0, x1, z0, z1) = (xr.start, xr.end, zr.start, zr.end);
    let mut sum = 0.0;
    let mut count = 0usize;
    for iz in z0..z1 {
        for ix in x0..x1 {
            let k = iz * nx + ix;
            if ix + 1 < x1 {
                sum += (m[k + 1] - m[k]).abs();
                count += 1;
            }
            if iz + 1 < z1 {
                sum += (m[k + nx] - m[k]).abs();
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_values() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 5.0]), 0.0);
    }

    #[test]
    fn rmse_values() {
        assert_eq!(rmse(&[1.0, 1.0], &[1.0, 1.0]), 0.0);
        assert_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]), (12.5f64).sqrt());
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let mesh = TensorMesh2D::build(4, 3, 1.0, 1.0, 2, 1.5).unwrap();
        assert_eq!(mean_abs_gradient(&mesh, &vec![2.0; mesh.n_cells()]), 0.0);
        let ramp: Vec<f64> = (0..mesh.n_cells()).map(|k| (k % mesh.nx()) as f64).collect();
        // horizontal steps 1, vertical steps 0; 3x3 of each in a 4x3 core
        assert!((mean_abs_gradient(&mesh, &ramp) - 9.0 / 17.0).abs() < 1e-15);
    }
}
