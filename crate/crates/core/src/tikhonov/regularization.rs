use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{CsrMatrix, DataWeights, ForwardSimulation};
use crate::mesh::TensorMesh2D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularizationConfig {
    pub alpha_s: f64,
    pub alpha_x: f64,
    pub alpha_z: f64,
    pub p_s: f64,
    pub p_x: f64,
    pub p_z: f64,
    /// Lower bound on the IRLS ε.
    pub irls_epsilon: f64,
    /// ε as a fraction of the largest residual of each term.
    pub irls_relative: f64,
    pub use_sensitivity_weights: bool,
    pub sensitivity_probes: usize,
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        Self {
            alpha_s: 0.005,
            alpha_x: 0.5,
            alpha_z: 0.5,
            p_s: 2.0,
            p_x: 2.0,
            p_z: 2.0,
            irls_epsilon: 1e-4,
            irls_relative: 1e-2,
            use_sensitivity_weights: false,
            sensitivity_probes: 32,
        }
    }
}

impl RegularizationConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("alpha_s", self.alpha_s), ("alpha_x", self.alpha_x), ("alpha_z", self.alpha_z)] {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::invalid(format!("{name} must be non-negative, got {a}")));
            }
        }
        for (name, p) in [("p_s", self.p_s), ("p_x", self.p_x), ("p_z", self.p_z)] {
            if !(0.0..=2.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must lie in [0, 2], got {p}")));
            }
        }
        if !(self.irls_epsilon > 0.0) || !(self.irls_relative >= 0.0) {
            return Err(Error::invalid("IRLS epsilon must be positive"));
        }
        Ok(())
    }

    pub fn is_sparse(&self) -> bool {
        self.p_s < 2.0 || self.p_x < 2.0 || self.p_z < 2.0
    }
}

/// First differences between neighbouring cells divided by their centre
/// distance. Row order follows the flattened face order: for `dx`, faces
/// `(ix, ix+1)` row by row; for `dz`, faces `(iz, iz+1)` row by row.
#[derive(Debug, Clone)]
pub struct DifferenceOperators {
    pub dx: CsrMatrix,
    pub dz: CsrMatrix,
    /// Cells on either side of each row of `dx`.
    pub x_pairs: Vec<(usize, usize)>,
    pub z_pairs: Vec<(usize, usize)>,
}

pub fn build_difference_operators(mesh: &TensorMesh2D) -> DifferenceOperators {
    let (nx, nz) = (mesh.nx(), mesh.nz());
    let map = mesh.index_map();
    let (cx, cz) = mesh.cell_centers();
    let mut tx = Vec::new();
    let mut x_pairs = Vec::new();
    for iz in 0..nz {
        for ix in 0..nx.saturating_sub(1) {
            let (a, b) = (map.flatten(ix, iz), map.flatten(ix + 1, iz));
            let inv = 1.0 / (cx[ix + 1] - cx[ix]);
            let row = x_pairs.len();
            tx.push((row, a, -inv));
            tx.push((row, b, inv));
            x_pairs.push((a, b));
        }
    }
    let mut tz = Vec::new();
    let mut z_pairs = Vec::new();
    for iz in 0..nz.saturating_sub(1) {
        for ix in 0..nx {
            let (a, b) = (map.flatten(ix, iz), map.flatten(ix, iz + 1));
            let inv = 1.0 / (cz[iz + 1] - cz[iz]);
            let row = z_pairs.len();
            tz.push((row, a, -inv));
            tz.push((row, b, inv));
            z_pairs.push((a, b));
        }
    }
    let n = mesh.n_cells();
    DifferenceOperators {
        dx: CsrMatrix::from_triplets(x_pairs.len(), n, &tx),
        dz: CsrMatrix::from_triplets(z_pairs.len(), n, &tz),
        x_pairs,
        z_pairs,
    }
}

/// `w_i = (r_i² + ε²)^(p/2 − 1)`.
pub fn irls_weights(r: &[f64], p: f64, eps: f64) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("IRLS epsilon must be positive, got {eps}")));
    }
    if !(0.0..=2.0).contains(&p) {
        return Err(Error::invalid(format!("norm p must lie in [0, 2], got {p}")));
    }
    let e = 0.5 * p - 1.0;
    Ok(r.iter().map(|x| (x * x + eps * eps).powf(e)).collect())
}

/// Column norms of `W_d J` estimated with Rademacher probes of `Jᵀ`,
/// normalised to a maximum of one and floored at 1e-4.
pub fn sensitivity_weights<S: ForwardSimulation>(
    sim: &S,
    fields: &S::Fields,
    w: Option<&DataWeights>,
    n_probes: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_probes == 0 {
        return Err(Error::invalid("at least one sensitivity probe is needed"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; sim.n_model()];
    for _ in 0..n_probes {
        let v: Vec<f64> = (0..sim.n_data())
            .map(|i| {
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                w.map_or(s, |w| s * w.values[i])
            })
            .collect();
        for (a, g) in acc.iter_mut().zip(sim.jt_vec(fields, &v)?) {
            *a += g * g;
        }
    }
    let mut out: Vec<f64> = acc.iter().map(|a| (a / n_probes as f64).sqrt()).collect();
    let max = out.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::NumericalFailure("all sensitivities are zero".into()));
    }
    for v in &mut out {
        *v = (*v / max).max(1e-4);
    }
    Ok(out)
}

/// One regularization term `α ‖√R · W · (D m − ref)‖²`.
#[derive(Debug, Clone)]
struct Term {
    alpha: f64,
    p: f64,
    /// Fixed weights: √area times sensitivity.
    w: Vec<f64>,
    /// IRLS weights, all one for the L2 form.
    r: Vec<f64>,
}

impl Term {
    fn eff(&self, i: usize) -> f64 {
        self.w[i] * self.w[i] * self.r[i]
    }
}

/// Smallness plus x and z smoothness with frozen IRLS weights.
#[derive(Debug, Clone)]
pub struct Regularization {
    pub config: RegularizationConfig,
    pub m_ref: Vec<f64>,
    pub ops: DifferenceOperators,
    terms: [Term; 3],
}

impl Regularization {
    /// `sensitivity` multiplies the cell weights (averaged onto faces for the
    /// smoothness terms); `None` means uniform.
    pub fn new(
        mesh: &TensorMesh2D,
        config: RegularizationConfig,
        m_ref: Vec<f64>,
        sensitivity: Option<&[f64]>,
    ) -> Result<Self> {
        config.validate()?;
        let n = mesh.n_cells();
        if m_ref.len() != n {
            return Err(Error::invalid(format!(
                "reference model has {} cells, mesh has {n}",
                m_ref.len()
            )));
        }
        if let Some(s) = sensitivity {
            if s.len() != n {
                return Err(Error::invalid("sensitivity weights do not match the mesh"));
            }
        }
        let ops = build_difference_operators(mesh);
        let vol = mesh.cell_volumes();
        let sens = |i: usize| sensitivity.map_or(1.0, |s| s[i]);
        let ws: Vec<f64> = (0..n).map(|i| vol[i].sqrt() * sens(i)).collect();
        let face = |pairs: &[(usize, usize)]| -> Vec<f64> {
            pairs
                .iter()
                .map(|&(a, b)| (0.5 * (vol[a] + vol[b])).sqrt() * 0.5 * (sens(a) + sens(b)))
                .collect()
        };
        let wx = face(&ops.x_pairs);
        let wz = face(&ops.z_pairs);
        let term = |alpha, p, w: Vec<f64>| Term { alpha, p, r: vec![1.0; w.len()], w };
        let terms = [
            term(config.alpha_s, config.p_s, ws),
            term(config.alpha_x, config.p_x, wx),
            term(config.alpha_z, config.p_z, wz),
        ];
        Ok(Self { config, m_ref, ops, terms })
    }

    pub fn n_model(&self) -> usize {
        self.m_ref.len()
    }

    /// Unweighted residual of each term: `m − m_ref`, `D_x m`, `D_z m`.
    fn residuals(&self, m: &[f64]) -> [Vec<f64>; 3] {
        [
            m.iter().zip(&self.m_ref).map(|(a, b)| a - b).collect(),
            self.ops.dx.matvec(m),
            self.ops.dz.matvec(m),
        ]
    }

    fn apply_d(&self, k: usize, v: &[f64]) -> Vec<f64> {
        match k {
            0 => v.to_vec(),
            1 => self.ops.dx.matvec(v),
            _ => self.ops.dz.matvec(v),
        }
    }

    fn apply_dt(&self, k: usize, v: &[f64]) -> Vec<f64> {
        match k {
            0 => v.to_vec(),
            1 => self.ops.dx.rmatvec(v),
            _ => self.ops.dz.rmatvec(v),
        }
    }

    fn check(&self, m: &[f64]) -> Result<()> {
        if m.len() != self.n_model() {
            return Err(Error::invalid(format!(
                "model has {} cells, regularization expects {}",
                m.len(),
                self.n_model()
            )));
        }
        Ok(())
    }

    /// Value and gradient of the weighted-L2 form at the current IRLS
    /// weights.
    pub fn phi_m(&self, m: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(m)?;
        let res = self.residuals(m);
        let mut value = 0.0;
        let mut grad = vec![0.0; m.len()];
        for (k, (t, r)) in self.terms.iter().zip(&res).enumerate() {
            if t.alpha == 0.0 {
                continue;
            }
            let wr: Vec<f64> = r.iter().enumerate().map(|(i, ri)| t.eff(i) * ri).collect();
            value += t.alpha * r.iter().zip(&wr).map(|(a, b)| a * b).sum::<f64>();
            for (g, d) in grad.iter_mut().zip(self.apply_dt(k, &wr)) {
                *g += 2.0 * t.alpha * d;
            }
        }
        Ok((value, grad))
    }

    /// Gauss-Newton Hessian of [`Self::phi_m`] applied to `v`.
    pub fn hess_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (k, t) in self.terms.iter().enumerate() {
            if t.alpha == 0.0 {
                continue;
            }
            let dv = self.apply_d(k, v);
            let wdv: Vec<f64> = dv.iter().enumerate().map(|(i, x)| t.eff(i) * x).collect();
            for (o, d) in out.iter_mut().zip(self.apply_dt(k, &wdv)) {
                *o += 2.0 * t.alpha * d;
            }
        }
        out
    }

    /// Recomputes the IRLS weights at `m` for every term with `p < 2`. Each
    /// term's weights are rescaled so the term keeps its current L2 value,
    /// which keeps the misfit/regularization balance set by β.
    pub fn update_irls(&mut self, m: &[f64]) -> Result<()> {
        self.check(m)?;
        let res = self.residuals(m);
        let (floor, rel) = (self.config.irls_epsilon, self.config.irls_relative);
        for (t, r) in self.terms.iter_mut().zip(&res) {
            if t.p >= 2.0 {
                continue;
            }
            let max = r.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let eps = floor.max(rel * max);
            let new = irls_weights(r, t.p, eps)?;
            let l2: f64 = r.iter().zip(&t.w).map(|(x, w)| (w * x).powi(2)).sum();
            let lp: f64 = r.iter().zip(&t.w).zip(&new).map(|((x, w), q)| q * (w * x).powi(2)).sum();
            let scale = if l2 > 0.0 && lp > 0.0 { l2 / lp } else { 1.0 };
            t.r = new.into_iter().map(|q| q * scale).collect();
        }
        Ok(())
    }

    /// Largest eigenvalue of the regularization Hessian by power iteration.
    pub fn max_curvature(&self, iterations: usize, seed: u64) -> f64 {
        power_iteration(self.n_model(), iterations, seed, |v| Ok(self.hess_vec(v))).unwrap_or(0.0)
    }
}

/// Power iteration for the largest eigenvalue of a symmetric PSD operator.
pub(crate) fn power_iteration(
    n: usize,
    iterations: usize,
    seed: u64,
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut lambda = 0.0;
    for _ in 0..iterations.max(1) {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        v.iter_mut().for_each(|x| *x /= norm);
        let av = apply(&v)?;
        lambda = v.iter().zip(&av).map(|(a, b)| a * b).sum();
        v = av;
    }
    Ok(lambda)
}
