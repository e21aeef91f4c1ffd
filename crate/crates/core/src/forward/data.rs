//! Data weighting and misfit.

use crate::error::{Error, Result};

/// Diagonal of `W_d`: one inverse standard deviation per datum.
#[derive(Debug, Clone, PartialEq)]
pub struct DataWeights {
    pub values: Vec<f64>,
}

impl DataWeights {
    /// Weights `1/std` from per-datum standard deviations.
    pub fn from_std(std: &[f64]) -> Result<Self> {
        let values = std
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                if s > 0.0 && s.is_finite() {
                    Ok(1.0 / s)
                } else {
                    Err(Error::invalid(format!(
                        "datum {i} has non-positive standard deviation {s}"
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn std(&self) -> Vec<f64> {
        self.values.iter().map(|w| 1.0 / w).collect()
    }

    /// `WᵀW r`.
    pub fn apply_squared(&self, r: &[f64]) -> Vec<f64> {
        self.values.iter().zip(r).map(|(w, r)| w * w * r).collect()
    }
}

/// `1 / (rel·|d| + floor)` per datum.
pub fn build_data_weights(d_obs: &[f64], rel: f64, floor: f64) -> Result<DataWeights> {
    if rel < 0.0 || floor < 0.0 || !rel.is_finite() || !floor.is_finite() {
        return Err(Error::invalid(format!(
            "noise model needs rel >= 0 and floor >= 0, got {rel} and {floor}"
        )));
    }
    let std: Vec<f64> = d_obs.iter().map(|d| rel * d.abs() + floor).collect();
    if let Some(i) = std.iter().position(|&s| s == 0.0) {
        return Err(Error::invalid(format!(
            "datum {i} has zero uncertainty; set a positive floor"
        )));
    }
    DataWeights::from_std(&std)
}

/// Default noise floor: 1e-4 of the median data amplitude.
pub fn default_floor(d_obs: &[f64]) -> f64 {
    let mut a: Vec<f64> = d_obs.iter().map(|d| d.abs()).collect();
    if a.is_empty() {
        return 0.0;
    }
    a.sort_by(|x, y| x.total_cmp(y));
    let n = a.len();
    let median = if n % 2 == 1 {
        a[n / 2]
    } else {
        0.5 * (a[n / 2 - 1] + a[n / 2])
    };
    1e-4 * median
}

fn check_lengths(d_pred: &[f64], d_obs: &[f64], w: &DataWeights) -> Result<()> {
    if d_pred.len() != d_obs.len() || d_obs.len() != w.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} predicted, {} observed, {} weights",
            d_pred.len(),
            d_obs.len(),
            w.len()
        )));
    }
    Ok(())
}

/// Weighted residual `W (d_pred − d_obs)`.
pub fn weighted_residual(d_pred: &[f64], d_obs: &[f64], w: &DataWeights) -> Result<Vec<f64>> {
    check_lengths(d_pred, d_obs, w)?;
    Ok(d_pred
        .iter()
        .zip(d_obs)
        .zip(&w.values)
        .map(|((p, o), w)| w * (p - o))
        .collect())
}

/// `½‖W (d_pred − d_obs)‖²`.
pub fn phi_d(d_pred: &[f64], d_obs: &[f64], w: &DataWeights) -> Result<f64> {
    Ok(0.5 * weighted_residual(d_pred, d_obs, w)?.iter().map(|r| r * r).sum::<f64>())
}

/// Achieved misfit over the target misfit `N/2`, i.e. `‖W r‖² / N`.
pub fn chi_factor(d_pred: &[f64], d_obs: &[f64], w: &DataWeights) -> Result<f64> {
    let n = d_obs.len();
    if n == 0 {
        return Err(Error::invalid("chi factor of an empty data set"));
    }
    Ok(2.0 * phi_d(d_pred, d_obs, w)? / n as f64)
}
