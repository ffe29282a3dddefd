use serde::Serialize;

use super::{log_row, RatioError};
use crate::model::{Model, ParamGrid};

/// Weighted mixture over a finite grid of parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub grid: ParamGrid,
}

impl MixtureSpec {
    pub fn new(weights: Vec<f64>, grid: ParamGrid) -> Result<MixtureSpec, RatioError> {
        if weights.len() != grid.len() {
            return Err(RatioError::InvalidMixture(format!(
                "{} weights for a grid of {} points",
                weights.len(),
                grid.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(RatioError::InvalidMixture(format!(
                "weight {w} is not positive"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(RatioError::InvalidMixture(format!(
                "weights sum to {total}"
            )));
        }
        Ok(MixtureSpec { weights, grid })
    }

    /// Weights `2^-(n+1)`, rescaled to sum to one over the grid.
    pub fn default_for(grid: ParamGrid) -> MixtureSpec {
        let raw: Vec<f64> = (0..grid.len()).map(|n| 0.5f64.powi(n as i32 + 1)).collect();
        let total: f64 = raw.iter().sum();
        MixtureSpec {
            weights: raw.into_iter().map(|w| w / total).collect(),
            grid,
        }
    }

    /// Log of the mixture density at `x`.
    pub fn log_density(&self, m: &Model, x: &[f64]) -> Result<f64, RatioError> {
        let row = log_row(m, &self.grid, x)?;
        Ok(self.mix_logs(&row))
    }

    fn mix_logs(&self, row: &[f64]) -> f64 {
        let terms: Vec<f64> = row
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| l + w.ln())
            .collect();
        log_sum_exp(&terms)
    }
}

/// `ln(sum(exp(v)))` without overflow. Empty or all `-inf` gives `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    top + values.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}

/// `ln g_n(x)` for each grid point, with `g_n = f_n / f` and `f` the mixture
/// density. Where `f(x) = 0` every `f_n(x)` is zero too, so `g_n = f_n = 0`.
pub fn canonical_log_statistic(
    m: &Model,
    mix: &MixtureSpec,
    x: &[f64],
) -> Result<Vec<f64>, RatioError> {
    mix.grid.check_dim(m.param_dim())?;
    let row = log_row(m, &mix.grid, x)?;
    let lf = mix.mix_logs(&row);
    if lf == f64::NEG_INFINITY {
        return Ok(row);
    }
    Ok(row.into_iter().map(|l| l - lf).collect())
}

pub fn canonical_statistic(
    m: &Model,
    mix: &MixtureSpec,
    x: &[f64],
) -> Result<Vec<f64>, RatioError> {
    Ok(canonical_log_statistic(m, mix, x)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// Compares two log canonical vectors: same zero entries, and the finite
/// entries agree within `tol` in log scale.
pub fn canonical_equal(log_a: &[f64], log_b: &[f64], tol: f64) -> bool {
    log_a.len() == log_b.len()
        && log_a.iter().zip(log_b).all(|(&a, &b)| {
            if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
                a == b
            } else {
                (a - b).abs() <= tol
            }
        })
}
