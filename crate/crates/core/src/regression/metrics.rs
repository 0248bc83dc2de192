use serde::{Deserialize, Serialize};

use super::{check_inputs, FitError, RegressionModel};

/// Goodness-of-fit summary for one fitted model.
///
/// `r_square` and `adj_r_square` are `None` when the target has zero
/// (weighted) variance, where both are undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub sse: f64,
    #[serde(rename = "r2")]
    pub r_square: Option<f64>,
    #[serde(rename = "adj_r2")]
    pub adj_r_square: Option<f64>,
    pub rmse: f64,
    /// Residual degrees of freedom: points minus fitted coefficients.
    #[serde(rename = "dof")]
    pub dof_v: usize,
}

impl FitReport {
    /// Build a report from the weighted residual (`sse`) and total (`sst`)
    /// sums of squares of `n_total` points.
    pub fn from_sums(sse: f64, sst: f64, n_total: usize, coefficients: usize) -> Result<Self, FitError> {
        if n_total <= coefficients {
            return Err(FitError::NoResidualDof { n: n_total, coefficients });
        }
        let dof_v = n_total - coefficients;
        let (r_square, adj_r_square) = if sst > 0.0 {
            // (sst − sse) / sst rather than 1 − sse / sst: exact when both are small integers
            let r2 = (sst - sse) / sst;
            let scaled_sst = sst * dof_v as f64;
            let adj = (scaled_sst - sse * (n_total - 1) as f64) / scaled_sst;
            (Some(r2), Some(adj))
        } else {
            (None, None)
        };
        Ok(FitReport { sse, r_square, adj_r_square, rmse: (sse / dof_v as f64).sqrt(), dof_v })
    }
}

/// SSE, R², adjusted R² and RMSE of `model` against `(x, y)` with per-point
/// weights. The mean in the total sum of squares is the weighted mean.
pub fn goodness_of_fit(model: &RegressionModel, x: &[f64], y: &[f64], weights: &[f64]) -> Result<FitReport, FitError> {
    check_inputs(x, y, weights)?;
    let fitted = model.predict(x);
    let (sse, sst) = sums_of_squares(y, &fitted, weights);
    FitReport::from_sums(sse, sst, y.len(), model.coefficient_count())
}

/// Weighted residual and total sums of squares.
pub(crate) fn sums_of_squares(y: &[f64], fitted: &[f64], weights: &[f64]) -> (f64, f64) {
    let w_sum: f64 = weights.iter().sum();
    let mean = y.iter().zip(weights).map(|(y, w)| w * y).sum::<f64>() / w_sum;
    let sse = y.iter().zip(fitted).zip(weights).map(|((y, f), w)| w * (y - f).powi(2)).sum();
    let sst = y.iter().zip(weights).map(|(y, w)| w * (y - mean).powi(2)).sum();
    (sse, sst)
}
