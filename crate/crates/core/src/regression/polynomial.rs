use nalgebra::DMatrix;

use super::{check_inputs, distinct_count, FitError, ModelKind, RegressionModel};
use crate::linalg::weighted_least_squares;

/// Weighted least-squares polynomial fit of `y` on `x`.
///
/// Solved on the Vandermonde design with per-column max-abs scaling and
/// Householder QR; coefficients are returned in the monomial basis of `x`.
pub fn fit_polynomial(x: &[f64], y: &[f64], degree: u8, weights: &[f64]) -> Result<RegressionModel, FitError> {
    if !(1..=3).contains(&degree) {
        return Err(FitError::UnsupportedDegree(degree));
    }
    check_inputs(x, y, weights)?;
    let coefficients = usize::from(degree) + 1;
    if x.len() < coefficients + 1 {
        return Err(FitError::TooFewPoints { needed: coefficients + 1, got: x.len() });
    }
    let distinct = distinct_count(x, weights);
    if distinct < coefficients {
        return Err(FitError::RankDeficient { distinct, coefficients });
    }
    let design = DMatrix::from_fn(x.len(), coefficients, |i, j| x[i].powi(j as i32));
    let beta = weighted_least_squares(&design, y, weights).ok_or(FitError::RankDeficient { distinct, coefficients })?;
    RegressionModel::new(ModelKind::Polynomial { degree }, beta.iter().copied().collect(), "")
}
