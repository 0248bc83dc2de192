//! Per-parameter parametric regressions of daily interruption counts.
//!
//! Two families are fitted against each weather parameter `x`:
//!
//! - polynomial of degree 1 to 3, `β0 + β1·x + … + βd·x^d`
//! - two-term exponential, `β0 + β1·exp(β2·x) + β3·exp(β4·x)`
//!
//! Each candidate is scored with SSE, R², adjusted R² and RMSE and the best
//! one per parameter (lowest RMSE) becomes that parameter's model.

mod catalog;
mod exponential;
mod metrics;
mod polynomial;
mod selection;

use serde::{Deserialize, Serialize};

pub use catalog::{fit_catalog, CandidateFit, CatalogEntry, DroppedFeature, ModelCatalog};
pub use exponential::{fit_exponential2, ExpFitOptions};
pub use metrics::{goodness_of_fit, FitReport};
pub use polynomial::fit_polynomial;
pub use selection::{select_best, ScoredCandidate, RMSE_TIE_ABS, RMSE_TIE_REL};

/// Model family and, for polynomials, the degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Polynomial { degree: u8 },
    #[serde(rename = "exponential2")]
    TwoTermExponential,
}

impl ModelKind {
    /// The four candidates fitted for every parameter, in table order.
    pub const CANDIDATES: [ModelKind; 4] = [
        ModelKind::Polynomial { degree: 1 },
        ModelKind::Polynomial { degree: 2 },
        ModelKind::Polynomial { degree: 3 },
        ModelKind::TwoTermExponential,
    ];

    pub fn coefficient_count(self) -> usize {
        match self {
            ModelKind::Polynomial { degree } => usize::from(degree) + 1,
            ModelKind::TwoTermExponential => 5,
        }
    }

    pub fn label(self) -> String {
        match self {
            ModelKind::Polynomial { degree } => format!("polynomial({degree})"),
            ModelKind::TwoTermExponential => "exponential(2)".to_string(),
        }
    }

    /// Fixed rank used as the last tie-breaker in model selection.
    pub(crate) fn order(self) -> u8 {
        match self {
            ModelKind::Polynomial { degree } => degree,
            ModelKind::TwoTermExponential => u8::MAX,
        }
    }
}

/// A fitted regression of counts on one weather parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub beta: Vec<f64>,
    pub input_name: String,
}

impl RegressionModel {
    pub fn new(kind: ModelKind, beta: Vec<f64>, input_name: impl Into<String>) -> Result<Self, FitError> {
        let model = RegressionModel { kind, beta, input_name: input_name.into() };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if let ModelKind::Polynomial { degree } = self.kind {
            if !(1..=3).contains(&degree) {
                return Err(FitError::UnsupportedDegree(degree));
            }
        }
        if self.beta.len() != self.kind.coefficient_count() {
            return Err(FitError::CoefficientCount { expected: self.kind.coefficient_count(), got: self.beta.len() });
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(FitError::NonFinite);
        }
        Ok(())
    }

    pub fn coefficient_count(&self) -> usize {
        self.beta.len()
    }

    /// Raw model value at `x`; no clamping.
    pub fn eval(&self, x: f64) -> f64 {
        let b = &self.beta;
        match self.kind {
            ModelKind::Polynomial { .. } => b.iter().rev().fold(0.0, |acc, c| acc * x + c),
            ModelKind::TwoTermExponential => b[0] + b[1] * (b[2] * x).exp() + b[3] * (b[4] * x).exp(),
        }
    }

    /// `d f / d x` at `x`.
    pub fn derivative(&self, x: f64) -> f64 {
        let b = &self.beta;
        match self.kind {
            ModelKind::Polynomial { .. } => b
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (j, c)| acc * x + j as f64 * c),
            ModelKind::TwoTermExponential => b[1] * b[2] * (b[2] * x).exp() + b[3] * b[4] * (b[4] * x).exp(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.eval(v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("length mismatch: x has {x}, y has {y}, weights have {weights}")]
    DimensionMismatch { x: usize, y: usize, weights: usize },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("design is rank deficient ({distinct} distinct x values for {coefficients} coefficients)")]
    RankDeficient { distinct: usize, coefficients: usize },
    #[error("x is constant; the model is not identifiable")]
    ConstantInput,
    #[error("weights must be finite, non-negative and not all zero")]
    InvalidWeights,
    #[error("inputs or coefficients contain non-finite values")]
    NonFinite,
    #[error("polynomial degree {0} is not supported (1..=3)")]
    UnsupportedDegree(u8),
    #[error("expected {expected} coefficients, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("no start of {starts} met the gradient tolerance within {max_iterations} iterations")]
    NonConvergence { starts: usize, max_iterations: usize },
    #[error("{n} points leave no residual degrees of freedom for {coefficients} coefficients")]
    NoResidualDof { n: usize, coefficients: usize },
    #[error("dataset has {got} records, at least {needed} are required")]
    DatasetTooSmall { needed: usize, got: usize },
}

/// Shared input checks for every fit.
pub(crate) fn check_inputs(x: &[f64], y: &[f64], weights: &[f64]) -> Result<(), FitError> {
    if x.len() != y.len() || x.len() != weights.len() {
        return Err(FitError::DimensionMismatch { x: x.len(), y: y.len(), weights: weights.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().all(|w| *w == 0.0) {
        return Err(FitError::InvalidWeights);
    }
    Ok(())
}

/// Number of distinct x values among points with positive weight.
pub(crate) fn distinct_count(x: &[f64], weights: &[f64]) -> usize {
    let mut xs: Vec<f64> = x.iter().zip(weights).filter(|(_, w)| **w > 0.0).map(|(x, _)| *x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_examples() {
        let line = RegressionModel::new(ModelKind::Polynomial { degree: 1 }, vec![1.0, 2.0], "x").unwrap();
        assert_eq!(line.predict(&[0.0, 10.0]), vec![1.0, 21.0]);
        let cubic = RegressionModel::new(ModelKind::Polynomial { degree: 3 }, vec![0.0, 0.0, 0.0, 1.0], "x").unwrap();
        assert_eq!(cubic.predict(&[2.0]), vec![8.0]);
        let flat = RegressionModel::new(ModelKind::TwoTermExponential, vec![5.0, 0.0, 1.0, 0.0, 1.0], "x").unwrap();
        assert_eq!(flat.predict(&[-3.0, 0.0, 7.5]), vec![5.0; 3]);
    }

    #[test]
    fn derivative_matches_closed_form() {
        let p = RegressionModel::new(ModelKind::Polynomial { degree: 3 }, vec![1.0, -2.0, 0.5, 0.25], "x").unwrap();
        // -2 + x + 0.75 x^2 at x = 2
        assert!((p.derivative(2.0) - 3.0).abs() < 1e-14);
        let e = RegressionModel::new(ModelKind::TwoTermExponential, vec![1.0, 2.0, 0.5, -1.0, -0.3], "x").unwrap();
        let x = 1.3_f64;
        let expected = 2.0 * 0.5 * (0.5 * x).exp() + 0.3 * (-0.3 * x).exp();
        assert!((e.derivative(x) - expected).abs() < 1e-14);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(RegressionModel::new(ModelKind::Polynomial { degree: 2 }, vec![1.0, 2.0], "x").is_err());
        assert!(RegressionModel::new(ModelKind::Polynomial { degree: 4 }, vec![0.0; 5], "x").is_err());
        assert!(RegressionModel::new(ModelKind::TwoTermExponential, vec![f64::NAN; 5], "x").is_err());
    }

    #[test]
    fn kind_json_shape() {
        let m = RegressionModel::new(ModelKind::Polynomial { degree: 2 }, vec![1.0, 2.0, 3.0], "t_max").unwrap();
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["kind"], "polynomial");
        assert_eq!(v["degree"], 2);
        let e = RegressionModel::new(ModelKind::TwoTermExponential, vec![0.0; 5], "t_max").unwrap();
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v["kind"], "exponential2");
        assert!(v.get("degree").is_none());
        let back: RegressionModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, e);
    }
}
