//! Output-layer training by ridge-regularized least squares over a random
//! hidden layer.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Activation, FeatureSpec, MlpError, MlpNetwork};
use crate::feature::Target;
use crate::ingest::{DailyRecord, Dataset};
use crate::linalg::spd_solve_shifted;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElmConfig {
    /// Exponent of the self-adjusting ridge `λ = ‖Y‖_F^delta`.
    pub delta: f64,
    /// Norm exponents of the regularized objective. Only 2 is supported.
    pub delta1: f64,
    pub delta2: f64,
    pub seed: u64,
    pub restarts: usize,
    pub hidden_count: usize,
    /// Use this `λ` instead of `‖Y‖_F^delta`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ridge_override: Option<f64>,
}

impl Default for ElmConfig {
    fn default() -> Self {
        ElmConfig { delta: 1.0, delta1: 2.0, delta2: 2.0, seed: 0, restarts: 20, hidden_count: 10, ridge_override: None }
    }
}

impl ElmConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |msg: String| Err(MlpError::InvalidConfig(msg));
        if !(1.0..=2.0).contains(&self.delta) {
            return bad(format!("delta must lie in [1, 2], got {}", self.delta));
        }
        if self.delta1 != 2.0 || self.delta2 != 2.0 {
            return bad(format!(
                "only delta1 = delta2 = 2 has a closed-form solve, got ({}, {})",
                self.delta1, self.delta2
            ));
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1".into());
        }
        if self.hidden_count == 0 {
            return bad("hidden_count must be at least 1".into());
        }
        if let Some(l) = self.ridge_override {
            if !(l >= 0.0 && l.is_finite()) {
                return bad(format!("ridge parameter must be finite and non-negative, got {l}"));
            }
        }
        Ok(())
    }

    /// Ridge parameter for the stacked target matrix `y`.
    pub fn ridge(&self, y: &DMatrix<f64>) -> f64 {
        self.ridge_override.unwrap_or_else(|| y.norm().powf(self.delta))
    }
}

/// Train and validate MSE of one restart, or why it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub restart: usize,
    pub train_mse: Vec<f64>,
    pub validate_mse: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForecaster {
    pub feature_spec: FeatureSpec,
    pub network: MlpNetwork,
    pub config: ElmConfig,
    pub lambda: f64,
    pub chosen_restart: usize,
    pub train_mse: Vec<f64>,
    pub validate_mse: Vec<f64>,
    /// Filled in by [`TrainedForecaster::evaluate_test`].
    pub test_mse: Option<Vec<f64>>,
    pub restart_trace: Vec<RestartRecord>,
}

impl TrainedForecaster {
    /// Network output for one day, unclamped.
    pub fn forecast_raw(&self, record: &DailyRecord) -> Result<Vec<f64>, MlpError> {
        self.network.forward(&self.feature_spec.build(record)?)
    }

    /// Network output for one day, clamped at 0 (counts cannot be negative).
    pub fn forecast(&self, record: &DailyRecord) -> Result<Vec<f64>, MlpError> {
        Ok(self.forecast_raw(record)?.into_iter().map(|v| v.max(0.0)).collect())
    }

    /// Per-output MSE of the clamped forecasts on `ds`.
    pub fn evaluate(&self, ds: &Dataset) -> Result<Vec<f64>, MlpError> {
        let inputs = inputs_of(ds, &self.feature_spec)?;
        let preds = predictions(&self.network, &inputs)?;
        mse(&preds, &targets_of(ds))
    }

    pub fn evaluate_test(&mut self, test: &Dataset) -> Result<Vec<f64>, MlpError> {
        let m = self.evaluate(test)?;
        self.test_mse = Some(m.clone());
        Ok(m)
    }
}

/// Ridge solve `v = (HᵀH + λI)⁻¹ HᵀY` by Cholesky factorization.
pub fn elm_solve(h: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>, MlpError> {
    if h.nrows() != y.nrows() {
        return Err(MlpError::DimensionMismatch { expected: h.nrows(), got: y.nrows() });
    }
    if h.nrows() == 0 {
        return Err(MlpError::Empty("hidden matrix"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(MlpError::InvalidConfig(format!("ridge parameter must be finite and non-negative, got {lambda}")));
    }
    let ht = h.transpose();
    spd_solve_shifted(&(&ht * h), lambda, &(&ht * y)).ok_or(MlpError::SingularSystem)
}

/// Ridge solve with an unpenalized output bias.
///
/// Columns of `H` and `Y` are centered, `v` is solved on the centered system
/// and `b_out = mean(Y) − mean(H)·v`. This equals the solve on `H` augmented
/// with a constant-1 column whose coefficient is exempt from the ridge term.
pub fn elm_solve_with_bias(h: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<(DMatrix<f64>, Vec<f64>), MlpError> {
    if h.nrows() != y.nrows() {
        return Err(MlpError::DimensionMismatch { expected: h.nrows(), got: y.nrows() });
    }
    if h.nrows() == 0 {
        return Err(MlpError::Empty("hidden matrix"));
    }
    let h_mean = h.row_mean();
    let y_mean = y.row_mean();
    let mut hc = h.clone();
    for mut row in hc.row_iter_mut() {
        row -= &h_mean;
    }
    let mut yc = y.clone();
    for mut row in yc.row_iter_mut() {
        row -= &y_mean;
    }
    let v = elm_solve(&hc, &yc, lambda)?;
    let b = &y_mean - &h_mean * &v;
    Ok((v, b.iter().copied().collect()))
}

/// Per-output mean squared error of `predictions` against `targets` (rows are samples).
pub fn mse(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Vec<f64>, MlpError> {
    if predictions.len() != targets.len() {
        return Err(MlpError::DimensionMismatch { expected: targets.len(), got: predictions.len() });
    }
    let Some(first) = targets.first() else { return Err(MlpError::Empty("mse input")) };
    let outputs = first.len();
    let mut sums = vec![0.0; outputs];
    for (p, t) in predictions.iter().zip(targets) {
        if p.len() != outputs || t.len() != outputs {
            return Err(MlpError::DimensionMismatch { expected: outputs, got: p.len().min(t.len()) });
        }
        for o in 0..outputs {
            sums[o] += (p[o] - t[o]).powi(2);
        }
    }
    let k = targets.len() as f64;
    Ok(sums.into_iter().map(|s| s / k).collect())
}

/// Train the output layer on `train` for `cfg.restarts` random hidden layers
/// and keep the one with the lowest summed validate MSE.
///
/// Restart `r` draws its hidden weights from a ChaCha8 stream `r` of
/// `cfg.seed`, so the result does not depend on how restarts are scheduled.
pub fn elm_train(train: &Dataset, validate: &Dataset, spec: &FeatureSpec, cfg: &ElmConfig) -> Result<TrainedForecaster, MlpError> {
    cfg.validate()?;
    spec.validate()?;
    if train.is_empty() {
        return Err(MlpError::Empty("training dataset"));
    }
    if validate.is_empty() {
        return Err(MlpError::Empty("validation dataset"));
    }
    let x_train = inputs_of(train, spec)?;
    let x_val = inputs_of(validate, spec)?;
    let t_train = targets_of(train);
    let t_val = targets_of(validate);
    let y = DMatrix::from_fn(t_train.len(), Target::BOTH.len(), |k, o| t_train[k][o]);
    let lambda = cfg.ridge(&y);
    let n = spec.input_dim();

    let outcomes: Vec<Result<(MlpNetwork, RestartRecord), (usize, MlpError)>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let attempt = || -> Result<(MlpNetwork, RestartRecord), MlpError> {
                let (w, b_hidden) = draw_hidden(cfg.seed, r, cfg.hidden_count, n);
                let placeholder = vec![vec![0.0; y.ncols()]; cfg.hidden_count];
                let mut net =
                    MlpNetwork::new(w, b_hidden, placeholder, vec![0.0; y.ncols()], Activation::Sigmoid, Activation::Identity)?;
                let h = net.hidden_matrix(&x_train)?;
                let (v, b_out) = elm_solve_with_bias(&h, &y, lambda)?;
                net.v = v.row_iter().map(|row| row.iter().copied().collect()).collect();
                net.b_out = b_out;
                net.validate()?;
                let record = RestartRecord {
                    restart: r,
                    train_mse: mse(&predictions(&net, &x_train)?, &t_train)?,
                    validate_mse: mse(&predictions(&net, &x_val)?, &t_val)?,
                    error: None,
                };
                Ok((net, record))
            };
            attempt().map_err(|e| (r, e))
        })
        .collect();

    let mut trace = Vec::with_capacity(outcomes.len());
    let mut best: Option<(f64, MlpNetwork, RestartRecord)> = None;
    let mut last_error = None;
    for outcome in outcomes {
        match outcome {
            Ok((net, record)) => {
                let score: f64 = record.validate_mse.iter().sum();
                if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
                    best = Some((score, net, record.clone()));
                }
                trace.push(record);
            }
            Err((r, e)) => {
                trace.push(RestartRecord { restart: r, train_mse: vec![], validate_mse: vec![], error: Some(e.to_string()) });
                last_error = Some(e);
            }
        }
    }
    match best {
        Some((_, network, record)) => Ok(TrainedForecaster {
            feature_spec: spec.clone(),
            network,
            config: cfg.clone(),
            lambda,
            chosen_restart: record.restart,
            train_mse: record.train_mse,
            validate_mse: record.validate_mse,
            test_mse: None,
            restart_trace: trace,
        }),
        None => match last_error {
            Some(MlpError::SingularSystem) => Err(MlpError::SingularSystem),
            Some(e) => Err(MlpError::AllRestartsFailed(e.to_string())),
            None => Err(MlpError::InvalidConfig("no restarts".into())),
        },
    }
}

/// Hidden weights (`m × n`, row-major draw order) then biases, uniform in [−1, 1].
fn draw_hidden(seed: u64, restart: usize, m: usize, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    let w = (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect();
    let b = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
    (w, b)
}

fn inputs_of(ds: &Dataset, spec: &FeatureSpec) -> Result<Vec<Vec<f64>>, MlpError> {
    ds.records().iter().map(|r| spec.build(r)).collect()
}

fn targets_of(ds: &Dataset) -> Vec<Vec<f64>> {
    ds.records().iter().map(|r| Target::BOTH.iter().map(|t| r.target(*t)).collect()).collect()
}

/// Clamped forecasts for normalized inputs.
fn predictions(net: &MlpNetwork, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, MlpError> {
    inputs.iter().map(|x| Ok(net.forward(x)?.into_iter().map(|v| v.max(0.0)).collect())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system() {
        let h = DMatrix::<f64>::identity(4, 4);
        let y = DMatrix::from_row_slice(4, 2, &[1., 2., 3., 4., 5., 6., 7., 8.]);
        assert_eq!(elm_solve(&h, &y, 0.0).unwrap(), y);
    }

    #[test]
    fn singular_without_ridge() {
        let h = DMatrix::from_row_slice(3, 2, &[1., 1., 2., 2., 3., 3.]);
        let y = DMatrix::from_row_slice(3, 1, &[1., 2., 3.]);
        assert!(matches!(elm_solve(&h, &y, 0.0), Err(MlpError::SingularSystem)));
        assert!(elm_solve(&h, &y, 0.5).is_ok());
    }

    #[test]
    fn bias_variant_recovers_affine_map() {
        let h = DMatrix::from_row_slice(4, 2, &[0., 1., 1., 0., 2., 3., 5., 1.]);
        let y = DMatrix::from_fn(4, 1, |k, _| 3.0 + 2.0 * h[(k, 0)] - h[(k, 1)]);
        let (v, b) = elm_solve_with_bias(&h, &y, 0.0).unwrap();
        assert!((v[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((v[(1, 0)] + 1.0).abs() < 1e-12);
        assert!((b[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn mse_examples() {
        let t = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(mse(&t, &t).unwrap(), vec![0.0, 0.0]);
        let p: Vec<Vec<f64>> = t.iter().map(|r| vec![r[0] + 1.0, r[1] + 2.0]).collect();
        assert_eq!(mse(&p, &t).unwrap(), vec![1.0, 4.0]);
        assert!(mse(&p[..1], &t).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ElmConfig::default().validate().is_ok());
        for cfg in [
            ElmConfig { delta: 0.5, ..ElmConfig::default() },
            ElmConfig { delta1: 1.0, ..ElmConfig::default() },
            ElmConfig { restarts: 0, ..ElmConfig::default() },
            ElmConfig { ridge_override: Some(-1.0), ..ElmConfig::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(MlpError::InvalidConfig(_))));
        }
    }

    #[test]
    fn hidden_draws_are_stream_separated() {
        let (w0, _) = draw_hidden(7, 0, 3, 4);
        let (w0b, _) = draw_hidden(7, 0, 3, 4);
        let (w1, _) = draw_hidden(7, 1, 3, 4);
        assert_eq!(w0, w0b);
        assert_ne!(w0, w1);
        assert!(w0.iter().flatten().all(|v| (-1.0..=1.0).contains(v)));
    }
}
