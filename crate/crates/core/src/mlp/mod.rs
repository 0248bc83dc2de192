//! Single-hidden-layer network over the hybrid input vector, trained with a
//! ridge-regularized extreme learning machine.
//!
//! For input `x` (length `n`) the network computes
//!
//! ```text
//! hidden_j = G(Σ_i w_ji·x_i + b_j)            j = 1..m
//! output_o = F(b_o + Σ_j v_jo·hidden_j)        o = 1..outputs
//! ```
//!
//! with `G` the logistic sigmoid and `F` the identity by default. Only `v` and
//! `b_out` are learned; `w` and `b_hidden` are drawn at random.

mod elm;
mod features;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::regression::FitError;

pub use elm::{elm_solve, elm_solve_with_bias, elm_train, mse, ElmConfig, RestartRecord, TrainedForecaster};
pub use features::{build_features, FeatureModel, FeatureSpec, AGGREGATE_INPUTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = self.apply(z);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MlpError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("normal equations are singular; use a positive ridge parameter")]
    SingularSystem,
    #[error("feature spec has no regression model for {0}")]
    MissingCatalogEntry(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("network contains non-finite weights")]
    NonFinite,
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("every restart failed: {0}")]
    AllRestartsFailed(String),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Weights of a single-hidden-layer network.
///
/// `w` is `m × n` (row `j` holds the input weights of hidden unit `j`) and `v`
/// is `m × outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    pub w: Vec<Vec<f64>>,
    pub b_hidden: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub b_out: Vec<f64>,
    pub g: Activation,
    pub f: Activation,
}

impl MlpNetwork {
    pub fn new(
        w: Vec<Vec<f64>>,
        b_hidden: Vec<f64>,
        v: Vec<Vec<f64>>,
        b_out: Vec<f64>,
        g: Activation,
        f: Activation,
    ) -> Result<Self, MlpError> {
        let net = MlpNetwork { w, b_hidden, v, b_out, g, f };
        net.validate()?;
        Ok(net)
    }

    /// Checks shapes (`m ≥ 1`, `n ≥ 1`, `v` has `m` rows) and finiteness.
    pub fn validate(&self) -> Result<(), MlpError> {
        let m = self.w.len();
        if m == 0 {
            return Err(MlpError::Empty("hidden layer"));
        }
        let n = self.w[0].len();
        if n == 0 {
            return Err(MlpError::Empty("input layer"));
        }
        let outputs = self.b_out.len();
        if outputs == 0 {
            return Err(MlpError::Empty("output layer"));
        }
        let shape = |expected: usize, got: usize| {
            if expected == got {
                Ok(())
            } else {
                Err(MlpError::DimensionMismatch { expected, got })
            }
        };
        for row in &self.w {
            shape(n, row.len())?;
        }
        shape(m, self.b_hidden.len())?;
        shape(m, self.v.len())?;
        for row in &self.v {
            shape(outputs, row.len())?;
        }
        let finite = self.w.iter().chain(&self.v).flatten().chain(&self.b_hidden).chain(&self.b_out).all(|x| x.is_finite());
        if !finite {
            return Err(MlpError::NonFinite);
        }
        Ok(())
    }

    pub fn input_count(&self) -> usize {
        self.w[0].len()
    }

    pub fn hidden_count(&self) -> usize {
        self.w.len()
    }

    pub fn output_count(&self) -> usize {
        self.b_out.len()
    }

    fn check_input(&self, x: &[f64]) -> Result<(), MlpError> {
        if x.len() != self.input_count() {
            return Err(MlpError::DimensionMismatch { expected: self.input_count(), got: x.len() });
        }
        Ok(())
    }

    /// Hidden pre-activations `z_j = Σ_i w_ji·x_i + b_j`.
    pub fn pre_activations(&self, x: &[f64]) -> Result<Vec<f64>, MlpError> {
        self.check_input(x)?;
        Ok(self
            .w
            .iter()
            .zip(&self.b_hidden)
            .map(|(row, b)| row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect())
    }

    /// Raw network output (no clamping).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, MlpError> {
        let hidden: Vec<f64> = self.pre_activations(x)?.into_iter().map(|z| self.g.apply(z)).collect();
        Ok((0..self.output_count())
            .map(|o| {
                let s = hidden.iter().zip(&self.v).map(|(h, v)| h * v[o]).sum::<f64>();
                self.f.apply(self.b_out[o] + s)
            })
            .collect())
    }

    /// Hidden-layer output matrix `H` (`k × m`) for `k` input rows.
    pub fn hidden_matrix(&self, inputs: &[Vec<f64>]) -> Result<DMatrix<f64>, MlpError> {
        let m = self.hidden_count();
        let mut h = DMatrix::zeros(inputs.len(), m);
        for (k, x) in inputs.iter().enumerate() {
            for (j, z) in self.pre_activations(x)?.into_iter().enumerate() {
                h[(k, j)] = self.g.apply(z);
            }
        }
        Ok(h)
    }
}

/// Free-function form of [`MlpNetwork::forward`].
pub fn forward(net: &MlpNetwork, x: &[f64]) -> Result<Vec<f64>, MlpError> {
    net.forward(x)
}

/// Free-function form of [`MlpNetwork::hidden_matrix`].
pub fn hidden_matrix(net: &MlpNetwork, inputs: &[Vec<f64>]) -> Result<DMatrix<f64>, MlpError> {
    net.hidden_matrix(inputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_net(n: usize, m: usize, outputs: usize) -> MlpNetwork {
        MlpNetwork::new(
            vec![vec![0.0; n]; m],
            vec![0.0; m],
            vec![vec![0.0; outputs]; m],
            vec![0.0; outputs],
            Activation::Sigmoid,
            Activation::Identity,
        )
        .unwrap()
    }

    #[test]
    fn zero_network_outputs_bias() {
        let mut net = zero_net(24, 10, 2);
        assert_eq!(net.forward(&[0.3; 24]).unwrap(), vec![0.0, 0.0]);
        net.b_out = vec![1.5, -2.0];
        assert_eq!(net.forward(&[0.3; 24]).unwrap(), vec![1.5, -2.0]);
    }

    #[test]
    fn constant_unit() {
        let mut net = zero_net(3, 1, 1);
        net.v = vec![vec![2.0]];
        net.b_out = vec![1.0];
        for x in [[0.0, 0.0, 0.0], [5.0, -1.0, 2.0]] {
            assert_eq!(net.forward(&x).unwrap(), vec![2.0]);
        }
    }

    #[test]
    fn hidden_matrix_basics() {
        let net = zero_net(1, 1, 1);
        let h = net.hidden_matrix(&[vec![0.0]]).unwrap();
        assert_eq!(h[(0, 0)], 0.5);
        let net = zero_net(2, 3, 1);
        let h = net.hidden_matrix(&[vec![1.0, 2.0], vec![-4.0, 0.5], vec![9.0, 9.0]]).unwrap();
        for k in 1..3 {
            assert_eq!(h.row(k), h.row(0));
        }
    }

    #[test]
    fn dimension_checks() {
        let net = zero_net(4, 2, 2);
        assert!(matches!(net.forward(&[1.0; 3]), Err(MlpError::DimensionMismatch { expected: 4, got: 3 })));
        assert!(net.hidden_matrix(&[vec![0.0; 5]]).is_err());
        let bad = MlpNetwork::new(vec![vec![0.0; 2]], vec![0.0; 2], vec![vec![0.0]], vec![0.0], Activation::Sigmoid, Activation::Identity);
        assert!(bad.is_err());
        let nan = MlpNetwork::new(vec![vec![f64::NAN]], vec![0.0], vec![vec![0.0]], vec![0.0], Activation::Sigmoid, Activation::Identity);
        assert!(matches!(nan, Err(MlpError::NonFinite)));
    }

    #[test]
    fn sigmoid_derivative_at_zero() {
        assert_eq!(Activation::Sigmoid.derivative(0.0), 0.25);
        assert_eq!(Activation::Identity.derivative(3.0), 1.0);
    }
}
