//! First-order sensitivity of the forecaster outputs to each weather
//! parameter.
//!
//! The derivative of every output with respect to the normalized network
//! inputs is taken analytically, then carried back to the raw weather
//! parameters through the input normalization and the regression-model
//! inputs. Per-day derivatives are aggregated as a mean absolute value and
//! normalized per output.

use std::io::Write;

use chrono::NaiveDate;
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::feature::{Feature, Target, FEATURE_COUNT};
use crate::ingest::{DailyRecord, Dataset};
use crate::mlp::{FeatureSpec, MlpError, MlpNetwork, TrainedForecaster};

/// Derivatives `∂Y_o/∂x_i` of the network outputs with respect to its
/// (normalized) inputs, as an `n × outputs` matrix.
pub fn analytic_input_gradient(net: &MlpNetwork, x: &[f64]) -> Result<Vec<Vec<f64>>, MlpError> {
    let z = net.pre_activations(x)?;
    let hidden: Vec<f64> = z.iter().map(|z| net.g.apply(*z)).collect();
    let dg: Vec<f64> = z.iter().map(|z| net.g.derivative(*z)).collect();
    let outputs = net.output_count();
    let df: Vec<f64> = (0..outputs)
        .map(|o| {
            let a = net.b_out[o] + hidden.iter().zip(&net.v).map(|(h, v)| h * v[o]).sum::<f64>();
            net.f.derivative(a)
        })
        .collect();
    Ok((0..net.input_count())
        .map(|i| {
            (0..outputs)
                .map(|o| df[o] * (0..net.hidden_count()).map(|j| net.v[j][o] * dg[j] * net.w[j][i]).sum::<f64>())
                .collect()
        })
        .collect())
}

/// Carry input-space derivatives back to the eleven raw weather parameters.
///
/// Each raw parameter reaches the network through its own normalized input,
/// through the derived input of its N-model, and through the mean-N and
/// mean-M aggregates. Rows are indexed by [`Feature::index`].
pub fn chain_to_raw(feature_grad: &[Vec<f64>], spec: &FeatureSpec, record: &DailyRecord) -> Result<Vec<Vec<f64>>, MlpError> {
    let n = spec.input_dim();
    if feature_grad.len() != n {
        return Err(MlpError::DimensionMismatch { expected: n, got: feature_grad.len() });
    }
    let outputs = feature_grad.first().map_or(0, Vec::len);
    // derivative with respect to the un-normalized input
    let unscaled = |i: usize, o: usize| feature_grad[i][o] / spec.scale[i];
    let mean_n = spec.mean_n_index();
    let mean_m = spec.mean_m_index();
    let n_count = spec.n_models.len() as f64;
    let m_count = spec.m_models.len() as f64;

    let mut raw = vec![vec![0.0; outputs]; FEATURE_COUNT];
    for (i, feature) in spec.raw_features.iter().enumerate() {
        for o in 0..outputs {
            raw[feature.index()][o] += unscaled(i, o);
        }
    }
    for (q, fm) in spec.n_models.iter().enumerate() {
        let slope = fm.model.derivative(record.weather[fm.feature]);
        let idx = spec.raw_features.len() + q;
        for o in 0..outputs {
            raw[fm.feature.index()][o] += slope * (unscaled(idx, o) + unscaled(mean_n, o) / n_count);
        }
    }
    for fm in &spec.m_models {
        let slope = fm.model.derivative(record.weather[fm.feature]);
        for o in 0..outputs {
            raw[fm.feature.index()][o] += slope * unscaled(mean_m, o) / m_count;
        }
    }
    Ok(raw)
}

/// How per-day raw derivatives are put on a common footing before averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreScaling {
    /// Multiply each parameter's derivative by its training standard
    /// deviation, giving the output change per typical parameter swing.
    #[default]
    TrainingStd,
    /// Derivatives in raw parameter units (unit-dependent).
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterScore {
    pub parameter: Feature,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSensitivity {
    pub output: Target,
    /// One entry per weather parameter in canonical order; scores sum to 1.
    pub scores: Vec<ParameterScore>,
    /// Parameters by descending score, ties in canonical order.
    pub ranked: Vec<Feature>,
}

impl OutputSensitivity {
    pub fn score(&self, parameter: Feature) -> f64 {
        self.scores.iter().find(|s| s.parameter == parameter).map_or(0.0, |s| s.score)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub scaling: ScoreScaling,
    pub days: usize,
    pub outputs: Vec<OutputSensitivity>,
}

impl SensitivityReport {
    pub fn for_output(&self, target: Target) -> Option<&OutputSensitivity> {
        self.outputs.iter().find(|o| o.output == target)
    }
}

/// Raw-parameter derivatives (`11 × outputs`) for one day.
pub fn raw_derivatives(forecaster: &TrainedForecaster, record: &DailyRecord) -> Result<Vec<Vec<f64>>, MlpError> {
    let x = forecaster.feature_spec.build(record)?;
    let grad = analytic_input_gradient(&forecaster.network, &x)?;
    chain_to_raw(&grad, &forecaster.feature_spec, record)
}

/// Per-day raw derivatives over `ds`.
pub fn daily_derivatives(forecaster: &TrainedForecaster, ds: &Dataset) -> Result<Vec<(NaiveDate, Vec<Vec<f64>>)>, MlpError> {
    ds.records().par_iter().map(|r| Ok((r.date, raw_derivatives(forecaster, r)?))).collect()
}

/// Sensitivity report with the default [`ScoreScaling::TrainingStd`].
pub fn aggregate(forecaster: &TrainedForecaster, ds: &Dataset) -> Result<SensitivityReport, MlpError> {
    aggregate_with(forecaster, ds, ScoreScaling::default())
}

/// Mean absolute raw derivative per (parameter, output), scaled per
/// `scaling` and normalized to sum to 1 per output.
pub fn aggregate_with(forecaster: &TrainedForecaster, ds: &Dataset, scaling: ScoreScaling) -> Result<SensitivityReport, MlpError> {
    if ds.is_empty() {
        return Err(MlpError::Empty("sensitivity dataset"));
    }
    let spec = &forecaster.feature_spec;
    let factor: Vec<f64> = Feature::ALL
        .iter()
        .map(|&f| match (scaling, spec.raw_index(f)) {
            (ScoreScaling::TrainingStd, Some(i)) => spec.scale[i],
            _ => 1.0,
        })
        .collect();
    let per_day = daily_derivatives(forecaster, ds)?;
    let outputs = forecaster.network.output_count();
    let mut sums = vec![vec![0.0; outputs]; FEATURE_COUNT];
    for (_, d) in &per_day {
        for p in 0..FEATURE_COUNT {
            for o in 0..outputs {
                sums[p][o] += d[p][o].abs() * factor[p];
            }
        }
    }
    let k = per_day.len() as f64;
    let report_outputs = Target::BOTH
        .iter()
        .take(outputs)
        .enumerate()
        .map(|(o, &target)| {
            let means: Vec<f64> = (0..FEATURE_COUNT).map(|p| sums[p][o] / k).collect();
            normalize(target, &means)
        })
        .collect();
    Ok(SensitivityReport { scaling, days: per_day.len(), outputs: report_outputs })
}

fn normalize(target: Target, means: &[f64]) -> OutputSensitivity {
    let total: f64 = means.iter().sum();
    let scores: Vec<ParameterScore> = if total > 0.0 && total.is_finite() {
        Feature::ALL.iter().map(|&p| ParameterScore { parameter: p, score: means[p.index()] / total }).collect()
    } else {
        warn!("{target}: all sensitivities are zero; reporting uniform scores");
        Feature::ALL.iter().map(|&p| ParameterScore { parameter: p, score: 1.0 / FEATURE_COUNT as f64 }).collect()
    };
    let mut ranked: Vec<&ParameterScore> = scores.iter().collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.parameter.index().cmp(&b.parameter.index())));
    let ranked = ranked.into_iter().map(|s| s.parameter).collect();
    OutputSensitivity { output: target, scores, ranked }
}

/// CSV header of [`write_report_csv`].
pub const REPORT_CSV_HEADER: [&str; 4] = ["output", "parameter", "score", "rank"];

/// Plot-ready CSV: one row per (output, parameter).
pub fn write_report_csv<W: Write>(report: &SensitivityReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_CSV_HEADER)?;
    for o in &report.outputs {
        for s in &o.scores {
            let rank = o.ranked.iter().position(|p| *p == s.parameter).map_or(0, |r| r + 1);
            w.write_record([o.output.to_string(), s.parameter.to_string(), s.score.to_string(), rank.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{Activation, FeatureModel};
    use crate::regression::{ModelKind, RegressionModel};
    use crate::WeatherFeatures;

    fn net(w: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> MlpNetwork {
        let m = w.len();
        let outputs = v[0].len();
        MlpNetwork::new(w, vec![0.0; m], v, vec![0.0; outputs], Activation::Sigmoid, Activation::Identity).unwrap()
    }

    fn model(feature: Feature, kind: ModelKind, beta: Vec<f64>) -> FeatureModel {
        FeatureModel { feature, model: RegressionModel::new(kind, beta, feature.name()).unwrap() }
    }

    fn unit_spec(n_models: Vec<FeatureModel>, m_models: Vec<FeatureModel>) -> FeatureSpec {
        let dim = FEATURE_COUNT + n_models.len() + 2;
        FeatureSpec { raw_features: Feature::ALL.to_vec(), n_models, m_models, shift: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    #[test]
    fn zero_network_has_zero_gradient() {
        let g = analytic_input_gradient(&net(vec![vec![0.0; 5]; 3], vec![vec![0.0; 2]; 3]), &[1.0; 5]).unwrap();
        assert!(g.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn single_unit_quarter_slope() {
        let mut w = vec![0.0; 4];
        w[0] = 1.0;
        let g = analytic_input_gradient(&net(vec![w], vec![vec![3.0]]), &[0.0; 4]).unwrap();
        assert_eq!(g[0][0], 0.75);
        assert_eq!(g[1][0], 0.0);
    }

    #[test]
    fn constant_catalogs_leave_raw_path_only() {
        let constant = |f| model(f, ModelKind::Polynomial { degree: 1 }, vec![4.0, 0.0]);
        let spec = unit_spec(Feature::ALL.iter().map(|&f| constant(f)).collect(), vec![constant(Feature::Lightning)]);
        let grad: Vec<Vec<f64>> = (0..spec.input_dim()).map(|i| vec![i as f64 + 1.0]).collect();
        let rec = DailyRecord { date: NaiveDate::MIN, weather: WeatherFeatures::default(), n_sustained: 0, m_momentary: 0 };
        let raw = chain_to_raw(&grad, &spec, &rec).unwrap();
        for f in Feature::ALL {
            assert_eq!(raw[f.index()][0], f.index() as f64 + 1.0);
        }
    }

    #[test]
    fn linear_derived_path() {
        let spec = unit_spec(vec![model(Feature::Pressure, ModelKind::Polynomial { degree: 1 }, vec![0.0, 2.0])], vec![
            model(Feature::TMax, ModelKind::Polynomial { degree: 1 }, vec![1.0, 0.0]),
        ]);
        let q = spec.derived_index(Feature::Pressure).unwrap();
        let mut grad = vec![vec![0.0]; spec.input_dim()];
        grad[q][0] = 1.5;
        let rec = DailyRecord { date: NaiveDate::MIN, weather: WeatherFeatures::default(), n_sustained: 0, m_momentary: 0 };
        let raw = chain_to_raw(&grad, &spec, &rec).unwrap();
        assert_eq!(raw[Feature::Pressure.index()][0], 3.0);
        assert_eq!(raw.iter().flatten().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn normalization_and_ranking() {
        let mut means = vec![1.0; FEATURE_COUNT];
        means[Feature::Lightning.index()] = 9.0;
        means[Feature::TMax.index()] = 0.0;
        let s = normalize(Target::N, &means);
        let total: f64 = s.scores.iter().map(|p| p.score).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(s.ranked[0], Feature::Lightning);
        assert_eq!(s.ranked[1], Feature::TAve);
        assert_eq!(*s.ranked.last().unwrap(), Feature::TMax);
        let zero = normalize(Target::M, &[0.0; FEATURE_COUNT]);
        assert!(zero.scores.iter().all(|p| (p.score - 1.0 / 11.0).abs() < 1e-15));
    }
}
