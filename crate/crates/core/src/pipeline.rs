//! End-to-end training: split, per-parameter regression catalogs, hybrid
//! network, and the comparison against the sum-of-regressions baseline.

use serde::{Deserialize, Serialize};

use crate::feature::Target;
use crate::ingest::{split_chronological, DailyRecord, Dataset, IngestError, SplitDataset, DEFAULT_SPLIT};
use crate::mlp::{elm_train, mse, ElmConfig, FeatureModel, FeatureSpec, MlpError, MlpNetwork, RestartRecord, TrainedForecaster};
use crate::regression::{fit_catalog, FitError, ModelCatalog};

/// Version tag written into model files.
pub const MODEL_FORMAT_VERSION: &str = "gridcast-mlp/1";

/// How the baseline is recentered; recorded in every comparison report.
pub const BASELINE_DEFINITION: &str = "sum over parameters of the winning regression prediction, \
minus (P - 1) * mean(train target) for P parameters, clamped at 0";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("every weather parameter failed to fit for target {0}")]
    AllFeaturesFailed(Target),
    #[error(transparent)]
    Training(#[from] MlpError),
    #[error("unsupported model file version '{0}'")]
    Version(String),
}

/// Prior-art forecast: the recentered sum of per-parameter regressions.
///
/// Each of the `P` models was fitted to the full target, so each already
/// carries the target mean; `P − 1` copies of the training mean are removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub n_models: Vec<FeatureModel>,
    pub m_models: Vec<FeatureModel>,
    /// Subtracted from the N and M sums.
    pub offsets: [f64; 2],
}

impl Baseline {
    pub fn fit(n_catalog: &ModelCatalog, m_catalog: &ModelCatalog, train: &Dataset) -> Result<Self, PipelineError> {
        let models = |c: &ModelCatalog| -> Result<Vec<FeatureModel>, PipelineError> {
            if c.entries.is_empty() {
                return Err(PipelineError::AllFeaturesFailed(c.target));
            }
            Ok(c.winners().into_iter().map(|(feature, model)| FeatureModel { feature, model }).collect())
        };
        let n_models = models(n_catalog)?;
        let m_models = models(m_catalog)?;
        if train.is_empty() {
            return Err(MlpError::Empty("training dataset").into());
        }
        let mean = |t| train.target_column(t).iter().sum::<f64>() / train.len() as f64;
        let offsets = [
            (n_models.len() as f64 - 1.0) * mean(Target::N),
            (m_models.len() as f64 - 1.0) * mean(Target::M),
        ];
        Ok(Baseline { n_models, m_models, offsets })
    }

    /// Clamped `[N̂, M̂]` for one day.
    pub fn forecast(&self, record: &DailyRecord) -> Vec<f64> {
        let sum = |models: &[FeatureModel]| models.iter().map(|m| m.model.eval(record.weather[m.feature])).sum::<f64>();
        vec![
            (sum(&self.n_models) - self.offsets[0]).max(0.0),
            (sum(&self.m_models) - self.offsets[1]).max(0.0),
        ]
    }

    pub fn evaluate(&self, ds: &Dataset) -> Result<Vec<f64>, MlpError> {
        let preds: Vec<Vec<f64>> = ds.records().iter().map(|r| self.forecast(r)).collect();
        let targets: Vec<Vec<f64>> = ds.records().iter().map(|r| Target::BOTH.iter().map(|t| r.target(*t)).collect()).collect();
        mse(&preds, &targets)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMse {
    pub train: f64,
    pub validate: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputComparison {
    pub output: Target,
    pub hybrid: SplitMse,
    pub baseline: SplitMse,
    /// `100 · (baseline − hybrid) / baseline` on the test split.
    pub test_reduction_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub split_sizes: [usize; 3],
    pub baseline_definition: String,
    pub outputs: Vec<OutputComparison>,
}

impl ComparisonReport {
    pub fn output(&self, target: Target) -> &OutputComparison {
        &self.outputs[target.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub split: (f64, f64, f64),
    pub elm: ElmConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { split: DEFAULT_SPLIT, elm: ElmConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub split: SplitDataset,
    pub n_catalog: ModelCatalog,
    pub m_catalog: ModelCatalog,
    pub forecaster: TrainedForecaster,
    pub baseline: Baseline,
    pub report: ComparisonReport,
}

/// Fit both catalogs on the training split only.
pub fn fit_catalogs(train: &Dataset) -> Result<(ModelCatalog, ModelCatalog), PipelineError> {
    let n = fit_catalog(train, Target::N)?;
    let m = fit_catalog(train, Target::M)?;
    for c in [&n, &m] {
        if c.entries.is_empty() {
            return Err(PipelineError::AllFeaturesFailed(c.target));
        }
    }
    Ok((n, m))
}

/// Split, fit catalogs, train the hybrid network and compare it with the baseline.
pub fn run(ds: &Dataset, cfg: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    run_with_catalogs(ds, cfg, None)
}

/// [`run`], reusing previously fitted `(N, M)` catalogs when given.
pub fn run_with_catalogs(
    ds: &Dataset,
    cfg: &PipelineConfig,
    catalogs: Option<(ModelCatalog, ModelCatalog)>,
) -> Result<PipelineRun, PipelineError> {
    let split = split_chronological(ds, cfg.split)?;
    let (n_catalog, m_catalog) = match catalogs {
        Some((n, m)) => {
            for c in [&n, &m] {
                if c.entries.is_empty() {
                    return Err(PipelineError::AllFeaturesFailed(c.target));
                }
            }
            (n, m)
        }
        None => fit_catalogs(&split.train)?,
    };
    let spec = FeatureSpec::fit(&split.train, &n_catalog, &m_catalog)?;
    let mut forecaster = elm_train(&split.train, &split.validate, &spec, &cfg.elm)?;
    let hybrid_test = forecaster.evaluate_test(&split.test)?;
    let baseline = Baseline::fit(&n_catalog, &m_catalog, &split.train)?;
    let base = [baseline.evaluate(&split.train)?, baseline.evaluate(&split.validate)?, baseline.evaluate(&split.test)?];
    let outputs = Target::BOTH
        .iter()
        .map(|&t| {
            let o = t.index();
            let hybrid = SplitMse { train: forecaster.train_mse[o], validate: forecaster.validate_mse[o], test: hybrid_test[o] };
            let baseline = SplitMse { train: base[0][o], validate: base[1][o], test: base[2][o] };
            let test_reduction_pct =
                (baseline.test > 0.0).then(|| 100.0 * (baseline.test - hybrid.test) / baseline.test);
            OutputComparison { output: t, hybrid, baseline, test_reduction_pct }
        })
        .collect();
    let report = ComparisonReport {
        split_sizes: [split.train.len(), split.validate.len(), split.test.len()],
        baseline_definition: BASELINE_DEFINITION.to_string(),
        outputs,
    };
    Ok(PipelineRun { split, n_catalog, m_catalog, forecaster, baseline, report })
}

/// Training diagnostics stored with a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub lambda: f64,
    pub chosen_restart: usize,
    pub train_mse: Vec<f64>,
    pub validate_mse: Vec<f64>,
    pub test_mse: Option<Vec<f64>>,
    pub restart_trace: Vec<RestartRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonReport>,
}

/// On-disk form of a trained forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: String,
    pub base_temp: f64,
    pub feature_spec: FeatureSpec,
    #[serde(flatten)]
    pub network: MlpNetwork,
    pub config: ElmConfig,
    pub metrics: ModelMetrics,
}

impl ModelFile {
    pub fn new(forecaster: &TrainedForecaster, base_temp: f64, comparison: Option<ComparisonReport>) -> Self {
        ModelFile {
            version: MODEL_FORMAT_VERSION.to_string(),
            base_temp,
            feature_spec: forecaster.feature_spec.clone(),
            network: forecaster.network.clone(),
            config: forecaster.config.clone(),
            metrics: ModelMetrics {
                lambda: forecaster.lambda,
                chosen_restart: forecaster.chosen_restart,
                train_mse: forecaster.train_mse.clone(),
                validate_mse: forecaster.validate_mse.clone(),
                test_mse: forecaster.test_mse.clone(),
                restart_trace: forecaster.restart_trace.clone(),
                comparison,
            },
        }
    }

    /// Validate and rebuild the forecaster.
    pub fn into_forecaster(self) -> Result<TrainedForecaster, PipelineError> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(PipelineError::Version(self.version));
        }
        self.network.validate()?;
        self.feature_spec.validate()?;
        if self.network.input_count() != self.feature_spec.input_dim() {
            return Err(MlpError::DimensionMismatch { expected: self.feature_spec.input_dim(), got: self.network.input_count() }.into());
        }
        Ok(TrainedForecaster {
            feature_spec: self.feature_spec,
            network: self.network,
            config: self.config,
            lambda: self.metrics.lambda,
            chosen_restart: self.metrics.chosen_restart,
            train_mse: self.metrics.train_mse,
            validate_mse: self.metrics.validate_mse,
            test_mse: self.metrics.test_mse,
            restart_trace: self.metrics.restart_trace,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature::{Feature, WeatherFeatures};
    use crate::regression::{CandidateFit, CatalogEntry, ModelKind, RegressionModel};
    use chrono::{Days, NaiveDate};

    fn dataset(n: u64) -> Dataset {
        let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
        let records = (0..n)
            .map(|i| {
                let mut w = WeatherFeatures::default();
                for f in Feature::ALL {
                    w[f] = ((i * 5 + f.index() as u64 * 3) % 11) as f64;
                }
                DailyRecord { date: start + Days::new(i), weather: w, n_sustained: (i % 4) as u32, m_momentary: (i % 6) as u32 }
            })
            .collect();
        Dataset::new(records, "unit").unwrap()
    }

    fn line_catalog(target: Target, features: &[Feature], slope: f64) -> ModelCatalog {
        let entries = features
            .iter()
            .map(|&feature| {
                let model = RegressionModel::new(ModelKind::Polynomial { degree: 1 }, vec![1.0, slope], feature.name()).unwrap();
                let cand = CandidateFit {
                    kind: model.kind,
                    beta: model.beta,
                    sse: Some(1.0),
                    r2: Some(0.5),
                    adj_r2: Some(0.4),
                    rmse: Some(1.0),
                    dof: Some(10),
                    error: None,
                };
                CatalogEntry { feature, candidates: vec![cand], winner: 0 }
            })
            .collect();
        ModelCatalog { target, entries, dropped: Vec::new() }
    }

    #[test]
    fn baseline_removes_surplus_means_and_clamps() {
        let train = dataset(40);
        let features = [Feature::TMax, Feature::PRain, Feature::Lightning];
        let n = line_catalog(Target::N, &features, 0.5);
        let m = line_catalog(Target::M, &features[..1], -10.0);
        let b = Baseline::fit(&n, &m, &train).unwrap();
        let mean_n = train.target_column(Target::N).iter().sum::<f64>() / 40.0;
        assert!((b.offsets[0] - 2.0 * mean_n).abs() < 1e-12);
        assert_eq!(b.offsets[1], 0.0);
        let r = train.records()[3];
        let expected_n: f64 = features.iter().map(|f| 1.0 + 0.5 * r.weather[*f]).sum::<f64>() - 2.0 * mean_n;
        let f = b.forecast(&r);
        assert!((f[0] - expected_n.max(0.0)).abs() < 1e-12);
        assert_eq!(f[1], (1.0 - 10.0 * r.weather[Feature::TMax]).max(0.0));
    }

    #[test]
    fn empty_catalog_is_all_features_failed() {
        let train = dataset(40);
        let n = line_catalog(Target::N, &[], 1.0);
        let m = line_catalog(Target::M, &[Feature::TMax], 1.0);
        assert!(matches!(Baseline::fit(&n, &m, &train), Err(PipelineError::AllFeaturesFailed(Target::N))));
        let cfg = PipelineConfig::default();
        let err = run_with_catalogs(&dataset(60), &cfg, Some((n, m))).unwrap_err();
        assert!(matches!(err, PipelineError::AllFeaturesFailed(Target::N)));
    }

    #[test]
    fn model_file_round_trip_and_version_guard() {
        let ds = dataset(80);
        let features = [Feature::TMax, Feature::WAve];
        let cfg = PipelineConfig { elm: ElmConfig { restarts: 3, ..ElmConfig::default() }, ..PipelineConfig::default() };
        let run = run_with_catalogs(
            &ds,
            &cfg,
            Some((line_catalog(Target::N, &features, 0.2), line_catalog(Target::M, &features, 0.3))),
        )
        .unwrap();
        let file = ModelFile::new(&run.forecaster, 65.0, Some(run.report.clone()));
        let json = serde_json::to_string(&file).unwrap();
        let back: ModelFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, file);
        let restored = back.clone().into_forecaster().unwrap();
        for r in ds.records() {
            assert_eq!(restored.forecast(r).unwrap(), run.forecaster.forecast(r).unwrap());
        }
        let old = ModelFile { version: "gridcast-mlp/0".into(), ..back };
        assert!(matches!(old.into_forecaster(), Err(PipelineError::Version(_))));
    }

    #[test]
    fn report_reduction_matches_mse() {
        let ds = dataset(80);
        let features = [Feature::TMax];
        let cfg = PipelineConfig { elm: ElmConfig { restarts: 2, ..ElmConfig::default() }, ..PipelineConfig::default() };
        let run =
            run_with_catalogs(&ds, &cfg, Some((line_catalog(Target::N, &features, 0.1), line_catalog(Target::M, &features, 0.1))))
                .unwrap();
        assert_eq!(run.report.split_sizes, [48, 12, 20]);
        for t in Target::BOTH {
            let o = run.report.output(t);
            assert_eq!(o.output, t);
            if let Some(p) = o.test_reduction_pct {
                assert!((p - 100.0 * (o.baseline.test - o.hybrid.test) / o.baseline.test).abs() < 1e-12);
            }
        }
    }
}
