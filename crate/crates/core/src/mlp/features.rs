//! Assembly of the hybrid input vector.
//!
//! Layout, in order:
//!
//! - the raw weather features (`raw_features`, 11 by default)
//! - one derived input per N-catalog winner: that model's prediction from its
//!   own feature
//! - the mean of the N-catalog predictions
//! - the mean of the M-catalog predictions
//!
//! giving 11 + 11 + 2 = 24 inputs when no feature is dropped. Every input is
//! z-scored with a shift and scale fitted on the training split.

use serde::{Deserialize, Serialize};

use super::MlpError;
use crate::feature::Feature;
use crate::ingest::{DailyRecord, Dataset};
use crate::regression::{ModelCatalog, RegressionModel};

/// Number of aggregate inputs (mean-N and mean-M predictions).
pub const AGGREGATE_INPUTS: usize = 2;

/// Scales below this are replaced by 1 (constant training column).
const MIN_SCALE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub feature: Feature,
    pub model: RegressionModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub raw_features: Vec<Feature>,
    /// N-catalog winners; each contributes a derived input and the mean-N aggregate.
    pub n_models: Vec<FeatureModel>,
    /// M-catalog winners; only the mean-M aggregate uses them.
    pub m_models: Vec<FeatureModel>,
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureSpec {
    /// Spec over all eleven features with normalization fitted on `train`.
    pub fn fit(train: &Dataset, n_catalog: &ModelCatalog, m_catalog: &ModelCatalog) -> Result<Self, MlpError> {
        let to_models = |c: &ModelCatalog| {
            c.winners().into_iter().map(|(feature, model)| FeatureModel { feature, model }).collect::<Vec<_>>()
        };
        Self::fit_with(train, Feature::ALL.to_vec(), to_models(n_catalog), to_models(m_catalog))
    }

    /// Spec with explicit raw feature order and models; normalization fitted on `train`.
    pub fn fit_with(
        train: &Dataset,
        raw_features: Vec<Feature>,
        n_models: Vec<FeatureModel>,
        m_models: Vec<FeatureModel>,
    ) -> Result<Self, MlpError> {
        if train.is_empty() {
            return Err(MlpError::Empty("training dataset"));
        }
        let dim = raw_features.len() + n_models.len() + AGGREGATE_INPUTS;
        let mut spec = FeatureSpec { raw_features, n_models, m_models, shift: vec![0.0; dim], scale: vec![1.0; dim] };
        spec.check_models()?;
        let rows: Vec<Vec<f64>> = train.records().iter().map(|r| spec.raw_inputs(r)).collect::<Result<_, _>>()?;
        let k = rows.len() as f64;
        for i in 0..dim {
            let mean = rows.iter().map(|r| r[i]).sum::<f64>() / k;
            let var = rows.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / k;
            let sd = var.sqrt();
            spec.shift[i] = mean;
            spec.scale[i] = if sd > MIN_SCALE * mean.abs().max(1.0) { sd } else { 1.0 };
        }
        Ok(spec)
    }

    pub fn input_dim(&self) -> usize {
        self.raw_features.len() + self.n_models.len() + AGGREGATE_INPUTS
    }

    pub fn raw_index(&self, feature: Feature) -> Option<usize> {
        self.raw_features.iter().position(|f| *f == feature)
    }

    /// Index of the derived input fed by the N-model of `feature`.
    pub fn derived_index(&self, feature: Feature) -> Option<usize> {
        self.n_models.iter().position(|m| m.feature == feature).map(|p| self.raw_features.len() + p)
    }

    pub fn mean_n_index(&self) -> usize {
        self.raw_features.len() + self.n_models.len()
    }

    pub fn mean_m_index(&self) -> usize {
        self.mean_n_index() + 1
    }

    fn check_models(&self) -> Result<(), MlpError> {
        if self.n_models.is_empty() {
            return Err(MlpError::MissingCatalogEntry("N (catalog is empty)".into()));
        }
        if self.m_models.is_empty() {
            return Err(MlpError::MissingCatalogEntry("M (catalog is empty)".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        self.check_models()?;
        for len in [self.shift.len(), self.scale.len()] {
            if len != self.input_dim() {
                return Err(MlpError::DimensionMismatch { expected: self.input_dim(), got: len });
            }
        }
        if self.scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) || self.shift.iter().any(|s| !s.is_finite()) {
            return Err(MlpError::InvalidConfig("normalization scales must be positive and finite".into()));
        }
        Ok(())
    }

    /// Un-normalized input vector for one day.
    pub fn raw_inputs(&self, record: &DailyRecord) -> Result<Vec<f64>, MlpError> {
        self.check_models()?;
        let mut x = Vec::with_capacity(self.input_dim());
        x.extend(self.raw_features.iter().map(|f| record.weather[*f]));
        let n_preds: Vec<f64> = self.n_models.iter().map(|m| m.model.eval(record.weather[m.feature])).collect();
        x.extend(&n_preds);
        x.push(n_preds.iter().sum::<f64>() / n_preds.len() as f64);
        let m_sum: f64 = self.m_models.iter().map(|m| m.model.eval(record.weather[m.feature])).sum();
        x.push(m_sum / self.m_models.len() as f64);
        Ok(x)
    }

    /// Normalized input vector for one day.
    pub fn build(&self, record: &DailyRecord) -> Result<Vec<f64>, MlpError> {
        let mut x = self.raw_inputs(record)?;
        if self.shift.len() != x.len() || self.scale.len() != x.len() {
            return Err(MlpError::DimensionMismatch { expected: x.len(), got: self.shift.len().min(self.scale.len()) });
        }
        for ((v, s), c) in x.iter_mut().zip(&self.shift).zip(&self.scale) {
            *v = (*v - s) / c;
        }
        Ok(x)
    }
}

/// Normalized network input for `record`.
pub fn build_features(record: &DailyRecord, spec: &FeatureSpec) -> Result<Vec<f64>, MlpError> {
    spec.build(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature::WeatherFeatures;
    use crate::regression::ModelKind;
    use chrono::{Days, NaiveDate};

    fn identity(feature: Feature) -> FeatureModel {
        FeatureModel {
            feature,
            model: RegressionModel::new(ModelKind::Polynomial { degree: 1 }, vec![0.0, 1.0], feature.name()).unwrap(),
        }
    }

    fn train_set() -> Dataset {
        let start = NaiveDate::from_ymd_opt(2016, 3, 1).unwrap();
        let records = (0..40u64)
            .map(|i| {
                let mut w = WeatherFeatures::default();
                for f in Feature::ALL {
                    w[f] = ((i * 7 + f.index() as u64 * 13) % 17) as f64 + f.index() as f64;
                }
                DailyRecord { date: start + Days::new(i), weather: w, n_sustained: i as u32, m_momentary: 1 }
            })
            .collect();
        Dataset::new(records, "unit").unwrap()
    }

    #[test]
    fn centered_record_maps_to_zero() {
        let ds = train_set();
        let all: Vec<_> = Feature::ALL.iter().map(|&f| identity(f)).collect();
        let spec = FeatureSpec::fit_with(&ds, Feature::ALL.to_vec(), all.clone(), all).unwrap();
        assert_eq!(spec.input_dim(), 24);
        let mut rec = ds.records()[0];
        for f in Feature::ALL {
            rec.weather[f] = ds.feature_column(f).iter().sum::<f64>() / ds.len() as f64;
        }
        let x = build_features(&rec, &spec).unwrap();
        assert_eq!(x.len(), 24);
        for v in x {
            assert!(v.abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn missing_catalog_is_an_error() {
        let ds = train_set();
        let err = FeatureSpec::fit_with(&ds, Feature::ALL.to_vec(), vec![identity(Feature::TMax)], vec![]);
        assert!(matches!(err, Err(MlpError::MissingCatalogEntry(_))));
    }

    #[test]
    fn dropped_features_shrink_the_layout() {
        let ds = train_set();
        let n: Vec<_> = Feature::ALL[..9].iter().map(|&f| identity(f)).collect();
        let spec = FeatureSpec::fit_with(&ds, Feature::ALL.to_vec(), n, vec![identity(Feature::Lightning)]).unwrap();
        assert_eq!(spec.input_dim(), 11 + 9 + 2);
        assert_eq!(spec.derived_index(Feature::TMax), Some(11));
        assert_eq!(spec.derived_index(Feature::Lightning), None);
        assert_eq!(spec.mean_m_index(), 21);
        assert!(spec.scale.iter().all(|s| *s > 0.0));
    }
}
