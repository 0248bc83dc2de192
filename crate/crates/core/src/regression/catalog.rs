use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    fit_exponential2, fit_polynomial, goodness_of_fit, select_best, ExpFitOptions, FitError, FitReport, ModelKind,
    RegressionModel, ScoredCandidate,
};
use crate::feature::{Feature, Target};
use crate::ingest::{Dataset, MIN_DATASET_LEN};

/// One fitted (or failed) candidate for a feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFit {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub beta: Vec<f64>,
    pub sse: Option<f64>,
    pub r2: Option<f64>,
    pub adj_r2: Option<f64>,
    pub rmse: Option<f64>,
    pub dof: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CandidateFit {
    fn scored(model: &RegressionModel, report: FitReport) -> Self {
        CandidateFit {
            kind: model.kind,
            beta: model.beta.clone(),
            sse: Some(report.sse),
            r2: report.r_square,
            adj_r2: report.adj_r_square,
            rmse: Some(report.rmse),
            dof: Some(report.dof_v),
            error: None,
        }
    }

    fn failed(kind: ModelKind, err: &FitError) -> Self {
        CandidateFit { kind, beta: Vec::new(), sse: None, r2: None, adj_r2: None, rmse: None, dof: None, error: Some(err.to_string()) }
    }

    pub fn report(&self) -> Option<FitReport> {
        Some(FitReport {
            sse: self.sse?,
            r_square: self.r2,
            adj_r_square: self.adj_r2,
            rmse: self.rmse?,
            dof_v: self.dof?,
        })
    }

    pub fn model(&self, feature: Feature) -> Option<RegressionModel> {
        self.report()?;
        RegressionModel::new(self.kind, self.beta.clone(), feature.name()).ok()
    }
}

/// All candidates for one feature plus the index of the selected one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub feature: Feature,
    pub candidates: Vec<CandidateFit>,
    pub winner: usize,
}

impl CatalogEntry {
    pub fn winner_model(&self) -> RegressionModel {
        self.candidates[self.winner]
            .model(self.feature)
            .expect("catalog winner is always a scored candidate")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedFeature {
    pub feature: Feature,
    pub reason: String,
}

/// Per-feature regression models of one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCatalog {
    pub target: Target,
    pub entries: Vec<CatalogEntry>,
    #[serde(default)]
    pub dropped: Vec<DroppedFeature>,
}

impl ModelCatalog {
    pub fn entry(&self, feature: Feature) -> Option<&CatalogEntry> {
        self.entries.iter().find(|e| e.feature == feature)
    }

    /// `(feature, winning model)` pairs in entry order.
    pub fn winners(&self) -> Vec<(Feature, RegressionModel)> {
        self.entries.iter().map(|e| (e.feature, e.winner_model())).collect()
    }
}

/// Fit all four candidate models of `target` against every weather feature
/// of `ds` with unit weights and select a winner per feature.
///
/// A feature whose every candidate fails (a constant column, for example) is
/// recorded in [`ModelCatalog::dropped`] instead of failing the whole call.
pub fn fit_catalog(ds: &Dataset, target: Target) -> Result<ModelCatalog, FitError> {
    if ds.len() < MIN_DATASET_LEN {
        return Err(FitError::DatasetTooSmall { needed: MIN_DATASET_LEN, got: ds.len() });
    }
    let y = ds.target_column(target);
    let weights = vec![1.0; y.len()];
    let opts = ExpFitOptions::default();

    let fitted: Vec<(Feature, Result<CatalogEntry, String>)> = Feature::ALL
        .par_iter()
        .map(|&feature| {
            let x = ds.feature_column(feature);
            (feature, fit_feature(feature, &x, &y, &weights, &opts))
        })
        .collect();

    let mut catalog = ModelCatalog { target, entries: Vec::new(), dropped: Vec::new() };
    for (feature, result) in fitted {
        match result {
            Ok(entry) => catalog.entries.push(entry),
            Err(reason) => {
                warn!("{target}: dropping feature {feature}: {reason}");
                catalog.dropped.push(DroppedFeature { feature, reason });
            }
        }
    }
    Ok(catalog)
}

fn fit_feature(feature: Feature, x: &[f64], y: &[f64], weights: &[f64], opts: &ExpFitOptions) -> Result<CatalogEntry, String> {
    if x.iter().all(|v| *v == x[0]) {
        return Err("constant column".to_string());
    }
    let candidates: Vec<CandidateFit> = ModelKind::CANDIDATES
        .iter()
        .map(|&kind| {
            let fit = match kind {
                ModelKind::Polynomial { degree } => fit_polynomial(x, y, degree, weights),
                ModelKind::TwoTermExponential => fit_exponential2(x, y, weights, opts),
            };
            let scored = fit.and_then(|mut m| {
                m.input_name = feature.name().to_string();
                let report = goodness_of_fit(&m, x, y, weights)?;
                Ok(CandidateFit::scored(&m, report))
            });
            scored.unwrap_or_else(|e| CandidateFit::failed(kind, &e))
        })
        .collect();

    let scored: Vec<(usize, ScoredCandidate)> = candidates
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.report().map(|report| (i, ScoredCandidate { kind: c.kind, report })))
        .collect();
    let pick = select_best(&scored.iter().map(|(_, s)| *s).collect::<Vec<_>>());
    match pick {
        Some(p) => Ok(CatalogEntry { feature, winner: scored[p].0, candidates }),
        None => Err(candidates
            .iter()
            .filter_map(|c| c.error.as_deref())
            .next()
            .unwrap_or("no candidate could be scored")
            .to_string()),
    }
}
