use serde::{Deserialize, Serialize};

use super::{DailyRecord, DailyWeather, IngestError, InterruptionRow};
use crate::feature::{Feature, Target};

/// Minimum number of days accepted by any fit or training call.
pub const MIN_DATASET_LEN: usize = 30;

/// Train / validate / test fractions.
pub const DEFAULT_SPLIT: (f64, f64, f64) = (0.60, 0.15, 0.25);

/// Date-ordered daily records with a free-form provenance note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<DailyRecord>,
    provenance: String,
}

impl Dataset {
    /// Dates must be strictly increasing.
    pub fn new(records: Vec<DailyRecord>, provenance: impl Into<String>) -> Result<Self, IngestError> {
        if let Some(w) = records.windows(2).find(|w| w[0].date >= w[1].date) {
            return Err(if w[0].date == w[1].date {
                IngestError::DuplicateDate(w[0].date)
            } else {
                IngestError::UnorderedDates { prev: w[0].date, next: w[1].date }
            });
        }
        Ok(Dataset { records, provenance: provenance.into() })
    }

    pub fn records(&self) -> &[DailyRecord] {
        &self.records
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_column(&self, f: Feature) -> Vec<f64> {
        self.records.iter().map(|r| r.weather[f]).collect()
    }

    pub fn target_column(&self, t: Target) -> Vec<f64> {
        self.records.iter().map(|r| r.target(t)).collect()
    }

    pub fn require_min_len(&self, needed: usize) -> Result<(), IngestError> {
        if self.len() < needed {
            Err(IngestError::DatasetTooSmall { needed, got: self.len() })
        } else {
            Ok(())
        }
    }

    fn slice(&self, start: usize, end: usize, part: &str) -> Dataset {
        Dataset {
            records: self.records[start..end].to_vec(),
            provenance: format!("{} [{part}]", self.provenance),
        }
    }
}

/// Three contiguous chronological slices of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Dataset,
    pub validate: Dataset,
    pub test: Dataset,
}

/// Inner join of daily weather and interruption counts on date. Both inputs
/// must be sorted by date, as the parsers and [`super::aggregate_daily`]
/// guarantee.
pub fn align(weather: &[DailyWeather], interruptions: &[InterruptionRow]) -> Result<Dataset, IngestError> {
    let mut records = Vec::new();
    let (mut i, mut j) = (0, 0);
    let (mut weather_only, mut counts_only) = (0usize, 0usize);
    while i < weather.len() && j < interruptions.len() {
        let (w, c) = (&weather[i], &interruptions[j]);
        match w.date.cmp(&c.date) {
            std::cmp::Ordering::Less => {
                weather_only += 1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                counts_only += 1;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                records.push(DailyRecord {
                    date: w.date,
                    weather: w.features,
                    n_sustained: c.n_sustained,
                    m_momentary: c.m_momentary,
                });
                i += 1;
                j += 1;
            }
        }
    }
    weather_only += weather.len() - i;
    counts_only += interruptions.len() - j;
    if records.is_empty() {
        return Err(IngestError::EmptyIntersection);
    }
    let provenance = format!(
        "aligned {} days; dropped {weather_only} weather-only and {counts_only} interruption-only days",
        records.len()
    );
    Dataset::new(records, provenance)
}

/// Split `ds` into train/validate/test without shuffling. Train and validate
/// sizes are `floor(fraction * n)`; the test slice takes the remainder.
pub fn split_chronological(ds: &Dataset, fractions: (f64, f64, f64)) -> Result<SplitDataset, IngestError> {
    let (a, b, c) = fractions;
    let valid = [a, b, c].iter().all(|f| f.is_finite() && *f >= 0.0) && ((a + b + c) - 1.0).abs() <= 1e-9;
    if !valid {
        return Err(IngestError::BadFractions(a, b, c));
    }
    ds.require_min_len(MIN_DATASET_LEN)?;
    let n = ds.len();
    // the small epsilon keeps exact products like 0.6 * 5 from flooring to 2
    let n_train = ((a * n as f64) + 1e-9).floor() as usize;
    let n_val = ((b * n as f64) + 1e-9).floor() as usize;
    let n_val = n_val.min(n - n_train);
    Ok(SplitDataset {
        train: ds.slice(0, n_train, "train"),
        validate: ds.slice(n_train, n_train + n_val, "validate"),
        test: ds.slice(n_train + n_val, n, "test"),
    })
}
