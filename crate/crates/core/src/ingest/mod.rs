//! Loading hourly weather and daily interruption files, rolling weather up to
//! daily features, aligning both sources by date and splitting the result
//! chronologically.
//!
//! Interruption counts are taken at face value. Callers are expected to
//! supply counts with exclusion events (hurricanes, transmission outages)
//! already removed.

mod aggregate;
mod csv_io;
mod dataset;

use std::path::PathBuf;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::feature::{Target, WeatherFeatures};

pub use aggregate::{aggregate_daily, DailyAggregation, DailyWeather, DEFAULT_BASE_TEMP_F, MIN_HOURS_PER_DAY};
pub use csv_io::{
    parse_interruption_csv, parse_weather_csv, read_dataset_csv, read_interruption_csv, read_weather_csv,
    write_dataset_csv, write_interruption_csv, write_weather_csv, DATASET_HEADER, INTERRUPTION_HEADER,
    WEATHER_HEADER,
};
pub use dataset::{align, split_chronological, Dataset, SplitDataset, DEFAULT_SPLIT, MIN_DATASET_LEN};

/// One hourly weather observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourlyWeatherRow {
    pub timestamp: NaiveDateTime,
    /// °F
    pub temperature: f64,
    /// inches per hour
    pub precipitation: f64,
    /// inches of mercury
    pub pressure: f64,
    /// mph
    pub wind_speed: f64,
    /// strikes in the hour
    pub lightning_strikes: u32,
}

/// Daily sustained and momentary interruption counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterruptionRow {
    pub date: NaiveDate,
    pub n_sustained: u32,
    pub m_momentary: u32,
}

/// One calendar day: the eleven weather features plus observed counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub weather: WeatherFeatures,
    pub n_sustained: u32,
    pub m_momentary: u32,
}

impl DailyRecord {
    pub fn target(&self, target: Target) -> f64 {
        match target {
            Target::N => f64::from(self.n_sustained),
            Target::M => f64::from(self.m_momentary),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("line {row}, column '{column}': cannot parse '{value}'")]
    UnparsableValue { row: u64, column: String, value: String },
    #[error("line {row}, column '{column}': {reason}")]
    InvalidValue { row: u64, column: String, reason: String },
    #[error("line {row}, column '{column}': negative count")]
    NegativeCount { row: u64, column: String },
    #[error("file has a header but no data rows")]
    EmptyFile,
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(NaiveDateTime),
    #[error("weather and interruption data share no dates")]
    EmptyIntersection,
    #[error("split fractions must be non-negative and sum to 1, got ({0}, {1}, {2})")]
    BadFractions(f64, f64, f64),
    #[error("dataset has {got} records, at least {needed} are required")]
    DatasetTooSmall { needed: usize, got: usize },
    #[error("dates must be strictly increasing: {next} follows {prev}")]
    UnorderedDates { prev: NaiveDate, next: NaiveDate },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
}
