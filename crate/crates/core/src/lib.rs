//! Forecasting daily sustained (N) and momentary (M) power interruptions from
//! common weather time series.
//!
//! The pipeline has three stages:
//!
//! 1. [`regression`]: fit polynomial and two-term exponential models of each
//!    count against each daily weather parameter and keep the best per
//!    parameter.
//! 2. [`mlp`]: feed the raw weather features plus the regression predictions
//!    into a single-hidden-layer network whose output layer is solved in
//!    closed form with a ridge-regularized pseudoinverse (an extreme learning
//!    machine).
//! 3. [`sensitivity`]: rank the weather parameters by the first derivative
//!    of the trained network with respect to each of them.
//!
//! [`ingest`] turns hourly weather and daily count files into an aligned
//! [`Dataset`]; [`synth`] generates datasets with known ground truth.

pub mod feature;
pub mod ingest;
mod linalg;
pub mod mlp;
pub mod pipeline;
pub mod regression;
pub mod sensitivity;
pub mod synth;

pub use feature::{Feature, Target, WeatherFeatures, FEATURE_COUNT};
pub use ingest::{DailyRecord, Dataset, SplitDataset};
