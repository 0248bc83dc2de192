//! The eleven daily weather parameters and a fixed-size container for them.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Number of daily weather parameters.
pub const FEATURE_COUNT: usize = 11;

/// A daily weather parameter.
///
/// The declaration order is the canonical column order used by the aligned
/// dataset CSV and by the default network input layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    /// Dry-bulb daily maximum temperature, °F.
    TMax,
    /// Daily mean temperature, °F.
    TAve,
    /// Daily minimum temperature, °F.
    TMin,
    /// Heating degree days, °F·day.
    Hdd,
    /// Cooling degree days, °F·day.
    Cdd,
    /// Peak hourly wind, mph.
    WPea,
    /// Mean hourly wind, mph.
    WAve,
    /// Sustained wind (max 2-hour rolling mean), mph.
    WSus,
    /// Rain total, inches/day.
    PRain,
    /// Mean air pressure, inHg.
    Pressure,
    /// Lightning strikes per day.
    Lightning,
}

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::TMax,
        Feature::TAve,
        Feature::TMin,
        Feature::Hdd,
        Feature::Cdd,
        Feature::WPea,
        Feature::WAve,
        Feature::WSus,
        Feature::PRain,
        Feature::Pressure,
        Feature::Lightning,
    ];

    /// Column name used in CSV headers and JSON reports.
    pub fn name(self) -> &'static str {
        match self {
            Feature::TMax => "t_max",
            Feature::TAve => "t_ave",
            Feature::TMin => "t_min",
            Feature::Hdd => "hdd",
            Feature::Cdd => "cdd",
            Feature::WPea => "w_pea",
            Feature::WAve => "w_ave",
            Feature::WSus => "w_sus",
            Feature::PRain => "p_rain",
            Feature::Pressure => "pressure",
            Feature::Lightning => "lightning",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown weather feature '{0}'")]
pub struct UnknownFeature(pub String);

impl FromStr for Feature {
    type Err = UnknownFeature;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| UnknownFeature(s.to_string()))
    }
}

/// One day's values for all eleven weather parameters, indexed by [`Feature`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WeatherFeatures(pub [f64; FEATURE_COUNT]);

impl WeatherFeatures {
    pub fn iter(&self) -> impl Iterator<Item = (Feature, f64)> + '_ {
        Feature::ALL.iter().map(move |&f| (f, self[f]))
    }
}

impl Index<Feature> for WeatherFeatures {
    type Output = f64;

    fn index(&self, f: Feature) -> &f64 {
        &self.0[f.index()]
    }
}

impl IndexMut<Feature> for WeatherFeatures {
    fn index_mut(&mut self, f: Feature) -> &mut f64 {
        &mut self.0[f.index()]
    }
}

/// Interruption count series a model is fitted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    /// Sustained interruptions.
    N,
    /// Momentary interruptions.
    M,
}

impl Target {
    pub const BOTH: [Target; 2] = [Target::N, Target::M];

    pub fn index(self) -> usize {
        match self {
            Target::N => 0,
            Target::M => 1,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::N => f.write_str("N"),
            Target::M => f.write_str("M"),
        }
    }
}
