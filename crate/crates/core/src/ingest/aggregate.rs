use chrono::{NaiveDate, Timelike};
use serde::{Deserialize, Serialize};

use super::HourlyWeatherRow;
use crate::feature::{Feature, WeatherFeatures};

/// Standard degree-day base temperature, °F.
pub const DEFAULT_BASE_TEMP_F: f64 = 65.0;

/// Days with fewer observed hours than this are skipped rather than imputed.
pub const MIN_HOURS_PER_DAY: usize = 18;

/// Daily weather features for one date, before counts are attached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyWeather {
    pub date: NaiveDate,
    pub features: WeatherFeatures,
}

/// Result of rolling hourly rows up to days.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DailyAggregation {
    pub days: Vec<DailyWeather>,
    /// Dates dropped for insufficient hourly coverage.
    pub skipped: Vec<NaiveDate>,
}

/// Aggregate hourly rows (sorted by timestamp, as returned by the parsers)
/// into daily features.
///
/// Per day: temperature max/mean/min, degree days against `base_temp`,
/// peak and mean wind, sustained wind as the largest mean over two
/// consecutive observed hours, rain and lightning totals, mean pressure.
pub fn aggregate_daily(rows: &[HourlyWeatherRow], base_temp: f64) -> DailyAggregation {
    let mut out = DailyAggregation::default();
    let mut start = 0;
    while start < rows.len() {
        let date = rows[start].timestamp.date();
        let end = rows[start..]
            .iter()
            .position(|r| r.timestamp.date() != date)
            .map_or(rows.len(), |p| start + p);
        let day = &rows[start..end];
        if day.len() < MIN_HOURS_PER_DAY {
            out.skipped.push(date);
        } else {
            out.days.push(DailyWeather {
                date,
                features: summarize_day(day, base_temp),
            });
        }
        start = end;
    }
    out
}

fn summarize_day(day: &[HourlyWeatherRow], base_temp: f64) -> WeatherFeatures {
    let n = day.len() as f64;
    let mut f = WeatherFeatures::default();

    let t_max = day.iter().map(|r| r.temperature).fold(f64::NEG_INFINITY, f64::max);
    let t_min = day.iter().map(|r| r.temperature).fold(f64::INFINITY, f64::min);
    // clamp guards against the mean drifting past an extreme by rounding
    let t_ave = (day.iter().map(|r| r.temperature).sum::<f64>() / n).clamp(t_min, t_max);
    f[Feature::TMax] = t_max;
    f[Feature::TAve] = t_ave;
    f[Feature::TMin] = t_min;
    f[Feature::Hdd] = (base_temp - t_ave).max(0.0);
    f[Feature::Cdd] = (t_ave - base_temp).max(0.0);

    let w_pea = day.iter().map(|r| r.wind_speed).fold(f64::NEG_INFINITY, f64::max);
    let w_ave = (day.iter().map(|r| r.wind_speed).sum::<f64>() / n).min(w_pea);
    let w_sus = day
        .windows(2)
        .filter(|p| p[1].timestamp.hour() == p[0].timestamp.hour() + 1)
        .map(|p| 0.5 * (p[0].wind_speed + p[1].wind_speed))
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        .unwrap_or(w_ave);
    f[Feature::WPea] = w_pea;
    f[Feature::WAve] = w_ave;
    f[Feature::WSus] = w_sus;

    f[Feature::PRain] = day.iter().map(|r| r.precipitation).sum();
    f[Feature::Pressure] = day.iter().map(|r| r.pressure).sum::<f64>() / n;
    f[Feature::Lightning] = day.iter().map(|r| f64::from(r.lightning_strikes)).sum();
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDateTime;

    fn day_rows(date: &str, hours: impl IntoIterator<Item = u32>, mut fill: impl FnMut(u32) -> (f64, f64)) -> Vec<HourlyWeatherRow> {
        let d: NaiveDate = date.parse().unwrap();
        hours
            .into_iter()
            .map(|h| {
                let (temp, wind) = fill(h);
                HourlyWeatherRow {
                    timestamp: NaiveDateTime::new(d, chrono::NaiveTime::from_hms_opt(h, 0, 0).unwrap()),
                    temperature: temp,
                    precipitation: 0.1,
                    pressure: 30.0,
                    wind_speed: wind,
                    lightning_strikes: 2,
                }
            })
            .collect()
    }

    #[test]
    fn constant_day_above_base() {
        let rows = day_rows("2015-01-01", 0..24, |_| (70.0, 5.0));
        let agg = aggregate_daily(&rows, 65.0);
        let f = agg.days[0].features;
        assert_eq!(f[Feature::TMax], 70.0);
        assert_eq!(f[Feature::TAve], 70.0);
        assert_eq!(f[Feature::TMin], 70.0);
        assert_eq!(f[Feature::Hdd], 0.0);
        assert_eq!(f[Feature::Cdd], 5.0);
        assert_eq!(f[Feature::Lightning], 48.0);
        assert!((f[Feature::PRain] - 2.4).abs() < 1e-12);
    }

    #[test]
    fn base_temperature_boundary() {
        let rows = day_rows("2015-01-01", 0..24, |_| (65.0, 5.0));
        let f = aggregate_daily(&rows, 65.0).days[0].features;
        assert_eq!(f[Feature::Hdd], 0.0);
        assert_eq!(f[Feature::Cdd], 0.0);
    }

    #[test]
    fn sustained_wind_is_max_two_hour_mean() {
        let rows = day_rows("2015-01-01", 0..24, |h| (70.0, if h == 2 { 40.0 } else { 10.0 }));
        let f = aggregate_daily(&rows, 65.0).days[0].features;
        assert_eq!(f[Feature::WPea], 40.0);
        assert_eq!(f[Feature::WSus], 25.0);
        // (23 * 10 + 40) / 24
        assert!((f[Feature::WAve] - 11.25).abs() < 1e-12);
    }

    #[test]
    fn rolling_mean_skips_gaps() {
        // hour 5 missing: 4 and 6 are not consecutive
        let hours: Vec<u32> = (0..24).filter(|&h| h != 5).collect();
        let rows = day_rows("2015-01-01", hours, |h| (70.0, if h == 4 || h == 6 { 30.0 } else { 0.0 }));
        let f = aggregate_daily(&rows, 65.0).days[0].features;
        assert_eq!(f[Feature::WSus], 15.0);
    }

    #[test]
    fn low_coverage_days_are_skipped() {
        let mut rows = day_rows("2015-01-01", 0..17, |_| (70.0, 5.0));
        rows.extend(day_rows("2015-01-02", 0..18, |_| (60.0, 5.0)));
        let agg = aggregate_daily(&rows, 65.0);
        assert_eq!(agg.skipped, vec!["2015-01-01".parse::<NaiveDate>().unwrap()]);
        assert_eq!(agg.days.len(), 1);
        assert_eq!(agg.days[0].features[Feature::Hdd], 5.0);
    }
}
