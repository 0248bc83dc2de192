use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use csv::StringRecord;

use super::{DailyRecord, Dataset, HourlyWeatherRow, IngestError, InterruptionRow};
use crate::feature::{Feature, WeatherFeatures};

pub const WEATHER_HEADER: [&str; 6] = ["timestamp", "temperature_f", "precip_in", "pressure_inhg", "wind_mph", "lightning"];
pub const INTERRUPTION_HEADER: [&str; 3] = ["date", "n_sustained", "m_momentary"];
/// `date`, the eleven features in canonical order, then `n` and `m`.
pub const DATASET_HEADER: [&str; 14] = [
    "date", "t_max", "t_ave", "t_min", "hdd", "cdd", "w_pea", "w_ave", "w_sus", "p_rain", "pressure", "lightning", "n", "m",
];

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";
const DATE_FORMAT: &str = "%Y-%m-%d";

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

/// Column lookup for a parsed header.
struct Columns {
    idx: Vec<usize>,
    names: &'static [&'static str],
}

impl Columns {
    fn resolve(headers: &StringRecord, names: &'static [&'static str]) -> Result<Self, IngestError> {
        let idx = names
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h == *name)
                    .ok_or_else(|| IngestError::MissingColumn((*name).to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Columns { idx, names })
    }

    fn field<'r>(&self, rec: &'r StringRecord, col: usize) -> &'r str {
        rec.get(self.idx[col]).unwrap_or("")
    }

    fn parse_f64(&self, rec: &StringRecord, col: usize, row: u64) -> Result<f64, IngestError> {
        let raw = self.field(rec, col);
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.unparsable(raw, col, row)),
        }
    }

    fn unparsable(&self, raw: &str, col: usize, row: u64) -> IngestError {
        IngestError::UnparsableValue { row, column: self.names[col].to_string(), value: raw.to_string() }
    }

    /// Non-negative integer counts; integral decimals such as `12.0` are accepted.
    fn parse_count(&self, rec: &StringRecord, col: usize, row: u64) -> Result<u32, IngestError> {
        let raw = self.field(rec, col);
        if let Ok(v) = raw.parse::<i64>() {
            return if v < 0 {
                Err(IngestError::NegativeCount { row, column: self.names[col].to_string() })
            } else {
                u32::try_from(v).map_err(|_| self.unparsable(raw, col, row))
            };
        }
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() && v.fract() == 0.0 && v < 0.0 => {
                Err(IngestError::NegativeCount { row, column: self.names[col].to_string() })
            }
            Ok(v) if v.is_finite() && v.fract() == 0.0 && v <= f64::from(u32::MAX) => Ok(v as u32),
            _ => Err(self.unparsable(raw, col, row)),
        }
    }
}

fn line_of(rec: &StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input)
}

pub fn parse_weather_csv(path: impl AsRef<Path>) -> Result<Vec<HourlyWeatherRow>, IngestError> {
    read_weather_csv(open(path.as_ref())?)
}

/// Parse hourly weather rows; the result is sorted by timestamp.
pub fn read_weather_csv<R: Read>(input: R) -> Result<Vec<HourlyWeatherRow>, IngestError> {
    let mut rdr = reader(input);
    let cols = Columns::resolve(rdr.headers()?, &WEATHER_HEADER)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let ts_raw = cols.field(&rec, 0);
        let timestamp = NaiveDateTime::parse_from_str(ts_raw, TIMESTAMP_FORMAT)
            .ok()
            .filter(|t| t.minute() == 0)
            .ok_or_else(|| cols.unparsable(ts_raw, 0, line))?;
        let temperature = cols.parse_f64(&rec, 1, line)?;
        let precipitation = cols.parse_f64(&rec, 2, line)?;
        let pressure = cols.parse_f64(&rec, 3, line)?;
        let wind_speed = cols.parse_f64(&rec, 4, line)?;
        let lightning_strikes = cols.parse_count(&rec, 5, line).map_err(|e| match e {
            IngestError::NegativeCount { row, column } => {
                IngestError::InvalidValue { row, column, reason: "must be non-negative".into() }
            }
            other => other,
        })?;
        for (col, v) in [(2, precipitation), (4, wind_speed)] {
            if v < 0.0 {
                return Err(IngestError::InvalidValue {
                    row: line,
                    column: WEATHER_HEADER[col].to_string(),
                    reason: "must be non-negative".into(),
                });
            }
        }
        rows.push(HourlyWeatherRow { timestamp, temperature, precipitation, pressure, wind_speed, lightning_strikes });
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    rows.sort_by_key(|r| r.timestamp);
    if let Some(w) = rows.windows(2).find(|w| w[0].timestamp == w[1].timestamp) {
        return Err(IngestError::DuplicateTimestamp(w[0].timestamp));
    }
    Ok(rows)
}

pub fn parse_interruption_csv(path: impl AsRef<Path>) -> Result<Vec<InterruptionRow>, IngestError> {
    read_interruption_csv(open(path.as_ref())?)
}

/// Parse daily interruption counts; the result is sorted by date.
pub fn read_interruption_csv<R: Read>(input: R) -> Result<Vec<InterruptionRow>, IngestError> {
    let mut rdr = reader(input);
    let cols = Columns::resolve(rdr.headers()?, &INTERRUPTION_HEADER)?;
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let raw = cols.field(&rec, 0);
        let date = NaiveDate::parse_from_str(raw, DATE_FORMAT).map_err(|_| cols.unparsable(raw, 0, line))?;
        if !seen.insert(date) {
            return Err(IngestError::DuplicateDate(date));
        }
        let n_sustained = cols.parse_count(&rec, 1, line)?;
        let m_momentary = cols.parse_count(&rec, 2, line)?;
        rows.push(InterruptionRow { date, n_sustained, m_momentary });
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    rows.sort_by_key(|r| r.date);
    Ok(rows)
}

/// Read an aligned dataset CSV as written by [`write_dataset_csv`].
pub fn read_dataset_csv<R: Read>(input: R, provenance: impl Into<String>) -> Result<Dataset, IngestError> {
    let mut rdr = reader(input);
    let cols = Columns::resolve(rdr.headers()?, &DATASET_HEADER)?;
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let raw = cols.field(&rec, 0);
        let date = NaiveDate::parse_from_str(raw, DATE_FORMAT).map_err(|_| cols.unparsable(raw, 0, line))?;
        let mut weather = WeatherFeatures::default();
        for (i, f) in Feature::ALL.iter().enumerate() {
            weather[*f] = cols.parse_f64(&rec, i + 1, line)?;
        }
        let n_sustained = cols.parse_count(&rec, 12, line)?;
        let m_momentary = cols.parse_count(&rec, 13, line)?;
        records.push(DailyRecord { date, weather, n_sustained, m_momentary });
    }
    if records.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    Dataset::new(records, provenance)
}

// `{}` on f64 prints the shortest string that parses back to the same bits.

pub fn write_dataset_csv<W: Write>(out: W, ds: &Dataset) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DATASET_HEADER)?;
    for r in ds.records() {
        let mut row = Vec::with_capacity(DATASET_HEADER.len());
        row.push(r.date.format(DATE_FORMAT).to_string());
        row.extend(r.weather.0.iter().map(|v| v.to_string()));
        row.push(r.n_sustained.to_string());
        row.push(r.m_momentary.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_weather_csv<W: Write>(out: W, rows: &[HourlyWeatherRow]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(WEATHER_HEADER)?;
    for r in rows {
        w.write_record([
            r.timestamp.format(TIMESTAMP_FORMAT).to_string(),
            r.temperature.to_string(),
            r.precipitation.to_string(),
            r.pressure.to_string(),
            r.wind_speed.to_string(),
            r.lightning_strikes.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_interruption_csv<W: Write>(out: W, rows: &[InterruptionRow]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(INTERRUPTION_HEADER)?;
    for r in rows {
        w.write_record([r.date.format(DATE_FORMAT).to_string(), r.n_sustained.to_string(), r.m_momentary.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const WEATHER_OK: &str = "timestamp,temperature_f,precip_in,pressure_inhg,wind_mph,lightning\n\
        2015-01-01T02:00,71.5,0,30.01,5,0\n\
        2015-01-01T00:00,70,0.2,30.0,4.5,3\n\
        2015-01-01T01:00,70.2,0,30.02,6,1\n";

    #[test]
    fn weather_rows_come_back_sorted() {
        let rows = read_weather_csv(WEATHER_OK.as_bytes()).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
        assert_eq!(rows[0].temperature, 70.0);
        assert_eq!(rows[0].lightning_strikes, 3);
    }

    #[test]
    fn header_only_is_empty_file() {
        let err = read_weather_csv("timestamp,temperature_f,precip_in,pressure_inhg,wind_mph,lightning\n".as_bytes());
        assert!(matches!(err, Err(IngestError::EmptyFile)));
        let err = read_interruption_csv("date,n_sustained,m_momentary\n".as_bytes());
        assert!(matches!(err, Err(IngestError::EmptyFile)));
    }

    #[test]
    fn bad_temperature_reports_line_and_column() {
        let csv = "timestamp,temperature_f,precip_in,pressure_inhg,wind_mph,lightning\n\
            2015-01-01T00:00,70,0,30,4,0\n\
            2015-01-01T01:00,abc,0,30,4,0\n";
        match read_weather_csv(csv.as_bytes()) {
            Err(IngestError::UnparsableValue { row, column, value }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "temperature_f");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_named() {
        let csv = "timestamp,temperature_f,precip_in,pressure_inhg,wind_mph\n2015-01-01T00:00,70,0,30,4\n";
        assert!(matches!(read_weather_csv(csv.as_bytes()), Err(IngestError::MissingColumn(c)) if c == "lightning"));
    }

    #[test]
    fn negative_precipitation_rejected() {
        let csv = "timestamp,temperature_f,precip_in,pressure_inhg,wind_mph,lightning\n2015-01-01T00:00,70,-0.1,30,4,0\n";
        assert!(matches!(read_weather_csv(csv.as_bytes()), Err(IngestError::InvalidValue { .. })));
    }

    #[test]
    fn duplicate_timestamp_rejected() {
        let csv = "timestamp,temperature_f,precip_in,pressure_inhg,wind_mph,lightning\n\
            2015-01-01T00:00,70,0,30,4,0\n2015-01-01T00:00,71,0,30,4,0\n";
        assert!(matches!(read_weather_csv(csv.as_bytes()), Err(IngestError::DuplicateTimestamp(_))));
    }

    #[test]
    fn interruption_row_parses() {
        let rows = read_interruption_csv("date,n_sustained,m_momentary\n2015-01-01,12,3\n".as_bytes()).unwrap();
        assert_eq!(
            rows,
            vec![InterruptionRow { date: "2015-01-01".parse().unwrap(), n_sustained: 12, m_momentary: 3 }]
        );
    }

    #[test]
    fn interruption_errors() {
        let dup = "date,n_sustained,m_momentary\n2015-01-01,1,1\n2015-01-01,2,2\n";
        assert!(matches!(read_interruption_csv(dup.as_bytes()), Err(IngestError::DuplicateDate(_))));
        let neg = "date,n_sustained,m_momentary\n2015-01-02,-1,0\n";
        assert!(matches!(
            read_interruption_csv(neg.as_bytes()),
            Err(IngestError::NegativeCount { row: 2, ref column }) if column == "n_sustained"
        ));
        let frac = "date,n_sustained,m_momentary\n2015-01-02,1.5,0\n";
        assert!(matches!(read_interruption_csv(frac.as_bytes()), Err(IngestError::UnparsableValue { .. })));
    }

    #[test]
    fn missing_file_names_path() {
        let err = parse_weather_csv("/definitely/not/here.csv").unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.csv"));
    }
}
