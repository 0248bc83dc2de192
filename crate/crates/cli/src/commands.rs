use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use gridcast::feature::{Feature, Target};
use gridcast::ingest::{
    aggregate_daily, align, parse_interruption_csv, parse_weather_csv, read_dataset_csv, split_chronological,
    write_dataset_csv, write_interruption_csv, write_weather_csv, DailyRecord, Dataset, DEFAULT_BASE_TEMP_F,
};
use gridcast::mlp::{ElmConfig, TrainedForecaster};
use gridcast::pipeline::{run_with_catalogs, ModelFile, PipelineConfig, PipelineRun};
use gridcast::regression::{fit_catalog, ModelCatalog, ModelKind};
use gridcast::sensitivity::{aggregate_with, write_report_csv, ScoreScaling, SensitivityReport};
use gridcast::synth::{generate, SyntheticSpec};

use crate::args::{Part, Scaling, TargetSelection};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::OutDir;

/// Version tag of catalog files.
pub const CATALOG_FORMAT_VERSION: &str = "gridcast-catalog/1";

pub const FIT_TABLE_HEADER: [&str; 10] =
    ["target", "parameter", "model", "sse", "r2", "adj_r2", "rmse", "dof", "winner", "error"];
pub const FORECAST_HEADER: [&str; 3] = ["date", "n_hat", "m_hat"];
pub const PREDICTIONS_HEADER: [&str; 8] = ["date", "part", "n", "n_hat", "n_baseline", "m", "m_hat", "m_baseline"];

/// What `ingest` kept and dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub provenance: String,
    pub base_temp: f64,
    pub hourly_rows: usize,
    pub weather_days: usize,
    /// Days with too few hourly observations.
    pub skipped_days: Vec<NaiveDate>,
    pub interruption_days: usize,
    pub aligned_days: usize,
    pub weather_only_days: Vec<NaiveDate>,
    pub interruption_only_days: Vec<NaiveDate>,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
}

/// Catalogs written by `fit`. Absent targets are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogFile {
    pub version: String,
    pub split: [f64; 3],
    pub train_days: usize,
    pub n: Option<ModelCatalog>,
    pub m: Option<ModelCatalog>,
}

fn targets(sel: TargetSelection) -> Vec<Target> {
    match sel {
        TargetSelection::N => vec![Target::N],
        TargetSelection::M => vec![Target::M],
        TargetSelection::Both => Target::BOTH.to_vec(),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| CliError::Usage(format!("invalid {what} {}: {e}", path.display())))
}

fn base_temp(cfg: &RunConfig) -> Result<f64, CliError> {
    let t = cfg.base_temp.unwrap_or(DEFAULT_BASE_TEMP_F);
    if !t.is_finite() {
        return Err(CliError::Usage(format!("base temperature must be finite, got {t}")));
    }
    Ok(t)
}

/// Aggregate and align the hourly and daily files.
fn ingest_files(weather: &Path, interruptions: &Path, base_temp: f64) -> Result<(Dataset, IngestSummary), CliError> {
    let hourly = parse_weather_csv(weather)?;
    let counts = parse_interruption_csv(interruptions)?;
    let daily = aggregate_daily(&hourly, base_temp);
    let ds = align(&daily.days, &counts)?;
    let kept: BTreeSet<NaiveDate> = ds.records().iter().map(|r| r.date).collect();
    let summary = IngestSummary {
        provenance: ds.provenance().to_string(),
        base_temp,
        hourly_rows: hourly.len(),
        weather_days: daily.days.len(),
        skipped_days: daily.skipped.clone(),
        interruption_days: counts.len(),
        aligned_days: ds.len(),
        weather_only_days: daily.days.iter().map(|d| d.date).filter(|d| !kept.contains(d)).collect(),
        interruption_only_days: counts.iter().map(|c| c.date).filter(|d| !kept.contains(d)).collect(),
        first_date: ds.records()[0].date,
        last_date: ds.records()[ds.len() - 1].date,
    };
    Ok((ds, summary))
}

/// `--dataset`, or `--weather` with `--interruptions`.
fn load_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    match (&cfg.dataset, &cfg.weather, &cfg.interruptions) {
        (Some(path), _, _) => {
            let file = File::open(path).map_err(|e| CliError::io(path, e))?;
            Ok(read_dataset_csv(std::io::BufReader::new(file), path.display().to_string())?)
        }
        (None, Some(w), Some(i)) => Ok(ingest_files(w, i, base_temp(cfg)?)?.0),
        _ => Err(CliError::Usage("provide --dataset, or both --weather and --interruptions".into())),
    }
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let out = OutDir::create(cfg.out_dir()?)?;
    let mut spec = match (&cfg.spec, cfg.planted.unwrap_or(false)) {
        (Some(_), true) => return Err(CliError::Usage("--spec and --planted are mutually exclusive".into())),
        (Some(path), false) => read_json::<SyntheticSpec>(path, "synthetic spec")?,
        (None, true) => SyntheticSpec::planted(cfg.seed.unwrap_or(0))?,
        (None, false) => SyntheticSpec::default(),
    };
    if let Some(seed) = cfg.seed {
        spec.seed = seed;
    }
    if let Some(days) = cfg.days {
        spec.days = days;
    }
    if cfg.base_temp.is_some() {
        spec.base_temp = base_temp(cfg)?;
    }
    let data = generate(&spec)?;
    out.write_with("weather.csv", |w| Ok(write_weather_csv(w, &data.hourly)?))?;
    out.write_with("interruptions.csv", |w| Ok(write_interruption_csv(w, &data.interruptions)?))?;
    out.write_with("dataset.csv", |w| Ok(write_dataset_csv(w, &data.dataset)?))?;
    out.write_json("ground_truth.json", &data.truth)?;
    out.write_json("spec.json", &spec)?;
    println!(
        "synthesized {} hourly rows and {} aligned days (seed {}) into {}",
        data.hourly.len(),
        data.dataset.len(),
        spec.seed,
        cfg.out_dir()?.display()
    );
    Ok(())
}

pub fn ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let (Some(weather), Some(interruptions)) = (&cfg.weather, &cfg.interruptions) else {
        return Err(CliError::Usage("ingest needs --weather and --interruptions".into()));
    };
    let (ds, summary) = ingest_files(weather, interruptions, base_temp(cfg)?)?;
    let out = OutDir::create(cfg.out_dir()?)?;
    out.write_with("dataset.csv", |w| Ok(write_dataset_csv(w, &ds)?))?;
    out.write_json("ingest_summary.json", &summary)?;
    println!("aligned {} days ({} to {})", summary.aligned_days, summary.first_date, summary.last_date);
    let list = |d: &[NaiveDate]| d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ");
    for (label, days) in [
        ("skipped for missing hours", &summary.skipped_days),
        ("weather without counts", &summary.weather_only_days),
        ("counts without weather", &summary.interruption_only_days),
    ] {
        if !days.is_empty() {
            println!("dropped {} day(s) {label}: {}", days.len(), list(days));
        }
    }
    Ok(())
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn write_fit_table(w: &mut dyn Write, catalogs: &[&ModelCatalog]) -> Result<(), CliError> {
    let mut csv = csv::Writer::from_writer(w);
    let emit = |csv: &mut csv::Writer<&mut dyn Write>, row: [String; 10]| csv.write_record(row);
    (|| -> csv::Result<()> {
        csv.write_record(FIT_TABLE_HEADER)?;
        for c in catalogs {
            for f in Feature::ALL {
                if let Some(entry) = c.entry(f) {
                    for (i, cand) in entry.candidates.iter().enumerate() {
                        let row = [
                            c.target.to_string(),
                            f.to_string(),
                            cand.kind.label(),
                            fmt_opt(cand.sse),
                            fmt_opt(cand.r2),
                            fmt_opt(cand.adj_r2),
                            fmt_opt(cand.rmse),
                            fmt_opt(cand.dof),
                            (i == entry.winner).to_string(),
                            cand.error.clone().unwrap_or_default(),
                        ];
                        emit(&mut csv, row)?;
                    }
                } else {
                    let reason = c.dropped.iter().find(|d| d.feature == f).map_or("not fitted", |d| d.reason.as_str());
                    for kind in ModelKind::CANDIDATES {
                        let mut row: [String; 10] = Default::default();
                        row[0] = c.target.to_string();
                        row[1] = f.to_string();
                        row[2] = kind.label();
                        row[8] = "false".into();
                        row[9] = format!("parameter dropped: {reason}");
                        emit(&mut csv, row)?;
                    }
                }
            }
        }
        csv.flush()?;
        Ok(())
    })()
    .map_err(|e| CliError::Usage(format!("cannot write fit table: {e}")))
}

pub fn fit(cfg: &RunConfig) -> Result<(), CliError> {
    let ds = load_dataset(cfg)?;
    let fractions = cfg.split()?;
    let split = split_chronological(&ds, fractions)?;
    let mut catalogs = Vec::new();
    for t in targets(cfg.target()) {
        let c = fit_catalog(&split.train, t)?;
        if c.entries.is_empty() {
            return Err(CliError::AllFeaturesFailed(format!("target {t}")));
        }
        catalogs.push(c);
    }
    let out = OutDir::create(cfg.out_dir()?)?;
    out.write_with("fit_table.csv", |w| write_fit_table(w, &catalogs.iter().collect::<Vec<_>>()))?;
    let pick = |t: Target| catalogs.iter().find(|c| c.target == t).cloned();
    let file = CatalogFile {
        version: CATALOG_FORMAT_VERSION.to_string(),
        split: [fractions.0, fractions.1, fractions.2],
        train_days: split.train.len(),
        n: pick(Target::N),
        m: pick(Target::M),
    };
    out.write_json("catalog.json", &file)?;
    for c in &catalogs {
        let winners: Vec<String> = c.entries.iter().map(|e| format!("{}={}", e.feature, e.candidates[e.winner].kind.label())).collect();
        println!("{}: {}", c.target, winners.join(" "));
        for d in &c.dropped {
            warn!("{}: dropped {}: {}", c.target, d.feature, d.reason);
        }
    }
    Ok(())
}

fn elm_config(cfg: &RunConfig) -> Result<ElmConfig, CliError> {
    let d = ElmConfig::default();
    let elm = ElmConfig {
        delta: cfg.delta.unwrap_or(d.delta),
        seed: cfg.seed.unwrap_or(d.seed),
        restarts: cfg.restarts.unwrap_or(d.restarts),
        hidden_count: cfg.hidden.unwrap_or(d.hidden_count),
        ..d
    };
    elm.validate()?;
    Ok(elm)
}

fn load_catalogs(path: &Path) -> Result<(ModelCatalog, ModelCatalog), CliError> {
    let file: CatalogFile = read_json(path, "catalog")?;
    if file.version != CATALOG_FORMAT_VERSION {
        return Err(CliError::Usage(format!("unsupported catalog version '{}'", file.version)));
    }
    match (file.n, file.m) {
        (Some(n), Some(m)) if n.target == Target::N && m.target == Target::M => Ok((n, m)),
        _ => Err(CliError::Usage(format!("{} must hold both the N and the M catalog", path.display()))),
    }
}

fn write_predictions(w: &mut dyn Write, run: &PipelineRun) -> Result<(), CliError> {
    let mut csv = csv::Writer::from_writer(w);
    let parts = [("train", &run.split.train), ("validate", &run.split.validate), ("test", &run.split.test)];
    (|| -> Result<(), CliError> {
        let io = |e: csv::Error| CliError::Usage(format!("cannot write predictions: {e}"));
        csv.write_record(PREDICTIONS_HEADER).map_err(io)?;
        for (part, ds) in parts {
            for r in ds.records() {
                let hybrid = run.forecaster.forecast(r)?;
                let base = run.baseline.forecast(r);
                csv.write_record([
                    r.date.to_string(),
                    part.to_string(),
                    r.n_sustained.to_string(),
                    hybrid[0].to_string(),
                    base[0].to_string(),
                    r.m_momentary.to_string(),
                    hybrid[1].to_string(),
                    base[1].to_string(),
                ])
                .map_err(io)?;
            }
        }
        csv.flush().map_err(|e| io(e.into()))
    })()
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let ds = load_dataset(cfg)?;
    let (a, b, c) = cfg.split()?;
    let pipeline = PipelineConfig { split: (a, b, c), elm: elm_config(cfg)? };
    let catalogs = cfg.catalog.as_deref().map(load_catalogs).transpose()?;
    let out = OutDir::create(cfg.out_dir()?)?;
    let run = run_with_catalogs(&ds, &pipeline, catalogs)?;
    let model = ModelFile::new(&run.forecaster, base_temp(cfg)?, Some(run.report.clone()));
    out.write_json("model.json", &model)?;
    out.write_json("metrics.json", &model.metrics)?;
    out.write_with("predictions.csv", |w| write_predictions(w, &run))?;
    info!("chosen restart {} with lambda {}", run.forecaster.chosen_restart, run.forecaster.lambda);
    for t in targets(cfg.target()) {
        let o = run.report.output(t);
        println!(
            "{t}: test MSE hybrid {:.4} baseline {:.4} reduction {}",
            o.hybrid.test,
            o.baseline.test,
            o.test_reduction_pct.map_or_else(|| "n/a".to_string(), |p| format!("{p:.2}%"))
        );
    }
    Ok(())
}

fn load_model(cfg: &RunConfig) -> Result<(TrainedForecaster, f64), CliError> {
    let path = cfg.model.as_deref().ok_or_else(|| CliError::Usage("--model is required".into()))?;
    let file: ModelFile = read_json(path, "model")?;
    let base_temp = file.base_temp;
    Ok((file.into_forecaster()?, base_temp))
}

pub fn forecast(cfg: &RunConfig) -> Result<(), CliError> {
    let (forecaster, model_base_temp) = load_model(cfg)?;
    let records: Vec<DailyRecord> = match (&cfg.dataset, &cfg.weather) {
        (Some(_), _) => load_dataset(cfg)?.records().to_vec(),
        (None, Some(weather)) => {
            if cfg.base_temp.is_some_and(|t| t != model_base_temp) {
                warn!("ignoring --base-temp; the model was trained with {model_base_temp}");
            }
            let days = aggregate_daily(&parse_weather_csv(weather)?, model_base_temp).days;
            if days.is_empty() {
                return Err(CliError::Usage(format!("{} has no day with enough hourly data", weather.display())));
            }
            days.into_iter()
                .map(|d| DailyRecord { date: d.date, weather: d.features, n_sustained: 0, m_momentary: 0 })
                .collect()
        }
        (None, None) => return Err(CliError::Usage("forecast needs --weather or --dataset".into())),
    };
    let out = OutDir::create(cfg.out_dir()?)?;
    out.write_with("forecast.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        let io = |e: csv::Error| CliError::Usage(format!("cannot write forecast: {e}"));
        csv.write_record(FORECAST_HEADER).map_err(io)?;
        for r in &records {
            let y = forecaster.forecast(r)?;
            csv.write_record([r.date.to_string(), y[0].to_string(), y[1].to_string()]).map_err(io)?;
        }
        csv.flush().map_err(|e| io(e.into()))
    })?;
    println!("forecast {} days", records.len());
    Ok(())
}

pub fn sensitivity(cfg: &RunConfig) -> Result<(), CliError> {
    let (forecaster, _) = load_model(cfg)?;
    let ds = load_dataset(cfg)?;
    let part = cfg.on.unwrap_or_default();
    let data = match part {
        Part::All => ds,
        _ => {
            let split = split_chronological(&ds, cfg.split()?)?;
            match part {
                Part::Train => split.train,
                Part::Validate => split.validate,
                _ => split.test,
            }
        }
    };
    if data.is_empty() {
        return Err(CliError::Usage(format!("the {part:?} part of the dataset is empty").to_lowercase()));
    }
    let scaling = match cfg.scaling.unwrap_or_default() {
        Scaling::TrainingStd => ScoreScaling::TrainingStd,
        Scaling::Raw => ScoreScaling::Raw,
    };
    let full = aggregate_with(&forecaster, &data, scaling)?;
    let wanted = targets(cfg.target());
    let report = SensitivityReport {
        outputs: full.outputs.into_iter().filter(|o| wanted.contains(&o.output)).collect(),
        ..full
    };
    let out = OutDir::create(cfg.out_dir()?)?;
    out.write_json("sensitivity.json", &report)?;
    out.write_with("sensitivity.csv", |w| {
        write_report_csv(&report, w).map_err(|e| CliError::Usage(format!("cannot write sensitivity table: {e}")))
    })?;
    for o in &report.outputs {
        let top: Vec<String> = o.ranked.iter().take(3).map(|f| format!("{f} {:.3}", o.score(*f))).collect();
        println!("{}: {}", o.output, top.join(", "));
    }
    Ok(())
}
