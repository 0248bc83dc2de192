use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::args::{parse_split, Opts, Part, Scaling, TargetSelection};
use crate::error::CliError;

/// Settings from `--config` merged with command-line flags; flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub weather: Option<PathBuf>,
    pub interruptions: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    pub restarts: Option<usize>,
    pub hidden: Option<usize>,
    pub base_temp: Option<f64>,
    #[serde(deserialize_with = "split_field")]
    pub split: Option<[f64; 3]>,
    pub target: Option<TargetSelection>,
    pub catalog: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub spec: Option<PathBuf>,
    pub days: Option<usize>,
    pub planted: Option<bool>,
    pub on: Option<Part>,
    pub scaling: Option<Scaling>,
}

/// Accepts `[0.6, 0.15, 0.25]` or `"0.6,0.15,0.25"`.
fn split_field<'de, D: Deserializer<'de>>(d: D) -> Result<Option<[f64; 3]>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Split {
        List([f64; 3]),
        Text(String),
    }
    match Option::<Split>::deserialize(d)? {
        None => Ok(None),
        Some(Split::List(v)) => Ok(Some(v)),
        Some(Split::Text(s)) => parse_split(&s).map(Some).map_err(serde::de::Error::custom),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        // paths inside the file are relative to the file itself
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.weather,
            &mut cfg.interruptions,
            &mut cfg.dataset,
            &mut cfg.out,
            &mut cfg.catalog,
            &mut cfg.model,
            &mut cfg.spec,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Read `opts.config` if given and overlay the flags.
    pub fn resolve(opts: &Opts) -> Result<Self, CliError> {
        let file = match &opts.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Ok(file.overlay(opts))
    }

    fn overlay(self, o: &Opts) -> Self {
        RunConfig {
            weather: o.weather.clone().or(self.weather),
            interruptions: o.interruptions.clone().or(self.interruptions),
            dataset: o.dataset.clone().or(self.dataset),
            out: o.out.clone().or(self.out),
            seed: o.seed.or(self.seed),
            delta: o.delta.or(self.delta),
            restarts: o.restarts.or(self.restarts),
            hidden: o.hidden.or(self.hidden),
            base_temp: o.base_temp.or(self.base_temp),
            split: o.split.or(self.split),
            target: o.target.or(self.target),
            catalog: o.catalog.clone().or(self.catalog),
            model: o.model.clone().or(self.model),
            spec: o.spec.clone().or(self.spec),
            days: o.days.or(self.days),
            planted: if o.planted { Some(true) } else { self.planted },
            on: o.on.or(self.on),
            scaling: o.scaling.or(self.scaling),
        }
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.out.as_deref().ok_or_else(|| CliError::Usage("--out is required".into()))
    }

    pub fn split(&self) -> Result<(f64, f64, f64), CliError> {
        let [a, b, c] = self.split.unwrap_or([0.60, 0.15, 0.25]);
        let ok = [a, b, c].iter().all(|f| f.is_finite() && *f >= 0.0) && ((a + b + c) - 1.0).abs() <= 1e-9;
        if !ok {
            return Err(CliError::Usage(format!("split fractions must be non-negative and sum to 1, got {a},{b},{c}")));
        }
        Ok((a, b, c))
    }

    pub fn target(&self) -> TargetSelection {
        self.target.unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file: RunConfig = serde_json::from_str(r#"{"seed": 4, "split": "0.5,0.25,0.25", "hidden": 12}"#).unwrap();
        let opts = Opts { seed: Some(9), ..Opts::default() };
        let merged = file.overlay(&opts);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.hidden, Some(12));
        assert_eq!(merged.split().unwrap(), (0.5, 0.25, 0.25));
    }

    #[test]
    fn split_accepts_a_list_and_rejects_bad_sums() {
        let cfg: RunConfig = serde_json::from_str(r#"{"split": [0.7, 0.1, 0.2]}"#).unwrap();
        assert_eq!(cfg.split, Some([0.7, 0.1, 0.2]));
        let bad = RunConfig { split: Some([0.5, 0.5, 0.5]), ..RunConfig::default() };
        assert!(bad.split().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
    }
}
