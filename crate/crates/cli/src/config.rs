//! Run configuration: flags, an optional config file, and defaults.
//!
//! The config file holds one JSON object whose keys are the long flag
//! names with underscores. A manifest written by an earlier run is also
//! accepted, in which case its recorded configuration is used. Flags win
//! over the file.

use std::path::{Path, PathBuf};

use clap::Args;
use pointfuse::dataset::Modality;
use pointfuse::geometry::Vec3;
use pointfuse::models::{Family, Head, ModelSpec, TrainConfig};
use pointfuse::synthgen::GeneratorConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "POINTFUSE_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "pointfuse-out";

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Config file or manifest of an earlier run.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory [env: POINTFUSE_OUT_DIR, default: pointfuse-out].
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// Model file; bench accepts several.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub model: Vec<PathBuf>,
    /// File with AOI lines (a dataset file works).
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aois: Option<PathBuf>,
    /// Eval report file.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// Ablation results file.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ablation: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of simulated drivers.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drivers: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples_per_aoi: Option<usize>,
    /// Generate without sensor error, driver variation or missing data.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noiseless: Option<bool>,
    /// Full generator configuration; only settable from a config file.
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    /// cnn, rnn, fcnn, svr or rf.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    /// regression or classification.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub head: Option<String>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    /// Comma-separated subset of eye (or gaze), head, finger.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modalities: Option<String>,
    /// AOI ids to keep, e.g. `4-9,12`.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<String>,
    /// Validation drivers per fold.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_drivers: Option<usize>,
    /// Folds trained concurrently.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// Single-sample predictions timed by bench.
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Direction to match, `x,y,z`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<String>,
}

macro_rules! overlay {
    ($top:expr, $base:expr, $($f:ident),*) => {
        RunConfig {
            config: $top.config,
            model: if $top.model.is_empty() { $base.model } else { $top.model },
            generator: $top.generator.or($base.generator),
            $($f: $top.$f.or($base.$f),)*
        }
    };
}

impl RunConfig {
    /// Fields set here win over fields set in `base`.
    pub fn over(self, base: RunConfig) -> RunConfig {
        overlay!(
            self,
            base,
            out_dir,
            dataset,
            aois,
            report,
            ablation,
            seed,
            drivers,
            samples_per_aoi,
            noiseless,
            family,
            head,
            epochs,
            batch_size,
            learning_rate,
            modalities,
            classes,
            val_drivers,
            jobs,
            samples,
            vector
        )
    }

    /// Reads a config file or the configuration recorded in a manifest.
    pub fn from_file(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let bad = |e: serde_json::Error| CliError::config(format!("{}: {e}", path.display()));
        let value: Value = serde_json::from_str(&text).map_err(bad)?;
        let value = match value.get("config") {
            Some(inner) if value.get("command").is_some() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(value).map_err(bad)
    }

    /// Flags over the config file.
    pub fn resolve(self) -> CliResult<RunConfig> {
        match &self.config {
            Some(path) => {
                let file = RunConfig::from_file(path)?;
                Ok(self.over(file))
            }
            None => Ok(self),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    /// Seed for models and plans.
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn generator(&self) -> GeneratorConfig {
        let mut cfg = match (&self.generator, self.noiseless) {
            (Some(g), _) => g.clone(),
            (None, Some(true)) => GeneratorConfig::noiseless(),
            (None, _) => GeneratorConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.drivers {
            cfg.n_drivers = n;
        }
        if let Some(n) = self.samples_per_aoi {
            cfg.samples_per_aoi = n;
        }
        cfg
    }

    pub fn model_spec(&self) -> CliResult<ModelSpec> {
        let family: Family = self.family.as_deref().unwrap_or("cnn").parse()?;
        let head: Head = self.head.as_deref().unwrap_or("regression").parse()?;
        let spec = ModelSpec::new(family, head).with_seed(self.seed());
        spec.validate()?;
        Ok(spec)
    }

    pub fn train_config(&self) -> CliResult<TrainConfig> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
        };
        if cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
            return Err(CliError::config(
                "batch size and learning rate must be positive",
            ));
        }
        Ok(cfg)
    }

    pub fn modalities(&self) -> CliResult<Vec<Modality>> {
        match &self.modalities {
            None => Ok(Modality::ALL.to_vec()),
            Some(s) => {
                let mut m = s
                    .split(',')
                    .map(|x| x.trim().parse::<Modality>())
                    .collect::<Result<Vec<_>, _>>()?;
                m.sort();
                m.dedup();
                Ok(m)
            }
        }
    }

    pub fn classes(&self) -> CliResult<Option<Vec<u32>>> {
        self.classes.as_deref().map(parse_ids).transpose()
    }

    pub fn jobs(&self) -> CliResult<usize> {
        match self.jobs.unwrap_or(1) {
            0 => Err(CliError::config("--jobs must be at least 1")),
            n => Ok(n),
        }
    }

    pub fn vector(&self) -> CliResult<Vec3> {
        let s = self
            .vector
            .as_deref()
            .ok_or_else(|| CliError::config("--vector is required"))?;
        let v = s
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::config(format!("bad --vector `{s}`: {e}")))?;
        match v.as_slice() {
            &[x, y, z] => Ok(Vec3::new(x, y, z)),
            _ => Err(CliError::config(format!(
                "--vector needs three components, got `{s}`"
            ))),
        }
    }
}

/// Parses `1-3,7,10-12` into sorted unique ids.
pub fn parse_ids(s: &str) -> CliResult<Vec<u32>> {
    let bad = || CliError::config(format!("bad class list `{s}`"));
    let mut ids = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u32 = a.trim().parse().map_err(|_| bad())?;
                let b: u32 = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad());
                }
                ids.extend(a..=b);
            }
            None => ids.push(part.parse().map_err(|_| bad())?),
        }
    }
    if ids.is_empty() {
        return Err(bad());
    }
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_ranges() {
        assert_eq!(parse_ids("4-9,12").unwrap(), vec![4, 5, 6, 7, 8, 9, 12]);
        assert_eq!(parse_ids("3,1,2,2").unwrap(), vec![1, 2, 3]);
        assert!(parse_ids("9-4").is_err());
        assert!(parse_ids("").is_err());
        assert!(parse_ids("a").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let file = RunConfig {
            seed: Some(1),
            epochs: Some(3),
            model: vec!["a".into()],
            ..RunConfig::default()
        };
        let flags = RunConfig {
            seed: Some(9),
            ..RunConfig::default()
        };
        let merged = flags.over(file);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.epochs, Some(3));
        assert_eq!(merged.model, vec![PathBuf::from("a")]);
    }

    #[test]
    fn vector_parsing() {
        let c = RunConfig {
            vector: Some("1, -0.5,0".into()),
            ..RunConfig::default()
        };
        assert_eq!(c.vector().unwrap(), Vec3::new(1.0, -0.5, 0.0));
        let c = RunConfig {
            vector: Some("1,2".into()),
            ..RunConfig::default()
        };
        assert!(c.vector().is_err());
    }
}
