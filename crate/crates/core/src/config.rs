//! Run configuration: a single JSON document naming the data files, the
//! screening options, the tournament settings and the output directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::YearMonth;
use crate::pipeline::{ModelKind, PipelineConfig, ScreeningOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    /// `path` is the JSON path of the offending value (`.` for the root).
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

fn default_country() -> String {
    "country".to_string()
}

fn default_horizons() -> Vec<usize> {
    vec![1, 3, 6]
}

fn default_models() -> Vec<ModelKind> {
    ModelKind::ALL.to_vec()
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_country")]
    pub country: String,
    /// CSV with a `month` column and exactly one series, the target.
    pub arrivals: PathBuf,
    /// CSV of candidate keyword series.
    #[serde(default)]
    pub keywords: Option<PathBuf>,
    /// CSV of the ten raw economic series.
    #[serde(default)]
    pub economic: Option<PathBuf>,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub screening: ScreeningOptions,
    pub pipeline: PipelineConfig,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    /// Reads and validates `path`; relative paths in the file are taken
    /// relative to its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)?;
        let dir = path
            .canonicalize()
            .ok()
            .and_then(|p| p.parent().map(Path::to_path_buf))
            .unwrap_or_default();
        cfg.resolve_paths(&dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.arrivals);
        self.keywords.iter_mut().for_each(fix);
        self.economic.iter_mut().for_each(fix);
        fix(&mut self.out_dir);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(invalid("horizons", "must be a nonempty list of positive integers"));
        }
        if self.models.is_empty() {
            return Err(invalid("models", "must list at least one model"));
        }
        let mut seen = Vec::new();
        for m in &self.models {
            if seen.contains(m) {
                return Err(invalid("models", format!("{m} is listed twice")));
            }
            seen.push(*m);
        }
        let mut h = self.horizons.clone();
        h.sort_unstable();
        h.dedup();
        if h.len() != self.horizons.len() {
            return Err(invalid("horizons", "contains duplicates"));
        }
        if !(self.screening.threshold.is_finite() && self.screening.threshold.abs() <= 1.0) {
            return Err(invalid("screening.threshold", "must lie in [-1, 1]"));
        }
        if self.screening.max_lag == 0 {
            return Err(invalid("screening.max_lag", "must be >= 1"));
        }
        if self.screening.economic_lags == 0 {
            return Err(invalid("screening.economic_lags", "must be >= 1"));
        }
        if !self.pipeline.exogenous.is_empty() {
            return Err(invalid(
                "pipeline.exogenous",
                "exogenous lags are derived from the keyword and economic files",
            ));
        }
        self.pipeline.validate().map_err(|e| invalid("pipeline", e.to_string()))
    }

    /// Applies command-line overrides.
    pub fn override_with(
        &mut self,
        seed: Option<u64>,
        split: Option<YearMonth>,
        out: Option<PathBuf>,
        horizons: Option<Vec<usize>>,
        models: Option<Vec<ModelKind>>,
    ) {
        if let Some(s) = seed {
            self.pipeline.seed = s;
        }
        if let Some(s) = split {
            self.pipeline.split = s;
        }
        if let Some(o) = out {
            self.out_dir = o;
        }
        if let Some(h) = horizons {
            self.horizons = h;
        }
        if let Some(m) = models {
            self.models = m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "arrivals": "a.csv",
        "pipeline": {"split": "2019-01", "target_lags": 12, "seed": 3}
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.horizons, vec![1, 3, 6]);
        assert_eq!(c.models.len(), 6);
        assert_eq!(c.pipeline.replicates, 100);
        c.validate().unwrap();
    }

    #[test]
    fn missing_seed_names_the_field() {
        let text = MINIMAL.replace(r#", "seed": 3"#, "");
        let err = RunConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
        assert!(err.starts_with("pipeline"), "{err}");
    }

    #[test]
    fn unknown_field_reports_its_path() {
        let text = MINIMAL.replace(r#""seed": 3"#, r#""seed": 3, "epochz": 1"#);
        let err = RunConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("epochz"), "{err}");
    }

    #[test]
    fn empty_grid_is_rejected() {
        let text = MINIMAL.replace(r#""seed": 3"#, r#""seed": 3, "c_grid": []"#);
        let c = RunConfig::from_json(&text).unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("grids"));
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut c = RunConfig::from_json(MINIMAL).unwrap();
        c.resolve_paths(Path::new("/data/run"));
        assert_eq!(c.arrivals, PathBuf::from("/data/run/a.csv"));
        assert_eq!(c.out_dir, PathBuf::from("/data/run/out"));
    }
}
