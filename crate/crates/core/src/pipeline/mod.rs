//! SAKE and B-SAKE composition, rolling-origin direct forecasting and the
//! six-model benchmark tournament.

mod inputs;
mod model;
mod report;
mod rolling;

pub use inputs::{prepare_data, PreparedData, ScreeningOptions};
pub use model::{
    fit_kind, train_bsake, train_ensemble, train_mlp, train_sake, train_single, BagSettings,
    BsakeEnsemble, Ensemble, FitSettings, Fitted, HyperParams, MlpModel, ModelKind,
    SakeModel, SingleModel,
};
pub use report::{
    run_benchmarks, BenchmarkRun, CellReport, ComparisonReport, HorizonReport, SchemeMetrics,
};
pub use rolling::{
    cell_seed, rolling_forecast, roll_schedule, tune, tune_seed, ForecastEntry, ForecastSeries, Scheme,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bagging::{AggregationRule, BaggingError, DEFAULT_BLOCK_LENGTH, DEFAULT_REPLICATES};
use crate::dataset::{DatasetError, ExogenousLag, LagSpec, YearMonth};
use crate::evaluation::EvalError;
use crate::features::FeatureError;
use crate::kelm::KelmError;
use crate::mlp::MlpError;
use crate::sae::{SaeError, TrainConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("horizon {horizon} exceeds the {span}-month test span")]
    HorizonExceedsTestSpan { horizon: usize, span: usize },
    #[error("training set is empty")]
    EmptyTraining,
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Sae(#[from] SaeError),
    #[error(transparent)]
    Kelm(#[from] KelmError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Bagging(#[from] BaggingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn default_sae_training() -> TrainConfig {
    TrainConfig {
        epochs: 200,
        learning_rate: 10.0,
        batch_size: 32,
        seed: 0,
        init_scale: None,
    }
}

fn default_mlp_training() -> TrainConfig {
    TrainConfig {
        epochs: 300,
        learning_rate: 0.1,
        batch_size: 16,
        seed: 0,
        init_scale: None,
    }
}

fn default_gamma_grid() -> Vec<f64> {
    vec![0.25, 1.0, 4.0]
}

fn default_c_grid() -> Vec<f64> {
    vec![10.0, 100.0, 1000.0, 10000.0]
}

fn default_hidden_grid() -> Vec<usize> {
    vec![4, 8, 16]
}

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

fn default_block_length() -> usize {
    DEFAULT_BLOCK_LENGTH
}

fn default_validation() -> usize {
    12
}

fn default_true() -> bool {
    true
}

/// Everything the tournament needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// First out-of-sample month.
    pub split: YearMonth,
    pub target_lags: usize,
    #[serde(default)]
    pub exogenous: Vec<ExogenousLag>,
    /// Autoencoder widths; `None` tunes over `[ceil(d/2), ceil(d/4)]`,
    /// `[d]` and `[ceil(d/2)]`.
    #[serde(default)]
    pub sae_layers: Option<Vec<usize>>,
    #[serde(default = "default_sae_training")]
    pub sae_training: TrainConfig,
    #[serde(default = "default_mlp_training")]
    pub mlp_training: TrainConfig,
    /// Multiples of `1 / width` tried as kernel gamma.
    #[serde(default = "default_gamma_grid")]
    pub gamma_grid: Vec<f64>,
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    #[serde(default = "default_hidden_grid")]
    pub mlp_hidden_grid: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_block_length")]
    pub block_length: usize,
    #[serde(default)]
    pub aggregation: AggregationRule,
    /// Tail months of the in-sample span held out for tuning.
    #[serde(default = "default_validation")]
    pub validation_months: usize,
    /// Retrain at every rolling origin; otherwise reuse the first origin's
    /// models.
    #[serde(default = "default_true")]
    pub retrain: bool,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(split: YearMonth, target_lags: usize, exogenous: Vec<ExogenousLag>, seed: u64) -> Self {
        Self {
            split,
            target_lags,
            exogenous,
            sae_layers: None,
            sae_training: default_sae_training(),
            mlp_training: default_mlp_training(),
            gamma_grid: default_gamma_grid(),
            c_grid: default_c_grid(),
            mlp_hidden_grid: default_hidden_grid(),
            replicates: default_replicates(),
            block_length: default_block_length(),
            aggregation: AggregationRule::Mean,
            validation_months: default_validation(),
            retrain: true,
            seed,
        }
    }

    pub fn lag_spec(&self, horizon: usize) -> LagSpec {
        LagSpec::new(self.target_lags, self.exogenous.clone(), horizon)
    }

    pub fn bag(&self) -> BagSettings {
        BagSettings {
            replicates: self.replicates,
            block_length: self.block_length,
            rule: self.aggregation,
        }
    }

    /// Candidate autoencoder widths for predictors of width `d` (intercept
    /// excluded).
    pub fn layer_candidates(&self, d: usize) -> Vec<Vec<usize>> {
        match &self.sae_layers {
            Some(l) => vec![l.clone()],
            None => {
                let mut out = vec![crate::sae::default_layer_sizes(d), vec![d], vec![d.div_ceil(2)]];
                out.dedup();
                out
            }
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidConfig(m.to_string()));
        self.lag_spec(1).validate()?;
        if self.gamma_grid.is_empty() || self.c_grid.is_empty() || self.mlp_hidden_grid.is_empty() {
            return bad("hyperparameter grids must be nonempty");
        }
        if self.gamma_grid.iter().chain(&self.c_grid).any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("gamma and C grid values must be positive");
        }
        if self.mlp_hidden_grid.contains(&0) {
            return bad("MLP hidden sizes must be >= 1");
        }
        if self.replicates == 0 {
            return bad("replicates must be >= 1");
        }
        if self.block_length == 0 {
            return bad("block_length must be >= 1");
        }
        if self.validation_months == 0 {
            return bad("validation_months must be >= 1");
        }
        self.sae_training.validate()?;
        self.mlp_training.validate()?;
        Ok(())
    }
}
