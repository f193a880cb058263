//! Monthly tourism-demand forecasting with bagged stacked-autoencoder
//! kernel ELM ensembles (B-SAKE), the MLP and KELM benchmarks, and the
//! evaluation battery used to compare them.
//!
//! The modules follow the data flow: [`dataset`] ingests and lags monthly
//! series, [`features`] builds economic predictors and screens keywords,
//! [`sae`] and [`kelm`] are the two model stages, [`bagging`] resamples and
//! aggregates, [`pipeline`] runs rolling-origin tournaments and
//! [`evaluation`] scores them. [`app`] holds the command implementations.

pub mod app;
pub mod bagging;
pub mod config;
pub mod dataset;
pub mod evaluation;
pub mod features;
pub mod kelm;
pub mod linalg;
pub mod mlp;
pub mod pipeline;
pub mod sae;
pub mod seed;
pub mod synth;

use std::fmt::Debug;
use std::path::PathBuf;

use thiserror::Error;

use config::ConfigError;
use dataset::DatasetError;
use evaluation::EvalError;
use features::FeatureError;
use pipeline::PipelineError;
use synth::SynthError;

/// Any failure surfaced by a command.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Usage(String),
}

/// Leading identifier of a value's `Debug` form, i.e. its variant name.
fn variant<T: Debug>(value: &T) -> String {
    format!("{value:?}")
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect()
}

impl Error {
    /// Module that raised the error and the error's variant name, looking
    /// through pipeline wrappers to the originating module.
    pub fn origin(&self) -> (&'static str, String) {
        match self {
            Error::Config(e) => ("config", variant(e)),
            Error::Io { .. } => ("cli", "Io".into()),
            Error::Usage(_) => ("cli", "Usage".into()),
            Error::Dataset(e) => ("dataset", variant(e)),
            Error::Feature(e) => ("features", variant(e)),
            Error::Synth(e) => ("synth", variant(e)),
            Error::Eval(e) => ("evaluation", variant(e)),
            Error::Pipeline(p) => match p {
                PipelineError::Dataset(e) => ("dataset", variant(e)),
                PipelineError::Feature(e) => ("features", variant(e)),
                PipelineError::Sae(e) => ("sae", variant(e)),
                PipelineError::Kelm(e) => ("kelm", variant(e)),
                PipelineError::Mlp(e) => ("mlp", variant(e)),
                PipelineError::Bagging(e) => ("bagging", variant(e)),
                PipelineError::Eval(e) => ("evaluation", variant(e)),
                e => ("pipeline", variant(e)),
            },
        }
    }
}
