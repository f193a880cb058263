//! Trainable model kinds: SAKE (autoencoder features into a kernel head),
//! the MLP benchmark, and their bagged ensembles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::bagging::{aggregate_forecasts, block_bootstrap, replicate_seed, AggregationRule, BootstrapSample};
use crate::dataset::SupervisedSet;
use crate::features::ScalerState;
use crate::kelm::{fit_kelm, predict_kelm, KelmModel, KernelSpec};
use crate::linalg::Matrix;
use crate::mlp::{train_network, Mlp};
use crate::sae::{sae_encode, train_sae, StackedAutoencoder, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "MLP")]
    Mlp,
    #[serde(rename = "B-MLP")]
    BMlp,
    #[serde(rename = "KELM")]
    Kelm,
    #[serde(rename = "B-KELM")]
    BKelm,
    #[serde(rename = "SAKE")]
    Sake,
    #[serde(rename = "B-SAKE")]
    BSake,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Mlp,
        ModelKind::BMlp,
        ModelKind::Kelm,
        ModelKind::BKelm,
        ModelKind::Sake,
        ModelKind::BSake,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "MLP",
            ModelKind::BMlp => "B-MLP",
            ModelKind::Kelm => "KELM",
            ModelKind::BKelm => "B-KELM",
            ModelKind::Sake => "SAKE",
            ModelKind::BSake => "B-SAKE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }

    pub fn is_bagged(self) -> bool {
        matches!(self, ModelKind::BMlp | ModelKind::BKelm | ModelKind::BSake)
    }

    /// The unbagged kind a bagged kind wraps.
    pub fn base(self) -> Self {
        match self {
            ModelKind::BMlp => ModelKind::Mlp,
            ModelKind::BKelm => ModelKind::Kelm,
            ModelKind::BSake => ModelKind::Sake,
            k => k,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Tuned settings of one base kind for one forecast step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum HyperParams {
    /// `gamma_scale / width` is the kernel gamma; `layers` empty means no
    /// autoencoder.
    Kernel {
        layers: Vec<usize>,
        gamma_scale: f64,
        c: f64,
    },
    Mlp { hidden: usize },
}

fn without_intercept(set: &SupervisedSet) -> (Vec<String>, Matrix) {
    let names = set.feature_names[1..].to_vec();
    (names, set.predictors.drop_leading_columns(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SakeModel {
    pub scaler: ScalerState,
    pub sae: StackedAutoencoder,
    pub kelm: KelmModel,
    pub horizon: usize,
    pub params: HyperParams,
}

impl SakeModel {
    /// Predicts from raw design rows (intercept first).
    pub fn predict(&self, rows: &Matrix) -> Result<Vec<f64>, PipelineError> {
        let x = self.scaler.transform_matrix(&rows.drop_leading_columns(1))?;
        let codes = sae_encode(&self.sae, &x)?;
        Ok(predict_kelm(&self.kelm, &codes)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }
}

/// Scaler on predictors without the intercept, autoencoder stack on the
/// scaled predictors, and a Gaussian KELM on the codes against raw targets.
pub fn train_sake(
    train: &SupervisedSet,
    layers: &[usize],
    gamma_scale: f64,
    c: f64,
    sae_cfg: &TrainConfig,
) -> Result<SakeModel, PipelineError> {
    if train.rows() == 0 {
        return Err(PipelineError::EmptyTraining);
    }
    let (names, x) = without_intercept(train);
    let scaler = ScalerState::fit_matrix(&names, &x)?;
    let z = scaler.transform_matrix(&x)?;
    let sae = train_sae(&z, layers, sae_cfg)?;
    let codes = sae_encode(&sae, &z)?;
    let gamma = gamma_scale / codes.cols().max(1) as f64;
    let kelm = fit_kelm(&codes, &train.targets, KernelSpec::gaussian(gamma)?, c)?;
    Ok(SakeModel {
        scaler,
        sae,
        kelm,
        horizon: train.horizon,
        params: HyperParams::Kernel {
            layers: layers.to_vec(),
            gamma_scale,
            c,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub scaler: ScalerState,
    pub target_scaler: ScalerState,
    pub net: Mlp,
    pub horizon: usize,
}

impl MlpModel {
    pub fn predict(&self, rows: &Matrix) -> Result<Vec<f64>, PipelineError> {
        let x = self.scaler.transform_matrix(&rows.drop_leading_columns(1))?;
        let p = self.net.predict(&x)?;
        Ok(p.into_iter().map(|v| self.target_scaler.unscale(0, v)).collect())
    }
}

/// Perceptron on scaled predictors with min-max scaled targets.
pub fn train_mlp(train: &SupervisedSet, hidden: usize, cfg: &TrainConfig) -> Result<MlpModel, PipelineError> {
    if train.rows() == 0 {
        return Err(PipelineError::EmptyTraining);
    }
    let (names, x) = without_intercept(train);
    let scaler = ScalerState::fit_matrix(&names, &x)?;
    let z = scaler.transform_matrix(&x)?;
    let target_scaler = ScalerState::fit_values("target", &train.targets)?;
    let y: Vec<f64> = train.targets.iter().map(|&v| target_scaler.scale(0, v)).collect();
    let net = train_network(&z, &y, hidden, cfg)?;
    Ok(MlpModel {
        scaler,
        target_scaler,
        net,
        horizon: train.horizon,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum SingleModel {
    Sake(SakeModel),
    Mlp(MlpModel),
}

impl SingleModel {
    pub fn predict(&self, rows: &Matrix) -> Result<Vec<f64>, PipelineError> {
        match self {
            SingleModel::Sake(m) => m.predict(rows),
            SingleModel::Mlp(m) => m.predict(rows),
        }
    }
}

/// Seed and settings shared by every training in one forecast cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings<'a> {
    pub params: &'a HyperParams,
    pub sae: &'a TrainConfig,
    pub mlp: &'a TrainConfig,
}

pub fn train_single(
    train: &SupervisedSet,
    settings: &FitSettings<'_>,
    seed: u64,
) -> Result<SingleModel, PipelineError> {
    match settings.params {
        HyperParams::Kernel {
            layers,
            gamma_scale,
            c,
        } => train_sake(train, layers, *gamma_scale, *c, &settings.sae.with_seed(seed))
            .map(SingleModel::Sake),
        HyperParams::Mlp { hidden } => {
            train_mlp(train, *hidden, &settings.mlp.with_seed(seed)).map(SingleModel::Mlp)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble<M> {
    pub members: Vec<M>,
    pub seeds: Vec<u64>,
    pub rule: AggregationRule,
    pub block_length: usize,
}

pub type BsakeEnsemble = Ensemble<SakeModel>;

impl Ensemble<SingleModel> {
    pub fn predict(&self, rows: &Matrix) -> Result<Vec<f64>, PipelineError> {
        aggregate_members(&self.members, rows, self.rule, SingleModel::predict)
    }
}

impl BsakeEnsemble {
    pub fn predict(&self, rows: &Matrix) -> Result<Vec<f64>, PipelineError> {
        aggregate_members(&self.members, rows, self.rule, SakeModel::predict)
    }

    pub fn member_predictions(&self, rows: &Matrix) -> Result<Vec<Vec<f64>>, PipelineError> {
        self.members.iter().map(|m| m.predict(rows)).collect()
    }
}

fn aggregate_members<M: Sync>(
    members: &[M],
    rows: &Matrix,
    rule: AggregationRule,
    predict: fn(&M, &Matrix) -> Result<Vec<f64>, PipelineError>,
) -> Result<Vec<f64>, PipelineError> {
    let per: Vec<Vec<f64>> = members
        .par_iter()
        .map(|m| predict(m, rows))
        .collect::<Result<_, _>>()?;
    (0..rows.rows())
        .map(|i| {
            let column: Vec<f64> = per.iter().map(|p| p[i]).collect();
            Ok(aggregate_forecasts(&column, rule)?)
        })
        .collect()
}

/// Member `k` (1-based) trains on block-bootstrap replicate `k` of
/// `train` with model seed `replicate_seed(master, k)`.
pub fn train_ensemble<M: Send>(
    train: &SupervisedSet,
    replicates: usize,
    block_length: usize,
    rule: AggregationRule,
    master: u64,
    fit: impl Fn(&BootstrapSample, u64) -> Result<M, PipelineError> + Sync,
) -> Result<Ensemble<M>, PipelineError> {
    if replicates == 0 {
        return Err(PipelineError::InvalidConfig("replicates must be >= 1".into()));
    }
    let m = block_length.min(train.rows());
    let members = (1..=replicates)
        .into_par_iter()
        .map(|k| {
            let sample = block_bootstrap(train, m, k, master)?;
            fit(&sample, replicate_seed(master, k))
        })
        .collect::<Result<Vec<M>, _>>()?;
    Ok(Ensemble {
        members,
        seeds: (1..=replicates).map(|k| replicate_seed(master, k)).collect(),
        rule,
        block_length: m,
    })
}

pub fn train_bsake(
    train: &SupervisedSet,
    replicates: usize,
    block_length: usize,
    rule: AggregationRule,
    master: u64,
    layers: &[usize],
    gamma_scale: f64,
    c: f64,
    sae_cfg: &TrainConfig,
) -> Result<BsakeEnsemble, PipelineError> {
    train_ensemble(train, replicates, block_length, rule, master, |sample, seed| {
        train_sake(&sample.set, layers, gamma_scale, c, &sae_cfg.with_seed(seed))
    })
}

/// A trained model of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Fitted {
    Single(SingleModel),
    Bagged(Ensemble<SingleModel>),
}

impl Fitted {
    pub fn predict(&self, rows: &Matrix) -> Result<Vec<f64>, PipelineError> {
        match self {
            Fitted::Single(m) => m.predict(rows),
            Fitted::Bagged(e) => e.predict(rows),
        }
    }
}

/// Bagging parameters of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BagSettings {
    pub replicates: usize,
    pub block_length: usize,
    pub rule: AggregationRule,
}

pub fn fit_kind(
    kind: ModelKind,
    train: &SupervisedSet,
    settings: &FitSettings<'_>,
    bag: BagSettings,
    seed: u64,
) -> Result<Fitted, PipelineError> {
    if kind.is_bagged() {
        train_ensemble(train, bag.replicates, bag.block_length, bag.rule, seed, |sample, s| {
            train_single(&sample.set, settings, s)
        })
        .map(Fitted::Bagged)
    } else {
        // A single model is member 1 of a one-member ensemble, so bagging
        // with one replicate and one block reduces to it exactly.
        train_single(train, settings, replicate_seed(seed, 1)).map(Fitted::Single)
    }
}
