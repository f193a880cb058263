//! Rolling-origin direct forecasting and in-sample hyperparameter tuning.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{
    fit_kind, train_mlp, train_sake, FitSettings, Fitted, HyperParams, ModelKind,
};
use super::{PipelineConfig, PipelineError};
use crate::dataset::{build_design_matrix, SupervisedSet, TimeSeriesTable, YearMonth};
use crate::bagging::{aggregate_forecasts, block_bootstrap, replicate_seed};
use crate::evaluation::absolute_percentage_errors;
use crate::kelm::{fit_kelm, predict_kelm, KernelSpec};
use crate::linalg::Matrix;
use crate::sae::sae_encode;
use crate::seed::{derive_seed, derive_seed_labeled};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    InSample,
    OutOfSample,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::InSample => "in_sample",
            Scheme::OutOfSample => "out_of_sample",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastEntry {
    pub origin: YearMonth,
    pub target: YearMonth,
    /// Months between origin and target.
    pub step: usize,
    pub value: f64,
    pub actual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries {
    pub kind: ModelKind,
    pub horizon: usize,
    pub scheme: Scheme,
    pub entries: Vec<ForecastEntry>,
}

impl ForecastSeries {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    pub fn actuals(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.actual).collect()
    }
}

/// `(origin, step)` pairs: origins start at `first_origin` and advance by
/// `h`; each origin serves steps `1..=h` whose target does not pass
/// `last_target`.
pub fn roll_schedule(first_origin: usize, last_target: usize, h: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut o = first_origin;
    while o < last_target {
        for j in 1..=h {
            if o + j <= last_target {
                out.push((o, j));
            }
        }
        o += h;
    }
    out
}

/// Seed of the tuning run for forecast step `step`.
pub fn tune_seed(master: u64, step: usize) -> u64 {
    derive_seed(derive_seed_labeled(master, "tune"), step as u64)
}

/// Model seed of the forecast cell with step `j` at origin index `o`.
pub fn cell_seed(master: u64, j: usize, o: usize) -> u64 {
    derive_seed(derive_seed(derive_seed_labeled(master, "fit"), j as u64), o as u64)
}

type Candidates = Vec<(HyperParams, Option<Vec<f64>>)>;

/// Validation predictions of every kernel grid point for one training set.
fn kernel_candidates(
    fit: &SupervisedSet,
    valid: &SupervisedSet,
    layers: &[usize],
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<Candidates, PipelineError> {
    // The autoencoder does not depend on gamma or C, so it is trained once
    // and only the kernel head is refitted.
    let base = train_sake(
        fit,
        layers,
        cfg.gamma_grid[0],
        cfg.c_grid[0],
        &cfg.sae_training.with_seed(seed),
    )?;
    let encode = |rows: &Matrix| -> Result<Matrix, PipelineError> {
        let x = base.scaler.transform_matrix(&rows.drop_leading_columns(1))?;
        Ok(sae_encode(&base.sae, &x)?)
    };
    let train_codes = encode(&fit.predictors)?;
    let valid_codes = encode(&valid.predictors)?;
    let width = train_codes.cols().max(1) as f64;
    let mut out = Vec::with_capacity(cfg.gamma_grid.len() * cfg.c_grid.len());
    for &gamma_scale in &cfg.gamma_grid {
        for &c in &cfg.c_grid {
            let p = KernelSpec::gaussian(gamma_scale / width)
                .and_then(|k| fit_kelm(&train_codes, &fit.targets, k, c))
                .and_then(|m| predict_kelm(&m, &valid_codes))
                .ok();
            let params = HyperParams::Kernel {
                layers: layers.to_vec(),
                gamma_scale,
                c,
            };
            out.push((params, p));
        }
    }
    Ok(out)
}

fn mlp_candidates(
    fit: &SupervisedSet,
    valid: &SupervisedSet,
    cfg: &PipelineConfig,
    seed: u64,
) -> Candidates {
    cfg.mlp_hidden_grid
        .iter()
        .map(|&hidden| {
            let p = train_mlp(fit, hidden, &cfg.mlp_training.with_seed(seed))
                .and_then(|m| m.predict(&valid.predictors))
                .ok();
            (HyperParams::Mlp { hidden }, p)
        })
        .collect()
}

/// Tunes `kind` for forecast step `step` on the in-sample span `insample`,
/// scoring by MAPE on its last `validation_months` rows. Bagged kinds are
/// scored as ensembles trained on bootstrap replicates of the fitting rows.
pub fn tune(
    kind: ModelKind,
    insample: &TimeSeriesTable,
    step: usize,
    cfg: &PipelineConfig,
) -> Result<HyperParams, PipelineError> {
    let set = build_design_matrix(insample, &cfg.lag_spec(step))?;
    let v = cfg.validation_months;
    if set.rows() <= v + 1 {
        return Err(PipelineError::InvalidConfig(format!(
            "{} in-sample rows leave no training data after a {v}-row validation fold",
            set.rows()
        )));
    }
    let fit = set.head(set.rows() - v);
    let valid = set.tail(v);
    let seed = tune_seed(cfg.seed, step);
    let layer_sets = if kind.base() == ModelKind::Sake {
        cfg.layer_candidates(set.width() - 1)
    } else {
        vec![Vec::new()]
    };
    let candidates = |train: &SupervisedSet, s: u64| -> Result<Candidates, PipelineError> {
        if kind.base() == ModelKind::Mlp {
            return Ok(mlp_candidates(train, &valid, cfg, s));
        }
        let mut out = Vec::new();
        for layers in &layer_sets {
            out.extend(kernel_candidates(train, &valid, layers, cfg, s)?);
        }
        Ok(out)
    };

    let scored: Candidates = if kind.is_bagged() {
        let m = cfg.block_length.min(fit.rows());
        let members = (1..=cfg.replicates)
            .into_par_iter()
            .map(|k| {
                let sample = block_bootstrap(&fit, m, k, seed)?;
                candidates(&sample.set, replicate_seed(seed, k))
            })
            .collect::<Result<Vec<Candidates>, PipelineError>>()?;
        (0..members[0].len())
            .map(|g| {
                let params = members[0][g].0.clone();
                let preds: Option<Vec<&Vec<f64>>> =
                    members.iter().map(|c| c[g].1.as_ref()).collect();
                let agg = preds.and_then(|ps| {
                    (0..v)
                        .map(|i| {
                            let col: Vec<f64> = ps.iter().map(|p| p[i]).collect();
                            aggregate_forecasts(&col, cfg.aggregation).ok()
                        })
                        .collect::<Option<Vec<f64>>>()
                });
                (params, agg)
            })
            .collect()
    } else {
        candidates(&fit, replicate_seed(seed, 1))?
    };

    let mut best: Option<(f64, HyperParams)> = None;
    for (params, pred) in scored {
        let score = pred.and_then(|p| {
            let ape = absolute_percentage_errors(&valid.targets, &p).ok()?;
            Some(ape.iter().sum::<f64>() / ape.len() as f64)
        });
        if let Some(s) = score.filter(|s| s.is_finite()) {
            if best.as_ref().is_none_or(|(b, _)| s < *b) {
                best = Some((s, params));
            }
        }
    }
    best.map(|(_, p)| p).ok_or_else(|| {
        PipelineError::InvalidConfig(format!("no {kind} grid point produced a finite validation score"))
    })
}

/// Shared state of one tournament over a table.
pub(crate) struct Runner<'a> {
    pub data: &'a TimeSeriesTable,
    pub cfg: &'a PipelineConfig,
    /// Index of the first out-of-sample month.
    pub split: usize,
    window: usize,
    params: BTreeMap<(ModelKind, usize), HyperParams>,
    forecasts: BTreeMap<(ModelKind, usize, usize), f64>,
    insample_models: BTreeMap<(ModelKind, usize), Fitted>,
}

impl<'a> Runner<'a> {
    pub fn new(data: &'a TimeSeriesTable, cfg: &'a PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let split = match data.index_of(cfg.split) {
            Some(i) if i > 0 && i < data.len() => i,
            _ => {
                return Err(crate::dataset::DatasetError::SplitOutOfRange {
                    split: cfg.split,
                    first: data.start(),
                    last: data.last_month(),
                }
                .into())
            }
        };
        Ok(Self {
            data,
            cfg,
            split,
            window: split,
            params: BTreeMap::new(),
            forecasts: BTreeMap::new(),
            insample_models: BTreeMap::new(),
        })
    }

    pub fn test_span(&self) -> usize {
        self.data.len() - self.split
    }

    /// Design matrix for step `j` from the window ending at origin `o`.
    fn design(&self, o: usize, j: usize) -> Result<SupervisedSet, PipelineError> {
        let from = (o + 1).saturating_sub(self.window);
        Ok(build_design_matrix(&self.data.slice(from, o + 1), &self.cfg.lag_spec(j))?)
    }

    fn cell_seed(&self, j: usize, o: usize) -> u64 {
        cell_seed(self.cfg.seed, j, o)
    }

    pub fn seeds(&self) -> BTreeMap<(usize, usize), u64> {
        self.forecasts
            .keys()
            .map(|&(_, j, o)| ((j, o), self.cell_seed(j, o)))
            .collect()
    }

    pub fn hyperparameters(&self) -> &BTreeMap<(ModelKind, usize), HyperParams> {
        &self.params
    }

    pub fn params(&mut self, kind: ModelKind, j: usize) -> Result<HyperParams, PipelineError> {
        if let Some(p) = self.params.get(&(kind, j)) {
            return Ok(p.clone());
        }
        let p = tune(kind, &self.data.slice(0, self.split), j, self.cfg)?;
        self.params.insert((kind, j), p.clone());
        Ok(p)
    }

    fn fit(&self, kind: ModelKind, set: &SupervisedSet, params: &HyperParams, seed: u64) -> Result<Fitted, PipelineError> {
        let settings = FitSettings {
            params,
            sae: &self.cfg.sae_training,
            mlp: &self.cfg.mlp_training,
        };
        fit_kind(kind, set, &settings, self.cfg.bag(), seed)
    }

    fn insample_model(&mut self, kind: ModelKind, j: usize) -> Result<&Fitted, PipelineError> {
        if !self.insample_models.contains_key(&(kind, j)) {
            let params = self.params(kind, j)?;
            let o = self.split - 1;
            let set = self.design(o, j)?;
            let m = self.fit(kind, &set, &params, self.cell_seed(j, o))?;
            self.insample_models.insert((kind, j), m);
        }
        Ok(&self.insample_models[&(kind, j)])
    }

    pub fn forecast(&mut self, kind: ModelKind, h: usize, scheme: Scheme) -> Result<ForecastSeries, PipelineError> {
        if h == 0 {
            return Err(PipelineError::InvalidConfig("horizon must be >= 1".into()));
        }
        match scheme {
            Scheme::OutOfSample => self.out_of_sample(kind, h),
            Scheme::InSample => self.in_sample(kind, h),
        }
    }

    fn out_of_sample(&mut self, kind: ModelKind, h: usize) -> Result<ForecastSeries, PipelineError> {
        let span = self.test_span();
        if h > span {
            return Err(PipelineError::HorizonExceedsTestSpan { horizon: h, span });
        }
        let schedule = roll_schedule(self.split - 1, self.data.len() - 1, h);
        for j in 1..=h {
            self.params(kind, j)?;
        }
        let missing: Vec<(usize, usize)> = schedule
            .iter()
            .copied()
            .filter(|&(o, j)| !self.forecasts.contains_key(&(kind, j, o)))
            .collect();

        if !self.cfg.retrain {
            for j in 1..=h {
                self.insample_model(kind, j)?;
            }
        }
        let this = &*self;
        let computed: Vec<f64> = missing
            .par_iter()
            .map(|&(o, j)| {
                let set = this.design(o, j)?;
                let row = Matrix::new(1, set.width(), set.latest_predictor_row.clone())
                    .expect("row width");
                let p = if this.cfg.retrain {
                    let params = &this.params[&(kind, j)];
                    this.fit(kind, &set, params, this.cell_seed(j, o))?.predict(&row)?
                } else {
                    this.insample_models[&(kind, j)].predict(&row)?
                };
                Ok(p[0])
            })
            .collect::<Result<_, PipelineError>>()?;
        for (&(o, j), v) in missing.iter().zip(computed) {
            self.forecasts.insert((kind, j, o), v);
        }

        let target = self.data.target_values();
        let entries = schedule
            .iter()
            .map(|&(o, j)| ForecastEntry {
                origin: self.data.month(o),
                target: self.data.month(o + j),
                step: j,
                value: self.forecasts[&(kind, j, o)],
                actual: target[o + j],
            })
            .collect();
        Ok(ForecastSeries {
            kind,
            horizon: h,
            scheme: Scheme::OutOfSample,
            entries,
        })
    }

    fn in_sample(&mut self, kind: ModelKind, h: usize) -> Result<ForecastSeries, PipelineError> {
        let deepest = self.cfg.lag_spec(1).deepest_lag();
        if self.split < deepest + h {
            return Err(PipelineError::InvalidConfig(format!(
                "in-sample span of {} months is too short for horizon {h}",
                self.split
            )));
        }
        let first = deepest - 1;
        let schedule = roll_schedule(first, self.split - 1, h);
        let target = self.data.target_values().to_vec();
        let mut entries = Vec::with_capacity(schedule.len());
        for j in 1..=h {
            let set = self.design(self.split - 1, j)?;
            let picks: Vec<(usize, usize)> =
                schedule.iter().copied().filter(|&(_, jj)| jj == j).collect();
            // Design row i has origin `first + i` because the in-sample
            // window starts at month 0.
            let rows: Vec<usize> = picks.iter().map(|&(o, _)| o - first).collect();
            let x = set.predictors.select_rows(&rows);
            let p = self.insample_model(kind, j)?.predict(&x)?;
            for (&(o, _), v) in picks.iter().zip(p) {
                entries.push(ForecastEntry {
                    origin: self.data.month(o),
                    target: self.data.month(o + j),
                    step: j,
                    value: v,
                    actual: target[o + j],
                });
            }
        }
        entries.sort_by_key(|e| (e.target, e.step));
        Ok(ForecastSeries {
            kind,
            horizon: h,
            scheme: Scheme::InSample,
            entries,
        })
    }
}

/// Forecasts of `kind` for horizon `h` under `scheme`. Out-of-sample
/// forecasts roll from the month before `cfg.split` in steps of `h`
/// months; each origin serves the next `h` months with direct models
/// trained on the preceding window of in-sample length.
pub fn rolling_forecast(
    kind: ModelKind,
    data: &TimeSeriesTable,
    h: usize,
    cfg: &PipelineConfig,
    scheme: Scheme,
) -> Result<ForecastSeries, PipelineError> {
    Runner::new(data, cfg)?.forecast(kind, h, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_covers_each_month_once() {
        // 24-month test span with split index 108 in a 132-month table.
        for h in [1usize, 3, 6, 5, 7] {
            let s = roll_schedule(107, 131, h);
            let mut targets: Vec<usize> = s.iter().map(|(o, j)| o + j).collect();
            targets.sort();
            assert_eq!(targets, (108..=131).collect::<Vec<_>>(), "h={h}");
            assert!(s.iter().all(|&(o, j)| j <= h && (o - 107) % h == 0));
        }
        assert_eq!(roll_schedule(107, 131, 6).iter().filter(|(_, j)| *j == 1).count(), 4);
    }
}
