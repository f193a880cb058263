//! Seeded synthetic arrivals, leading pseudo-keyword series and raw
//! economic series, used as the benchmark substrate.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Column, DatasetError, Role, Schema, SeriesFrame, YearMonth};
use crate::features::{EconomicRaw, FeatureError, ECONOMIC_RAW_COLUMNS};
use crate::seed::{derive_seed_labeled, rng_from_seed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedKeyword {
    pub name: String,
    /// Months by which the keyword leads arrivals.
    pub lag: usize,
    /// Noise sd relative to the arrivals sd.
    pub noise: f64,
}

fn default_start() -> YearMonth {
    YearMonth::new(2010, 1).expect("valid month")
}

fn default_period() -> usize {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub length: usize,
    #[serde(default = "default_start")]
    pub start: YearMonth,
    pub base: f64,
    pub slope: f64,
    pub amplitude: f64,
    #[serde(default = "default_period")]
    pub period: usize,
    /// Amplitude of the second seasonal harmonic.
    #[serde(default)]
    pub harmonic: f64,
    pub noise_sd: f64,
    /// AR(1) coefficient of the noise.
    #[serde(default)]
    pub noise_ar: f64,
    #[serde(default)]
    pub keywords: Vec<PlantedKeyword>,
    /// Independent white-noise keyword columns.
    #[serde(default)]
    pub noise_keywords: usize,
    #[serde(default)]
    pub economic: bool,
    pub seed: u64,
}

impl SyntheticSpec {
    /// 132 months, five informative keywords with one-to-three-month
    /// leads and two pure-noise keywords.
    pub fn benchmark(seed: u64) -> Self {
        let kw = |name: &str, lag, noise| PlantedKeyword {
            name: name.into(),
            lag,
            noise,
        };
        Self {
            length: 132,
            start: default_start(),
            base: 1000.0,
            slope: 2.0,
            amplitude: 200.0,
            period: 12,
            harmonic: 80.0,
            noise_sd: 60.0,
            noise_ar: 0.5,
            keywords: vec![
                kw("kw_visa", 1, 0.15),
                kw("kw_hotel", 1, 0.2),
                kw("kw_flight", 1, 0.25),
                kw("kw_weather", 2, 0.2),
                kw("kw_tour", 3, 0.25),
            ],
            noise_keywords: 2,
            economic: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.length < 36 {
            return bad(format!("length must be >= 36, got {}", self.length));
        }
        if self.period < 2 {
            return bad(format!("period must be >= 2, got {}", self.period));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return bad("noise_sd must be a finite non-negative number".into());
        }
        if !(self.noise_ar.abs() < 1.0) {
            return bad("noise_ar must lie in (-1, 1)".into());
        }
        for k in &self.keywords {
            if k.lag == 0 {
                return bad(format!("keyword {:?} needs lag >= 1", k.name));
            }
            if !(k.noise >= 0.0 && k.noise.is_finite()) {
                return bad(format!("keyword {:?} noise must be non-negative", k.name));
            }
        }
        Ok(())
    }

    /// Noise-free value at month index `t`.
    pub fn deterministic(&self, t: usize) -> f64 {
        let w = 2.0 * std::f64::consts::PI * t as f64 / self.period as f64;
        self.base + self.slope * t as f64 + self.amplitude * w.sin() + self.harmonic * (2.0 * w).sin()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub arrivals: SeriesFrame,
    pub keywords: SeriesFrame,
    pub economic: Option<SeriesFrame>,
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("finite sd")
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData, SynthError> {
    spec.validate()?;
    let max_lead = spec.keywords.iter().map(|k| k.lag).max().unwrap_or(0);
    let total = spec.length + max_lead;

    let mut rng = rng_from_seed(derive_seed_labeled(spec.seed, "arrivals"));
    let eps = normal(spec.noise_sd.max(f64::MIN_POSITIVE));
    let mut noise = 0.0;
    let full: Vec<f64> = (0..total)
        .map(|t| {
            if spec.noise_sd > 0.0 {
                noise = spec.noise_ar * noise + eps.sample(&mut rng);
            }
            spec.deterministic(t) + noise
        })
        .collect();
    let arrivals = full[..spec.length].to_vec();
    let sd = std_dev(&arrivals);

    let mut kw_cols = Vec::new();
    for k in &spec.keywords {
        let mut r = rng_from_seed(derive_seed_labeled(spec.seed, &format!("keyword:{}", k.name)));
        let d = normal((k.noise * sd).max(f64::MIN_POSITIVE));
        let values = (0..spec.length)
            .map(|t| {
                let e = if k.noise > 0.0 { d.sample(&mut r) } else { 0.0 };
                // Index-like scale: mean near 50.
                50.0 + (full[t + k.lag] - spec.base) / sd * 10.0 + e / sd * 10.0
            })
            .collect();
        kw_cols.push(Column::new(k.name.clone(), Role::Sii, values));
    }
    for j in 0..spec.noise_keywords {
        let name = format!("kw_noise{}", j + 1);
        let mut r = rng_from_seed(derive_seed_labeled(spec.seed, &format!("keyword:{name}")));
        let d = normal(10.0);
        let values = (0..spec.length).map(|_| 50.0 + d.sample(&mut r)).collect();
        kw_cols.push(Column::new(name, Role::Sii, values));
    }

    let economic = if spec.economic {
        Some(economic_walks(spec)?.to_frame()?)
    } else {
        None
    };

    Ok(SyntheticData {
        arrivals: SeriesFrame::new(
            spec.start,
            spec.length,
            vec![Column::new("arrivals", Role::Target, arrivals)],
        )?,
        keywords: SeriesFrame::new(spec.start, spec.length, kw_cols)?,
        economic,
    })
}

/// Positive geometric random walks for the raw economic columns.
fn economic_walks(spec: &SyntheticSpec) -> Result<EconomicRaw, SynthError> {
    let mut rng = rng_from_seed(derive_seed_labeled(spec.seed, "economic"));
    let starts = [40_000.0, 3.5, 1.5, 100.0, 100.0, 100.0, 100.0, 7.0, 1300.0, 140.0];
    let mut walks: Vec<Vec<f64>> = Vec::with_capacity(starts.len());
    for s in starts {
        let mut v = s;
        let mut w = Vec::with_capacity(spec.length);
        for _ in 0..spec.length {
            v *= (rng.random_range(-0.01..0.01f64) + 0.001).exp();
            w.push(v);
        }
        walks.push(w);
    }
    let mut it = walks.into_iter();
    let mut next = || it.next().expect("ten series");
    Ok(EconomicRaw {
        start: spec.start,
        gdppc: next(),
        ltgb: next(),
        stgb: next(),
        cpi_origin: next(),
        cpi_cn: next(),
        cpi_kr: next(),
        cpi_jp: next(),
        ex_cny: next(),
        ex_krw: next(),
        ex_jpy: next(),
    })
}

/// Role schema covering every column written by [`generate`].
pub fn schema_for(data: &SyntheticData) -> Schema {
    let mut cols: Vec<(String, Role)> = vec![("arrivals".to_string(), Role::Target)];
    cols.extend(data.keywords.columns().iter().map(|c| (c.name.clone(), Role::Sii)));
    if data.economic.is_some() {
        cols.extend(ECONOMIC_RAW_COLUMNS.iter().map(|c| (c.to_string(), Role::Economic)));
    }
    cols.into_iter().collect()
}
