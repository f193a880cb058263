//! Economic predictor construction, lagged-correlation keyword screening,
//! and min-max scaling.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Column, DatasetError, Role, SeriesFrame, TimeSeriesTable, YearMonth};
use crate::linalg::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("non-positive value {value} in {column} at position {index}")]
    NonPositiveInput {
        column: &'static str,
        index: usize,
        value: f64,
    },
    #[error("misaligned index: {0}")]
    MisalignedIndex(String),
    #[error("series {0:?} has zero variance over the overlap")]
    ZeroVarianceSeries(String),
    #[error("series {name:?} has {len} observations; need at least {needed}")]
    InsufficientOverlap {
        name: String,
        len: usize,
        needed: usize,
    },
    #[error("max_lag must be >= 1")]
    InvalidMaxLag,
    #[error("column {0:?} is constant on the fitting data")]
    ConstantColumn(String),
    #[error("column {0:?} is not in the scaler state")]
    UnknownColumn(String),
    #[error("scaler expects {expected} columns, got {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("csv error: {0}")]
    Csv(String),
}

/// Raw economic inputs for one origin country. Exchange rates are quoted
/// as units of the foreign currency per unit of the origin currency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomicRaw {
    pub start: YearMonth,
    pub gdppc: Vec<f64>,
    pub ltgb: Vec<f64>,
    pub stgb: Vec<f64>,
    pub cpi_origin: Vec<f64>,
    pub cpi_cn: Vec<f64>,
    pub cpi_kr: Vec<f64>,
    pub cpi_jp: Vec<f64>,
    pub ex_cny: Vec<f64>,
    pub ex_krw: Vec<f64>,
    pub ex_jpy: Vec<f64>,
}

/// Column names of the raw economic CSV, in file order.
pub const ECONOMIC_RAW_COLUMNS: [&str; 10] = [
    "gdppc",
    "ltgb",
    "stgb",
    "cpi_origin",
    "cpi_cn",
    "cpi_kr",
    "cpi_jp",
    "ex_cny",
    "ex_krw",
    "ex_jpy",
];

/// Names of the derived economic predictors.
pub const ECONOMIC_FEATURES: [&str; 5] = ["gdppc", "irs", "price", "sub_kr", "sub_jp"];

impl EconomicRaw {
    pub fn from_frame(frame: &SeriesFrame) -> Result<Self, FeatureError> {
        let col = |name: &str| -> Result<Vec<f64>, FeatureError> {
            frame
                .column(name)
                .map(|c| c.values.clone())
                .ok_or_else(|| DatasetError::MissingColumn(name.to_string()).into())
        };
        Ok(Self {
            start: frame.start(),
            gdppc: col("gdppc")?,
            ltgb: col("ltgb")?,
            stgb: col("stgb")?,
            cpi_origin: col("cpi_origin")?,
            cpi_cn: col("cpi_cn")?,
            cpi_kr: col("cpi_kr")?,
            cpi_jp: col("cpi_jp")?,
            ex_cny: col("ex_cny")?,
            ex_krw: col("ex_krw")?,
            ex_jpy: col("ex_jpy")?,
        })
    }

    pub fn to_frame(&self) -> Result<SeriesFrame, FeatureError> {
        let series = self.series();
        let columns = ECONOMIC_RAW_COLUMNS
            .iter()
            .zip(series)
            .map(|(n, v)| Column::new(*n, Role::Economic, v.to_vec()))
            .collect();
        Ok(SeriesFrame::new(self.start, self.gdppc.len(), columns)?)
    }

    fn series(&self) -> [&[f64]; 10] {
        [
            &self.gdppc,
            &self.ltgb,
            &self.stgb,
            &self.cpi_origin,
            &self.cpi_cn,
            &self.cpi_kr,
            &self.cpi_jp,
            &self.ex_cny,
            &self.ex_krw,
            &self.ex_jpy,
        ]
    }
}

/// GDP per capita, interest-rate spread, relative price, and the two
/// substitute-destination prices. All output columns are tagged economic.
pub fn build_economic_features(raw: &EconomicRaw) -> Result<SeriesFrame, FeatureError> {
    let n = raw.gdppc.len();
    for (name, s) in ECONOMIC_RAW_COLUMNS.iter().zip(raw.series()) {
        if s.len() != n {
            return Err(FeatureError::MisalignedIndex(format!(
                "{name} has {} values, gdppc has {n}",
                s.len()
            )));
        }
    }
    let positive: [(&'static str, &[f64]); 7] = [
        ("cpi_origin", &raw.cpi_origin),
        ("cpi_cn", &raw.cpi_cn),
        ("cpi_kr", &raw.cpi_kr),
        ("cpi_jp", &raw.cpi_jp),
        ("ex_cny", &raw.ex_cny),
        ("ex_krw", &raw.ex_krw),
        ("ex_jpy", &raw.ex_jpy),
    ];
    for (column, s) in positive {
        if let Some((index, &value)) = s.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(FeatureError::NonPositiveInput {
                column,
                index,
                value,
            });
        }
    }

    let irs: Vec<f64> = raw.ltgb.iter().zip(&raw.stgb).map(|(l, s)| l - s).collect();
    let price: Vec<f64> = (0..n)
        .map(|t| (raw.cpi_cn[t] / raw.ex_cny[t]) / raw.cpi_origin[t])
        .collect();
    let sub_kr: Vec<f64> = raw.cpi_kr.iter().zip(&raw.ex_krw).map(|(c, e)| c / e).collect();
    let sub_jp: Vec<f64> = raw.cpi_jp.iter().zip(&raw.ex_jpy).map(|(c, e)| c / e).collect();

    let columns = ECONOMIC_FEATURES
        .iter()
        .zip([raw.gdppc.clone(), irs, price, sub_kr, sub_jp])
        .map(|(name, values)| Column::new(*name, Role::Economic, values))
        .collect();
    Ok(SeriesFrame::new(raw.start, n, columns)?)
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordChoice {
    pub keyword: String,
    pub lag: usize,
    pub correlation: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordSelection {
    pub max_lag: usize,
    pub threshold: f64,
    pub choices: Vec<KeywordChoice>,
}

impl KeywordSelection {
    pub fn selected(&self) -> impl Iterator<Item = &KeywordChoice> {
        self.choices.iter().filter(|c| c.selected)
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), FeatureError> {
        let csv_err = |e: csv::Error| FeatureError::Csv(e.to_string());
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["keyword", "lag", "correlation", "selected"])
            .map_err(csv_err)?;
        for c in &self.choices {
            w.write_record([
                c.keyword.clone(),
                c.lag.to_string(),
                c.correlation.to_string(),
                c.selected.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| FeatureError::Csv(e.to_string()))
    }
}

/// For each keyword, correlates `arrivals[t]` with `keyword[t - lag]` for
/// `lag = 1..=max_lag` and keeps the best lag (ties go to the smaller lag).
/// A keyword is selected when that correlation is strictly above
/// `threshold`.
pub fn select_keywords(
    arrivals: &[f64],
    keywords: &[(String, Vec<f64>)],
    max_lag: usize,
    threshold: f64,
) -> Result<KeywordSelection, FeatureError> {
    if max_lag == 0 {
        return Err(FeatureError::InvalidMaxLag);
    }
    let n = arrivals.len();
    let needed = max_lag + 2;
    if n < needed {
        return Err(FeatureError::InsufficientOverlap {
            name: "arrivals".into(),
            len: n,
            needed,
        });
    }
    let mut choices = Vec::with_capacity(keywords.len());
    for (name, series) in keywords {
        if series.len() != n {
            return Err(FeatureError::MisalignedIndex(format!(
                "keyword {name:?} has {} values, arrivals has {n}",
                series.len()
            )));
        }
        let mut best: Option<(usize, f64)> = None;
        for lag in 1..=max_lag {
            let r = pearson(&arrivals[lag..], &series[..n - lag])
                .ok_or_else(|| FeatureError::ZeroVarianceSeries(name.clone()))?;
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((lag, r));
            }
        }
        let (lag, correlation) = best.expect("max_lag >= 1");
        choices.push(KeywordChoice {
            keyword: name.clone(),
            lag,
            correlation,
            selected: correlation > threshold,
        });
    }
    Ok(KeywordSelection {
        max_lag,
        threshold,
        choices,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

/// Per-column min-max ranges fitted on training data. Values are mapped to
/// `(v - min) / (max - min)` without clamping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    pub columns: Vec<ColumnRange>,
}

impl ScalerState {
    /// Fits one range per matrix column.
    pub fn fit_matrix(names: &[String], m: &Matrix) -> Result<Self, FeatureError> {
        if names.len() != m.cols() {
            return Err(FeatureError::WidthMismatch {
                expected: names.len(),
                found: m.cols(),
            });
        }
        let columns = names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let (min, max) = m.row_iter().map(|r| r[j]).fold(
                    (f64::INFINITY, f64::NEG_INFINITY),
                    |(lo, hi), v| (lo.min(v), hi.max(v)),
                );
                range(name, min, max)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { columns })
    }

    pub fn fit_values(name: &str, values: &[f64]) -> Result<Self, FeatureError> {
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Ok(Self {
            columns: vec![range(name, min, max)?],
        })
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    #[inline]
    pub fn scale(&self, j: usize, v: f64) -> f64 {
        let c = &self.columns[j];
        (v - c.min) / (c.max - c.min)
    }

    #[inline]
    pub fn unscale(&self, j: usize, v: f64) -> f64 {
        let c = &self.columns[j];
        v * (c.max - c.min) + c.min
    }

    pub fn transform_matrix(&self, m: &Matrix) -> Result<Matrix, FeatureError> {
        self.map_matrix(m, Self::scale)
    }

    pub fn inverse_matrix(&self, m: &Matrix) -> Result<Matrix, FeatureError> {
        self.map_matrix(m, Self::unscale)
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, &v)| self.scale(j, v)).collect()
    }

    fn map_matrix(
        &self,
        m: &Matrix,
        f: fn(&Self, usize, f64) -> f64,
    ) -> Result<Matrix, FeatureError> {
        if m.cols() != self.width() {
            return Err(FeatureError::WidthMismatch {
                expected: self.width(),
                found: m.cols(),
            });
        }
        let mut out = m.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = f(self, j, *v);
            }
        }
        Ok(out)
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    fn map_table(
        &self,
        table: &TimeSeriesTable,
        f: fn(&Self, usize, f64) -> f64,
    ) -> Result<TimeSeriesTable, FeatureError> {
        let columns = table
            .columns()
            .iter()
            .map(|c| {
                let j = self
                    .index_of(&c.name)
                    .ok_or_else(|| FeatureError::UnknownColumn(c.name.clone()))?;
                Ok(Column::new(
                    c.name.clone(),
                    c.role,
                    c.values.iter().map(|&v| f(self, j, v)).collect(),
                ))
            })
            .collect::<Result<Vec<_>, FeatureError>>()?;
        let frame = SeriesFrame::new(table.start(), table.len(), columns)?;
        Ok(TimeSeriesTable::from_frame(frame)?)
    }
}

fn range(name: &str, min: f64, max: f64) -> Result<ColumnRange, FeatureError> {
    if !(max > min) {
        return Err(FeatureError::ConstantColumn(name.to_string()));
    }
    Ok(ColumnRange {
        name: name.to_string(),
        min,
        max,
    })
}

/// Fits a range for every column of `train`.
pub fn fit_scaler(train: &TimeSeriesTable) -> Result<ScalerState, FeatureError> {
    let columns = train
        .columns()
        .iter()
        .map(|c| ScalerState::fit_values(&c.name, &c.values).map(|s| s.columns[0].clone()))
        .collect::<Result<_, _>>()?;
    Ok(ScalerState { columns })
}

pub fn apply_scaler(
    state: &ScalerState,
    table: &TimeSeriesTable,
) -> Result<TimeSeriesTable, FeatureError> {
    state.map_table(table, ScalerState::scale)
}

pub fn invert_scaler(
    state: &ScalerState,
    table: &TimeSeriesTable,
) -> Result<TimeSeriesTable, FeatureError> {
    state.map_table(table, ScalerState::unscale)
}
