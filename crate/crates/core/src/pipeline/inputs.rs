//! Assembles the model table from arrivals, keyword and raw economic
//! frames: keyword screening on the in-sample span, economic feature
//! construction, and the resulting lag structure.

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::dataset::{
    Column, DatasetError, ExogenousLag, Role, SeriesFrame, TimeSeriesTable, YearMonth,
};
use crate::features::{build_economic_features, select_keywords, EconomicRaw, KeywordSelection};

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub table: TimeSeriesTable,
    pub selection: Option<KeywordSelection>,
    pub exogenous: Vec<ExogenousLag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreeningOptions {
    pub max_lag: usize,
    pub threshold: f64,
    /// Lag count given to every economic feature.
    pub economic_lags: usize,
}

impl Default for ScreeningOptions {
    fn default() -> Self {
        Self {
            max_lag: 3,
            threshold: 0.7,
            economic_lags: 1,
        }
    }
}

/// `arrivals` must hold the target column. Keywords are screened on months
/// before `split` only; a selected keyword enters with as many lags as its
/// best lead.
pub fn prepare_data(
    arrivals: &SeriesFrame,
    keywords: Option<&SeriesFrame>,
    economic_raw: Option<&SeriesFrame>,
    split: YearMonth,
    opts: ScreeningOptions,
) -> Result<PreparedData, PipelineError> {
    let mut frames = vec![arrivals];
    frames.extend(keywords);
    frames.extend(economic_raw);
    let (from, to) = SeriesFrame::common_range(&frames).ok_or_else(|| {
        DatasetError::MisalignedIndex("arrivals, keyword and economic files share no months".into())
    })?;
    let mut table = TimeSeriesTable::from_frame(arrivals.restrict(from, to)?)?.into_frame();
    let split_index = table
        .index_of(split)
        .filter(|&i| i > 0)
        .ok_or(DatasetError::SplitOutOfRange {
            split,
            first: from,
            last: to,
        })?;

    let mut exogenous = Vec::new();
    if let Some(raw) = economic_raw {
        let econ = build_economic_features(&EconomicRaw::from_frame(&raw.restrict(from, to)?)?)?;
        exogenous.extend(econ.columns().iter().map(|c| ExogenousLag {
            column: c.name.clone(),
            lags: opts.economic_lags,
        }));
        table = table.merge(econ)?;
    }

    let mut selection = None;
    if let Some(kw) = keywords {
        let kw = kw.restrict(from, to)?;
        let target = TimeSeriesTable::from_frame(table.clone())?;
        let arrivals_in = &target.target_values()[..split_index];
        let series: Vec<(String, Vec<f64>)> = kw
            .columns()
            .iter()
            .map(|c| (c.name.clone(), c.values[..split_index].to_vec()))
            .collect();
        let sel = select_keywords(arrivals_in, &series, opts.max_lag, opts.threshold)?;
        let mut chosen = Vec::new();
        for c in sel.selected() {
            let col = kw.column(&c.keyword).expect("screened column exists");
            chosen.push(Column::new(c.keyword.clone(), Role::Sii, col.values.clone()));
            exogenous.push(ExogenousLag {
                column: c.keyword.clone(),
                lags: c.lag,
            });
        }
        if !chosen.is_empty() {
            let extra = SeriesFrame::new(table.start(), table.len(), chosen)?;
            table = table.merge(extra)?;
        }
        selection = Some(sel);
    }

    Ok(PreparedData {
        table: TimeSeriesTable::from_frame(table)?,
        selection,
        exogenous,
    })
}
