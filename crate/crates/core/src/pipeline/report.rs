//! Benchmark tournament and its JSON and CSV reports.

use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::model::{HyperParams, ModelKind};
use super::rolling::{ForecastSeries, Runner, Scheme};
use super::{PipelineConfig, PipelineError};
use crate::dataset::TimeSeriesTable;
use crate::evaluation::{absolute_percentage_errors, dm_test, evaluate, pt_test, MetricResult, TestResult};

/// A test outcome, or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellReport {
    Ok(TestResult),
    Failed { error: String },
}

impl<E: std::fmt::Display> From<Result<TestResult, E>> for CellReport {
    fn from(r: Result<TestResult, E>) -> Self {
        match r {
            Ok(t) => CellReport::Ok(t),
            Err(e) => CellReport::Failed { error: e.to_string() },
        }
    }
}

pub type SchemeMetrics = IndexMap<String, MetricResult>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub in_sample: SchemeMetrics,
    pub out_of_sample: SchemeMetrics,
    /// `dm[a][b]`: one-sided test that model `a` has lower out-of-sample
    /// absolute percentage errors than model `b`.
    pub dm: IndexMap<String, IndexMap<String, CellReport>>,
    /// Out-of-sample directional test per model.
    pub pt: IndexMap<String, CellReport>,
}

/// Metrics nested as country, horizon, scheme, model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub country: String,
    pub horizons: IndexMap<String, HorizonReport>,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        let mut outer = IndexMap::new();
        outer.insert(self.country.clone(), &self.horizons);
        let mut s = serde_json::to_string_pretty(&outer).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let outer: IndexMap<String, IndexMap<String, HorizonReport>> = serde_json::from_str(text)?;
        let (country, horizons) = outer.into_iter().next().ok_or_else(|| {
            <serde_json::Error as serde::de::Error>::custom("report has no country")
        })?;
        Ok(Self { country, horizons })
    }

    pub fn metric(&self, horizon: usize, scheme: Scheme, kind: ModelKind) -> Option<&MetricResult> {
        let h = self.horizons.get(&horizon.to_string())?;
        let m = match scheme {
            Scheme::InSample => &h.in_sample,
            Scheme::OutOfSample => &h.out_of_sample,
        };
        m.get(kind.name())
    }

    /// One row per horizon and model with in- and out-of-sample metrics.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([
            "Country", "Horizon", "Model", "in-MAPE", "in-NRMSE", "in-DS", "out-MAPE", "out-NRMSE",
            "out-DS",
        ])?;
        for (h, rep) in &self.horizons {
            for (model, out) in &rep.out_of_sample {
                let cells = |m: Option<&MetricResult>| match m {
                    Some(m) => [m.mape.to_string(), m.nrmse.to_string(), m.ds.to_string()],
                    None => [String::new(), String::new(), String::new()],
                };
                let mut rec = vec![self.country.clone(), h.clone(), model.clone()];
                rec.extend(cells(rep.in_sample.get(model)));
                rec.extend(cells(Some(out)));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Everything produced by one tournament.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub report: ComparisonReport,
    pub forecasts: Vec<ForecastSeries>,
    /// Tuned settings per base kind and forecast step.
    pub hyperparameters: Vec<(ModelKind, usize, HyperParams)>,
    /// Model seed per `(step, origin index)` cell.
    pub cell_seeds: Vec<(usize, usize, u64)>,
}

pub fn run_benchmarks(
    data: &TimeSeriesTable,
    kinds: &[ModelKind],
    horizons: &[usize],
    cfg: &PipelineConfig,
    country: &str,
) -> Result<BenchmarkRun, PipelineError> {
    if kinds.is_empty() {
        return Err(PipelineError::InvalidConfig("model list is empty".into()));
    }
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(PipelineError::InvalidConfig("horizons must be nonempty and >= 1".into()));
    }
    let mut runner = Runner::new(data, cfg)?;
    let mut forecasts = Vec::new();
    let mut report = ComparisonReport {
        country: country.to_string(),
        horizons: IndexMap::new(),
    };
    for &h in horizons {
        let mut rep = HorizonReport {
            in_sample: IndexMap::new(),
            out_of_sample: IndexMap::new(),
            dm: IndexMap::new(),
            pt: IndexMap::new(),
        };
        let mut out_series = Vec::with_capacity(kinds.len());
        for &kind in kinds {
            let out = runner.forecast(kind, h, Scheme::OutOfSample)?;
            let ins = runner.forecast(kind, h, Scheme::InSample)?;
            rep.out_of_sample
                .insert(kind.name().to_string(), evaluate(&out.actuals(), &out.values())?);
            rep.in_sample
                .insert(kind.name().to_string(), evaluate(&ins.actuals(), &ins.values())?);
            rep.pt
                .insert(kind.name().to_string(), pt_test(&out.actuals(), &out.values()).into());
            out_series.push(out);
            forecasts.push(ins);
        }
        // Later-listed models are tested against every earlier one.
        for (i, a) in out_series.iter().enumerate().rev() {
            let loss_a = absolute_percentage_errors(&a.actuals(), &a.values())?;
            let mut row = IndexMap::new();
            for b in &out_series[..i] {
                let loss_b = absolute_percentage_errors(&b.actuals(), &b.values())?;
                row.insert(b.kind.name().to_string(), dm_test(&loss_a, &loss_b, h).into());
            }
            if !row.is_empty() {
                rep.dm.insert(a.kind.name().to_string(), row);
            }
        }
        forecasts.extend(out_series);
        report.horizons.insert(h.to_string(), rep);
    }
    Ok(BenchmarkRun {
        report,
        forecasts,
        hyperparameters: runner
            .hyperparameters()
            .iter()
            .map(|(&(k, j), p)| (k, j, p.clone()))
            .collect(),
        cell_seeds: runner.seeds().into_iter().map(|((j, o), s)| (j, o, s)).collect(),
    })
}
