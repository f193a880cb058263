//! The command implementations behind the `bsake` binary. Each command
//! reads its inputs, runs the library and writes its outputs serially.

use std::fs::File;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::Serialize;

use crate::bagging::replicate_seed;
use crate::config::RunConfig;
use crate::dataset::{Role, SeriesFrame, YearMonth};
use crate::evaluation::{absolute_percentage_errors, dm_test, evaluate, pt_test, MetricResult};
use crate::features::KeywordSelection;
use crate::pipeline::{
    prepare_data, run_benchmarks, tune_seed, BenchmarkRun, CellReport, HyperParams, ModelKind,
    PreparedData,
};
use crate::synth::{generate, schema_for, SyntheticSpec};
use crate::Error;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn open(path: &Path) -> Result<File, Error> {
    File::open(path).map_err(io_err(path))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Error> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

fn create_dir(path: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

fn read_frame(path: &Path, role: Role) -> Result<SeriesFrame, Error> {
    Ok(SeriesFrame::read_csv(open(path)?, |_| Some(role))?)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<(), Error>) -> Result<Vec<u8>, Error> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

/// Loads the configured files and assembles the model table.
pub fn load_inputs(cfg: &RunConfig) -> Result<PreparedData, Error> {
    let arrivals = read_frame(&cfg.arrivals, Role::Target)?;
    if arrivals.columns().len() != 1 {
        return Err(Error::Usage(format!(
            "{} must hold exactly one series besides month, found {}",
            cfg.arrivals.display(),
            arrivals.columns().len()
        )));
    }
    let keywords = cfg.keywords.as_deref().map(|p| read_frame(p, Role::Sii)).transpose()?;
    let economic = cfg.economic.as_deref().map(|p| read_frame(p, Role::Economic)).transpose()?;
    Ok(prepare_data(
        &arrivals,
        keywords.as_ref(),
        economic.as_ref(),
        cfg.pipeline.split,
        cfg.screening,
    )?)
}

#[derive(Debug, Serialize)]
struct CellSeed {
    step: usize,
    origin: YearMonth,
    seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    replicate_seeds: Vec<u64>,
}

#[derive(Debug, Serialize)]
struct TunedParams {
    model: ModelKind,
    step: usize,
    seed: u64,
    params: HyperParams,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'static str,
    /// The resolved configuration; it loads back as a run config.
    config: &'a RunConfig,
    exogenous: &'a [crate::dataset::ExogenousLag],
    keyword_selection: Option<&'a KeywordSelection>,
    table_start: YearMonth,
    table_end: YearMonth,
    tuning: Vec<TunedParams>,
    cells: Vec<CellSeed>,
    outputs: Vec<&'static str>,
}

pub const RUN_OUTPUTS: [&str; 5] = [
    "report.json",
    "report.csv",
    "keyword_selection.csv",
    "forecasts.csv",
    "manifest.json",
];

fn write_forecasts(run: &BenchmarkRun, sink: &mut Vec<u8>) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(sink);
    let csv_err = |e: csv::Error| Error::Usage(format!("writing forecasts: {e}"));
    w.write_record(["origin", "target", "horizon", "model", "value", "step", "scheme", "actual"])
        .map_err(csv_err)?;
    for s in &run.forecasts {
        for e in &s.entries {
            w.write_record([
                e.origin.to_string(),
                e.target.to_string(),
                s.horizon.to_string(),
                s.kind.name().to_string(),
                e.value.to_string(),
                e.step.to_string(),
                s.scheme.name().to_string(),
                e.actual.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(io_err(Path::new("forecasts.csv")))?;
    Ok(())
}

fn write_selection(sel: Option<&KeywordSelection>, max_lag: usize, threshold: f64) -> Result<Vec<u8>, Error> {
    let empty = KeywordSelection {
        max_lag,
        threshold,
        choices: Vec::new(),
    };
    csv_bytes(|buf| Ok(sel.unwrap_or(&empty).write_csv(buf)?))
}

/// Runs the full tournament and writes [`RUN_OUTPUTS`] into the output
/// directory. Returns the tournament result.
pub fn cmd_run(cfg: &RunConfig, quiet: bool) -> Result<BenchmarkRun, Error> {
    cfg.validate()?;
    let prep = load_inputs(cfg)?;
    if !quiet {
        let chosen: Vec<&str> = prep
            .selection
            .iter()
            .flat_map(|s| s.selected().map(|c| c.keyword.as_str()))
            .collect();
        eprintln!(
            "{} months, {} exogenous inputs, keywords kept: {}",
            prep.table.len(),
            prep.exogenous.len(),
            if chosen.is_empty() { "none".to_string() } else { chosen.join(", ") }
        );
    }
    let mut pcfg = cfg.pipeline.clone();
    pcfg.exogenous = prep.exogenous.clone();
    let run = run_benchmarks(&prep.table, &cfg.models, &cfg.horizons, &pcfg, &cfg.country)?;

    let bagged = cfg.models.iter().any(|m| m.is_bagged());
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        exogenous: &prep.exogenous,
        keyword_selection: prep.selection.as_ref(),
        table_start: prep.table.start(),
        table_end: prep.table.last_month(),
        tuning: run
            .hyperparameters
            .iter()
            .map(|(model, step, params)| TunedParams {
                model: *model,
                step: *step,
                seed: tune_seed(pcfg.seed, *step),
                params: params.clone(),
            })
            .collect(),
        cells: run
            .cell_seeds
            .iter()
            .map(|&(step, o, seed)| CellSeed {
                step,
                origin: prep.table.month(o),
                seed,
                replicate_seeds: if bagged {
                    (1..=pcfg.replicates).map(|k| replicate_seed(seed, k)).collect()
                } else {
                    Vec::new()
                },
            })
            .collect(),
        outputs: RUN_OUTPUTS.to_vec(),
    };

    let report_csv = csv_bytes(|buf| {
        run.report
            .write_csv(buf)
            .map_err(|e| Error::Usage(format!("writing report.csv: {e}")))
    })?;
    let selection = write_selection(prep.selection.as_ref(), cfg.screening.max_lag, cfg.screening.threshold)?;
    let forecasts = csv_bytes(|buf| write_forecasts(&run, buf))?;

    let out = &cfg.out_dir;
    create_dir(out)?;
    write(&out.join("report.json"), run.report.to_json())?;
    write(&out.join("report.csv"), report_csv)?;
    write(&out.join("keyword_selection.csv"), selection)?;
    write(&out.join("forecasts.csv"), forecasts)?;
    write(&out.join("manifest.json"), pretty_json(&manifest))?;
    Ok(run)
}

/// Screens the configured keyword file and writes `keyword_selection.csv`.
pub fn cmd_select_keywords(cfg: &RunConfig) -> Result<KeywordSelection, Error> {
    let Some(path) = cfg.keywords.as_deref() else {
        return Err(Error::Usage("the config names no keywords file".into()));
    };
    let arrivals = read_frame(&cfg.arrivals, Role::Target)?;
    let keywords = read_frame(path, Role::Sii)?;
    let prep = prepare_data(&arrivals, Some(&keywords), None, cfg.pipeline.split, cfg.screening)?;
    let sel = prep.selection.expect("keywords were supplied");
    create_dir(&cfg.out_dir)?;
    let bytes = write_selection(Some(&sel), cfg.screening.max_lag, cfg.screening.threshold)?;
    write(&cfg.out_dir.join("keyword_selection.csv"), bytes)?;
    Ok(sel)
}

/// Files written by [`cmd_synth`].
pub fn cmd_synth(spec_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<Vec<PathBuf>, Error> {
    let text = std::fs::read_to_string(spec_path).map_err(io_err(spec_path))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let mut spec: SyntheticSpec =
        serde_path_to_error::deserialize(de).map_err(|e| crate::config::ConfigError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    synthesize(&spec, out_dir)
}

pub fn synthesize(spec: &SyntheticSpec, out_dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let data = generate(spec)?;
    create_dir(out_dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<(), Error> {
        let p = out_dir.join(name);
        write(&p, bytes)?;
        written.push(p);
        Ok(())
    };
    put("arrivals.csv", csv_bytes(|b| Ok(data.arrivals.write_csv(b)?))?)?;
    put("keywords.csv", csv_bytes(|b| Ok(data.keywords.write_csv(b)?))?)?;
    if let Some(econ) = &data.economic {
        put("economic.csv", csv_bytes(|b| Ok(econ.write_csv(b)?))?)?;
    }
    put("schema.json", pretty_json(&schema_for(&data)).into_bytes())?;
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub metrics: IndexMap<String, MetricResult>,
    pub pt: IndexMap<String, CellReport>,
    /// `dm[a][b]` for every later column `a` against every earlier `b`.
    #[serde(skip_serializing_if = "IndexMap::is_empty")]
    pub dm: IndexMap<String, IndexMap<String, CellReport>>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        pretty_json(self)
    }
}

/// Scores each model column of `forecasts` against the single series in
/// `actuals` over the forecast months. DM tests need two model columns.
pub fn cmd_eval(forecasts: &Path, actuals: &Path, dm: bool, horizon: usize) -> Result<EvalReport, Error> {
    let f = read_frame(forecasts, Role::Target)?;
    let a = read_frame(actuals, Role::Target)?;
    if a.columns().len() != 1 {
        return Err(Error::Usage(format!(
            "{} must hold exactly one series besides month",
            actuals.display()
        )));
    }
    if dm && f.columns().len() < 2 {
        return Err(Error::Usage("two models required".into()));
    }
    let a = a.restrict(f.start(), f.last_month())?;
    let actual = &a.columns()[0].values;
    let mut report = EvalReport {
        metrics: IndexMap::new(),
        pt: IndexMap::new(),
        dm: IndexMap::new(),
    };
    for c in f.columns() {
        report.metrics.insert(c.name.clone(), evaluate(actual, &c.values)?);
        report.pt.insert(c.name.clone(), pt_test(actual, &c.values).into());
    }
    if f.columns().len() >= 2 {
        let losses: Vec<Vec<f64>> = f
            .columns()
            .iter()
            .map(|c| absolute_percentage_errors(actual, &c.values))
            .collect::<Result<_, _>>()?;
        for i in (1..losses.len()).rev() {
            let row = (0..i)
                .map(|j| {
                    let name = f.columns()[j].name.clone();
                    (name, dm_test(&losses[i], &losses[j], horizon).into())
                })
                .collect();
            report.dm.insert(f.columns()[i].name.clone(), row);
        }
    }
    Ok(report)
}
