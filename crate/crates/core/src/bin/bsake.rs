use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bsake::app::{cmd_eval, cmd_run, cmd_select_keywords, cmd_synth};
use bsake::config::RunConfig;
use bsake::dataset::YearMonth;
use bsake::pipeline::ModelKind;
use bsake::Error;

#[derive(Parser)]
#[command(name = "bsake", version, about = "Bagged SAE + kernel ELM tourism demand forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads; defaults to all available cores. Results do not
    /// depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Keyword screening, benchmark tournament and report files.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Writes synthetic arrivals, keyword and economic CSVs.
    Synth {
        /// Synthetic series spec (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Metrics and tests for forecast columns against actuals.
    Eval {
        /// CSV with a month column and one column per model.
        #[arg(long)]
        forecasts: PathBuf,
        /// CSV with a month column and the observed series.
        #[arg(long)]
        actuals: PathBuf,
        /// Require Diebold-Mariano tests.
        #[arg(long)]
        dm: bool,
        /// Forecast horizon used by the DM variance.
        #[arg(long, default_value_t = 1)]
        horizon: usize,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Keyword screening only; writes keyword_selection.csv.
    SelectKeywords {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(clap::Args)]
struct Overrides {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// First out-of-sample month, YYYY-MM.
    #[arg(long, value_parser = parse_month)]
    split: Option<YearMonth>,
    /// Comma-separated horizons, e.g. 1,3,6.
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<usize>>,
    /// Comma-separated model names, e.g. KELM,B-SAKE.
    #[arg(long, value_delimiter = ',', value_parser = parse_model)]
    models: Option<Vec<ModelKind>>,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    ModelKind::parse(s).ok_or_else(|| {
        let names: Vec<&str> = ModelKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown model {s:?}; expected one of {}", names.join(", "))
    })
}

fn parse_month(s: &str) -> Result<YearMonth, String> {
    s.parse().map_err(|_| format!("expected YYYY-MM, got {s:?}"))
}

fn load(config: &PathBuf, o: Overrides) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(config)?;
    cfg.override_with(o.seed, o.split, o.out, o.horizons, o.models);
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Error> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = load(&config, overrides)?;
            cmd_run(&cfg, quiet)?;
            if !quiet {
                eprintln!("wrote reports to {}", cfg.out_dir.display());
            }
        }
        Command::Synth { config, out, seed } => {
            for p in cmd_synth(&config, &out, seed)? {
                if !quiet {
                    eprintln!("wrote {}", p.display());
                }
            }
        }
        Command::Eval {
            forecasts,
            actuals,
            dm,
            horizon,
            out,
        } => {
            let json = cmd_eval(&forecasts, &actuals, dm, horizon)?.to_json();
            match out {
                Some(p) => std::fs::write(&p, json).map_err(|source| Error::Io { path: p, source })?,
                None => print!("{json}"),
            }
        }
        Command::SelectKeywords { config, overrides } => {
            let cfg = load(&config, overrides)?;
            let sel = cmd_select_keywords(&cfg)?;
            if !quiet {
                let kept: Vec<&str> = sel.selected().map(|c| c.keyword.as_str()).collect();
                eprintln!("kept {} of {} keywords", kept.len(), sel.choices.len());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        // Help and version exit 0; malformed invocations exit 2.
        Err(e) => e.exit(),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error[cli/Threads]: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| execute(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (module, kind) = e.origin();
            eprintln!("error[{module}/{kind}]: {e}");
            ExitCode::from(1)
        }
    }
}
