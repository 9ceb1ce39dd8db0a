use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uqbias::commands::{
    cmd_agree, cmd_correlate, cmd_evaluate, cmd_simulate, cmd_sweep, cmd_verify,
    default_sweep_grid, write_sweep_csv, write_trials_csv, Dataset, EvalConfig, MetricColumn,
    Scorer, SimulateConfig, VerifyConfig,
};
use uqbias::correctness::MetricId;
use uqbias::judge::{Judge, JudgeConfig};
use uqbias::records::{parse_annotations, HumanAnnotation};
use uqbias::Result;

#[derive(Parser)]
#[command(name = "uqbias", version, about = "Bias-aware evaluation of LM uncertainty scores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// AUROC matrix of methods against correctness metrics.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Cohen's kappa of each metric against the human majority label.
    Agree {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        annotations: PathBuf,
    },
    /// Kappa against human labels across a threshold grid (CSV).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        metric: MetricId,
        /// Comma-separated thresholds; defaults to 0.1..=1.0 in steps of 0.1.
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
    },
    /// Spearman correlation of method scores with answer length.
    Correlate {
        #[command(flatten)]
        common: Common,
        /// Permutations for p-values; 0 skips them.
        #[arg(long, default_value_t = 0)]
        permutations: usize,
    },
    /// Correlated-error trials (CSV).
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        rho: Vec<f64>,
        /// Number of consecutive seeds per rho.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        n_items: Option<usize>,
    },
    /// Monte Carlo check of the independent-error closed form (JSON).
    Verify {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        n_items: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct Common {
    /// JSONL dataset; repeat to evaluate several.
    #[arg(long, required = true)]
    records: Vec<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    judge_endpoint: Option<String>,
    #[arg(long)]
    judge_model: Option<String>,
    #[arg(long)]
    judge_cache: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<EvalConfig> {
        let mut config = match &self.run.config {
            Some(p) => EvalConfig::load(p)?,
            None => EvalConfig::default(),
        };
        if let Some(seed) = self.run.seed {
            config.seed = seed;
        }
        if let Some(w) = self.run.workers {
            config.workers = w;
        }
        match (&self.judge_endpoint, &self.judge_model, config.judge.as_mut()) {
            (Some(e), Some(m), None) => config.judge = Some(JudgeConfig::new(e, m)),
            (e, m, Some(j)) => {
                if let Some(e) = e {
                    j.endpoint = e.clone();
                }
                if let Some(m) = m {
                    j.model = m.clone();
                }
            }
            (None, None, None) => {}
            _ => {
                return Err(uqbias::Error::Config(
                    "--judge-endpoint and --judge-model must be given together".into(),
                ))
            }
        }
        if let (Some(j), Some(cache)) = (config.judge.as_mut(), &self.judge_cache) {
            j.cache = Some(cache.clone());
        }
        config.validate()?;
        Ok(config)
    }

    fn datasets(&self) -> Result<Vec<Dataset>> {
        self.records.iter().map(|p| Dataset::load(p)).collect()
    }

    fn first_dataset(&self) -> Result<Dataset> {
        if self.records.len() > 1 {
            log::warn!("only the first --records file is used by this subcommand");
        }
        Dataset::load(&self.records[0])
    }
}

fn judge_for(config: &EvalConfig) -> Result<Option<Judge>> {
    config.judge.clone().map(Judge::new).transpose()
}

fn annotations(path: &Path) -> Result<Vec<HumanAnnotation>> {
    parse_annotations(std::io::BufReader::new(std::fs::File::open(path)?))
}

fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(p) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(p)?);
            write(&mut f)?;
            f.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
        }
    }
    Ok(())
}

fn emit_json<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    emit(out, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn set_workers(workers: Option<usize>) {
    if let Some(n) = workers {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Evaluate {
            common,
            annotations: ann,
        } => {
            let config = common.config()?;
            let judge = judge_for(&config)?;
            let ann = ann.as_deref().map(annotations).transpose()?;
            let report = cmd_evaluate(&common.datasets()?, ann.as_deref(), &config, judge.as_ref())?;
            emit(common.run.out.as_deref(), |w| {
                w.write_all(report.to_json()?.as_bytes())?;
                Ok(())
            })
        }
        Command::Agree {
            common,
            annotations: ann,
        } => {
            let config = common.config()?;
            let judge = judge_for(&config)?;
            let dataset = common.first_dataset()?;
            let mut scorer = Scorer::new(&dataset.records, &config, judge.as_ref())?;
            let columns = MetricColumn::expand(&config.metrics, &config.catalog()?);
            let table = cmd_agree(&mut scorer, &annotations(&ann)?, &columns)?;
            emit_json(common.run.out.as_deref(), &table)
        }
        Command::Sweep {
            common,
            annotations: ann,
            metric,
            thresholds,
        } => {
            let config = common.config()?;
            let judge = judge_for(&config)?;
            let dataset = common.first_dataset()?;
            let mut scorer = Scorer::new(&dataset.records, &config, judge.as_ref())?;
            let grid = if thresholds.is_empty() {
                default_sweep_grid()
            } else {
                thresholds
            };
            let points = cmd_sweep(&mut scorer, &annotations(&ann)?, metric, &grid)?;
            emit(common.run.out.as_deref(), |w| write_sweep_csv(w, &points))
        }
        Command::Correlate {
            common,
            permutations,
        } => {
            let config = common.config()?;
            let judge = judge_for(&config)?;
            let table = cmd_correlate(&common.first_dataset()?, &config, judge.as_ref(), permutations)?;
            emit_json(common.run.out.as_deref(), &table)
        }
        Command::Simulate {
            run,
            rho,
            seeds,
            n_items,
        } => {
            set_workers(run.workers);
            let mut config = match &run.config {
                Some(p) => SimulateConfig::from_toml(&std::fs::read_to_string(p)?)?,
                None => SimulateConfig::default(),
            };
            if !rho.is_empty() {
                config.rhos = rho;
            }
            if let Some(s) = seeds {
                config.seeds = s;
            }
            if let Some(n) = n_items {
                config.base.n_items = n;
            }
            if let Some(seed) = run.seed {
                config.base.seed = seed;
            }
            let rows = cmd_simulate(&config)?;
            emit(run.out.as_deref(), |w| write_trials_csv(w, &rows))
        }
        Command::Verify { run, n_items } => {
            set_workers(run.workers);
            let mut config = match &run.config {
                Some(p) => VerifyConfig::from_toml(&std::fs::read_to_string(p)?)?,
                None => VerifyConfig::default(),
            };
            if let Some(n) = n_items {
                config.n_items = n;
            }
            if let Some(seed) = run.seed {
                config.seeds = vec![seed];
            }
            let report = cmd_verify(&config)?;
            if !report.all_pass {
                log::warn!("closed-form check failed on at least one grid point");
            }
            emit_json(run.out.as_deref(), &report)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
