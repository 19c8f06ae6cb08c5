//! Command-line surface: `train`, `sweep` and `eval`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use locfair_core::data::SyntheticConfig;
use locfair_core::metrics::Summary;
use locfair_core::train::{ablation_weights, TrainConfig};

use crate::checkpoint::Checkpoint;
use crate::config::{DatasetSpec, RunConfig};
use crate::error::{io_err, Error, Result};
use crate::pipeline::{
    eval_checkpoint, eval_results, execute, EvalOverrides, Options, Plan, PlanResult, Sweep, SweepAxis,
};
use crate::report::MetricSet;
use crate::schema::{load_schema, preset, preset_names};

#[derive(Debug, Parser)]
#[command(
    name = "locfair",
    version,
    about = "Disentangled, locally fair representations for tabular data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on one dataset (optionally k-fold) and write checkpoints and reports.
    Train(TrainArgs),
    /// One run per sweep value and fold, with aggregated results and plot data.
    Sweep(SweepArgs),
    /// Recompute a fold's report from a checkpoint without training.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// `synthetic`, a preset name, or `custom` (needs --schema).
    #[arg(long, default_value = "synthetic")]
    pub dataset: String,
    /// Schema TOML; replaces the preset schema when given.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Data file for non-synthetic datasets.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Held-out share for single-split tabular runs.
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Synthetic noise features per seed (input width is 1 + 2d).
    #[arg(long)]
    pub d: Option<usize>,
    /// Share of biased training labels (synthetic).
    #[arg(long)]
    pub p_bias: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub lambda3: Option<f64>,
    /// Neighbors in the local fairness term.
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub d_steps: Option<usize>,
    #[arg(long)]
    pub finetune_epochs: Option<usize>,
    #[arg(long)]
    pub probe_epochs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Folds (tabular) or independent seeds (synthetic).
    #[arg(long, default_value_t = 1)]
    pub folds: usize,
    /// Loss toggles of an ablation-grid row, e.g. `--preset ablation-row 12`.
    #[arg(long, num_args = 2, value_names = ["KIND", "N"])]
    pub preset: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Metric {
    All,
    Di,
    Eo,
}

impl From<Metric> for MetricSet {
    fn from(m: Metric) -> Self {
        match m {
            Metric::All => MetricSet::All,
            Metric::Di => MetricSet::Di,
            Metric::Eo => MetricSet::Eo,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, env = "LOCFAIR_OUT", default_value = "locfair-out")]
    pub out: PathBuf,
    /// Parallel runs; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, value_enum, default_value = "all")]
    pub metric: Metric,
    /// Also draw the tradeoff curve as SVG (sweeps).
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Axis {
    Lambda3,
    #[value(name = "K")]
    K,
    Bias,
    Ablation,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub sweep: Axis,
    /// Comma-separated values replacing the default grid.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Data file replacing the one recorded in the checkpoint.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Synthetic `d` replacing the recorded one.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, value_enum, default_value = "all")]
    pub metric: Metric,
    /// Also write `eval.csv` into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

pub fn dataset_spec(args: &DataArgs) -> Result<DatasetSpec> {
    if args.dataset == "synthetic" {
        if args.csv.is_some() || args.schema.is_some() {
            return Err(usage("--csv and --schema do not apply to the synthetic dataset"));
        }
        let mut s = SyntheticConfig::default();
        if let Some(v) = args.n_train {
            s.n_train = v;
        }
        if let Some(v) = args.n_test {
            s.n_test = v;
        }
        if let Some(v) = args.d {
            s.d = v;
        }
        if let Some(v) = args.p_bias {
            s.p_bias_train = v;
        }
        return Ok(DatasetSpec::Synthetic(s));
    }
    if args.n_train.is_some() || args.n_test.is_some() || args.d.is_some() || args.p_bias.is_some() {
        return Err(usage(
            "--n-train, --n-test, --d and --p-bias apply to the synthetic dataset only",
        ));
    }
    let csv = args
        .csv
        .clone()
        .ok_or_else(|| usage(format!("--csv is required for dataset `{}`", args.dataset)))?;
    let schema = match (&args.schema, args.dataset.as_str()) {
        (Some(path), _) => load_schema(path)?,
        (None, "custom") => return Err(usage("--dataset custom needs --schema")),
        (None, name) => preset(name).map_err(|_| {
            let known: Vec<&str> = preset_names().collect();
            usage(format!(
                "unknown dataset `{name}`; use synthetic, custom or one of: {}",
                known.join(", ")
            ))
        })?,
    };
    let mut spec = DatasetSpec::tabular(csv, schema);
    if let (Some(f), DatasetSpec::Tabular { test_fraction, .. }) = (args.test_fraction, &mut spec) {
        *test_fraction = f;
    }
    Ok(spec)
}

pub fn train_config(args: &ModelArgs) -> Result<TrainConfig> {
    let mut cfg = TrainConfig {
        seed: args.seed,
        ..TrainConfig::default()
    };
    if let Some(p) = &args.preset {
        let row = match p.as_slice() {
            [kind, n] if kind == "ablation-row" => n
                .parse::<usize>()
                .map_err(|_| usage(format!("ablation row must be an integer, got `{n}`")))?,
            _ => {
                return Err(usage(format!(
                    "unknown preset `{}`; expected `ablation-row N`",
                    p.join(" ")
                )))
            }
        };
        cfg.weights = ablation_weights(row).map_err(|e| usage(e.to_string()))?;
    }
    let w = &mut cfg.weights;
    for (flag, slot) in [
        (args.lambda1, &mut w.lambda1),
        (args.lambda2, &mut w.lambda2),
        (args.lambda3, &mut w.lambda3),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    let counts = [
        (args.k, &mut cfg.k),
        (args.epochs, &mut cfg.epochs),
        (args.batch_size, &mut cfg.batch_size),
        (args.d_steps, &mut cfg.d_steps),
        (args.finetune_epochs, &mut cfg.finetune_epochs),
        (args.probe_epochs, &mut cfg.probe_epochs),
    ];
    for (flag, slot) in counts {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn run_config(data: &DataArgs, model: &ModelArgs) -> Result<RunConfig> {
    let mut dataset = dataset_spec(data)?;
    if let DatasetSpec::Synthetic(s) = &mut dataset {
        s.seed = model.seed;
    }
    let cfg = RunConfig {
        folds: model.folds,
        dataset,
        train: train_config(model)?,
    };
    cfg.validate().map_err(|e| match e {
        Error::Core(c) => usage(c.to_string()),
        other => other,
    })?;
    Ok(cfg)
}

fn options(out: &OutputArgs) -> Options {
    Options {
        jobs: out.jobs,
        metrics: out.metric.into(),
        svg: out.svg,
        clock: true,
    }
}

fn fmt_summary(s: Option<Summary>) -> String {
    match s {
        Some(s) if s.count > 1 => format!("{:.4} ± {:.4}", s.mean, s.stderr),
        Some(s) => format!("{:.4}", s.mean),
        None => "undefined".into(),
    }
}

fn print_result(result: &PlanResult) {
    if let Some(t) = result.typing {
        println!(
            "loaded {} rows, dropped {} with missing or malformed values",
            t.total, t.dropped
        );
    }
    for run in &result.runs {
        let a = &run.aggregate;
        println!(
            "{}: acc_y {} | DI {} | EO {} | leakage_a {} ({} of {} folds ok)",
            run.info.run_id,
            fmt_summary(a.accuracy_y),
            fmt_summary(a.di),
            fmt_summary(a.eo),
            fmt_summary(a.leakage_a),
            run.folds.len() - run.failures(),
            run.folds.len()
        );
        for (f, cell) in run.folds.iter().enumerate() {
            if let Err(e) = cell {
                eprintln!("{} fold {f} failed: {e}", run.info.run_id);
            }
        }
    }
}

fn finish(result: &PlanResult, out: &std::path::Path) -> Result<()> {
    print_result(result);
    println!("wrote {}", out.display());
    match result.failures() {
        0 => Ok(()),
        failed => Err(Error::Sweep {
            failed,
            total: result.cells(),
        }),
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let plan = Plan {
        base: run_config(&args.data, &args.model)?,
        sweep: None,
    };
    let result = execute(&plan, &options(&args.output), Some(&args.output.out))?;
    finish(&result, &args.output.out)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let axis = match args.sweep {
        Axis::Lambda3 => SweepAxis::Lambda3,
        Axis::K => SweepAxis::K,
        Axis::Bias => SweepAxis::Bias,
        Axis::Ablation => SweepAxis::Ablation,
    };
    let plan = Plan {
        base: run_config(&args.data, &args.model)?,
        sweep: Some(Sweep {
            axis,
            values: args.values.clone().unwrap_or_else(|| axis.default_values()),
        }),
    };
    // Axis values are checked up front so a bad value is a usage error
    // rather than a failed cell.
    for &v in &plan.sweep.as_ref().expect("sweep").values {
        axis.apply(&plan.base, v).map_err(|e| usage(e.to_string()))?;
    }
    let result = execute(&plan, &options(&args.output), Some(&args.output.out))?;
    finish(&result, &args.output.out)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let overrides = EvalOverrides {
        csv: args.csv.clone(),
        d: args.d,
    };
    let metrics = MetricSet::from(args.metric);
    let report = eval_checkpoint(&ck, &overrides, metrics)?;
    let label = args
        .out
        .as_ref()
        .map_or_else(|| PathBuf::from("eval.csv"), |d| d.join("eval.csv"));
    let text = eval_results(&ck, &report, metrics, &label)?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        std::fs::write(&label, &text).map_err(io_err(&label))?;
    }
    print!("{}", String::from_utf8_lossy(&text));
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

/// Process exit status for an error: 2 for usage errors, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Usage(_) => 2,
        _ => 1,
    }
}
