//! Runs, sweeps and checkpoint evaluation, plus the files they leave in
//! the output directory.
//!
//! ```text
//! <out>/config.toml            effective plan
//! <out>/results.csv            one row per fold, one mean row per run
//! <out>/failures.csv           sweep cells that failed, if any
//! <out>/plot.csv, plot.svg     sweeps only
//! <out>/<run_id>/fold<i>/      checkpoint.lfck and log.csv
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use locfair_core::data::{EncodeReport, EncoderMeta, TypingReport};
use locfair_core::metrics::{aggregate, AggregateReport, FairnessReport};
use locfair_core::train::{ablation_weights, evaluate, predict_labels, run_fold, Clock, FoldOutcome};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, CheckpointMeta};
use crate::config::{DatasetSpec, RunConfig, Source};
use crate::error::{io_err, Error, Result};
use crate::report::{render_svg, write_plot_data, write_run_log, MetricSet, PlotPoint, ResultsWriter, RunInfo};

/// Wall-clock time since the run started.
pub struct StdClock(Instant);

impl StdClock {
    pub fn start() -> Self {
        Self(Instant::now())
    }
}

impl Clock for StdClock {
    fn elapsed_ms(&self) -> Option<u64> {
        Some(self.0.elapsed().as_millis() as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Lambda3,
    K,
    Bias,
    Ablation,
}

impl SweepAxis {
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::Lambda3 => vec![0.0, 0.1, 0.2, 0.5, 0.75, 1.0],
            SweepAxis::K => vec![2.0, 4.0, 8.0, 16.0],
            SweepAxis::Bias => vec![0.25, 0.5, 0.75],
            SweepAxis::Ablation => (1..=16).map(f64::from).collect(),
        }
    }

    fn label(self) -> &'static str {
        match self {
            SweepAxis::Lambda3 => "lambda3",
            SweepAxis::K => "K",
            SweepAxis::Bias => "p_bias",
            SweepAxis::Ablation => "row",
        }
    }

    pub fn run_id(self, value: f64) -> String {
        format!("{}-{value}", self.label())
    }

    fn integer(self, value: f64) -> Result<usize> {
        if value.fract() != 0.0 || value < 1.0 {
            return Err(Error::Usage(format!(
                "{} sweep needs positive integers, got {value}",
                self.label()
            )));
        }
        Ok(value as usize)
    }

    /// The base config with this axis set to `value`.
    pub fn apply(self, base: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::Lambda3 => cfg.train.weights.lambda3 = value,
            SweepAxis::K => cfg.train.k = self.integer(value)?,
            SweepAxis::Bias => match &mut cfg.dataset {
                DatasetSpec::Synthetic(s) => s.p_bias_train = value,
                DatasetSpec::Tabular { .. } => {
                    return Err(Error::Usage("the bias sweep needs the synthetic dataset".into()))
                }
            },
            SweepAxis::Ablation => cfg.train.weights = ablation_weights(self.integer(value)?)?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// A base config and at most one sweep axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub base: RunConfig,
    pub sweep: Option<Sweep>,
}

impl Plan {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|source| Error::TomlWrite { what: "plan", source })
    }

    fn runs(&self) -> Result<Vec<(String, Option<f64>, RunConfig)>> {
        self.base.validate()?;
        match &self.sweep {
            None => Ok(vec![("train".to_string(), None, self.base.clone())]),
            Some(s) => {
                if s.values.is_empty() {
                    return Err(Error::Usage("sweep has no values".into()));
                }
                s.values
                    .iter()
                    .map(|&v| Ok((s.axis.run_id(v), Some(v), s.axis.apply(&self.base, v)?)))
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    /// Parallel cells; 0 uses every core.
    pub jobs: usize,
    pub metrics: MetricSet,
    pub svg: bool,
    /// Record wall-clock time in run logs.
    pub clock: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            jobs: 1,
            metrics: MetricSet::All,
            svg: false,
            clock: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub outcome: FoldOutcome,
    pub encoder: Option<EncoderMeta>,
    pub encode_report: EncodeReport,
}

#[derive(Debug)]
pub struct RunSummary {
    pub info: RunInfo,
    pub value: Option<f64>,
    pub config: RunConfig,
    pub folds: Vec<Result<FoldResult>>,
    pub aggregate: AggregateReport,
}

impl RunSummary {
    pub fn reports(&self) -> Vec<&FairnessReport> {
        self.folds.iter().flatten().map(|f| &f.outcome.report).collect()
    }

    pub fn failures(&self) -> usize {
        self.folds.iter().filter(|f| f.is_err()).count()
    }
}

#[derive(Debug)]
pub struct PlanResult {
    pub runs: Vec<RunSummary>,
    pub typing: Option<TypingReport>,
}

impl PlanResult {
    pub fn failures(&self) -> usize {
        self.runs.iter().map(RunSummary::failures).sum()
    }

    pub fn cells(&self) -> usize {
        self.runs.iter().map(|r| r.folds.len()).sum()
    }
}

fn run_info(run_id: &str, cfg: &RunConfig) -> RunInfo {
    let w = cfg.train.weights;
    RunInfo {
        run_id: run_id.to_string(),
        dataset: cfg.dataset.name().to_string(),
        lambda: [w.lambda1, w.lambda2, w.lambda3],
        k: cfg.train.k,
    }
}

fn run_cell(cfg: &RunConfig, source: &Source, fold: usize, opts: &Options) -> Result<FoldResult> {
    let data = source.fold(cfg.folds, fold, cfg.train.seed, None)?;
    let train = cfg.fold_train(fold);
    let outcome = if opts.clock {
        run_fold(&data.train, &data.test, &train, &StdClock::start())?
    } else {
        run_fold(&data.train, &data.test, &train, &locfair_core::train::NoClock)?
    };
    Ok(FoldResult {
        fold,
        outcome,
        encoder: data.encoder,
        encode_report: data.encode_report,
    })
}

/// Runs every (value, fold) cell of a plan. Cells run in parallel up to
/// `opts.jobs`; results keep plan order. A failing cell is recorded and
/// the others continue. When `out` is set, artifacts are written there.
pub fn execute(plan: &Plan, opts: &Options, out: Option<&Path>) -> Result<PlanResult> {
    let runs = plan.runs()?;
    let shared = match &plan.base.dataset {
        DatasetSpec::Tabular { .. } => Some(Source::load(&plan.base.dataset)?),
        DatasetSpec::Synthetic(_) => None,
    };
    let sources: Vec<Source> = runs
        .iter()
        .map(|(_, _, cfg)| match &shared {
            Some(s) => Ok(s.clone()),
            None => Source::load(&cfg.dataset),
        })
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> = runs
        .iter()
        .enumerate()
        .flat_map(|(r, (_, _, cfg))| (0..cfg.folds).map(move |f| (r, f)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {} worker threads: {e}", opts.jobs)))?;
    let mut results: Vec<Result<FoldResult>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(r, f)| run_cell(&runs[r].2, &sources[r], f, opts))
            .collect()
    });

    let mut summaries = Vec::with_capacity(runs.len());
    for (run_id, value, cfg) in runs.into_iter().rev() {
        let folds = results.split_off(results.len() - cfg.folds);
        let reports: Vec<FairnessReport> = folds.iter().flatten().map(|f| f.outcome.report.clone()).collect();
        summaries.push(RunSummary {
            info: run_info(&run_id, &cfg),
            value,
            aggregate: aggregate(&reports),
            config: cfg,
            folds,
        });
    }
    summaries.reverse();
    let result = PlanResult {
        runs: summaries,
        typing: shared.as_ref().and_then(Source::typing),
    };
    if let Some(dir) = out {
        write_artifacts(dir, plan, &result, opts)?;
    }
    Ok(result)
}

/// A single run without a sweep; any failing fold is an error.
pub fn run_pipeline(cfg: &RunConfig, opts: &Options, out: Option<&Path>) -> Result<RunSummary> {
    let plan = Plan {
        base: cfg.clone(),
        sweep: None,
    };
    let mut result = execute(&plan, opts, out)?;
    let mut run = result.runs.pop().expect("one run");
    if let Some(i) = run.folds.iter().position(Result::is_err) {
        return Err(run.folds.swap_remove(i).unwrap_err());
    }
    Ok(run)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_artifacts(dir: &Path, plan: &Plan, result: &PlanResult, opts: &Options) -> Result<()> {
    create_dir(dir)?;
    let plan_toml = plan.to_toml()?;
    let config_path = dir.join("config.toml");
    std::fs::write(&config_path, &plan_toml).map_err(io_err(&config_path))?;

    let mut results = ResultsWriter::create(&dir.join("results.csv"), &plan_toml, opts.metrics)?;
    let mut failures = Vec::new();
    for run in &result.runs {
        for (f, cell) in run.folds.iter().enumerate() {
            match cell {
                Ok(fr) => {
                    results.fold_row(&run.info, fr.fold, &fr.outcome.report)?;
                    write_fold(dir, run, fr)?;
                }
                Err(e) => failures.push((run.info.run_id.clone(), f, e.to_string())),
            }
        }
        if run.failures() < run.folds.len() {
            results.mean_row(&run.info, &run.aggregate)?;
        }
    }
    results.finish()?;

    if !failures.is_empty() {
        let path = dir.join("failures.csv");
        let csv_err = |source| Error::Csv {
            path: path.clone(),
            source,
        };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(["run_id", "fold", "error"]).map_err(csv_err)?;
        for (id, f, e) in &failures {
            w.write_record([id.as_str(), &f.to_string(), e.as_str()])
                .map_err(csv_err)?;
        }
        w.flush().map_err(io_err(&path))?;
    }

    if let Some(sweep) = &plan.sweep {
        let metric = opts.metrics.plot_metric();
        let points: Vec<PlotPoint> = result
            .runs
            .iter()
            .map(|r| PlotPoint {
                run_id: r.info.run_id.clone(),
                value: r.value.unwrap_or(f64::NAN),
                accuracy: r.aggregate.accuracy_y,
                fairness: if metric == "eo" { r.aggregate.eo } else { r.aggregate.di },
            })
            .collect();
        write_plot_data(&dir.join("plot.csv"), &plan_toml, metric, &points)?;
        if opts.svg {
            let path = dir.join("plot.svg");
            let title = format!("{metric} ({:?} sweep)", sweep.axis);
            std::fs::write(&path, render_svg(&title, &points)).map_err(io_err(&path))?;
        }
    }
    Ok(())
}

pub fn fold_dir(out: &Path, run_id: &str, fold: usize) -> PathBuf {
    out.join(run_id).join(format!("fold{fold}"))
}

fn write_fold(out: &Path, run: &RunSummary, fr: &FoldResult) -> Result<()> {
    let dir = fold_dir(out, &run.info.run_id, fr.fold);
    create_dir(&dir)?;
    let ck = Checkpoint {
        meta: CheckpointMeta {
            run_id: run.info.run_id.clone(),
            fold: fr.fold,
            config: run.config.clone(),
            encoder: fr.encoder.clone(),
        },
        bundle: fr.outcome.bundle.clone(),
    };
    ck.save(&dir.join("checkpoint.lfck"))?;
    let header = format!(
        "run_id = {:?}\nfold = {}\n{}",
        run.info.run_id,
        fr.fold,
        run.config.to_toml()?
    );
    write_run_log(&dir.join("log.csv"), &header, &fr.outcome.log)
}

/// Where `eval` reads its data; `None` fields reuse the checkpoint config.
#[derive(Debug, Clone, Default)]
pub struct EvalOverrides {
    pub csv: Option<PathBuf>,
    /// Synthetic feature count `d`.
    pub d: Option<usize>,
}

/// Recomputes a fold's report from a stored model. The data split is
/// rebuilt from the stored config; the stored encoder is reused.
pub fn eval_checkpoint(ck: &Checkpoint, overrides: &EvalOverrides, metrics: MetricSet) -> Result<FairnessReport> {
    let mut cfg = ck.meta.config.clone();
    match &mut cfg.dataset {
        DatasetSpec::Tabular { csv, .. } => {
            if let Some(p) = &overrides.csv {
                *csv = p.clone();
            }
            if overrides.d.is_some() {
                return Err(Error::Usage("--d applies to synthetic checkpoints only".into()));
            }
        }
        DatasetSpec::Synthetic(s) => {
            if let Some(d) = overrides.d {
                s.d = d;
            }
            if overrides.csv.is_some() {
                return Err(Error::Usage("--csv applies to tabular checkpoints only".into()));
            }
        }
    }
    let source = Source::load(&cfg.dataset)?;
    let data = source.fold(cfg.folds, ck.meta.fold, cfg.train.seed, ck.meta.encoder.as_ref())?;
    let found = data.test.input_dim();
    if found != ck.bundle.input_dim {
        return Err(locfair_core::Error::Dimension {
            expected: ck.bundle.input_dim,
            found,
        }
        .into());
    }
    let train = cfg.fold_train(ck.meta.fold);
    if metrics.needs_leakage() {
        Ok(evaluate(
            &ck.bundle,
            &data.train,
            &data.test,
            &train,
            &locfair_core::train::NoClock,
        )?)
    } else {
        let pred = predict_labels(&ck.bundle, &data.test.x)?;
        Ok(FairnessReport::from_predictions(&pred, &data.test.y, &data.test.a)?)
    }
}

/// Results file text for an evaluated checkpoint, matching the fold row
/// written by the training run.
pub fn eval_results(ck: &Checkpoint, report: &FairnessReport, metrics: MetricSet, label: &Path) -> Result<Vec<u8>> {
    let header = format!(
        "run_id = {:?}\nfold = {}\n{}",
        ck.meta.run_id,
        ck.meta.fold,
        ck.meta.config.to_toml()?
    );
    let mut w = ResultsWriter::new(Vec::new(), label, &header, metrics)?;
    w.fold_row(&run_info(&ck.meta.run_id, &ck.meta.config), ck.meta.fold, report)?;
    w.finish()
}
