//! Result, run-log and plot-data files.
//!
//! Every CSV starts with the effective config as `# `-prefixed comment
//! lines; read them back with a comment character of `#`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use locfair_core::metrics::{AggregateReport, FairnessReport, Summary};
use locfair_core::train::RunLog;

use crate::error::{io_err, Error, Result};

/// Which metric columns a results file carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricSet {
    #[default]
    All,
    Di,
    Eo,
}

impl MetricSet {
    fn columns(self) -> &'static [&'static str] {
        match self {
            MetricSet::All => &["accuracy_y", "di", "eo", "leakage_a"],
            MetricSet::Di => &["accuracy_y", "di"],
            MetricSet::Eo => &["accuracy_y", "eo"],
        }
    }

    pub fn needs_leakage(self) -> bool {
        self == MetricSet::All
    }

    /// Fairness measure plotted against accuracy.
    pub fn plot_metric(self) -> &'static str {
        match self {
            MetricSet::Eo => "eo",
            MetricSet::All | MetricSet::Di => "di",
        }
    }
}

/// Identifying columns of a results row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInfo {
    pub run_id: String,
    pub dataset: String,
    pub lambda: [f64; 3],
    pub k: usize,
}

pub fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x}"))
}

fn commented(config: &str) -> String {
    let mut out = String::new();
    for line in config.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out
}

fn pick(report: &FairnessReport, col: &str) -> Option<f64> {
    match col {
        "accuracy_y" => Some(report.accuracy_y),
        "di" => report.di,
        "eo" => report.eo,
        "leakage_a" => report.leakage_a,
        _ => unreachable!("unknown metric column {col}"),
    }
}

fn pick_summary(agg: &AggregateReport, col: &str) -> Option<Summary> {
    match col {
        "accuracy_y" => agg.accuracy_y,
        "di" => agg.di,
        "eo" => agg.eo,
        "leakage_a" => agg.leakage_a,
        _ => unreachable!("unknown metric column {col}"),
    }
}

/// Results table: one row per fold and one `mean` row per run.
pub struct ResultsWriter<W: Write> {
    csv: csv::Writer<W>,
    path: PathBuf,
    metrics: MetricSet,
}

impl ResultsWriter<std::fs::File> {
    pub fn create(path: &Path, config: &str, metrics: MetricSet) -> Result<Self> {
        let file = std::fs::File::create(path).map_err(io_err(path))?;
        Self::new(file, path, config, metrics)
    }
}

impl<W: Write> ResultsWriter<W> {
    pub fn new(mut out: W, label: &Path, config: &str, metrics: MetricSet) -> Result<Self> {
        out.write_all(commented(config).as_bytes()).map_err(io_err(label))?;
        let mut w = Self {
            csv: csv::Writer::from_writer(out),
            path: label.to_path_buf(),
            metrics,
        };
        let mut header: Vec<String> = [
            "run_id", "dataset", "lambda1", "lambda2", "lambda3", "K", "fold", "n_a0", "n_a1",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(metrics.columns().iter().map(|c| c.to_string()));
        header.extend(metrics.columns().iter().map(|c| format!("{c}_stderr")));
        w.write(&header)?;
        Ok(w)
    }

    fn write(&mut self, rec: &[String]) -> Result<()> {
        self.csv.write_record(rec).map_err(|source| Error::Csv {
            path: self.path.clone(),
            source,
        })
    }

    fn lead(run: &RunInfo, fold: &str) -> Vec<String> {
        vec![
            run.run_id.clone(),
            run.dataset.clone(),
            num(Some(run.lambda[0])),
            num(Some(run.lambda[1])),
            num(Some(run.lambda[2])),
            run.k.to_string(),
            fold.to_string(),
        ]
    }

    pub fn fold_row(&mut self, run: &RunInfo, fold: usize, report: &FairnessReport) -> Result<()> {
        let mut rec = Self::lead(run, &fold.to_string());
        rec.push(report.group_sizes[0].to_string());
        rec.push(report.group_sizes[1].to_string());
        let cols = self.metrics.columns();
        rec.extend(cols.iter().map(|c| num(pick(report, c))));
        rec.extend(cols.iter().map(|_| String::new()));
        self.write(&rec)
    }

    pub fn mean_row(&mut self, run: &RunInfo, agg: &AggregateReport) -> Result<()> {
        let mut rec = Self::lead(run, "mean");
        rec.extend([String::new(), String::new()]);
        let cols = self.metrics.columns();
        rec.extend(cols.iter().map(|c| num(pick_summary(agg, c).map(|s| s.mean))));
        rec.extend(cols.iter().map(|c| num(pick_summary(agg, c).map(|s| s.stderr))));
        self.write(&rec)
    }

    pub fn finish(mut self) -> Result<W> {
        self.csv.flush().map_err(io_err(&self.path))?;
        self.csv.into_inner().map_err(|e| Error::Io {
            path: self.path.clone(),
            source: e.into_error(),
        })
    }
}

/// Per-epoch losses and counters; warnings follow as comment lines.
pub fn write_run_log(path: &Path, config: &str, log: &RunLog) -> Result<()> {
    let mut out = commented(config).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        w.write_record([
            "stage",
            "epoch",
            "lr",
            "loss_a",
            "loss_d",
            "loss_rec",
            "loss_adv",
            "loss_local",
            "loss_y",
            "loss_full",
            "skipped_terms",
            "knn_shortfall",
            "d_updates",
            "wall_ms",
        ])
        .map_err(csv_err)?;
        for r in &log.records {
            w.write_record([
                r.stage.name().to_string(),
                r.epoch.to_string(),
                num(Some(r.lr)),
                num(r.loss_a),
                num(r.loss_d),
                num(r.loss_rec),
                num(r.loss_adv),
                num(r.loss_local),
                num(r.loss_y),
                num(r.loss_full),
                r.skipped_terms.to_string(),
                r.knn_shortfall.to_string(),
                r.d_updates.to_string(),
                r.wall_ms.map_or_else(|| "NA".to_string(), |v| v.to_string()),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(io_err(path))?;
    }
    for warning in &log.warnings {
        out.extend_from_slice(format!("# warning: {warning}\n").as_bytes());
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// One point of an accuracy/fairness tradeoff curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub run_id: String,
    pub value: f64,
    pub accuracy: Option<Summary>,
    pub fairness: Option<Summary>,
}

pub fn write_plot_data(path: &Path, config: &str, metric: &str, points: &[PlotPoint]) -> Result<()> {
    let mut out = commented(config).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        w.write_record([
            "run_id".to_string(),
            "sweep_value".to_string(),
            "x_accuracy_y".to_string(),
            "x_stderr".to_string(),
            format!("y_{metric}"),
            "y_stderr".to_string(),
        ])
        .map_err(csv_err)?;
        for p in points {
            w.write_record([
                p.run_id.clone(),
                num(Some(p.value)),
                num(p.accuracy.map(|s| s.mean)),
                num(p.accuracy.map(|s| s.stderr)),
                num(p.fairness.map(|s| s.mean)),
                num(p.fairness.map(|s| s.stderr)),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(io_err(path))?;
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Minimal static line chart of the tradeoff curve. Points with an
/// undefined coordinate are left out.
pub fn render_svg(metric: &str, points: &[PlotPoint]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const PAD: f64 = 48.0;
    let xy: Vec<(f64, f64, &str)> = points
        .iter()
        .filter_map(|p| Some((p.accuracy?.mean, p.fairness?.mean, p.run_id.as_str())))
        .collect();
    let span = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-9 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = span(&mut xy.iter().map(|p| p.0));
    let (y0, y1) = span(&mut xy.iter().map(|p| p.1));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
        t = PAD,
        b = H - PAD,
        r = W - PAD
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">accuracy ({x0:.3} to {x1:.3})</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{metric} ({y0:.3} to {y1:.3})</text>"#,
        H / 2.0,
        H / 2.0
    );
    if !xy.is_empty() {
        let pts: Vec<String> = xy
            .iter()
            .map(|&(x, y, _)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="steelblue"/>"#,
            pts.join(" ")
        );
        for &(x, y, id) in &xy {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                sx(x),
                sy(y),
                sx(x) + 5.0,
                sy(y) - 5.0,
                id
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
