//! Training orchestration: Step I (attribute encoder), Step II
//! (adversarial disentanglement with the optional local fairness and
//! classification terms), the classifier finetune, and per-fold evaluation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::autodiff::{lr_at_epoch, Graph};
use crate::data::EncodedDataset;
use crate::error::{Error, Result};
use crate::losses::{
    label_targets, local_fairness_loss, loss_a, loss_adv_from_embeddings, loss_d, loss_full, loss_rec_from_embeddings,
    loss_y_from_embedding, Components, LossWeights, PopulationRatio,
};
use crate::matrix::Matrix;
use crate::metrics::{leakage_probe, threshold, FairnessReport};
use crate::nn::{Mlp, Mode, ModelBundle, Network};
use crate::rng::{stage_rng, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Epochs of Step I and Step II.
    pub epochs: usize,
    pub batch_size: usize,
    /// Discriminator updates per generator update.
    pub d_steps: usize,
    /// Neighbors per sample in the local fairness term.
    pub k: usize,
    pub weights: LossWeights,
    pub seed: u64,
    pub finetune_epochs: usize,
    pub probe_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            d_steps: 20,
            k: 4,
            weights: LossWeights::default(),
            seed: 0,
            finetune_epochs: 100,
            probe_epochs: 100,
        }
    }
}

impl TrainConfig {
    /// Epoch counts may be zero (the stage is then a no-op); every other
    /// count must be positive.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("d_steps", self.d_steps),
            ("K", self.k),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        self.weights.validate()
    }
}

/// Loss weights for a row of the ablation grid (1..=16).
///
/// Rows 1-4 train without reconstruction and use a classification weight
/// of 1; rows 5-12 cover the remaining toggle combinations at 0.1; rows
/// 13-16 raise the classification weight of the full method.
pub fn ablation_weights(row: usize) -> Result<LossWeights> {
    let (rec, cls, adv, local, lambda3) = match row {
        1 => (false, true, false, false, 1.0),
        2 => (false, true, true, false, 1.0),
        3 => (false, true, true, true, 1.0),
        4 => (false, true, false, true, 1.0),
        5 => (true, false, false, false, 0.0),
        6 => (true, true, false, false, 0.1),
        7 => (true, false, false, true, 0.0),
        8 => (true, true, false, true, 0.1),
        9 => (true, false, true, false, 0.0),
        10 => (true, true, true, false, 0.1),
        11 => (true, false, true, true, 0.0),
        12 => (true, true, true, true, 0.1),
        13 => (true, true, true, true, 0.2),
        14 => (true, true, true, true, 0.5),
        15 => (true, true, true, true, 0.75),
        16 => (true, true, true, true, 1.0),
        _ => return Err(Error::Config(format!("ablation row {row} outside 1..=16"))),
    };
    Ok(LossWeights {
        lambda1: 1.0,
        lambda2: 1.0,
        lambda3,
        use_rec: rec,
        use_adv: adv,
        use_local: local,
        use_cls: cls,
    })
}

/// Elapsed-time source for run logs. The core crate has no clock of its
/// own.
pub trait Clock: Sync {
    fn elapsed_ms(&self) -> Option<u64>;
}

/// Records no wall-clock time.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_ms(&self) -> Option<u64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainStage {
    StepOne,
    StepTwo,
    Finetune,
    Probe,
}

impl TrainStage {
    pub fn name(self) -> &'static str {
        match self {
            TrainStage::StepOne => "step_one",
            TrainStage::StepTwo => "step_two",
            TrainStage::Finetune => "finetune",
            TrainStage::Probe => "probe",
        }
    }
}

/// Per-epoch means of the terms evaluated in that epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: TrainStage,
    pub epoch: usize,
    pub lr: f64,
    pub loss_a: Option<f64>,
    pub loss_d: Option<f64>,
    pub loss_rec: Option<f64>,
    pub loss_adv: Option<f64>,
    pub loss_local: Option<f64>,
    pub loss_y: Option<f64>,
    pub loss_full: Option<f64>,
    /// Group terms dropped because a batch held a single group.
    pub skipped_terms: u64,
    /// Missing same-label neighbors summed over batches.
    pub knn_shortfall: u64,
    pub d_updates: u64,
    pub wall_ms: Option<u64>,
}

impl EpochRecord {
    fn new(stage: TrainStage, epoch: usize, lr: f64) -> Self {
        Self {
            stage,
            epoch,
            lr,
            loss_a: None,
            loss_d: None,
            loss_rec: None,
            loss_adv: None,
            loss_local: None,
            loss_y: None,
            loss_full: None,
            skipped_terms: 0,
            knn_shortfall: 0,
            d_updates: 0,
            wall_ms: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<EpochRecord>,
    pub warnings: Vec<String>,
}

impl RunLog {
    pub fn extend(&mut self, other: RunLog) {
        self.records.extend(other.records);
        self.warnings.extend(other.warnings);
    }
}

#[derive(Default, Clone, Copy)]
struct Mean {
    sum: f64,
    n: usize,
}

impl Mean {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.n += 1;
    }

    fn get(self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

fn check_finite(stage: TrainStage, epoch: usize, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            stage: stage.name(),
            epoch,
            value,
        })
    }
}

fn batches(n: usize, batch_size: usize, rng: &mut dyn RngCore) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

fn pick<T: Copy>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i]).collect()
}

fn split_groups(a: &[u8], idx: &[usize]) -> [Vec<usize>; 2] {
    let mut groups = [Vec::new(), Vec::new()];
    for &i in idx {
        groups[usize::from(a[i] == 1)].push(i);
    }
    groups
}

/// Per-dimension standardization `u = (z - mean) / scale` fitted on
/// training embeddings. Heads trained on frozen embeddings are optimized in
/// these coordinates; [`EmbeddingScaler::to_scaled`] and
/// [`EmbeddingScaler::from_scaled`] rewrite a head's first layer so that it
/// computes the same function in either coordinate system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingScaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl EmbeddingScaler {
    /// Constant columns get scale 1.
    pub fn fit(z: &Matrix) -> Result<Self> {
        if z.rows() == 0 {
            return Err(Error::Data("cannot standardize an empty embedding".into()));
        }
        let n = z.rows() as f64;
        let mut mean = alloc::vec![0.0; z.cols()];
        for i in 0..z.rows() {
            for (m, v) in mean.iter_mut().zip(z.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = alloc::vec![0.0; z.cols()];
        for i in 0..z.rows() {
            for ((s, v), m) in var.iter_mut().zip(z.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = libm::sqrt(s / n);
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, z: &Matrix) -> Matrix {
        let mut u = z.clone();
        for i in 0..u.rows() {
            for ((v, m), s) in u.row_mut(i).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
        u
    }

    fn check(&self, mlp: &Mlp) -> Result<()> {
        let w = &mlp.params[0];
        if w.rows() != self.mean.len() {
            return Err(Error::Dimension {
                expected: self.mean.len(),
                found: w.rows(),
            });
        }
        Ok(())
    }

    /// First layer rewritten to take standardized inputs.
    pub fn to_scaled(&self, mlp: &mut Mlp) -> Result<()> {
        self.check(mlp)?;
        let (w, rest) = mlp.params.split_at_mut(1);
        let (w, b) = (&mut w[0], &mut rest[0]);
        for j in 0..w.rows() {
            for (bk, wk) in b.as_mut_slice().iter_mut().zip(w.row(j)) {
                *bk += self.mean[j] * wk;
            }
            w.row_mut(j).iter_mut().for_each(|wk| *wk *= self.scale[j]);
        }
        Ok(())
    }

    /// Inverse of [`EmbeddingScaler::to_scaled`].
    pub fn from_scaled(&self, mlp: &mut Mlp) -> Result<()> {
        self.check(mlp)?;
        let (w, rest) = mlp.params.split_at_mut(1);
        let (w, b) = (&mut w[0], &mut rest[0]);
        for j in 0..w.rows() {
            w.row_mut(j).iter_mut().for_each(|wk| *wk /= self.scale[j]);
            for (bk, wk) in b.as_mut_slice().iter_mut().zip(w.row(j)) {
                *bk -= self.mean[j] * wk;
            }
        }
        Ok(())
    }
}

/// Trains a sigmoid head on fixed inputs with mini-batch BCE. Used for the
/// classifier finetune and the leakage probe.
#[allow(clippy::too_many_arguments)]
pub fn fit_head(
    net: &mut Network,
    inputs: &Matrix,
    targets: &[f64],
    epochs: usize,
    batch_size: usize,
    rng: &mut dyn RngCore,
    clock: &dyn Clock,
    stage: TrainStage,
) -> Result<Vec<EpochRecord>> {
    if targets.len() != inputs.rows() {
        return Err(Error::Shape {
            op: "fit_head",
            lhs: inputs.shape(),
            rhs: (targets.len(), 1),
        });
    }
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be >= 1".into()));
    }
    let mut records = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let lr = lr_at_epoch(epoch);
        let mut mean = Mean::default();
        for batch in batches(inputs.rows(), batch_size, rng) {
            let mut g = Graph::new();
            let head = net.mlp.bind(&mut g, true);
            let x = g.constant(inputs.select_rows(&batch));
            let p = head.forward(&mut g, x, &mut Mode::Train(rng))?;
            let loss = g.mean_bce(p, &pick(targets, &batch))?;
            mean.push(check_finite(stage, epoch, g.value(loss).item())?);
            g.backward(loss)?;
            let grads = head.grads(&g);
            net.step(&grads, lr)?;
        }
        let mut rec = EpochRecord::new(stage, epoch, lr);
        match stage {
            TrainStage::Finetune => rec.loss_y = mean.get(),
            _ => rec.loss_a = mean.get(),
        }
        rec.wall_ms = clock.elapsed_ms();
        records.push(rec);
    }
    Ok(records)
}

/// Step I: trains `f_a` and `m_a` jointly to predict the sensitive
/// attribute.
pub fn train_step1(
    bundle: &mut ModelBundle,
    data: &EncodedDataset,
    cfg: &TrainConfig,
    clock: &dyn Clock,
) -> Result<RunLog> {
    cfg.validate()?;
    check_input(bundle, data)?;
    let mut rng = stage_rng(cfg.seed, Stage::StepOne);
    let mut log = RunLog::default();
    for epoch in 0..cfg.epochs {
        let lr = lr_at_epoch(epoch);
        let mut mean = Mean::default();
        for batch in batches(data.len(), cfg.batch_size, &mut rng) {
            let mut g = Graph::new();
            let f_a = bundle.f_a.mlp.bind(&mut g, true);
            let m_a = bundle.m_a.mlp.bind(&mut g, true);
            let x = data.x.select_rows(&batch);
            let loss = loss_a(
                &mut g,
                &f_a,
                &m_a,
                &x,
                &pick(&data.a, &batch),
                &mut Mode::Train(&mut rng),
            )?;
            mean.push(check_finite(TrainStage::StepOne, epoch, g.value(loss).item())?);
            g.backward(loss)?;
            let (ga, gm) = (f_a.grads(&g), m_a.grads(&g));
            bundle.f_a.step(&ga, lr)?;
            bundle.m_a.step(&gm, lr)?;
        }
        let mut rec = EpochRecord::new(TrainStage::StepOne, epoch, lr);
        rec.loss_a = mean.get();
        rec.wall_ms = clock.elapsed_ms();
        log.records.push(rec);
    }
    Ok(log)
}

fn check_input(bundle: &ModelBundle, data: &EncodedDataset) -> Result<()> {
    if data.input_dim() != bundle.input_dim {
        return Err(Error::Dimension {
            expected: bundle.input_dim,
            found: data.input_dim(),
        });
    }
    if data.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    Ok(())
}

/// One discriminator update on a fresh sub-batch. Returns the loss, or
/// `None` if the sub-batch produced no term.
fn d_update(
    bundle: &mut ModelBundle,
    data: &EncodedDataset,
    idx: &[usize],
    lr: f64,
    rng: &mut dyn RngCore,
    skipped: &mut u64,
) -> Result<Option<f64>> {
    let [i0, i1] = split_groups(&data.a, idx);
    let (x0, x1) = (data.x.select_rows(&i0), data.x.select_rows(&i1));
    let mut g = Graph::new();
    let d = bundle.d.mlp.bind(&mut g, true);
    let term = loss_d(&mut g, &d, &bundle.f_z.mlp, &x0, &x1, &mut Mode::Train(rng))?;
    *skipped += u64::from(term.skipped);
    let Some(loss) = term.loss else { return Ok(None) };
    let value = g.value(loss).item();
    g.backward(loss)?;
    let grads = d.grads(&g);
    bundle.d.step(&grads, lr)?;
    Ok(Some(value))
}

#[derive(Default)]
struct GenTerms {
    rec: Mean,
    adv: Mean,
    local: Mean,
    cls: Mean,
    full: Mean,
    skipped: u64,
    shortfall: u64,
}

/// One joint update of `f_z`, `g` and `m_y` on `L_full`, with `d` frozen.
#[allow(clippy::too_many_arguments)]
fn generator_update(
    bundle: &mut ModelBundle,
    data: &EncodedDataset,
    z_a: &Matrix,
    batch: &[usize],
    cfg: &TrainConfig,
    ratio: Option<PopulationRatio>,
    lr: f64,
    epoch: usize,
    rng: &mut dyn RngCore,
    terms: &mut GenTerms,
) -> Result<()> {
    let w = &cfg.weights;
    let mut mode = Mode::Train(rng);
    let mut g = Graph::new();
    let f_z = bundle.f_z.mlp.bind(&mut g, true);
    let dec = bundle.g.mlp.bind(&mut g, w.rec_active());
    let m_y = bundle.m_y.mlp.bind(&mut g, w.cls_active());
    let d = bundle.d.mlp.bind(&mut g, false);

    let xv = g.constant(data.x.select_rows(batch));
    let z = f_z.forward(&mut g, xv, &mut mode)?;
    let mut c = Components::default();
    if w.rec_active() {
        let za = g.constant(z_a.select_rows(batch));
        c.rec = Some(loss_rec_from_embeddings(&mut g, &dec, za, z, xv, &mut mode)?);
    }
    let a = pick(&data.a, batch);
    if w.adv_active() {
        let group = |g: &mut Graph, label: u8| -> Result<Option<_>> {
            let rows: Vec<usize> = (0..batch.len()).filter(|&i| a[i] == label).collect();
            if rows.is_empty() {
                Ok(None)
            } else {
                g.select_rows(z, &rows).map(Some)
            }
        };
        let z0 = group(&mut g, 0)?;
        let z1 = group(&mut g, 1)?;
        let term = loss_adv_from_embeddings(&mut g, &d, z0, z1, &mut mode)?;
        terms.skipped += u64::from(term.skipped);
        c.adv = term.loss;
    }
    let y = pick(&data.y, batch);
    if let (true, Some(r)) = (w.local_active(), ratio) {
        let term = local_fairness_loss(&mut g, z, &y, &a, cfg.k, r)?;
        terms.shortfall += term.shortfall as u64;
        c.local = Some(term.loss);
    }
    if w.cls_active() {
        c.cls = Some(loss_y_from_embedding(&mut g, &m_y, z, &y, &mut mode)?);
    }
    let Some(total) = loss_full(&mut g, &c, w)? else {
        return Ok(());
    };
    let value = check_finite(TrainStage::StepTwo, epoch, g.value(total).item())?;
    for (slot, var) in [
        (&mut terms.rec, c.rec),
        (&mut terms.adv, c.adv),
        (&mut terms.local, c.local),
        (&mut terms.cls, c.cls),
    ] {
        if let Some(v) = var {
            slot.push(g.value(v).item());
        }
    }
    terms.full.push(value);
    g.backward(total)?;

    let updates = [
        (f_z.has_grads(&g), f_z.grads_or_zero(&g)),
        (dec.has_grads(&g), dec.grads_or_zero(&g)),
        (m_y.has_grads(&g), m_y.grads_or_zero(&g)),
    ];
    debug_assert!(!d.has_grads(&g));
    let [fz_u, dec_u, my_u] = updates;
    if fz_u.0 {
        bundle.f_z.step(&fz_u.1, lr)?;
    }
    if dec_u.0 {
        bundle.g.step(&dec_u.1, lr)?;
    }
    if my_u.0 {
        bundle.m_y.step(&my_u.1, lr)?;
    }
    Ok(())
}

/// Step II. Per mini-batch, `d` takes `cfg.d_steps` updates on freshly
/// sampled sub-batches with `f_z` detached, then `f_z`, `g` and `m_y` take
/// one joint update on the weighted objective with `d` frozen. `f_a` is
/// read-only.
pub fn train_step2(
    bundle: &mut ModelBundle,
    data: &EncodedDataset,
    cfg: &TrainConfig,
    clock: &dyn Clock,
) -> Result<RunLog> {
    cfg.validate()?;
    check_input(bundle, data)?;
    let w = cfg.weights;
    let ratio = if w.local_active() {
        Some(PopulationRatio::from_attributes(&data.a)?)
    } else {
        None
    };
    let z_a = if w.rec_active() {
        bundle.f_a.mlp.predict(&data.x)?
    } else {
        Matrix::zeros(0, 0)
    };
    let mut rng = stage_rng(cfg.seed, Stage::StepTwo);
    let mut log = RunLog::default();
    let n = data.len();
    for epoch in 0..cfg.epochs {
        let lr = lr_at_epoch(epoch);
        let mut d_loss = Mean::default();
        let mut terms = GenTerms::default();
        let mut d_updates = 0u64;
        let mut single_group_batches = 0usize;
        let epoch_batches = batches(n, cfg.batch_size, &mut rng);
        for batch in &epoch_batches {
            if w.adv_active() {
                for _ in 0..cfg.d_steps {
                    let idx = sample(&mut rng, n, cfg.batch_size.min(n)).into_vec();
                    if let Some(v) = d_update(bundle, data, &idx, lr, &mut rng, &mut terms.skipped)? {
                        d_loss.push(check_finite(TrainStage::StepTwo, epoch, v)?);
                        d_updates += 1;
                    }
                }
            }
            let groups = split_groups(&data.a, batch);
            if groups.iter().any(Vec::is_empty) {
                single_group_batches += 1;
            }
            generator_update(bundle, data, &z_a, batch, cfg, ratio, lr, epoch, &mut rng, &mut terms)?;
        }
        if single_group_batches * 2 > epoch_batches.len() {
            log.warnings.push(format!(
                "epoch {epoch}: {single_group_batches} of {} batches hold a single group",
                epoch_batches.len()
            ));
        }
        let mut rec = EpochRecord::new(TrainStage::StepTwo, epoch, lr);
        rec.loss_d = d_loss.get();
        rec.loss_rec = terms.rec.get();
        rec.loss_adv = terms.adv.get();
        rec.loss_local = terms.local.get();
        rec.loss_y = terms.cls.get();
        rec.loss_full = terms.full.get();
        rec.skipped_terms = terms.skipped;
        rec.knn_shortfall = terms.shortfall;
        rec.d_updates = d_updates;
        rec.wall_ms = clock.elapsed_ms();
        log.records.push(rec);
    }
    Ok(log)
}

/// Finetunes `m_y` on frozen, eval-mode `f_z` embeddings. Starts from the
/// current `m_y` weights with a fresh optimizer state; optimization runs in
/// standardized embedding coordinates and the result is mapped back.
pub fn finetune_classifier(
    bundle: &mut ModelBundle,
    data: &EncodedDataset,
    cfg: &TrainConfig,
    clock: &dyn Clock,
) -> Result<RunLog> {
    cfg.validate()?;
    check_input(bundle, data)?;
    if cfg.finetune_epochs == 0 {
        return Ok(RunLog::default());
    }
    let z = bundle.f_z.mlp.predict(&data.x)?;
    let scaler = EmbeddingScaler::fit(&z)?;
    scaler.to_scaled(&mut bundle.m_y.mlp)?;
    bundle.m_y.reset_optimizer();
    let mut rng = stage_rng(cfg.seed, Stage::Finetune);
    let records = fit_head(
        &mut bundle.m_y,
        &scaler.apply(&z),
        &label_targets(&data.y),
        cfg.finetune_epochs,
        cfg.batch_size,
        &mut rng,
        clock,
        TrainStage::Finetune,
    )?;
    scaler.from_scaled(&mut bundle.m_y.mlp)?;
    Ok(RunLog {
        records,
        warnings: Vec::new(),
    })
}

/// `{-1,+1}` predictions of `m_y ∘ f_z` in eval mode.
pub fn predict_labels(bundle: &ModelBundle, x: &Matrix) -> Result<Vec<i8>> {
    let z = bundle.f_z.mlp.predict(x)?;
    let p = bundle.m_y.mlp.predict(&z)?;
    Ok(threshold(p.as_slice()))
}

/// Test-set report: accuracy, DI and EO of the finetuned classifier plus
/// the leakage probe trained on `train` embeddings.
pub fn evaluate(
    bundle: &ModelBundle,
    train: &EncodedDataset,
    test: &EncodedDataset,
    cfg: &TrainConfig,
    clock: &dyn Clock,
) -> Result<FairnessReport> {
    check_input(bundle, test)?;
    let pred = predict_labels(bundle, &test.x)?;
    let mut report = FairnessReport::from_predictions(&pred, &test.y, &test.a)?;
    report.leakage_a = Some(leakage_probe(&bundle.f_z.mlp, train, test, cfg, clock)?);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub bundle: ModelBundle,
    pub report: FairnessReport,
    pub log: RunLog,
}

/// Full pipeline on one train/test split: Step I (only when the
/// reconstruction term needs `f_a`), Step II, finetune, evaluation.
pub fn run_fold(
    train: &EncodedDataset,
    test: &EncodedDataset,
    cfg: &TrainConfig,
    clock: &dyn Clock,
) -> Result<FoldOutcome> {
    cfg.validate()?;
    let mut bundle = ModelBundle::init(train.input_dim(), &mut stage_rng(cfg.seed, Stage::Init))?;
    let mut log = RunLog::default();
    if cfg.weights.rec_active() {
        log.extend(train_step1(&mut bundle, train, cfg, clock)?);
    }
    log.extend(train_step2(&mut bundle, train, cfg, clock)?);
    log.extend(finetune_classifier(&mut bundle, train, cfg, clock)?);
    let report = evaluate(&bundle, train, test, cfg, clock)?;
    Ok(FoldOutcome { bundle, report, log })
}
