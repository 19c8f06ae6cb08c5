//! Accuracy, Disparate Impact, Equality of Opportunity, and the
//! sensitive-attribute leakage probe.
//!
//! Conditional rates over an empty conditioning set are reported as
//! `None` ("undefined"), never as a number.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::EncodedDataset;
use crate::error::{Error, Result};
use crate::losses::attr_targets;
use crate::matrix::Matrix;
use crate::nn::{Mlp, MlpSpec, Network};
use crate::rng::{stage_rng, Stage};
use crate::train::{fit_head, Clock, EmbeddingScaler, TrainConfig, TrainStage};

/// Probability threshold for a positive prediction.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// `+1` where `p >= 0.5`, else `-1`.
pub fn threshold(probs: &[f64]) -> Vec<i8> {
    probs
        .iter()
        .map(|&p| if p >= DECISION_THRESHOLD { 1 } else { -1 })
        .collect()
}

fn check_len(op: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape {
            op,
            lhs: (a, 1),
            rhs: (b, 1),
        });
    }
    if a == 0 {
        return Err(Error::Data(alloc::format!("{op}: empty input")));
    }
    Ok(())
}

pub fn accuracy(pred: &[i8], truth: &[i8]) -> Result<f64> {
    check_len("accuracy", pred.len(), truth.len())?;
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

fn positive_rate<'a>(pred: impl Iterator<Item = &'a i8>) -> Option<f64> {
    let (mut n, mut pos) = (0usize, 0usize);
    for &p in pred {
        n += 1;
        pos += usize::from(p == 1);
    }
    (n > 0).then(|| pos as f64 / n as f64)
}

/// `|P(ŷ=1 | a=0) − P(ŷ=1 | a=1)|`, `None` if a group is absent.
pub fn disparate_impact(pred: &[i8], a: &[u8]) -> Result<Option<f64>> {
    check_len("disparate_impact", pred.len(), a.len())?;
    let rate = |g: u8| positive_rate(pred.iter().zip(a).filter(|(_, &ai)| ai == g).map(|(p, _)| p));
    Ok(rate(0).zip(rate(1)).map(|(r0, r1)| libm::fabs(r0 - r1)))
}

/// `|P(ŷ=1 | a=0, y=1) − P(ŷ=1 | a=1, y=1)|`, `None` if either group has
/// no positive samples.
pub fn equal_opportunity(pred: &[i8], a: &[u8], y: &[i8]) -> Result<Option<f64>> {
    check_len("equal_opportunity", pred.len(), a.len())?;
    check_len("equal_opportunity", pred.len(), y.len())?;
    let rate = |g: u8| {
        positive_rate(
            pred.iter()
                .zip(a.iter().zip(y))
                .filter(|(_, (&ai, &yi))| ai == g && yi == 1)
                .map(|(p, _)| p),
        )
    };
    Ok(rate(0).zip(rate(1)).map(|(r0, r1)| libm::fabs(r0 - r1)))
}

/// Counts indexed `[a][y == +1][ŷ == +1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contingency {
    pub counts: [[[u64; 2]; 2]; 2],
}

impl Contingency {
    pub fn build(pred: &[i8], y: &[i8], a: &[u8]) -> Result<Self> {
        check_len("contingency", pred.len(), y.len())?;
        check_len("contingency", pred.len(), a.len())?;
        let mut c = Self::default();
        for ((&p, &t), &g) in pred.iter().zip(y).zip(a) {
            c.counts[g as usize][usize::from(t == 1)][usize::from(p == 1)] += 1;
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().flatten().sum()
    }

    pub fn group_size(&self, a: usize) -> u64 {
        self.counts[a].iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let hits: u64 = (0..2).map(|g| self.counts[g][0][0] + self.counts[g][1][1]).sum();
        hits as f64 / self.total() as f64
    }

    fn rate(pos: u64, n: u64) -> Option<f64> {
        (n > 0).then(|| pos as f64 / n as f64)
    }

    pub fn disparate_impact(&self) -> Option<f64> {
        let r = |g: usize| Self::rate(self.counts[g][0][1] + self.counts[g][1][1], self.group_size(g));
        r(0).zip(r(1)).map(|(a, b)| libm::fabs(a - b))
    }

    pub fn equal_opportunity(&self) -> Option<f64> {
        let r = |g: usize| Self::rate(self.counts[g][1][1], self.counts[g][1][0] + self.counts[g][1][1]);
        r(0).zip(r(1)).map(|(a, b)| libm::fabs(a - b))
    }
}

/// Metrics of one evaluated fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub n: usize,
    pub group_sizes: [usize; 2],
    pub accuracy_y: f64,
    pub di: Option<f64>,
    pub eo: Option<f64>,
    /// Test accuracy of a fresh probe predicting `a` from the embedding.
    pub leakage_a: Option<f64>,
}

impl FairnessReport {
    pub fn from_predictions(pred: &[i8], y: &[i8], a: &[u8]) -> Result<Self> {
        let c = Contingency::build(pred, y, a)?;
        Ok(Self {
            n: pred.len(),
            group_sizes: [c.group_size(0) as usize, c.group_size(1) as usize],
            accuracy_y: accuracy(pred, y)?,
            di: disparate_impact(pred, a)?,
            eo: equal_opportunity(pred, a, y)?,
            leakage_a: None,
        })
    }
}

/// Mean and standard error over folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Summary {
    /// Summary of the defined values; `None` if there are none.
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let stderr = if v.len() > 1 {
            let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            libm::sqrt(var / n)
        } else {
            0.0
        };
        Some(Self {
            mean,
            stderr,
            count: v.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub folds: usize,
    pub accuracy_y: Option<Summary>,
    pub di: Option<Summary>,
    pub eo: Option<Summary>,
    pub leakage_a: Option<Summary>,
}

pub fn aggregate(reports: &[FairnessReport]) -> AggregateReport {
    AggregateReport {
        folds: reports.len(),
        accuracy_y: Summary::of(reports.iter().map(|r| Some(r.accuracy_y))),
        di: Summary::of(reports.iter().map(|r| r.di)),
        eo: Summary::of(reports.iter().map(|r| r.eo)),
        leakage_a: Summary::of(reports.iter().map(|r| r.leakage_a)),
    }
}

/// Trains a fresh attribute head on frozen training embeddings and returns
/// its accuracy on the test embeddings.
pub fn leakage_probe(
    f_z: &Mlp,
    train: &EncodedDataset,
    test: &EncodedDataset,
    cfg: &TrainConfig,
    clock: &dyn Clock,
) -> Result<f64> {
    let z_train = f_z.predict(&train.x)?;
    let z_test = f_z.predict(&test.x)?;
    probe_embeddings(&z_train, &train.a, &z_test, &test.a, cfg, clock)
}

/// Leakage probe on precomputed embeddings. The head is trained on
/// embeddings standardized with training statistics.
pub fn probe_embeddings(
    z_train: &Matrix,
    a_train: &[u8],
    z_test: &Matrix,
    a_test: &[u8],
    cfg: &TrainConfig,
    clock: &dyn Clock,
) -> Result<f64> {
    let scaler = EmbeddingScaler::fit(z_train)?;
    let mut head = Network::init(MlpSpec::head(), &mut stage_rng(cfg.seed, Stage::ProbeInit))?;
    let mut rng = stage_rng(cfg.seed, Stage::Probe);
    fit_head(
        &mut head,
        &scaler.apply(z_train),
        &attr_targets(a_train),
        cfg.probe_epochs,
        cfg.batch_size,
        &mut rng,
        clock,
        TrainStage::Probe,
    )?;
    let probs = head.mlp.predict(&scaler.apply(z_test))?;
    let pred = threshold(probs.as_slice());
    let truth: Vec<i8> = a_test.iter().map(|&v| if v == 1 { 1 } else { -1 }).collect();
    accuracy(&pred, &truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, -1, 1], &[1, -1, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, -1, 1], &[-1, 1, -1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, -1, 1, 1], &[1, 1, 1, -1]).unwrap(), 0.5);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 1]).is_err());
    }

    #[test]
    fn di_examples() {
        let pred = [1, 1, -1, -1, 1, 1, 1, -1];
        let a = [0, 0, 0, 0, 1, 1, 1, 1];
        assert_eq!(disparate_impact(&pred, &a).unwrap(), Some(0.25));
        let swapped: Vec<u8> = a.iter().map(|v| 1 - v).collect();
        assert_eq!(disparate_impact(&pred, &swapped).unwrap(), Some(0.25));
        assert_eq!(disparate_impact(&[1, -1, 1, -1], &[0, 0, 1, 1]).unwrap(), Some(0.0));
        assert_eq!(disparate_impact(&[1, -1], &[0, 0]).unwrap(), None);
    }

    #[test]
    fn eo_examples() {
        let y = [1, 1, 1, 1, -1, -1];
        let a = [0, 0, 1, 1, 0, 1];
        assert_eq!(equal_opportunity(&[1, -1, 1, 1, 1, -1], &a, &y).unwrap(), Some(0.5));
        // y = -1 rows do not matter
        assert_eq!(equal_opportunity(&[1, -1, 1, 1, -1, 1], &a, &y).unwrap(), Some(0.5));
        // perfect classifier
        assert_eq!(equal_opportunity(&y, &a, &y).unwrap(), Some(0.0));
        assert_eq!(equal_opportunity(&[1, 1], &[0, 1], &[1, -1]).unwrap(), None);
    }

    #[test]
    fn summary_stats() {
        let s = Summary::of([Some(1.0), None, Some(3.0)]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.count, 2);
        assert!((s.stderr - 1.0).abs() < 1e-12);
        assert!(Summary::of([None]).is_none());
    }

    fn triple() -> impl Strategy<Value = (Vec<i8>, Vec<i8>, Vec<u8>)> {
        (1usize..60).prop_flat_map(|n| {
            (
                proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], n),
                proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], n),
                proptest::collection::vec(0u8..2, n),
            )
        })
    }

    proptest! {
        #[test]
        fn complement_accuracies_sum_to_one((p, t, _a) in triple()) {
            let neg: Vec<i8> = p.iter().map(|v| -v).collect();
            let s = accuracy(&p, &t).unwrap() + accuracy(&neg, &t).unwrap();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn table_agrees_with_direct((p, t, a) in triple()) {
            let c = Contingency::build(&p, &t, &a).unwrap();
            prop_assert_eq!(c.total() as usize, p.len());
            prop_assert_eq!(c.accuracy(), accuracy(&p, &t).unwrap());
            prop_assert_eq!(c.disparate_impact(), disparate_impact(&p, &a).unwrap());
            prop_assert_eq!(c.equal_opportunity(), equal_opportunity(&p, &a, &t).unwrap());
        }

        #[test]
        fn permutation_invariance((p, t, a) in triple(), rot in 0usize..60) {
            let n = p.len();
            let k = rot % n;
            let rotate = |v: &[i8]| { let mut w = v.to_vec(); w.rotate_left(k); w };
            let mut a2 = a.clone();
            a2.rotate_left(k);
            prop_assert_eq!(disparate_impact(&p, &a).unwrap(), disparate_impact(&rotate(&p), &a2).unwrap());
            prop_assert_eq!(
                equal_opportunity(&p, &a, &t).unwrap(),
                equal_opportunity(&rotate(&p), &a2, &rotate(&t)).unwrap()
            );
        }
    }

    #[test]
    fn report_group_sizes_sum_to_n() {
        let r = FairnessReport::from_predictions(&[1, -1, 1], &[1, 1, -1], &[0, 1, 1]).unwrap();
        assert_eq!(r.group_sizes, [1, 2]);
        assert_eq!(r.group_sizes.iter().sum::<usize>(), r.n);
        let _ = vec![0u8];
    }
}
