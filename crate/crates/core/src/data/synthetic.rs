//! Synthetic biased data.
//!
//! Each sample draws two fair coins `r` (the sensitive attribute) and `yo`
//! (the unbiased label). A latent `v ~ N(r, 1)` drives `d` features
//! `u_r ~ N(v, 1)` and a biased score `w ~ N(v, 1)`; a latent
//! `vo ~ N(yo, 1)` drives `d` features `u_yo ~ N(vo, 1)`. The sample is
//! `x = (r, u_r, u_yo)`. A `p_bias` fraction of samples takes the biased
//! label `sign(w)`, the rest take `2·yo − 1`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::encode::{min_max, EncodedDataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{stage_rng, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub d: usize,
    pub p_bias_train: f64,
    pub p_bias_test: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_train: 1000,
            n_test: 500,
            d: 25,
            p_bias_train: 0.5,
            p_bias_test: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Config("synthetic d, n_train and n_test must be >= 1".into()));
        }
        for p in [self.p_bias_train, self.p_bias_test] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("p_bias {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        1 + 2 * self.d
    }
}

/// Unscaled synthetic split with both label variants kept.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSynthetic {
    pub x: Matrix,
    pub a: Vec<u8>,
    pub y_biased: Vec<i8>,
    pub y_unbiased: Vec<i8>,
    pub y: Vec<i8>,
}

fn draw(n: usize, d: usize, p_bias: f64, rng: &mut impl Rng) -> RawSynthetic {
    let coin = Bernoulli::new(0.5).expect("valid probability");
    let unit = |mean: f64| Normal::new(mean, 1.0).expect("unit variance");
    let width = 1 + 2 * d;
    let mut x = Matrix::zeros(n, width);
    let mut a = Vec::with_capacity(n);
    let mut y_biased = Vec::with_capacity(n);
    let mut y_unbiased = Vec::with_capacity(n);
    for i in 0..n {
        let r = u8::from(coin.sample(rng));
        let yo = u8::from(coin.sample(rng));
        let v = unit(f64::from(r)).sample(rng);
        let row = x.row_mut(i);
        row[0] = f64::from(r);
        for u in &mut row[1..=d] {
            *u = unit(v).sample(rng);
        }
        let w = unit(v).sample(rng);
        let vo = unit(f64::from(yo)).sample(rng);
        for u in &mut row[1 + d..] {
            *u = unit(vo).sample(rng);
        }
        a.push(r);
        y_biased.push(if w > 0.0 { 1 } else { -1 });
        y_unbiased.push(2 * yo as i8 - 1);
    }
    let n_biased = libm::round(p_bias * n as f64) as usize;
    let mut y = y_unbiased.clone();
    for i in sample(rng, n, n_biased.min(n)).iter() {
        y[i] = y_biased[i];
    }
    RawSynthetic {
        x,
        a,
        y_biased,
        y_unbiased,
        y,
    }
}

/// Raw (unscaled) train and test draws.
pub fn gen_synthetic_raw(cfg: &SyntheticConfig) -> Result<(RawSynthetic, RawSynthetic)> {
    cfg.validate()?;
    let mut rng = stage_rng(cfg.seed, Stage::Synthetic);
    let train = draw(cfg.n_train, cfg.d, cfg.p_bias_train, &mut rng);
    let test = draw(cfg.n_test, cfg.d, cfg.p_bias_test, &mut rng);
    Ok((train, test))
}

pub fn synthetic_feature_names(d: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(1 + 2 * d);
    names.push(String::from("r"));
    names.extend((1..=d).map(|j| format!("u_r{j}")));
    names.extend((1..=d).map(|j| format!("u_yo{j}")));
    names
}

/// Train/test datasets, every column min-max scaled with training ranges.
pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<(EncodedDataset, EncodedDataset)> {
    let (train, test) = gen_synthetic_raw(cfg)?;
    let width = cfg.input_dim();
    let mut ranges = alloc::vec![(f64::INFINITY, f64::NEG_INFINITY); width];
    for i in 0..train.x.rows() {
        for (rg, &v) in ranges.iter_mut().zip(train.x.row(i)) {
            rg.0 = rg.0.min(v);
            rg.1 = rg.1.max(v);
        }
    }
    let scale = |raw: RawSynthetic| -> Result<EncodedDataset> {
        let mut x = raw.x;
        for i in 0..x.rows() {
            for (v, &(lo, hi)) in x.row_mut(i).iter_mut().zip(&ranges) {
                *v = min_max(*v, lo, hi);
            }
        }
        EncodedDataset::new(x, raw.y, raw.a, synthetic_feature_names(cfg.d))
    };
    Ok((scale(train)?, scale(test)?))
}
