use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{stage_rng, Stage};

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stage_rng(seed, Stage::Split));
    idx
}

/// Random train/test split of `n` rows. The test side receives
/// `round(n · test_fraction)` rows.
pub fn split(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config("test_fraction must lie in (0, 1)".into()));
    }
    let n_test = libm::round(n as f64 * test_fraction) as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::Data(alloc::format!(
            "split of {n} rows at fraction {test_fraction} leaves an empty side"
        )));
    }
    let idx = shuffled(n, seed);
    let (test, train) = idx.split_at(n_test);
    Ok((train.to_vec(), test.to_vec()))
}

/// `folds` disjoint test folds covering all rows; fold `i` trains on the
/// complement of its test rows.
pub fn kfold(n: usize, folds: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if folds < 2 || n < folds {
        return Err(Error::Data(alloc::format!("cannot make {folds} folds from {n} rows")));
    }
    let idx = shuffled(n, seed);
    Ok((0..folds)
        .map(|f| {
            let lo = f * n / folds;
            let hi = (f + 1) * n / folds;
            let test = idx[lo..hi].to_vec();
            let train = idx[..lo].iter().chain(&idx[hi..]).copied().collect();
            (train, test)
        })
        .collect())
}
