use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disjoint train/validation/test partition of item indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl ItemSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }

    pub fn num_items(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }
}

/// Shuffles `0..num_items` and cuts it into `⌊f·n⌋`-sized validation and test
/// parts; everything left over goes to train.
pub fn split_items(num_items: usize, fractions: (f64, f64, f64), seed: u64) -> Result<ItemSplit> {
    let (ft, fv, fs) = fractions;
    if !(ft > 0.0 && fv > 0.0 && fs > 0.0) || ((ft + fv + fs) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions ({ft}, {fv}, {fs}) must be positive and sum to 1"
        )));
    }
    let floor = |f: f64| (f * num_items as f64 + 1e-9).floor() as usize;
    let n_val = floor(fv);
    let n_test = floor(fs);

    let mut order: Vec<usize> = (0..num_items).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n_train = num_items - n_val - n_test;
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(ItemSplit { train, val, test })
}
