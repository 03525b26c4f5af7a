use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use super::DataError;
use crate::learn::LabelSet;
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSplit {
    pub train: LabelSet,
    pub test: LabelSet,
}

/// Shuffles the labeled objects with substream `split` of `seed` and puts the
/// first `floor(fraction * n)` into train. Objects in `synthetic` always go to
/// train and do not count towards `n`. Both halves are sorted by object.
pub fn split(
    labels: &LabelSet,
    fraction: f64,
    seed: u64,
    synthetic: &BTreeSet<usize>,
) -> Result<LabeledSplit, DataError> {
    let (fixed, mut real): (Vec<(usize, f64)>, Vec<(usize, f64)>) =
        labels.iter().partition(|(o, _)| synthetic.contains(o));
    if real.len() < 2 {
        return Err(DataError::TooFewLabels(real.len()));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(DataError::Schema(format!(
            "split fraction {fraction} outside [0,1]"
        )));
    }
    let n_train = (fraction * real.len() as f64).floor() as usize;
    if n_train == real.len() {
        return Err(DataError::EmptyTestSet);
    }
    real.shuffle(&mut substream(seed, "split"));
    let mut train: Vec<(usize, f64)> = real[..n_train].to_vec();
    train.extend(fixed);
    let mut test: Vec<(usize, f64)> = real[n_train..].to_vec();
    train.sort_by_key(|p| p.0);
    test.sort_by_key(|p| p.0);
    let set = |v: Vec<(usize, f64)>| {
        let (o, y) = v.into_iter().unzip();
        LabelSet::new(o, y)
    };
    Ok(LabeledSplit {
        train: set(train),
        test: set(test),
    })
}
