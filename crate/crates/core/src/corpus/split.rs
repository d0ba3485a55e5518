use super::{CorpusError, Result};
use crate::rng::seeded;
use rand::seq::SliceRandom;

/// Seeded random partition into `(train, test)` with
/// `|train| = round(train_frac · n)`. Both halves keep input order.
pub fn split_dataset<T: Clone>(
    items: &[T],
    train_frac: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(CorpusError::BadTrainFraction(train_frac));
    }
    if items.len() < 2 {
        return Err(CorpusError::TooFewItems(items.len()));
    }
    let n = items.len();
    let n_train = (train_frac * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let mut in_train = vec![false; n];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n_train), Vec::with_capacity(n - n_train));
    for (item, flag) in items.iter().zip(in_train) {
        if flag {
            train.push(item.clone());
        } else {
            test.push(item.clone());
        }
    }
    Ok((train, test))
}
