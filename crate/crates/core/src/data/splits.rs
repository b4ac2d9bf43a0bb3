//! Chronological train/validation/test splits and train-stat standardization.

use crate::error::{Error, Result};

use super::Example;

/// Contiguous index ranges on the time axis, pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideBySideSplit {
    pub train: std::ops::Range<usize>,
    pub val: std::ops::Range<usize>,
    pub test: std::ops::Range<usize>,
}

/// Side-by-side split by fractions of the series length (default 60/20/20).
pub fn side_by_side_split(n: usize, train_frac: f64, val_frac: f64) -> Result<SideBySideSplit> {
    if !(train_frac > 0.0 && val_frac > 0.0 && train_frac + val_frac < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fractions must be positive and sum below 1, got {train_frac} + {val_frac}"
        )));
    }
    let train_end = (n as f64 * train_frac).floor() as usize;
    let val_end = (n as f64 * (train_frac + val_frac)).floor() as usize;
    if train_end == 0 || val_end <= train_end || val_end >= n {
        return Err(Error::InvalidData(format!(
            "series of length {n} too short for a side-by-side split"
        )));
    }
    let split = SideBySideSplit {
        train: 0..train_end,
        val: train_end..val_end,
        test: val_end..n,
    };
    debug_assert!(split.train.end <= split.val.start && split.val.end <= split.test.start);
    Ok(split)
}

/// Walk-forward splits: for each window position, a training window followed
/// by forward validation and test segments. Successive triples advance by
/// `stride`.
pub fn walk_forward_splits(
    n: usize,
    window: usize,
    val_horizon: usize,
    test_horizon: usize,
    stride: usize,
) -> Result<Vec<SideBySideSplit>> {
    if window == 0 || val_horizon == 0 || test_horizon == 0 || stride == 0 {
        return Err(Error::InvalidParameter(
            "walk-forward window, horizons and stride must be positive".into(),
        ));
    }
    let total = window + val_horizon + test_horizon;
    if n < total {
        return Err(Error::InvalidData(format!(
            "series of length {n} too short for walk-forward ({total} needed)"
        )));
    }
    let mut out = Vec::new();
    let mut start = 0usize;
    while start + total <= n {
        out.push(SideBySideSplit {
            train: start..start + window,
            val: start + window..start + window + val_horizon,
            test: start + window + val_horizon..start + total,
        });
        start += stride;
    }
    Ok(out)
}

/// Normalization statistics computed on training data only.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Stats {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

impl Stats {
    /// Column means/stds of the training features and targets. Zero-variance
    /// columns get unit scale so the transform stays invertible.
    pub fn from_train(train: &[Example]) -> Result<Stats> {
        let dim = train
            .first()
            .map(|e| e.dim)
            .ok_or_else(|| Error::InvalidData("empty training set".into()))?;
        let mut count = 0usize;
        let mut mean = vec![0.0; dim];
        for ex in train {
            for row in 0..ex.len() {
                for d in 0..dim {
                    mean[d] += ex.features[row * dim + d];
                }
                count += 1;
            }
        }
        for m in mean.iter_mut() {
            *m /= count as f64;
        }
        let mut var = vec![0.0; dim];
        for ex in train {
            for row in 0..ex.len() {
                for d in 0..dim {
                    let c = ex.features[row * dim + d] - mean[d];
                    var[d] += c * c;
                }
            }
        }
        let std: Vec<f64> = var
            .iter()
            .map(|v| {
                let s = (v / count as f64).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        let t_mean = train.iter().map(|e| e.target).sum::<f64>() / train.len() as f64;
        let t_var = train
            .iter()
            .map(|e| (e.target - t_mean) * (e.target - t_mean))
            .sum::<f64>()
            / train.len() as f64;
        let t_std = if t_var > 0.0 { t_var.sqrt() } else { 1.0 };
        Ok(Stats {
            feature_mean: mean,
            feature_std: std,
            target_mean: t_mean,
            target_std: t_std,
        })
    }

    pub fn apply(&self, ex: &Example) -> Example {
        let mut out = ex.clone();
        let dim = ex.dim;
        for row in 0..ex.len() {
            for d in 0..dim {
                let v = &mut out.features[row * dim + d];
                *v = (*v - self.feature_mean[d]) / self.feature_std[d];
            }
        }
        out.target = (ex.target - self.target_mean) / self.target_std;
        out
    }

    pub fn denormalize_target(&self, y: f64) -> f64 {
        y * self.target_std + self.target_mean
    }
}

/// Standardize all three sets using train statistics only; returns the stats
/// so predictions can be mapped back to original units.
pub fn standardize(
    train: &[Example],
    val: &[Example],
    test: &[Example],
) -> Result<(Vec<Example>, Vec<Example>, Vec<Example>, Stats)> {
    let stats = Stats::from_train(train)?;
    let apply = |set: &[Example]| set.iter().map(|e| stats.apply(e)).collect();
    Ok((apply(train), apply(val), apply(test), stats))
}
