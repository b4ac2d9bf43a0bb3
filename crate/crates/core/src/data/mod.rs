//! Synthetic continuous-time process simulation, irregular sampling schemes,
//! CSV ingestion, chronological splits and standardization.

mod csvio;
mod sampling;
mod simulate;
mod splits;

pub use csvio::{load_csv, save_csv, CsvSchema};
pub use sampling::{sample_case, timespan_transform, CaseSpec, Example};
pub use simulate::{
    empirical_autocovariance, periodogram_welch, simulate_ctar2, simulate_ctar2_state,
    simulate_ctar2_subsampled, simulate_ctar2_with_noise,
};
pub use splits::{side_by_side_split, standardize, walk_forward_splits, SideBySideSplit, Stats};

use crate::error::{Error, Result};

/// Irregularly sampled record: strictly increasing timestamps, one feature
/// row per timestamp, optional targets.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSequence {
    pub timestamps: Vec<f64>,
    /// Row-major `n x dim` feature matrix.
    pub features: Vec<f64>,
    pub dim: usize,
    pub targets: Option<Vec<f64>>,
}

impl EventSequence {
    pub fn new(
        timestamps: Vec<f64>,
        features: Vec<f64>,
        dim: usize,
        targets: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = timestamps.len();
        if features.len() != n * dim {
            return Err(Error::DimensionMismatch {
                context: "event sequence features".into(),
                expected: n * dim,
                got: features.len(),
            });
        }
        if let Some(t) = &targets {
            if t.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "event sequence targets".into(),
                    expected: n,
                    got: t.len(),
                });
            }
        }
        for w in timestamps.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidData(format!(
                    "timestamps must be strictly increasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(EventSequence {
            timestamps,
            features,
            dim,
            targets,
        })
    }

    /// Scalar series as an event sequence on a regular grid.
    pub fn from_series(values: &[f64], dt: f64) -> Self {
        EventSequence {
            timestamps: (0..values.len()).map(|i| i as f64 * dt).collect(),
            features: values.to_vec(),
            dim: 1,
            targets: None,
        }
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Target at index `i`: the `targets` column when present, otherwise the
    /// first feature column (self-prediction on a scalar series).
    pub fn target_at(&self, i: usize) -> f64 {
        match &self.targets {
            Some(t) => t[i],
            None => self.features[i * self.dim],
        }
    }

    /// Restrict to index range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> EventSequence {
        EventSequence {
            timestamps: self.timestamps[start..end].to_vec(),
            features: self.features[start * self.dim..end * self.dim].to_vec(),
            dim: self.dim,
            targets: self.targets.as_ref().map(|t| t[start..end].to_vec()),
        }
    }
}
