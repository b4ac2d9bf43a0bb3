//! The three supervised sampling schemes over a series, and the
//! timespan transform applied before models consume an example.

use rand::Rng;

use crate::error::{Error, Result};
use crate::util::rng_from_seed;

use super::EventSequence;

/// One supervised example: an ordered history and a single target.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    /// History times. In raw examples these are absolute task-unit times;
    /// after [`timespan_transform`] they hold timespans to the target.
    pub times: Vec<f64>,
    /// Row-major `q x dim` history features.
    pub features: Vec<f64>,
    pub dim: usize,
    /// Target time (absolute), or 0 after the timespan transform.
    pub target_time: f64,
    pub target: f64,
}

impl Example {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Sampling scheme. Offsets are in index steps on the source grid.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "case", rename_all = "lowercase")]
pub enum CaseSpec {
    /// Case 1: regular next-step windows.
    Regular { window: usize, stride: usize },
    /// Case 2: `q` points sampled uniformly without replacement from each
    /// window (sorted ascending), predicting a fixed-offset target.
    IrregularFixed {
        window: usize,
        q: usize,
        horizon: usize,
        stride: usize,
    },
    /// Case 3: irregular history predicting a target at an offset drawn
    /// uniformly from `[min_horizon, max_horizon]` (inclusive).
    IrregularRandom {
        window: usize,
        q: usize,
        min_horizon: usize,
        max_horizon: usize,
        stride: usize,
    },
}

impl CaseSpec {
    fn window(&self) -> usize {
        match self {
            CaseSpec::Regular { window, .. } => *window,
            CaseSpec::IrregularFixed { window, .. } => *window,
            CaseSpec::IrregularRandom { window, .. } => *window,
        }
    }

    fn stride(&self) -> usize {
        match self {
            CaseSpec::Regular { stride, .. } => *stride,
            CaseSpec::IrregularFixed { stride, .. } => *stride,
            CaseSpec::IrregularRandom { stride, .. } => *stride,
        }
    }

    fn max_target_offset(&self) -> usize {
        match self {
            CaseSpec::Regular { .. } => 1,
            CaseSpec::IrregularFixed { horizon, .. } => *horizon,
            CaseSpec::IrregularRandom { max_horizon, .. } => *max_horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let msg = |s: &str| Err(Error::InvalidParameter(s.to_string()));
        if self.window() == 0 {
            return msg("sampling window must be positive");
        }
        if self.stride() == 0 {
            return msg("sampling stride must be positive");
        }
        match self {
            CaseSpec::Regular { .. } => Ok(()),
            CaseSpec::IrregularFixed { window, q, horizon, .. } => {
                if *q == 0 || q > window {
                    return msg("q must satisfy 1 <= q <= window");
                }
                if *horizon == 0 {
                    return msg("horizon must be positive");
                }
                Ok(())
            }
            CaseSpec::IrregularRandom {
                window,
                q,
                min_horizon,
                max_horizon,
                ..
            } => {
                if *q == 0 || q > window {
                    return msg("q must satisfy 1 <= q <= window");
                }
                if *min_horizon == 0 || min_horizon > max_horizon {
                    return msg("need 1 <= min_horizon <= max_horizon");
                }
                Ok(())
            }
        }
    }
}

/// Generate supervised examples from `seq`. Deterministic given `seed`;
/// windows advance by `stride` and every example keeps its timestamps.
pub fn sample_case(seq: &EventSequence, case: &CaseSpec, seed: u64) -> Result<Vec<Example>> {
    case.validate()?;
    let n = seq.len();
    let window = case.window();
    let needed = window + case.max_target_offset();
    if n < needed {
        return Err(Error::InvalidData(format!(
            "series of length {n} too short for window {window} plus target offset"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::new();
    let mut start = 0usize;
    while start + needed <= n {
        let region_end = start + window; // exclusive
        let (indices, target_idx) = match case {
            CaseSpec::Regular { .. } => ((start..region_end).collect::<Vec<_>>(), region_end),
            CaseSpec::IrregularFixed { q, horizon, .. } => (
                sample_sorted_without_replacement(&mut rng, start, region_end, *q),
                region_end - 1 + horizon,
            ),
            CaseSpec::IrregularRandom {
                q,
                min_horizon,
                max_horizon,
                ..
            } => {
                let idx = sample_sorted_without_replacement(&mut rng, start, region_end, *q);
                let offset = rng.gen_range(*min_horizon..=*max_horizon);
                (idx, region_end - 1 + offset)
            }
        };
        let mut times = Vec::with_capacity(indices.len());
        let mut features = Vec::with_capacity(indices.len() * seq.dim);
        for &i in &indices {
            times.push(seq.timestamps[i]);
            features.extend_from_slice(seq.feature_row(i));
        }
        out.push(Example {
            times,
            features,
            dim: seq.dim,
            target_time: seq.timestamps[target_idx],
            target: seq.target_at(target_idx),
        });
        start += case.stride();
    }
    Ok(out)
}

/// `q` distinct indices uniform over `[lo, hi)`, ascending. Floyd's
/// algorithm keeps the draw O(q) regardless of the window size.
fn sample_sorted_without_replacement(
    rng: &mut impl Rng,
    lo: usize,
    hi: usize,
    q: usize,
) -> Vec<usize> {
    let span = hi - lo;
    debug_assert!(q <= span);
    let mut chosen = std::collections::BTreeSet::new();
    for j in span - q..span {
        let t = rng.gen_range(0..=j);
        if !chosen.insert(lo + t) {
            chosen.insert(lo + j);
        }
    }
    chosen.into_iter().collect()
}

/// Convert history times to timespans against the target: `tau_i = t_target
/// - t_i`, target timespan exactly 0. Larger original time means smaller
/// timespan, so recency ordering is preserved (reversed sign).
pub fn timespan_transform(example: &Example) -> Example {
    let mut out = example.clone();
    for t in out.times.iter_mut() {
        *t = example.target_time - *t;
    }
    out.target_time = 0.0;
    out
}
