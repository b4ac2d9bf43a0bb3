//! Glue between the configuration document and the library: dataset
//! preparation, model construction, and checkpoint round trips.

use crate::checkpoint::Checkpoint;
use crate::config::{Config, ModelKind};
use crate::data::{
    load_csv, sample_case, side_by_side_split, standardize, timespan_transform,
    walk_forward_splits, CsvSchema, EventSequence, Example, SideBySideSplit, Stats,
};
use crate::error::{Error, Result};
use crate::kernel::{FeatureMap, FeatureMode};
use crate::models::{
    Activation, BaselineFfn, BaselineGru, ComposeMode, Gru, Mlp, Model, TemporalFfn, TemporalGru,
};
use crate::spectral::{FlowSpectral, GaussianSpectral, SpectralSampler};
use crate::util::{derive_seed, rng_from_seed};

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
    pub stats: Stats,
    /// History length per example.
    pub q: usize,
    /// Feature dimension per history point.
    pub dim: usize,
    pub series: EventSequence,
    pub split: SideBySideSplit,
}

/// Build the working series from the configured source.
pub fn build_series(cfg: &Config, seed: u64) -> Result<EventSequence> {
    match cfg.data.source.as_str() {
        "ctar2" => {
            let steps = (cfg.data.sim_time / cfg.data.fine_dt).round() as usize;
            let (xs, vs) = crate::data::simulate_ctar2_state(
                &cfg.data.ctar2,
                cfg.data.fine_dt,
                steps,
                derive_seed(seed, 1),
            )?;
            let every = cfg.data.subsample_every.max(1);
            let dt = cfg.data.fine_dt * every as f64 * cfg.data.time_scale;
            if cfg.data.observe_velocity {
                let mut features = Vec::new();
                let mut timestamps = Vec::new();
                let mut targets = Vec::new();
                for (k, i) in (0..xs.len()).step_by(every).enumerate() {
                    timestamps.push(k as f64 * dt);
                    features.push(xs[i]);
                    features.push(vs[i]);
                    targets.push(xs[i]);
                }
                EventSequence::new(timestamps, features, 2, Some(targets))
            } else {
                let values: Vec<f64> = xs.iter().step_by(every).copied().collect();
                Ok(EventSequence::from_series(&values, dt))
            }
        }
        "csv" => {
            let path = cfg.data.csv_path.as_ref().expect("validated");
            let mut seq = load_csv(
                std::path::Path::new(path),
                &CsvSchema {
                    missing_as_zero: cfg.data.missing_as_zero,
                },
            )?;
            if cfg.data.time_scale != 1.0 {
                for t in seq.timestamps.iter_mut() {
                    *t *= cfg.data.time_scale;
                }
            }
            Ok(seq)
        }
        other => Err(Error::Config(format!("unknown data source `{other}`"))),
    }
}

/// Series -> split -> per-split case sampling -> timespan transform ->
/// standardization on train statistics.
pub fn prepare_dataset(cfg: &Config, seed: u64) -> Result<PreparedData> {
    let series = build_series(cfg, seed)?;
    let split = match cfg.data.split.scheme.as_str() {
        "side-by-side" => side_by_side_split(
            series.len(),
            cfg.data.split.train_frac,
            cfg.data.split.val_frac,
        )?,
        "walk-forward" => {
            let s = &cfg.data.split;
            let triples = walk_forward_splits(
                series.len(),
                s.window,
                s.val_horizon,
                s.test_horizon,
                s.stride,
            )?;
            triples
                .get(s.index)
                .cloned()
                .ok_or_else(|| {
                    Error::Config(format!(
                        "walk-forward index {} out of range ({} triples)",
                        s.index,
                        triples.len()
                    ))
                })?
        }
        other => return Err(Error::Config(format!("unknown split scheme `{other}`"))),
    };
    let sample = |range: &std::ops::Range<usize>, case: &crate::data::CaseSpec, stream: u64| -> Result<Vec<Example>> {
        let sub = series.slice(range.start, range.end);
        Ok(sample_case(&sub, case, derive_seed(seed, stream))?
            .iter()
            .map(timespan_transform)
            .collect())
    };
    let eval_case = match (&cfg.data.case, cfg.data.eval_stride) {
        (case, None) => case.clone(),
        (case, Some(s)) => {
            let mut c = case.clone();
            match &mut c {
                crate::data::CaseSpec::Regular { stride, .. } => *stride = s,
                crate::data::CaseSpec::IrregularFixed { stride, .. } => *stride = s,
                crate::data::CaseSpec::IrregularRandom { stride, .. } => *stride = s,
            }
            c
        }
    };
    let train = sample(&split.train, &cfg.data.case, 11)?;
    let val = sample(&split.val, &eval_case, 12)?;
    let test = sample(&split.test, &eval_case, 13)?;
    if train.is_empty() || val.is_empty() || test.is_empty() {
        return Err(Error::InvalidData(
            "a split produced no examples; widen the series or shrink the window".into(),
        ));
    }
    let q = train[0].len();
    let dim = train[0].dim;
    let (train, val, test, stats) = standardize(&train, &val, &test)?;
    Ok(PreparedData {
        train,
        val,
        test,
        stats,
        q,
        dim,
        series,
        split,
    })
}

/// Feature-map input space: `[x, t]` jointly, or the timespan alone when
/// the feature-independent temporal kernel is configured.
fn feature_space(cfg: &Config, feature_dim: usize) -> (usize, FeatureMode) {
    if cfg.spectral.time_only {
        (1, FeatureMode::Stationary)
    } else {
        (feature_dim + 1, FeatureMode::Nonstationary)
    }
}

fn spectral_sampler(cfg: &Config, z_dim: usize, mode: FeatureMode) -> SpectralSampler {
    let width = match mode {
        FeatureMode::Stationary => z_dim,
        FeatureMode::Nonstationary => 2 * z_dim,
    };
    match cfg.spectral.family.as_str() {
        "gaussian" => SpectralSampler::Gaussian(GaussianSpectral::new(z_dim, "spectral/gaussian")),
        _ => SpectralSampler::Flow(FlowSpectral::new(
            width,
            cfg.spectral.coupling_layers,
            cfg.spectral.hidden,
            "spectral/flow",
        )),
    }
}

fn head_widths(input: usize, hidden: &[usize]) -> Vec<usize> {
    let mut widths = vec![input];
    widths.extend_from_slice(hidden);
    widths.push(1);
    widths
}

/// Construct the configured model for examples of shape `(q, dim)`. The
/// feature map's auxiliary noise is drawn from `eps_seed` (or restored).
pub fn build_model(cfg: &Config, q: usize, dim: usize, eps: EpsSource) -> Result<Model> {
    let kind = ModelKind::parse(&cfg.model.kind)?;
    let m = cfg.spectral.m;
    let two_m = 2 * m;
    let hidden = cfg.model.hidden;
    match kind {
        ModelKind::TemporalRnn => {
            if cfg.model.compose_mode == ComposeMode::Add && two_m != hidden {
                return Err(Error::Config(format!(
                    "additive composition requires 2m = hidden (got 2m = {two_m}, hidden = {hidden})"
                )));
            }
            let (z_dim, mode) = feature_space(cfg, dim);
            let feature_map = eps.build(mode, m, z_dim)?;
            let sampler = spectral_sampler(cfg, z_dim, mode);
            let head_in = match cfg.model.compose_mode {
                ComposeMode::Multiply => hidden * two_m,
                ComposeMode::Add => hidden,
            };
            let head = Mlp::new(
                head_widths(head_in, &cfg.model.head_hidden),
                Activation::Relu,
                "head",
            )
            .with_first_layer_scale(1.0 / (hidden as f64).sqrt());
            Ok(Model::TemporalGru(TemporalGru {
                gru: Gru::new(dim, hidden, "gru"),
                head,
                mode: cfg.model.compose_mode,
                feature_map,
                sampler,
            }))
        }
        ModelKind::TemporalFfn => {
            let input = q * dim;
            let layers = cfg.model.ffn_widths.len();
            let h = cfg.model.compose_layer;
            if h == 0 || h > layers {
                return Err(Error::Config(format!(
                    "compose_layer must be in 1..={layers}"
                )));
            }
            let mut base_widths = vec![input];
            base_widths.extend_from_slice(&cfg.model.ffn_widths[..h]);
            let d_h = *base_widths.last().unwrap();
            if cfg.model.compose_mode == ComposeMode::Add && two_m != d_h {
                return Err(Error::Config(format!(
                    "additive composition requires 2m = layer width (got 2m = {two_m}, width = {d_h})"
                )));
            }
            let composed = match cfg.model.compose_mode {
                ComposeMode::Multiply => d_h * two_m,
                ComposeMode::Add => d_h,
            };
            let mut head_hidden = cfg.model.ffn_widths[h..].to_vec();
            head_hidden.extend_from_slice(&cfg.model.head_hidden);
            let (z_dim, mode) = feature_space(cfg, input);
            let feature_map = eps.build(mode, m, z_dim)?;
            let sampler = spectral_sampler(cfg, z_dim, mode);
            let base = Mlp::new(base_widths, Activation::Relu, "base");
            let head = Mlp::new(head_widths(composed, &head_hidden), Activation::Relu, "head")
                .head()
                .with_first_layer_scale(1.0 / (d_h as f64).sqrt());
            Ok(Model::TemporalFfn(TemporalFfn {
                base,
                head,
                mode: cfg.model.compose_mode,
                feature_map,
                sampler,
            }))
        }
        ModelKind::RnnTime | ModelKind::RnnTrigo => {
            let time = kind.time_features(cfg.model.trigo_k).expect("baseline");
            let head_hidden: &[usize] = if cfg.model.head_hidden.is_empty() {
                &[30]
            } else {
                &cfg.model.head_hidden
            };
            Ok(Model::BaselineGru(BaselineGru {
                gru: Gru::new(dim + time.extra_dims(), hidden, "gru"),
                head: Mlp::new(head_widths(hidden, head_hidden), Activation::Relu, "head"),
                time,
                trigo_prefix: "trigo".into(),
            }))
        }
        ModelKind::FfnTime | ModelKind::FfnTrigo => {
            let time = kind.time_features(cfg.model.trigo_k).expect("baseline");
            let extra = match time {
                crate::models::TimeFeatures::Concat => q,
                crate::models::TimeFeatures::Trigo { k } => 2 * k,
            };
            let input = q * dim + extra;
            let mut widths = vec![input];
            widths.extend_from_slice(&cfg.model.ffn_widths);
            widths.extend_from_slice(&cfg.model.head_hidden);
            widths.push(1);
            Ok(Model::BaselineFfn(BaselineFfn {
                net: Mlp::new(widths, Activation::Relu, "net"),
                time,
                trigo_prefix: "trigo".into(),
            }))
        }
    }
}

/// Frozen-noise source for the feature map: fresh draws or checkpointed.
pub enum EpsSource {
    Seed(u64),
    Frozen(Vec<f64>),
}

impl EpsSource {
    fn build(self, mode: FeatureMode, m: usize, dim: usize) -> Result<FeatureMap> {
        match self {
            EpsSource::Seed(seed) => Ok(FeatureMap::new(mode, m, dim, seed)),
            EpsSource::Frozen(eps) => FeatureMap::from_eps(mode, m, dim, eps),
        }
    }
}

/// Register a freshly built model's parameters deterministically.
pub fn register_model(model: &Model, seed: u64) -> crate::autodiff::ParamStore {
    let mut store = crate::autodiff::ParamStore::new();
    let mut rng = rng_from_seed(derive_seed(seed, 2));
    model.register(&mut store, &mut rng);
    store
}

/// Checkpoint with enough metadata to rebuild the model and its dataset.
pub fn checkpoint_for(
    cfg: &Config,
    model: &Model,
    store: &crate::autodiff::ParamStore,
    seed: u64,
    q: usize,
    dim: usize,
) -> Checkpoint {
    let meta = serde_json::json!({
        "config": cfg,
        "seed": seed,
        "q": q,
        "dim": dim,
        "model_kind": cfg.model.kind,
    });
    Checkpoint::from_store(store, model.feature_eps().map(|e| e.to_vec()), meta)
}

/// Rebuild `(config, model, params, seed)` from a checkpoint.
pub fn restore_model(ckpt: &Checkpoint) -> Result<(Config, Model, crate::autodiff::ParamStore, u64)> {
    let cfg: Config = serde_json::from_value(ckpt.meta["config"].clone())
        .map_err(|e| Error::CheckpointFormat(format!("bad embedded config: {e}")))?;
    cfg.validate()?;
    let q = ckpt.meta["q"]
        .as_u64()
        .ok_or_else(|| Error::CheckpointFormat("missing q".into()))? as usize;
    let dim = ckpt.meta["dim"]
        .as_u64()
        .ok_or_else(|| Error::CheckpointFormat("missing dim".into()))? as usize;
    let seed = ckpt.meta["seed"]
        .as_u64()
        .ok_or_else(|| Error::CheckpointFormat("missing seed".into()))?;
    let eps = match &ckpt.feature_eps {
        Some(e) => EpsSource::Frozen(e.clone()),
        None => EpsSource::Seed(derive_seed(seed, 3)),
    };
    let model = build_model(&cfg, q, dim, eps)?;
    let store = ckpt.to_store();
    Ok((cfg, model, store, seed))
}

/// Fresh model + parameter store for a training run.
pub fn new_model_for_run(cfg: &Config, q: usize, dim: usize, seed: u64) -> Result<(Model, crate::autodiff::ParamStore)> {
    let model = build_model(cfg, q, dim, EpsSource::Seed(derive_seed(seed, 3)))?;
    let store = register_model(&model, seed);
    Ok((model, store))
}

/// Quick smoke used by tests: one deterministic prediction round trip
/// through a checkpoint.
pub fn checkpoint_round_trip_consistent(
    cfg: &Config,
    data: &PreparedData,
    model: &Model,
    store: &crate::autodiff::ParamStore,
    seed: u64,
) -> Result<bool> {
    let ckpt = checkpoint_for(cfg, model, store, seed, data.q, data.dim);
    let (_, model2, store2, _) = restore_model(&ckpt)?;
    let refs: Vec<&Example> = data.test.iter().take(8).collect();
    let batch = crate::models::Batch::from_examples(&refs)?;
    let tape = crate::autodiff::Tape::new();
    let p1 = model.predict(&tape, store, &batch, false)?;
    let p2 = model2.predict(&tape, &store2, &batch, false)?;
    Ok(p1
        .values()
        .iter()
        .zip(&p2.values())
        .all(|(a, b)| a.to_bits() == b.to_bits()))
}

/// A rough parameter count, used when matching baseline capacity.
pub fn parameter_count(store: &crate::autodiff::ParamStore) -> usize {
    store.total_values()
}

impl std::fmt::Debug for EpsSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EpsSource::Seed(s) => write!(f, "EpsSource::Seed({s})"),
            EpsSource::Frozen(e) => write!(f, "EpsSource::Frozen(len {})", e.len()),
        }
    }
}
