use super::*;

use crate::autodiff::ParamStore;
use crate::data::{sample_case, standardize, CaseSpec, EventSequence, Example};
use crate::kernel::{FeatureMap, FeatureMode};
use crate::models::{Activation, BaselineGru, ComposeMode, Gru, Mlp, Model, TemporalGru, TimeFeatures};
use crate::spectral::{GaussianSpectral, SpectralSampler};
use crate::util::rng_from_seed;

#[test]
fn zero_gradient_leaves_parameters_unchanged() {
    let mut store = ParamStore::new();
    store.insert("w", vec![2], vec![1.5, -2.5]);
    let mut state = AdamState::new();
    let cfg = AdamConfig::default();
    // seed a nonzero first moment, then step with zero grads: parameters
    // stay put only if moments decay toward zero, so run a couple steps
    // after one real gradient and watch the update magnitude shrink.
    store.add_grad("w", &[0.0, 0.0]).unwrap();
    adam_step(&mut store, &mut state, &cfg);
    assert_eq!(store.get("w").unwrap().values, vec![1.5, -2.5]);

    store.zero_grads();
    store.add_grad("w", &[1.0, 1.0]).unwrap();
    adam_step(&mut store, &mut state, &cfg);
    let after_real = store.get("w").unwrap().values.clone();
    store.zero_grads();
    adam_step(&mut store, &mut state, &cfg);
    let m = state.first_moment("w").unwrap();
    assert!(m[0].abs() < 1.0 - 1e-9 && m[0] > 0.0, "moment decays: {}", m[0]);
    let drift1 = (store.get("w").unwrap().values[0] - after_real[0]).abs();
    store.zero_grads();
    for _ in 0..20 {
        adam_step(&mut store, &mut state, &cfg);
    }
    store.zero_grads();
    let before = store.get("w").unwrap().values.clone();
    adam_step(&mut store, &mut state, &cfg);
    let drift_late = (store.get("w").unwrap().values[0] - before[0]).abs();
    assert!(drift_late < drift1, "moment-driven drift decays: {drift_late} vs {drift1}");
}

#[test]
fn first_step_magnitude_is_about_lr() {
    let mut store = ParamStore::new();
    store.insert("w", vec![1], vec![0.0]);
    store.add_grad("w", &[3.7]).unwrap();
    let mut state = AdamState::new();
    let cfg = AdamConfig { lr: 0.01, ..Default::default() };
    adam_step(&mut store, &mut state, &cfg);
    let moved = store.get("w").unwrap().values[0].abs();
    assert!((moved - 0.01).abs() < 1e-6, "first step {moved}");
}

#[test]
fn fifty_steps_shrink_a_quadratic() {
    // f(theta) = theta^2 from theta = 1 with lr 0.1.
    let mut store = ParamStore::new();
    store.insert("theta", vec![1], vec![1.0]);
    let mut state = AdamState::new();
    let cfg = AdamConfig { lr: 0.1, ..Default::default() };
    for _ in 0..50 {
        store.zero_grads();
        let theta = store.get("theta").unwrap().values[0];
        store.add_grad("theta", &[2.0 * theta]).unwrap();
        adam_step(&mut store, &mut state, &cfg);
    }
    let theta = store.get("theta").unwrap().values[0];
    assert!(theta.abs() < 0.05, "after 50 steps theta = {theta}");
}

fn tiny_dataset(seed: u64) -> (Vec<Example>, Vec<Example>, Vec<Example>, crate::data::Stats) {
    let values: Vec<f64> = (0..400)
        .map(|i| (0.15 * i as f64).sin() + 0.1 * ((i * 37 % 100) as f64 / 100.0))
        .collect();
    let seq = EventSequence::from_series(&values, 0.25);
    let case = CaseSpec::IrregularFixed { window: 12, q: 6, horizon: 3, stride: 2 };
    let split = crate::data::side_by_side_split(seq.len(), 0.6, 0.2).unwrap();
    let make = |range: std::ops::Range<usize>, s: u64| {
        let sub = seq.slice(range.start, range.end);
        sample_case(&sub, &case, s)
            .unwrap()
            .iter()
            .map(crate::data::timespan_transform)
            .collect::<Vec<_>>()
    };
    let train = make(split.train, seed);
    let val = make(split.val, seed + 1);
    let test = make(split.test, seed + 2);
    let (train, val, test, stats) = standardize(&train, &val, &test).unwrap();
    (train, val, test, stats)
}

fn tiny_model(hidden: usize, m: usize) -> Model {
    let feature_map = FeatureMap::new(FeatureMode::Nonstationary, m, 2, 123);
    let sampler = SpectralSampler::Gaussian(GaussianSpectral::new(2, "spectral"));
    let head = Mlp::new(vec![hidden * 2 * m, 1], Activation::Relu, "head")
        .head()
        .with_first_layer_scale(1.0 / (hidden as f64).sqrt());
    Model::TemporalGru(TemporalGru {
        gru: Gru::new(1, hidden, "gru"),
        head,
        mode: ComposeMode::Multiply,
        feature_map,
        sampler,
    })
}

#[test]
fn training_is_bit_deterministic_and_early_stops() {
    let (train, val, _test, _stats) = tiny_dataset(5);
    let cfg = TrainConfig {
        lr: 3e-3,
        batch_size: 16,
        max_epochs: 18,
        patience: 3,
        seed: 11,
        ..Default::default()
    };
    let run = || {
        let model = tiny_model(4, 2);
        let mut store = ParamStore::new();
        model.register(&mut store, &mut rng_from_seed(42));
        let outcome = train_loop(&model, &mut store, &train, &val, &cfg).unwrap();
        (outcome, store.snapshot())
    };
    let (a, snap_a) = run();
    let (b, snap_b) = run();
    assert_eq!(a.history.len(), b.history.len());
    for (x, y) in a.history.iter().zip(&b.history) {
        assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
        assert_eq!(x.val_mae.to_bits(), y.val_mae.to_bits());
    }
    for (name, values) in &snap_a {
        let other = &snap_b[name];
        for (p, q) in values.iter().zip(other) {
            assert_eq!(p.to_bits(), q.to_bits());
        }
    }

    // Early stopping: no more than best_epoch + patience + 1 epochs ran,
    // and the reported best is the minimum recorded val MAE.
    let last_epoch = a.history.last().unwrap().epoch;
    assert!(last_epoch <= a.best_epoch + cfg.patience);
    let min_val = a.history.iter().map(|r| r.val_mae).fold(f64::INFINITY, f64::min);
    assert_eq!(a.best_val_mae, min_val);
}

#[test]
fn one_step_reaches_both_network_and_spectral_parameters() {
    let (train, val, _test, _stats) = tiny_dataset(7);
    let model = tiny_model(4, 2);
    let mut store = ParamStore::new();
    model.register(&mut store, &mut rng_from_seed(43));
    let cfg = TrainConfig {
        max_epochs: 1,
        batch_size: train.len(),
        seed: 3,
        ..Default::default()
    };
    let before = store.snapshot();
    // run a single epoch = single batch = single Adam step
    train_loop(&model, &mut store, &train, &val, &cfg).unwrap();
    // The loop restores the best epoch, which after one epoch is the
    // post-step state; compare against the initial values.
    let mut theta_moved = false;
    let mut psi_moved = false;
    for (name, values) in store.snapshot() {
        let init = &before[&name];
        let moved = values.iter().zip(init).any(|(a, b)| a != b);
        if name.starts_with("spectral/") {
            psi_moved |= moved;
        } else {
            theta_moved |= moved;
        }
    }
    assert!(theta_moved, "network parameters untouched by a training step");
    assert!(psi_moved, "spectral parameters untouched by a training step");
}

#[test]
fn nan_loss_aborts_with_diagnostic() {
    let (train, val, _test, _stats) = tiny_dataset(9);
    let model = tiny_model(3, 2);
    let mut store = ParamStore::new();
    model.register(&mut store, &mut rng_from_seed(44));
    store.values_mut("gru/w_c").unwrap()[0] = f64::NAN;
    let cfg = TrainConfig { max_epochs: 2, seed: 1, ..Default::default() };
    let err = train_loop(&model, &mut store, &train, &val, &cfg).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("non-finite"), "{msg}");
    assert!(msg.contains("gru/w_c") || msg.contains("node"), "{msg}");
}

#[test]
fn evaluate_denormalizes_with_target_std() {
    let (train, val, test, stats) = tiny_dataset(13);
    let model = tiny_model(3, 2);
    let mut store = ParamStore::new();
    model.register(&mut store, &mut rng_from_seed(45));
    let cfg = TrainConfig { max_epochs: 3, patience: 2, seed: 2, ..Default::default() };
    train_loop(&model, &mut store, &train, &val, &cfg).unwrap();
    let mae = evaluate(&model, &store, &test, &stats, 32).unwrap();
    assert!(mae.is_finite() && mae > 0.0);
    // consistency: normalized mae times sigma
    let unit_stats = crate::data::Stats {
        feature_mean: stats.feature_mean.clone(),
        feature_std: stats.feature_std.clone(),
        target_mean: stats.target_mean,
        target_std: 1.0,
    };
    let mae_norm = evaluate(&model, &store, &test, &unit_stats, 32).unwrap();
    assert!((mae - mae_norm * stats.target_std).abs() < 1e-12);
}

#[test]
fn baseline_models_train_too() {
    let (train, val, _test, _stats) = tiny_dataset(17);
    let model = Model::BaselineGru(BaselineGru {
        gru: Gru::new(2, 4, "gru"),
        head: Mlp::new(vec![4, 6, 1], Activation::Relu, "head"),
        time: TimeFeatures::Concat,
        trigo_prefix: "trigo".into(),
    });
    let mut store = ParamStore::new();
    model.register(&mut store, &mut rng_from_seed(46));
    let cfg = TrainConfig { max_epochs: 4, patience: 2, batch_size: 32, seed: 5, ..Default::default() };
    let outcome = train_loop(&model, &mut store, &train, &val, &cfg).unwrap();
    assert!(!outcome.history.is_empty());
    assert!(outcome.history.iter().all(|r| r.train_loss.is_finite()));
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(TrainConfig { lr: 0.0, ..Default::default() }.validate().is_err());
    assert!(TrainConfig { patience: 0, ..Default::default() }.validate().is_err());
    assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
}
