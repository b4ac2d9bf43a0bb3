use super::*;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::Example;
use crate::kernel::{FeatureMap, FeatureMode};
use crate::spectral::{FlowSpectral, GaussianSpectral, SpectralSampler};
use crate::util::rng_from_seed;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        x.exp() / (1.0 + x.exp())
    }
}

#[test]
fn ffn_zero_input_zero_biases_gives_last_bias() {
    let mlp = Mlp::new(vec![3, 4, 2], Activation::Relu, "net");
    let mut store = ParamStore::new();
    mlp.register(&mut store, &mut rng_from_seed(1));
    store.values_mut("net/b1").unwrap().iter_mut().for_each(|v| *v = 0.0);
    let last_bias = store.get("net/b2").unwrap().values.clone();
    let tape = Tape::new();
    let x = tape.constant(&[1, 3], vec![0.0; 3]);
    let layers = mlp.forward(&tape, &store, &x, false).unwrap();
    assert!(layers[0].values().iter().all(|v| *v == 0.0));
    assert_eq!(layers[1].values(), last_bias);
}

#[test]
fn one_layer_identity_weight_scales_by_sqrt_dim() {
    let mlp = Mlp::new(vec![4, 4], Activation::Relu, "net");
    let mut store = ParamStore::new();
    mlp.register(&mut store, &mut rng_from_seed(2));
    let w = store.values_mut("net/w1").unwrap();
    for i in 0..4 {
        for j in 0..4 {
            w[i * 4 + j] = if i == j { 1.0 } else { 0.0 };
        }
    }
    store.values_mut("net/b1").unwrap().iter_mut().for_each(|v| *v = 0.0);
    let tape = Tape::new();
    let x = tape.constant(&[1, 4], vec![2.0, -4.0, 6.0, 1.0]);
    let out = mlp.output(&tape, &store, &x, false).unwrap();
    for (got, want) in out.values().iter().zip([2.0, -4.0, 6.0, 1.0]) {
        assert!((got - want / 2.0).abs() < 1e-15);
    }
}

#[test]
fn ffn_matches_straight_line_oracle() {
    let widths = vec![3, 5, 4, 1];
    let mlp = Mlp::new(widths.clone(), Activation::Relu, "net");
    let mut store = ParamStore::new();
    mlp.register(&mut store, &mut rng_from_seed(3));
    let mut rng = rng_from_seed(4);
    let x: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();

    // Independent dense recursion over the stored parameters.
    let mut current = x.clone();
    let mut oracle_layers: Vec<Vec<f64>> = Vec::new();
    for l in 0..widths.len() - 1 {
        let (din, dout) = (widths[l], widths[l + 1]);
        let w = &store.get(&format!("net/w{}", l + 1)).unwrap().values;
        let b = &store.get(&format!("net/b{}", l + 1)).unwrap().values;
        let input: Vec<f64> = if l == 0 {
            current.clone()
        } else {
            current.iter().map(|v| v.max(0.0)).collect()
        };
        let mut out = vec![0.0; dout];
        for j in 0..dout {
            let mut s = 0.0;
            for i in 0..din {
                s += input[i] * w[i * dout + j];
            }
            out[j] = s / (din as f64).sqrt() + b[j];
        }
        oracle_layers.push(out.clone());
        current = out;
    }

    let tape = Tape::new();
    let xt = tape.constant(&[1, 3], x);
    let layers = mlp.forward(&tape, &store, &xt, false).unwrap();
    for (got, want) in layers.iter().zip(&oracle_layers) {
        for (a, b) in got.values().iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn gru_zero_input_zero_params_stays_zero() {
    let gru = Gru::new(2, 3, "gru");
    let mut store = ParamStore::new();
    gru.register(&mut store, &mut rng_from_seed(5));
    for gate in ["r", "u", "c"] {
        store.values_mut(&format!("gru/b_{gate}")).unwrap().iter_mut().for_each(|v| *v = 0.0);
    }
    let tape = Tape::new();
    let x = tape.constant(&[1, 2], vec![0.0, 0.0]);
    let hiddens = gru.forward(&tape, &store, &[x], false).unwrap();
    assert!(hiddens[0].values().iter().all(|v| *v == 0.0));
}

#[test]
fn gru_gate_saturation_degenerate_behavior() {
    let gru = Gru::new(1, 2, "gru");
    let mut store = ParamStore::new();
    gru.register(&mut store, &mut rng_from_seed(6));

    // Update gate saturated at 1: the hidden state is copied through and
    // never leaves its initial zero regardless of inputs.
    store.values_mut("gru/b_u").unwrap().iter_mut().for_each(|v| *v = 40.0);
    let tape = Tape::new();
    let steps: Vec<Tensor> = (0..3).map(|i| tape.constant(&[1, 1], vec![i as f64 + 1.0])).collect();
    let hiddens = gru.forward(&tape, &store, &steps, false).unwrap();
    for h in &hiddens {
        assert!(h.values().iter().all(|v| v.abs() < 1e-12));
    }

    // Update gate saturated at 0: the hidden equals the fresh candidate.
    store.values_mut("gru/b_u").unwrap().iter_mut().for_each(|v| *v = -40.0);
    let tape = Tape::new();
    let x = tape.constant(&[1, 1], vec![0.7]);
    let hiddens = gru.forward(&tape, &store, &[x], false).unwrap();
    // candidate with h = 0: tanh(x W_c / sqrt(in) + b_c)
    let w_c = &store.get("gru/w_c").unwrap().values;
    let b_c = &store.get("gru/b_c").unwrap().values;
    for (j, got) in hiddens[0].values().iter().enumerate() {
        let want = (0.7 * w_c[j] + b_c[j]).tanh();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn gru_matches_hand_unrolled_oracle() {
    let (din, hidden) = (2, 3);
    let gru = Gru::new(din, hidden, "gru");
    let mut store = ParamStore::new();
    gru.register(&mut store, &mut rng_from_seed(7));
    let mut rng = rng_from_seed(8);
    let seq: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..din).map(|_| rng.sample(StandardNormal)).collect())
        .collect();

    // Hand-unrolled scalar recursion.
    let get = |n: &str| store.get(n).unwrap().values.clone();
    let (w_r, u_r, b_r) = (get("gru/w_r"), get("gru/u_r"), get("gru/b_r"));
    let (w_u, u_u, b_u) = (get("gru/w_u"), get("gru/u_u"), get("gru/b_u"));
    let (w_c, u_c, b_c) = (get("gru/w_c"), get("gru/u_c"), get("gru/b_c"));
    let (sx, sh) = (1.0 / (din as f64).sqrt(), 1.0 / (hidden as f64).sqrt());
    let mut h = vec![0.0; hidden];
    let mut oracle = Vec::new();
    for x in &seq {
        let mut r = vec![0.0; hidden];
        let mut u = vec![0.0; hidden];
        for j in 0..hidden {
            let mut rs = b_r[j];
            let mut us = b_u[j];
            for i in 0..din {
                rs += sx * x[i] * w_r[i * hidden + j];
                us += sx * x[i] * w_u[i * hidden + j];
            }
            for i in 0..hidden {
                rs += sh * h[i] * u_r[i * hidden + j];
                us += sh * h[i] * u_u[i * hidden + j];
            }
            r[j] = sigmoid(rs);
            u[j] = sigmoid(us);
        }
        let mut new_h = vec![0.0; hidden];
        for j in 0..hidden {
            let mut cs = b_c[j];
            for i in 0..din {
                cs += sx * x[i] * w_c[i * hidden + j];
            }
            for i in 0..hidden {
                cs += sh * (r[i] * h[i]) * u_c[i * hidden + j];
            }
            let c = cs.tanh();
            new_h[j] = (1.0 - u[j]) * c + u[j] * h[j];
        }
        h = new_h;
        oracle.push(h.clone());
    }

    let tape = Tape::new();
    let steps: Vec<Tensor> = seq.iter().map(|x| tape.constant(&[1, din], x.clone())).collect();
    let hiddens = gru.forward(&tape, &store, &steps, false).unwrap();
    for (got, want) in hiddens.iter().zip(&oracle) {
        for (a, b) in got.values().iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn compose_multiply_hand_case() {
    let tape = Tape::new();
    let f = tape.constant(&[2], vec![1.0, 2.0]);
    let phi = tape.constant(&[2], vec![0.5, 0.5]);
    let out = compose_hidden(&f, &phi, ComposeMode::Multiply).unwrap();
    assert_eq!(out.shape(), vec![4]);
    assert_eq!(out.values(), vec![0.5, 0.5, 1.0, 1.0]);
}

#[test]
fn compose_multiply_is_an_isometry_for_unit_phi() {
    let tape = Tape::new();
    let m2 = 6;
    let phi_vals: Vec<f64> = vec![1.0 / (m2 as f64).sqrt(); m2];
    let phi = tape.constant(&[m2], phi_vals);
    let u = tape.constant(&[3], vec![1.0, -2.0, 0.5]);
    let v = tape.constant(&[3], vec![0.3, 0.9, -1.2]);
    let cu = compose_hidden(&u, &phi, ComposeMode::Multiply).unwrap();
    let cv = compose_hidden(&v, &phi, ComposeMode::Multiply).unwrap();
    let dot = |a: &Tensor, b: &Tensor| -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
    };
    let want = 1.0 * 0.3 + (-2.0) * 0.9 + 0.5 * (-1.2);
    assert!((dot(&cu, &cv) - want).abs() < 1e-12);
}

#[test]
fn compose_multiply_factorizes_inner_products() {
    // <u (x) phi, v (x) phi'> = <u, v> <phi, phi'> to machine precision.
    let mut rng = rng_from_seed(9);
    let tape = Tape::new();
    let draw = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    };
    let u_vals = draw(&mut rng, 5);
    let v_vals = draw(&mut rng, 5);
    let p_vals = draw(&mut rng, 8);
    let q_vals = draw(&mut rng, 8);
    let u = tape.constant(&[5], u_vals.clone());
    let v = tape.constant(&[5], v_vals.clone());
    let p = tape.constant(&[8], p_vals.clone());
    let q = tape.constant(&[8], q_vals.clone());
    let cu = compose_hidden(&u, &p, ComposeMode::Multiply).unwrap();
    let cv = compose_hidden(&v, &q, ComposeMode::Multiply).unwrap();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let got = dot(&cu.values(), &cv.values());
    let want = dot(&u_vals, &v_vals) * dot(&p_vals, &q_vals);
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}

#[test]
fn compose_add_requires_matching_width() {
    let tape = Tape::new();
    let f = tape.constant(&[1, 4], vec![1.0; 4]);
    let phi = tape.constant(&[1, 6], vec![0.5; 6]);
    assert!(compose_hidden(&f, &phi, ComposeMode::Add).is_err());
    let phi4 = tape.constant(&[1, 4], vec![0.5; 4]);
    let out = compose_hidden(&f, &phi4, ComposeMode::Add).unwrap();
    assert_eq!(out.values(), vec![1.5; 4]);
}

#[test]
fn trigo_features_at_zero_time() {
    let tape = Tape::new();
    let mut store = ParamStore::new();
    register_trigo(&mut store, 4, "trigo", &mut rng_from_seed(10));
    let tau = tape.constant(&[2, 1], vec![0.0, 0.0]);
    let out = trigo_features(&tape, &store, &tau, "trigo", false).unwrap();
    assert_eq!(out.shape(), vec![2, 8]);
    let v = out.values();
    assert!(v[..4].iter().all(|x| *x == 0.0)); // sin(0)
    assert!(v[4..8].iter().all(|x| *x == 1.0)); // cos(0)
}

fn toy_examples(n: usize, q: usize, seed: u64) -> Vec<Example> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| {
            let mut times: Vec<f64> = (0..q).map(|_| rng.gen_range(0.1..5.0)).collect();
            times.sort_by(|a, b| b.partial_cmp(a).unwrap()); // timespans descend
            Example {
                times,
                features: (0..q).map(|_| rng.sample(StandardNormal)).collect(),
                dim: 1,
                target_time: 0.0,
                target: rng.sample(StandardNormal),
            }
        })
        .collect()
}

fn temporal_gru_fixture(mode: ComposeMode, m: usize, hidden: usize) -> (TemporalGru, ParamStore) {
    let feature_map = FeatureMap::new(FeatureMode::Nonstationary, m, 2, 77);
    let sampler = SpectralSampler::Flow(FlowSpectral::new(4, 2, 6, "spectral/flow"));
    let head_in = match mode {
        ComposeMode::Multiply => hidden * 2 * m,
        ComposeMode::Add => hidden,
    };
    let head = Mlp::new(vec![head_in, 1], Activation::Tanh, "head")
        .with_first_layer_scale(1.0 / (hidden as f64).sqrt());
    let model = TemporalGru {
        gru: Gru::new(1, hidden, "gru"),
        head,
        mode,
        feature_map,
        sampler,
    };
    let mut store = ParamStore::new();
    model.register(&mut store, &mut rng_from_seed(78));
    (model, store)
}

#[test]
fn constant_phi_makes_predictions_time_invariant() {
    // A feature map with frozen eps = 0 under the identity Gaussian yields
    // phi = [1, 0] for every input: the time pathway is inert and multiply
    // composition must ignore timestamps entirely.
    let hidden = 3;
    let feature_map = FeatureMap::from_eps(FeatureMode::Stationary, 1, 2, vec![0.0, 0.0]).unwrap();
    let sampler = SpectralSampler::Gaussian(GaussianSpectral::new(2, "spectral"));
    let head = Mlp::new(vec![hidden * 2, 1], Activation::Tanh, "head");
    let model = TemporalGru {
        gru: Gru::new(1, hidden, "gru"),
        head,
        mode: ComposeMode::Multiply,
        feature_map,
        sampler,
    };
    let mut store = ParamStore::new();
    model.register(&mut store, &mut rng_from_seed(21));

    let base = toy_examples(4, 5, 22);
    let mut shifted = base.clone();
    for ex in shifted.iter_mut() {
        for t in ex.times.iter_mut() {
            *t *= 3.7; // arbitrary timestamp change
        }
    }
    let b1 = Batch::from_examples(&base.iter().collect::<Vec<_>>()).unwrap();
    let b2 = Batch::from_examples(&shifted.iter().collect::<Vec<_>>()).unwrap();
    let tape = Tape::new();
    let p1 = model.predict(&tape, &store, &b1, false).unwrap();
    let p2 = model.predict(&tape, &store, &b2, false).unwrap();
    for (a, b) in p1.values().iter().zip(&p2.values()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn model_gradients_match_finite_differences() {
    // Smooth activations only, so central differences are clean.
    for mode in [ComposeMode::Multiply, ComposeMode::Add] {
        let hidden = 4;
        let m = match mode {
            ComposeMode::Multiply => 2,
            ComposeMode::Add => 2, // 2m = 4 = hidden
        };
        let (model, mut store) = temporal_gru_fixture(mode, m, hidden);
        let examples = toy_examples(3, 4, 30);
        let batch = Batch::from_examples(&examples.iter().collect::<Vec<_>>()).unwrap();

        let loss_of = |store: &ParamStore| -> f64 {
            let tape = Tape::new();
            let pred = model.predict(&tape, store, &batch, false).unwrap();
            let y = batch.targets_tensor(&tape);
            pred.sub(&y).unwrap().mul(&pred.sub(&y).unwrap()).unwrap().mean().scalar_value()
        };

        let tape = Tape::new();
        let pred = model.predict(&tape, &store, &batch, true).unwrap();
        let y = batch.targets_tensor(&tape);
        let diff = pred.sub(&y).unwrap();
        let loss = diff.mul(&diff).unwrap().mean();
        tape.backward(&loss).unwrap();
        store.zero_grads();
        tape.accumulate_grads(&mut store).unwrap();

        let names: Vec<String> = store.names().cloned().collect();
        let mut checked = 0usize;
        for name in names.iter().step_by(4) {
            let len = store.get(name).unwrap().values.len();
            let idx = len / 2;
            let analytic = store.get(name).unwrap().grad[idx];
            let orig = store.get(name).unwrap().values[idx];
            let h = 1e-5;
            store.values_mut(name).unwrap()[idx] = orig + h;
            let up = loss_of(&store);
            store.values_mut(name).unwrap()[idx] = orig - h;
            let dn = loss_of(&store);
            store.values_mut(name).unwrap()[idx] = orig;
            let fd = (up - dn) / (2.0 * h);
            let err = (analytic - fd).abs() / fd.abs().max(1e-6);
            assert!(err < 1e-4, "{name}[{idx}] ({mode:?}): analytic {analytic}, fd {fd}");
            checked += 1;
        }
        assert!(checked >= 5);
    }
}

#[test]
fn baseline_models_run_and_differ_by_time_features() {
    let hidden = 4;
    let q = 5;
    for time in [TimeFeatures::Concat, TimeFeatures::Trigo { k: 3 }] {
        let model = BaselineGru {
            gru: Gru::new(1 + time.extra_dims(), hidden, "gru"),
            head: Mlp::new(vec![hidden, 6, 1], Activation::Relu, "head"),
            time,
            trigo_prefix: "trigo".into(),
        };
        let mut store = ParamStore::new();
        model.register(&mut store, &mut rng_from_seed(40));
        let examples = toy_examples(3, q, 41);
        let batch = Batch::from_examples(&examples.iter().collect::<Vec<_>>()).unwrap();
        let tape = Tape::new();
        let pred = model.predict(&tape, &store, &batch, false).unwrap();
        assert_eq!(pred.shape(), vec![3, 1]);

        // changing the timestamps changes baseline predictions
        let mut shifted = examples.clone();
        for ex in shifted.iter_mut() {
            for t in ex.times.iter_mut() {
                *t += 1.0;
            }
        }
        let b2 = Batch::from_examples(&shifted.iter().collect::<Vec<_>>()).unwrap();
        let p2 = model.predict(&tape, &store, &b2, false).unwrap();
        let moved = pred
            .values()
            .iter()
            .zip(&p2.values())
            .any(|(a, b)| (a - b).abs() > 1e-9);
        assert!(moved, "time features had no effect for {time:?}");
    }

    let ffn = BaselineFfn {
        net: Mlp::new(vec![q + q, 8, 1], Activation::Relu, "net"),
        time: TimeFeatures::Concat,
        trigo_prefix: "trigo".into(),
    };
    let mut store = ParamStore::new();
    ffn.register(&mut store, &mut rng_from_seed(42));
    let examples = toy_examples(2, q, 43);
    let batch = Batch::from_examples(&examples.iter().collect::<Vec<_>>()).unwrap();
    let tape = Tape::new();
    let pred = ffn.predict(&tape, &store, &batch, false).unwrap();
    assert_eq!(pred.shape(), vec![2, 1]);
}

#[test]
fn temporal_ffn_runs_and_uses_time() {
    let q = 4;
    let m = 3;
    let base = Mlp::new(vec![q, 6, 4], Activation::Relu, "base");
    let head = Mlp::new(vec![4 * 2 * m, 1], Activation::Relu, "head")
        .head()
        .with_first_layer_scale(0.5);
    let feature_map = FeatureMap::new(FeatureMode::Nonstationary, m, q + 1, 50);
    let sampler = SpectralSampler::Gaussian(GaussianSpectral::new(q + 1, "spectral"));
    let model = TemporalFfn {
        base,
        head,
        mode: ComposeMode::Multiply,
        feature_map,
        sampler,
    };
    let mut store = ParamStore::new();
    model.register(&mut store, &mut rng_from_seed(51));
    let examples = toy_examples(3, q, 52);
    let batch = Batch::from_examples(&examples.iter().collect::<Vec<_>>()).unwrap();
    let tape = Tape::new();
    let pred = model.predict(&tape, &store, &batch, false).unwrap();
    assert_eq!(pred.shape(), vec![3, 1]);

    let mut shifted = examples.clone();
    for ex in shifted.iter_mut() {
        for t in ex.times.iter_mut() {
            *t += 2.0;
        }
    }
    let b2 = Batch::from_examples(&shifted.iter().collect::<Vec<_>>()).unwrap();
    let p2 = model.predict(&tape, &store, &b2, false).unwrap();
    let moved = pred.values().iter().zip(&p2.values()).any(|(a, b)| (a - b).abs() > 1e-9);
    assert!(moved);
}
