//! Exploration probe for the directional experiment; run with --ignored.

use tknet_core::config::Config;
use tknet_core::data::CaseSpec;
use tknet_core::pipeline::{new_model_for_run, prepare_dataset};
use tknet_core::train::{evaluate, train_loop};

fn run_one(cfg: &Config, kind: &str, seed: u64) -> (f64, usize) {
    let mut cfg = cfg.clone();
    cfg.model.kind = kind.into();
    let data = prepare_dataset(&cfg, seed).unwrap();
    let (model, mut store) = new_model_for_run(&cfg, data.q, data.dim, seed).unwrap();
    let tc = cfg.train.to_train_config(seed);
    let out = train_loop(&model, &mut store, &data.train, &data.val, &tc).unwrap();
    let mae = evaluate(&model, &store, &data.test, &data.stats, tc.batch_size).unwrap();
    (mae / data.stats.target_std, out.history.len())
}

fn trial(label: &str, cfg: &Config, seeds: std::ops::Range<u64>) {
    println!("--- {label}");
    let mut wins = 0;
    let n = seeds.end - seeds.start;
    for seed in seeds {
        let start = std::time::Instant::now();
        let (t_rnn, e1) = run_one(cfg, "t-rnn", seed);
        let (rnn_time, e2) = run_one(cfg, "rnn-time", seed);
        let (rnn_trigo, e3) = run_one(cfg, "rnn-trigo", seed);
        let win = t_rnn < rnn_time && t_rnn < rnn_trigo;
        wins += win as u32;
        println!(
            "seed {seed}: t-rnn {t_rnn:.4} ({e1}ep) time {rnn_time:.4} ({e2}ep) trigo {rnn_trigo:.4} ({e3}ep) win={win} [{:.1?}]",
            start.elapsed()
        );
    }
    println!("{label}: wins {wins}/{n}");
}

fn base_config() -> Config {
    let mut cfg = Config::default();
    cfg.train.lr = 3e-3;
    cfg.train.max_epochs = 60;
    cfg.train.patience = 8;
    cfg.train.batch_size = 64;
    cfg
}

#[test]
#[ignore]
fn probe_gaussian_vs_flow() {
    // Case 3, denser history, Gaussian sampler, bigger lr
    let mut cfg = base_config();
    cfg.data.case = CaseSpec::IrregularRandom {
        window: 96,
        q: 32,
        min_horizon: 2,
        max_horizon: 26,
        stride: 6,
    };
    cfg.spectral.family = "gaussian".into();
    trial("case3 gaussian q32 lr3e-3", &cfg, 0..3);

    cfg.train.lr = 1e-2;
    trial("case3 gaussian q32 lr1e-2", &cfg, 0..3);

    cfg.spectral.family = "flow".into();
    trial("case3 flow q32 lr1e-2", &cfg, 0..3);
}

#[test]
#[ignore]
fn probe_state_features() {
    let mut cfg = base_config();
    cfg.spectral.family = "gaussian".into();
    cfg.data.observe_velocity = true;
    cfg.data.sim_time = 2000.0;
    cfg.data.case = CaseSpec::IrregularRandom {
        window: 32,
        q: 16,
        min_horizon: 2,
        max_horizon: 32,
        stride: 10,
    };
    trial("case3 state q16 w32", &cfg, 0..3);

    cfg.data.case = CaseSpec::IrregularFixed {
        window: 32,
        q: 16,
        horizon: 8,
        stride: 10,
    };
    trial("case2 state q16 w32", &cfg, 0..3);
}

#[test]
#[ignore]
fn probe_time_only() {
    let mut cfg = base_config();
    cfg.spectral.family = "gaussian".into();
    cfg.spectral.time_only = true;
    cfg.data.observe_velocity = true;
    cfg.data.sim_time = 2000.0;
    cfg.data.case = CaseSpec::IrregularRandom {
        window: 32,
        q: 16,
        min_horizon: 2,
        max_horizon: 32,
        stride: 10,
    };
    trial("case3 time-only m16", &cfg, 0..3);

    cfg.spectral.m = 32;
    trial("case3 time-only m32", &cfg, 0..3);

    cfg.spectral.m = 16;
    cfg.data.case = CaseSpec::IrregularFixed {
        window: 32,
        q: 16,
        horizon: 8,
        stride: 10,
    };
    trial("case2 time-only m16", &cfg, 0..3);
}

#[test]
#[ignore]
fn probe_add_recurrent() {
    use tknet_core::models::ComposeMode;
    let mut cfg = base_config();
    cfg.spectral.family = "gaussian".into();
    cfg.spectral.time_only = true;
    cfg.model.compose_mode = ComposeMode::Add;
    cfg.model.head_hidden = vec![30];
    cfg.data.observe_velocity = true;
    cfg.data.sim_time = 2000.0;
    cfg.data.case = CaseSpec::IrregularRandom {
        window: 32,
        q: 16,
        min_horizon: 2,
        max_horizon: 32,
        stride: 10,
    };
    trial("case3 add time-only", &cfg, 0..3);

    cfg.data.case = CaseSpec::IrregularFixed {
        window: 32,
        q: 16,
        horizon: 8,
        stride: 10,
    };
    trial("case2 add time-only", &cfg, 0..3);

    cfg.spectral.time_only = false;
    cfg.data.case = CaseSpec::IrregularRandom {
        window: 32,
        q: 16,
        min_horizon: 2,
        max_horizon: 32,
        stride: 10,
    };
    trial("case3 add joint-z", &cfg, 0..3);
}

fn fast_oscillator(cfg: &mut Config) {
    cfg.data.ctar2.a0 = 0.1;
    cfg.data.ctar2.a1 = 17.5; // peak near omega = 4.2, period ~1.5 units
    cfg.data.fine_dt = 0.002;
    cfg.data.subsample_every = 125; // grid dt 0.25
    cfg.data.sim_time = 2000.0;
    cfg.data.observe_velocity = true;
}

#[test]
#[ignore]
fn probe_fast_oscillator() {
    use tknet_core::models::ComposeMode;
    let mut cfg = base_config();
    cfg.spectral.family = "gaussian".into();
    cfg.spectral.time_only = true;
    fast_oscillator(&mut cfg);
    cfg.data.case = CaseSpec::IrregularRandom {
        window: 32,
        q: 16,
        min_horizon: 2,
        max_horizon: 32,
        stride: 10,
    };
    trial("fast case3 multiply time-only", &cfg, 0..3);

    cfg.model.compose_mode = ComposeMode::Add;
    cfg.model.head_hidden = vec![30];
    trial("fast case3 add time-only", &cfg, 0..3);

    cfg.model.compose_mode = ComposeMode::Multiply;
    cfg.model.head_hidden = vec![];
    cfg.data.case = CaseSpec::IrregularFixed {
        window: 32,
        q: 16,
        horizon: 8,
        stride: 10,
    };
    trial("fast case2 multiply time-only", &cfg, 0..3);
}

#[test]
#[ignore]
fn probe_saturation() {
    let mut cfg = base_config();
    cfg.spectral.family = "gaussian".into();
    cfg.spectral.time_only = true;
    fast_oscillator(&mut cfg);
    cfg.train.max_epochs = 150;
    cfg.train.patience = 15;
    cfg.data.eval_stride = Some(3);
    cfg.data.case = CaseSpec::IrregularFixed {
        window: 32,
        q: 16,
        horizon: 8,
        stride: 10,
    };
    trial("sat case2 lr3e-3", &cfg, 0..2);

    cfg.data.case = CaseSpec::IrregularRandom {
        window: 32,
        q: 16,
        min_horizon: 2,
        max_horizon: 32,
        stride: 10,
    };
    trial("sat case3 lr3e-3", &cfg, 0..2);
}

fn medium_oscillator(cfg: &mut Config) {
    cfg.data.ctar2.a0 = 0.15;
    cfg.data.ctar2.a1 = 2.47; // period ~4 units
    cfg.data.fine_dt = 0.01;
    cfg.data.subsample_every = 25;
    cfg.data.sim_time = 2000.0;
    cfg.data.observe_velocity = true;
}

#[test]
#[ignore]
fn probe_medium() {
    let mut cfg = base_config();
    cfg.spectral.family = "gaussian".into();
    cfg.spectral.time_only = true;
    cfg.spectral.m = 24;
    medium_oscillator(&mut cfg);
    cfg.train.max_epochs = 100;
    cfg.train.patience = 10;
    cfg.data.eval_stride = Some(2);
    cfg.data.case = CaseSpec::IrregularRandom {
        window: 32,
        q: 16,
        min_horizon: 2,
        max_horizon: 24,
        stride: 10,
    };
    trial("med case3", &cfg, 0..3);

    cfg.data.case = CaseSpec::IrregularFixed {
        window: 32,
        q: 16,
        horizon: 8,
        stride: 10,
    };
    trial("med case2", &cfg, 0..3);
}
