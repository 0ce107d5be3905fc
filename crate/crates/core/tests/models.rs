use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use epiforecast::models::lstm::SequenceLayout;
use epiforecast::models::mlp::MlpShape;
use epiforecast::models::train::{stopping_rule_holds, train, Differentiable};
use epiforecast::models::{fit, predict, Architecture, ForecasterConfig, TrainingConfig};
use epiforecast::numerics::{grad_check, GRAD_CHECK_STEP};
use epiforecast::samples::FeatureSpec;
use epiforecast::{Lstm, Mlp};

fn plain_layout(n: usize) -> SequenceLayout {
    SequenceLayout::from_descriptors(0, &FeatureSpec::anonymous(n).descriptors)
}

/// A longer, faster schedule than the sweep default, for fits that must
/// converge tightly.
fn long_training() -> TrainingConfig {
    TrainingConfig {
        batch_size: 20,
        max_epochs: 3000,
        patience: 300,
        adam: epiforecast::numerics::AdamConfig {
            learning_rate: 0.01,
            ..Default::default()
        },
        ..TrainingConfig::default()
    }
}

fn window_layout(window: usize, n_static: usize) -> SequenceLayout {
    let statics: Vec<String> = (0..n_static).map(|i| format!("s{i}")).collect();
    SequenceLayout::from_descriptors(window, &FeatureSpec::new(window, &statics).descriptors)
}

#[test]
fn mlp_gradients_on_ten_draws() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let shape = MlpShape {
            inputs: rng.random_range(1..6),
            hidden1: rng.random_range(1..6),
            hidden2: rng.random_range(1..6),
        };
        let m = Mlp::init(shape, &mut rng);
        let rows = rng.random_range(1..9);
        let x = Array2::from_shape_fn((rows, shape.inputs), |_| rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(rows, |_| rng.random_range(-2.0..2.0));
        let mut g = vec![0.0; m.params.len()];
        m.loss_and_grad(x.view(), y.view(), &mut g);
        let err = grad_check(
            |p: &[f64]| Mlp { params: p.to_vec(), shape }.loss(x.view(), y.view()),
            &g,
            &m.params,
            GRAD_CHECK_STEP,
        );
        assert!(err <= 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn lstm_gradients_on_ten_draws() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let layout = window_layout(rng.random_range(1..5), rng.random_range(0..3));
        let m = Lstm::init(layout.clone(), rng.random_range(1..5), rng.random_range(1..4), rng.random_range(1..4), &mut rng);
        let rows = rng.random_range(1..6);
        let x = Array2::from_shape_fn((rows, layout.n_inputs()), |_| rng.random_range(-1.5..1.5));
        let y = Array1::from_shape_fn(rows, |_| rng.random_range(-1.0..1.0));
        let mut g = vec![0.0; m.params.len()];
        m.loss_and_grad(x.view(), y.view(), &mut g);
        let err = grad_check(
            |p: &[f64]| {
                let probe = Lstm { params: p.to_vec(), ..m.clone() };
                probe.loss(x.view(), y.view())
            },
            &g,
            &m.params,
            GRAD_CHECK_STEP,
        );
        assert!(err <= 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn mlp_learns_a_parabola() {
    let x = Array2::from_shape_fn((200, 1), |(i, _)| -1.0 + 2.0 * i as f64 / 199.0);
    let y = x.column(0).mapv(|v| v * v);
    let config = ForecasterConfig::new(Architecture::Mlp { hidden1: 4, hidden2: 4 }, long_training());
    let out = fit(&config, x.view(), y.view(), &plain_layout(1)).unwrap();
    let pred = predict(&out.model, x.view()).unwrap();
    let mse = (&pred - &y).mapv(|d| d * d).mean().unwrap();
    assert!(mse < 1e-3, "mse {mse} after {} epochs", out.loss_curve.len());
}

#[test]
fn lstm_fits_a_constant() {
    let layout = window_layout(3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = Array2::from_shape_fn((40, layout.n_inputs()), |_| rng.random_range(-1.0..1.0));
    let y = Array1::from_elem(40, 0.7);
    let config = ForecasterConfig::new(Architecture::Lstm { hidden: 4, dense1: 4, dense2: 4 }, long_training());
    let out = fit(&config, x.view(), y.view(), &layout).unwrap();
    let pred = predict(&out.model, x.view()).unwrap();
    let mse = (&pred - &y).mapv(|d| d * d).mean().unwrap();
    assert!(mse < 1e-6, "mse {mse}");
}

#[test]
fn training_is_deterministic_and_predictions_bitwise_stable() {
    let layout = window_layout(2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Array2<f64> = Array2::from_shape_fn((30, layout.n_inputs()), |_| rng.random_range(-1.0..1.0));
    let y = x.sum_axis(Axis(1));
    for arch in [Architecture::Mlp { hidden1: 8, hidden2: 4 }, Architecture::Lstm { hidden: 4, dense1: 4, dense2: 4 }] {
        let training = TrainingConfig {
            max_epochs: 50,
            ..TrainingConfig::default()
        };
        let config = ForecasterConfig::new(arch, training);
        let a = fit(&config, x.view(), y.view(), &layout).unwrap();
        let b = fit(&config, x.view(), y.view(), &layout).unwrap();
        assert_eq!(a.model.params(), b.model.params());
        assert_eq!(a.loss_curve, b.loss_curve);
        let p1 = predict(&a.model, x.view()).unwrap();
        let p2 = predict(&a.model, x.view()).unwrap();
        assert_eq!(p1, p2);

        let perm: Vec<usize> = (0..30).rev().collect();
        let px = predict(&a.model, x.select(Axis(0), &perm).view()).unwrap();
        for (i, &r) in perm.iter().enumerate() {
            assert_eq!(px[i].to_bits(), p1[r].to_bits());
        }
    }
}

#[test]
fn early_stopping_follows_the_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x = Array2::from_shape_fn((60, 3), |_| rng.random_range(-1.0..1.0));
    let y = Array1::from_shape_fn(60, |_| rng.random_range(-1.0..1.0));
    for (patience, batch) in [(3, 7), (10, 200), (30, 16)] {
        let cfg = TrainingConfig {
            patience,
            batch_size: batch,
            max_epochs: 400,
            adam: epiforecast::numerics::AdamConfig {
                learning_rate: 0.05,
                ..Default::default()
            },
            ..TrainingConfig::default()
        };
        let mut m = Mlp::init(MlpShape { inputs: 3, hidden1: 6, hidden2: 6 }, &mut rng);
        let report = train(&mut m, x.view(), y.view(), &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(stopping_rule_holds(&report.loss_curve, &cfg));
        assert_eq!(report.stopped_early, report.loss_curve.len() < cfg.max_epochs);
    }
}

#[test]
fn linear_fit_is_affine_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Array2<f64> = Array2::from_shape_fn((25, 4), |_| rng.random_range(-3.0..3.0));
    let y = x.column(0).mapv(|v| 2.0 * v) - x.column(2).mapv(|v| 0.5 * v) + 7.0;
    let config = ForecasterConfig::new(Architecture::Linear, TrainingConfig::default());
    let out = fit(&config, x.view(), y.view(), &plain_layout(4)).unwrap();
    let pred = predict(&out.model, x.view()).unwrap();
    for (p, t) in pred.iter().zip(&y) {
        assert!((p - t).abs() < 1e-10);
    }
}

#[test]
fn single_precision_models_train() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = Array2::from_shape_fn((50, 2), |_| rng.random_range(-1.0_f32..1.0));
    let y = x.column(0).mapv(|v| 0.5 * v);
    let config = ForecasterConfig::new(Architecture::Mlp { hidden1: 4, hidden2: 4 }, TrainingConfig::default());
    let out = fit::<f32>(&config, x.view(), y.view(), &plain_layout(2)).unwrap();
    assert!(out.loss_curve.last().unwrap() < &1e-2);
}
