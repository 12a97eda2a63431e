use llc_lab::nn::{
    evaluate_loss, init_model, loss_and_gradients, relu_stack, train, Activation, Dataset, Head,
    LayerSpec, LossKind, MlpModel, TrainConfig,
};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

/// Small random network mixing ReLU and identity hidden layers.
fn small_model(rng: &mut ChaCha8Rng, head: Head, out: usize) -> MlpModel {
    let depth = rng.random_range(1..=3);
    let mut dims = vec![rng.random_range(1..=5)];
    for _ in 1..depth {
        dims.push(rng.random_range(1..=5));
    }
    dims.push(out);
    let specs: Vec<LayerSpec> = dims
        .windows(2)
        .enumerate()
        .map(|(i, d)| {
            let act = if i + 2 == dims.len() || rng.random_bool(0.3) {
                Activation::Identity
            } else {
                Activation::Relu
            };
            LayerSpec::new(d[0], d[1], act)
        })
        .collect();
    let model = init_model(&specs, head, rng.random()).unwrap();
    let biases = model
        .biases()
        .iter()
        .map(|b| Array1::from_shape_simple_fn(b.len(), || rng.random_range(-0.5..0.5)))
        .collect();
    MlpModel::from_parts(specs, model.weights().to_vec(), biases, head).unwrap()
}

fn perturbed(model: &MlpModel, layer: usize, index: usize, is_bias: bool, delta: f64) -> MlpModel {
    let mut w = model.weights().to_vec();
    let mut b = model.biases().to_vec();
    if is_bias {
        b[layer][index] += delta;
    } else {
        let cols = w[layer].ncols();
        w[layer][[index / cols, index % cols]] += delta;
    }
    MlpModel::from_parts(model.layers().to_vec(), w, b, model.head()).unwrap()
}

fn check_gradients(model: &MlpModel, data: &Dataset, loss: LossKind) -> f64 {
    let h = 1e-5;
    let (_, grads) = loss_and_gradients(model, data, loss).unwrap();
    let mut worst: f64 = 0.0;
    for layer in 0..model.layers().len() {
        let analytic = grads.weights[layer].iter().map(|&g| (g, false));
        let analytic = analytic.chain(grads.biases[layer].iter().map(|&g| (g, true)));
        let n_w = grads.weights[layer].len();
        for (k, (a, is_bias)) in analytic.enumerate() {
            let idx = if is_bias { k - n_w } else { k };
            let up = evaluate_loss(&perturbed(model, layer, idx, is_bias, h), data, loss).unwrap();
            let down = evaluate_loss(&perturbed(model, layer, idx, is_bias, -h), data, loss).unwrap();
            let numeric = (up - down) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..40 {
        let n = rng.random_range(1..=6);
        let out = rng.random_range(1..=4);

        let model = small_model(&mut rng, Head::Regression, out);
        let x = random_matrix(n, model.input_dim(), &mut rng);
        let data = Dataset::regression(x, random_matrix(n, out, &mut rng)).unwrap();
        let worst = check_gradients(&model, &data, LossKind::Mse);
        assert!(worst < 1e-4, "mse trial {trial}: {worst}");

        let classes = out + 1;
        let model = small_model(&mut rng, Head::Classification { classes }, classes);
        let x = random_matrix(n, model.input_dim(), &mut rng);
        let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let data = Dataset::classification(x, labels).unwrap();
        let worst = check_gradients(&model, &data, LossKind::CrossEntropy);
        assert!(worst < 1e-4, "cross-entropy trial {trial}: {worst}");
    }
}

#[test]
fn twin_architecture_memorizes_small_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = Array2::from_shape_simple_fn((32, 7), || rng.random_range(0.0..1.0));
    let y = Array2::from_shape_simple_fn((32, 1), || rng.random_range(0.2..3.0));
    let data = Dataset::regression(x, y).unwrap();
    let model = init_model(&relu_stack(&[7, 256, 128, 64, 1], 0.0), Head::Regression, 1).unwrap();
    let config = TrainConfig {
        max_iterations: 2000,
        patience: 2000,
        ..TrainConfig::default()
    };
    let outcome = train(model, &data, &data, &config).unwrap();
    let mse = evaluate_loss(&outcome.model, &data, LossKind::Mse).unwrap();
    assert!(mse < 1e-3, "train mse {mse}");
}

fn noisy_regression(seed: u64, n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Array2<f64> = Array2::from_shape_simple_fn((n, 3), || rng.random_range(-1.0..1.0));
    let y = Array2::from_shape_fn((n, 1), |(i, _)| {
        x[[i, 0]] * 2.0 - x[[i, 1]] + 0.3 * x[[i, 2]].powi(2) + rng.random_range(-0.3..0.3)
    });
    Dataset::regression(x, y).unwrap()
}

#[test]
fn early_stopping_returns_best_snapshot() {
    let (tr, va) = (noisy_regression(1, 48), noisy_regression(2, 24));
    let model = init_model(&relu_stack(&[3, 64, 64, 1], 0.0), Head::Regression, 5).unwrap();
    let config = TrainConfig {
        learning_rate: 1e-2,
        batch_size: 8,
        max_iterations: 400,
        patience: 10,
        ..TrainConfig::default()
    };
    let out = train(model, &tr, &va, &config).unwrap();
    let min = out.history.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
    let argmin = out.history.iter().find(|r| r.val_loss == min).unwrap().iteration;
    assert_eq!(evaluate_loss(&out.model, &va, LossKind::Mse).unwrap(), min);
    assert_eq!(out.best_iteration, argmin);
    assert!(out.stopped_at - argmin <= config.patience);
    assert_eq!(out.history.len(), out.stopped_at);
    if out.early_stopped {
        assert_eq!(out.stopped_at - argmin, config.patience);
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let (tr, va) = (noisy_regression(1, 64), noisy_regression(2, 16));
    let specs = relu_stack(&[3, 16, 16, 1], 0.2);
    let config = TrainConfig {
        max_iterations: 30,
        seed: 9,
        ..TrainConfig::default()
    };
    let run = || {
        let model = init_model(&specs, Head::Regression, 4).unwrap();
        train(model, &tr, &va, &config).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.history, b.history);
    assert_eq!(a.model, b.model);
    let other = train(
        init_model(&specs, Head::Regression, 4).unwrap(),
        &tr,
        &va,
        &TrainConfig { seed: 10, ..config },
    )
    .unwrap();
    assert_ne!(a.history, other.history);
}
