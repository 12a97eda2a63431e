//! The neural network engine on a toy problem: fit a two-input function,
//! then save the model as JSON and load it back.
//!
//! ```text
//! cargo run -p llc-lab --example mlp_basics
//! ```

use llc_lab::nn::{evaluate_loss, forward, init_model, relu_stack, train, Dataset, Head, LossKind, MlpModel, TrainConfig};
use ndarray::Array2;

fn main() -> llc_lab::Result<()> {
    let grid: Vec<(f64, f64)> = (0..400).map(|i| (f64::from(i % 20) / 19.0, f64::from(i / 20) / 19.0)).collect();
    let target = |a: f64, b: f64| (3.0 * a).sin() * b + 0.5 * a * a;
    let x = Array2::from_shape_fn((grid.len(), 2), |(i, j)| if j == 0 { grid[i].0 } else { grid[i].1 });
    let y = Array2::from_shape_fn((grid.len(), 1), |(i, _)| target(grid[i].0, grid[i].1));
    let all = Dataset::regression(x, y)?;
    let train_rows: Vec<usize> = (0..grid.len()).filter(|i| i % 5 != 0).collect();
    let val_rows: Vec<usize> = (0..grid.len()).filter(|i| i % 5 == 0).collect();

    let model = init_model(&relu_stack(&[2, 32, 32, 1], 0.0), Head::Regression, 1)?;
    let config = TrainConfig { max_iterations: 500, patience: 25, ..TrainConfig::default() };
    let out = train(model, &all.select(&train_rows), &all.select(&val_rows), &config)?;
    println!(
        "stopped at iteration {} (best {}), val mse {:.2e}",
        out.stopped_at,
        out.best_iteration,
        evaluate_loss(&out.model, &all.select(&val_rows), LossKind::Mse)?
    );
    for it in out.history.iter().step_by(out.history.len().div_ceil(8)) {
        println!("  iter {:>3}: train {:.2e}  val {:.2e}", it.iteration, it.train_loss, it.val_loss);
    }

    let json = serde_json::to_string(&out.model).expect("model serializes");
    let back: MlpModel = serde_json::from_str(&json).expect("model parses");
    let probe = [0.3, 0.8];
    println!(
        "f(0.3, 0.8) = {:.4}, model {:.4}, reloaded {:.4} ({} bytes of JSON)",
        target(0.3, 0.8),
        forward(&out.model, &probe, false, None)?[0],
        forward(&back, &probe, false, None)?[0],
        json.len()
    );
    Ok(())
}
