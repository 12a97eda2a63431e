use ndarray::{Array1, Array2, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grad::{evaluate_loss, loss_and_gradients_with, Dataset, Gradients, LossKind};
use super::model::MlpModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub patience: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            max_iterations: 300,
            patience: 10,
            seed: 0,
            loss: LossKind::Mse,
        }
    }
}

impl TrainConfig {
    pub fn problems(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            out.push(format!("{prefix}.learning_rate must be > 0"));
        }
        if self.batch_size < 1 {
            out.push(format!("{prefix}.batch_size must be >= 1"));
        }
        if self.max_iterations < 1 {
            out.push(format!("{prefix}.max_iterations must be >= 1"));
        }
        if self.patience < 1 {
            out.push(format!("{prefix}.patience must be >= 1"));
        }
        out
    }
}

/// Losses after one training iteration (one epoch).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub iteration: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the iteration with the lowest validation loss.
    pub model: MlpModel,
    pub history: Vec<EpochRecord>,
    pub stopped_at: usize,
    pub best_iteration: usize,
    /// True when the patience criterion ended training.
    pub early_stopped: bool,
}

/// Patience-based early stopping on a loss that should decrease.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_iteration: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_iteration: 0,
            stale: 0,
        }
    }

    /// Record the loss of `iteration`; returns true if it is a new best.
    pub fn observe(&mut self, iteration: usize, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.best_iteration = iteration;
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_iteration(&self) -> usize {
        self.best_iteration
    }
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl Adam {
    fn new(model: &MlpModel, lr: f64) -> Self {
        let zw = || model.weights.iter().map(|w| Array2::zeros(w.dim())).collect();
        let zb = || model.biases.iter().map(|b| Array1::zeros(b.len())).collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m_w: zw(),
            v_w: zw(),
            m_b: zb(),
            v_b: zb(),
        }
    }

    fn apply(&mut self, model: &mut MlpModel, grads: &Gradients) {
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = self.lr;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: &f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for l in 0..model.weights.len() {
            Zip::from(&mut model.weights[l])
                .and(&mut self.m_w[l])
                .and(&mut self.v_w[l])
                .and(&grads.weights[l])
                .for_each(update);
            Zip::from(&mut model.biases[l])
                .and(&mut self.m_b[l])
                .and(&mut self.v_b[l])
                .and(&grads.biases[l])
                .for_each(update);
        }
    }
}

/// Mini-batch Adam with early stopping on the validation loss.
///
/// Each iteration is one shuffled pass over `train`. Validation loss is
/// computed without dropout. Training ends after `patience` iterations
/// without a new best validation loss, or at `max_iterations`; the best
/// snapshot is returned.
pub fn train(
    mut model: MlpModel,
    train: &Dataset,
    val: &Dataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let problems = config.problems("train");
    if !problems.is_empty() {
        return Err(Error::Validation(problems.join("; ")));
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::validation("training and validation sets must be non-empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(&model, config.learning_rate);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.clone();
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut early_stopped = false;

    for iteration in 1..=config.max_iterations {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = train.select(chunk);
            let (loss, grads) = loss_and_gradients_with(&model, &batch, config.loss, Some(&mut rng))
                .map_err(|e| diverged(e, iteration, &history))?;
            adam.apply(&mut model, &grads);
            weighted += loss * chunk.len() as f64;
        }
        let train_loss = weighted / train.len() as f64;
        let val_loss = if model.is_finite() {
            evaluate_loss(&model, val, config.loss).map_err(|e| diverged(e, iteration, &history))?
        } else {
            f64::NAN
        };
        history.push(EpochRecord {
            iteration,
            train_loss,
            val_loss,
        });
        if !val_loss.is_finite() {
            return Err(Error::Divergence { iteration, history });
        }
        if stopper.observe(iteration, val_loss) {
            best = model.clone();
        }
        if stopper.should_stop() {
            early_stopped = true;
            break;
        }
    }

    let stopped_at = history.len();
    Ok(TrainOutcome {
        model: best,
        history,
        stopped_at,
        best_iteration: stopper.best_iteration(),
        early_stopped,
    })
}

fn diverged(e: Error, iteration: usize, history: &[EpochRecord]) -> Error {
    match e {
        Error::Numeric { .. } => Error::Divergence {
            iteration,
            history: history.to_vec(),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_after_patience_when_loss_only_rises() {
        let mut es = EarlyStopping::new(10);
        let mut stopped = None;
        for it in 1..=100 {
            es.observe(it, it as f64);
            if es.should_stop() {
                stopped = Some(it);
                break;
            }
        }
        assert_eq!(stopped, Some(11));
        assert_eq!(es.best_iteration(), 1);
    }

    #[test]
    fn improvement_resets_patience() {
        let mut es = EarlyStopping::new(2);
        assert!(es.observe(1, 1.0));
        assert!(!es.observe(2, 1.0));
        assert!(es.observe(3, 0.5));
        assert!(!es.observe(4, 0.6));
        assert!(!es.should_stop());
        es.observe(5, 0.7);
        assert!(es.should_stop());
        assert_eq!(es.best(), 0.5);
    }
}
