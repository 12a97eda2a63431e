use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{Activation, Head, MlpModel, Trace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// One row of regression targets per sample.
    Values(Array2<f64>),
    Labels(Vec<usize>),
}

/// Inputs and targets, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub targets: Targets,
}

impl Dataset {
    pub fn regression(inputs: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::validation("input/target row count mismatch"));
        }
        Ok(Dataset {
            inputs,
            targets: Targets::Values(targets),
        })
    }

    pub fn classification(inputs: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if inputs.nrows() != labels.len() {
            return Err(Error::validation("input/label count mismatch"));
        }
        Ok(Dataset {
            inputs,
            targets: Targets::Labels(labels),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select(Axis(0), rows),
            targets: match &self.targets {
                Targets::Values(v) => Targets::Values(v.select(Axis(0), rows)),
                Targets::Labels(l) => Targets::Labels(rows.iter().map(|&r| l[r]).collect()),
            },
        }
    }
}

/// Per-parameter gradients, shaped like the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

fn log_sum_exp(row: ArrayView1<'_, f64>) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

fn check_targets(model: &MlpModel, data: &Dataset, loss: LossKind) -> Result<()> {
    if data.is_empty() {
        return Err(Error::validation("empty batch"));
    }
    match (loss, &data.targets) {
        (LossKind::Mse, Targets::Values(v)) => {
            if v.ncols() != model.output_dim() {
                return Err(Error::validation(format!(
                    "targets have {} columns, model outputs {}",
                    v.ncols(),
                    model.output_dim()
                )));
            }
        }
        (LossKind::CrossEntropy, Targets::Labels(labels)) => {
            let Head::Classification { classes } = model.head() else {
                return Err(Error::validation("cross-entropy needs a classification head"));
            };
            if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
                return Err(Error::validation(format!(
                    "label {bad} out of range for {classes} classes"
                )));
            }
        }
        _ => return Err(Error::validation("loss kind does not match target type")),
    }
    Ok(())
}

/// Batch-mean loss of raw model outputs and its gradient w.r.t. them.
pub(crate) fn output_loss(
    output: &Array2<f64>,
    targets: &Targets,
    loss: LossKind,
) -> (f64, Array2<f64>) {
    let n = output.nrows() as f64;
    match (loss, targets) {
        (LossKind::Mse, Targets::Values(t)) => {
            let diff = output - t;
            let count = diff.len() as f64;
            let value = diff.iter().map(|d| d * d).sum::<f64>() / count;
            (value, diff * (2.0 / count))
        }
        (LossKind::CrossEntropy, Targets::Labels(labels)) => {
            let mut grad = Array2::zeros(output.dim());
            let mut total = 0.0;
            for (i, (row, &label)) in output.outer_iter().zip(labels).enumerate() {
                let lse = log_sum_exp(row);
                total += lse - row[label];
                for (j, &z) in row.iter().enumerate() {
                    grad[[i, j]] = (z - lse).exp() / n;
                }
                grad[[i, label]] -= 1.0 / n;
            }
            (total / n, grad)
        }
        _ => unreachable!("checked by check_targets"),
    }
}

/// Batch loss without gradients and without dropout.
pub fn evaluate_loss(model: &MlpModel, data: &Dataset, loss: LossKind) -> Result<f64> {
    check_targets(model, data, loss)?;
    let out = model.predict_batch(data.inputs.view())?;
    Ok(output_loss(&out, &data.targets, loss).0)
}

fn backward(model: &MlpModel, trace: &Trace, d_out: Array2<f64>) -> Gradients {
    let n = model.layers.len();
    let mut gw = Vec::with_capacity(n);
    let mut gb = Vec::with_capacity(n);
    let mut d_a = d_out;
    for l in (0..n).rev() {
        if let Some(mask) = &trace.masks[l] {
            d_a *= mask;
        }
        if model.layers[l].activation == Activation::Relu {
            ndarray::Zip::from(&mut d_a)
                .and(&trace.pre[l])
                .for_each(|g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
        }
        gw.push(d_a.t().dot(&trace.inputs[l]));
        gb.push(d_a.sum_axis(Axis(0)));
        if l > 0 {
            d_a = d_a.dot(&model.weights[l]);
        }
    }
    gw.reverse();
    gb.reverse();
    Gradients {
        weights: gw,
        biases: gb,
    }
}

pub(crate) fn loss_and_gradients_with<R: Rng>(
    model: &MlpModel,
    batch: &Dataset,
    loss: LossKind,
    dropout_rng: Option<&mut R>,
) -> Result<(f64, Gradients)> {
    check_targets(model, batch, loss)?;
    let trace = model.forward_trace(batch.inputs.view(), dropout_rng)?;
    let (value, d_out) = output_loss(&trace.output, &batch.targets, loss);
    Ok((value, backward(model, &trace, d_out)))
}

/// Batch-mean loss and reverse-mode gradients, dropout disabled.
pub fn loss_and_gradients(
    model: &MlpModel,
    batch: &Dataset,
    loss: LossKind,
) -> Result<(f64, Gradients)> {
    loss_and_gradients_with::<rand_chacha::ChaCha8Rng>(model, batch, loss, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{init_model, relu_stack};
    use ndarray::array;

    #[test]
    fn uniform_logits_give_ln_k() {
        let out = Array2::zeros((4, 330));
        let (l, _) = output_loss(&out, &Targets::Labels(vec![0, 5, 17, 329]), LossKind::CrossEntropy);
        assert!((l - 330f64.ln()).abs() < 1e-12);
        assert!((l - 5.799).abs() < 1e-3);
    }

    #[test]
    fn perfect_prediction_zero_mse() {
        let out = array![[1.5], [-2.0]];
        let (l, g) = output_loss(&out, &Targets::Values(out.clone()), LossKind::Mse);
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn huge_logits_stay_finite() {
        let out = array![[1e4, -1e4, 3.0], [-1e4, 1e4, 0.0]];
        let (l, g) = output_loss(&out, &Targets::Labels(vec![1, 0]), LossKind::CrossEntropy);
        assert!(l.is_finite());
        assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn label_out_of_range() {
        let m = init_model(&relu_stack(&[2, 3], 0.0), Head::Classification { classes: 3 }, 0).unwrap();
        let batch = Dataset::classification(array![[0.0, 1.0]], vec![3]).unwrap();
        assert!(matches!(
            loss_and_gradients(&m, &batch, LossKind::CrossEntropy),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn mismatched_loss_rejected() {
        let m = init_model(&relu_stack(&[2, 1], 0.0), Head::Regression, 0).unwrap();
        let batch = Dataset::classification(array![[0.0, 1.0]], vec![0]).unwrap();
        assert!(loss_and_gradients(&m, &batch, LossKind::Mse).is_err());
        let empty = Dataset::regression(Array2::zeros((0, 2)), Array2::zeros((0, 1))).unwrap();
        assert!(loss_and_gradients(&m, &empty, LossKind::Mse).is_err());
    }
}
