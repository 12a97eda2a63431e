use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        if self == Activation::Relu {
            z.mapv_inplace(|v| v.max(0.0));
        }
    }
}

/// One dense layer: `output = act(W x + b)`, followed by dropout on the
/// output while training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
    pub dropout_p: f64,
}

impl LayerSpec {
    pub fn new(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            input_dim,
            output_dim,
            activation,
            dropout_p: 0.0,
        }
    }

    pub fn with_dropout(self, dropout_p: f64) -> Self {
        LayerSpec { dropout_p, ..self }
    }
}

/// Dense ReLU stack `dims[0] -> ... -> dims[last]` with an identity output
/// layer. `dropout_p` applies to every hidden layer.
pub fn relu_stack(dims: &[usize], dropout_p: f64) -> Vec<LayerSpec> {
    let last = dims.len().saturating_sub(2);
    dims.windows(2)
        .enumerate()
        .map(|(i, d)| {
            if i == last {
                LayerSpec::new(d[0], d[1], Activation::Identity)
            } else {
                LayerSpec::new(d[0], d[1], Activation::Relu).with_dropout(dropout_p)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Regression,
    Classification { classes: usize },
}

/// Dense feed-forward network. Weight matrices are `output_dim x input_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub(crate) layers: Vec<LayerSpec>,
    pub(crate) weights: Vec<Array2<f64>>,
    pub(crate) biases: Vec<Array1<f64>>,
    pub(crate) head: Head,
}

/// Intermediate values of a batched forward pass, kept for backprop.
pub(crate) struct Trace {
    /// Input to each layer (row per sample).
    pub inputs: Vec<Array2<f64>>,
    pub pre: Vec<Array2<f64>>,
    pub masks: Vec<Option<Array2<f64>>>,
    pub output: Array2<f64>,
}

fn check_specs(specs: &[LayerSpec], head: Head) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::validation("network needs at least one layer"));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.input_dim == 0 || s.output_dim == 0 {
            return Err(Error::validation(format!("layer {i} has a zero dimension")));
        }
        if !(0.0..1.0).contains(&s.dropout_p) {
            return Err(Error::validation(format!(
                "layer {i} dropout {} outside [0,1)",
                s.dropout_p
            )));
        }
    }
    for (i, pair) in specs.windows(2).enumerate() {
        if pair[0].output_dim != pair[1].input_dim {
            return Err(Error::validation(format!(
                "layer {i} outputs {} but layer {} expects {}",
                pair[0].output_dim,
                i + 1,
                pair[1].input_dim
            )));
        }
    }
    if let Head::Classification { classes } = head {
        let out = specs[specs.len() - 1].output_dim;
        if classes != out {
            return Err(Error::validation(format!(
                "classification head with {classes} classes on a {out}-wide output"
            )));
        }
    }
    Ok(())
}

/// Glorot-uniform weights, zero biases.
pub fn init_model(specs: &[LayerSpec], head: Head, seed: u64) -> Result<MlpModel> {
    check_specs(specs, head)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(specs.len());
    let mut biases = Vec::with_capacity(specs.len());
    for s in specs {
        let bound = (6.0 / (s.input_dim + s.output_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        weights.push(Array2::from_shape_simple_fn((s.output_dim, s.input_dim), || {
            dist.sample(&mut rng)
        }));
        biases.push(Array1::zeros(s.output_dim));
    }
    Ok(MlpModel {
        layers: specs.to_vec(),
        weights,
        biases,
        head,
    })
}

impl MlpModel {
    /// Assemble a model from explicit parameters.
    pub fn from_parts(
        layers: Vec<LayerSpec>,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        head: Head,
    ) -> Result<Self> {
        check_specs(&layers, head)?;
        if weights.len() != layers.len() || biases.len() != layers.len() {
            return Err(Error::validation("parameter count does not match layers"));
        }
        for (i, ((s, w), b)) in layers.iter().zip(&weights).zip(&biases).enumerate() {
            if w.dim() != (s.output_dim, s.input_dim) || b.len() != s.output_dim {
                return Err(Error::validation(format!("layer {i} parameter shape mismatch")));
            }
        }
        let model = MlpModel {
            layers,
            weights,
            biases,
            head,
        };
        if !model.is_finite() {
            return Err(Error::validation("non-finite parameter"));
        }
        Ok(model)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::validation(format!(
                "input has {cols} features, model expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Batched inference without dropout; one row per sample.
    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut a = x.to_owned();
        for (l, (s, (w, b))) in self
            .layers
            .iter()
            .zip(self.weights.iter().zip(&self.biases))
            .enumerate()
        {
            let mut z = affine(&a, w, b);
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric { layer: l });
            }
            s.activation.apply(&mut z);
            a = z;
        }
        Ok(a)
    }

    /// Batched forward pass recording what backprop needs. Dropout is
    /// applied (inverted scaling) only when `dropout_rng` is given.
    pub(crate) fn forward_trace<R: Rng>(
        &self,
        x: ArrayView2<'_, f64>,
        mut dropout_rng: Option<&mut R>,
    ) -> Result<Trace> {
        self.check_input(x.ncols())?;
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut masks = Vec::with_capacity(n);
        let mut a = x.to_owned();
        for (l, (s, (w, b))) in self
            .layers
            .iter()
            .zip(self.weights.iter().zip(&self.biases))
            .enumerate()
        {
            let z = affine(&a, w, b);
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric { layer: l });
            }
            let mut out = z.clone();
            s.activation.apply(&mut out);
            let mask = match dropout_rng.as_deref_mut() {
                Some(rng) if s.dropout_p > 0.0 => {
                    let keep = 1.0 / (1.0 - s.dropout_p);
                    let m = Array2::from_shape_simple_fn(out.dim(), || {
                        if rng.random::<f64>() < s.dropout_p {
                            0.0
                        } else {
                            keep
                        }
                    });
                    out *= &m;
                    Some(m)
                }
                _ => None,
            };
            inputs.push(a);
            pre.push(z);
            masks.push(mask);
            a = out;
        }
        Ok(Trace {
            inputs,
            pre,
            masks,
            output: a,
        })
    }
}

/// Single-sample forward pass. With `training = true`, dropout masks are
/// drawn from `seed` (0 when absent).
/// `a · wᵀ + b`; a single row goes through a matrix-vector product.
fn affine(a: &Array2<f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut z = if a.nrows() == 1 {
        w.dot(&a.row(0)).insert_axis(Axis(0))
    } else {
        a.dot(&w.t())
    };
    z += b;
    z
}

pub fn forward(model: &MlpModel, x: &[f64], training: bool, seed: Option<u64>) -> Result<Vec<f64>> {
    let row = ArrayView2::from_shape((1, x.len()), x)
        .map_err(|e| Error::validation(e.to_string()))?;
    let out = if training {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
        model.forward_trace(row, Some(&mut rng))?.output
    } else {
        model.predict_batch(row)?
    };
    Ok(out.index_axis(Axis(0), 0).to_vec())
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Most likely class and the full probability vector.
pub fn predict_class(model: &MlpModel, x: &[f64]) -> Result<(usize, Vec<f64>)> {
    if !matches!(model.head, Head::Classification { .. }) {
        return Err(Error::validation("predict_class needs a classification head"));
    }
    let logits = forward(model, x, false, None)?;
    let probs = softmax(&logits);
    Ok((argmax(&probs), probs))
}
