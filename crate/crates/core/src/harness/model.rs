//! Two-layer perceptron trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::Checkpoint;
use crate::synthetic::{normal, rng_stream};
use crate::tensor::{Tensor, WeightMatrix, WeightVector};

use super::data::{Dataset, SyntheticSpec};

pub const LAYER1_WEIGHT: &str = "layer1.weight";
pub const LAYER1_BIAS: &str = "layer1.bias";
pub const LAYER2_WEIGHT: &str = "layer2.weight";
pub const LAYER2_BIAS: &str = "layer2.bias";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `logits = W2 · act(W1 · x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub w1: WeightMatrix,
    pub b1: WeightVector,
    pub w2: WeightMatrix,
    pub b2: WeightVector,
    pub activation: Activation,
}

impl ToyModel {
    pub fn new(w1: WeightMatrix, b1: WeightVector, w2: WeightMatrix, b2: WeightVector, activation: Activation) -> Result<Self> {
        let model = Self { w1, b1, w2, b2, activation };
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let hidden = self.w1.rows();
        let chain = [
            (LAYER1_BIAS, hidden, self.b1.len()),
            (LAYER2_WEIGHT, hidden, self.w2.cols()),
            (LAYER2_BIAS, self.w2.rows(), self.b2.len()),
        ];
        for (name, expected, found) in chain {
            if expected != found {
                return Err(Error::ShapeMismatch {
                    name: name.into(),
                    expected: vec![expected],
                    found: vec![found],
                });
            }
        }
        Ok(())
    }

    /// Scaled Gaussian initialization with variance `1 / fan_in`, zero biases.
    pub fn init(spec: &SyntheticSpec, seed: u64) -> Self {
        let mut r = rng_stream(seed, u64::MAX);
        let (d, h, c) = (spec.input_dim, spec.hidden_dim, spec.n_classes);
        let s1 = 1.0 / (d as f64).sqrt();
        let s2 = 1.0 / (h as f64).sqrt();
        Self {
            w1: WeightMatrix::from_fn(h, d, |_, _| s1 * normal(&mut r)),
            b1: WeightVector::zeros(h),
            w2: WeightMatrix::from_fn(c, h, |_, _| s2 * normal(&mut r)),
            b2: WeightVector::zeros(c),
            activation: Activation::default(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn n_classes(&self) -> usize {
        self.w2.rows()
    }

    pub fn to_checkpoint(&self, model_id: &str) -> Checkpoint {
        Checkpoint::from_params(
            model_id,
            [
                (LAYER1_WEIGHT, Tensor::Matrix(self.w1.clone())),
                (LAYER1_BIAS, Tensor::Vector(self.b1.clone())),
                (LAYER2_WEIGHT, Tensor::Matrix(self.w2.clone())),
                (LAYER2_BIAS, Tensor::Vector(self.b2.clone())),
            ],
        )
        .expect("fixed distinct parameter names")
    }

    pub fn from_checkpoint(ckpt: &Checkpoint, activation: Activation) -> Result<Self> {
        let matrix = |name: &str| {
            ckpt.get(name)
                .and_then(Tensor::as_matrix)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("checkpoint lacks 2-D parameter `{name}`")))
        };
        let vector = |name: &str| {
            ckpt.get(name)
                .and_then(Tensor::as_vector)
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("checkpoint lacks 1-D parameter `{name}`")))
        };
        Self::new(
            matrix(LAYER1_WEIGHT)?,
            vector(LAYER1_BIAS)?,
            matrix(LAYER2_WEIGHT)?,
            vector(LAYER2_BIAS)?,
            activation,
        )
    }

    fn hidden(&self, inputs: &WeightMatrix) -> Vec<f64> {
        let (n, d, h) = (inputs.rows(), self.input_dim(), self.hidden_dim());
        let mut out = vec![0.0; n * h];
        for i in 0..n {
            let x = inputs.row(i);
            for j in 0..h {
                let w = &self.w1.data()[j * d..(j + 1) * d];
                let z = self.b1.data()[j] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                out[i * h + j] = self.activation.apply(z);
            }
        }
        out
    }

    fn logits_from_hidden(&self, hidden: &[f64], n: usize) -> Vec<f64> {
        let (h, c) = (self.hidden_dim(), self.n_classes());
        let mut out = vec![0.0; n * c];
        for i in 0..n {
            let a = &hidden[i * h..(i + 1) * h];
            for k in 0..c {
                let w = &self.w2.data()[k * h..(k + 1) * h];
                out[i * c + k] = self.b2.data()[k] + w.iter().zip(a).map(|(p, q)| p * q).sum::<f64>();
            }
        }
        out
    }

    /// Row-major `n × n_classes` logits.
    pub fn logits(&self, inputs: &WeightMatrix) -> Result<Vec<f64>> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                name: "inputs".into(),
                expected: vec![inputs.rows(), self.input_dim()],
                found: vec![inputs.rows(), inputs.cols()],
            });
        }
        let hidden = self.hidden(inputs);
        Ok(self.logits_from_hidden(&hidden, inputs.rows()))
    }

    pub fn predict(&self, inputs: &WeightMatrix) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.logits(inputs)?, self.n_classes()))
    }

    /// Mean cross-entropy over `data`.
    pub fn loss(&self, data: &Dataset) -> Result<f64> {
        let logits = self.logits(&data.inputs)?;
        Ok(cross_entropy(&logits, &data.labels, self.n_classes()).0)
    }
}

/// Index of the largest entry per row; the first maximum wins ties.
pub fn argmax_rows(values: &[f64], width: usize) -> Vec<usize> {
    values
        .chunks_exact(width)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
                .0
        })
        .collect()
}

/// Mean cross-entropy and its gradient with respect to the logits.
fn cross_entropy(logits: &[f64], labels: &[usize], c: usize) -> (f64, Vec<f64>) {
    let n = labels.len();
    let mut grad = vec![0.0; logits.len()];
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = &logits[i * c..(i + 1) * c];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
        loss += z.ln() + max - row[y];
        for k in 0..c {
            let p = (row[k] - max).exp() / z;
            grad[i * c + k] = (p - if k == y { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    (loss / n as f64, grad)
}

/// Full-batch gradient descent on mean cross-entropy starting from `pre`.
///
/// The loss of each step is checked before the update; a non-finite loss
/// aborts with [`Error::Diverged`]. Zero epochs return `pre` unchanged.
pub fn fit_domain_model(pre: &ToyModel, data: &Dataset, epochs: usize, lr: f64) -> Result<ToyModel> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {lr}")));
    }
    if data.inputs.cols() != pre.input_dim() || data.n_classes != pre.n_classes() {
        return Err(Error::ShapeMismatch {
            name: "dataset".into(),
            expected: vec![pre.input_dim(), pre.n_classes()],
            found: vec![data.inputs.cols(), data.n_classes],
        });
    }
    if let Some(&bad) = data.labels.iter().find(|&&y| y >= pre.n_classes()) {
        return Err(Error::InvalidArgument(format!("label {bad} outside {} classes", pre.n_classes())));
    }

    let (n, d, h, c) = (data.len(), pre.input_dim(), pre.hidden_dim(), pre.n_classes());
    let x = data.inputs.data();
    let mut w1 = pre.w1.data().to_vec();
    let mut b1 = pre.b1.data().to_vec();
    let mut w2 = pre.w2.data().to_vec();
    let mut b2 = pre.b2.data().to_vec();
    let act = pre.activation;

    for epoch in 0..epochs {
        if [&w1, &b1, &w2, &b2].iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Diverged { epoch });
        }
        let model = ToyModel {
            w1: WeightMatrix::new(h, d, w1.clone())?,
            b1: WeightVector::new(b1.clone())?,
            w2: WeightMatrix::new(c, h, w2.clone())?,
            b2: WeightVector::new(b2.clone())?,
            activation: act,
        };
        let hidden = model.hidden(&data.inputs);
        let logits = model.logits_from_hidden(&hidden, n);
        let (loss, g_logits) = cross_entropy(&logits, &data.labels, c);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }

        let mut g_w2 = vec![0.0; c * h];
        let mut g_b2 = vec![0.0; c];
        let mut g_w1 = vec![0.0; h * d];
        let mut g_b1 = vec![0.0; h];
        for i in 0..n {
            let gl = &g_logits[i * c..(i + 1) * c];
            let a = &hidden[i * h..(i + 1) * h];
            let xi = &x[i * d..(i + 1) * d];
            for k in 0..c {
                g_b2[k] += gl[k];
                for j in 0..h {
                    g_w2[k * h + j] += gl[k] * a[j];
                }
            }
            for j in 0..h {
                let back: f64 = (0..c).map(|k| gl[k] * w2[k * h + j]).sum();
                let gz = back * act.grad_from_output(a[j]);
                g_b1[j] += gz;
                for (g, xv) in g_w1[j * d..(j + 1) * d].iter_mut().zip(xi) {
                    *g += gz * xv;
                }
            }
        }
        for (p, g) in w1.iter_mut().zip(&g_w1) {
            *p -= lr * g;
        }
        for (p, g) in b1.iter_mut().zip(&g_b1) {
            *p -= lr * g;
        }
        for (p, g) in w2.iter_mut().zip(&g_w2) {
            *p -= lr * g;
        }
        for (p, g) in b2.iter_mut().zip(&g_b2) {
            *p -= lr * g;
        }
    }

    if [&w1, &b1, &w2, &b2].iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(Error::Diverged { epoch: epochs });
    }
    let out = ToyModel {
        w1: WeightMatrix::new(h, d, w1)?,
        b1: WeightVector::new(b1)?,
        w2: WeightMatrix::new(c, h, w2)?,
        b2: WeightVector::new(b2)?,
        activation: act,
    };
    if !out.loss(data)?.is_finite() {
        return Err(Error::Diverged { epoch: epochs });
    }
    Ok(out)
}
