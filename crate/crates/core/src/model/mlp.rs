use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::objective::Objective;
use crate::params::{dense_layout, GradVector, Layout, ParamVector, SegmentKind};
use crate::tensor::{self, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// A multilayer perceptron classifier with softmax cross-entropy.
///
/// Class labels are zero-based indices `0..num_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    #[serde(default)]
    pub activation: Activation,
    pub init_seed: u64,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::invalid("an MLP classifier needs at least 2 classes"));
        }
        if self.input_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::invalid("all layer widths must be at least 1"));
        }
        Ok(())
    }

    /// Layer widths from input to logits.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.num_classes);
        dims
    }

    pub fn layout(&self) -> Layout {
        dense_layout(&self.dims())
    }

    pub fn num_params(&self) -> usize {
        self.layout().len()
    }

    /// Weights uniform in `[-1/√fan_in, 1/√fan_in)`, biases zero, seeded by `init_seed`.
    pub fn init_params(&self) -> Result<ParamVector> {
        self.validate()?;
        let layout = Arc::new(self.layout());
        let mut rng = ChaCha8Rng::seed_from_u64(self.init_seed);
        let mut values = vec![0.0; layout.len()];
        for seg in layout.segments() {
            if seg.kind == SegmentKind::Weight {
                let bound = 1.0 / (seg.shape[1] as f64).sqrt();
                for v in &mut values[seg.range()] {
                    *v = (rng.random::<f64>() * 2.0 - 1.0) * bound;
                }
            }
        }
        ParamVector::new(values, layout)
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        check_len("mlp parameters", self.num_params(), params.len())
    }

    fn check_features(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() != 2 {
            return Err(Error::invalid("features must be a [batch, input_dim] matrix"));
        }
        check_len("feature dimension", self.input_dim, x.cols())
    }

    /// Forward pass keeping pre- and post-activations of each hidden layer.
    fn forward(&self, params: &ParamVector, x: &Tensor) -> Forward {
        let batch = x.rows();
        let segs = params.layout().segments();
        let n_layers = segs.len() / 2;
        let mut pre = Vec::with_capacity(n_layers);
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut input = x.data().to_vec();
        let mut fan_in = self.input_dim;
        for l in 0..n_layers {
            let (ws, bs) = (&segs[2 * l], &segs[2 * l + 1]);
            let z = tensor::affine(&input, batch, fan_in, params.segment(ws), params.segment(bs));
            fan_in = bs.len();
            if l + 1 == n_layers {
                pre.push(z);
                break;
            }
            let a: Vec<f64> = z.iter().map(|&v| self.activation.apply(v)).collect();
            pre.push(z);
            post.push(a.clone());
            input = a;
        }
        Forward {
            input: x.data().to_vec(),
            pre,
            post,
        }
    }

    pub fn logits(&self, params: &ParamVector, x: &Tensor) -> Result<Tensor> {
        self.check_params(params)?;
        self.check_features(x)?;
        let mut fwd = self.forward(params, x);
        let out = fwd.pre.pop().expect("at least one layer");
        Tensor::matrix(x.rows(), self.num_classes, out)
    }

    /// Predicted class of a single feature vector; ties go to the smallest index.
    pub fn predict(&self, params: &ParamVector, x: &[f64]) -> Result<usize> {
        check_len("feature dimension", self.input_dim, x.len())?;
        let t = Tensor::matrix(1, self.input_dim, x.to_vec())?;
        Ok(argmax(self.logits(params, &t)?.row(0)))
    }

    /// Predicted classes for every row of `x`.
    pub fn predict_batch(&self, params: &ParamVector, x: &Tensor) -> Result<Vec<usize>> {
        let logits = self.logits(params, x)?;
        Ok((0..logits.rows()).map(|i| argmax(logits.row(i))).collect())
    }

    /// Softmax class probabilities for every row of `x`.
    pub fn probabilities(&self, params: &ParamVector, x: &Tensor) -> Result<Tensor> {
        let mut logits = self.logits(params, x)?;
        let k = self.num_classes;
        for row in logits.data_mut().chunks_mut(k) {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                s += *v;
            }
            row.iter_mut().for_each(|v| *v /= s);
        }
        Ok(logits)
    }

    fn check_batch(&self, params: &ParamVector, batch: &LabeledBatch, weights: &[f64]) -> Result<()> {
        self.check_params(params)?;
        if batch.labels.is_empty() {
            return Err(Error::EmptyBatch);
        }
        self.check_features(&batch.features)?;
        check_len("per-sample weights", batch.labels.len(), weights.len())?;
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("per-sample loss weights must be non-negative"));
        }
        if let Some(&y) = batch.labels.iter().find(|&&y| y >= self.num_classes) {
            return Err(Error::invalid(format!(
                "label {y} out of range for {} classes",
                self.num_classes
            )));
        }
        Ok(())
    }

    /// Weighted sum of softmax cross-entropy terms, `Σ w_i ℓ(f(x_i; θ), y_i)`.
    pub fn loss(&self, params: &ParamVector, batch: &LabeledBatch, weights: &[f64]) -> Result<f64> {
        self.check_batch(params, batch, weights)?;
        let fwd = self.forward(params, &batch.features);
        let logits = fwd.pre.last().expect("at least one layer");
        let k = self.num_classes;
        Ok(batch
            .labels
            .iter()
            .zip(weights)
            .enumerate()
            .map(|(i, (&y, &w))| w * cross_entropy(&logits[i * k..(i + 1) * k], y))
            .sum())
    }

    /// The weighted loss and its exact gradient by backpropagation.
    pub fn loss_and_grad(
        &self,
        params: &ParamVector,
        batch: &LabeledBatch,
        weights: &[f64],
    ) -> Result<(f64, GradVector)> {
        self.check_batch(params, batch, weights)?;
        let n = batch.labels.len();
        let k = self.num_classes;
        let fwd = self.forward(params, &batch.features);
        let logits = fwd.pre.last().expect("at least one layer");

        // dL/dz for the output layer: w_i (softmax(z_i) − onehot(y_i)).
        let mut loss = 0.0;
        let mut delta = vec![0.0; n * k];
        for (i, (&y, &w)) in batch.labels.iter().zip(weights).enumerate() {
            let z = &logits[i * k..(i + 1) * k];
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let d = &mut delta[i * k..(i + 1) * k];
            let mut s = 0.0;
            for (dv, &zv) in d.iter_mut().zip(z) {
                *dv = (zv - m).exp();
                s += *dv;
            }
            loss += w * (m + s.ln() - z[y]);
            for dv in d.iter_mut() {
                *dv = w * (*dv / s);
            }
            d[y] -= w;
        }

        let segs = params.layout().segments();
        let n_layers = segs.len() / 2;
        let mut grad = vec![0.0; params.len()];
        for l in (0..n_layers).rev() {
            let (ws, bs) = (&segs[2 * l], &segs[2 * l + 1]);
            let (fan_out, fan_in) = (ws.shape[0], ws.shape[1]);
            let input = if l == 0 { &fwd.input } else { &fwd.post[l - 1] };
            let (gw, gb) = grad[ws.offset..bs.offset + bs.len()].split_at_mut(ws.len());
            let dx = tensor::affine_backward(input, n, fan_in, params.segment(ws), &delta, fan_out, gw, gb, l > 0);
            if let Some(mut dx) = dx {
                let z = &fwd.pre[l - 1];
                let a = &fwd.post[l - 1];
                for ((g, &zv), &av) in dx.iter_mut().zip(z).zip(a) {
                    *g *= self.activation.derivative(zv, av);
                }
                delta = dx;
            }
        }
        Ok((loss, GradVector::new(grad, params.layout().clone())?))
    }
}

struct Forward {
    input: Vec<f64>,
    /// Pre-activations per layer; the last entry holds the logits.
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

/// First index of the maximum value.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `logsumexp(z) − z[y]`, computed stably.
pub fn cross_entropy(logits: &[f64], y: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = logits.iter().map(|z| (z - m).exp()).sum();
    m + s.ln() - logits[y]
}

/// Features and labels gathered into contiguous storage.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub features: Tensor,
    pub labels: Vec<usize>,
}

/// Weighted cross-entropy of an MLP over a fixed batch.
#[derive(Debug, Clone)]
pub struct MlpObjective<'a> {
    pub spec: &'a MlpSpec,
    pub batch: LabeledBatch,
    pub weights: Vec<f64>,
}

impl<'a> MlpObjective<'a> {
    pub fn new(spec: &'a MlpSpec, batch: LabeledBatch, weights: Vec<f64>) -> Result<Self> {
        check_len("per-sample weights", batch.labels.len(), weights.len())?;
        Ok(Self { spec, batch, weights })
    }

    pub fn unweighted(spec: &'a MlpSpec, batch: LabeledBatch) -> Self {
        let weights = vec![1.0; batch.labels.len()];
        Self { spec, batch, weights }
    }
}

impl Objective for MlpObjective<'_> {
    fn num_params(&self) -> usize {
        self.spec.num_params()
    }

    fn loss_and_grad(&self, params: &ParamVector) -> Result<(f64, GradVector)> {
        self.spec.loss_and_grad(params, &self.batch, &self.weights)
    }

    fn loss(&self, params: &ParamVector) -> Result<f64> {
        self.spec.loss(params, &self.batch, &self.weights)
    }
}
