//! Minimal dense-tensor neural toolkit with explicit forward and
//! backward passes for exactly the layers the GRCNN model needs.
//!
//! Everything is 64-bit floating point. There is no autodiff graph:
//! each layer exposes `forward` (returning the caches its backward pass
//! needs) and `backward` (accumulating parameter gradients and,
//! optionally, input gradients). [`gradcheck::grad_check`] validates
//! any composition against central finite differences.

pub mod adam;
pub mod attention;
pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod lstm;

pub use adam::AdamState;
pub use attention::AttentionHead;
pub use conv::ConvLayer;
pub use dense::{Activation, DenseLayer};
pub use gradcheck::grad_check;
pub use lstm::LstmCell;

use rand::Rng;

use crate::{Error, Result};

/// Dense row-major tensor over a contiguous `f64` buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "buffer of length {} does not fill shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Glorot-uniform initialization over the given fan-in/fan-out.
    pub fn glorot(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let len: usize = shape.iter().product();
        let data = (0..len).map(|_| rng.gen_range(-bound..=bound)).collect();
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

// ---------------------------------------------------------------------------
// Scalar activations
// ---------------------------------------------------------------------------

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Numerically stable softmax (max subtraction). Output sums to 1.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Backward through softmax: given `y = softmax(z)` and `dL/dy`, returns
/// `dL/dz_i = y_i (dL/dy_i - sum_j dL/dy_j y_j)`.
pub fn softmax_backward(y: &[f64], d_y: &[f64]) -> Vec<f64> {
    let dot: f64 = y.iter().zip(d_y).map(|(a, b)| a * b).sum();
    y.iter().zip(d_y).map(|(&yi, &di)| yi * (di - dot)).collect()
}

// ---------------------------------------------------------------------------
// Cross-entropy
// ---------------------------------------------------------------------------

/// Predictions are clamped below at this value before the log.
pub const CE_CLAMP: f64 = 1e-12;

fn check_one_hot(one_hot: &[f64]) -> Result<usize> {
    let mut hot = None;
    for (i, &v) in one_hot.iter().enumerate() {
        if v == 1.0 {
            if hot.replace(i).is_some() {
                return Err(Error::Shape("label vector has multiple hot entries".into()));
            }
        } else if v != 0.0 {
            return Err(Error::Shape(format!(
                "label vector entry {i} is {v}, expected 0 or 1"
            )));
        }
    }
    hot.ok_or_else(|| Error::Shape("label vector has no hot entry".into()))
}

/// `-sum_j y_j log max(yhat_j, clamp)` for a one-hot `y`.
pub fn cross_entropy(pred: &[f64], one_hot: &[f64]) -> Result<f64> {
    if pred.len() != one_hot.len() {
        return Err(Error::Shape(format!(
            "prediction length {} vs label length {}",
            pred.len(),
            one_hot.len()
        )));
    }
    let hot = check_one_hot(one_hot)?;
    Ok(-pred[hot].max(CE_CLAMP).ln())
}

/// Gradient of [`cross_entropy`] with respect to the prediction vector.
/// Where the clamp is active the loss is locally constant, so the
/// gradient is zero there.
pub fn cross_entropy_backward(pred: &[f64], one_hot: &[f64]) -> Vec<f64> {
    pred.iter()
        .zip(one_hot)
        .map(|(&p, &y)| if y == 1.0 && p > CE_CLAMP { -1.0 / p } else { 0.0 })
        .collect()
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

/// Inverted dropout: training masks scale surviving activations by
/// `1/(1-rate)` so that evaluation mode is the identity.
#[derive(Debug, Clone, Copy)]
pub struct Dropout {
    pub rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} not in [0,1)")));
        }
        Ok(Dropout { rate })
    }

    /// Sample a multiplicative mask of the given length.
    pub fn mask(&self, len: usize, rng: &mut impl Rng) -> Vec<f64> {
        if self.rate == 0.0 {
            return vec![1.0; len];
        }
        let keep = 1.0 - self.rate;
        (0..len)
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Parameter visiting
// ---------------------------------------------------------------------------

/// A collection of named parameter tensors with a stable iteration
/// order. Adam, the checkpoint container, and the gradient checker all
/// operate on this flat view.
pub trait ParamSet {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, t| n += t.len());
        n
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.visit(&mut |_, t| out.extend_from_slice(t.data()));
        out
    }

    fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        let mut offset = 0;
        let mut err = None;
        self.visit_mut(&mut |name, t| {
            if err.is_some() {
                return;
            }
            let end = offset + t.len();
            if end > flat.len() {
                err = Some(Error::Shape(format!(
                    "flat buffer exhausted while filling parameter {name}"
                )));
                return;
            }
            t.data_mut().copy_from_slice(&flat[offset..end]);
            offset = end;
        });
        if let Some(e) = err {
            return Err(e);
        }
        if offset != flat.len() {
            return Err(Error::Shape(format!(
                "flat buffer has {} values but parameters take {offset}",
                flat.len()
            )));
        }
        Ok(())
    }

    /// Set every tensor to zero (gradient accumulators).
    fn zero(&mut self) {
        self.visit_mut(&mut |_, t| t.fill(0.0));
    }

    /// Accumulate `other` scaled by `factor` into `self`.
    fn add_scaled(&mut self, other: &Self, factor: f64)
    where
        Self: Sized,
    {
        let flat = other.to_flat();
        let mut offset = 0;
        self.visit_mut(&mut |_, t| {
            for v in t.data_mut() {
                *v += factor * flat[offset];
                offset += 1;
            }
        });
    }

    /// Scale every parameter in place.
    fn scale(&mut self, factor: f64) {
        self.visit_mut(&mut |_, t| t.data_mut().iter_mut().for_each(|v| *v *= factor));
    }
}
