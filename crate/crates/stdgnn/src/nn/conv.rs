//! Valid 1-D convolution with a fixed window of 3 rows and ReLU.
//!
//! Input is a `(rows, c_in)` matrix; the kernels slide along the row
//! axis only, so the output is `(rows - 2, k)`. This matches stacking
//! two of these layers on an `(l*r, a_v)` walk block: the row count
//! shrinks by 2 per layer.

use rand::Rng;

use super::{relu, ParamSet, Tensor};
use crate::{Error, Result};

pub const WINDOW: usize = 3;

#[derive(Debug, Clone)]
pub struct ConvLayer {
    /// `(k, WINDOW, c_in)`
    pub kernels: Tensor,
    /// `(k,)`
    pub bias: Tensor,
}

/// Forward caches: pre-activation sign information is recovered from
/// the activations themselves (ReLU gradient is zero wherever the
/// output is zero).
#[derive(Debug, Clone)]
pub struct ConvOut {
    /// `(rows - 2, k)` after ReLU.
    pub act: Vec<f64>,
    pub out_rows: usize,
}

impl ConvLayer {
    pub fn zeros(k: usize, c_in: usize) -> Self {
        ConvLayer {
            kernels: Tensor::zeros(&[k, WINDOW, c_in]),
            bias: Tensor::zeros(&[k]),
        }
    }

    pub fn init(k: usize, c_in: usize, rng: &mut impl Rng) -> Self {
        ConvLayer {
            kernels: Tensor::glorot(&[k, WINDOW, c_in], WINDOW * c_in, k, rng),
            bias: Tensor::zeros(&[k]),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[2]
    }

    pub fn forward(&self, x: &[f64], rows: usize) -> Result<ConvOut> {
        let c_in = self.in_channels();
        let k = self.out_channels();
        if rows < WINDOW {
            return Err(Error::Shape(format!(
                "convolution needs at least {WINDOW} rows, got {rows}"
            )));
        }
        if x.len() != rows * c_in {
            return Err(Error::Shape(format!(
                "input of length {} does not match ({rows}, {c_in})",
                x.len()
            )));
        }
        let out_rows = rows - (WINDOW - 1);
        let mut act = vec![0.0; out_rows * k];
        let w = self.kernels.data();
        let b = self.bias.data();
        for p in 0..out_rows {
            let window = &x[p * c_in..(p + WINDOW) * c_in];
            for j in 0..k {
                let taps = &w[j * WINDOW * c_in..(j + 1) * WINDOW * c_in];
                let mut acc = b[j];
                for (xi, wi) in window.iter().zip(taps) {
                    acc += xi * wi;
                }
                act[p * k + j] = relu(acc);
            }
        }
        Ok(ConvOut { act, out_rows })
    }

    /// Accumulates parameter gradients into `grad` and, when `d_x` is
    /// given, input gradients into it (`d_x` must be zeroed by the
    /// caller if it should not accumulate).
    pub fn backward(
        &self,
        x: &[f64],
        out: &ConvOut,
        d_act: &[f64],
        grad: &mut ConvLayer,
        mut d_x: Option<&mut [f64]>,
    ) {
        let c_in = self.in_channels();
        let k = self.out_channels();
        let w = self.kernels.data();
        let gw = grad.kernels.data_mut();
        let gb = grad.bias.data_mut();
        for p in 0..out.out_rows {
            let window = &x[p * c_in..(p + WINDOW) * c_in];
            for j in 0..k {
                let up = d_act[p * k + j];
                if up == 0.0 || out.act[p * k + j] <= 0.0 {
                    continue;
                }
                gb[j] += up;
                let taps = &mut gw[j * WINDOW * c_in..(j + 1) * WINDOW * c_in];
                for (ti, xi) in taps.iter_mut().zip(window) {
                    *ti += up * xi;
                }
                if let Some(dx) = d_x.as_deref_mut() {
                    let taps = &w[j * WINDOW * c_in..(j + 1) * WINDOW * c_in];
                    let dwin = &mut dx[p * c_in..(p + WINDOW) * c_in];
                    for (di, wi) in dwin.iter_mut().zip(taps) {
                        *di += up * wi;
                    }
                }
            }
        }
    }
}

impl ParamSet for ConvLayer {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("kernels", &self.kernels);
        f("bias", &self.bias);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("kernels", &mut self.kernels);
        f("bias", &mut self.bias);
    }
}
