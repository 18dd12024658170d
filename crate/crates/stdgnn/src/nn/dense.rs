//! Fully connected layer with a selectable output activation.

use rand::Rng;

use serde::{Deserialize, Serialize};

use super::{relu, sigmoid, softmax, softmax_backward, ParamSet, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    None,
    Softmax,
    Sigmoid,
    Relu,
}

#[derive(Debug, Clone)]
pub struct DenseLayer {
    /// `(out, in)`
    pub w: Tensor,
    /// `(out,)`
    pub b: Tensor,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseOut {
    pub y: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(out: usize, input: usize, activation: Activation) -> Self {
        DenseLayer {
            w: Tensor::zeros(&[out, input]),
            b: Tensor::zeros(&[out]),
            activation,
        }
    }

    pub fn init(out: usize, input: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        DenseLayer {
            w: Tensor::glorot(&[out, input], input, out, rng),
            b: Tensor::zeros(&[out]),
            activation,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn in_dim(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn forward(&self, x: &[f64]) -> Result<DenseOut> {
        let (out, input) = (self.out_dim(), self.in_dim());
        if x.len() != input {
            return Err(Error::Shape(format!(
                "dense layer ({out}, {input}) applied to input of length {}",
                x.len()
            )));
        }
        let wd = self.w.data();
        let mut z = self.b.data().to_vec();
        for r in 0..out {
            let row = &wd[r * input..(r + 1) * input];
            let mut s = z[r];
            for (a, b) in row.iter().zip(x) {
                s += a * b;
            }
            z[r] = s;
        }
        let y = match self.activation {
            Activation::None => z,
            Activation::Softmax => softmax(&z),
            Activation::Sigmoid => z.iter().map(|&v| sigmoid(v)).collect(),
            Activation::Relu => z.iter().map(|&v| relu(v)).collect(),
        };
        Ok(DenseOut { y })
    }

    pub fn backward(
        &self,
        x: &[f64],
        out: &DenseOut,
        d_y: &[f64],
        grad: &mut DenseLayer,
        mut d_x: Option<&mut [f64]>,
    ) {
        let (outd, input) = (self.out_dim(), self.in_dim());
        let d_z: Vec<f64> = match self.activation {
            Activation::None => d_y.to_vec(),
            Activation::Softmax => softmax_backward(&out.y, d_y),
            Activation::Sigmoid => out
                .y
                .iter()
                .zip(d_y)
                .map(|(&y, &d)| d * y * (1.0 - y))
                .collect(),
            Activation::Relu => out
                .y
                .iter()
                .zip(d_y)
                .map(|(&y, &d)| if y > 0.0 { d } else { 0.0 })
                .collect(),
        };
        let wd = self.w.data();
        let gw = grad.w.data_mut();
        let gb = grad.b.data_mut();
        for r in 0..outd {
            let dz = d_z[r];
            if dz == 0.0 {
                continue;
            }
            gb[r] += dz;
            let grow = &mut gw[r * input..(r + 1) * input];
            for (gi, xi) in grow.iter_mut().zip(x) {
                *gi += dz * xi;
            }
            if let Some(dx) = d_x.as_deref_mut() {
                let row = &wd[r * input..(r + 1) * input];
                for (di, wi) in dx.iter_mut().zip(row) {
                    *di += dz * wi;
                }
            }
        }
    }
}

impl ParamSet for DenseLayer {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("w", &self.w);
        f("b", &self.b);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("w", &mut self.w);
        f("b", &mut self.b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn zero_softmax_layer_is_uniform() {
        let layer = DenseLayer::zeros(4, 3, Activation::Softmax);
        let out = layer.forward(&[1.0, -2.0, 0.5]).unwrap();
        for v in &out.y {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_weights_pass_through() {
        let mut layer = DenseLayer::zeros(3, 3, Activation::None);
        for i in 0..3 {
            layer.w.data_mut()[i * 3 + i] = 1.0;
        }
        let x = [0.1, -0.2, 0.3];
        assert_eq!(layer.forward(&x).unwrap().y, x.to_vec());
    }

    #[test]
    fn softmax_outputs_sum_to_one() {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        for _ in 0..20 {
            let layer = DenseLayer::init(6, 4, Activation::Softmax, &mut rng);
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let y = layer.forward(&x).unwrap().y;
            assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn range_contracts_hold() {
        let mut rng = ChaCha20Rng::seed_from_u64(78);
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let relu_layer = DenseLayer::init(5, 5, Activation::Relu, &mut rng);
        assert!(relu_layer.forward(&x).unwrap().y.iter().all(|&v| v >= 0.0));
        let sig_layer = DenseLayer::init(5, 5, Activation::Sigmoid, &mut rng);
        assert!(sig_layer
            .forward(&x)
            .unwrap()
            .y
            .iter()
            .all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn gradients_match_finite_differences_for_all_activations() {
        for (trial, act) in [
            Activation::None,
            Activation::Softmax,
            Activation::Sigmoid,
            Activation::Relu,
        ]
        .iter()
        .enumerate()
        {
            for seed in 0..5u64 {
                let mut rng = ChaCha20Rng::seed_from_u64(200 + trial as u64 * 10 + seed);
                let layer = DenseLayer::init(4, 3, *act, &mut rng);
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let target: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let loss = |l: &DenseLayer| -> f64 {
                    l.forward(&x)
                        .unwrap()
                        .y
                        .iter()
                        .zip(&target)
                        .map(|(y, t)| (y - t) * (y - t))
                        .sum()
                };
                let out = layer.forward(&x).unwrap();
                let d_y: Vec<f64> = out.y.iter().zip(&target).map(|(y, t)| 2.0 * (y - t)).collect();
                let mut grad = DenseLayer::zeros(4, 3, *act);
                let mut d_x = vec![0.0; 3];
                layer.backward(&x, &out, &d_y, &mut grad, Some(&mut d_x));

                let flat = layer.to_flat();
                let analytic = grad.to_flat();
                let mut worst = 0.0f64;
                for idx in 0..flat.len() {
                    let h = 1e-5;
                    let mut probe = layer.clone();
                    let mut bumped = flat.clone();
                    bumped[idx] += h;
                    probe.set_from_flat(&bumped).unwrap();
                    let up = loss(&probe);
                    bumped[idx] -= 2.0 * h;
                    probe.set_from_flat(&bumped).unwrap();
                    let down = loss(&probe);
                    let numeric = (up - down) / (2.0 * h);
                    let denom = (analytic[idx].abs() + numeric.abs()).max(1e-8);
                    worst = worst.max((analytic[idx] - numeric).abs() / denom);
                }
                assert!(worst < 1e-4, "activation {act:?}: {worst}");
            }
        }
    }
}
