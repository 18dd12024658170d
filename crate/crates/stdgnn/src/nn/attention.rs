//! Additive attention pooling over a hidden-state sequence.
//!
//! Scores `e_t = v . tanh(W h_t + b)` are softmax-normalized into
//! weights `beta_t`, and the pooled output is `g = sum_t beta_t h_t`.

use rand::Rng;

use super::{softmax, softmax_backward, ParamSet, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct AttentionHead {
    /// `(width, hidden)`
    pub w: Tensor,
    /// `(width,)`
    pub b: Tensor,
    /// `(width,)`
    pub v: Tensor,
}

#[derive(Debug, Clone)]
pub struct AttentionOut {
    /// `tanh(W h_t + b)` per step.
    pub u: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
    pub betas: Vec<f64>,
    pub g: Vec<f64>,
}

impl AttentionHead {
    pub fn zeros(width: usize, hidden: usize) -> Self {
        AttentionHead {
            w: Tensor::zeros(&[width, hidden]),
            b: Tensor::zeros(&[width]),
            v: Tensor::zeros(&[width]),
        }
    }

    pub fn init(width: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        AttentionHead {
            w: Tensor::glorot(&[width, hidden], hidden, width, rng),
            b: Tensor::zeros(&[width]),
            v: Tensor::glorot(&[width], width, 1, rng),
        }
    }

    pub fn width(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn hidden(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn forward(&self, h_seq: &[Vec<f64>]) -> Result<AttentionOut> {
        if h_seq.is_empty() {
            return Err(Error::Shape("attention over an empty sequence".into()));
        }
        let width = self.width();
        let hidden = self.hidden();
        let wd = self.w.data();
        let mut u = Vec::with_capacity(h_seq.len());
        let mut scores = Vec::with_capacity(h_seq.len());
        for h in h_seq {
            if h.len() != hidden {
                return Err(Error::Shape(format!(
                    "hidden state of length {} fed to attention over width {hidden}",
                    h.len()
                )));
            }
            let mut ut = self.b.data().to_vec();
            for a in 0..width {
                let row = &wd[a * hidden..(a + 1) * hidden];
                let mut s = ut[a];
                for (wi, hi) in row.iter().zip(h) {
                    s += wi * hi;
                }
                ut[a] = s.tanh();
            }
            let e: f64 = self.v.data().iter().zip(&ut).map(|(a, b)| a * b).sum();
            u.push(ut);
            scores.push(e);
        }
        let betas = softmax(&scores);
        let mut g = vec![0.0; h_seq[0].len()];
        for (beta, h) in betas.iter().zip(h_seq) {
            for (gi, hi) in g.iter_mut().zip(h) {
                *gi += beta * hi;
            }
        }
        Ok(AttentionOut {
            u,
            scores,
            betas,
            g,
        })
    }

    /// Accumulates parameter gradients into `grad` and per-step hidden
    /// gradients into `d_h`.
    pub fn backward(
        &self,
        h_seq: &[Vec<f64>],
        out: &AttentionOut,
        d_g: &[f64],
        grad: &mut AttentionHead,
        d_h: &mut [Vec<f64>],
    ) {
        let width = self.width();
        let hidden = self.hidden();
        // Direct path g = sum beta_t h_t.
        let mut d_beta = vec![0.0; h_seq.len()];
        for (t, h) in h_seq.iter().enumerate() {
            d_beta[t] = d_g.iter().zip(h).map(|(a, b)| a * b).sum();
            for (dhi, dgi) in d_h[t].iter_mut().zip(d_g) {
                *dhi += out.betas[t] * dgi;
            }
        }
        // Through the softmax into scores.
        let d_e = softmax_backward(&out.betas, &d_beta);
        let vd = self.v.data();
        let wd = self.w.data();
        for (t, h) in h_seq.iter().enumerate() {
            if d_e[t] == 0.0 {
                continue;
            }
            // e_t = v . u_t
            for a in 0..width {
                grad.v.data_mut()[a] += d_e[t] * out.u[t][a];
                let du = d_e[t] * vd[a];
                let dq = du * (1.0 - out.u[t][a] * out.u[t][a]);
                grad.b.data_mut()[a] += dq;
                let row = &wd[a * hidden..(a + 1) * hidden];
                let grow = &mut grad.w.data_mut()[a * hidden..(a + 1) * hidden];
                for k in 0..hidden {
                    grow[k] += dq * h[k];
                    d_h[t][k] += dq * row[k];
                }
            }
        }
    }
}

impl ParamSet for AttentionHead {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("w", &self.w);
        f("b", &self.b);
        f("v", &self.v);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("w", &mut self.w);
        f("b", &mut self.b);
        f("v", &mut self.v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn singleton_sequence_passes_through() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let head = AttentionHead::init(4, 4, &mut rng);
        let h = vec![vec![0.3, -0.7, 1.1, 0.0]];
        let out = head.forward(&h).unwrap();
        assert_eq!(out.betas, vec![1.0]);
        assert_eq!(out.g, h[0]);
    }

    #[test]
    fn zero_score_vector_gives_uniform_weights() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut head = AttentionHead::init(3, 3, &mut rng);
        head.v.fill(0.0);
        let h: Vec<Vec<f64>> = (0..4)
            .map(|t| (0..3).map(|k| (t * 3 + k) as f64 / 10.0).collect())
            .collect();
        let out = head.forward(&h).unwrap();
        for beta in &out.betas {
            assert!((beta - 0.25).abs() < 1e-12);
        }
        for k in 0..3 {
            let mean = (0..4).map(|t| h[t][k]).sum::<f64>() / 4.0;
            assert!((out.g[k] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn betas_sum_to_one() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..20 {
            let head = AttentionHead::init(5, 5, &mut rng);
            let h: Vec<Vec<f64>> = (0..6)
                .map(|_| (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let out = head.forward(&h).unwrap();
            assert!((out.betas.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn scores_match_independent_recomputation() {
        // Recompute e_t with a hand-rolled loop and check softmax(e).
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let head = AttentionHead::init(2, 2, &mut rng);
        let h = vec![vec![0.4, -0.2], vec![-1.0, 0.9]];
        let out = head.forward(&h).unwrap();
        let mut expect = Vec::new();
        for ht in &h {
            let mut e = 0.0;
            for a in 0..2 {
                let q = head.w.data()[a * 2] * ht[0] + head.w.data()[a * 2 + 1] * ht[1]
                    + head.b.data()[a];
                e += head.v.data()[a] * q.tanh();
            }
            expect.push(e);
        }
        let betas = softmax(&expect);
        for (a, b) in out.betas.iter().zip(&betas) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let loss = |head: &AttentionHead, h: &[Vec<f64>]| -> f64 {
            let out = head.forward(h).unwrap();
            out.g.iter().map(|v| v * v).sum()
        };
        for trial in 0..20u64 {
            let mut rng = ChaCha20Rng::seed_from_u64(100 + trial);
            let head = AttentionHead::init(3, 3, &mut rng);
            let h: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let out = head.forward(&h).unwrap();
            let d_g: Vec<f64> = out.g.iter().map(|v| 2.0 * v).collect();
            let mut grad = AttentionHead::zeros(3, 3);
            let mut d_h = vec![vec![0.0; 3]; 4];
            head.backward(&h, &out, &d_g, &mut grad, &mut d_h);

            let flat = head.to_flat();
            let analytic = grad.to_flat();
            let mut worst = 0.0f64;
            for idx in 0..flat.len() {
                let step = 1e-5;
                let mut probe = head.clone();
                let mut bumped = flat.clone();
                bumped[idx] += step;
                probe.set_from_flat(&bumped).unwrap();
                let up = loss(&probe, &h);
                bumped[idx] -= 2.0 * step;
                probe.set_from_flat(&bumped).unwrap();
                let down = loss(&probe, &h);
                let numeric = (up - down) / (2.0 * step);
                let denom = (analytic[idx].abs() + numeric.abs()).max(1e-8);
                worst = worst.max((analytic[idx] - numeric).abs() / denom);
            }
            assert!(worst < 1e-4, "trial {trial}: {worst}");

            let mut worst_h = 0.0f64;
            for t in 0..4 {
                for k in 0..3 {
                    let step = 1e-5;
                    let mut hh = h.clone();
                    hh[t][k] += step;
                    let up = loss(&head, &hh);
                    hh[t][k] -= 2.0 * step;
                    let down = loss(&head, &hh);
                    let numeric = (up - down) / (2.0 * step);
                    let denom = (d_h[t][k].abs() + numeric.abs()).max(1e-8);
                    worst_h = worst_h.max((d_h[t][k] - numeric).abs() / denom);
                }
            }
            assert!(worst_h < 1e-4, "trial {trial}: hidden grad {worst_h}");
        }
    }
}
