//! Adam with bias correction over any [`ParamSet`].

use serde::{Deserialize, Serialize};

use super::ParamSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(lr: f64, n_params: usize) -> Self {
        AdamState {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// One Adam step. Gradients must be finite; the offending parameter
    /// is named otherwise.
    pub fn update<P: ParamSet>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let mut bad: Option<String> = None;
        grads.visit(&mut |name, t| {
            if bad.is_none() && !t.is_finite() {
                bad = Some(name.to_string());
            }
        });
        if let Some(param) = bad {
            return Err(Error::NonFiniteGradient { param });
        }
        let g = grads.to_flat();
        if g.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam state sized for {} parameters, got {}",
                self.m.len(),
                g.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let mut offset = 0;
        params.visit_mut(&mut |_, tensor| {
            for p in tensor.data_mut() {
                let gi = g[offset];
                let m = &mut self.m[offset];
                let v = &mut self.v[offset];
                *m = self.beta1 * *m + (1.0 - self.beta1) * gi;
                *v = self.beta2 * *v + (1.0 - self.beta2) * gi * gi;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *p -= self.lr * mhat / (vhat.sqrt() + self.epsilon);
                offset += 1;
            }
        });
        Ok(())
    }
}
