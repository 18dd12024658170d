//! LSTM cell with explicit step/sequence forward and backward passes.
//!
//! The default wiring follows the model this crate implements: the
//! forget gate and the candidate read the previous hidden state, while
//! the input and output gates read the previous *cell* state:
//!
//! ```text
//! f_t = sigmoid(W_f x_t + U_f h_{t-1} + b_f)
//! i_t = sigmoid(W_i x_t + U_i c_{t-1} + b_i)
//! o_t = sigmoid(W_o x_t + U_o c_{t-1} + b_o)
//! c~_t = tanh(W_c x_t + U_c h_{t-1} + b_c)
//! c_t = f_t . c_{t-1} + i_t . c~_t
//! h_t = o_t . tanh(c_t)
//! ```
//!
//! `standard_gates` switches the input/output gates back to reading
//! `h_{t-1}` for comparison runs.

use rand::Rng;

use super::{sigmoid, ParamSet, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w_f: Tensor,
    pub u_f: Tensor,
    pub b_f: Tensor,
    pub w_i: Tensor,
    pub u_i: Tensor,
    pub b_i: Tensor,
    pub w_o: Tensor,
    pub u_o: Tensor,
    pub b_o: Tensor,
    pub w_c: Tensor,
    pub u_c: Tensor,
    pub b_c: Tensor,
    pub hidden: usize,
    pub input: usize,
    /// When true, the input and output gates read `h_{t-1}` instead of
    /// `c_{t-1}`.
    pub standard_gates: bool,
}

/// Per-step cache for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmStep {
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub o: Vec<f64>,
    pub ctilde: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

fn matvec(w: &Tensor, x: &[f64], acc: &mut [f64]) {
    let (rows, cols) = (w.shape()[0], w.shape()[1]);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(acc.len(), rows);
    let data = w.data();
    for r in 0..rows {
        let row = &data[r * cols..(r + 1) * cols];
        let mut s = 0.0;
        for (a, b) in row.iter().zip(x) {
            s += a * b;
        }
        acc[r] += s;
    }
}

/// acc += W^T d  (gradient flowing back through a matvec input)
fn matvec_t(w: &Tensor, d: &[f64], acc: &mut [f64]) {
    let (rows, cols) = (w.shape()[0], w.shape()[1]);
    let data = w.data();
    for r in 0..rows {
        let row = &data[r * cols..(r + 1) * cols];
        let dr = d[r];
        for (a, wi) in acc.iter_mut().zip(row) {
            *a += dr * wi;
        }
    }
}

/// grad += d (outer) x
fn outer_acc(grad: &mut Tensor, d: &[f64], x: &[f64]) {
    let cols = grad.shape()[1];
    let g = grad.data_mut();
    for (r, dr) in d.iter().enumerate() {
        if *dr == 0.0 {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (gi, xi) in row.iter_mut().zip(x) {
            *gi += dr * xi;
        }
    }
}

impl LstmCell {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        let w = || Tensor::zeros(&[hidden, input]);
        let u = || Tensor::zeros(&[hidden, hidden]);
        let b = || Tensor::zeros(&[hidden]);
        LstmCell {
            w_f: w(),
            u_f: u(),
            b_f: b(),
            w_i: w(),
            u_i: u(),
            b_i: b(),
            w_o: w(),
            u_o: u(),
            b_o: b(),
            w_c: w(),
            u_c: u(),
            b_c: b(),
            hidden,
            input,
            standard_gates: false,
        }
    }

    /// Glorot weights, zero biases, forget-gate bias +1.
    pub fn init(hidden: usize, input: usize, rng: &mut impl Rng) -> Self {
        let mut cell = LstmCell::zeros(hidden, input);
        for w in [&mut cell.w_f, &mut cell.w_i, &mut cell.w_o, &mut cell.w_c] {
            *w = Tensor::glorot(&[hidden, input], input, hidden, rng);
        }
        for u in [&mut cell.u_f, &mut cell.u_i, &mut cell.u_o, &mut cell.u_c] {
            *u = Tensor::glorot(&[hidden, hidden], hidden, hidden, rng);
        }
        cell.b_f.fill(1.0);
        cell
    }

    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<LstmStep> {
        if x.len() != self.input || h_prev.len() != self.hidden || c_prev.len() != self.hidden {
            return Err(Error::Shape(format!(
                "lstm step got x={}, h={}, c={} for cell ({}, {})",
                x.len(),
                h_prev.len(),
                c_prev.len(),
                self.hidden,
                self.input
            )));
        }
        let gate_src = if self.standard_gates { h_prev } else { c_prev };
        let h = self.hidden;

        let mut f = self.b_f.data().to_vec();
        matvec(&self.w_f, x, &mut f);
        matvec(&self.u_f, h_prev, &mut f);
        f.iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut i = self.b_i.data().to_vec();
        matvec(&self.w_i, x, &mut i);
        matvec(&self.u_i, gate_src, &mut i);
        i.iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut o = self.b_o.data().to_vec();
        matvec(&self.w_o, x, &mut o);
        matvec(&self.u_o, gate_src, &mut o);
        o.iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut ctilde = self.b_c.data().to_vec();
        matvec(&self.w_c, x, &mut ctilde);
        matvec(&self.u_c, h_prev, &mut ctilde);
        ctilde.iter_mut().for_each(|v| *v = v.tanh());

        let mut c = vec![0.0; h];
        let mut hh = vec![0.0; h];
        for k in 0..h {
            c[k] = f[k] * c_prev[k] + i[k] * ctilde[k];
            hh[k] = o[k] * c[k].tanh();
        }
        Ok(LstmStep {
            f,
            i,
            o,
            ctilde,
            c,
            h: hh,
        })
    }

    /// Run the cell over a sequence starting from zero states.
    pub fn forward_seq(&self, xs: &[Vec<f64>]) -> Result<Vec<LstmStep>> {
        let mut steps = Vec::with_capacity(xs.len());
        let zero = vec![0.0; self.hidden];
        for (t, x) in xs.iter().enumerate() {
            let (h_prev, c_prev) = if t == 0 {
                (&zero[..], &zero[..])
            } else {
                let prev: &LstmStep = &steps[t - 1];
                (&prev.h[..], &prev.c[..])
            };
            steps.push(self.step(x, h_prev, c_prev)?);
        }
        Ok(steps)
    }

    /// Backpropagation through time. `d_h[t]` holds the loss gradient
    /// flowing into `h_t` from outside the recurrence; parameter
    /// gradients are accumulated into `grad` and input gradients into
    /// `d_x[t]`.
    pub fn backward_seq(
        &self,
        xs: &[Vec<f64>],
        steps: &[LstmStep],
        d_h: &[Vec<f64>],
        grad: &mut LstmCell,
        d_x: &mut [Vec<f64>],
    ) {
        let hdim = self.hidden;
        let zero = vec![0.0; hdim];
        let mut dh_next = vec![0.0; hdim]; // gradient into h_t from step t+1
        let mut dc_next = vec![0.0; hdim]; // gradient into c_t from step t+1
        for t in (0..steps.len()).rev() {
            let s = &steps[t];
            let (h_prev, c_prev) = if t == 0 {
                (&zero[..], &zero[..])
            } else {
                (&steps[t - 1].h[..], &steps[t - 1].c[..])
            };
            let gate_src = if self.standard_gates { h_prev } else { c_prev };

            let mut dh = vec![0.0; hdim];
            for k in 0..hdim {
                dh[k] = d_h[t][k] + dh_next[k];
            }
            // h_t = o_t . tanh(c_t)
            let mut da_o = vec![0.0; hdim];
            let mut dc = dc_next.clone();
            for k in 0..hdim {
                let tc = s.c[k].tanh();
                da_o[k] = dh[k] * tc * s.o[k] * (1.0 - s.o[k]);
                dc[k] += dh[k] * s.o[k] * (1.0 - tc * tc);
            }
            // c_t = f . c_{t-1} + i . c~
            let mut da_f = vec![0.0; hdim];
            let mut da_i = vec![0.0; hdim];
            let mut da_c = vec![0.0; hdim];
            let mut dc_prev = vec![0.0; hdim];
            for k in 0..hdim {
                da_f[k] = dc[k] * c_prev[k] * s.f[k] * (1.0 - s.f[k]);
                da_i[k] = dc[k] * s.ctilde[k] * s.i[k] * (1.0 - s.i[k]);
                da_c[k] = dc[k] * s.i[k] * (1.0 - s.ctilde[k] * s.ctilde[k]);
                dc_prev[k] = dc[k] * s.f[k];
            }

            outer_acc(&mut grad.w_f, &da_f, &xs[t]);
            outer_acc(&mut grad.u_f, &da_f, h_prev);
            outer_acc(&mut grad.w_i, &da_i, &xs[t]);
            outer_acc(&mut grad.u_i, &da_i, gate_src);
            outer_acc(&mut grad.w_o, &da_o, &xs[t]);
            outer_acc(&mut grad.u_o, &da_o, gate_src);
            outer_acc(&mut grad.w_c, &da_c, &xs[t]);
            outer_acc(&mut grad.u_c, &da_c, h_prev);
            for k in 0..hdim {
                grad.b_f.data_mut()[k] += da_f[k];
                grad.b_i.data_mut()[k] += da_i[k];
                grad.b_o.data_mut()[k] += da_o[k];
                grad.b_c.data_mut()[k] += da_c[k];
            }

            let dx = &mut d_x[t];
            matvec_t(&self.w_f, &da_f, dx);
            matvec_t(&self.w_i, &da_i, dx);
            matvec_t(&self.w_o, &da_o, dx);
            matvec_t(&self.w_c, &da_c, dx);

            let mut dh_prev = vec![0.0; hdim];
            matvec_t(&self.u_f, &da_f, &mut dh_prev);
            matvec_t(&self.u_c, &da_c, &mut dh_prev);
            if self.standard_gates {
                matvec_t(&self.u_i, &da_i, &mut dh_prev);
                matvec_t(&self.u_o, &da_o, &mut dh_prev);
            } else {
                matvec_t(&self.u_i, &da_i, &mut dc_prev);
                matvec_t(&self.u_o, &da_o, &mut dc_prev);
            }
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
    }
}

impl ParamSet for LstmCell {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("w_f", &self.w_f);
        f("u_f", &self.u_f);
        f("b_f", &self.b_f);
        f("w_i", &self.w_i);
        f("u_i", &self.u_i);
        f("b_i", &self.b_i);
        f("w_o", &self.w_o);
        f("u_o", &self.u_o);
        f("b_o", &self.b_o);
        f("w_c", &self.w_c);
        f("u_c", &self.u_c);
        f("b_c", &self.b_c);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("w_f", &mut self.w_f);
        f("u_f", &mut self.u_f);
        f("b_f", &mut self.b_f);
        f("w_i", &mut self.w_i);
        f("u_i", &mut self.u_i);
        f("b_i", &mut self.b_i);
        f("w_o", &mut self.w_o);
        f("u_o", &mut self.u_o);
        f("b_o", &mut self.b_o);
        f("w_c", &mut self.w_c);
        f("u_c", &mut self.u_c);
        f("b_c", &mut self.b_c);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn zero_parameter_fixed_point() {
        let cell = LstmCell::zeros(3, 2);
        let s = cell.step(&[0.7, -0.3], &[0.0; 3], &[0.0; 3]).unwrap();
        for k in 0..3 {
            assert_eq!(s.f[k], 0.5);
            assert_eq!(s.i[k], 0.5);
            assert_eq!(s.o[k], 0.5);
            assert_eq!(s.ctilde[k], 0.0);
            assert_eq!(s.c[k], 0.0);
            assert_eq!(s.h[k], 0.0);
        }
    }

    #[test]
    fn zero_parameters_halve_the_cell_state() {
        let cell = LstmCell::zeros(2, 2);
        let c_prev = [0.8, -1.2];
        let s = cell.step(&[0.0, 0.0], &[0.0, 0.0], &c_prev).unwrap();
        for k in 0..2 {
            assert!((s.c[k] - 0.5 * c_prev[k]).abs() < 1e-15);
            assert!((s.h[k] - 0.5 * (0.5 * c_prev[k]).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_gates_preserve_memory() {
        let mut cell = LstmCell::zeros(2, 1);
        cell.b_f.fill(50.0);
        cell.b_i.fill(-50.0);
        let c_prev = [0.9, -0.4];
        let s = cell.step(&[1.0], &[0.3, 0.3], &c_prev).unwrap();
        for k in 0..2 {
            assert!((s.c[k] - c_prev[k]).abs() < 1e-9);
        }
    }

    fn seq_loss(cell: &LstmCell, xs: &[Vec<f64>]) -> f64 {
        let steps = cell.forward_seq(xs).unwrap();
        steps
            .iter()
            .flat_map(|s| s.h.iter())
            .map(|v| v * v)
            .sum::<f64>()
    }

    #[test]
    fn three_step_unroll_matches_finite_differences() {
        for (trial, standard) in [(0usize, false), (1, true), (2, false), (3, true)] {
            let mut rng = ChaCha20Rng::seed_from_u64(40 + trial as u64);
            let mut cell = LstmCell::init(3, 2, &mut rng);
            cell.standard_gates = standard;
            let xs: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();

            let steps = cell.forward_seq(&xs).unwrap();
            let d_h: Vec<Vec<f64>> = steps.iter().map(|s| s.h.iter().map(|v| 2.0 * v).collect()).collect();
            let mut grad = LstmCell::zeros(3, 2);
            let mut d_x = vec![vec![0.0; 2]; 3];
            cell.backward_seq(&xs, &steps, &d_h, &mut grad, &mut d_x);

            let flat = cell.to_flat();
            let analytic = grad.to_flat();
            let mut worst = 0.0f64;
            for idx in 0..flat.len() {
                let h = 1e-5;
                let mut probe = cell.clone();
                let mut bumped = flat.clone();
                bumped[idx] += h;
                probe.set_from_flat(&bumped).unwrap();
                let up = seq_loss(&probe, &xs);
                bumped[idx] -= 2.0 * h;
                probe.set_from_flat(&bumped).unwrap();
                let down = seq_loss(&probe, &xs);
                let numeric = (up - down) / (2.0 * h);
                let denom = (analytic[idx].abs() + numeric.abs()).max(1e-8);
                worst = worst.max((analytic[idx] - numeric).abs() / denom);
            }
            assert!(worst < 1e-4, "trial {trial}: max rel err {worst}");

            // Input gradients too.
            let mut worst_x = 0.0f64;
            for t in 0..3 {
                for j in 0..2 {
                    let h = 1e-5;
                    let mut up_xs = xs.clone();
                    up_xs[t][j] += h;
                    let up = seq_loss(&cell, &up_xs);
                    up_xs[t][j] -= 2.0 * h;
                    let down = seq_loss(&cell, &up_xs);
                    let numeric = (up - down) / (2.0 * h);
                    let denom = (d_x[t][j].abs() + numeric.abs()).max(1e-8);
                    worst_x = worst_x.max((d_x[t][j] - numeric).abs() / denom);
                }
            }
            assert!(worst_x < 1e-4, "trial {trial}: input grad err {worst_x}");
        }
    }
}
