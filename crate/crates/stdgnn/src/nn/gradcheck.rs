//! Central finite-difference gradient checking.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub const FD_STEP: f64 = 1e-5;

/// Compare an analytic gradient against central finite differences of
/// `loss` on up to `max_coords` randomly sampled coordinates of
/// `theta`. Returns the maximum relative error
/// `|a - n| / max(1e-8, |a| + |n|)`.
///
/// `loss` must be deterministic in `theta` (dropout disabled).
pub fn grad_check<F>(
    mut loss: F,
    theta: &[f64],
    analytic: &[f64],
    max_coords: usize,
    seed: u64,
) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(theta.len(), analytic.len());
    let mut coords: Vec<usize> = (0..theta.len()).collect();
    if coords.len() > max_coords {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        coords.shuffle(&mut rng);
        coords.truncate(max_coords);
    }
    let mut work = theta.to_vec();
    let mut worst = 0.0f64;
    for &i in &coords {
        let orig = work[i];
        work[i] = orig + FD_STEP;
        let up = loss(&work);
        work[i] = orig - FD_STEP;
        let down = loss(&work);
        work[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let denom = (analytic[i].abs() + numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{cross_entropy, cross_entropy_backward, Activation, DenseLayer, ParamSet};
    use rand::Rng;

    #[test]
    fn dense_softmax_cross_entropy_is_tight() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let layer = DenseLayer::init(4, 3, Activation::Softmax, &mut rng);
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y_true = [0.0, 0.0, 1.0, 0.0];

        let out = layer.forward(&x).unwrap();
        let d_y = cross_entropy_backward(&out.y, &y_true);
        let mut grad = DenseLayer::zeros(4, 3, Activation::Softmax);
        layer.backward(&x, &out, &d_y, &mut grad, None);

        let theta = layer.to_flat();
        let analytic = grad.to_flat();
        let err = grad_check(
            |flat| {
                let mut probe = layer.clone();
                probe.set_from_flat(flat).unwrap();
                cross_entropy(&probe.forward(&x).unwrap().y, &y_true).unwrap()
            },
            &theta,
            &analytic,
            200,
            7,
        );
        assert!(err < 1e-6, "max rel err {err}");
    }
}
