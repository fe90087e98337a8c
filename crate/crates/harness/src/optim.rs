//! Adam with bias correction and a step-halving learning-rate schedule.

use thermsr_core::{ParamStore, Scalar, Tensor};

use crate::config::AdamParams;

/// `lr0 * 2^(-floor(epoch / period))`, exact in binary floating point.
pub fn learning_rate(lr0: f64, period: usize, epoch: usize) -> f64 {
    let halvings = (epoch / period.max(1)).min(i32::MAX as usize) as i32;
    lr0 * 2f64.powi(-halvings)
}

/// First and second moment estimates per parameter group.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<T> {
    pub params: AdamParams,
    /// Updates applied so far; drives the bias correction.
    pub t: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: AdamParams, store: &ParamStore<T>) -> Self {
        let zeros: Vec<Tensor<T>> = store.groups().iter().map(|g| Tensor::zeros(&g.value.shape)).collect();
        Self { params, t: 0, m: zeros.clone(), v: zeros }
    }

    /// One update. Groups with no gradient keep their moments and values.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &[Option<Tensor<T>>], lr: f64) {
        self.t += 1;
        let AdamParams { beta1, beta2, eps } = self.params;
        let t = self.t.min(i32::MAX as u64) as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let (b1, b2) = (T::lit(beta1), T::lit(beta2));
        let (ob1, ob2) = (T::lit(1.0 - beta1), T::lit(1.0 - beta2));
        let step = T::lit(lr / c1);
        let inv_c2 = T::lit(1.0 / c2);
        let eps = T::lit(eps);
        for (i, group) in store.groups_mut().iter_mut().enumerate() {
            let Some(g) = &grads[i] else { continue };
            let (m, v) = (&mut self.m[i].data, &mut self.v[i].data);
            for (j, p) in group.value.data.iter_mut().enumerate() {
                let gj = g.data[j];
                m[j] = b1 * m[j] + ob1 * gj;
                v[j] = b2 * v[j] + ob2 * gj * gj;
                *p -= step * m[j] / ((v[j] * inv_c2).sqrt() + eps);
            }
        }
    }
}

/// Scales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut [Option<Tensor<T>>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flatten()
        .flat_map(|g| g.data.iter())
        .map(|&x| x.as_f64() * x.as_f64())
        .sum::<f64>()
        .sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = T::lit(max_norm / norm);
        for g in grads.iter_mut().flatten() {
            g.data.iter_mut().for_each(|x| *x *= s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use thermsr_core::Init;

    use super::*;

    #[test]
    fn schedule_halves_every_period() {
        assert_eq!(learning_rate(1e-4, 200, 0), 1e-4);
        assert_eq!(learning_rate(1e-4, 200, 199), 1e-4);
        assert_eq!(learning_rate(1e-4, 200, 200), 0.5e-4);
        assert_eq!(learning_rate(1e-4, 200, 401), 0.25e-4);
        let mut halved = 3e-3;
        for e in 0..2000 {
            if e > 0 && e % 7 == 0 {
                halved *= 0.5;
            }
            assert_eq!(learning_rate(3e-3, 7, e), halved);
        }
    }

    #[test]
    fn first_step_moves_each_coordinate_by_lr() {
        // with zero moments, the bias-corrected first step is lr * g / (|g| + eps)
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", &[3], Init::Zeros, &mut ChaCha8Rng::seed_from_u64(0));
        let mut adam = Adam::new(AdamParams::default(), &store);
        let g = Tensor::from_vec(&[3], vec![2.0, -0.5, 0.0]).unwrap();
        adam.step(&mut store, &[Some(g)], 0.1);
        let w = &store.get(id).data;
        assert!((w[0] + 0.1).abs() < 1e-8);
        assert!((w[1] - 0.1).abs() < 1e-8);
        assert_eq!(w[2], 0.0);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", &[2], Init::Zeros, &mut ChaCha8Rng::seed_from_u64(0));
        let mut adam = Adam::new(AdamParams::default(), &store);
        let target = [1.5, -2.0];
        for _ in 0..3000 {
            let w = &store.get(id).data;
            let g = Tensor::from_vec(&[2], vec![2.0 * (w[0] - target[0]), 2.0 * (w[1] - target[1])]).unwrap();
            adam.step(&mut store, &[Some(g)], 0.01);
        }
        let w = &store.get(id).data;
        assert!((w[0] - 1.5).abs() < 1e-3 && (w[1] + 2.0).abs() < 1e-3, "{w:?}");
    }

    #[test]
    fn clipping_bounds_the_joint_norm() {
        let mut g = vec![Some(Tensor::from_vec(&[2], vec![3.0f64, 0.0]).unwrap()), None, Some(Tensor::scalar(4.0))];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((clip_global_norm(&mut g, 0.0) - 1.0).abs() < 1e-12);
    }
}
