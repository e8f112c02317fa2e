use alloc::vec::Vec;

use super::Tensor;
use crate::error::{domain, Error, Result};
use crate::math;
use crate::params::ParamStore;

/// Adam optimizer state for every tensor of one [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    /// Zero moments shaped like `params`, with the usual defaults
    /// (0.9, 0.999, 1e-8).
    pub fn new(params: &ParamStore, lr: f64) -> Self {
        Self::with_betas(params, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(params: &ParamStore, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Tensor> = params
            .values()
            .iter()
            .map(|t| Tensor::zeros(t.shape()))
            .collect();
        Self {
            step: 0,
            lr,
            beta1,
            beta2,
            eps,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One bias-corrected Adam update of `params` using `grads` (store order).
    pub fn update(&mut self, params: &mut ParamStore, grads: &[Tensor]) -> Result<()> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(domain("adam", "gradient list does not match parameters"));
        }
        for ((name, value), grad) in params.iter().zip(grads) {
            if value.shape() != grad.shape() {
                return Err(Error::Shape {
                    op: "adam",
                    left: value.shape().to_vec(),
                    right: grad.shape().to_vec(),
                });
            }
            if !grad.is_finite() {
                return Err(Error::NonFiniteGradient(name.into()));
            }
        }
        self.step += 1;
        let t = self.step as f64;
        let correction1 = 1.0 - math::powf(self.beta1, t);
        let correction2 = 1.0 - math::powf(self.beta2, t);
        for (i, value) in params.values_mut().iter_mut().enumerate() {
            let grad = grads[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (j, p) in value.data_mut().iter_mut().enumerate() {
                let g = grad[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let m_hat = m[j] / correction1;
                let v_hat = v[j] / correction2;
                *p -= self.lr * m_hat / (math::sqrt(v_hat) + self.eps);
            }
        }
        Ok(())
    }
}

/// `lr_min + (lr_max - lr_min) (1 + cos(pi step / total)) / 2`
pub fn cosine_annealing_lr(step: usize, total: usize, lr_max: f64, lr_min: f64) -> Result<f64> {
    if total == 0 {
        return Err(domain("cosine_annealing_lr", "total must be at least 1"));
    }
    if step > total {
        return Err(domain(
            "cosine_annealing_lr",
            alloc::format!("step {step} beyond total {total}"),
        ));
    }
    let phase = math::PI * step as f64 / total as f64;
    Ok(lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math::cos(phase)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("p", Tensor::scalar(v));
        s
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = ParamStore::new();
        params.insert("w", Tensor::vector(vec![1.0, -2.0, 3.0]));
        let before = params.clone();
        let mut adam = AdamState::new(&params, 0.1);
        for _ in 0..5 {
            adam.update(&mut params, &[Tensor::zeros(&[3])]).unwrap();
        }
        assert_eq!(params, before);
        assert_eq!(adam.step, 5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut params = scalar_store(1.0);
        let mut adam = AdamState::new(&params, 0.1);
        adam.update(&mut params, &[Tensor::scalar(1.0)]).unwrap();
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((params.get("p").unwrap().item() - expected).abs() < 1e-15);
    }

    #[test]
    fn updates_are_bit_reproducible() {
        let run = || {
            let mut params = scalar_store(0.3);
            let mut adam = AdamState::new(&params, 0.05);
            for k in 0..10 {
                let g = Tensor::scalar(f64::from(k).sin());
                adam.update(&mut params, &[g]).unwrap();
            }
            params.get("p").unwrap().item().to_bits()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut params = scalar_store(0.0);
        let mut adam = AdamState::new(&params, 0.1);
        let err = adam
            .update(&mut params, &[Tensor::scalar(f64::NAN)])
            .unwrap_err();
        assert_eq!(err, Error::NonFiniteGradient("p".into()));
        assert_eq!(adam.step, 0);
    }

    #[test]
    fn cosine_schedule_examples() {
        assert_eq!(cosine_annealing_lr(0, 10, 0.02, 0.0).unwrap(), 0.02);
        assert!(cosine_annealing_lr(10, 10, 0.02, 0.001).unwrap() - 0.001 < 1e-18);
        assert!((cosine_annealing_lr(5, 10, 0.02, 0.0).unwrap() - 0.01).abs() < 1e-15);
        assert!(cosine_annealing_lr(11, 10, 0.02, 0.0).is_err());
        assert!(cosine_annealing_lr(0, 0, 0.02, 0.0).is_err());
    }

    #[test]
    fn cosine_schedule_is_monotone() {
        let total = 500;
        let lrs: Vec<f64> = (0..=total)
            .map(|s| cosine_annealing_lr(s, total, 0.01, 0.0).unwrap())
            .collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }
}
