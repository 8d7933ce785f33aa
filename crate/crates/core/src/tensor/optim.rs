use super::{Tensor, TensorError};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global-norm threshold; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_grad_norm: Some(0.5),
        }
    }
}

/// Euclidean norm of all gradients taken together.
pub fn global_norm<T: Real>(grads: &[Tensor<T>]) -> T {
    grads.iter().fold(T::zero(), |acc, g| acc + g.sum_sq()).sqrt()
}

/// Rescales `grads` in place so their global norm is at most `max_norm`.
/// Returns the norm measured before scaling.
pub fn clip_global_norm<T: Real>(grads: &mut [Tensor<T>], max_norm: f64) -> T {
    let norm = global_norm(grads);
    let limit = T::lit(max_norm);
    if norm > limit {
        let k = limit / norm;
        for g in grads.iter_mut() {
            for x in g.data_mut() {
                *x = *x * k;
            }
        }
    }
    norm
}

#[derive(Debug, Clone)]
pub struct Adam<T> {
    config: AdamConfig,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
}

impl<T: Real> Adam<T> {
    pub fn new<'p>(config: AdamConfig, params: impl IntoIterator<Item = &'p Tensor<T>>) -> Self {
        let m: Vec<Tensor<T>> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            config,
            v: m.clone(),
            m,
            t: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update. Gradients are clipped in place first; the returned value
    /// is their global norm before clipping.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &mut [Tensor<T>]) -> Result<T, TensorError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(TensorError::Invalid {
                op: "adam",
                message: format!(
                    "expected {} tensors, got {} params and {} grads",
                    self.m.len(),
                    params.len(),
                    grads.len()
                ),
            });
        }
        for ((p, g), m) in params.iter().zip(grads.iter()).zip(&self.m) {
            if p.shape() != m.shape() || g.shape() != m.shape() {
                return Err(TensorError::Shape {
                    op: "adam",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
        }
        let norm = match self.config.max_grad_norm {
            Some(c) => clip_global_norm(grads, c),
            None => global_norm(grads),
        };

        self.t += 1;
        let c = &self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let bc1 = T::one() - b1.powi(self.t as i32);
        let bc2 = T::one() - b2.powi(self.t as i32);
        let (lr, eps) = (T::lit(c.lr), T::lit(c.eps));
        for (((p, g), m), v) in params.iter_mut().zip(grads.iter()).zip(&mut self.m).zip(&mut self.v) {
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = b1 * *mi + (T::one() - b1) * gi;
                *vi = b2 * *vi + (T::one() - b2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *pi = *pi - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(norm)
    }
}
