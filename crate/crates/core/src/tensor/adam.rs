use super::Tensor;
use crate::error::{Error, Result};

/// Bias-corrected Adam with per-parameter moment buffers.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(0.001)
    }
}

impl AdamState {
    pub fn new(learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: Vec::new(),
            v: Vec::new(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update to `params` using their accumulated gradients.
    /// Parameters without a gradient buffer are treated as having zero
    /// gradient. The order and shapes of `params` must be the same on every
    /// call.
    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() {
            return Err(Error::ShapeMismatch(format!(
                "adam: {} parameter tensors, state has {}",
                params.len(),
                self.m.len()
            )));
        }
        if let Some((i, p)) = params
            .iter()
            .enumerate()
            .find(|(i, p)| p.len() != self.m[*i].len())
        {
            return Err(Error::ShapeMismatch(format!(
                "adam: parameter {i} has {} values, moments have {}",
                p.len(),
                self.m[i].len()
            )));
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for (k, p) in params.iter_mut().enumerate() {
            let Some(grad) = p.grad().map(<[f64]>::to_vec) else {
                continue;
            };
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, w) in p.data_mut().iter_mut().enumerate() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                *w -= self.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(v: f64, g: f64) -> Tensor {
        let mut t = Tensor::filled(&[1], v);
        t.grad_mut()[0] = g;
        t
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = param(0.7, 0.0);
        let mut adam = AdamState::default();
        adam.step(&mut [&mut p]).unwrap();
        assert_eq!(p.data(), &[0.7]);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        for g in [3.0, -0.02, 150.0] {
            let mut p = param(1.0, g);
            let mut adam = AdamState::default();
            adam.step(&mut [&mut p]).unwrap();
            let expected = 1.0 - 0.001 * f64::signum(g) * g.abs() / (g.abs() + 1e-8);
            assert!((p.data()[0] - expected).abs() < 1e-15);
            assert!((p.data()[0] - (1.0 - 0.001 * g.signum())).abs() < 1e-9);
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        let mut w = Tensor::filled(&[1], 1.0);
        let mut adam = AdamState::new(0.01);
        for _ in 0..200 {
            w.zero_grad();
            let x = w.data()[0];
            w.grad_mut()[0] = 2.0 * x;
            adam.step(&mut [&mut w]).unwrap();
        }
        assert!(w.data()[0].abs() < 0.1, "{}", w.data()[0]);
    }

    #[test]
    fn shape_change_rejected() {
        let mut a = param(1.0, 1.0);
        let mut adam = AdamState::default();
        adam.step(&mut [&mut a]).unwrap();
        let mut b = Tensor::zeros(&[2]);
        assert!(adam.step(&mut [&mut b]).is_err());
        assert!(adam.step(&mut [&mut a, &mut b]).is_err());
    }
}
