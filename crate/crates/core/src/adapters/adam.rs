use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::check_dim;
use crate::Result;

/// Bias-corrected Adam.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(dim: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        check_dim("Adam parameters", self.m.len(), params.len())?;
        check_dim("Adam gradient", self.m.len(), grads.len())?;
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for k in 0..params.len() {
            let g = grads[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[k] / b1t;
            let v_hat = self.v[k] / b2t;
            params[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_from_init() {
        let mut s = AdamState::new(3, 1e-3);
        let mut p = [1.0, 2.0, 3.0];
        s.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, [1.0, 2.0, 3.0]);
    }

    #[test]
    fn first_step_is_sign_scaled() {
        let mut s = AdamState::new(2, 1e-3);
        let mut p = [0.0, 0.0];
        s.step(&mut p, &[4.0, -0.5]).unwrap();
        assert!((p[0] + 1e-3).abs() < 1e-9);
        assert!((p[1] - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn converges_on_quadratic() {
        let a = [0.7, -1.3, 2.0];
        let mut s = AdamState::new(3, 1e-2);
        let mut x = [0.0; 3];
        for _ in 0..5000 {
            let g: Vec<f64> = x.iter().zip(&a).map(|(xi, ai)| 2.0 * (xi - ai)).collect();
            s.step(&mut x, &g).unwrap();
        }
        for (xi, ai) in x.iter().zip(&a) {
            assert!((xi - ai).abs() < 1e-3);
        }
    }
}
