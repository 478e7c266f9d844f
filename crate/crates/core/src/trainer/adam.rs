use alloc::vec;
use alloc::vec::Vec;

use crate::graph::EmbeddingMatrix;
use crate::math;

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(size: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; size],
            v: vec![0.0; size],
            t: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// One update with a dense gradient laid out like `emb.as_slice()`.
    /// Rows marked non-trainable are left untouched.
    pub fn step(&mut self, emb: &mut EmbeddingMatrix, grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        let width = emb.width();
        let trainable: Vec<bool> = (0..emb.rows())
            .map(|r| emb.is_trainable(crate::kb::SymbolId(r as u32)))
            .collect();
        for (idx, (x, g)) in emb.as_mut_slice().iter_mut().zip(grad).enumerate() {
            if !trainable[idx / width] {
                continue;
            }
            self.m[idx] = self.beta1 * self.m[idx] + (1.0 - self.beta1) * g;
            self.v[idx] = self.beta2 * self.v[idx] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[idx] / c1;
            let v_hat = self.v[idx] / c2;
            *x -= self.lr * m_hat / (math::sqrt(v_hat) + self.eps);
        }
    }
}
