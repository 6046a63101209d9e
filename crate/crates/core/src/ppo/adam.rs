//! Adam with bias correction, operating on the combined flat parameter
//! view of the policy/value networks.

use crate::nn::PolicyValueNet;

#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(param_count: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; param_count], v: vec![0.0; param_count], t: 0 }
    }

    pub fn step(&mut self, net: &mut PolicyValueNet, grads: &[f64], lr: f64) {
        assert_eq!(grads.len(), self.m.len(), "gradient length mismatch");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (beta1, beta2, eps) = (self.beta1, self.beta2, self.eps);
        let (m, v) = (&mut self.m, &mut self.v);
        net.apply_update(&mut |idx, p| {
            let g = grads[idx];
            m[idx] = beta1 * m[idx] + (1.0 - beta1) * g;
            v[idx] = beta2 * v[idx] + (1.0 - beta2) * g * g;
            let m_hat = m[idx] / bc1;
            let v_hat = v[idx] / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        });
    }
}
