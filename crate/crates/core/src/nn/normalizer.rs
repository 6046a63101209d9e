//! Running mean/variance observation normalization (Welford), updated
//! during sampling and frozen for evaluation.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunningNorm {
    pub enabled: bool,
    mean: Vec<f64>,
    m2: Vec<f64>,
    count: f64,
}

impl RunningNorm {
    pub fn new(dim: usize, enabled: bool) -> Self {
        Self { enabled, mean: vec![0.0; dim], m2: vec![0.0; dim], count: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> f64 {
        self.count
    }

    pub fn update(&mut self, x: &[f64]) {
        if !self.enabled {
            return;
        }
        debug_assert_eq!(x.len(), self.mean.len());
        self.count += 1.0;
        for i in 0..x.len() {
            let delta = x[i] - self.mean[i];
            self.mean[i] += delta / self.count;
            self.m2[i] += delta * (x[i] - self.mean[i]);
        }
    }

    pub fn variance(&self, i: usize) -> f64 {
        if self.count > 1.0 {
            self.m2[i] / (self.count - 1.0)
        } else {
            1.0
        }
    }

    /// Fold another accumulator in (parallel-variance merge). Worker order
    /// must be fixed for deterministic training.
    pub fn merge(&mut self, other: &RunningNorm) {
        if !self.enabled || other.count == 0.0 {
            return;
        }
        if self.count == 0.0 {
            self.mean.copy_from_slice(&other.mean);
            self.m2.copy_from_slice(&other.m2);
            self.count = other.count;
            return;
        }
        let total = self.count + other.count;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.m2[i] += other.m2[i] + delta * delta * self.count * other.count / total;
            self.mean[i] += delta * other.count / total;
        }
        self.count = total;
    }

    /// Normalize in place; outputs are clipped to ±10 standard deviations.
    pub fn normalize(&self, x: &mut [f64]) {
        if !self.enabled || self.count < 2.0 {
            return;
        }
        for i in 0..x.len() {
            let std = self.variance(i).sqrt().max(1e-6);
            x[i] = ((x[i] - self.mean[i]) / std).clamp(-10.0, 10.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_two_pass_statistics() {
        let data: Vec<Vec<f64>> = (0..200)
            .map(|k| vec![k as f64 * 0.01, (k as f64 * 0.37).sin()])
            .collect();
        let mut norm = RunningNorm::new(2, true);
        for x in &data {
            norm.update(x);
        }
        for i in 0..2 {
            let mean: f64 = data.iter().map(|x| x[i]).sum::<f64>() / data.len() as f64;
            let var: f64 =
                data.iter().map(|x| (x[i] - mean).powi(2)).sum::<f64>() / (data.len() - 1) as f64;
            assert!((norm.mean[i] - mean).abs() < 1e-12);
            assert!((norm.variance(i) - var).abs() < 1e-12);
        }
    }

    #[test]
    fn disabled_normalizer_is_identity() {
        let mut norm = RunningNorm::new(3, false);
        norm.update(&[1.0, 2.0, 3.0]);
        let mut x = vec![5.0, -4.0, 0.5];
        let orig = x.clone();
        norm.normalize(&mut x);
        assert_eq!(x, orig);
    }

    #[test]
    fn normalized_sample_is_standardized() {
        let mut norm = RunningNorm::new(1, true);
        for k in 0..1000 {
            norm.update(&[3.0 + (k % 10) as f64]);
        }
        let mut x = vec![3.0 + 4.5];
        norm.normalize(&mut x);
        assert!(x[0].abs() < 1.0, "near-mean value should normalize small, got {}", x[0]);
    }
}
