//! Minimal dense MLP with ReLU hidden activations, a linear output layer,
//! Xavier-uniform initialization and exact reverse-mode gradients.
//!
//! Parameters live in one flat buffer (per layer: row-major weights, then
//! biases) so the optimizer can treat the network as a single parameter
//! vector.

use rand::RngExt;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f64>,
}

/// Per-layer activations recorded by a forward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    acts: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let count = param_count(dims);
        Self { dims: dims.to_vec(), params: vec![0.0; count] }
    }

    /// Xavier-uniform weights `U(±√(6/(fan_in+fan_out)))`, zero biases. The
    /// final layer is scaled by `final_gain` so freshly initialized outputs
    /// stay small.
    pub fn xavier<R: rand::Rng + ?Sized>(dims: &[usize], rng: &mut R, final_gain: f64) -> Self {
        let mut net = Self::zeros(dims);
        let layers = dims.len() - 1;
        for l in 0..layers {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let gain = if l == layers - 1 { final_gain } else { 1.0 };
            let (w_off, _b_off) = net.layer_offsets(l);
            for k in 0..fan_in * fan_out {
                net.params[w_off + k] = rng.random_range(-bound..=bound) * gain;
            }
        }
        net
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offsets of (weights, biases) of layer `l` in the flat buffer.
    fn layer_offsets(&self, layer: usize) -> (usize, usize) {
        let mut off = 0;
        for l in 0..layer {
            off += self.dims[l] * self.dims[l + 1] + self.dims[l + 1];
        }
        (off, off + self.dims[layer] * self.dims[layer + 1])
    }

    /// Forward pass recording activations; returns the output slice.
    pub fn forward<'t>(&self, input: &[f64], tape: &'t mut Tape) -> &'t [f64] {
        assert_eq!(input.len(), self.input_dim(), "input dimension mismatch");
        let layers = self.dims.len() - 1;
        tape.acts.resize(layers + 1, Vec::new());
        tape.acts[0].clear();
        tape.acts[0].extend_from_slice(input);
        for l in 0..layers {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let (w_off, b_off) = self.layer_offsets(l);
            let (lower, upper) = tape.acts.split_at_mut(l + 1);
            let x = &lower[l];
            let out = &mut upper[0];
            out.clear();
            out.resize(n_out, 0.0);
            for row in 0..n_out {
                let mut acc = self.params[b_off + row];
                let w_row = &self.params[w_off + row * n_in..w_off + (row + 1) * n_in];
                for (wi, xi) in w_row.iter().zip(x.iter()) {
                    acc += wi * xi;
                }
                // Hidden layers are ReLU; the last layer is linear.
                out[row] = if l + 1 < layers { acc.max(0.0) } else { acc };
            }
        }
        tape.acts.last().unwrap()
    }

    /// Reverse-mode gradients of a scalar loss with upstream gradient
    /// `d_out` at the network output, accumulated into `grads` (same layout
    /// as the parameter buffer). Optionally also produces the input
    /// gradient.
    pub fn backward(
        &self,
        tape: &Tape,
        d_out: &[f64],
        grads: &mut [f64],
        mut d_input: Option<&mut [f64]>,
    ) {
        assert_eq!(grads.len(), self.params.len(), "gradient buffer mismatch");
        assert_eq!(d_out.len(), self.output_dim());
        let layers = self.dims.len() - 1;
        let mut delta = d_out.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let (w_off, b_off) = self.layer_offsets(l);
            let x = &tape.acts[l];
            for row in 0..n_out {
                let d = delta[row];
                grads[b_off + row] += d;
                let g_row = &mut grads[w_off + row * n_in..w_off + (row + 1) * n_in];
                for (gi, xi) in g_row.iter_mut().zip(x.iter()) {
                    *gi += d * xi;
                }
            }
            if l > 0 || d_input.is_some() {
                let mut prev = vec![0.0; n_in];
                for row in 0..n_out {
                    let d = delta[row];
                    let w_row = &self.params[w_off + row * n_in..w_off + (row + 1) * n_in];
                    for (pi, wi) in prev.iter_mut().zip(w_row.iter()) {
                        *pi += d * wi;
                    }
                }
                if l > 0 {
                    // ReLU subgradient from the recorded post-activation.
                    for (pi, ai) in prev.iter_mut().zip(tape.acts[l].iter()) {
                        if *ai <= 0.0 {
                            *pi = 0.0;
                        }
                    }
                    delta = prev;
                } else if let Some(di) = d_input.as_deref_mut() {
                    di.copy_from_slice(&prev);
                }
            }
        }
    }
}

pub fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn xavier_bound_formula() {
        // fan_in = fan_out = 3 gives a bound of exactly 1.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::xavier(&[3, 3], &mut rng, 1.0);
        for (i, p) in net.params().iter().enumerate() {
            if i < 9 {
                assert!(p.abs() <= 1.0, "weight {p}");
            } else {
                assert_eq!(*p, 0.0, "bias must start at zero");
            }
        }
    }

    #[test]
    fn xavier_empirical_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = Mlp::xavier(&[256, 256], &mut rng, 1.0);
        let n = 256 * 256;
        let var: f64 = net.params()[..n].iter().map(|w| w * w).sum::<f64>() / n as f64;
        // Variance of U(-b, b) is b²/3 = 2/(fan_in+fan_out).
        let expected = 2.0 / 512.0;
        assert!((var - expected).abs() / expected < 0.10, "variance {var} vs {expected}");
    }

    #[test]
    fn same_seed_identical_parameters() {
        let a = Mlp::xavier(&[8, 16, 4], &mut ChaCha8Rng::seed_from_u64(7), 0.01);
        let b = Mlp::xavier(&[8, 16, 4], &mut ChaCha8Rng::seed_from_u64(7), 0.01);
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn zero_net_maps_to_zero() {
        let net = Mlp::zeros(&[5, 4, 2]);
        let mut tape = Tape::default();
        let out = net.forward(&[0.3, -0.1, 0.7, 0.0, 2.0], &mut tape);
        assert_eq!(out, &[0.0, 0.0]);
    }

    #[test]
    fn relu_positive_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::xavier(&[4, 8], &mut rng, 1.0);
        // Single linear layer: scaling inputs by c > 0 scales outputs by c
        // (biases are zero after init).
        let mut tape = Tape::default();
        let x = [0.2, -0.4, 0.9, 0.1];
        let y1: Vec<f64> = net.forward(&x, &mut tape).to_vec();
        let x3: Vec<f64> = x.iter().map(|v| v * 3.0).collect();
        let y3: Vec<f64> = net.forward(&x3, &mut tape).to_vec();
        for (a, b) in y1.iter().zip(&y3) {
            assert!((3.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_matches_manual_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::xavier(&[3, 4, 2], &mut rng, 1.0);
        let x = [0.5, -1.0, 0.25];
        let mut tape = Tape::default();
        let out = net.forward(&x, &mut tape).to_vec();

        // Independent dense evaluation from the raw parameter buffer.
        let p = net.params();
        let mut hidden = [0.0; 4];
        for r in 0..4 {
            let mut acc = p[12 + r];
            for c in 0..3 {
                acc += p[r * 3 + c] * x[c];
            }
            hidden[r] = acc.max(0.0);
        }
        let w2 = &p[16..];
        for r in 0..2 {
            let mut acc = w2[8 + r];
            for c in 0..4 {
                acc += w2[r * 4 + c] * hidden[c];
            }
            assert!((acc - out[r]).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = Mlp::xavier(&[8, 8, 3], &mut rng, 1.0);
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();

        // Loss: 0.5 * ||out||².
        let mut tape = Tape::default();
        let out = net.forward(&x, &mut tape).to_vec();
        let mut grads = vec![0.0; net.param_count()];
        net.backward(&tape, &out, &mut grads, None);

        let h = 1e-5;
        let mut max_rel: f64 = 0.0;
        for k in 0..net.param_count() {
            let orig = net.params()[k];
            net.params_mut()[k] = orig + h;
            let fp: f64 = {
                let o = net.forward(&x, &mut tape);
                0.5 * o.iter().map(|v| v * v).sum::<f64>()
            };
            net.params_mut()[k] = orig - h;
            let fm: f64 = {
                let o = net.forward(&x, &mut tape);
                0.5 * o.iter().map(|v| v * v).sum::<f64>()
            };
            net.params_mut()[k] = orig;
            let fd = (fp - fm) / (2.0 * h);
            let denom = fd.abs().max(grads[k].abs()).max(1e-8);
            max_rel = max_rel.max((fd - grads[k]).abs() / denom);
        }
        assert!(max_rel < 1e-4, "finite-difference mismatch {max_rel}");
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_parameter_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = Mlp::xavier(&[4, 6, 2], &mut rng, 1.0);
        let mut tape = Tape::default();
        net.forward(&[0.1, 0.2, 0.3, 0.4], &mut tape);
        let mut grads = vec![0.0; net.param_count()];
        net.backward(&tape, &[0.0, 0.0], &mut grads, None);
        assert!(grads.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn final_bias_gradient_equals_output_gradient() {
        // With a linear output layer, d(loss)/d(final bias) is the upstream
        // gradient itself.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = Mlp::xavier(&[3, 5, 2], &mut rng, 1.0);
        let mut tape = Tape::default();
        net.forward(&[0.3, -0.2, 0.8], &mut tape);
        let mut grads = vec![0.0; net.param_count()];
        net.backward(&tape, &[0.7, -1.3], &mut grads, None);
        let n = net.param_count();
        assert!((grads[n - 2] - 0.7).abs() < 1e-15);
        assert!((grads[n - 1] + 1.3).abs() < 1e-15);
    }
}
