//! Dense and highway layers with hand-written backward passes.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Inner product with sixteen independent partial sums, enough to keep
/// several vector accumulators in flight.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 16;
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..LANES {
            acc[k] += x[k] * y[k];
        }
    }
    let mut width = LANES;
    while width > 1 {
        width /= 2;
        for k in 0..width {
            acc[k] += acc[k + width];
        }
    }
    acc[0] + tail
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `y = W x + b` with `W` stored row-major, one row per output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Weights uniform in `±1/sqrt(inputs)`, zero bias.
    pub fn uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        Dense {
            inputs,
            outputs,
            weights: (0..inputs * outputs).map(|_| rng.gen_range(-bound..=bound)).collect(),
            bias: vec![0.0; outputs],
        }
    }

    fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.inputs..(o + 1) * self.inputs]
    }

    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        for (o, y) in out.iter_mut().enumerate() {
            *y = self.bias[o] + dot(self.row(o), x);
        }
    }

    /// Adds the parameter gradients for upstream gradient `dy` at input
    /// `x` into `grad`, and `Wᵀ dy` into `dx` when given.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense, dx: Option<&mut [f64]>) {
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[o] += g;
            let row = &mut grad.weights[o * self.inputs..(o + 1) * self.inputs];
            for (w, xi) in row.iter_mut().zip(x) {
                *w += g * xi;
            }
        }
        if let Some(dx) = dx {
            for (o, &g) in dy.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                for (d, w) in dx.iter_mut().zip(self.row(o)) {
                    *d += g * w;
                }
            }
        }
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 2] {
        [&self.weights, &self.bias]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 2] {
        [&mut self.weights, &mut self.bias]
    }
}

/// `y = g ⊙ relu(W_H x + b_H) + (1 − g) ⊙ x` with gate
/// `g = sigmoid(W_T x + b_T)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Highway {
    pub transform: Dense,
    pub gate: Dense,
}

/// Intermediate values of one highway forward pass.
#[derive(Clone, Debug, Default)]
pub struct HighwayCache {
    h_pre: Vec<f64>,
    h: Vec<f64>,
    g: Vec<f64>,
    pub y: Vec<f64>,
}

impl HighwayCache {
    pub fn new(dim: usize) -> Self {
        HighwayCache {
            h_pre: vec![0.0; dim],
            h: vec![0.0; dim],
            g: vec![0.0; dim],
            y: vec![0.0; dim],
        }
    }
}

impl Highway {
    pub fn new<R: Rng + ?Sized>(dim: usize, gate_bias: f64, rng: &mut R) -> Self {
        let transform = Dense::uniform(dim, dim, rng);
        let mut gate = Dense::uniform(dim, dim, rng);
        gate.bias.iter_mut().for_each(|b| *b = gate_bias);
        Highway { transform, gate }
    }

    pub fn zeros(dim: usize) -> Self {
        Highway {
            transform: Dense::zeros(dim, dim),
            gate: Dense::zeros(dim, dim),
        }
    }

    pub fn forward(&self, x: &[f64], c: &mut HighwayCache) {
        self.transform.forward(x, &mut c.h_pre);
        self.gate.forward(x, &mut c.g);
        for i in 0..x.len() {
            c.h[i] = c.h_pre[i].max(0.0);
            c.g[i] = sigmoid(c.g[i]);
            c.y[i] = c.g[i] * c.h[i] + (1.0 - c.g[i]) * x[i];
        }
    }

    pub fn backward(&self, x: &[f64], c: &HighwayCache, dy: &[f64], grad: &mut Highway, mut dx: Option<&mut [f64]>) {
        let n = x.len();
        let mut dh_pre = vec![0.0; n];
        let mut dt_pre = vec![0.0; n];
        for i in 0..n {
            let g = c.g[i];
            dh_pre[i] = if c.h_pre[i] > 0.0 { dy[i] * g } else { 0.0 };
            dt_pre[i] = dy[i] * (c.h[i] - x[i]) * g * (1.0 - g);
            if let Some(dx) = dx.as_deref_mut() {
                dx[i] += dy[i] * (1.0 - g);
            }
        }
        self.transform
            .backward(x, &dh_pre, &mut grad.transform, dx.as_deref_mut());
        self.gate.backward(x, &dt_pre, &mut grad.gate, dx);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_gate_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = Highway::new(6, -1e6, &mut rng);
        let x: Vec<f64> = (0..6).map(|i| i as f64 * 0.37 - 1.0).collect();
        let mut c = HighwayCache::new(6);
        layer.forward(&x, &mut c);
        assert_eq!(c.y, x);
    }

    #[test]
    fn large_negative_gate_bias_approaches_identity() {
        let rng = ChaCha8Rng::seed_from_u64(2);
        let x = vec![0.5, -0.25, 1.5];
        let mut c = HighwayCache::new(3);
        let mut prev = f64::INFINITY;
        for bias in [-1.0, -5.0, -10.0, -20.0] {
            let layer = Highway::new(3, bias, &mut rng.clone());
            layer.forward(&x, &mut c);
            let gap: f64 = c.y.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
            assert!(gap <= prev);
            prev = gap;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn dense_forward() {
        let d = Dense {
            inputs: 2,
            outputs: 2,
            weights: vec![1.0, 2.0, 3.0, 4.0],
            bias: vec![0.5, -0.5],
        };
        let mut y = [0.0; 2];
        d.forward(&[1.0, -1.0], &mut y);
        assert_eq!(y, [-0.5, -1.5]);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
