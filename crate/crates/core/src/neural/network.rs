//! Wide-and-deep classifier: four highway pathways reduce the embedding
//! inputs to one scalar each; the scalars join the wide features in a
//! two-layer ReLU network with a softmax over {correct, error}.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{Dense, Highway, HighwayCache};
use crate::data::Label;
use crate::error::{Error, Result};
use crate::features::{FeatureLayout, FeatureVector, Scale, DEEP_INPUTS};

pub const HIGHWAY_LAYERS: usize = 2;

/// Highway layers followed by a dense reduction to one scalar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pathway {
    pub layers: Vec<Highway>,
    pub reduce: Dense,
}

#[derive(Clone, Debug)]
struct PathwayCache {
    layers: Vec<HighwayCache>,
}

impl Pathway {
    fn new(dim: usize, gate_bias: f64, rng: &mut ChaCha8Rng) -> Self {
        Pathway {
            layers: (0..HIGHWAY_LAYERS).map(|_| Highway::new(dim, gate_bias, rng)).collect(),
            reduce: Dense::uniform(dim, 1, rng),
        }
    }

    fn zeros(dim: usize) -> Self {
        Pathway {
            layers: (0..HIGHWAY_LAYERS).map(|_| Highway::zeros(dim)).collect(),
            reduce: Dense::zeros(dim, 1),
        }
    }

    fn forward(&self, x: &[f64], c: &mut PathwayCache) -> f64 {
        for (i, layer) in self.layers.iter().enumerate() {
            let (done, rest) = c.layers.split_at_mut(i);
            let input = if i == 0 { x } else { &done[i - 1].y };
            layer.forward(input, &mut rest[0]);
        }
        let mut s = [0.0];
        self.reduce.forward(&c.layers[HIGHWAY_LAYERS - 1].y, &mut s);
        s[0]
    }

    fn backward(&self, x: &[f64], c: &PathwayCache, ds: f64, grad: &mut Pathway) {
        let top = &c.layers[HIGHWAY_LAYERS - 1].y;
        let mut dy = vec![0.0; x.len()];
        self.reduce.backward(top, &[ds], &mut grad.reduce, Some(&mut dy));
        for i in (0..HIGHWAY_LAYERS).rev() {
            let input = if i == 0 { x } else { &c.layers[i - 1].y };
            if i == 0 {
                // embeddings are frozen, so no gradient below the first layer
                self.layers[i].backward(input, &c.layers[i], &dy, &mut grad.layers[i], None);
            } else {
                let mut dx = vec![0.0; x.len()];
                self.layers[i].backward(input, &c.layers[i], &dy, &mut grad.layers[i], Some(&mut dx));
                dy = dx;
            }
        }
    }
}

/// Fixed input transform: per-column scale, then standardization with
/// statistics of the training examples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    scales: Vec<Scale>,
    wide_mean: Vec<f64>,
    wide_std: Vec<f64>,
    deep_mean: Vec<f64>,
    deep_std: Vec<f64>,
}

fn mean_std(columns: usize, rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len().max(1) as f64;
    let mut mean = vec![0.0; columns];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; columns];
    for r in rows {
        for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let std = var
        .into_iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s < 1e-12 {
                1.0
            } else {
                s
            }
        })
        .collect();
    (mean, std)
}

impl Normalizer {
    pub fn identity(layout: &FeatureLayout) -> Self {
        Normalizer {
            scales: vec![Scale::Identity; layout.wide_dim()],
            wide_mean: vec![0.0; layout.wide_dim()],
            wide_std: vec![1.0; layout.wide_dim()],
            deep_mean: vec![0.0; layout.deep_dim()],
            deep_std: vec![1.0; layout.deep_dim()],
        }
    }

    pub fn fit(layout: &FeatureLayout, examples: &[&FeatureVector]) -> Self {
        let scales = layout.scales();
        let wide: Vec<Vec<f64>> = examples
            .iter()
            .map(|f| f.wide.iter().zip(&scales).map(|(x, s)| s.apply(*x)).collect())
            .collect();
        let deep: Vec<Vec<f64>> = examples
            .iter()
            .map(|f| f.deep.iter().map(|&x| f64::from(x)).collect())
            .collect();
        let (wide_mean, wide_std) = mean_std(layout.wide_dim(), &wide);
        let (deep_mean, deep_std) = mean_std(layout.deep_dim(), &deep);
        Normalizer {
            scales,
            wide_mean,
            wide_std,
            deep_mean,
            deep_std,
        }
    }

    pub fn apply(&self, f: &FeatureVector) -> Input {
        Input {
            wide: f
                .wide
                .iter()
                .enumerate()
                .map(|(i, &x)| (self.scales[i].apply(x) - self.wide_mean[i]) / self.wide_std[i])
                .collect(),
            deep: f
                .deep
                .iter()
                .enumerate()
                .map(|(i, &x)| (f64::from(x) - self.deep_mean[i]) / self.deep_std[i])
                .collect(),
        }
    }
}

/// Normalized network input.
#[derive(Clone, Debug, PartialEq)]
pub struct Input {
    pub wide: Vec<f64>,
    pub deep: Vec<f64>,
}

/// Output of one forward pass; index 0 is "correct", 1 is "error".
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Output {
    pub logits: [f64; 2],
    pub probs: [f64; 2],
}

impl Output {
    /// Error logit relative to the correct logit; the score calibrated by
    /// Platt scaling.
    pub fn margin(&self) -> f64 {
        self.logits[1] - self.logits[0]
    }
}

pub fn softmax(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let z = e[0] + e[1];
    [e[0] / z, e[1] / z]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub hidden: usize,
    pub gate_bias: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden: 64,
            gate_bias: -1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    wide_dim: usize,
    dims: usize,
    pub pathways: Vec<Pathway>,
    pub hidden: Dense,
    pub output: Dense,
    pub normalizer: Normalizer,
}

/// Scratch buffers for one forward/backward pass.
#[derive(Clone, Debug)]
pub struct Workspace {
    pathways: Vec<PathwayCache>,
    joint: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
    logits: [f64; 2],
}

impl Network {
    pub fn new(layout: &FeatureLayout, config: &NetworkConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let dims = layout.embedding_dims;
        let pathways = (0..DEEP_INPUTS)
            .map(|_| Pathway::new(dims, config.gate_bias, &mut rng))
            .collect();
        let joint = layout.wide_dim() + DEEP_INPUTS;
        Network {
            wide_dim: layout.wide_dim(),
            dims,
            pathways,
            hidden: Dense::uniform(joint, config.hidden, &mut rng),
            output: Dense::uniform(config.hidden, 2, &mut rng),
            normalizer: Normalizer::identity(layout),
        }
    }

    /// All weights and biases zero.
    pub fn zeros(layout: &FeatureLayout, hidden: usize) -> Self {
        let dims = layout.embedding_dims;
        let joint = layout.wide_dim() + DEEP_INPUTS;
        Network {
            wide_dim: layout.wide_dim(),
            dims,
            pathways: (0..DEEP_INPUTS).map(|_| Pathway::zeros(dims)).collect(),
            hidden: Dense::zeros(joint, hidden),
            output: Dense::zeros(hidden, 2),
            normalizer: Normalizer::identity(layout),
        }
    }

    /// A network of the same shape with every parameter zero, used to
    /// accumulate gradients.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.iter_mut().for_each(|x| *x = 0.0);
        }
        z
    }

    pub fn wide_dim(&self) -> usize {
        self.wide_dim
    }

    pub fn embedding_dims(&self) -> usize {
        self.dims
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden.outputs
    }

    /// Every parameter tensor in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for p in &self.pathways {
            for l in &p.layers {
                out.extend(l.transform.tensors());
                out.extend(l.gate.tensors());
            }
            out.extend(p.reduce.tensors());
        }
        out.extend(self.hidden.tensors());
        out.extend(self.output.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for p in &mut self.pathways {
            for l in &mut p.layers {
                out.extend(l.transform.tensors_mut());
                out.extend(l.gate.tensors_mut());
            }
            out.extend(p.reduce.tensors_mut());
        }
        out.extend(self.hidden.tensors_mut());
        out.extend(self.output.tensors_mut());
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn workspace(&self) -> Workspace {
        let h = self.hidden.outputs;
        Workspace {
            pathways: (0..DEEP_INPUTS)
                .map(|_| PathwayCache {
                    layers: (0..HIGHWAY_LAYERS).map(|_| HighwayCache::new(self.dims)).collect(),
                })
                .collect(),
            joint: vec![0.0; self.wide_dim + DEEP_INPUTS],
            pre: vec![0.0; h],
            act: vec![0.0; h],
            logits: [0.0; 2],
        }
    }

    fn check(&self, f: &FeatureVector) -> Result<()> {
        if f.wide.len() != self.wide_dim {
            return Err(Error::Dimension {
                expected: self.wide_dim,
                found: f.wide.len(),
            });
        }
        if f.deep.len() != DEEP_INPUTS * self.dims {
            return Err(Error::Dimension {
                expected: DEEP_INPUTS * self.dims,
                found: f.deep.len(),
            });
        }
        Ok(())
    }

    pub fn prepare(&self, f: &FeatureVector) -> Result<Input> {
        self.check(f)?;
        Ok(self.normalizer.apply(f))
    }

    /// Forward pass on raw features.
    pub fn forward(&self, f: &FeatureVector) -> Result<Output> {
        let input = self.prepare(f)?;
        let mut ws = self.workspace();
        Ok(self.forward_input(&input, &mut ws))
    }

    /// Forward pass on an already normalized input.
    pub fn forward_input(&self, input: &Input, ws: &mut Workspace) -> Output {
        let d = self.dims;
        ws.joint[..self.wide_dim].copy_from_slice(&input.wide);
        for (k, p) in self.pathways.iter().enumerate() {
            ws.joint[self.wide_dim + k] = p.forward(&input.deep[k * d..(k + 1) * d], &mut ws.pathways[k]);
        }
        self.hidden.forward(&ws.joint, &mut ws.pre);
        for (a, &z) in ws.act.iter_mut().zip(&ws.pre) {
            *a = z.max(0.0);
        }
        let mut logits = [0.0; 2];
        self.output.forward(&ws.act, &mut logits);
        ws.logits = logits;
        Output {
            logits,
            probs: softmax(logits),
        }
    }

    /// Cross-entropy loss of one example; adds `scale` times its gradient
    /// into `grad`.
    pub fn accumulate(&self, input: &Input, label: Label, scale: f64, ws: &mut Workspace, grad: &mut Network) -> f64 {
        let out = self.forward_input(input, ws);
        let y = label.class();
        let loss = -out.probs[y].max(1e-300).ln();
        let mut dlogits = out.probs;
        dlogits[y] -= 1.0;
        dlogits.iter_mut().for_each(|g| *g *= scale);

        let mut dact = vec![0.0; ws.act.len()];
        self.output
            .backward(&ws.act, &dlogits, &mut grad.output, Some(&mut dact));
        for (g, &z) in dact.iter_mut().zip(&ws.pre) {
            if z <= 0.0 {
                *g = 0.0;
            }
        }
        let mut djoint = vec![0.0; ws.joint.len()];
        self.hidden
            .backward(&ws.joint, &dact, &mut grad.hidden, Some(&mut djoint));
        let d = self.dims;
        for (k, p) in self.pathways.iter().enumerate() {
            let ds = djoint[self.wide_dim + k];
            p.backward(
                &input.deep[k * d..(k + 1) * d],
                &ws.pathways[k],
                ds,
                &mut grad.pathways[k],
            );
        }
        loss
    }

    /// Mean loss over examples.
    pub fn mean_loss(&self, examples: &[(Input, Label)]) -> f64 {
        let mut ws = self.workspace();
        let total: f64 = examples
            .iter()
            .map(|(x, y)| -self.forward_input(x, &mut ws).probs[y.class()].max(1e-300).ln())
            .sum();
        total / examples.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn layout() -> FeatureLayout {
        FeatureLayout {
            num_attributes: 2,
            num_constraints: 1,
            embedding_dims: 4,
        }
    }

    fn random_features(rng: &mut ChaCha8Rng, l: &FeatureLayout) -> FeatureVector {
        FeatureVector {
            wide: (0..l.wide_dim()).map(|_| rng.gen_range(0.01..1.0)).collect(),
            deep: (0..l.deep_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn zero_network_is_indifferent() {
        let l = layout();
        let net = Network::zeros(&l, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = net.forward(&random_features(&mut rng, &l)).unwrap();
        assert_eq!(out.probs, [0.5, 0.5]);
    }

    #[test]
    fn softmax_normalizes() {
        let l = layout();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for seed in 0..20 {
            let net = Network::new(
                &l,
                &NetworkConfig {
                    seed,
                    ..NetworkConfig::default()
                },
            );
            let out = net.forward(&random_features(&mut rng, &l)).unwrap();
            assert!(out.probs.iter().all(|&p| p > 0.0));
            assert!((out.probs[0] + out.probs[1] - 1.0).abs() < 1e-12);
        }
        let p = softmax([800.0, -800.0]);
        assert!(p[0] == 1.0 && p[1] >= 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let l = layout();
        let net = Network::new(&l, &NetworkConfig::default());
        let bad = FeatureVector {
            wide: vec![0.0; 3],
            deep: vec![0.0; l.deep_dim()],
        };
        assert!(matches!(
            net.forward(&bad),
            Err(Error::Dimension { expected: 8, found: 3 })
        ));
    }

    /// Every analytic gradient against central differences of the mean
    /// loss over a 5-example batch.
    #[test]
    fn gradients_match_finite_differences() {
        let l = layout();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = Network::new(
            &l,
            &NetworkConfig {
                hidden: 6,
                seed: 9,
                ..NetworkConfig::default()
            },
        );
        // open gates partially so both highway branches carry gradient
        for p in &mut net.pathways {
            for layer in &mut p.layers {
                layer.gate.bias.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
                layer
                    .transform
                    .bias
                    .iter_mut()
                    .for_each(|b| *b = rng.gen_range(-0.5..0.5));
            }
        }
        let batch: Vec<(Input, Label)> = (0..5)
            .map(|i| {
                let f = random_features(&mut rng, &l);
                let y = if i % 2 == 0 { Label::Error } else { Label::Correct };
                (net.prepare(&f).unwrap(), y)
            })
            .collect();

        let mut grad = net.zeros_like();
        let mut ws = net.workspace();
        for (x, y) in &batch {
            net.accumulate(x, *y, 1.0 / 5.0, &mut ws, &mut grad);
        }
        let analytic: Vec<f64> = grad.tensors().concat();

        let h = 1e-6;
        let mut k = 0;
        let tensors = net.tensors().len();
        let mut checked = 0;
        for t in 0..tensors {
            let len = net.tensors()[t].len();
            for i in 0..len {
                let orig = net.tensors()[t][i];
                net.tensors_mut()[t][i] = orig + h;
                let up = net.mean_loss(&batch);
                net.tensors_mut()[t][i] = orig - h;
                let down = net.mean_loss(&batch);
                net.tensors_mut()[t][i] = orig;
                let numeric = (up - down) / (2.0 * h);
                let a = analytic[k];
                let tol = 1e-4 * a.abs().max(numeric.abs()) + 1e-6;
                assert!(
                    (a - numeric).abs() <= tol,
                    "tensor {t} index {i}: analytic {a} numeric {numeric}"
                );
                k += 1;
                checked += 1;
            }
        }
        assert_eq!(checked, net.num_parameters());
    }
}
