//! Mini-batch training with Adam.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{Input, Network, NetworkConfig};
use crate::data::Label;
use crate::error::{Error, Result};
use crate::features::{FeatureLayout, FeatureVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub hidden: usize,
    pub seed: u64,
    pub calibration_epochs: usize,
    pub calibration_learning_rate: f64,
    /// Calibrated error probability at or above which a cell is flagged.
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 5,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            hidden: 64,
            seed: 0,
            calibration_epochs: 100,
            calibration_learning_rate: 0.05,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "threshold must be in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// Adam over a list of parameter tensors.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, epsilon: f64, shapes: &[usize]) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            epsilon,
            t: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        // lr * (m / c1) / (sqrt(v / c2) + eps), with the corrections folded
        // into the step size and epsilon
        let lr = self.lr * c2.sqrt() / c1;
        let eps = self.epsilon * c2.sqrt();
        let (b1, b2) = (self.beta1, self.beta2);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * *m / (v.sqrt() + eps);
            }
        }
    }
}

/// One labeled training example.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub features: FeatureVector,
    pub label: Label,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Mean loss over the examples seen in each epoch, before updates.
    pub epoch_loss: Vec<f64>,
    pub examples: usize,
    pub errors: usize,
}

/// Trains a fresh network on `examples`. Inputs are standardized with
/// statistics of these examples, which the network keeps.
pub fn train(layout: &FeatureLayout, examples: &[Example], config: &TrainConfig) -> Result<(Network, TrainReport)> {
    config.validate()?;
    let errors = examples.iter().filter(|e| e.label == Label::Error).count();
    if errors == 0 {
        return Err(Error::SingleClass("correct"));
    }
    if errors == examples.len() {
        return Err(Error::SingleClass("error"));
    }
    let mut net = Network::new(
        layout,
        &NetworkConfig {
            hidden: config.hidden,
            seed: config.seed,
            ..NetworkConfig::default()
        },
    );
    let refs: Vec<&FeatureVector> = examples.iter().map(|e| &e.features).collect();
    net.normalizer = super::network::Normalizer::fit(layout, &refs);
    let data: Vec<(Input, Label)> = examples
        .iter()
        .map(|e| Ok((net.prepare(&e.features)?, e.label)))
        .collect::<Result<_>>()?;

    let shapes: Vec<usize> = net.tensors().iter().map(|t| t.len()).collect();
    let mut adam = Adam::new(
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.epsilon,
        &shapes,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut ws = net.workspace();
    let mut grad = net.zeros_like();
    let mut report = TrainReport {
        epoch_loss: Vec::with_capacity(config.epochs),
        examples: examples.len(),
        errors,
    };

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            for t in grad.tensors_mut() {
                t.iter_mut().for_each(|x| *x = 0.0);
            }
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (x, y) = &data[i];
                total += net.accumulate(x, *y, scale, &mut ws, &mut grad);
            }
            adam.step(net.tensors_mut(), grad.tensors());
        }
        report.epoch_loss.push(total / data.len() as f64);
    }
    Ok((net, report))
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

    /// 20 examples separable on the first wide column.
    fn separable() -> Vec<Example> {
        let l = layout();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        (0..20)
            .map(|i| {
                let error = i % 4 == 0;
                let mut wide: Vec<f64> = (0..l.wide_dim()).map(|_| rng.gen_range(0.2..0.8)).collect();
                wide[0] = if error {
                    rng.gen_range(1e-6..1e-5)
                } else {
                    rng.gen_range(0.1..1.0)
                };
                Example {
                    features: FeatureVector {
                        wide,
                        deep: (0..l.deep_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    },
                    label: if error { Label::Error } else { Label::Correct },
                }
            })
            .collect()
    }

    fn prepared(net: &Network, ex: &[Example]) -> Vec<(Input, Label)> {
        ex.iter()
            .map(|e| (net.prepare(&e.features).unwrap(), e.label))
            .collect()
    }

    #[test]
    fn loss_drops_by_ninety_percent() {
        let ex = separable();
        let config = TrainConfig::default();
        let (net, report) = train(&layout(), &ex, &config).unwrap();
        let mut untrained = Network::new(
            &layout(),
            &NetworkConfig {
                hidden: config.hidden,
                seed: config.seed,
                ..NetworkConfig::default()
            },
        );
        untrained.normalizer = net.normalizer.clone();
        let before = untrained.mean_loss(&prepared(&untrained, &ex));
        let after = net.mean_loss(&prepared(&net, &ex));
        assert!(after <= 0.1 * before, "before {before} after {after}");
        assert_eq!(report.epoch_loss.len(), 500);
        // every training example is classified as labeled
        for e in &ex {
            let p = net.forward(&e.features).unwrap().probs;
            assert_eq!(usize::from(p[1] > p[0]), e.label.class());
        }
    }

    #[test]
    fn training_is_deterministic() {
        let ex = separable();
        let config = TrainConfig {
            epochs: 20,
            ..TrainConfig::default()
        };
        let (a, ra) = train(&layout(), &ex, &config).unwrap();
        let (b, rb) = train(&layout(), &ex, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn single_class_is_rejected() {
        let ex: Vec<Example> = separable().into_iter().filter(|e| e.label == Label::Correct).collect();
        assert!(matches!(
            train(&layout(), &ex, &TrainConfig::default()),
            Err(Error::SingleClass(_))
        ));
    }

    #[test]
    fn duplicated_examples_keep_the_mean_loss() {
        let ex = separable();
        let net = Network::new(&layout(), &NetworkConfig::default());
        let once = prepared(&net, &ex);
        let mut twice = once.clone();
        twice.extend(once.iter().cloned());
        assert!((net.mean_loss(&once) - net.mean_loss(&twice)).abs() < 1e-12);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut p = vec![1.0, -1.0];
        let mut adam = Adam::new(0.1, 0.9, 0.999, 1e-8, &[2]);
        adam.step(vec![&mut p], vec![&[3.0, -0.5]]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-6);
    }
}
