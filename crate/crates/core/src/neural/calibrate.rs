//! Platt scaling of the network's error margin on held-out examples.

use serde::{Deserialize, Serialize};

use super::layers::sigmoid;
use super::train::Adam;

/// Smallest distance kept between a calibrated probability and 0 or 1.
const PROBABILITY_MARGIN: f64 = 1e-12;

/// `q̂ = sigmoid(a z + b)` for an error margin `z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibrator {
    pub a: f64,
    pub b: f64,
    /// False when the holdout lacked a class and the identity was kept.
    pub fitted: bool,
}

impl Default for Calibrator {
    fn default() -> Self {
        Calibrator::identity()
    }
}

impl Calibrator {
    pub fn identity() -> Self {
        Calibrator {
            a: 1.0,
            b: 0.0,
            fitted: false,
        }
    }

    /// Calibrated error probability, kept strictly inside (0, 1).
    pub fn probability(&self, z: f64) -> f64 {
        sigmoid(self.a * z + self.b).clamp(PROBABILITY_MARGIN, 1.0 - PROBABILITY_MARGIN)
    }

    /// Fits `(a, b)` by full-batch Adam on the negative log-likelihood,
    /// starting from the identity. Falls back to the identity when either
    /// class is missing.
    pub fn fit(margins: &[f64], is_error: &[bool], epochs: usize, learning_rate: f64) -> Self {
        let positives = is_error.iter().filter(|&&e| e).count();
        if margins.is_empty() || positives == 0 || positives == is_error.len() {
            log::warn!(
                "holdout has {positives} errors among {} cells; keeping uncalibrated scores",
                is_error.len()
            );
            return Calibrator::identity();
        }
        let mut params = [1.0, 0.0];
        let mut adam = Adam::new(learning_rate, 0.9, 0.999, 1e-8, &[2]);
        let n = margins.len() as f64;
        for _ in 0..epochs {
            let mut g = [0.0, 0.0];
            for (&z, &y) in margins.iter().zip(is_error) {
                let q = sigmoid(params[0] * z + params[1]);
                let r = q - f64::from(u8::from(y));
                g[0] += r * z / n;
                g[1] += r / n;
            }
            adam.step(vec![&mut params], vec![&g]);
        }
        Calibrator {
            a: params[0],
            b: params[1],
            fitted: true,
        }
    }

    /// Mean negative log-likelihood on labeled margins.
    pub fn nll(&self, margins: &[f64], is_error: &[bool]) -> f64 {
        let total: f64 = margins
            .iter()
            .zip(is_error)
            .map(|(&z, &y)| {
                let q = self.probability(z);
                if y {
                    -q.ln()
                } else {
                    -(1.0 - q).ln()
                }
            })
            .sum();
        total / margins.len().max(1) as f64
    }
}
