use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;

/// Fixed random Fourier features of a scalar time coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RffEncoder {
    frequencies: Vec<f64>,
}

impl RffEncoder {
    /// Draws `size` frequencies from `N(0, variance)`.
    pub fn sample<R: Rng + ?Sized>(size: usize, variance: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, variance.sqrt()).expect("variance must be non-negative");
        Self {
            frequencies: (0..size).map(|_| normal.sample(rng)).collect(),
        }
    }

    pub fn from_frequencies(frequencies: Vec<f64>) -> Self {
        Self { frequencies }
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Width of the encoding: one sine and one cosine per frequency.
    pub fn output_dim(&self) -> usize {
        2 * self.frequencies.len()
    }

    /// `[sin 2πBt, cos 2πBt]`.
    pub fn encode(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim()];
        self.encode_into(t, &mut out);
        out
    }

    fn encode_into(&self, t: f64, out: &mut [f64]) {
        let m = self.frequencies.len();
        for (k, &b) in self.frequencies.iter().enumerate() {
            let (s, c) = (TAU * b * t).sin_cos();
            out[k] = s;
            out[m + k] = c;
        }
    }

    /// One encoded row per time, `[times.len() × 2m]`.
    pub fn encode_batch(&self, times: &[f64]) -> Tensor {
        let d = self.output_dim();
        let mut data = vec![0.0; times.len() * d];
        for (row, &t) in data.chunks_exact_mut(d.max(1)).zip(times) {
            self.encode_into(t, row);
        }
        Tensor::new(vec![times.len(), d], data).expect("shape matches buffer")
    }
}
