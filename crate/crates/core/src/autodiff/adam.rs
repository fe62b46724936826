use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Multiplies the learning rate by `ratio` once `after_step` updates have been applied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDecay {
    pub ratio: f64,
    pub after_step: u64,
}

impl StepDecay {
    /// Single decay at `fraction` of a run of `total_steps` updates.
    pub fn at_fraction(ratio: f64, fraction: f64, total_steps: usize) -> Self {
        Self {
            ratio,
            after_step: (fraction * total_steps as f64).round() as u64,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    config: AdamConfig,
    decay: Option<StepDecay>,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new<'a>(config: AdamConfig, decay: Option<StepDecay>, params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let m: Vec<Tensor> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        let v = m.clone();
        Self {
            config,
            decay,
            m,
            v,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Learning rate that the next update will use.
    pub fn current_lr(&self) -> f64 {
        match self.decay {
            Some(d) if self.step >= d.after_step => self.config.lr * d.ratio,
            _ => self.config.lr,
        }
    }

    /// One bias-corrected Adam update. Nothing is modified when a gradient
    /// contains a non-finite value.
    pub fn update(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::dim(
                "adam",
                format!(
                    "{} params / {} grads for {} moment buffers",
                    params.len(),
                    grads.len(),
                    self.m.len()
                ),
            ));
        }
        for (i, ((p, g), m)) in params.iter().zip(grads).zip(&self.m).enumerate() {
            if p.shape() != m.shape() || g.shape() != m.shape() {
                return Err(Error::dim(
                    "adam",
                    format!(
                        "param {i}: {:?} / grad {:?} / state {:?}",
                        p.shape(),
                        g.shape(),
                        m.shape()
                    ),
                ));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("gradient of parameter {i}"),
                    step: self.step + 1,
                });
            }
        }

        let lr = self.current_lr();
        self.step += 1;
        let AdamConfig { beta1, beta2, eps, .. } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (((p, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(config: AdamConfig, decay: Option<StepDecay>, grad: f64, steps: usize) -> Vec<f64> {
        let mut p = Tensor::scalar(0.0);
        let mut state = AdamState::new(config, decay, [&p]);
        let g = Tensor::scalar(grad);
        let mut trace = vec![0.0];
        for _ in 0..steps {
            state.update(&mut [&mut p], &[&g]).unwrap();
            trace.push(p.data()[0]);
        }
        trace
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let trace = run(AdamConfig::default(), None, 0.0, 50);
        assert!(trace.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = g, v̂ = g², so the step is lr · g / (|g| + ε).
        let config = AdamConfig {
            lr: 0.1,
            ..Default::default()
        };
        let trace = run(config, None, 1.0, 1);
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((trace[1] - expected).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_displacement_tends_to_learning_rate() {
        let config = AdamConfig {
            lr: 0.01,
            ..Default::default()
        };
        let trace = run(config, None, 3.0, 2000);
        let last = trace[2000] - trace[1999];
        assert!((last.abs() - 0.01).abs() < 1e-8, "{last}");
    }

    #[test]
    fn decay_scales_learning_rate_after_scheduled_step() {
        let config = AdamConfig {
            lr: 0.1,
            ..Default::default()
        };
        let decay = StepDecay::at_fraction(0.1, 0.75, 8);
        assert_eq!(decay.after_step, 6);
        let trace = run(config, Some(decay), 1.0, 8);
        let steps: Vec<f64> = trace.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!((steps[5] - 0.1).abs() < 1e-6);
        assert!((steps[6] - 0.01).abs() < 1e-6);
    }

    #[test]
    fn non_finite_gradient_aborts_without_mutation() {
        let mut p = Tensor::vector(vec![1.0, 2.0]);
        let mut state = AdamState::new(AdamConfig::default(), None, [&p]);
        let g = Tensor::vector(vec![0.5, f64::NAN]);
        let err = state.update(&mut [&mut p], &[&g]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { step: 1, .. }));
        assert_eq!(p.data(), &[1.0, 2.0]);
        assert_eq!(state.step_count(), 0);
    }
}
