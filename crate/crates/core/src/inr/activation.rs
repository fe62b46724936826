use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::trig::sin_cos;
use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};

/// Nonlinearity applied after each hidden affine map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    /// Real Gabor wavelet `cos(ω₀x)·exp(−(s₀x)²)`.
    GaborWire {
        omega: f64,
        scale: f64,
    },
    Gauss {
        scale: f64,
    },
    Sine {
        omega: f64,
    },
    Gelu,
    Linear,
}

impl ActivationKind {
    pub const fn wire() -> Self {
        ActivationKind::GaborWire {
            omega: 100.0,
            scale: 10.0,
        }
    }

    /// Wavelet parameters used for inpainting.
    pub const fn wire_inpainting() -> Self {
        ActivationKind::GaborWire {
            omega: 50.0,
            scale: 5.0,
        }
    }

    pub const fn gauss() -> Self {
        ActivationKind::Gauss { scale: 10.0 }
    }

    pub const fn sine() -> Self {
        ActivationKind::Sine { omega: 30.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ActivationKind::GaborWire { omega, scale } => omega > 0.0 && scale > 0.0,
            ActivationKind::Gauss { scale } => scale > 0.0,
            ActivationKind::Sine { omega } => omega > 0.0,
            ActivationKind::Gelu | ActivationKind::Linear => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("activation parameters must be positive: {self}")))
        }
    }

    /// Short name used in reports and on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::GaborWire { .. } => "wire",
            ActivationKind::Gauss { .. } => "gauss",
            ActivationKind::Sine { .. } => "sine",
            ActivationKind::Gelu => "gelu",
            ActivationKind::Linear => "linear",
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ActivationKind::GaborWire { omega, scale } => gabor(x, omega, scale),
            ActivationKind::Gauss { scale } => gauss(x, scale),
            ActivationKind::Sine { omega } => sine(x, omega),
            ActivationKind::Gelu => gelu(x),
            ActivationKind::Linear => x,
        }
    }

    /// Value and first derivative at `x`.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        match *self {
            ActivationKind::GaborWire { omega, scale } => {
                let (s, c) = sin_cos(omega * x);
                let e = (-(scale * x) * (scale * x)).exp();
                (c * e, -e * (omega * s + 2.0 * scale * scale * x * c))
            }
            ActivationKind::Gauss { scale } => {
                let e = (-(scale * x) * (scale * x)).exp();
                (e, -2.0 * scale * scale * x * e)
            }
            ActivationKind::Sine { omega } => {
                let (s, c) = sin_cos(omega * x);
                (s, omega * c)
            }
            ActivationKind::Gelu => {
                let cdf = 0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2));
                let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
                (x * cdf, cdf + x * pdf)
            }
            ActivationKind::Linear => (x, 1.0),
        }
    }

    pub fn apply(&self, g: &mut Graph, x: Var) -> Result<Var> {
        if *self == ActivationKind::Linear {
            return Ok(x);
        }
        let kind = *self;
        g.pointwise(x, move |v| kind.eval_with_derivative(v))
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ActivationKind::GaborWire { omega, scale } => write!(f, "wire(omega={omega}, scale={scale})"),
            ActivationKind::Gauss { scale } => write!(f, "gauss(scale={scale})"),
            ActivationKind::Sine { omega } => write!(f, "sine(omega={omega})"),
            ActivationKind::Gelu => f.write_str("gelu"),
            ActivationKind::Linear => f.write_str("linear"),
        }
    }
}

pub fn gabor(x: f64, omega: f64, scale: f64) -> f64 {
    sin_cos(omega * x).1 * (-(scale * x) * (scale * x)).exp()
}

pub fn gauss(x: f64, scale: f64) -> f64 {
    (-(scale * x) * (scale * x)).exp()
}

pub fn sine(x: f64, omega: f64) -> f64 {
    sin_cos(omega * x).0
}

/// Exact GeLU, `x·Φ(x)`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gabor_examples() {
        assert_eq!(gabor(0.0, 100.0, 10.0), 1.0);
        assert!(gabor(PI / 200.0, 100.0, 10.0).abs() < 1e-15);
        assert!(gabor(1.0, 100.0, 10.0).abs() <= (-100.0f64).exp());
        assert!(gabor(-1.0, 100.0, 10.0).abs() <= (-100.0f64).exp());
    }

    #[test]
    fn gauss_sine_gelu_examples() {
        assert_eq!(gauss(0.0, 10.0), 1.0);
        assert_eq!(gauss(0.3, 10.0), gauss(-0.3, 10.0));
        assert_eq!(sine(0.0, 30.0), 0.0);
        let period = 2.0 * PI / 30.0;
        assert!((sine(0.17 + period, 30.0) - sine(0.17, 30.0)).abs() < 1e-12);
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(10.0) - 10.0).abs() < 1e-12);
        assert!(gelu(-10.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ActivationKind::GaborWire { omega: 0.0, scale: 1.0 }.validate().is_err());
        assert!(ActivationKind::Gauss { scale: -1.0 }.validate().is_err());
        assert!(ActivationKind::wire().validate().is_ok());
    }

    proptest! {
        #[test]
        fn compact_support_envelope(x in -2.0f64..2.0, scale in 0.5f64..20.0, omega in 1.0f64..200.0) {
            let envelope = gauss(x, scale);
            prop_assert!(gabor(x, omega, scale).abs() <= envelope + 1e-300);
            prop_assert!(gauss(x, scale) <= envelope);
        }

        #[test]
        fn derivative_matches_central_difference(x in -0.5f64..0.5) {
            let h = 1e-6;
            for kind in [ActivationKind::wire(), ActivationKind::gauss(), ActivationKind::sine(), ActivationKind::Gelu] {
                let (_, d) = kind.eval_with_derivative(x);
                let fd = (kind.eval(x + h) - kind.eval(x - h)) / (2.0 * h);
                let tol = 1e-5 * (1.0 + d.abs());
                prop_assert!((d - fd).abs() < tol, "{kind}: {d} vs {fd}");
            }
        }
    }
}
