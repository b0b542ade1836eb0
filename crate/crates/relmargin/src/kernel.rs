//! Kernel functions over feature vectors.

use crate::error::{Error, Result};
use crate::types::dot;
use serde::{Deserialize, Serialize};

/// Supported kernels. The radial kernels evaluate to exactly 1 on identical
/// inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    Polynomial { gamma: f64, bias: f64, degree: u32 },
    Sigmoid { gamma: f64, bias: f64 },
    Rbf { sigma: f64 },
    Laplacian { sigma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { gamma, bias, degree } => {
                if !gamma.is_finite() || !bias.is_finite() {
                    return Err(Error::InvalidParam("polynomial kernel parameters must be finite".into()));
                }
                if degree == 0 {
                    return Err(Error::InvalidParam("polynomial degree must be at least 1".into()));
                }
                Ok(())
            }
            KernelSpec::Sigmoid { gamma, bias } => {
                if !gamma.is_finite() || !bias.is_finite() {
                    return Err(Error::InvalidParam("sigmoid kernel parameters must be finite".into()));
                }
                Ok(())
            }
            KernelSpec::Rbf { sigma } | KernelSpec::Laplacian { sigma } => {
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return Err(Error::InvalidParam(format!(
                        "kernel width must be positive and finite, got {sigma}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Evaluates the kernel; checks dimensions.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
        }
        Ok(self.eval_unchecked(a, b))
    }

    /// Evaluates the kernel without a dimension check. Callers guarantee
    /// equal lengths.
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(a, b),
            KernelSpec::Polynomial { gamma, bias, degree } => {
                (gamma * dot(a, b) + bias).powi(degree as i32)
            }
            KernelSpec::Sigmoid { gamma, bias } => (gamma * dot(a, b) + bias).tanh(),
            KernelSpec::Rbf { sigma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::Laplacian { sigma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2.sqrt() / sigma).exp()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn all_kernels() -> Vec<KernelSpec> {
        vec![
            KernelSpec::Linear,
            KernelSpec::Polynomial { gamma: 0.5, bias: 1.0, degree: 3 },
            KernelSpec::Sigmoid { gamma: 0.1, bias: -0.2 },
            KernelSpec::Rbf { sigma: 1.3 },
            KernelSpec::Laplacian { sigma: 0.7 },
        ]
    }

    #[test]
    fn symmetry_on_random_pairs() {
        let mut rng = Stream::new(42);
        for spec in all_kernels() {
            for _ in 0..1000 {
                let a: Vec<f64> = (0..5).map(|_| rng.uniform(-3.0, 3.0)).collect();
                let b: Vec<f64> = (0..5).map(|_| rng.uniform(-3.0, 3.0)).collect();
                let kab = spec.eval(&a, &b).unwrap();
                let kba = spec.eval(&b, &a).unwrap();
                assert_eq!(kab, kba, "{spec:?} not symmetric");
            }
        }
    }

    #[test]
    fn radial_kernels_are_one_on_identical_inputs() {
        let mut rng = Stream::new(7);
        for _ in 0..100 {
            let a: Vec<f64> = (0..4).map(|_| rng.uniform(-10.0, 10.0)).collect();
            for spec in [KernelSpec::Rbf { sigma: 2.0 }, KernelSpec::Laplacian { sigma: 0.5 }] {
                assert_eq!(spec.eval(&a, &a).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn linear_matches_dot_product() {
        let k = KernelSpec::Linear;
        assert_eq!(k.eval(&[1.0, 2.0], &[3.0, -1.0]).unwrap(), 1.0);
    }

    #[test]
    fn polynomial_hand_value() {
        let k = KernelSpec::Polynomial { gamma: 2.0, bias: 1.0, degree: 2 };
        // (2 * 3 + 1)^2 = 49
        assert_eq!(k.eval(&[1.0, 1.0], &[1.0, 2.0]).unwrap(), 49.0);
    }

    #[test]
    fn sigmoid_hand_value() {
        let k = KernelSpec::Sigmoid { gamma: 1.0, bias: 0.0 };
        let v = k.eval(&[0.5], &[1.0]).unwrap();
        assert!((v - 0.5f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn rbf_hand_value() {
        let k = KernelSpec::Rbf { sigma: 1.0 };
        let v = k.eval(&[0.0], &[2.0]).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn laplacian_hand_value() {
        let k = KernelSpec::Laplacian { sigma: 2.0 };
        let v = k.eval(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((v - (-2.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let k = KernelSpec::Linear;
        assert!(k.eval(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn validation_catches_bad_widths() {
        assert!(KernelSpec::Rbf { sigma: 0.0 }.validate().is_err());
        assert!(KernelSpec::Laplacian { sigma: -1.0 }.validate().is_err());
        assert!(KernelSpec::Polynomial { gamma: 1.0, bias: 0.0, degree: 0 }.validate().is_err());
        assert!(KernelSpec::Rbf { sigma: 1.0 }.validate().is_ok());
    }

    #[test]
    fn serde_round_trip() {
        for spec in all_kernels() {
            let s = toml::to_string(&spec).unwrap();
            let back: KernelSpec = toml::from_str(&s).unwrap();
            assert_eq!(spec, back);
        }
    }
}
