//! Loss functions on the margin variable `xi = 1 - label * score`.
//!
//! The svdd kind is the exception: it penalises a distance exceeding a
//! radius and ignores the label.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    Hinge,
    SquaredHinge,
    Laplacian,
    Gaussian,
    EpsInsensitive { epsilon: f64 },
    Huber { sigma: f64 },
    Polynomial { p: f64 },
    PiecewisePolynomial { p: f64, sigma: f64 },
    /// Large-margin unified machine; kept as the literal two-branch formula
    /// with preconditions a > 0, c >= 0.
    Lum { a: f64, c: f64 },
    ZeroOne,
    Logistic,
    /// Distance-based loss: `score` is a distance from a center, penalised
    /// beyond radius `r`.
    Svdd { r: f64 },
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParam(msg));
        match *self {
            LossSpec::EpsInsensitive { epsilon } => {
                if !(epsilon >= 0.0) || !epsilon.is_finite() {
                    return bad(format!("epsilon must be >= 0, got {epsilon}"));
                }
            }
            LossSpec::Huber { sigma } => {
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return bad(format!("huber sigma must be > 0, got {sigma}"));
                }
            }
            LossSpec::Polynomial { p } => {
                if !(p >= 1.0) || !p.is_finite() {
                    return bad(format!("polynomial order must be >= 1, got {p}"));
                }
            }
            LossSpec::PiecewisePolynomial { p, sigma } => {
                if !(p >= 1.0) || !p.is_finite() {
                    return bad(format!("polynomial order must be >= 1, got {p}"));
                }
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return bad(format!("sigma must be > 0, got {sigma}"));
                }
            }
            LossSpec::Lum { a, c } => {
                if !(a > 0.0) || !a.is_finite() {
                    return bad(format!("lum a must be > 0, got {a}"));
                }
                if !(c >= 0.0) || !c.is_finite() {
                    return bad(format!("lum c must be >= 0, got {c}"));
                }
            }
            LossSpec::Svdd { r } => {
                if !(r >= 0.0) {
                    return bad(format!("svdd radius must be >= 0, got {r}"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Evaluates the loss for a score/label pair.
    pub fn eval(&self, score: f64, label: i32) -> Result<f64> {
        self.validate()?;
        if !score.is_finite() {
            return Err(Error::InvalidParam(format!("score must be finite, got {score}")));
        }
        if label != -1 && label != 1 {
            return Err(Error::InvalidParam(format!("label must be -1 or +1, got {label}")));
        }
        let xi = 1.0 - label as f64 * score;
        Ok(match *self {
            LossSpec::Hinge => xi.max(0.0),
            LossSpec::SquaredHinge => {
                let h = xi.max(0.0);
                h * h
            }
            LossSpec::Laplacian => xi.abs(),
            LossSpec::Gaussian => 0.5 * xi * xi,
            LossSpec::EpsInsensitive { epsilon } => (xi - epsilon).max(-xi - epsilon).max(0.0),
            LossSpec::Huber { sigma } => {
                if xi.abs() <= sigma {
                    xi * xi / (2.0 * sigma)
                } else {
                    xi.abs() - sigma / 2.0
                }
            }
            LossSpec::Polynomial { p } => xi.abs().powf(p) / p,
            LossSpec::PiecewisePolynomial { p, sigma } => {
                if xi.abs() <= sigma {
                    xi.abs().powf(p) / (p * sigma.powf(p - 1.0))
                } else {
                    xi.abs() - sigma * (p - 1.0) / p
                }
            }
            LossSpec::Lum { a, c } => {
                if xi < c / (1.0 + c) {
                    1.0 - xi
                } else {
                    ((a / ((1.0 + c) * xi - c + a)).powf(a)) / (1.0 + c)
                }
            }
            LossSpec::ZeroOne => {
                if xi < 1.0 {
                    0.0
                } else {
                    1.0
                }
            }
            LossSpec::Logistic => (1.0 + (xi - 1.0).exp()).ln(),
            LossSpec::Svdd { r } => (score - r).max(0.0),
        })
    }
}
