//! Synthetic dataset generators.
//!
//! Both generators draw from one seeded stream in a fixed, documented
//! order, so a given (config, seed) always produces bit-identical data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::types::{Dataset, Sample};

/// Two-dimensional two-class data where the negative class mean moves
/// linearly along the first coordinate within each phase.
///
/// The positive class is stationary Gaussian noise around
/// `stationary_mean`; the negative class shares the diagonal covariance
/// `diag(var_x, var_y)` and its mean runs from the first to the second
/// entry of `train_drift` over the training phase (resp. `test_drift` over
/// the test phase). Optionally each sample gets `noise_features` extra
/// uniform [0,1] components, and heavy-tailed Cauchy noise (location 0,
/// scale 0.1, amplitudes clipped to [-10, 10]) added to every component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftGenConfig {
    pub stationary_mean: [f64; 2],
    pub drifting_mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub train_drift: (f64, f64),
    pub test_drift: (f64, f64),
    /// Samples per class per phase.
    pub n_per_class: usize,
    pub noise_features: usize,
    pub cauchy_noise: bool,
    pub seed: u64,
}

impl Default for DriftGenConfig {
    fn default() -> Self {
        DriftGenConfig {
            stationary_mean: [0.0, -0.5],
            drifting_mean_y: 0.5,
            var_x: 1.0,
            var_y: 0.1,
            train_drift: (8.0, 6.0),
            test_drift: (4.0, 2.0),
            n_per_class: 1000,
            noise_features: 0,
            cauchy_noise: false,
            seed: 0,
        }
    }
}

const CAUCHY_SCALE: f64 = 0.1;
const CAUCHY_CLIP: f64 = 10.0;

/// Generates (train, test) drift datasets; the drifting class is -1.
///
/// Per time index the stream draws the positive sample, then the negative
/// one; per sample it draws the two core normals, then the uniform noise
/// features, then (if enabled) one clipped Cauchy amplitude per component.
pub fn gen_drift(cfg: &DriftGenConfig) -> Result<(Dataset, Dataset)> {
    if cfg.n_per_class == 0 {
        return Err(Error::InvalidParam("need at least one sample per class".into()));
    }
    if !(cfg.var_x > 0.0 && cfg.var_y > 0.0) {
        return Err(Error::InvalidParam("variances must be positive".into()));
    }
    let sx = cfg.var_x.sqrt();
    let sy = cfg.var_y.sqrt();
    let mut rng = Stream::new(cfg.seed);

    let mut phase = |drift: (f64, f64)| -> Result<Dataset> {
        let n = cfg.n_per_class;
        let mut samples = Vec::with_capacity(2 * n);
        for i in 0..n {
            let t = if n == 1 {
                drift.0
            } else {
                drift.0 + (drift.1 - drift.0) * i as f64 / (n - 1) as f64
            };
            for (mean, label) in [
                (cfg.stationary_mean, 1),
                ([t, cfg.drifting_mean_y], -1),
            ] {
                let mut features = Vec::with_capacity(2 + cfg.noise_features);
                features.push(mean[0] + sx * rng.normal());
                features.push(mean[1] + sy * rng.normal());
                for _ in 0..cfg.noise_features {
                    features.push(rng.unit());
                }
                if cfg.cauchy_noise {
                    for v in features.iter_mut() {
                        *v += rng.cauchy(0.0, CAUCHY_SCALE).clamp(-CAUCHY_CLIP, CAUCHY_CLIP);
                    }
                }
                samples.push(Sample::new(features, label));
            }
        }
        Dataset::new(samples)
    };

    let train = phase(cfg.train_drift)?;
    let test = phase(cfg.test_drift)?;
    Ok((train, test))
}

/// Two Gaussian classes with distinct means and one shared covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussPairConfig {
    pub mean_pos: [f64; 2],
    pub mean_neg: [f64; 2],
    pub covariance: [[f64; 2]; 2],
    pub n_per_class: usize,
    pub seed: u64,
}

impl Default for GaussPairConfig {
    fn default() -> Self {
        GaussPairConfig {
            mean_pos: [1.0, 1.0],
            mean_neg: [19.0, 13.0],
            covariance: [[17.0, 15.0], [15.0, 17.0]],
            n_per_class: 3000,
            seed: 0,
        }
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite 2x2.
fn cholesky2(m: &[[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    if m[0][1] != m[1][0] {
        return Err(Error::InvalidParam("covariance must be symmetric".into()));
    }
    let a = m[0][0];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !(a > 0.0 && det > 0.0) {
        return Err(Error::InvalidParam(
            "covariance must be positive definite".into(),
        ));
    }
    let l11 = a.sqrt();
    let l21 = m[1][0] / l11;
    let l22 = (m[1][1] - l21 * l21).sqrt();
    Ok([[l11, 0.0], [l21, l22]])
}

/// Generates the positive block followed by the negative block; each sample
/// consumes two stream normals transformed through the Cholesky factor.
pub fn gen_gaussian_pair(cfg: &GaussPairConfig) -> Result<Dataset> {
    if cfg.n_per_class == 0 {
        return Err(Error::InvalidParam("need at least one sample per class".into()));
    }
    let l = cholesky2(&cfg.covariance)?;
    let mut rng = Stream::new(cfg.seed);
    let mut samples = Vec::with_capacity(2 * cfg.n_per_class);
    for (mean, label) in [(cfg.mean_pos, 1), (cfg.mean_neg, -1)] {
        for _ in 0..cfg.n_per_class {
            let z0 = rng.normal();
            let z1 = rng.normal();
            samples.push(Sample::new(
                vec![
                    mean[0] + l[0][0] * z0,
                    mean[1] + l[1][0] * z0 + l[1][1] * z1,
                ],
                label,
            ));
        }
    }
    Dataset::new(samples)
}
