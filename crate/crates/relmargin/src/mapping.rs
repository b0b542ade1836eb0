//! Analytic parameter mappings between the bounded-score machine, support
//! vector regression, and kernel-width limits.
//!
//! The regression view treats the two margin hyperplanes at 1 and R as an
//! insensitivity tube of half-width epsilon around (1+R)/2 after rescaling;
//! the maps below convert hyperparameters between the two forms.

use crate::error::{Error, Result};

/// Jointly populated parameter bundle for the mapping family. `nu` and
/// `rho` belong to the one-class scaling maps and default to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingParams {
    pub epsilon: f64,
    pub c_svr: f64,
    pub c_brmm: f64,
    pub r_brmm: f64,
    pub nu: f64,
    pub rho: f64,
}

impl MappingParams {
    pub fn from_brmm(c_brmm: f64, r_brmm: f64) -> Result<Self> {
        let (epsilon, c_svr) = map_brmm_to_svr(c_brmm, r_brmm)?;
        Ok(MappingParams { epsilon, c_svr, c_brmm, r_brmm, nu: 1.0, rho: 1.0 })
    }

    pub fn from_svr(epsilon: f64, c_svr: f64) -> Result<Self> {
        let (c_brmm, r_brmm) = map_svr_to_brmm(epsilon, c_svr)?;
        Ok(MappingParams { epsilon, c_svr, c_brmm, r_brmm, nu: 1.0, rho: 1.0 })
    }

    /// Checks the joint consistency relation epsilon = (R-1)/(R+1).
    pub fn is_consistent(&self, tol: f64) -> bool {
        (self.epsilon - (self.r_brmm - 1.0) / (self.r_brmm + 1.0)).abs() <= tol
    }
}

/// (epsilon, C_svr) = ((R-1)/(R+1), 2C/(R+1)).
pub fn map_brmm_to_svr(c_brmm: f64, r_brmm: f64) -> Result<(f64, f64)> {
    if !(r_brmm >= 1.0) || !r_brmm.is_finite() {
        return Err(Error::InvalidParam(format!(
            "score bound must be finite and at least 1 for the regression map, got {r_brmm}"
        )));
    }
    if !(c_brmm > 0.0) || !c_brmm.is_finite() {
        return Err(Error::InvalidParam(format!("penalty must be positive and finite, got {c_brmm}")));
    }
    Ok(((r_brmm - 1.0) / (r_brmm + 1.0), 2.0 * c_brmm / (r_brmm + 1.0)))
}

/// (C_brmm, R_brmm) = (C/(1-epsilon), (1+epsilon)/(1-epsilon)).
pub fn map_svr_to_brmm(epsilon: f64, c_svr: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidParam(format!(
            "tube half-width must lie in [0, 1), got {epsilon}"
        )));
    }
    if !(c_svr > 0.0) || !c_svr.is_finite() {
        return Err(Error::InvalidParam(format!("penalty must be positive and finite, got {c_svr}")));
    }
    Ok((c_svr / (1.0 - epsilon), (1.0 + epsilon) / (1.0 - epsilon)))
}

/// C for an RBF kernel that reproduces a linear fit in the wide-kernel
/// limit: C = C_linear * sigma^2.
pub fn rbf_linear_limit(c_linear: f64, sigma_sq: f64) -> Result<f64> {
    if !(c_linear > 0.0) || !(sigma_sq > 0.0) {
        return Err(Error::InvalidParam(
            "rbf_linear_limit requires positive penalty and positive squared width".into(),
        ));
    }
    Ok(c_linear * sigma_sq)
}
