use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper end of the admissible exponent range.
pub const P_CRITICAL: f64 = 8.0 / 3.0;

/// Couplings, exponent and mass selecting one minimization problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub rho: f64,
}

impl Params {
    pub fn new(alpha: f64, beta: f64, p: f64, rho: f64) -> Result<Self> {
        let params = Params { alpha, beta, p, rho };
        params.validate()?;
        Ok(params)
    }

    /// Couplings may be zero (the decoupled linear problem is useful as a
    /// reference), never negative.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.p > 2.0 && self.p <= P_CRITICAL + 1e-12) {
            return Err(Error::Config(format!("p must lie in (2, 8/3], got {}", self.p)));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::Config(format!("rho must be > 0, got {}", self.rho)));
        }
        Ok(())
    }

    pub fn with_rho(self, rho: f64) -> Self {
        Params { rho, ..self }
    }
}

/// Which quadratic form the kinetic term uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `½‖u‖²_{H^{1/2}}`, symbol `√(1+|k|²)`.
    #[default]
    Inhomogeneous,
    /// `½‖u‖²_{Ḣ^{1/2}}`, symbol `|k|`.
    Homogeneous,
}
