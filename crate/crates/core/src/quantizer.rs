//! Fixed-threshold quantizer and its Gaussian gain.
//!
//! Levels use the ascending encoding: level `i` means `C_i < y <= C_{i+1}`
//! with `C_0 = -inf` and `C_{m+1} = +inf`, so the level equals the number of
//! thresholds strictly below `y`. A tie `y == C_i` lands in the lower cell.

use crate::error::{Error, Result};
use crate::gauss::SQRT_TWO_PI;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSpec {
    thresholds: Vec<f64>,
}

/// Outcome of the identifiability check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Identifiability {
    Accepted,
    Rejected(String),
}

impl Identifiability {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Identifiability::Accepted)
    }
}

impl QuantizerSpec {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::Config(
                "quantizer needs at least one threshold".into(),
            ));
        }
        if thresholds.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("quantizer thresholds must be finite".into()));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "quantizer thresholds must be strictly increasing".into(),
            ));
        }
        let spec = Self { thresholds };
        if let Identifiability::Rejected(reason) = check_identifiable(&spec) {
            return Err(Error::Config(reason));
        }
        Ok(spec)
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Number of thresholds `m`; levels range over `0..=m`.
    pub fn m(&self) -> usize {
        self.thresholds.len()
    }

    pub fn levels(&self) -> usize {
        self.thresholds.len() + 1
    }

    pub fn quantize(&self, y: f64) -> usize {
        quantize(self, y)
    }

    pub fn rho(&self, delta: f64) -> Result<f64> {
        rho(self, delta)
    }
}

pub fn quantize(spec: &QuantizerSpec, y: f64) -> usize {
    spec.thresholds.partition_point(|&c| c < y)
}

/// Gain `sum_i exp(-C_i^2 / (2 delta^2)) / (sqrt(2 pi) delta)` linking the
/// level/regressor cross-moment to `H theta`.
pub fn rho(spec: &QuantizerSpec, delta: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!("rho needs delta > 0, got {delta}")));
    }
    let two_var = 2.0 * delta * delta;
    let sum: f64 = spec
        .thresholds
        .iter()
        .map(|c| (-c * c / two_var).exp())
        .sum();
    Ok(sum / (SQRT_TWO_PI * delta))
}

/// A single threshold at zero only reveals the sign of the output, which is
/// invariant to scaling, so the parameter magnitude cannot be recovered.
pub fn check_identifiable(spec: &QuantizerSpec) -> Identifiability {
    if spec.thresholds.len() == 1 && spec.thresholds[0] == 0.0 {
        Identifiability::Rejected(
            "system is unidentifiable with a single threshold at zero (m = 1, C1 = 0)".into(),
        )
    } else {
        Identifiability::Accepted
    }
}
