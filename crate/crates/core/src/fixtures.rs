//! Calibrated constants frozen in `fixtures/calibration.json`.
//!
//! Several bounds hold "for some universal constant" without a numeric
//! value. Those constants are estimated by Monte Carlo maximization
//! (`fbmlab calibrate`), inflated by a headroom factor, and frozen here.
//! They are regression fixtures for this implementation, not values of
//! the constants themselves.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

const CALIBRATION_JSON: &str = include_str!("../fixtures/calibration.json");

/// How a calibrated constant was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    /// Description of the estimator.
    pub oracle: String,
    pub samples: usize,
    pub seed: u64,
    /// Largest value observed during calibration.
    pub max_observed: f64,
    /// `value = max_observed * headroom`.
    pub headroom: f64,
    pub params: BTreeMap<String, serde_json::Value>,
    pub date: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibrated {
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub version: u32,
    /// Stability constant: bound on `‖x - x̃‖_∞ / (‖σ‖_β ‖g - g̃‖_β T^β)`.
    pub k_hat_stability: Calibrated,
    /// Multiplier `K` in the T1 constant `K ‖σ‖_β T^{2H}`.
    pub k_hat_t1: Calibrated,
    /// Constant `κ` of the Young-integral estimate.
    pub kappa_hat: Calibrated,
    /// Bound on the `H`-Hölder seminorm of `K_H ρ` per unit `‖ρ‖_{L²}`.
    pub kh_holder: Calibrated,
}

impl Calibration {
    pub fn from_json(text: &str) -> crate::Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::Error::Config(format!("calibration fixture: {e}")))
    }
}

/// The frozen calibration shipped with the crate.
pub fn calibration() -> &'static Calibration {
    static CELL: OnceLock<Calibration> = OnceLock::new();
    CELL.get_or_init(|| Calibration::from_json(CALIBRATION_JSON).expect("shipped calibration fixture parses"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_fixture_is_consistent() {
        let c = calibration();
        for k in [&c.k_hat_stability, &c.k_hat_t1, &c.kappa_hat, &c.kh_holder] {
            assert!(k.value > 0.0);
            assert!(k.provenance.headroom >= 1.0);
            let expect = k.provenance.max_observed * k.provenance.headroom;
            assert!((k.value - expect).abs() <= 1e-9 * expect, "{} vs {}", k.value, expect);
        }
    }
}
