//! Fractional derivatives, Young integrals and the `K_H` / `K_H*` operators
//! that link fBm to its underlying Wiener process.

mod deriv;
mod operators;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::fbm::TimeGrid;

pub use deriv::{
    empirical_holder_exponent, frac_deriv_left, frac_deriv_right, k_alpha_beta, lemma_esti_int_check,
    young_integral_frac, young_integral_rs, YoungIntegral,
};
pub use operators::{
    kh_star_at, kh_unit_closed_form, operator_kh, operator_kh_star, operator_kh_with, scalar_product_h, HProduct,
    KhOutput, StepFunction,
};

/// A scalar function sampled on a grid, read as its piecewise-linear
/// interpolant between grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return domain(format!("{} values for a grid of {} points", values.len(), grid.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return domain(format!("non-finite value at grid index {i}"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Linear interpolation; `t` must lie in `[0, t_max]`.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        let tmax = self.grid.t_max();
        if !(t >= -1e-12 * tmax && t <= tmax * (1.0 + 1e-12)) {
            return domain(format!("t = {t} outside [0, {tmax}]"));
        }
        if let Some(i) = self.grid.index_of(t) {
            return Ok(self.values[i]);
        }
        let x = t / self.grid.dt();
        let k = (x.floor() as usize).min(self.grid.n_steps() - 1);
        let w = x - k as f64;
        Ok(self.values[k] * (1.0 - w) + self.values[k + 1] * w)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| c * v).collect() }
    }
}

/// Order of a fractional derivative, strictly between 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            domain(format!("fractional order must lie in (0, 1), got {alpha}"))
        }
    }

    /// Midpoint of the admissible interval `(1 - β, 1/2)` for the Young
    /// representation with `β`-Hölder integrands.
    pub fn default_for(beta: f64) -> Result<Self> {
        if !(beta > 0.5 && beta < 1.0) {
            return domain(format!("default order needs 1/2 < beta < 1, got {beta}"));
        }
        Self::new((1.5 - beta) / 2.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for FracOrder {
    type Error = crate::Error;
    fn try_from(a: f64) -> Result<Self> {
        Self::new(a)
    }
}

impl From<FracOrder> for f64 {
    fn from(a: FracOrder) -> f64 {
        a.0
    }
}

/// Outcome of comparing a computed quantity with an upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub passed: bool,
    pub context: BTreeMap<String, serde_json::Value>,
}

impl BoundReport {
    /// `passed` is `lhs <= rhs`; `ratio` is supplied by the caller since its
    /// normalization differs between checks.
    pub fn new(lhs: f64, rhs: f64, ratio: f64) -> Self {
        Self { lhs, rhs, ratio, passed: lhs <= rhs, context: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.context.insert(key.to_string(), value.into());
        self
    }
}
