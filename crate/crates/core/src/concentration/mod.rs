//! Monte Carlo checks of concentration statements: sub-Gaussian tails of
//! Lipschitz functionals of SDE solutions, moment-based transportation
//! constants, Fernique-type moment bounds for the Hölder norm of fBm, the
//! Garsia–Rodemich–Rumsey modulus and the gamma-function optimization
//! linking exponential moments to the T1 constant.
//!
//! Every verdict is one-sided: an empirical quantity is replaced by an
//! upper confidence bound before it is compared with the theoretical bound.

mod fernique;
mod hoeffding;
mod phi;
mod t1;

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fbm::TimeGrid;
use crate::stats::{clopper_pearson_upper, mean_and_se, normal_quantile, quantile};
use crate::transport::PathMetric;

pub use fernique::{
    fernique_exp_bound, fernique_moment_bound, fernique_radius, grr_delta, grr_modulus_ratio, grr_xi,
    grr_xi_moment_bound, verify_fernique, verify_grr, FerniqueSetup, GrrReport, GrrSetup,
};
pub use hoeffding::{
    large_time_exponent, model_t1_constant, small_time_exponent, verify_hoeffding_large_time, verify_hoeffding_small_time,
    HoeffdingSetup, LargeTimeReport, Model, ScalingFit, SCALING_TOLERANCE,
};
pub use phi::{digamma, phi_argmax, phi_h, phi_link};
pub use t1::{
    appendix_delta_radius, c_delta_from_distances, estimate_t1_constant, gaussian_tail_c_delta, pair_distances,
    t1_from_distances, CDeltaReport, T1Estimate, T1Term, T1_K_MAX,
};

type ScalarField = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A Lipschitz functional on path space.
#[derive(Clone)]
pub enum LipschitzFunctional {
    /// `F(γ) = (1/T) ∫_0^T V(γ(t)) dt` with `‖V‖_Lip ≤ alpha`.
    TimeAverage { name: String, v: Arc<ScalarField>, alpha: f64 },
    /// `F∞(γ) = sup_t |γ(t) - γ(0)|`.
    SupDisplacement,
}

impl fmt::Debug for LipschitzFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TimeAverage { name, alpha, .. } => {
                f.debug_struct("TimeAverage").field("name", name).field("alpha", alpha).finish()
            }
            Self::SupDisplacement => f.write_str("SupDisplacement"),
        }
    }
}

impl LipschitzFunctional {
    pub fn time_average(name: impl Into<String>, v: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, alpha: f64) -> Self {
        Self::TimeAverage { name: name.into(), v: Arc::new(v), alpha }
    }

    /// `V(x) = clamp(x_1, -c, c)`, which is 1-Lipschitz.
    pub fn clipped_identity(c: f64) -> Self {
        Self::time_average(format!("clip({c})"), move |x| x[0].clamp(-c, c), 1.0)
    }

    pub fn name(&self) -> String {
        match self {
            Self::TimeAverage { name, .. } => format!("time_average[{name}]"),
            Self::SupDisplacement => "sup_displacement".into(),
        }
    }

    /// Lipschitz constant under `metric` for paths on `[0, horizon]`.
    /// The sup displacement is not Lipschitz for `d2`.
    pub fn lip_constant(&self, metric: PathMetric, horizon: f64) -> f64 {
        match (self, metric) {
            (Self::TimeAverage { alpha, .. }, PathMetric::DInfinity) => *alpha,
            (Self::TimeAverage { alpha, .. }, PathMetric::DTwo) => alpha / horizon.sqrt(),
            (Self::SupDisplacement, PathMetric::DInfinity) => 1.0,
            (Self::SupDisplacement, PathMetric::DTwo) => f64::INFINITY,
        }
    }

    /// Value on a path stored as an `(n+1) × d` array. The time average
    /// uses the trapezoidal rule.
    pub fn eval(&self, grid: &TimeGrid, path: &Array2<f64>) -> f64 {
        match self {
            Self::TimeAverage { v, .. } => {
                let n = grid.n_steps();
                let vals: Vec<f64> = path.rows().into_iter().map(|r| v(r.as_slice().expect("row-major path"))).collect();
                let inner: f64 = vals[1..n].iter().sum();
                (inner + 0.5 * (vals[0] + vals[n])) / n as f64
            }
            Self::SupDisplacement => {
                let x0 = path.row(0);
                path.rows()
                    .into_iter()
                    .map(|r| r.iter().zip(x0.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                    .fold(0.0, f64::max)
                    .sqrt()
            }
        }
    }
}

/// Empirical tail of a centered functional against a sub-Gaussian bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    /// Which inequality the bound comes from.
    pub bound_name: String,
    pub functional: String,
    pub metric: PathMetric,
    pub horizon: f64,
    pub lip_constant: f64,
    /// Transportation constant entering the bound, when there is one.
    pub t1_constant: Option<f64>,
    /// Empirical mean used for centering and its standard error.
    pub center: f64,
    pub center_se: f64,
    pub r_grid: Vec<f64>,
    /// Quantile levels the thresholds were read from.
    pub levels: Vec<f64>,
    pub exceedances: Vec<usize>,
    pub empirical_tail: Vec<f64>,
    /// One-sided Clopper–Pearson upper bounds.
    pub upper_confidence: Vec<f64>,
    pub bound: Vec<f64>,
    pub passed: Vec<bool>,
    pub confidence: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub config_hash: String,
    pub notes: Vec<String>,
}

impl TailReport {
    pub fn all_passed(&self) -> bool {
        self.passed.iter().all(|&p| p)
    }

    /// Smallest `bound - upper` over the grid.
    pub fn min_margin(&self) -> f64 {
        self.bound.iter().zip(&self.upper_confidence).map(|(b, u)| b - u).fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {} / {} config_hash={} seed={}", self.bound_name, self.functional, self.config_hash, self.seed)?;
        writeln!(out, "level,r,exceedances,empirical_tail,upper_confidence,bound,passed")?;
        for i in 0..self.r_grid.len() {
            writeln!(
                out,
                "{},{:.17e},{},{:.17e},{:.17e},{:.17e},{}",
                self.levels[i],
                self.r_grid[i],
                self.exceedances[i],
                self.empirical_tail[i],
                self.upper_confidence[i],
                self.bound[i],
                self.passed[i]
            )?;
        }
        Ok(())
    }
}

/// Quantile levels of the centered functional used as thresholds.
pub const DEFAULT_LEVELS: [f64; 9] = [0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 0.995, 0.999];

pub(crate) struct TailInput<'a> {
    pub bound_name: &'a str,
    pub functional: &'a LipschitzFunctional,
    pub metric: PathMetric,
    pub horizon: f64,
    pub t1_constant: Option<f64>,
    pub levels: &'a [f64],
    pub confidence: f64,
    pub seed: u64,
    pub config_hash: &'a str,
}

/// Centers `values` at their mean and compares exceedance frequencies with
/// `bound(r)`. The unknown true mean is replaced by the sample mean; to
/// keep the comparison conservative an exceedance of `r` is counted when
/// the centered value exceeds `r` minus one standard error.
pub(crate) fn tail_report(values: &[f64], input: TailInput<'_>, bound: impl Fn(f64) -> f64) -> TailReport {
    let n = values.len();
    let (center, center_se) = mean_and_se(values);
    let mut centered: Vec<f64> = values.iter().map(|v| v - center).collect();
    centered.sort_by(f64::total_cmp);
    let mut levels = input.levels.to_vec();
    levels.sort_by(f64::total_cmp);
    let r_grid: Vec<f64> = levels.iter().map(|&l| quantile(&centered, l).max(0.0)).collect();
    let mut exceedances = Vec::with_capacity(r_grid.len());
    let mut empirical_tail = Vec::with_capacity(r_grid.len());
    let mut upper_confidence = Vec::with_capacity(r_grid.len());
    let mut bounds = Vec::with_capacity(r_grid.len());
    let mut passed = Vec::with_capacity(r_grid.len());
    for &r in &r_grid {
        let cut = r - center_se;
        let count = n - centered.partition_point(|&c| c <= cut);
        let upper = clopper_pearson_upper(count, n, input.confidence);
        let b = if r == 0.0 { 1.0 } else { bound(r) };
        exceedances.push(count);
        empirical_tail.push(count as f64 / n as f64);
        upper_confidence.push(upper);
        bounds.push(b);
        passed.push(upper <= b);
    }
    TailReport {
        bound_name: input.bound_name.into(),
        functional: input.functional.name(),
        metric: input.metric,
        horizon: input.horizon,
        lip_constant: input.functional.lip_constant(input.metric, input.horizon),
        t1_constant: input.t1_constant,
        center,
        center_se,
        r_grid,
        levels,
        exceedances,
        empirical_tail,
        upper_confidence,
        bound: bounds,
        passed,
        confidence: input.confidence,
        n_samples: n,
        seed: input.seed,
        config_hash: input.config_hash.into(),
        notes: vec![format!(
            "centered at the sample mean {center:.6e}; exceedances counted above r - {center_se:.3e} (one standard error)"
        )],
    }
}

/// One line of a moment comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub k: u32,
    pub mean: f64,
    pub se: f64,
    /// `mean + z se` at the report's confidence level.
    pub upper: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpMomentEntry {
    pub alpha: f64,
    pub mean: f64,
    pub se: f64,
    pub upper: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Empirical moments of a random Hölder norm against explicit bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub hurst: f64,
    pub beta: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub k_list: Vec<u32>,
    pub moments: Vec<MomentEntry>,
    pub exp_moment: Option<ExpMomentEntry>,
    pub confidence: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub config_hash: String,
    pub notes: Vec<String>,
}

impl MomentReport {
    pub fn all_passed(&self) -> bool {
        self.moments.iter().all(|m| m.passed) && self.exp_moment.as_ref().is_none_or(|e| e.passed)
    }

    pub fn all_finite(&self) -> bool {
        self.moments.iter().all(|m| m.mean.is_finite() && m.se.is_finite())
            && self.exp_moment.as_ref().is_none_or(|e| e.mean.is_finite() && e.se.is_finite())
    }
}

/// Mean, standard error and normal-approximation upper bound of `xs`.
pub(crate) fn upper_mean(xs: &[f64], confidence: f64) -> (f64, f64, f64) {
    let (m, se) = mean_and_se(xs);
    (m, se, m + normal_quantile(confidence) * se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid_path(n: usize, f: impl Fn(f64) -> f64) -> (TimeGrid, Array2<f64>) {
        let grid = TimeGrid::new(2.0, n).unwrap();
        let vals = Array2::from_shape_fn((n + 1, 1), |(i, _)| f(grid.points()[i]));
        (grid, vals)
    }

    #[test]
    fn time_average_of_linear_path() {
        let (grid, p) = grid_path(64, |t| t);
        let f = LipschitzFunctional::time_average("id", |x| x[0], 1.0);
        assert_relative_eq!(f.eval(&grid, &p), 1.0, epsilon = 1e-14);
        let clipped = LipschitzFunctional::clipped_identity(0.5);
        assert!(clipped.eval(&grid, &p) < 0.5);
    }

    #[test]
    fn sup_displacement_is_relative_to_start() {
        let (grid, p) = grid_path(40, |t| 3.0 - (t - 0.5).powi(2));
        let f = LipschitzFunctional::SupDisplacement;
        // start 2.75, extremes 3.0 at t = 0.5 and 0.75 at t = 2.
        assert_relative_eq!(f.eval(&grid, &p), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn lipschitz_constants_per_metric() {
        let f = LipschitzFunctional::clipped_identity(1.0);
        assert_eq!(f.lip_constant(PathMetric::DInfinity, 4.0), 1.0);
        assert_eq!(f.lip_constant(PathMetric::DTwo, 4.0), 0.5);
        assert_eq!(LipschitzFunctional::SupDisplacement.lip_constant(PathMetric::DInfinity, 4.0), 1.0);
    }

    fn report_for(values: &[f64], bound: impl Fn(f64) -> f64) -> TailReport {
        let f = LipschitzFunctional::SupDisplacement;
        tail_report(
            values,
            TailInput {
                bound_name: "test",
                functional: &f,
                metric: PathMetric::DInfinity,
                horizon: 1.0,
                t1_constant: None,
                levels: &DEFAULT_LEVELS,
                confidence: 0.99,
                seed: 0,
                config_hash: "h",
            },
            bound,
        )
    }

    #[test]
    fn tail_report_is_monotone_and_passes_generous_bound() {
        let values: Vec<f64> = (0..5000).map(|i| ((i * 7919) % 5000) as f64 / 5000.0).collect();
        let rep = report_for(&values, |_| 1.0);
        assert!(rep.all_passed());
        assert!(rep.r_grid.windows(2).all(|w| w[0] <= w[1]));
        assert!(rep.empirical_tail.windows(2).all(|w| w[0] >= w[1]));
        assert!(rep.upper_confidence.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn tail_report_rejects_tight_bound() {
        let values: Vec<f64> = (0..5000).map(|i| i as f64).collect();
        let rep = report_for(&values, |_| 1e-6);
        assert!(!rep.all_passed());
        // r = 0 is always compared with 1.
        let zero = rep.r_grid.iter().position(|&r| r == 0.0).unwrap();
        assert!(rep.passed[zero]);
    }

    #[test]
    fn tail_csv_has_header_and_rows() {
        let values: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let rep = report_for(&values, |_| 1.0);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# test"));
        assert_eq!(text.lines().count(), 2 + DEFAULT_LEVELS.len());
    }
}
