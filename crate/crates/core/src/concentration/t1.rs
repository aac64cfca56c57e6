use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::stats::mean_and_se;
use crate::transport::{path_distance, PathEnsemble, PathMetric};

/// Largest moment order used by the moment estimators. The relative
/// standard error of the 12th empirical moment is already of order one
/// at ensemble sizes of 10⁴.
pub const T1_K_MAX: u32 = 6;

/// `d(ξ_i, ξ'_i)` for paired draws of two independent ensembles.
pub fn pair_distances(a: &PathEnsemble, b: &PathEnsemble, metric: PathMetric) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return domain(format!("paired ensembles differ in size: {} vs {}", a.len(), b.len()));
    }
    if !a.grid.same_as(&b.grid) {
        return domain("paired ensembles live on different grids");
    }
    a.paths.iter().zip(&b.paths).map(|(x, y)| path_distance(&a.grid, x, y, metric)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T1Term {
    pub k: u32,
    /// `2 (k! E d^{2k} / (2k)!)^{1/k}`.
    pub value: f64,
    /// Jackknife standard error.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T1Estimate {
    /// Maximum of the terms over `k = 1..=k_max`.
    pub value: f64,
    pub argmax_k: u32,
    pub terms: Vec<T1Term>,
    pub n_pairs: usize,
}

fn ln_factorial(k: u32) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

fn term_from_moment(k: u32, m: f64) -> f64 {
    if m <= 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    2.0 * ((ln_factorial(k) + m.ln() - ln_factorial(2 * k)) / kf).exp()
}

/// Plug-in estimate of `2 sup_k (k! E d^{2k} / (2k)!)^{1/k}` from pair
/// distances.
pub fn t1_from_distances(d: &[f64], k_max: u32) -> Result<T1Estimate> {
    if !(1..=T1_K_MAX).contains(&k_max) {
        return domain(format!("k_max must lie in 1..={T1_K_MAX}, got {k_max}"));
    }
    if d.len() < 2 {
        return domain("need at least two pairs");
    }
    if d.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return domain("distances must be finite and non-negative");
    }
    let n = d.len() as f64;
    let mut terms = Vec::with_capacity(k_max as usize);
    for k in 1..=k_max {
        let powers: Vec<f64> = d.iter().map(|x| x.powi(2 * k as i32)).collect();
        let total: f64 = powers.iter().sum();
        let value = term_from_moment(k, total / n);
        // Leave-one-out values follow from the total in O(n).
        let loo: Vec<f64> = powers.iter().map(|p| term_from_moment(k, (total - p).max(0.0) / (n - 1.0))).collect();
        let mean = loo.iter().sum::<f64>() / n;
        let se = ((n - 1.0) / n * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt();
        terms.push(T1Term { k, value, se });
    }
    let best = terms.iter().max_by(|a, b| a.value.total_cmp(&b.value)).expect("k_max >= 1");
    Ok(T1Estimate { value: best.value, argmax_k: best.k, n_pairs: d.len(), terms: terms.clone() })
}

/// Moment-based T1 constant of the common law of two independent
/// ensembles, paired by index.
pub fn estimate_t1_constant(a: &PathEnsemble, b: &PathEnsemble, metric: PathMetric, k_max: u32) -> Result<T1Estimate> {
    t1_from_distances(&pair_distances(a, b, metric)?, k_max)
}

/// Exponential moment `C(δ) = E exp(δ d²)` over independent pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CDeltaReport {
    pub delta: f64,
    /// Infinite when some term overflows.
    pub c_delta: f64,
    pub se: f64,
    /// `C(δ)/δ`, an upper bound for the T1 constant.
    pub link_bound: f64,
    /// Fraction of pairs whose term overflowed.
    pub saturation_fraction: f64,
    /// Share of the sum carried by the single largest term.
    pub largest_term_share: f64,
    /// Admissible `δ` for fBm increments, when supplied.
    pub radius: Option<f64>,
    pub beyond_radius: bool,
    /// Set when the mean is dominated by a few terms or `δ` exceeds the
    /// radius.
    pub unstable: bool,
    pub n_pairs: usize,
}

/// A largest-term share above this marks the mean as tail dominated.
const HEAVY_TAIL_SHARE: f64 = 0.05;

pub fn c_delta_from_distances(d: &[f64], delta: f64, radius: Option<f64>) -> Result<CDeltaReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return domain(format!("delta must be positive, got {delta}"));
    }
    if d.is_empty() {
        return domain("no pairs");
    }
    let terms: Vec<f64> = d.iter().map(|x| (delta * x * x).exp()).collect();
    let saturated = terms.iter().filter(|t| !t.is_finite()).count();
    let saturation_fraction = saturated as f64 / d.len() as f64;
    let (c_delta, se, share) = if saturated > 0 {
        (f64::INFINITY, f64::INFINITY, 1.0)
    } else {
        let (m, se) = mean_and_se(&terms);
        let max = terms.iter().cloned().fold(0.0, f64::max);
        (m, se, max / terms.iter().sum::<f64>())
    };
    let beyond_radius = radius.is_some_and(|r| delta >= r);
    Ok(CDeltaReport {
        delta,
        c_delta,
        se,
        link_bound: c_delta / delta,
        saturation_fraction,
        largest_term_share: share,
        radius,
        beyond_radius,
        unstable: beyond_radius || share > HEAVY_TAIL_SHARE || saturated > 0,
        n_pairs: d.len(),
    })
}

pub fn gaussian_tail_c_delta(
    a: &PathEnsemble,
    b: &PathEnsemble,
    delta: f64,
    metric: PathMetric,
    radius: Option<f64>,
) -> Result<CDeltaReport> {
    c_delta_from_distances(&pair_distances(a, b, metric)?, delta, radius)
}

/// Largest `δ` for which the Fernique estimate makes
/// `E exp(δ sup|B - B̃|²)` finite for two independent fBms on `[0, T]`.
///
/// `sup|B - B̃| ≤ T^β ‖B - B̃‖_β` and `B - B̃` has the law of `√2 B`, so the
/// exponential moment is bounded once `2 δ T^{2β} < 1/(128 (2T)^{2(H-β)})`.
pub fn appendix_delta_radius(h: f64, beta: f64, t: f64) -> Result<f64> {
    if !(0.5 < beta && beta < h && h < 1.0) {
        return domain(format!("need 1/2 < beta < H < 1, got beta = {beta}, H = {h}"));
    }
    if !(t > 0.0) {
        return domain("horizon must be positive");
    }
    Ok(1.0 / (2.0 * t.powf(2.0 * beta) * 128.0 * (2.0 * t).powf(2.0 * (h - beta))))
}
