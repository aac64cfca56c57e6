use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{upper_mean, ExpMomentEntry, MomentEntry, MomentReport};
use crate::error::{domain, Result};
use crate::fbm::{holder_seminorm_1d, Generator, HurstParam, TimeGrid};
use crate::stats::mean_and_se;

fn check_premise(h: f64, beta: f64, t: f64) -> Result<()> {
    if !(0.5 < beta && beta < h && h < 1.0) {
        return domain(format!("premise 1/2 < beta < H < 1 violated: beta = {beta}, H = {h}"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("horizon must be positive, got {t}"));
    }
    Ok(())
}

fn ln_factorial(k: u32) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// Admissible range `α < 1/(128 (2T)^{2(H-β)})` of the exponential moment.
pub fn fernique_radius(h: f64, beta: f64, t: f64) -> Result<f64> {
    check_premise(h, beta, t)?;
    Ok(1.0 / (128.0 * (2.0 * t).powf(2.0 * (h - beta))))
}

/// `32^k (2T)^{2k(H-β)} (2k)!/k!`.
pub fn fernique_moment_bound(h: f64, beta: f64, t: f64, k: u32) -> Result<f64> {
    check_premise(h, beta, t)?;
    let kf = k as f64;
    if k <= 20 {
        // Direct product: exact when (2T)^{2k(H-β)} is.
        let ratio: f64 = (k + 1..=2 * k).map(|i| i as f64).product();
        return Ok(32f64.powi(k as i32) * (2.0 * t).powf(2.0 * kf * (h - beta)) * ratio);
    }
    Ok((kf * 32f64.ln() + 2.0 * kf * (h - beta) * (2.0 * t).ln() + ln_factorial(2 * k) - ln_factorial(k)).exp())
}

/// `(1 - 128 α (2T)^{2(H-β)})^{-1/2}`.
pub fn fernique_exp_bound(h: f64, beta: f64, t: f64, alpha: f64) -> Result<f64> {
    let radius = fernique_radius(h, beta, t)?;
    if !(alpha >= 0.0 && alpha < radius) {
        return domain(format!("alpha = {alpha} outside [0, {radius})"));
    }
    Ok((1.0 - alpha / radius).powf(-0.5))
}

/// Bound on `E ξ_β^{2p}`; its derivation needs `p ≥ 1/(H-β)`.
pub fn grr_xi_moment_bound(h: f64, beta: f64, t: f64, p: u32) -> Result<f64> {
    check_premise(h, beta, t)?;
    let min_p = 1.0 / (h - beta);
    if (p as f64) < min_p {
        return domain(format!("moment order p = {p} below 1/(H - beta) = {min_p:.4}"));
    }
    fernique_moment_bound(h, beta, t, p)
}

/// Inputs of [`verify_fernique`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FerniqueSetup {
    pub hurst: f64,
    pub beta: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub generator: Generator,
    /// Exponential-moment parameter; `None` uses half the admissible radius.
    pub alpha: Option<f64>,
    pub k_list: Vec<u32>,
    pub confidence: f64,
    #[serde(default)]
    pub config_hash: String,
}

impl Default for FerniqueSetup {
    fn default() -> Self {
        Self {
            hurst: 0.75,
            beta: 0.6,
            horizon: 0.5,
            n_steps: 256,
            n_paths: 20_000,
            seed: 1,
            generator: Generator::Circulant,
            alpha: None,
            k_list: vec![1, 2, 3],
            confidence: 0.99,
            config_hash: String::new(),
        }
    }
}

fn sample_component_paths(
    h: f64,
    t: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    generator: Generator,
) -> Result<(TimeGrid, Vec<Vec<f64>>)> {
    let grid = TimeGrid::new(t, n_steps)?;
    let sampler = generator.sampler(&grid, HurstParam::new(h)?)?;
    let paths = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| sampler.sample(1, seed, i).map(|p| p.component(0)))
        .collect::<Result<Vec<_>>>()?;
    Ok((grid, paths))
}

/// Moments of the grid `β`-seminorm of one fBm component against the
/// Fernique-type bounds.
///
/// The grid seminorm never exceeds the seminorm of the continuous path, so
/// a failure is conclusive while a pass is a necessary-condition check.
pub fn verify_fernique(setup: &FerniqueSetup) -> Result<MomentReport> {
    let (h, beta, t) = (setup.hurst, setup.beta, setup.horizon);
    check_premise(h, beta, t)?;
    let radius = fernique_radius(h, beta, t)?;
    let alpha = setup.alpha.unwrap_or(0.5 * radius);
    let exp_bound = fernique_exp_bound(h, beta, t, alpha)?;
    if setup.k_list.is_empty() || setup.k_list.contains(&0) {
        return domain("k_list must hold positive orders");
    }
    let (grid, paths) = sample_component_paths(h, t, setup.n_steps, setup.n_paths, setup.seed, setup.generator)?;
    let dt = grid.dt();
    let norms: Vec<f64> = paths.par_iter().map(|p| holder_seminorm_1d(p, dt, beta)).collect();
    let mut moments = Vec::with_capacity(setup.k_list.len());
    for &k in &setup.k_list {
        let powers: Vec<f64> = norms.iter().map(|s| s.powi(2 * k as i32)).collect();
        let (mean, se, upper) = upper_mean(&powers, setup.confidence);
        let bound = fernique_moment_bound(h, beta, t, k)?;
        moments.push(MomentEntry { k, mean, se, upper, bound, passed: upper <= bound });
    }
    let exps: Vec<f64> = norms.iter().map(|s| (alpha * s * s).exp()).collect();
    let (mean, se, upper) = upper_mean(&exps, setup.confidence);
    Ok(MomentReport {
        hurst: h,
        beta,
        horizon: t,
        n_steps: setup.n_steps,
        k_list: setup.k_list.clone(),
        moments,
        exp_moment: Some(ExpMomentEntry { alpha, mean, se, upper, bound: exp_bound, passed: upper <= exp_bound }),
        confidence: setup.confidence,
        n_samples: norms.len(),
        seed: setup.seed,
        config_hash: setup.config_hash.clone(),
        notes: vec![
            "grid seminorm: a lower bound of the continuous seminorm".into(),
            format!("upper bounds are mean + z se with z at confidence {}", setup.confidence),
        ],
    })
}

fn check_grr(h: f64, beta: f64) -> Result<()> {
    if !(0.0 < beta && beta < h && h < 1.0) {
        return domain(format!("need 0 < beta < H < 1, got beta = {beta}, H = {h}"));
    }
    Ok(())
}

fn ln_delta(values: &[f64], dt: f64, h: f64, beta: f64) -> f64 {
    let e = h - beta;
    let (pa, pt) = (2.0 / e, 2.0 * h / e);
    let n = values.len();
    let term = |i: usize, j: usize| -> f64 {
        let dx = (values[i] - values[j]).abs();
        if dx == 0.0 {
            f64::NEG_INFINITY
        } else {
            pa * dx.ln() - pt * ((j - i) as f64 * dt).ln()
        }
    };
    let mut max = f64::NEG_INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            max = max.max(term(i, j));
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += (term(i, j) - max).exp();
        }
    }
    // Both orders (s, t) and (t, s), cells of area dt².
    max + (2.0 * sum).ln() + 2.0 * dt.ln()
}

/// `Δ = ∫∫ |x_t - x_s|^{2/(H-β)} / |t-s|^{2H/(H-β)} ds dt` by the rectangle
/// rule on the grid, leaving out the diagonal.
pub fn grr_delta(values: &[f64], dt: f64, h: f64, beta: f64) -> Result<f64> {
    check_grr(h, beta)?;
    Ok(ln_delta(values, dt, h, beta).exp())
}

/// `ξ_β = 8 (4Δ)^{(H-β)/2}`, computed in log space.
pub fn grr_xi(values: &[f64], dt: f64, h: f64, beta: f64) -> Result<f64> {
    check_grr(h, beta)?;
    if !(dt > 0.0) {
        return domain("grid step must be positive");
    }
    let ld = ln_delta(values, dt, h, beta);
    if ld == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    Ok((8f64.ln() + 0.5 * (h - beta) * (4f64.ln() + ld)).exp())
}

/// `max |x_t - x_s| / (ξ |t-s|^β)` over grid pairs; the modulus bound
/// holds on the grid when this is at most one.
pub fn grr_modulus_ratio(values: &[f64], dt: f64, xi: f64, beta: f64) -> f64 {
    let semi = holder_seminorm_1d(values, dt, beta);
    if semi == 0.0 {
        0.0
    } else {
        semi / xi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrrSetup {
    pub hurst: f64,
    pub beta: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub generator: Generator,
    /// Moment order for `E ξ^{2p}`; `None` skips the moment check.
    pub p: Option<u32>,
    pub confidence: f64,
    #[serde(default)]
    pub config_hash: String,
}

impl Default for GrrSetup {
    fn default() -> Self {
        Self {
            hurst: 0.75,
            beta: 0.6,
            horizon: 0.5,
            n_steps: 256,
            n_paths: 1000,
            seed: 1,
            generator: Generator::Circulant,
            p: None,
            confidence: 0.99,
            config_hash: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrrReport {
    pub hurst: f64,
    pub beta: f64,
    pub horizon: f64,
    pub n_paths: usize,
    /// Largest modulus ratio over all paths and grid pairs.
    pub worst_ratio: f64,
    pub violations: usize,
    pub mean_xi: f64,
    /// Mean relative change of `Δ` when the grid is coarsened by two.
    pub refinement_change: f64,
    pub moment: Option<MomentEntry>,
    pub seed: u64,
    pub config_hash: String,
}

impl GrrReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.moment.as_ref().is_none_or(|m| m.passed)
    }
}

/// Checks the modulus bound `|B_t - B_s| ≤ ξ_β |t-s|^β` on every sampled
/// path and, optionally, the moment bound on `ξ_β`.
pub fn verify_grr(setup: &GrrSetup) -> Result<GrrReport> {
    let (h, beta, t) = (setup.hurst, setup.beta, setup.horizon);
    check_premise(h, beta, t)?;
    let moment_bound = setup.p.map(|p| grr_xi_moment_bound(h, beta, t, p)).transpose()?;
    let (grid, paths) = sample_component_paths(h, t, setup.n_steps, setup.n_paths, setup.seed, setup.generator)?;
    let dt = grid.dt();
    let per_path: Vec<(f64, f64, f64)> = paths
        .par_iter()
        .map(|p| {
            let xi = grr_xi(p, dt, h, beta)?;
            let ratio = grr_modulus_ratio(p, dt, xi, beta);
            let coarse: Vec<f64> = p.iter().step_by(2).copied().collect();
            let fine = ln_delta(p, dt, h, beta);
            let change = (ln_delta(&coarse, 2.0 * dt, h, beta) - fine).exp_m1().abs();
            Ok((xi, ratio, change))
        })
        .collect::<Result<_>>()?;
    let xis: Vec<f64> = per_path.iter().map(|r| r.0).collect();
    let worst_ratio = per_path.iter().map(|r| r.1).fold(0.0, f64::max);
    let violations = per_path.iter().filter(|r| r.1 > 1.0).count();
    let refinement_change = per_path.iter().map(|r| r.2).sum::<f64>() / per_path.len() as f64;
    let moment = match (setup.p, moment_bound) {
        (Some(p), Some(bound)) => {
            let powers: Vec<f64> = xis.iter().map(|x| x.powi(2 * p as i32)).collect();
            let (mean, se, upper) = upper_mean(&powers, setup.confidence);
            Some(MomentEntry { k: p, mean, se, upper, bound, passed: upper <= bound })
        }
        _ => None,
    };
    Ok(GrrReport {
        hurst: h,
        beta,
        horizon: t,
        n_paths: paths.len(),
        worst_ratio,
        violations,
        mean_xi: mean_and_se(&xis).0,
        refinement_change,
        moment,
        seed: setup.seed,
        config_hash: setup.config_hash.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn moment_bound_values() {
        // (2T) = 1 removes the horizon factor: 32^k (2k)!/k!.
        assert_eq!(fernique_moment_bound(0.75, 0.6, 0.5, 1).unwrap(), 64.0);
        assert_eq!(fernique_moment_bound(0.75, 0.6, 0.5, 2).unwrap(), 1024.0 * 12.0);
        assert_eq!(fernique_moment_bound(0.75, 0.6, 0.5, 3).unwrap(), 32768.0 * 120.0);
        let t = 2.0f64;
        assert_relative_eq!(
            fernique_moment_bound(0.8, 0.6, t, 1).unwrap(),
            64.0 * (2.0 * t).powf(0.4),
            max_relative = 1e-14
        );
    }

    #[test]
    fn exp_bound_limits() {
        assert_eq!(fernique_exp_bound(0.75, 0.6, 0.5, 0.0).unwrap(), 1.0);
        let r = fernique_radius(0.75, 0.6, 0.5).unwrap();
        assert_relative_eq!(r, 1.0 / 128.0, max_relative = 1e-15);
        assert_relative_eq!(fernique_exp_bound(0.75, 0.6, 0.5, 0.5 * r).unwrap(), 2f64.sqrt(), max_relative = 1e-14);
        assert!(fernique_exp_bound(0.75, 0.6, 0.5, r).is_err());
    }

    #[test]
    fn exp_bound_is_the_series_sum() {
        // Σ (32α)^p (2T)^{2p(H-β)} (2p)!/(p!)² = (1 - 128α(2T)^{2(H-β)})^{-1/2}.
        let (h, beta, t) = (0.8, 0.6, 0.7);
        let alpha = 0.3 * fernique_radius(h, beta, t).unwrap();
        let a = 32.0 * alpha * (2.0 * t).powf(2.0 * (h - beta));
        let mut term = 1.0;
        let mut sum = 1.0;
        for p in 1..200 {
            let pf = p as f64;
            term *= a * (2.0 * pf) * (2.0 * pf - 1.0) / (pf * pf);
            sum += term;
        }
        assert_relative_eq!(sum, fernique_exp_bound(h, beta, t, alpha).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn premise_guard() {
        let setup = FerniqueSetup { beta: 0.8, n_paths: 10, ..Default::default() };
        assert!(verify_fernique(&setup).is_err());
        let setup = FerniqueSetup { beta: 0.5, n_paths: 10, ..Default::default() };
        assert!(verify_fernique(&setup).is_err());
        let setup = FerniqueSetup { alpha: Some(1.0), n_paths: 10, ..Default::default() };
        assert!(verify_fernique(&setup).is_err());
    }

    #[test]
    fn small_alpha_exp_moment_near_one() {
        let setup = FerniqueSetup { alpha: Some(1e-9), n_paths: 200, n_steps: 64, ..Default::default() };
        let rep = verify_fernique(&setup).unwrap();
        let e = rep.exp_moment.unwrap();
        assert!((e.mean - 1.0).abs() < 1e-7);
        assert!((e.bound - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constant_path_has_zero_xi() {
        assert_eq!(grr_xi(&[2.0; 33], 0.1, 0.75, 0.6).unwrap(), 0.0);
        assert_eq!(grr_modulus_ratio(&[2.0; 33], 0.1, 0.0, 0.6), 0.0);
    }

    #[test]
    fn delta_of_linear_path() {
        // x = c t: integrand c^{2/e} |t-s|^{(2-2H)/e}, which is integrable,
        // and the grid sum converges to 2 c^{2/e} T^{q+2}/((q+1)(q+2)).
        let (h, beta, c, t) = (0.75, 0.6, 1.3f64, 1.0f64);
        let e = h - beta;
        let q = (2.0 - 2.0 * h) / e;
        let exact = 2.0 * c.powf(2.0 / e) * t.powf(q + 2.0) / ((q + 1.0) * (q + 2.0));
        let n = 400;
        let dt = t / n as f64;
        let vals: Vec<f64> = (0..=n).map(|i| c * i as f64 * dt).collect();
        let d = grr_delta(&vals, dt, h, beta).unwrap();
        assert_relative_eq!(d, exact, max_relative = 0.05);
    }

    #[test]
    fn moment_order_guard() {
        assert!(grr_xi_moment_bound(0.75, 0.6, 0.5, 1).is_err());
        assert!(grr_xi_moment_bound(0.9, 0.55, 1.0, 3).is_ok());
    }

    #[test]
    fn modulus_holds_on_sampled_paths() {
        let setup = GrrSetup { n_paths: 40, n_steps: 128, ..Default::default() };
        let rep = verify_grr(&setup).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.worst_ratio < 1.0);
    }
}
