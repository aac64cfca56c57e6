use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{solve_additive, Driver, DriftSpec, SolutionPath, TimeDiffusion};
use crate::error::{domain, Result};
use crate::fbm::{holder_norm, CirculantSampler, FbmSampler, HurstParam, KernelTable, TimeGrid};
use crate::frac::{operator_kh_with, StepFunction};
use crate::transport::{c_bt, path_distance, PathMetric};

/// Sensitivity of the additive equation to its driver:
/// `ratio = ‖x - x̃‖_∞ / (‖σ‖_β ‖g - g̃‖_β T^β)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub sup_dist: f64,
    pub driver_gap: f64,
    pub sigma_norm: f64,
    pub horizon: f64,
    pub beta: f64,
    pub ratio: f64,
    /// `(2 L_b)^{-1} ∧ 1`.
    pub delta: f64,
    pub delta_ok: bool,
}

/// Solve the additive equation with drivers `g` and `g̃` from the same
/// starting point and compare.
///
/// Hölder norms are grid norms: the gap `‖g - g̃‖_β` is a lower bound of
/// the continuum value, so the ratio can only be overstated.
pub fn coupled_stability(
    x0: &[f64],
    drift: &DriftSpec,
    sigma: &TimeDiffusion,
    g: &Driver,
    g_tilde: &Driver,
    beta: f64,
) -> Result<StabilityReport> {
    if !g.grid.same_as(&g_tilde.grid) {
        return domain("drivers live on different grids");
    }
    let grid = &g.grid;
    let x = solve_additive(x0, drift, sigma, g)?;
    let xt = solve_additive(x0, drift, sigma, g_tilde)?;
    let sup_dist = path_distance(&x.grid, &x.values, &xt.values, PathMetric::DInfinity)?;
    let diff = &g.values - &g_tilde.values;
    let driver_gap = holder_norm(grid, &diff, beta, (0.0, grid.t_max()))?.seminorm_beta;
    let sigma_norm = sigma.holder_norm(grid, beta)?.total();
    let horizon = grid.t_max();
    let delta = if drift.lipschitz > 0.0 { (0.5 / drift.lipschitz).min(1.0) } else { 1.0 };
    let denom = sigma_norm * driver_gap * horizon.powf(beta);
    let ratio = if sup_dist == 0.0 { 0.0 } else { sup_dist / denom };
    Ok(StabilityReport { sup_dist, driver_gap, sigma_norm, horizon, beta, ratio, delta, delta_ok: horizon <= delta })
}

/// Right side of the pointwise estimate
/// `|X_t - Y_t|² ≤ (2/|B|) H T^{2H-1} ‖σ‖²_∞ ∫_0^t e^{(2B+|B|)(t-s)} |ρ(s)|² ds`
/// at every grid point, integrated exactly for step functions `ρ`.
pub fn gronwall_profile(rho: &[StepFunction], h: HurstParam, b: f64, sigma_sup: f64) -> Result<Vec<f64>> {
    if b == 0.0 {
        return domain("the estimate divides by |B|; B = 0 is excluded");
    }
    let grid = rho.first().map(|r| r.grid().clone()).ok_or_else(|| crate::Error::Domain("empty rho bundle".into()))?;
    let hv = h.value();
    let n = grid.n_steps();
    let t = grid.points();
    let c = 2.0 * b + b.abs();
    let pre = 2.0 / b.abs() * hv * grid.t_max().powf(2.0 * hv - 1.0) * sigma_sup * sigma_sup;
    let r2: Vec<f64> = (0..n).map(|k| rho.iter().map(|r| r.cells()[k].powi(2)).sum()).collect();
    Ok((0..=n)
        .map(|i| {
            let integral: f64 = (0..i)
                .map(|k| {
                    let (a, e) = (t[i] - t[k], t[i] - t[k + 1]);
                    // ∫_{t_k}^{t_{k+1}} e^{c(t_i - s)} ds
                    r2[k] * if c == 0.0 { a - e } else { ((c * a).exp() - (c * e).exp()) / c }
                })
                .sum();
            pre * integral
        })
        .collect())
}

/// Empirical distances of a drift-coupled pair against the Gronwall
/// profile and the `d_2` transport bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallCheck {
    /// `max_t |X_t - Y_t|² / bound(t)` over grid points with a positive bound.
    pub max_ratio: f64,
    pub pointwise_ok: bool,
    pub dinf_sq: f64,
    /// `∫_0^T |X - Y|² dt` (trapezoid).
    pub d2_sq: f64,
    /// `(2/B²) H T^{2H-1} ‖σ‖²_∞ c_{B,T} ∫|ρ|²`.
    pub d2_bound: f64,
    pub d2_ok: bool,
}

#[derive(Debug, Clone)]
pub struct CoupledPair {
    pub x: SolutionPath,
    pub y: SolutionPath,
    /// `½ ∫_0^T |ρ|² dt`.
    pub rho_energy: f64,
    /// `K_H ρ` on the grid, one column per component.
    pub kh_rho: Array2<f64>,
    pub check: GronwallCheck,
}

/// Reusable state for many drift-coupled pairs on one grid: the kernel
/// table behind `K_H` and an fBm sampler.
#[derive(Debug, Clone)]
pub struct DriftCoupling {
    table: Arc<KernelTable>,
    sampler: CirculantSampler,
}

impl DriftCoupling {
    pub fn new(grid: &TimeGrid, h: HurstParam) -> Result<Self> {
        Ok(Self { table: Arc::new(KernelTable::new(grid, h)?), sampler: CirculantSampler::new(grid, h)? })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.table.grid()
    }

    /// `K_H ρ` for each component of the bundle.
    pub fn kh_rho(&self, rho: &[StepFunction]) -> Result<Array2<f64>> {
        let n = self.grid().n_steps();
        let mut out = Array2::zeros((n + 1, rho.len()));
        for (j, r) in rho.iter().enumerate() {
            let path = operator_kh_with(r, &self.table)?.path;
            for (i, v) in path.values().iter().enumerate() {
                out[(i, j)] = *v;
            }
        }
        Ok(out)
    }

    /// Draw `B̃` from `(seed, path_index)` and solve
    /// `dY = b(Y)dt + σ dB̃` and `dX = b(X)dt + σ dB̃ + σ d(K_H ρ)`.
    pub fn pair(
        &self,
        x0: &[f64],
        drift: &DriftSpec,
        sigma: &TimeDiffusion,
        rho: &[StepFunction],
        seed: u64,
        path_index: u64,
    ) -> Result<CoupledPair> {
        let kh = self.kh_rho(rho)?;
        self.pair_with(x0, drift, sigma, rho, &kh, seed, path_index)
    }

    /// As [`DriftCoupling::pair`] with `K_H ρ` precomputed.
    #[allow(clippy::too_many_arguments)]
    pub fn pair_with(
        &self,
        x0: &[f64],
        drift: &DriftSpec,
        sigma: &TimeDiffusion,
        rho: &[StepFunction],
        kh_rho: &Array2<f64>,
        seed: u64,
        path_index: u64,
    ) -> Result<CoupledPair> {
        let grid = self.grid();
        if rho.len() != sigma.m || rho.iter().any(|r| !r.grid().same_as(grid)) {
            return domain("rho must have one step function per noise component on the coupling grid");
        }
        let b = drift.one_sided.ok_or_else(|| crate::Error::Domain("drift coupling needs a declared one-sided B".into()))?;
        let h = self.table.hurst();
        let noise = Driver::from_path(&self.sampler.sample(sigma.m, seed, path_index)?);
        let mut shifted = noise.clone();
        shifted.values = &noise.values + kh_rho;
        shifted.provenance.label = "fbm+K_H(rho)".into();
        let y = solve_additive(x0, drift, sigma, &noise)?;
        let x = solve_additive(x0, drift, sigma, &shifted)?;

        let sigma_sup = sigma.sup_norm(grid);
        let profile = gronwall_profile(rho, h, b, sigma_sup)?;
        let diff2: Vec<f64> = (0..grid.len())
            .map(|i| x.values.row(i).iter().zip(y.values.row(i)).map(|(a, c)| (a - c) * (a - c)).sum())
            .collect();
        let mut max_ratio = 0.0f64;
        let mut pointwise_ok = true;
        for (d, p) in diff2.iter().zip(&profile) {
            if *p > 0.0 {
                max_ratio = max_ratio.max(d / p);
            }
            pointwise_ok &= d <= p;
        }
        let rho_l2: f64 = rho.iter().map(|r| r.l2_norm_sq()).sum();
        let hv = h.value();
        let t_max = grid.t_max();
        let d2_bound = 2.0 / (b * b) * hv * t_max.powf(2.0 * hv - 1.0) * sigma_sup * sigma_sup * c_bt(b, t_max)? * rho_l2;
        let d2 = path_distance(grid, &x.values, &y.values, PathMetric::DTwo)?;
        let dinf = path_distance(grid, &x.values, &y.values, PathMetric::DInfinity)?;
        let check = GronwallCheck {
            max_ratio,
            pointwise_ok,
            dinf_sq: dinf * dinf,
            d2_sq: d2 * d2,
            d2_bound,
            d2_ok: d2 * d2 <= d2_bound,
        };
        Ok(CoupledPair { x, y, rho_energy: 0.5 * rho_l2, kh_rho: kh_rho.clone(), check })
    }
}

/// One drift-coupled pair driven by the fBm keyed by `seed`.
#[allow(clippy::too_many_arguments)]
pub fn drift_coupled_pair(
    x0: &[f64],
    drift: &DriftSpec,
    sigma: &TimeDiffusion,
    rho: &[StepFunction],
    h: HurstParam,
    grid: &TimeGrid,
    seed: u64,
) -> Result<CoupledPair> {
    DriftCoupling::new(grid, h)?.pair(x0, drift, sigma, rho, seed, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::sample_fbm_circulant;
    use approx::assert_relative_eq;

    fn h() -> HurstParam {
        HurstParam::new(0.75).unwrap()
    }

    #[test]
    fn identical_drivers_give_zero_ratio() {
        let grid = TimeGrid::new(0.5, 64).unwrap();
        let d = Driver::from_path(&sample_fbm_circulant(&grid, h(), 1, 3).unwrap());
        let r = coupled_stability(&[0.0], &DriftSpec::linear(-1.0, 1), &TimeDiffusion::identity(1), &d, &d, 0.6).unwrap();
        assert_eq!(r.sup_dist, 0.0);
        assert_eq!(r.ratio, 0.0);
        assert!(r.delta_ok);
        assert_eq!(r.delta, 0.5);
    }

    #[test]
    fn horizon_flag() {
        let grid = TimeGrid::new(0.6, 32).unwrap();
        let a = Driver::from_path(&sample_fbm_circulant(&grid, h(), 1, 1).unwrap());
        let b = Driver::from_path(&sample_fbm_circulant(&grid, h(), 1, 2).unwrap());
        let r = coupled_stability(&[0.0], &DriftSpec::linear(-1.0, 1), &TimeDiffusion::identity(1), &a, &b, 0.6).unwrap();
        assert!(!r.delta_ok);
        assert!(r.ratio > 0.0);
    }

    #[test]
    fn zero_rho_gives_identical_paths() {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let rho = vec![StepFunction::constant(&grid, 0.0)];
        let p = drift_coupled_pair(&[0.2], &DriftSpec::linear(-1.0, 1), &TimeDiffusion::identity(1), &rho, h(), &grid, 8)
            .unwrap();
        assert_eq!(p.x.values, p.y.values);
        assert_eq!(p.rho_energy, 0.0);
        assert!(p.check.pointwise_ok && p.check.d2_ok);
    }

    #[test]
    fn gronwall_profile_constant_rho_closed_form() {
        // B = -1: (2/1) H T^{2H-1} σ² ρ² (1 - e^{-t}).
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let rho = vec![StepFunction::constant(&grid, 0.7)];
        let p = gronwall_profile(&rho, h(), -1.0, 1.3).unwrap();
        for (i, &t) in grid.points().iter().enumerate() {
            let exact = 2.0 * 0.75 * 1.3f64.powi(2) * 0.49 * (1.0 - (-t).exp());
            assert_relative_eq!(p[i], exact, max_relative = 1e-12, epsilon = 1e-15);
        }
        assert!(gronwall_profile(&rho, h(), 0.0, 1.0).is_err());
    }

    #[test]
    fn constant_rho_pair_below_bound() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let rho = vec![StepFunction::constant(&grid, 1.0)];
        let coupling = DriftCoupling::new(&grid, h()).unwrap();
        for seed in 0..5 {
            let p = coupling.pair(&[0.0], &DriftSpec::linear(-1.0, 1), &TimeDiffusion::identity(1), &rho, seed, 0).unwrap();
            assert!(p.check.pointwise_ok, "ratio {}", p.check.max_ratio);
            assert!(p.check.d2_ok);
            assert_relative_eq!(p.rho_energy, 0.5, max_relative = 1e-12);
        }
    }
}
