use std::sync::OnceLock;

use rayon::prelude::*;
use statrs::function::beta::beta;

use super::{HurstParam, TimeGrid};
use crate::error::{domain, Result};
use crate::quad::{integrate, QuadOptions};

/// Smallest admissible `(u - s) / max(u, 1)` for [`kernel_kh_partial`]; the
/// derivative blows up like `(u - s)^{H - 3/2}` below it.
pub const PARTIAL_GAP_FLOOR: f64 = 1e-12;

/// Normalizing constant `c_H = (H(2H-1) / B(2-2H, H-1/2))^{1/2}`.
pub fn c_h(h: HurstParam) -> f64 {
    let hv = h.value();
    (hv * (2.0 * hv - 1.0) / beta(2.0 - 2.0 * hv, hv - 0.5)).sqrt()
}

/// Volterra kernel `K_H(t, s)` of the transfer representation
/// `B^H_t = ∫_0^t K_H(t, s) dW_s`, zero for `s >= t`.
///
/// The `(u - s)^{H - 3/2}` endpoint singularity is removed with
/// `u = s + w^{1/(H - 1/2)}`, which turns the integrand into the smooth
/// `(s + w^{1/(H-1/2)})^{H-1/2} / (H - 1/2)` on `[0, (t - s)^{H - 1/2}]`.
pub fn kernel_kh(t: f64, s: f64, h: HurstParam) -> Result<f64> {
    if t < 0.0 {
        return domain(format!("kernel needs t >= 0, got {t}"));
    }
    if s <= 0.0 {
        return domain(format!("kernel diverges at s = {s} (factor s^(1/2-H))"));
    }
    if s >= t {
        return Ok(0.0);
    }
    let a = h.value() - 0.5;
    let inv_a = 1.0 / a;
    let upper = (t - s).powf(a);
    let q = integrate(|w: f64| (s + w.powf(inv_a)).powf(a), 0.0, upper, QuadOptions::rel(1e-12))?;
    Ok(c_h(h) * s.powf(-a) * q.value * inv_a)
}

/// `∂K_H/∂u (u, s) = c_H (u/s)^{H-1/2} (u - s)^{H-3/2}` for `0 < s < u`.
///
/// Gaps `u - s` below `PARTIAL_GAP_FLOOR * max(u, 1)` are rejected.
pub fn kernel_kh_partial(u: f64, s: f64, h: HurstParam) -> Result<f64> {
    if s <= 0.0 || s >= u {
        return domain(format!("kernel derivative needs 0 < s < u, got s = {s}, u = {u}"));
    }
    if u - s < PARTIAL_GAP_FLOOR * u.max(1.0) {
        return domain(format!("gap u - s = {:e} below the singularity floor", u - s));
    }
    let a = h.value() - 0.5;
    Ok(c_h(h) * (u / s).powf(a) * (u - s).powf(a - 1.0))
}

/// Kernel values on a grid, shared by the transfer sampler and the
/// `K_H` / `K_H*` operators.
///
/// `midpoint(i, k) = K_H(t_i, (t_k + t_{k+1})/2)` for `k < i`, and lazily
/// `cell(i, k) = ∫_{t_k}^{t_{k+1}} K_H(t_i, s) ds`.
#[derive(Debug)]
pub struct KernelTable {
    grid: TimeGrid,
    hurst: HurstParam,
    mid: Vec<Vec<f64>>,
    cells: OnceLock<Vec<Vec<f64>>>,
}

impl KernelTable {
    pub fn new(grid: &TimeGrid, hurst: HurstParam) -> Result<Self> {
        let n = grid.n_steps();
        let mid = (0..=n)
            .into_par_iter()
            .map(|i| {
                let t = grid.points()[i];
                (0..i).map(|k| kernel_kh(t, grid.midpoint(k), hurst)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { grid: grid.clone(), hurst, mid, cells: OnceLock::new() })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    /// Row `i`: `K_H(t_i, m_k)` for `k = 0..i`.
    pub fn midpoint_row(&self, i: usize) -> &[f64] {
        &self.mid[i]
    }

    /// Row `i`: `∫_{cell k} K_H(t_i, s) ds` for `k = 0..i`.
    pub fn cell_row(&self, i: usize) -> &[f64] {
        &self.cells()[i]
    }

    fn cells(&self) -> &Vec<Vec<f64>> {
        self.cells.get_or_init(|| {
            let grid = &self.grid;
            let h = self.hurst;
            (0..=grid.n_steps())
                .into_par_iter()
                .map(|i| {
                    let t = grid.points()[i];
                    (0..i)
                        .map(|k| cell_integral(t, grid.points()[k], grid.points()[k + 1], h))
                        .collect::<Vec<_>>()
                })
                .collect()
        })
    }
}

/// `∫_{s0}^{s1} K_H(t, s) ds` with `s1 <= t`.
fn cell_integral(t: f64, s0: f64, s1: f64, h: HurstParam) -> f64 {
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-9, max_intervals: 200 };
    let kernel = |s: f64| kernel_kh(t, s, h).unwrap_or(0.0);
    let result = if s0 == 0.0 {
        // K_H(t, s) ~ s^{1/2-H} near zero: s = s1 x^p with p = 1/(3/2 - H).
        let p = 1.0 / (1.5 - h.value());
        integrate(|x: f64| kernel(s1 * x.powf(p)) * s1 * p * x.powf(p - 1.0), 0.0, 1.0, opts)
    } else {
        integrate(kernel, s0, s1, opts)
    };
    // The integrand is bounded and smooth enough that a failed refinement
    // still carries an accurate estimate.
    match result {
        Ok(q) => q.value,
        Err(_) => integrate(kernel, s0, s1, QuadOptions { max_intervals: 5000, ..opts }).map(|q| q.value).unwrap_or(f64::NAN),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn kernel_vanishes_above_diagonal() {
        assert_eq!(kernel_kh(1.0, 1.5, h(0.75)).unwrap(), 0.0);
        assert_eq!(kernel_kh(1.0, 1.0, h(0.75)).unwrap(), 0.0);
    }

    #[test]
    fn kernel_rejects_zero_s() {
        assert!(kernel_kh(1.0, 0.0, h(0.75)).is_err());
    }

    #[test]
    fn c_h_reference() {
        // c_{3/4} = (3/8 / B(1/2, 1/4))^{1/2}, evaluated at 30 digits.
        assert_relative_eq!(c_h(h(0.75)), 0.267_411_158_757_997_6, max_relative = 1e-12);
    }

    #[test]
    fn partial_closed_form_at_double_gap() {
        for &(hv, s) in &[(0.6f64, 0.3f64), (0.75, 1.0), (0.9, 2.5)] {
            let hp = h(hv);
            let expected = c_h(hp) * 2f64.powf(hv - 0.5) * s.powf(hv - 1.5);
            assert_relative_eq!(kernel_kh_partial(2.0 * s, s, hp).unwrap(), expected, max_relative = 1e-14);
        }
    }

    #[test]
    fn partial_floor_enforced() {
        assert!(kernel_kh_partial(1.0, 1.0 - 1e-13, h(0.75)).is_err());
        assert!(kernel_kh_partial(1.0, 1.0 - 1e-10, h(0.75)).unwrap().is_finite());
        assert!(kernel_kh_partial(1.0, 1.2, h(0.75)).is_err());
    }

    #[test]
    fn cell_rows_sum_to_kernel_integral() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let table = KernelTable::new(&grid, h(0.75)).unwrap();
        let total: f64 = table.cell_row(16).iter().sum();
        let p = 1.0 / (1.5 - 0.75);
        let direct = integrate(
            |x: f64| kernel_kh(1.0, x.powf(p), h(0.75)).unwrap() * p * x.powf(p - 1.0),
            0.0,
            1.0,
            QuadOptions::rel(1e-10),
        )
        .unwrap()
        .value;
        assert_relative_eq!(total, direct, max_relative = 1e-7);
    }
}
