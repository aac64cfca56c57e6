use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta as beta_fn;

use super::GridFunction;
use crate::error::{domain, Result};
use crate::fbm::{c_h, holder_seminorm_1d, kernel_kh, HurstParam, KernelTable, TimeGrid};

/// A function that is constant on each grid cell `(t_k, t_{k+1}]`.
///
/// The `L²` operators act on these exactly: `K_H*` of a step function is a
/// finite sum of kernel values, and the `H` scalar product of two step
/// functions is a finite double sum.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    grid: TimeGrid,
    cells: Vec<f64>,
}

impl StepFunction {
    pub fn new(grid: TimeGrid, cells: Vec<f64>) -> Result<Self> {
        if cells.len() != grid.n_steps() {
            return domain(format!("{} cell values for a grid of {} cells", cells.len(), grid.n_steps()));
        }
        if cells.iter().any(|v| !v.is_finite()) {
            return domain("step function has non-finite values");
        }
        Ok(Self { grid, cells })
    }

    /// Cell `k` takes the grid value at its right end, `φ(t_{k+1})`.
    pub fn from_grid_function(f: &GridFunction) -> Self {
        Self { grid: f.grid().clone(), cells: f.values()[1..].to_vec() }
    }

    pub fn constant(grid: &TimeGrid, c: f64) -> Self {
        Self { grid: grid.clone(), cells: vec![c; grid.n_steps()] }
    }

    /// `1_{[0, t_i]}`.
    pub fn indicator(grid: &TimeGrid, i: usize) -> Self {
        let cells = (0..grid.n_steps()).map(|k| if k < i { 1.0 } else { 0.0 }).collect();
        Self { grid: grid.clone(), cells }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.cells.iter().map(|v| v * v).sum::<f64>() * self.grid.dt()
    }
}

/// `(K_H* φ)(s) = ∫_s^T φ(r) ∂K_H/∂r(r, s) dr` at a single `s ∈ (0, T)`.
///
/// For a step function the integral telescopes cell by cell into
/// `Σ_k φ_k [K_H(t_{k+1}, s) - K_H(max(t_k, s), s)]`, so the
/// `(r - s)^{H-3/2}` singularity never has to be integrated numerically.
pub fn kh_star_at(phi: &StepFunction, h: HurstParam, s: f64) -> Result<f64> {
    let grid = phi.grid();
    if !(s > 0.0 && s < grid.t_max()) {
        return domain(format!("K_H* is evaluated on (0, T), got s = {s}"));
    }
    let t = grid.points();
    let mut acc = 0.0;
    for (k, &v) in phi.cells().iter().enumerate() {
        if v == 0.0 || t[k + 1] <= s {
            continue;
        }
        let lower = if t[k] > s { kernel_kh(t[k], s, h)? } else { 0.0 };
        acc += v * (kernel_kh(t[k + 1], s, h)? - lower);
    }
    Ok(acc)
}

/// `K_H* φ` at the cell midpoints, returned as a step function.
pub fn operator_kh_star(phi: &StepFunction, table: &KernelTable) -> Result<StepFunction> {
    let grid = phi.grid();
    if !grid.same_as(table.grid()) {
        return domain("step function and kernel table use different grids");
    }
    let n = grid.n_steps();
    let cells = (0..n)
        .into_par_iter()
        .map(|j| {
            // K_H(t_j, m_j) = 0 because m_j > t_j.
            let mut prev = 0.0;
            let mut acc = 0.0;
            for k in j..n {
                let next = table.midpoint_row(k + 1)[j];
                acc += phi.cells()[k] * (next - prev);
                prev = next;
            }
            acc
        })
        .collect();
    StepFunction::new(grid.clone(), cells)
}

/// `K_H ρ` on the grid together with the empirical `H`-Hölder seminorm
/// of the result divided by `‖ρ‖_{L²}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KhOutput {
    pub path: GridFunction,
    pub holder_ratio: f64,
}

/// `(K_H ρ)(t_i) = ∫_0^{t_i} K_H(t_i, s) ρ(s) ds`, exact up to the
/// quadrature of the kernel over each cell.
pub fn operator_kh_with(rho: &StepFunction, table: &KernelTable) -> Result<KhOutput> {
    let grid = rho.grid();
    if !grid.same_as(table.grid()) {
        return domain("step function and kernel table use different grids");
    }
    let values: Vec<f64> = (0..=grid.n_steps())
        .map(|i| table.cell_row(i).iter().zip(rho.cells()).map(|(k, r)| k * r).sum())
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(crate::Error::Numerical { msg: "kernel cell integral did not converge".into(), achieved: f64::NAN });
    }
    let l2 = rho.l2_norm_sq().sqrt();
    let semi = holder_seminorm_1d(&values, grid.dt(), table.hurst().value());
    let holder_ratio = if l2 == 0.0 { 0.0 } else { semi / l2 };
    Ok(KhOutput { path: GridFunction::new(grid.clone(), values)?, holder_ratio })
}

/// As [`operator_kh_with`], building the kernel table first.
pub fn operator_kh(rho: &StepFunction, h: HurstParam) -> Result<KhOutput> {
    let table = KernelTable::new(rho.grid(), h)?;
    operator_kh_with(rho, &table)
}

/// `∫_0^t K_H(t, s) ds = c_H B(3/2 - H, H - 1/2) t^{H+1/2} / (H + 1/2)`.
pub fn kh_unit_closed_form(t: f64, h: HurstParam) -> f64 {
    let hv = h.value();
    c_h(h) * beta_fn(1.5 - hv, hv - 0.5) * t.powf(hv + 0.5) / (hv + 0.5)
}

/// `⟨φ, ψ⟩_H` and the comparison bound `2H T^{2H-1} ‖φ‖_{L²} ‖ψ‖_{L²}`
/// (equal to `2H T^{2H-1} ‖φ‖²` when `φ = ψ`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HProduct {
    pub value: f64,
    pub ineg_bound: f64,
}

/// `H(2H-1) ∫∫ |s-t|^{2H-2} φ(s) ψ(t) ds dt` for step functions. The
/// kernel integrates in closed form over each pair of cells:
/// `(dt^{2H}/2)(|d+1|^{2H} - 2|d|^{2H} + |d-1|^{2H})` at lag `d`.
pub fn scalar_product_h(phi: &StepFunction, psi: &StepFunction, h: HurstParam) -> Result<HProduct> {
    let grid = phi.grid();
    if !grid.same_as(psi.grid()) {
        return domain("scalar product of step functions on different grids");
    }
    let n = grid.n_steps();
    let e = 2.0 * h.value();
    let scale = 0.5 * grid.dt().powf(e);
    let w: Vec<f64> = (0..n)
        .map(|d| {
            let d = d as f64;
            scale * ((d + 1.0).powf(e) - 2.0 * d.powf(e) + (d - 1.0).abs().powf(e))
        })
        .collect();
    let (p, q) = (phi.cells(), psi.cells());
    let value = (0..n)
        .into_par_iter()
        .map(|j| {
            if p[j] == 0.0 {
                return 0.0;
            }
            p[j] * (0..n).map(|k| q[k] * w[j.abs_diff(k)]).sum::<f64>()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let ineg_bound = e * grid.t_max().powf(e - 1.0) * (phi.l2_norm_sq() * psi.l2_norm_sq()).sqrt();
    Ok(HProduct { value, ineg_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::covariance_rh;
    use approx::assert_relative_eq;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn indicator_scalar_product_is_covariance() {
        let grid = TimeGrid::new(2.0, 40).unwrap();
        for &(i, j) in &[(40, 40), (13, 13), (7, 30)] {
            let p = scalar_product_h(&StepFunction::indicator(&grid, i), &StepFunction::indicator(&grid, j), h(0.7))
                .unwrap();
            let t = grid.points();
            assert_relative_eq!(p.value, covariance_rh(t[i], t[j], h(0.7)).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_inputs() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let z = StepFunction::constant(&grid, 0.0);
        assert_eq!(scalar_product_h(&z, &z, h(0.8)).unwrap().value, 0.0);
        let table = KernelTable::new(&grid, h(0.8)).unwrap();
        assert!(operator_kh_star(&z, &table).unwrap().cells().iter().all(|&v| v == 0.0));
        let out = operator_kh_with(&z, &table).unwrap();
        assert!(out.path.values().iter().all(|&v| v == 0.0));
        assert_eq!(out.holder_ratio, 0.0);
        assert_eq!(kh_star_at(&z, h(0.8), 0.3).unwrap(), 0.0);
    }

    #[test]
    fn kh_star_of_indicator_is_kernel() {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let hp = h(0.75);
        let phi = StepFunction::indicator(&grid, 20);
        let table = KernelTable::new(&grid, hp).unwrap();
        let out = operator_kh_star(&phi, &table).unwrap();
        for j in 0..32 {
            let expected = kernel_kh(grid.points()[20], grid.midpoint(j), hp).unwrap();
            assert_relative_eq!(out.cells()[j], expected, max_relative = 1e-12, epsilon = 1e-300);
            assert_relative_eq!(kh_star_at(&phi, hp, grid.midpoint(j)).unwrap(), expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn kh_of_unit_matches_closed_form() {
        let grid = TimeGrid::new(1.5, 24).unwrap();
        let hp = h(0.7);
        let out = operator_kh(&StepFunction::constant(&grid, 1.0), hp).unwrap();
        for i in [1, 5, 24] {
            let t = grid.points()[i];
            assert_relative_eq!(out.path.values()[i], kh_unit_closed_form(t, hp), max_relative = 1e-7);
        }
        assert!(out.holder_ratio.is_finite() && out.holder_ratio > 0.0);
    }
}
