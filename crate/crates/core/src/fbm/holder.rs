use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TimeGrid;
use crate::error::{domain, Result};

/// Discrete Hölder norm of a path over a window: the sup norm plus the
/// `β`-seminorm, both taken over grid points only. The continuum norm can
/// only be larger, so inequality checks built on these are necessary
/// conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderNorm {
    pub window: (f64, f64),
    pub sup_norm: f64,
    pub seminorm_beta: f64,
    pub beta: f64,
}

impl HolderNorm {
    pub fn total(&self) -> f64 {
        self.sup_norm + self.seminorm_beta
    }
}

fn window_indices(grid: &TimeGrid, window: (f64, f64)) -> Result<(usize, usize)> {
    let (a, b) = window;
    let eps = 1e-9 * grid.t_max();
    if !(a < b) || a < -eps || b > grid.t_max() + eps {
        return domain(format!("window [{a}, {b}] is not inside [0, {}]", grid.t_max()));
    }
    let dt = grid.dt();
    let lo = ((a / dt) - 1e-9).ceil().max(0.0) as usize;
    let hi = (((b / dt) + 1e-9).floor() as usize).min(grid.n_steps());
    if hi <= lo {
        return domain(format!("window [{a}, {b}] contains fewer than two grid points"));
    }
    Ok((lo, hi))
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return domain(format!("Hölder exponent must lie in (0, 1), got {beta}"));
    }
    Ok(())
}

fn euclid(values: &ArrayView2<f64>, i: usize, j: usize) -> f64 {
    values.row(i).iter().zip(values.row(j).iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn norm_core(values: ArrayView2<f64>, dt: f64, beta: f64, lo: usize, hi: usize, stride: usize) -> (f64, f64) {
    let idx: Vec<usize> = (lo..=hi).step_by(stride).chain(std::iter::once(hi)).collect();
    let mut idx = idx;
    idx.dedup();
    let sup = idx
        .iter()
        .map(|&i| values.row(i).iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let semi = (0..idx.len())
        .into_par_iter()
        .map(|p| {
            let i = idx[p];
            idx[p + 1..]
                .iter()
                .map(|&j| euclid(&values, i, j) / ((j - i) as f64 * dt).powf(beta))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    (sup, semi)
}

/// Hölder norm of an `(n+1) × m` path (Euclidean norm on each row) over
/// `window`, using every grid pair.
pub fn holder_norm(grid: &TimeGrid, values: &Array2<f64>, beta: f64, window: (f64, f64)) -> Result<HolderNorm> {
    holder_norm_strided(grid, values, beta, window, 1)
}

/// As [`holder_norm`] but only over every `stride`-th grid point of the
/// window (plus its right end). This is a lower bound for the full value.
pub fn holder_norm_strided(
    grid: &TimeGrid,
    values: &Array2<f64>,
    beta: f64,
    window: (f64, f64),
    stride: usize,
) -> Result<HolderNorm> {
    check_beta(beta)?;
    if values.nrows() != grid.len() {
        return domain(format!("path has {} rows, grid has {} points", values.nrows(), grid.len()));
    }
    if stride == 0 {
        return domain("stride must be positive");
    }
    let (lo, hi) = window_indices(grid, window)?;
    let (sup_norm, seminorm_beta) = norm_core(values.view(), grid.dt(), beta, lo, hi, stride);
    Ok(HolderNorm { window, sup_norm, seminorm_beta, beta })
}

/// Hölder norm of a scalar path.
pub fn holder_norm_1d(grid: &TimeGrid, values: &[f64], beta: f64, window: (f64, f64)) -> Result<HolderNorm> {
    check_beta(beta)?;
    if values.len() != grid.len() {
        return domain(format!("path has {} points, grid has {}", values.len(), grid.len()));
    }
    let (lo, hi) = window_indices(grid, window)?;
    let view = ArrayView2::from_shape((values.len(), 1), values).expect("contiguous slice");
    let (sup_norm, seminorm_beta) = norm_core(view, grid.dt(), beta, lo, hi, 1);
    Ok(HolderNorm { window, sup_norm, seminorm_beta, beta })
}

/// `β`-seminorm of uniformly spaced scalar samples over their full range.
pub fn holder_seminorm_1d(values: &[f64], dt: f64, beta: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let view = ArrayView2::from_shape((n, 1), values).expect("contiguous slice");
    norm_core(view, dt, beta, 0, n - 1, 1).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_and_constant_paths() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let n = holder_norm_1d(&grid, &[0.0; 11], 0.5, (0.0, 1.0)).unwrap();
        assert_eq!((n.sup_norm, n.seminorm_beta), (0.0, 0.0));
        let n = holder_norm_1d(&grid, &[-2.5; 11], 0.5, (0.0, 1.0)).unwrap();
        assert_eq!((n.sup_norm, n.seminorm_beta), (2.5, 0.0));
    }

    #[test]
    fn identity_path() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let n = holder_norm_1d(&grid, grid.points(), 0.5, (0.0, 1.0)).unwrap();
        assert_relative_eq!(n.sup_norm, 1.0);
        assert_relative_eq!(n.seminorm_beta, 1.0, max_relative = 1e-14);
        assert_relative_eq!(n.total(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn window_errors() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let v = vec![0.0; 11];
        assert!(holder_norm_1d(&grid, &v, 0.5, (0.0, 1.5)).is_err());
        assert!(holder_norm_1d(&grid, &v, 0.5, (0.5, 0.5)).is_err());
        assert!(holder_norm_1d(&grid, &v, 0.5, (0.51, 0.55)).is_err());
        assert!(holder_norm_1d(&grid, &v, 1.0, (0.0, 1.0)).is_err());
    }

    #[test]
    fn stride_is_lower_bound() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let v: Vec<f64> = grid.points().iter().map(|t| (17.0 * t).sin() + t.sqrt()).collect();
        let a = Array2::from_shape_vec((101, 1), v).unwrap();
        let full = holder_norm(&grid, &a, 0.6, (0.0, 1.0)).unwrap();
        let strided = holder_norm_strided(&grid, &a, 0.6, (0.0, 1.0), 7).unwrap();
        assert!(strided.seminorm_beta <= full.seminorm_beta);
        assert!(strided.sup_norm <= full.sup_norm);
    }

    proptest! {
        #[test]
        fn window_monotone_and_homogeneous(
            vals in proptest::collection::vec(-5.0f64..5.0, 33),
            c in -3.0f64..3.0,
            a in 0usize..10, b in 20usize..33,
        ) {
            let grid = TimeGrid::new(2.0, 32).unwrap();
            let inner = (grid.points()[a + 2], grid.points()[b - 2]);
            let outer = (grid.points()[a], grid.points()[b]);
            let ni = holder_norm_1d(&grid, &vals, 0.7, inner).unwrap();
            let no = holder_norm_1d(&grid, &vals, 0.7, outer).unwrap();
            prop_assert!(no.sup_norm >= ni.sup_norm);
            prop_assert!(no.seminorm_beta >= ni.seminorm_beta);
            let scaled: Vec<f64> = vals.iter().map(|v| c * v).collect();
            let ns = holder_norm_1d(&grid, &scaled, 0.7, outer).unwrap();
            prop_assert!((ns.seminorm_beta - c.abs() * no.seminorm_beta).abs() <= 1e-12 * (1.0 + no.seminorm_beta));
        }
    }
}
