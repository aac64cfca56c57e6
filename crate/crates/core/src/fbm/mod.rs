//! Fractional Brownian motion: covariance, the Volterra kernel of the
//! transfer representation, three samplers and discrete Hölder norms.

mod holder;
pub mod io;
mod kernel;
mod sampler;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub use holder::{holder_norm, holder_norm_1d, holder_norm_strided, holder_seminorm_1d, HolderNorm};
pub use kernel::{c_h, kernel_kh, kernel_kh_partial, KernelTable, PARTIAL_GAP_FLOOR};
pub use sampler::{
    sample_ensemble, sample_fbm_cholesky, sample_fbm_circulant, sample_fbm_transfer, CholeskySampler,
    CirculantSampler, FbmSampler, Generator, TransferSampler, CHOLESKY_MAX_STEPS, EMBEDDING_NEGATIVE_TOL,
};

/// Hurst index restricted to the Young regime `1/2 < H < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if h > 0.5 && h < 1.0 {
            Ok(Self(h))
        } else {
            domain(format!("Hurst parameter must satisfy 1/2 < H < 1, got {h}"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for HurstParam {
    type Error = crate::Error;
    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<HurstParam> for f64 {
    fn from(h: HurstParam) -> f64 {
        h.0
    }
}

/// Uniform grid `0 = t_0 < t_1 < ... < t_n = t_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct TimeGrid {
    t_max: f64,
    n_steps: usize,
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return domain(format!("grid horizon must be positive, got {t_max}"));
        }
        if n_steps == 0 {
            return domain("grid needs at least one step");
        }
        let points = (0..=n_steps)
            .map(|i| if i == n_steps { t_max } else { t_max * i as f64 / n_steps as f64 })
            .collect();
        Ok(Self { t_max, n_steps, points })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Midpoint of cell `k`, i.e. of `[t_k, t_{k+1}]`.
    pub fn midpoint(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.dt()
    }

    /// Same horizon and step count.
    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.n_steps == other.n_steps && self.t_max == other.t_max
    }

    /// Index of the grid point equal to `t` (within rounding), if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.dt();
        let i = x.round();
        if (x - i).abs() < 1e-9 && i >= 0.0 && i as usize <= self.n_steps {
            Some(i as usize)
        } else {
            None
        }
    }
}

/// Serialized form of a [`TimeGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub t_max: f64,
    pub n_steps: usize,
}

impl TryFrom<GridSpec> for TimeGrid {
    type Error = crate::Error;
    fn try_from(spec: GridSpec) -> Result<Self> {
        TimeGrid::new(spec.t_max, spec.n_steps)
    }
}

impl From<TimeGrid> for GridSpec {
    fn from(g: TimeGrid) -> Self {
        GridSpec { t_max: g.t_max, n_steps: g.n_steps }
    }
}

/// A sampled `m`-dimensional fBm trajectory. Row `i` holds `B_{t_i}`.
#[derive(Debug, Clone)]
pub struct FbmPath {
    pub grid: TimeGrid,
    pub values: Array2<f64>,
    pub hurst: HurstParam,
    pub generator: Generator,
    pub seed: u64,
    pub path_index: u64,
}

impl FbmPath {
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Component `j` as a contiguous vector.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.values.column(j).to_vec()
    }
}

/// `R_H(s, t) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2`.
pub fn covariance_rh(s: f64, t: f64, h: HurstParam) -> Result<f64> {
    if s < 0.0 || t < 0.0 {
        return domain(format!("covariance needs non-negative times, got ({s}, {t})"));
    }
    let two_h = 2.0 * h.value();
    Ok(0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn hurst_bounds() {
        assert!(HurstParam::new(0.5).is_err());
        assert!(HurstParam::new(1.0).is_err());
        assert!(HurstParam::new(0.5 + 1e-9).is_ok());
    }

    #[test]
    fn grid_endpoints_exact() {
        let g = TimeGrid::new(0.3, 7).unwrap();
        assert_eq!(g.points()[0], 0.0);
        assert_eq!(g.points()[7], 0.3);
        assert!(g.points().windows(2).all(|w| w[1] > w[0]));
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn covariance_examples() {
        let h = HurstParam::new(0.75).unwrap();
        assert_eq!(covariance_rh(1.0, 1.0, h).unwrap(), 1.0);
        assert_eq!(covariance_rh(0.0, 0.7, h).unwrap(), 0.0);
        assert_relative_eq!(covariance_rh(2.0, 2.0, h).unwrap(), 2f64.powf(1.5), max_relative = 1e-15);
        assert!(covariance_rh(-0.1, 1.0, h).is_err());
    }

    #[test]
    fn covariance_matrix_factorizes() {
        for &hv in &[0.5 + 1e-6, 0.6, 0.75, 0.9, 0.99] {
            let h = HurstParam::new(hv).unwrap();
            let grid = TimeGrid::new(2.0, 128).unwrap();
            assert!(CholeskySampler::new(&grid, h).is_ok(), "H = {hv}");
        }
    }

    proptest! {
        #[test]
        fn covariance_symmetric(s in 0.0f64..10.0, t in 0.0f64..10.0, hv in 0.501f64..0.999) {
            let h = HurstParam::new(hv).unwrap();
            prop_assert_eq!(covariance_rh(s, t, h).unwrap(), covariance_rh(t, s, h).unwrap());
        }
    }
}
