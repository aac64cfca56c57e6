//! Pathwise Euler solvers for SDEs driven by fBm, the Lamperti transform
//! for scalar equations, and the two coupling experiments: the stability
//! of solutions under a change of driver, and the drift-shifted pair used
//! for quadratic transport bounds.

mod coupling;
mod solve;

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::fbm::{holder_norm, FbmPath, Generator, HolderNorm, TimeGrid};
use crate::rng::{stream, Purpose};

pub use coupling::{
    coupled_stability, drift_coupled_pair, gronwall_profile, CoupledPair, DriftCoupling, GronwallCheck,
    StabilityReport,
};
pub use solve::{
    lamperti_drift_lipschitz, lamperti_forward, lamperti_inverse, solve_additive, solve_scalar,
    solve_scalar_via_lamperti, LampertiMap,
};

type VecField = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Drift `b: R^d → R^d` with the constants the caller vouches for.
#[derive(Clone)]
pub struct DriftSpec {
    pub name: String,
    pub dim: usize,
    f: Arc<VecField>,
    /// `|b(x) - b(y)| ≤ L_b |x - y|`.
    pub lipschitz: f64,
    /// `sup |b|`, if finite.
    pub bound: Option<f64>,
    /// `⟨x - y, b(x) - b(y)⟩ ≤ B |x - y|²`, if declared.
    pub one_sided: Option<f64>,
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .field("bound", &self.bound)
            .field("one_sided", &self.one_sided)
            .finish()
    }
}

impl DriftSpec {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        lipschitz: f64,
        bound: Option<f64>,
        one_sided: Option<f64>,
    ) -> Self {
        Self { name: name.into(), dim, f: Arc::new(f), lipschitz, bound, one_sided }
    }

    /// Componentwise application of a scalar map.
    pub fn scalar(
        name: impl Into<String>,
        dim: usize,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lipschitz: f64,
        bound: Option<f64>,
        one_sided: Option<f64>,
    ) -> Self {
        Self::new(
            name,
            dim,
            move |x: &[f64], out: &mut [f64]| {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = f(xi);
                }
            },
            lipschitz,
            bound,
            one_sided,
        )
    }

    pub fn zero(dim: usize) -> Self {
        Self::scalar("zero", dim, |_| 0.0, 0.0, Some(0.0), Some(0.0))
    }

    /// `b(x) = a x`.
    pub fn linear(a: f64, dim: usize) -> Self {
        Self::scalar(format!("linear({a})"), dim, move |x| a * x, a.abs(), if a == 0.0 { Some(0.0) } else { None }, Some(a))
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }

    pub fn eval_scalar(&self, x: f64) -> f64 {
        let mut out = [0.0];
        (self.f)(&[x], &mut out);
        out[0]
    }

    /// Empirical check of the declared constants on `n_pairs` random pairs
    /// of points drawn as `N(0, scale²)` in each coordinate.
    pub fn spot_check(&self, seed: u64, n_pairs: usize, scale: f64) -> SpotCheck {
        let mut rng = stream(seed, Purpose::SpotCheck, 0, 0);
        let d = self.dim;
        let (mut lip, mut os, mut sup) = (0.0f64, f64::NEG_INFINITY, 0.0f64);
        let (mut bx, mut by) = (vec![0.0; d], vec![0.0; d]);
        for _ in 0..n_pairs {
            let x: Vec<f64> = (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
            let y: Vec<f64> = (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
            self.eval(&x, &mut bx);
            self.eval(&y, &mut by);
            let dist2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist2 == 0.0 {
                continue;
            }
            let db2: f64 = bx.iter().zip(&by).map(|(a, b)| (a - b) * (a - b)).sum();
            let inner: f64 = x.iter().zip(&y).zip(bx.iter().zip(&by)).map(|((a, b), (c, e))| (a - b) * (c - e)).sum();
            lip = lip.max((db2 / dist2).sqrt());
            os = os.max(inner / dist2);
            sup = sup.max(bx.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
        let tol = |v: f64| v * (1.0 + 1e-9) + 1e-12;
        let mut violations = Vec::new();
        if lip > tol(self.lipschitz) {
            violations.push(format!("Lipschitz ratio {lip} exceeds declared L_b = {}", self.lipschitz));
        }
        if let Some(b) = self.one_sided {
            if os > tol(b) {
                violations.push(format!("one-sided ratio {os} exceeds declared B = {b}"));
            }
        }
        if let Some(b) = self.bound {
            if sup > tol(b) {
                violations.push(format!("|b| reaches {sup}, above declared bound {b}"));
            }
        }
        SpotCheck { samples: n_pairs, lipschitz: lip, one_sided: os, sup, violations }
    }
}

/// Empirical counterparts of declared hypothesis constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub samples: usize,
    pub lipschitz: f64,
    pub one_sided: f64,
    pub sup: f64,
    pub violations: Vec<String>,
}

impl SpotCheck {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

type MatrixFn = dyn Fn(f64) -> Array2<f64> + Send + Sync;

/// Time-dependent diffusion matrix `σ: [0, T] → R^{d×m}`.
///
/// Norms of `σ` use the Frobenius norm of the matrix, which dominates the
/// operator norm, so bounds built from them are conservative.
#[derive(Clone)]
pub struct TimeDiffusion {
    pub d: usize,
    pub m: usize,
    f: Arc<MatrixFn>,
    /// Declared Hölder constant and exponent of `t ↦ σ(t)`.
    pub holder_const: f64,
    pub holder_exp: f64,
}

impl fmt::Debug for TimeDiffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeDiffusion")
            .field("d", &self.d)
            .field("m", &self.m)
            .field("holder_const", &self.holder_const)
            .field("holder_exp", &self.holder_exp)
            .finish()
    }
}

impl TimeDiffusion {
    pub fn new(
        d: usize,
        m: usize,
        f: impl Fn(f64) -> Array2<f64> + Send + Sync + 'static,
        holder_const: f64,
        holder_exp: f64,
    ) -> Self {
        Self { d, m, f: Arc::new(f), holder_const, holder_exp }
    }

    pub fn constant(matrix: Array2<f64>) -> Self {
        let (d, m) = matrix.dim();
        Self::new(d, m, move |_| matrix.clone(), 0.0, 1.0)
    }

    pub fn identity(d: usize) -> Self {
        Self::constant(Array2::eye(d))
    }

    /// Scalar `σ(t)` for `d = m = 1`.
    pub fn scalar(f: impl Fn(f64) -> f64 + Send + Sync + 'static, holder_const: f64, holder_exp: f64) -> Self {
        Self::new(1, 1, move |t| Array2::from_elem((1, 1), f(t)), holder_const, holder_exp)
    }

    pub fn eval(&self, t: f64) -> Array2<f64> {
        (self.f)(t)
    }

    /// Grid Hölder norm of `t ↦ σ(t)` on `[0, T]`.
    pub fn holder_norm(&self, grid: &TimeGrid, beta: f64) -> Result<HolderNorm> {
        let k = self.d * self.m;
        let mut flat = Array2::zeros((grid.len(), k));
        for (i, &t) in grid.points().iter().enumerate() {
            for (j, v) in self.eval(t).iter().enumerate() {
                flat[(i, j)] = *v;
            }
        }
        holder_norm(grid, &flat, beta, (0.0, grid.t_max()))
    }

    /// `sup_t ‖σ(t)‖` over the grid.
    pub fn sup_norm(&self, grid: &TimeGrid) -> f64 {
        grid.points().iter().map(|&t| self.eval(t).iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max)
    }
}

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// State-dependent scalar diffusion `σ: R → [σ1, σ2]`.
#[derive(Clone)]
pub struct ScalarDiffusion {
    f: Arc<ScalarFn>,
    pub sigma1: f64,
    pub sigma2: f64,
    pub lipschitz: f64,
}

impl fmt::Debug for ScalarDiffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarDiffusion")
            .field("sigma1", &self.sigma1)
            .field("sigma2", &self.sigma2)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl ScalarDiffusion {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, sigma1: f64, sigma2: f64, lipschitz: f64) -> Result<Self> {
        if !(sigma1 > 0.0 && sigma2 >= sigma1) {
            return domain(format!("need 0 < sigma1 <= sigma2, got {sigma1}, {sigma2}"));
        }
        Ok(Self { f: Arc::new(f), sigma1, sigma2, lipschitz })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(move |_| c, c, c, 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// Checks `σ1 ≤ σ ≤ σ2` and the Lipschitz constant at random points.
    pub fn spot_check(&self, seed: u64, n_points: usize, scale: f64) -> SpotCheck {
        let mut rng = stream(seed, Purpose::SpotCheck, 1, 0);
        let (mut lo, mut hi, mut lip) = (f64::INFINITY, 0.0f64, 0.0f64);
        for _ in 0..n_points {
            let x: f64 = scale * rng.sample::<f64, _>(StandardNormal);
            let y: f64 = scale * rng.sample::<f64, _>(StandardNormal);
            let (sx, sy) = (self.eval(x), self.eval(y));
            lo = lo.min(sx).min(sy);
            hi = hi.max(sx).max(sy);
            if x != y {
                lip = lip.max((sx - sy).abs() / (x - y).abs());
            }
        }
        let mut violations = Vec::new();
        if lo < self.sigma1 * (1.0 - 1e-12) {
            violations.push(format!("sigma reaches {lo}, below sigma1 = {}", self.sigma1));
        }
        if hi > self.sigma2 * (1.0 + 1e-12) {
            violations.push(format!("sigma reaches {hi}, above sigma2 = {}", self.sigma2));
        }
        if lip > self.lipschitz * (1.0 + 1e-9) + 1e-12 {
            violations.push(format!("Lipschitz ratio {lip} exceeds declared L_sigma = {}", self.lipschitz));
        }
        SpotCheck { samples: n_points, lipschitz: lip, one_sided: f64::NAN, sup: hi, violations }
    }
}

/// Which kind of diffusion coefficient an equation has.
#[derive(Debug, Clone)]
pub enum DiffusionSpec {
    TimeMatrix(TimeDiffusion),
    ScalarState(ScalarDiffusion),
}

/// Where a driving path came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverRef {
    pub label: String,
    pub seed: Option<u64>,
    pub path_index: Option<u64>,
    pub generator: Option<Generator>,
}

/// A Hölder driving signal `g` on a grid, one column per component.
#[derive(Debug, Clone)]
pub struct Driver {
    pub grid: TimeGrid,
    pub values: Array2<f64>,
    pub provenance: DriverRef,
}

impl Driver {
    pub fn new(grid: TimeGrid, values: Array2<f64>, label: impl Into<String>) -> Result<Self> {
        if values.nrows() != grid.len() {
            return domain(format!("driver has {} rows for {} grid points", values.nrows(), grid.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("driver has non-finite values");
        }
        Ok(Self {
            grid,
            values,
            provenance: DriverRef { label: label.into(), seed: None, path_index: None, generator: None },
        })
    }

    pub fn from_path(path: &FbmPath) -> Self {
        Self {
            grid: path.grid.clone(),
            values: path.values.clone(),
            provenance: DriverRef {
                label: "fbm".into(),
                seed: Some(path.seed),
                path_index: Some(path.path_index),
                generator: Some(path.generator),
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

impl From<FbmPath> for Driver {
    fn from(p: FbmPath) -> Self {
        Driver::from_path(&p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Euler,
    Lamperti,
}

/// Numerical solution on a grid. Row `k` holds `X_{t_k}`.
#[derive(Debug, Clone)]
pub struct SolutionPath {
    pub grid: TimeGrid,
    pub values: Array2<f64>,
    pub x0: Vec<f64>,
    pub driver: DriverRef,
    pub scheme: Scheme,
}

impl SolutionPath {
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn component(&self, j: usize) -> Vec<f64> {
        self.values.column(j).to_vec()
    }
}
