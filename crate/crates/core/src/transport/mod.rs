//! Path-space metrics, empirical Wasserstein distances between path
//! ensembles, discrete relative entropy and the transportation constants.

mod assignment;
mod constants;
mod sinkhorn;

use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::fbm::{FbmPath, TimeGrid};
use crate::sde::SolutionPath;

pub use assignment::hungarian;
pub use constants::{c_bt, transport_constant, ConstantTag, TransportConstants, TransportParams};
pub use sinkhorn::{sinkhorn, SinkhornOptions, SinkhornResult};

/// Largest ensemble size (after replication to a common count) solved by
/// exact assignment.
pub const EXACT_CUTOFF: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMetric {
    /// `sup_t |γ1(t) - γ2(t)|` over grid points.
    DInfinity,
    /// `(∫_0^T |γ1 - γ2|² dt)^{1/2}` by the trapezoidal rule.
    DTwo,
}

/// Distance between two paths stored as `(n+1) × d` arrays on `grid`.
pub fn path_distance(grid: &TimeGrid, a: &Array2<f64>, b: &Array2<f64>, metric: PathMetric) -> Result<f64> {
    if a.dim() != b.dim() || a.nrows() != grid.len() {
        return domain(format!("path shapes {:?} and {:?} do not match a grid of {} points", a.dim(), b.dim(), grid.len()));
    }
    let sq = |i: usize| -> f64 { a.row(i).iter().zip(b.row(i)).map(|(x, y)| (x - y) * (x - y)).sum() };
    let n = grid.n_steps();
    let d = match metric {
        PathMetric::DInfinity => (0..=n).map(sq).fold(0.0, f64::max).sqrt(),
        PathMetric::DTwo => {
            let inner: f64 = (1..n).map(sq).sum();
            (grid.dt() * (inner + 0.5 * (sq(0) + sq(n)))).sqrt()
        }
    };
    if !d.is_finite() {
        return domain("non-finite path distance");
    }
    Ok(d)
}

/// I.i.d. paths on one grid, with their provenance.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub paths: Vec<Array2<f64>>,
    pub seeds: Vec<u64>,
    pub config_hash: String,
}

impl PathEnsemble {
    pub fn new(grid: TimeGrid, paths: Vec<Array2<f64>>, seeds: Vec<u64>, config_hash: impl Into<String>) -> Result<Self> {
        if paths.is_empty() {
            return domain("empty ensemble");
        }
        let shape = paths[0].dim();
        if shape.0 != grid.len() || paths.iter().any(|p| p.dim() != shape) {
            return domain("ensemble paths must share one shape matching the grid");
        }
        Ok(Self { grid, paths, seeds, config_hash: config_hash.into() })
    }

    pub fn from_fbm(paths: &[FbmPath], config_hash: impl Into<String>) -> Result<Self> {
        let grid = paths.first().map(|p| p.grid.clone()).ok_or_else(|| crate::Error::Domain("empty ensemble".into()))?;
        if paths.iter().any(|p| !p.grid.same_as(&grid)) {
            return domain("ensemble paths use different grids");
        }
        Self::new(
            grid,
            paths.iter().map(|p| p.values.clone()).collect(),
            paths.iter().map(|p| p.seed).collect(),
            config_hash,
        )
    }

    pub fn from_solutions(paths: &[SolutionPath], config_hash: impl Into<String>) -> Result<Self> {
        let grid = paths.first().map(|p| p.grid.clone()).ok_or_else(|| crate::Error::Domain("empty ensemble".into()))?;
        if paths.iter().any(|p| !p.grid.same_as(&grid)) {
            return domain("ensemble paths use different grids");
        }
        Self::new(
            grid,
            paths.iter().map(|p| p.values.clone()).collect(),
            paths.iter().map(|p| p.driver.seed.unwrap_or(0)).collect(),
            config_hash,
        )
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Same ensemble with paths reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            grid: self.grid.clone(),
            paths: perm.iter().map(|&i| self.paths[i].clone()).collect(),
            seeds: perm.iter().map(|&i| self.seeds[i]).collect(),
            config_hash: self.config_hash.clone(),
        }
    }
}

/// `C_ij = d(μ_i, ν_j)^p`, assembled in parallel over rows.
pub fn cost_matrix(mu: &PathEnsemble, nu: &PathEnsemble, p: u32, metric: PathMetric) -> Result<Array2<f64>> {
    if !mu.grid.same_as(&nu.grid) {
        return domain("ensembles live on different grids");
    }
    let rows: Vec<Vec<f64>> = mu
        .paths
        .par_iter()
        .map(|a| nu.paths.iter().map(|b| path_distance(&mu.grid, a, b, metric).map(|d| d.powi(p as i32))).collect())
        .collect::<Result<_>>()?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let c = Array2::from_shape_vec((mu.len(), nu.len()), flat).expect("row lengths agree");
    if c.iter().any(|v| !v.is_finite()) {
        return domain("non-finite cost entry");
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Solver {
    Exact { replicated_to: usize },
    Entropic { epsilon: f64, iterations: usize, duality_gap: f64 },
}

/// Empirical `W_p` between two uniform ensembles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wasserstein {
    pub value: f64,
    pub p: u32,
    pub metric: PathMetric,
    pub solver: Solver,
    pub plan: Plan,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Transport plan as `(i, j, mass)` triples.
pub type Plan = Vec<(usize, usize, f64)>;

/// Optimal transport cost of a cost matrix between uniform weights.
///
/// Exact assignment (after replicating both sides to `lcm(n1, n2)` points)
/// when that size is at most [`EXACT_CUTOFF`], log-domain Sinkhorn with a
/// certified duality gap above it. Returns `(cost, solver, plan)`.
pub fn optimal_transport(cost: &Array2<f64>) -> Result<(f64, Solver, Plan)> {
    let (n1, n2) = cost.dim();
    if n1 == 0 || n2 == 0 {
        return domain("empty cost matrix");
    }
    let l = n1 / gcd(n1, n2) * n2;
    if l <= EXACT_CUTOFF {
        let (r1, r2) = (l / n1, l / n2);
        let big = Array2::from_shape_fn((l, l), |(i, j)| cost[(i / r1, j / r2)]);
        let assign = hungarian(&big)?;
        let total: f64 = assign.iter().enumerate().map(|(i, &j)| big[(i, j)]).sum();
        let mut mass = std::collections::BTreeMap::new();
        for (i, &j) in assign.iter().enumerate() {
            *mass.entry((i / r1, j / r2)).or_insert(0.0) += 1.0 / l as f64;
        }
        let plan = mass.into_iter().map(|((i, j), m)| (i, j, m)).collect();
        Ok((total / l as f64, Solver::Exact { replicated_to: l }, plan))
    } else {
        let r = sinkhorn(cost, &SinkhornOptions::default())?;
        let plan = r
            .plan
            .indexed_iter()
            .filter(|(_, &m)| m > 1e-15)
            .map(|((i, j), &m)| (i, j, m))
            .collect();
        Ok((r.primal, Solver::Entropic { epsilon: r.epsilon, iterations: r.iterations, duality_gap: r.gap }, plan))
    }
}

pub fn wasserstein_empirical(mu: &PathEnsemble, nu: &PathEnsemble, p: u32, metric: PathMetric) -> Result<Wasserstein> {
    if !(p == 1 || p == 2) {
        return domain(format!("only p = 1 and p = 2 are supported, got {p}"));
    }
    let cost = cost_matrix(mu, nu, p, metric)?;
    let (total, solver, plan) = optimal_transport(&cost)?;
    Ok(Wasserstein { value: total.max(0.0).powf(1.0 / p as f64), p, metric, solver, plan })
}

/// `Σ ν_i log(ν_i / μ_i)` with `0 log 0 = 0`; `+∞` when `ν` charges a
/// point `μ` does not.
pub fn relative_entropy_discrete(nu: &[f64], mu: &[f64]) -> Result<f64> {
    if nu.len() != mu.len() {
        return domain("weight vectors differ in length");
    }
    for (name, w) in [("nu", nu), ("mu", mu)] {
        if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return domain(format!("{name} has negative or non-finite weights"));
        }
        let s: f64 = w.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return domain(format!("{name} sums to {s}, not 1"));
        }
    }
    let mut acc = 0.0;
    for (&v, &m) in nu.iter().zip(mu) {
        if v == 0.0 {
            continue;
        }
        if m == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += v * (v / m).ln();
    }
    Ok(acc.max(0.0))
}

pub fn write_cost_csv<W: Write>(cost: &Array2<f64>, out: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    for row in cost.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_plan_csv<W: Write>(plan: &[(usize, usize, f64)], out: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "i,j,mass")?;
    for (i, j, m) in plan {
        writeln!(out, "{i},{j},{m:e}")?;
    }
    out.flush()?;
    Ok(())
}
