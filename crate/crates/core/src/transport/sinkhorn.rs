use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    /// Final regularization as a fraction of the mean cost.
    pub epsilon_rel: f64,
    /// Iteration cap for each value of `ε` in the annealing schedule.
    pub max_iter: usize,
    /// L1 row-marginal error at which an `ε` stage stops.
    pub tol: f64,
    /// Stop annealing once `gap / primal` falls below this.
    pub target_rel_gap: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self { epsilon_rel: 1e-4, max_iter: 2000, tol: 1e-10, target_rel_gap: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornResult {
    /// `⟨P, C⟩` for the rounded plan, an upper bound of the optimal cost.
    pub primal: f64,
    /// Value of a feasible dual pair, a lower bound of the optimal cost.
    pub dual: f64,
    pub gap: f64,
    pub epsilon: f64,
    pub iterations: usize,
    /// Coupling with exactly uniform marginals.
    pub plan: Array2<f64>,
}

fn lse(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Entropic optimal transport between uniform weights, log-domain
/// Sinkhorn with `ε`-annealing.
///
/// The last plan is rounded onto the exact marginals, so its cost is
/// achievable; the c-transforms of the potentials give a feasible dual.
/// Their difference certifies how far the reported cost is from optimal.
pub fn sinkhorn(cost: &Array2<f64>, opts: &SinkhornOptions) -> Result<SinkhornResult> {
    let (n1, n2) = cost.dim();
    if n1 == 0 || n2 == 0 {
        return domain("empty cost matrix");
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return domain("non-finite cost entry");
    }
    let (la, lb) = (-(n1 as f64).ln(), -(n2 as f64).ln());
    let mean = cost.iter().sum::<f64>() / (n1 * n2) as f64;
    let scale = if mean > 0.0 { mean } else { 1.0 };
    let eps_final = opts.epsilon_rel * scale;
    let mut eps = scale;
    let mut f = vec![0.0; n1];
    let mut g = vec![0.0; n2];
    let mut iterations = 0;
    let mut best: Option<SinkhornResult> = None;
    loop {
        for _ in 0..opts.max_iter {
            iterations += 1;
            f = (0..n1)
                .into_par_iter()
                .map(|i| -eps * lse((0..n2).map(|j| lb + (g[j] - cost[(i, j)]) / eps)))
                .collect();
            g = (0..n2)
                .into_par_iter()
                .map(|j| -eps * lse((0..n1).map(|i| la + (f[i] - cost[(i, j)]) / eps)))
                .collect();
            let err: f64 = (0..n1)
                .into_par_iter()
                .map(|i| {
                    let r: f64 = (0..n2).map(|j| (la + lb + (f[i] + g[j] - cost[(i, j)]) / eps).exp()).sum();
                    (r - 1.0 / n1 as f64).abs()
                })
                .sum();
            if err < opts.tol {
                break;
            }
        }
        let res = certify(cost, &f, &g, eps)?;
        let done = res.gap <= opts.target_rel_gap * res.primal.abs().max(1e-300) || eps <= eps_final;
        if best.as_ref().is_none_or(|b| res.gap < b.gap) {
            best = Some(SinkhornResult { iterations, ..res });
        }
        if done {
            break;
        }
        eps = (eps * 0.5).max(eps_final);
    }
    best.ok_or_else(|| Error::Numerical { msg: "Sinkhorn produced no iterate".into(), achieved: f64::INFINITY })
}

fn certify(cost: &Array2<f64>, f: &[f64], g: &[f64], eps: f64) -> Result<SinkhornResult> {
    let (n1, n2) = cost.dim();
    let (a, b) = (1.0 / n1 as f64, 1.0 / n2 as f64);
    let mut plan = Array2::from_shape_fn((n1, n2), |(i, j)| a * b * ((f[i] + g[j] - cost[(i, j)]) / eps).exp());
    // Round onto the marginals: shrink overfull rows and columns, then
    // spread the deficit as a rank-one correction.
    for i in 0..n1 {
        let r: f64 = plan.row(i).sum();
        if r > a {
            plan.row_mut(i).mapv_inplace(|v| v * a / r);
        }
    }
    for j in 0..n2 {
        let c: f64 = plan.column(j).sum();
        if c > b {
            plan.column_mut(j).mapv_inplace(|v| v * b / c);
        }
    }
    let er: Vec<f64> = (0..n1).map(|i| a - plan.row(i).sum()).collect();
    let ec: Vec<f64> = (0..n2).map(|j| b - plan.column(j).sum()).collect();
    let total: f64 = er.iter().sum();
    if total > 0.0 {
        for i in 0..n1 {
            for j in 0..n2 {
                plan[(i, j)] += er[i].max(0.0) * ec[j].max(0.0) / total;
            }
        }
    }
    let primal: f64 = plan.iter().zip(cost.iter()).map(|(p, c)| p * c).sum();
    // Feasible dual: double c-transform of f.
    let gd: Vec<f64> = (0..n2).map(|j| (0..n1).map(|i| cost[(i, j)] - f[i]).fold(f64::INFINITY, f64::min)).collect();
    let fd: Vec<f64> = (0..n1).map(|i| (0..n2).map(|j| cost[(i, j)] - gd[j]).fold(f64::INFINITY, f64::min)).collect();
    let dual = a * fd.iter().sum::<f64>() + b * gd.iter().sum::<f64>();
    if !primal.is_finite() || !dual.is_finite() {
        return Err(Error::Numerical { msg: "Sinkhorn potentials diverged".into(), achieved: f64::INFINITY });
    }
    Ok(SinkhornResult { primal, dual, gap: (primal - dual).max(0.0), epsilon: eps, iterations: 0, plan })
}
