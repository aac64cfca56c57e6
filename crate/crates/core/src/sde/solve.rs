use log::debug;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Driver, DriftSpec, ScalarDiffusion, Scheme, SolutionPath, TimeDiffusion};
use crate::error::{domain, Error, Result};
use crate::frac::empirical_holder_exponent;
use crate::quad::{integrate, QuadOptions};
use crate::rng::{stream, Purpose};

fn warn_rough_driver(driver: &Driver) {
    for j in 0..driver.dim() {
        let col = driver.values.column(j).to_vec();
        let e = empirical_holder_exponent(&col, driver.grid.dt());
        if e <= 0.5 {
            debug!("driver component {j} has empirical Hölder exponent {e:.3} <= 1/2; Young increments may not converge");
        }
    }
}

fn check_finite(row: &[f64], step: usize) -> Result<()> {
    if row.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::BlowUp { step })
    }
}

/// Explicit Euler scheme for `dX = b(X) dt + σ(t) dg`:
/// `X_{k+1} = X_k + b(X_k) Δt + σ(t_k)(g_{k+1} - g_k)`.
pub fn solve_additive(x0: &[f64], drift: &DriftSpec, sigma: &TimeDiffusion, driver: &Driver) -> Result<SolutionPath> {
    let d = x0.len();
    if drift.dim != d || sigma.d != d {
        return domain(format!("state dimension mismatch: x0 {d}, drift {}, sigma rows {}", drift.dim, sigma.d));
    }
    if driver.dim() != sigma.m {
        return domain(format!("driver has {} components, sigma has {} columns", driver.dim(), sigma.m));
    }
    warn_rough_driver(driver);
    let grid = &driver.grid;
    let n = grid.n_steps();
    let dt = grid.dt();
    let t = grid.points();
    let g = &driver.values;
    let mut values = Array2::zeros((n + 1, d));
    values.row_mut(0).assign(&ndarray::ArrayView1::from(x0));
    let mut x = x0.to_vec();
    let mut b = vec![0.0; d];
    let mut dg = vec![0.0; sigma.m];
    for k in 0..n {
        drift.eval(&x, &mut b);
        let s = sigma.eval(t[k]);
        for (j, v) in dg.iter_mut().enumerate() {
            *v = g[(k + 1, j)] - g[(k, j)];
        }
        for i in 0..d {
            let noise: f64 = (0..sigma.m).map(|j| s[(i, j)] * dg[j]).sum();
            x[i] += b[i] * dt + noise;
        }
        check_finite(&x, k + 1)?;
        values.row_mut(k + 1).assign(&ndarray::ArrayView1::from(&x[..]));
    }
    Ok(SolutionPath { grid: grid.clone(), values, x0: x0.to_vec(), driver: driver.provenance.clone(), scheme: Scheme::Euler })
}

fn check_scalar(drift: &DriftSpec, driver: &Driver) -> Result<()> {
    if drift.dim != 1 || driver.dim() != 1 {
        return domain("scalar equations need a one-dimensional drift and driver");
    }
    Ok(())
}

/// Euler scheme for `dX = b(X) dt + σ(X) dg` with `d = m = 1`.
pub fn solve_scalar(x0: f64, drift: &DriftSpec, sigma: &ScalarDiffusion, driver: &Driver) -> Result<SolutionPath> {
    check_scalar(drift, driver)?;
    warn_rough_driver(driver);
    let grid = &driver.grid;
    let n = grid.n_steps();
    let dt = grid.dt();
    let g = &driver.values;
    let mut values = Array2::zeros((n + 1, 1));
    let mut x = x0;
    values[(0, 0)] = x;
    for k in 0..n {
        x += drift.eval_scalar(x) * dt + sigma.eval(x) * (g[(k + 1, 0)] - g[(k, 0)]);
        check_finite(&[x], k + 1)?;
        values[(k + 1, 0)] = x;
    }
    Ok(SolutionPath { grid: grid.clone(), values, x0: vec![x0], driver: driver.provenance.clone(), scheme: Scheme::Euler })
}

/// `F(y) = ∫_0^y dz / σ(z)` and its inverse.
#[derive(Debug, Clone)]
pub struct LampertiMap<'a> {
    sigma: &'a ScalarDiffusion,
}

const INVERSE_TOL: f64 = 1e-12;

impl<'a> LampertiMap<'a> {
    pub fn new(sigma: &'a ScalarDiffusion) -> Self {
        Self { sigma }
    }

    fn integral(&self, a: f64, b: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_intervals: 4000 };
        Ok(integrate(|z| 1.0 / self.sigma.eval(z), a, b, opts)?.value)
    }

    pub fn forward(&self, y: f64) -> Result<f64> {
        self.integral(0.0, y)
    }

    pub fn inverse(&self, z: f64) -> Result<f64> {
        self.inverse_from(z, (0.0, 0.0)).map(|(y, _)| y)
    }

    /// Solve `F(y) = z` starting from a known pair `(y0, F(y0))`. Returns
    /// the root and `F` at the root. Newton steps `y ← y - (F(y) - z) σ(y)`
    /// are kept inside the bracket `[min(σ1 z, σ2 z), max(σ1 z, σ2 z)]`
    /// (bisection otherwise), and `F` is updated incrementally.
    pub fn inverse_from(&self, z: f64, start: (f64, f64)) -> Result<(f64, f64)> {
        let (s1, s2) = (self.sigma.sigma1, self.sigma.sigma2);
        let (mut lo, mut hi) = ((s1 * z).min(s2 * z), (s1 * z).max(s2 * z));
        let (mut y, mut fy) = start;
        let tol = INVERSE_TOL * z.abs().max(1.0);
        if !(lo..=hi).contains(&y) {
            let c = y.clamp(lo, hi);
            fy += self.integral(y, c)?;
            y = c;
        }
        for _ in 0..200 {
            let r = fy - z;
            if r.abs() <= tol {
                return Ok((y, fy));
            }
            if r < 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            let mut next = y - r * self.sigma.eval(y);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            fy += self.integral(y, next)?;
            y = next;
            if hi - lo <= 1e-15 * y.abs().max(1.0) {
                break;
            }
        }
        let resid = (fy - z).abs();
        if resid <= tol {
            return Ok((y, fy));
        }
        Err(Error::Numerical {
            msg: format!("Lamperti inverse did not bracket z = {z}; sigma bounds may be violated"),
            achieved: resid,
        })
    }
}

pub fn lamperti_forward(sigma: &ScalarDiffusion, y: f64) -> Result<f64> {
    LampertiMap::new(sigma).forward(y)
}

pub fn lamperti_inverse(sigma: &ScalarDiffusion, z: f64) -> Result<f64> {
    LampertiMap::new(sigma).inverse(z)
}

/// Solve `dY = b(F⁻¹(Y))/σ(F⁻¹(Y)) dt + dg`, `Y_0 = F(x0)`, by Euler and
/// map back through `F⁻¹`.
pub fn solve_scalar_via_lamperti(
    x0: f64,
    drift: &DriftSpec,
    sigma: &ScalarDiffusion,
    driver: &Driver,
) -> Result<SolutionPath> {
    check_scalar(drift, driver)?;
    let map = LampertiMap::new(sigma);
    let grid = &driver.grid;
    let n = grid.n_steps();
    let dt = grid.dt();
    let g = &driver.values;
    let mut values = Array2::zeros((n + 1, 1));
    values[(0, 0)] = x0;
    let mut state = (x0, map.forward(x0)?);
    let mut z = state.1;
    for k in 0..n {
        let x = state.0;
        z += drift.eval_scalar(x) / sigma.eval(x) * dt + (g[(k + 1, 0)] - g[(k, 0)]);
        check_finite(&[z], k + 1)?;
        state = map.inverse_from(z, state).map_err(|e| match e {
            Error::Numerical { msg, achieved } => Error::Numerical { msg: format!("step {}: {msg}", k + 1), achieved },
            other => other,
        })?;
        values[(k + 1, 0)] = state.0;
    }
    Ok(SolutionPath {
        grid: grid.clone(),
        values,
        x0: vec![x0],
        driver: driver.provenance.clone(),
        scheme: Scheme::Lamperti,
    })
}

/// Largest observed Lipschitz ratio of the transformed drift
/// `b̃ = b(F⁻¹)/σ(F⁻¹)` over random pairs, and the bound
/// `σ2 (L_b σ2 + L_σ B) / σ1²` with `B = sup |b|`.
pub fn lamperti_drift_lipschitz(
    drift: &DriftSpec,
    sigma: &ScalarDiffusion,
    seed: u64,
    n_pairs: usize,
    scale: f64,
) -> Result<(f64, f64)> {
    let bsup = drift.bound.ok_or_else(|| Error::Domain("the transformed drift bound needs a declared sup|b|".into()))?;
    let bound = sigma.sigma2 * (drift.lipschitz * sigma.sigma2 + sigma.lipschitz * bsup) / (sigma.sigma1 * sigma.sigma1);
    let map = LampertiMap::new(sigma);
    let mut rng = stream(seed, Purpose::SpotCheck, 2, 0);
    let mut worst = 0.0f64;
    let tilde = |z: f64| -> Result<f64> {
        let y = map.inverse(z)?;
        Ok(drift.eval_scalar(y) / sigma.eval(y))
    };
    for _ in 0..n_pairs {
        let a: f64 = scale * rng.sample::<f64, _>(StandardNormal);
        // Mix close and distant pairs: the sup is often attained locally.
        let w: f64 = rng.random_range(-6.0..0.0);
        let b = a + scale * 10f64.powf(w) * rng.sample::<f64, _>(StandardNormal);
        if a == b {
            continue;
        }
        worst = worst.max((tilde(a)? - tilde(b)?).abs() / (a - b).abs());
    }
    Ok((worst, bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{sample_fbm_circulant, HurstParam, TimeGrid};
    use approx::assert_relative_eq;

    fn fbm_driver(n: usize, m: usize, seed: u64) -> Driver {
        let grid = TimeGrid::new(1.0, n).unwrap();
        Driver::from_path(&sample_fbm_circulant(&grid, HurstParam::new(0.75).unwrap(), m, seed).unwrap())
    }

    #[test]
    fn zero_drift_identity_sigma_reproduces_driver() {
        let drv = fbm_driver(128, 2, 1);
        let sol = solve_additive(&[0.5, -1.0], &DriftSpec::zero(2), &TimeDiffusion::identity(2), &drv).unwrap();
        for k in 0..=128 {
            assert_relative_eq!(sol.values[(k, 0)], 0.5 + drv.values[(k, 0)], epsilon = 1e-13);
            assert_relative_eq!(sol.values[(k, 1)], -1.0 + drv.values[(k, 1)], epsilon = 1e-13);
        }
        assert_eq!(sol.values.row(0).to_vec(), vec![0.5, -1.0]);
    }

    #[test]
    fn linear_ode_converges_first_order() {
        let err = |n: usize| {
            let grid = TimeGrid::new(1.0, n).unwrap();
            let drv = Driver::new(grid.clone(), Array2::zeros((n + 1, 1)), "zero").unwrap();
            let sol = solve_additive(&[2.0], &DriftSpec::linear(-1.0, 1), &TimeDiffusion::scalar(|_| 0.0, 0.0, 1.0), &drv)
                .unwrap();
            grid.points()
                .iter()
                .enumerate()
                .map(|(k, t)| (sol.values[(k, 0)] - 2.0 * (-t).exp()).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(200) / err(400)).log2();
        assert!(order > 0.95, "order {order}");
    }

    #[test]
    fn blow_up_is_reported() {
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let drv = Driver::new(grid, Array2::zeros((51, 1)), "zero").unwrap();
        let drift = DriftSpec::scalar("explosive", 1, |x| x * x * 1e100, f64::INFINITY, None, None);
        match solve_scalar(1e3, &drift, &ScalarDiffusion::constant(1.0).unwrap(), &drv) {
            Err(Error::BlowUp { step }) => assert!(step >= 1),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn scalar_unit_sigma_matches_additive() {
        let drv = fbm_driver(256, 1, 4);
        let drift = DriftSpec::scalar("neg-sin", 1, |x| -x.sin(), 1.0, Some(1.0), None);
        let a = solve_scalar(0.3, &drift, &ScalarDiffusion::constant(1.0).unwrap(), &drv).unwrap();
        let b = solve_additive(&[0.3], &drift, &TimeDiffusion::identity(1), &drv).unwrap();
        let c = solve_scalar_via_lamperti(0.3, &drift, &ScalarDiffusion::constant(1.0).unwrap(), &drv).unwrap();
        for k in 0..=256 {
            assert_eq!(a.values[(k, 0)], b.values[(k, 0)]);
            assert_relative_eq!(a.values[(k, 0)], c.values[(k, 0)], epsilon = 1e-12);
        }
    }

    #[test]
    fn geometric_fbm_converges_to_exponential() {
        // X = exp(g) solves dX = X dg pathwise (change of variables).
        let fine = fbm_driver(8192, 1, 9);
        let sigma = ScalarDiffusion::new(|x| x, 1e-300, f64::INFINITY, 1.0).unwrap();
        let err = |stride: usize| {
            let n = 8192 / stride;
            let grid = TimeGrid::new(1.0, n).unwrap();
            let vals = Array2::from_shape_fn((n + 1, 1), |(k, _)| fine.values[(k * stride, 0)]);
            let drv = Driver::new(grid, vals, "sub").unwrap();
            let sol = solve_scalar(1.0, &DriftSpec::zero(1), &sigma, &drv).unwrap();
            (0..=n).map(|k| (sol.values[(k, 0)] - drv.values[(k, 0)].exp()).abs()).fold(0.0, f64::max)
        };
        // Expected rate dt^{2H-1} = dt^{1/2}: a factor 4 over 16x refinement.
        let (e1, e2) = (err(16), err(1));
        let rate = (e1 / e2).ln() / 16f64.ln();
        assert!(rate > 0.4, "errors {e1} {e2}, rate {rate}");
        assert!(e2 < 0.02, "error {e2}");
    }

    #[test]
    fn lamperti_constant_sigma() {
        let s = ScalarDiffusion::constant(2.5).unwrap();
        assert_relative_eq!(lamperti_forward(&s, 5.0).unwrap(), 2.0, max_relative = 1e-14);
        assert_relative_eq!(lamperti_inverse(&s, 2.0).unwrap(), 5.0, max_relative = 1e-12);
        assert_eq!(lamperti_forward(&s, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn lamperti_round_trip() {
        let s = ScalarDiffusion::new(|x| 1.0 + 0.5 * x.sin().powi(2), 1.0, 1.5, 0.5).unwrap();
        for i in -40..=40 {
            let z = i as f64 * 0.37;
            let y = lamperti_inverse(&s, z).unwrap();
            let back = lamperti_forward(&s, y).unwrap();
            assert!((back - z).abs() < 1e-10, "z = {z}, y = {y}, F(y) = {back}");
        }
    }

    #[test]
    fn lamperti_bracket_failure_reported() {
        // Declared bounds are wrong: sigma is really 10.
        let s = ScalarDiffusion::new(|_| 10.0, 1.0, 2.0, 0.0).unwrap();
        assert!(matches!(lamperti_inverse(&s, 3.0), Err(Error::Numerical { .. })));
    }

    #[test]
    fn transformed_drift_lipschitz_within_bound() {
        let drift = DriftSpec::scalar("neg-sin", 1, |x| -x.sin(), 1.0, Some(1.0), None);
        let s = ScalarDiffusion::new(|x| 1.0 + 0.1 * x.cos(), 0.9, 1.1, 0.1).unwrap();
        let (emp, bound) = lamperti_drift_lipschitz(&drift, &s, 3, 1000, 3.0).unwrap();
        assert!(emp > 0.0 && emp <= bound, "{emp} vs {bound}");
    }
}
