use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{tail_report, LipschitzFunctional, TailInput, TailReport};
use crate::error::{domain, Error, Result};
use crate::fbm::{Generator, HurstParam, TimeGrid};
use crate::sde::{solve_additive, solve_scalar, Driver, DriftSpec, ScalarDiffusion, SolutionPath, TimeDiffusion};
use crate::stats::{mean_and_se, ols_slope};
use crate::transport::{transport_constant, ConstantTag, PathMetric, TransportConstants, TransportParams};

/// The equation whose solution law is tested.
#[derive(Debug, Clone)]
pub enum Model {
    /// `dX = b(X) dt + σ(t) dB^H`.
    Additive { x0: Vec<f64>, drift: DriftSpec, sigma: TimeDiffusion },
    /// `dX = b(X) dt + σ(X) dB^H` in one dimension.
    Scalar { x0: f64, drift: DriftSpec, sigma: ScalarDiffusion },
}

impl Model {
    pub fn noise_dim(&self) -> usize {
        match self {
            Model::Additive { sigma, .. } => sigma.m,
            Model::Scalar { .. } => 1,
        }
    }

    pub fn drift(&self) -> &DriftSpec {
        match self {
            Model::Additive { drift, .. } | Model::Scalar { drift, .. } => drift,
        }
    }

    pub fn solve(&self, driver: &Driver) -> Result<SolutionPath> {
        match self {
            Model::Additive { x0, drift, sigma } => solve_additive(x0, drift, sigma, driver),
            Model::Scalar { x0, drift, sigma } => solve_scalar(*x0, drift, sigma, driver),
        }
    }
}

/// Everything a Hoeffding experiment needs besides the horizon.
#[derive(Debug, Clone)]
pub struct HoeffdingSetup {
    pub hurst: HurstParam,
    pub model: Model,
    /// Time-average functional `(1/T)∫V(X_t)dt`.
    pub functional: LipschitzFunctional,
    /// Target grid step; the grid of horizon `T` has `ceil(T/dt)` steps.
    pub dt: f64,
    pub n_paths: usize,
    pub generator: Generator,
    pub seed: u64,
    /// Hölder exponent used for `‖σ‖_β` in the T1 constant.
    pub beta: f64,
    /// T1 multiplier; `None` takes the calibrated fixture.
    pub k_t1: Option<f64>,
    pub confidence: f64,
    pub levels: Vec<f64>,
    pub config_hash: String,
}

fn grid_for(setup: &HoeffdingSetup, t: f64) -> Result<TimeGrid> {
    if !(setup.dt > 0.0 && t > 0.0) {
        return domain(format!("need positive horizon and step, got T = {t}, dt = {}", setup.dt));
    }
    TimeGrid::new(t, (t / setup.dt).ceil().max(1.0) as usize)
}

/// Simulated values of the time average and of the sup displacement.
fn simulate(setup: &HoeffdingSetup, grid: &TimeGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    if !matches!(setup.functional, LipschitzFunctional::TimeAverage { .. }) {
        return domain("the Hoeffding experiments take a time-average functional");
    }
    let sampler = setup.generator.sampler(grid, setup.hurst)?;
    let m = setup.model.noise_dim();
    let sup = LipschitzFunctional::SupDisplacement;
    let pairs: Vec<(f64, f64)> = (0..setup.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = sampler.sample(m, setup.seed, i)?;
            let sol = setup.model.solve(&Driver::from_path(&path))?;
            Ok((setup.functional.eval(grid, &sol.values), sup.eval(grid, &sol.values)))
        })
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

fn alpha_of(f: &LipschitzFunctional) -> f64 {
    f.lip_constant(PathMetric::DInfinity, 1.0)
}

/// Coefficient `κ` of the tail bound `exp(-κ r²)` implied by `T1(C)` for an
/// `L`-Lipschitz functional: `κ = 1/(2 C L²)`.
pub fn small_time_exponent(c_t1: f64, lip: f64) -> f64 {
    1.0 / (2.0 * c_t1 * lip * lip)
}

/// Coefficient `κ` of the large-time bound `exp(-κ r²)` for time averages
/// of an `alpha`-Lipschitz `V`.
///
/// With `sigma2 = None` this is the additive form with `σ_sup = sigma1`:
/// `B² T^{2-2H} / (4 α² H σ_sup² (1 - e^{BT}))`. With `Some(σ2)` it is the
/// scalar form `B² T^{2-2H} / (4 α² H σ1² σ2² (1 - e^{BT/σ1}))`. `H = 1/2`
/// is accepted.
pub fn large_time_exponent(h: f64, b: f64, t: f64, alpha: f64, sigma1: f64, sigma2: Option<f64>) -> Result<f64> {
    if !(0.5..1.0).contains(&h) {
        return domain(format!("Hurst index must lie in [1/2, 1), got {h}"));
    }
    if !(b < 0.0) {
        return domain(format!("the large-time bounds need B < 0, got {b}"));
    }
    if !(t > 0.0 && alpha > 0.0 && sigma1 > 0.0) {
        return domain("horizon, alpha and sigma must be positive");
    }
    let num = b * b * t.powf(2.0 - 2.0 * h);
    let den = match sigma2 {
        None => 4.0 * alpha * alpha * h * sigma1 * sigma1 * -(b * t).exp_m1(),
        Some(s2) => 4.0 * alpha * alpha * h * sigma1 * sigma1 * s2 * s2 * -(b * t / sigma1).exp_m1(),
    };
    Ok(num / den)
}

/// T1 constant of the solution law on `grid`: `K ‖σ‖_β T^{2H}` for the
/// additive equation, `K σ2² T^{2H}` for the scalar one. `k = None` takes
/// the calibrated fixture.
pub fn model_t1_constant(model: &Model, h: HurstParam, grid: &TimeGrid, beta: f64, k: Option<f64>) -> Result<TransportConstants> {
    let t = grid.t_max();
    let h = h.value();
    let drift = model.drift();
    let (tag, params) = match model {
        Model::Additive { sigma, .. } => (
            ConstantTag::T1Additive,
            TransportParams {
                hurst: h,
                horizon: t,
                sigma_holder: sigma.holder_norm(grid, beta)?.total(),
                lipschitz_b: drift.lipschitz,
                k,
                ..Default::default()
            },
        ),
        Model::Scalar { sigma, .. } => {
            let bound_b = match drift.bound {
                Some(b) => b,
                None if sigma.lipschitz == 0.0 => 0.0,
                None => return domain("the scalar T1 horizon needs a declared sup|b|"),
            };
            (
                ConstantTag::T1Scalar,
                TransportParams {
                    hurst: h,
                    horizon: t,
                    lipschitz_b: drift.lipschitz,
                    bound_b,
                    lipschitz_sigma: sigma.lipschitz,
                    sigma1: sigma.sigma1,
                    sigma2: sigma.sigma2,
                    k,
                    ..Default::default()
                },
            )
        }
    };
    transport_constant(tag, &params)
}

fn t1_constant(setup: &HoeffdingSetup, grid: &TimeGrid) -> Result<f64> {
    let c = model_t1_constant(&setup.model, setup.hurst, grid, setup.beta, setup.k_t1)?;
    if !c.valid {
        return domain(format!("horizon T = {} outside the range of the T1 inequality: {}", grid.t_max(), c.validity));
    }
    Ok(c.value)
}

fn input<'a>(
    setup: &'a HoeffdingSetup,
    name: &'a str,
    functional: &'a LipschitzFunctional,
    horizon: f64,
    t1: Option<f64>,
) -> TailInput<'a> {
    TailInput {
        bound_name: name,
        functional,
        metric: PathMetric::DInfinity,
        horizon,
        t1_constant: t1,
        levels: &setup.levels,
        confidence: setup.confidence,
        seed: setup.seed,
        config_hash: &setup.config_hash,
    }
}

/// Small-time tails of the time average and of the sup displacement
/// against the bounds implied by `T1(C)` with the T1 constant `C` of the
/// model. Refuses horizons outside the range of the T1 inequality.
pub fn verify_hoeffding_small_time(setup: &HoeffdingSetup, horizon: f64) -> Result<[TailReport; 2]> {
    let grid = grid_for(setup, horizon)?;
    let c = t1_constant(setup, &grid)?;
    let (avg, sup) = simulate(setup, &grid)?;
    let alpha = alpha_of(&setup.functional);
    let k_avg = small_time_exponent(c, alpha);
    let k_sup = small_time_exponent(c, 1.0);
    let sup_f = LipschitzFunctional::SupDisplacement;
    let mut a = tail_report(&avg, input(setup, "small_time_average", &setup.functional, horizon, Some(c)), |r| {
        (-k_avg * r * r).exp()
    });
    a.notes.push(format!("bound exp(-r²/(2 C α²)) with C = {c:.6e}, α = {alpha}"));
    let mut s = tail_report(&sup, input(setup, "small_time_sup", &sup_f, horizon, Some(c)), |r| (-k_sup * r * r).exp());
    s.notes.push(format!("bound exp(-r²/(2 C)) with C = {c:.6e}"));
    Ok([a, s])
}

/// Fit of the sub-Gaussian coefficient of the time average against `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub horizons: Vec<f64>,
    pub variances: Vec<f64>,
    /// `κ̂_T = 1/(2 Var F_T)`, the coefficient of a Gaussian tail with the
    /// empirical variance.
    pub kappa_hat: Vec<f64>,
    /// Least-squares slope of `ln κ̂_T` against `ln T`.
    pub slope: f64,
    /// `2 - 2H`.
    pub expected: f64,
    pub tolerance: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeTimeReport {
    pub reports: Vec<TailReport>,
    pub scaling: Option<ScalingFit>,
}

impl LargeTimeReport {
    pub fn tails_passed(&self) -> bool {
        self.reports.iter().all(TailReport::all_passed)
    }
}

/// Tolerance on the fitted exponent of the `T`-scaling.
pub const SCALING_TOLERANCE: f64 = 0.15;

/// Large-time tails of the time average for each horizon, against the
/// additive bound and, for scalar models, the scalar bound. Needs a
/// declared one-sided constant `B < 0`.
pub fn verify_hoeffding_large_time(setup: &HoeffdingSetup, horizons: &[f64]) -> Result<LargeTimeReport> {
    let drift = setup.model.drift();
    let b = match drift.one_sided {
        Some(b) if b < 0.0 => b,
        Some(b) => return domain(format!("the large-time bounds need B < 0, declared B = {b}")),
        None => return domain("the large-time bounds need a declared one-sided constant B < 0"),
    };
    if horizons.is_empty() {
        return domain("no horizons given");
    }
    let h = setup.hurst.value();
    let alpha = alpha_of(&setup.functional);
    let mut reports = Vec::new();
    let mut variances = Vec::new();
    for &t in horizons {
        let grid = grid_for(setup, t)?;
        let mut forms: Vec<(&str, f64)> = Vec::new();
        match &setup.model {
            Model::Additive { sigma, .. } => {
                forms.push(("large_time_additive", large_time_exponent(h, b, t, alpha, sigma.sup_norm(&grid), None)?));
            }
            Model::Scalar { sigma, .. } => {
                if sigma.sigma1 == sigma.sigma2 {
                    forms.push(("large_time_additive", large_time_exponent(h, b, t, alpha, sigma.sigma2, None)?));
                }
                forms.push((
                    "large_time_scalar",
                    large_time_exponent(h, b, t, alpha, sigma.sigma1, Some(sigma.sigma2))?,
                ));
            }
        }
        let (avg, _) = simulate(setup, &grid)?;
        let (_, se) = mean_and_se(&avg);
        variances.push(se * se * avg.len() as f64);
        for (name, kappa) in forms {
            let mut rep = tail_report(&avg, input(setup, name, &setup.functional, t, None), |r| (-kappa * r * r).exp());
            rep.notes.push(format!("bound exp(-{kappa:.6e} r²)"));
            reports.push(rep);
        }
    }
    let scaling = if horizons.len() >= 2 {
        if variances.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Numerical { msg: "degenerate time-average variance".into(), achieved: 0.0 });
        }
        let kappa_hat: Vec<f64> = variances.iter().map(|v| 1.0 / (2.0 * v)).collect();
        let lx: Vec<f64> = horizons.iter().map(|t| t.ln()).collect();
        let ly: Vec<f64> = kappa_hat.iter().map(|k| k.ln()).collect();
        let slope = ols_slope(&lx, &ly);
        let expected = 2.0 - 2.0 * h;
        Some(ScalingFit {
            horizons: horizons.to_vec(),
            variances,
            kappa_hat,
            slope,
            expected,
            tolerance: SCALING_TOLERANCE,
            within: (slope - expected).abs() <= SCALING_TOLERANCE,
        })
    } else {
        None
    };
    Ok(LargeTimeReport { reports, scaling })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concentration::DEFAULT_LEVELS;
    use approx::assert_relative_eq;

    fn setup(model: Model, n_paths: usize) -> HoeffdingSetup {
        HoeffdingSetup {
            hurst: HurstParam::new(0.75).unwrap(),
            model,
            functional: LipschitzFunctional::clipped_identity(3.0),
            dt: 1.0 / 128.0,
            n_paths,
            generator: Generator::Circulant,
            seed: 3,
            beta: 0.6,
            k_t1: Some(4.0),
            confidence: 0.99,
            levels: DEFAULT_LEVELS.to_vec(),
            config_hash: "test".into(),
        }
    }

    fn free_scalar() -> Model {
        Model::Scalar { x0: 0.0, drift: DriftSpec::zero(1), sigma: ScalarDiffusion::constant(1.0).unwrap() }
    }

    fn ou() -> Model {
        Model::Scalar { x0: 0.0, drift: DriftSpec::linear(-1.0, 1), sigma: ScalarDiffusion::constant(1.0).unwrap() }
    }

    #[test]
    fn small_time_exponent_doubling() {
        // C ∝ T^{2H}: doubling T divides the coefficient by 2^{2H}.
        let h = 0.75;
        let c = |t: f64| 3.0 * t.powf(2.0 * h);
        let ratio = small_time_exponent(c(0.2), 1.0) / small_time_exponent(c(0.4), 1.0);
        assert_relative_eq!(ratio, 2f64.powf(2.0 * h), max_relative = 1e-14);
    }

    #[test]
    fn large_time_exponent_brownian_case() {
        let (b, t, a, s) = (-0.7, 3.0, 1.5, 0.8);
        let got = large_time_exponent(0.5, b, t, a, s, None).unwrap();
        let classical = b * b * t / (2.0 * a * a * s * s * (1.0 - (b * t).exp()));
        assert_relative_eq!(got, classical, max_relative = 1e-14);
        // Scalar form with σ1 = σ2 = 1 coincides with the additive form.
        assert_relative_eq!(
            large_time_exponent(0.75, b, t, a, 1.0, Some(1.0)).unwrap(),
            large_time_exponent(0.75, b, t, a, 1.0, None).unwrap(),
            max_relative = 1e-14
        );
        assert!(large_time_exponent(0.75, 0.0, t, a, s, None).is_err());
    }

    #[test]
    fn small_time_passes_for_free_fbm() {
        let s = setup(free_scalar(), 3000);
        let [avg, sup] = verify_hoeffding_small_time(&s, 0.25).unwrap();
        assert!(avg.all_passed(), "{avg:?}");
        assert!(sup.all_passed(), "{sup:?}");
        assert!(avg.empirical_tail.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn small_time_refuses_long_horizon() {
        let m = Model::Scalar { x0: 0.0, drift: DriftSpec::linear(-2.0, 1), sigma: ScalarDiffusion::constant(1.0).unwrap() };
        let s = setup(m, 10);
        assert!(matches!(verify_hoeffding_small_time(&s, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn tiny_constant_is_rejected() {
        let mut s = setup(free_scalar(), 3000);
        s.k_t1 = Some(1e-3);
        let [_, sup] = verify_hoeffding_small_time(&s, 0.25).unwrap();
        assert!(!sup.all_passed());
    }

    #[test]
    fn large_time_needs_negative_b() {
        let s = setup(free_scalar(), 10);
        assert!(verify_hoeffding_large_time(&s, &[1.0]).is_err());
    }

    #[test]
    fn large_time_tails_pass_and_are_deterministic() {
        let s = setup(ou(), 2000);
        let a = verify_hoeffding_large_time(&s, &[1.0, 2.0]).unwrap();
        assert!(a.tails_passed());
        assert_eq!(a.reports.len(), 4);
        let b = verify_hoeffding_large_time(&s, &[1.0, 2.0]).unwrap();
        assert_eq!(a, b);
    }
}
