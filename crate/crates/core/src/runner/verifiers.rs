use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::{sub_seed, write_table, Run, Status, VerifierOutcome};
use crate::concentration::{
    appendix_delta_radius, c_delta_from_distances, model_t1_constant, pair_distances, phi_argmax, phi_h, phi_link,
    t1_from_distances, verify_fernique, verify_grr, verify_hoeffding_large_time, verify_hoeffding_small_time,
    FerniqueSetup, GrrSetup, HoeffdingSetup, LipschitzFunctional, Model, MomentReport, TailReport, DEFAULT_LEVELS,
    T1_K_MAX,
};
use crate::config::{ModelSection, VerifierName};
use crate::error::{domain, Error, Result};
use crate::fbm::{CirculantSampler, FbmSampler, Generator, HurstParam, TimeGrid};
use crate::fixtures::calibration;
use crate::frac::{lemma_esti_int_check, GridFunction, StepFunction};
use crate::rng::{stream, Purpose};
use crate::sde::{coupled_stability, solve_scalar, solve_scalar_via_lamperti, DriftCoupling, Driver, LampertiMap};
use crate::stats::quantile;
use crate::transport::{path_distance, PathEnsemble, PathMetric};

/// What a verifier found, before it is wrapped into an outcome.
struct Found {
    passed: bool,
    summary: BTreeMap<String, Value>,
    detail: Value,
}

fn summary<const N: usize>(items: [(&str, Value); N]) -> BTreeMap<String, Value> {
    items.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Runs one verifier with its own seed. Premise violations become a
/// `Rejected` outcome and numerical failures a `NumericalError` outcome;
/// config and I/O errors abort the command.
pub fn run_verifier(run: &Run, name: VerifierName, dir: &Path) -> Result<VerifierOutcome> {
    let seed = sub_seed(run.seed(), name.as_str());
    let result = match name {
        VerifierName::Stability => stability(run, seed, dir),
        VerifierName::EstiInt => esti_int(run, seed, dir),
        VerifierName::Fernique => fernique(run, seed, dir),
        VerifierName::Grr => grr(run, seed),
        VerifierName::HoeffdingSmall => hoeffding_small(run, seed, dir),
        VerifierName::HoeffdingLarge => hoeffding_large(run, seed, dir),
        VerifierName::T1Moments => t1_moments(run, seed),
        VerifierName::GaussianTail => gaussian_tail(run, seed),
        VerifierName::PhiLink => phi(run),
        VerifierName::Coupling => coupling(run, seed, dir),
        VerifierName::Lamperti => lamperti(run, seed),
    };
    let outcome = |status, message, summary, detail| VerifierOutcome { name, status, seed, message, summary, detail };
    match result {
        Ok(f) => {
            let status = if f.passed { Status::Passed } else { Status::Failed };
            Ok(outcome(status, None, f.summary, f.detail))
        }
        Err(e @ Error::Domain(_)) => Ok(outcome(Status::Rejected, Some(e.to_string()), BTreeMap::new(), Value::Null)),
        Err(e @ (Error::Numerical { .. } | Error::BlowUp { .. })) => {
            Ok(outcome(Status::NumericalError, Some(e.to_string()), BTreeMap::new(), Value::Null))
        }
        Err(e) => Err(e),
    }
}

fn check_beta(h: f64, beta: f64) -> Result<()> {
    if !(0.5 < beta && beta < h) {
        return domain(format!("need 1/2 < beta < H, got beta = {beta}, H = {h}"));
    }
    Ok(())
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs
}

fn stability(run: &Run, seed: u64, dir: &Path) -> Result<Found> {
    let s = &run.config.verify.stability;
    check_beta(s.hurst, s.beta)?;
    let (drift, sigma) = s.model.additive_parts()?;
    let delta = if drift.lipschitz > 0.0 { (0.5 / drift.lipschitz).min(1.0) } else { 1.0 };
    if s.horizon > delta {
        return domain(format!("horizon T = {} exceeds (2 L_b)^-1 ∧ 1 = {delta}", s.horizon));
    }
    let k_hat = s.k_hat.unwrap_or(calibration().k_hat_stability.value);
    let grid = TimeGrid::new(s.horizon, s.n_steps)?;
    let sampler = CirculantSampler::new(&grid, HurstParam::new(s.hurst)?)?;
    let m = sigma.m;
    let ratios = (0..s.n_pairs as u64)
        .into_par_iter()
        .map(|i| {
            let g = Driver::from_path(&sampler.sample(m, seed, 2 * i)?);
            let gt = Driver::from_path(&sampler.sample(m, seed, 2 * i + 1)?);
            Ok(coupled_stability(&s.model.x0, &drift, &sigma, &g, &gt, s.beta)?.ratio)
        })
        .collect::<Result<Vec<f64>>>()?;
    let rows: Vec<Vec<f64>> = ratios.iter().enumerate().map(|(i, r)| vec![i as f64, *r]).collect();
    write_table(&dir.join("stability_ratios.csv"), &run.comment("stability"), &["pair", "ratio"], &rows)?;
    let st = sorted(ratios);
    let max = *st.last().expect("n_pairs >= 1");
    Ok(Found {
        passed: max <= k_hat,
        summary: summary([
            ("max_ratio", json!(max)),
            ("k_hat", json!(k_hat)),
            ("median_ratio", json!(quantile(&st, 0.5))),
            ("n_pairs", json!(st.len())),
        ]),
        detail: json!({ "delta": delta, "quantile_0.99": quantile(&st, 0.99), "beta": s.beta, "hurst": s.hurst }),
    })
}

/// Two distinct grid indices drawn uniformly, in increasing order.
pub(crate) fn random_window(seed: u64, i: u64, n_steps: usize) -> (usize, usize) {
    let mut rng = stream(seed, Purpose::Window, i, 0);
    loop {
        let a = rng.random_range(0..=n_steps);
        let b = rng.random_range(0..=n_steps);
        if a != b {
            return (a.min(b), a.max(b));
        }
    }
}

/// Ratios of the Young-integral estimate over independent fBm pairs `(f, g)`
/// on random windows, with `κ = 1`.
pub(crate) fn esti_int_ratios(
    h: f64,
    beta: f64,
    horizon: f64,
    n_steps: usize,
    n_pairs: usize,
    seed: u64,
    kappa_hat: f64,
) -> Result<Vec<(f64, bool)>> {
    let grid = TimeGrid::new(horizon, n_steps)?;
    let sampler = CirculantSampler::new(&grid, HurstParam::new(h)?)?;
    let t = grid.points();
    (0..n_pairs as u64)
        .into_par_iter()
        .map(|i| {
            let f = GridFunction::new(grid.clone(), sampler.sample(1, seed, 2 * i)?.component(0))?;
            let g = GridFunction::new(grid.clone(), sampler.sample(1, seed, 2 * i + 1)?.component(0))?;
            let (a, b) = random_window(seed, i, n_steps);
            let rep = lemma_esti_int_check(&f, &g, beta, t[a], t[b], kappa_hat)?;
            let analytic = rep.context.get("analytic_passed").and_then(Value::as_bool).unwrap_or(false);
            Ok((rep.ratio, analytic))
        })
        .collect()
}

fn esti_int(run: &Run, seed: u64, dir: &Path) -> Result<Found> {
    let s = &run.config.verify.esti_int;
    check_beta(s.hurst, s.beta)?;
    let kappa = s.kappa_hat.unwrap_or(calibration().kappa_hat.value);
    let results = esti_int_ratios(s.hurst, s.beta, s.horizon, s.n_steps, s.n_pairs, seed, kappa)?;
    let rows: Vec<Vec<f64>> = results
        .iter()
        .enumerate()
        .map(|(i, (r, a))| vec![i as f64, *r, if *a { 1.0 } else { 0.0 }])
        .collect();
    write_table(&dir.join("esti_int_ratios.csv"), &run.comment("esti-int"), &["pair", "ratio", "analytic_passed"], &rows)?;
    let analytic_failures = results.iter().filter(|r| !r.1).count();
    let st = sorted(results.into_iter().map(|r| r.0).collect());
    let max = *st.last().expect("n_pairs >= 1");
    Ok(Found {
        passed: max <= kappa,
        summary: summary([
            ("max_ratio", json!(max)),
            ("kappa_hat", json!(kappa)),
            ("n_pairs", json!(st.len())),
            ("analytic_bound_failures", json!(analytic_failures)),
        ]),
        detail: json!({ "median_ratio": quantile(&st, 0.5), "beta": s.beta, "hurst": s.hurst, "horizon": s.horizon }),
    })
}

fn moment_rows(rep: &MomentReport) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = rep.moments.iter().map(|m| vec![m.k as f64, m.mean, m.se, m.upper, m.bound]).collect();
    if let Some(e) = &rep.exp_moment {
        rows.push(vec![-1.0, e.mean, e.se, e.upper, e.bound]);
    }
    rows
}

fn fernique(run: &Run, seed: u64, dir: &Path) -> Result<Found> {
    let s = &run.config.verify.fernique;
    let rep = verify_fernique(&FerniqueSetup {
        hurst: s.hurst,
        beta: s.beta,
        horizon: s.horizon,
        n_steps: s.n_steps,
        n_paths: s.n_paths,
        seed,
        generator: s.generator,
        alpha: s.alpha,
        k_list: s.k_list.clone(),
        confidence: run.config.verify.confidence,
        config_hash: run.hash.clone(),
    })?;
    if !rep.all_finite() {
        return Err(Error::Numerical { msg: "non-finite moment estimate".into(), achieved: f64::NAN });
    }
    write_table(
        &dir.join("fernique_moments.csv"),
        &format!("{} (k = -1 is the exponential moment)", run.comment("fernique")),
        &["k", "mean", "se", "upper", "bound"],
        &moment_rows(&rep),
    )?;
    let worst = rep
        .moments
        .iter()
        .map(|m| m.upper / m.bound)
        .chain(rep.exp_moment.iter().map(|e| e.upper / e.bound))
        .fold(0.0, f64::max);
    Ok(Found {
        passed: rep.all_passed(),
        summary: summary([("worst_upper_over_bound", json!(worst)), ("n_paths", json!(rep.n_samples))]),
        detail: to_value(&rep),
    })
}

fn grr(run: &Run, seed: u64) -> Result<Found> {
    let s = &run.config.verify.grr;
    let rep = verify_grr(&GrrSetup {
        hurst: s.hurst,
        beta: s.beta,
        horizon: s.horizon,
        n_steps: s.n_steps,
        n_paths: s.n_paths,
        seed,
        generator: s.generator,
        p: s.p,
        confidence: run.config.verify.confidence,
        config_hash: run.hash.clone(),
    })?;
    Ok(Found {
        passed: rep.passed(),
        summary: summary([
            ("worst_ratio", json!(rep.worst_ratio)),
            ("violations", json!(rep.violations)),
            ("n_paths", json!(rep.n_paths)),
        ]),
        detail: to_value(&rep),
    })
}

fn write_tails(dir: &Path, prefix: &str, reports: &[TailReport]) -> Result<()> {
    for r in reports {
        let name = format!("{prefix}_{}_T{}.csv", r.bound_name, r.horizon);
        r.write_csv(File::create(dir.join(name))?)?;
    }
    Ok(())
}

fn tail_summary(reports: &[TailReport]) -> Value {
    reports
        .iter()
        .map(|r| json!({ "bound": r.bound_name, "horizon": r.horizon, "passed": r.all_passed(), "min_margin": r.min_margin() }))
        .collect()
}

fn hoeffding_setup(run: &Run, seed: u64, hurst: f64, model: &ModelSection, clip: f64, dt: f64, n_paths: usize) -> Result<HoeffdingSetup> {
    Ok(HoeffdingSetup {
        hurst: HurstParam::new(hurst)?,
        model: model.build()?,
        functional: LipschitzFunctional::clipped_identity(clip),
        dt,
        n_paths,
        generator: Generator::Circulant,
        seed,
        beta: 0.6,
        k_t1: None,
        confidence: run.config.verify.confidence,
        levels: DEFAULT_LEVELS.to_vec(),
        config_hash: run.hash.clone(),
    })
}

fn hoeffding_small(run: &Run, seed: u64, dir: &Path) -> Result<Found> {
    let s = &run.config.verify.hoeffding_small;
    check_beta(s.hurst, s.beta)?;
    let mut setup = hoeffding_setup(run, seed, s.hurst, &s.model, s.clip, s.dt, s.n_paths)?;
    setup.beta = s.beta;
    setup.k_t1 = s.k_t1;
    let reports = verify_hoeffding_small_time(&setup, s.horizon)?;
    write_tails(dir, "hoeffding_small", &reports)?;
    Ok(Found {
        passed: reports.iter().all(TailReport::all_passed),
        summary: summary([
            ("t1_constant", json!(reports[0].t1_constant)),
            ("tails", tail_summary(&reports)),
            ("n_paths", json!(s.n_paths)),
        ]),
        detail: to_value(&reports),
    })
}

fn hoeffding_large(run: &Run, seed: u64, dir: &Path) -> Result<Found> {
    let s = &run.config.verify.hoeffding_large;
    let setup = hoeffding_setup(run, seed, s.hurst, &s.model, s.clip, s.dt, s.n_paths)?;
    let rep = verify_hoeffding_large_time(&setup, &s.horizons)?;
    write_tails(dir, "hoeffding_large", &rep.reports)?;
    if let Some(fit) = &rep.scaling {
        let rows: Vec<Vec<f64>> = (0..fit.horizons.len())
            .map(|i| vec![fit.horizons[i], fit.variances[i], fit.kappa_hat[i]])
            .collect();
        write_table(
            &dir.join("hoeffding_large_scaling.csv"),
            &format!("{} slope={} expected={}", run.comment("hoeffding-large scaling"), fit.slope, fit.expected),
            &["horizon", "variance", "kappa_hat"],
            &rows,
        )?;
    }
    let scaling_ok = rep.scaling.as_ref().is_none_or(|f| f.within);
    Ok(Found {
        passed: rep.tails_passed() && (scaling_ok || !s.enforce_scaling),
        summary: summary([
            ("tails", tail_summary(&rep.reports)),
            ("scaling_slope", json!(rep.scaling.as_ref().map(|f| f.slope))),
            ("scaling_expected", json!(rep.scaling.as_ref().map(|f| f.expected))),
            ("scaling_within_tolerance", json!(scaling_ok)),
            ("scaling_enforced", json!(s.enforce_scaling)),
        ]),
        detail: json!({ "reports": to_value(&rep.reports), "scaling": to_value(&rep.scaling) }),
    })
}

/// Two independent ensembles of solutions of `model`, paired by index.
pub(crate) fn solution_pairs(
    model: &Model,
    hurst: f64,
    grid: &TimeGrid,
    n_pairs: usize,
    seed: u64,
    config_hash: &str,
) -> Result<(PathEnsemble, PathEnsemble)> {
    let sampler = CirculantSampler::new(grid, HurstParam::new(hurst)?)?;
    let m = model.noise_dim();
    let sols = (0..2 * n_pairs as u64)
        .into_par_iter()
        .map(|i| model.solve(&Driver::from_path(&sampler.sample(m, seed, i)?)))
        .collect::<Result<Vec<_>>>()?;
    let (a, b): (Vec<_>, Vec<_>) = sols.into_iter().enumerate().partition(|(i, _)| i % 2 == 0);
    let strip = |v: Vec<(usize, _)>| v.into_iter().map(|(_, s)| s).collect::<Vec<_>>();
    Ok((
        PathEnsemble::from_solutions(&strip(a), config_hash)?,
        PathEnsemble::from_solutions(&strip(b), config_hash)?,
    ))
}

fn t1_moments(run: &Run, seed: u64) -> Result<Found> {
    let s = &run.config.verify.t1_moments;
    check_beta(s.hurst, s.beta)?;
    let model = s.model.build()?;
    let grid = TimeGrid::new(s.horizon, s.n_steps)?;
    let constant = model_t1_constant(&model, HurstParam::new(s.hurst)?, &grid, s.beta, s.k_t1)?;
    if !constant.valid {
        return domain(format!("horizon outside the range of the T1 inequality: {}", constant.validity));
    }
    let (a, b) = solution_pairs(&model, s.hurst, &grid, s.n_pairs, seed, &run.hash)?;
    let d = pair_distances(&a, &b, PathMetric::DInfinity)?;
    let est = t1_from_distances(&d, s.k_max.min(T1_K_MAX))?;
    Ok(Found {
        passed: est.value <= constant.value,
        summary: summary([
            ("estimate", json!(est.value)),
            ("t1_constant", json!(constant.value)),
            ("argmax_k", json!(est.argmax_k)),
            ("n_pairs", json!(est.n_pairs)),
        ]),
        detail: json!({ "estimate": to_value(&est), "constant": to_value(&constant) }),
    })
}

fn gaussian_tail(run: &Run, seed: u64) -> Result<Found> {
    let s = &run.config.verify.gaussian_tail;
    let model = s.model.build()?;
    let grid = TimeGrid::new(s.horizon, s.n_steps)?;
    let (a, b) = solution_pairs(&model, s.hurst, &grid, s.n_pairs, seed, &run.hash)?;
    let d = pair_distances(&a, &b, s.metric)?;
    let est = t1_from_distances(&d, s.k_max.min(T1_K_MAX))?;
    let radius = appendix_delta_radius(s.hurst, s.beta, s.horizon).ok();
    let c = c_delta_from_distances(&d, s.delta, radius)?;
    Ok(Found {
        passed: est.value <= c.link_bound,
        summary: summary([
            ("t1_estimate", json!(est.value)),
            ("c_delta", json!(c.c_delta)),
            ("c_delta_over_delta", json!(c.link_bound)),
            ("unstable", json!(c.unstable)),
        ]),
        detail: json!({ "estimate": to_value(&est), "c_delta": to_value(&c) }),
    })
}

fn phi(run: &Run) -> Result<Found> {
    let s = &run.config.verify.phi_link;
    let mut rows = Vec::new();
    let mut passed = true;
    for &c in &s.c_values {
        let argmax = phi_argmax(c)?;
        let phi1 = phi_link(1.0, c)?;
        let h1 = phi_h(1.0, c)?;
        let ok = (argmax - 1.0).abs() <= 1e-9 && (phi1 - c / 2.0).abs() <= 1e-12 * c;
        passed &= ok;
        rows.push(json!({ "c_delta": c, "argmax": argmax, "phi_at_1": phi1, "h_at_1": h1, "passed": ok }));
    }
    Ok(Found { passed, summary: summary([("cases", json!(rows.len()))]), detail: Value::Array(rows) })
}

fn coupling(run: &Run, seed: u64, dir: &Path) -> Result<Found> {
    let s = &run.config.verify.coupling;
    let (drift, sigma) = s.model.additive_parts()?;
    let grid = TimeGrid::new(s.horizon, s.n_steps)?;
    let c = DriftCoupling::new(&grid, HurstParam::new(s.hurst)?)?;
    let rho: Vec<StepFunction> = (0..sigma.m).map(|_| StepFunction::constant(&grid, s.rho)).collect();
    let kh = c.kh_rho(&rho)?;
    let checks = (0..s.n_seeds as u64)
        .into_par_iter()
        .map(|i| Ok(c.pair_with(&s.model.x0, &drift, &sigma, &rho, &kh, seed, i)?.check))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = checks
        .iter()
        .enumerate()
        .map(|(i, k)| vec![i as f64, k.max_ratio, k.d2_sq, k.d2_bound])
        .collect();
    write_table(&dir.join("coupling.csv"), &run.comment("coupling"), &["seed_index", "max_pointwise_ratio", "d2_sq", "d2_bound"], &rows)?;
    let pointwise = checks.iter().filter(|k| !k.pointwise_ok).count();
    let d2 = checks.iter().filter(|k| !k.d2_ok).count();
    let worst = checks.iter().map(|k| k.max_ratio).fold(0.0, f64::max);
    let worst_d2 = checks.iter().map(|k| k.d2_sq / k.d2_bound).fold(0.0, f64::max);
    Ok(Found {
        passed: pointwise == 0 && d2 == 0,
        summary: summary([
            ("pointwise_violations", json!(pointwise)),
            ("d2_violations", json!(d2)),
            ("worst_pointwise_ratio", json!(worst)),
            ("worst_d2_ratio", json!(worst_d2)),
        ]),
        detail: json!({ "n_seeds": checks.len(), "rho": s.rho, "one_sided": drift.one_sided }),
    })
}

/// Sup distance between the direct Euler solution and the Lamperti route
/// for `n_paths` drivers, and the largest `|F(F⁻¹(z)) - z|` on a grid of
/// `z`.
pub(crate) fn lamperti_check(model: &ModelSection, hurst: f64, horizon: f64, n_steps: usize, n_paths: usize, seed: u64) -> Result<(Vec<f64>, f64)> {
    let (drift, sigma) = model.scalar_parts()?;
    let x0 = model.x0[0];
    let grid = TimeGrid::new(horizon, n_steps)?;
    let sampler = CirculantSampler::new(&grid, HurstParam::new(hurst)?)?;
    let dists = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let driver = Driver::from_path(&sampler.sample(1, seed, i)?);
            let e = solve_scalar(x0, &drift, &sigma, &driver)?;
            let l = solve_scalar_via_lamperti(x0, &drift, &sigma, &driver)?;
            path_distance(&grid, &e.values, &l.values, PathMetric::DInfinity)
        })
        .collect::<Result<Vec<_>>>()?;
    let map = LampertiMap::new(&sigma);
    let mut roundtrip = 0.0f64;
    for i in 0..=200 {
        let z = -10.0 + 0.1 * i as f64;
        roundtrip = roundtrip.max((map.forward(map.inverse(z)?)? - z).abs());
    }
    Ok((dists, roundtrip))
}

/// `F(F⁻¹(z)) = z` is required to this absolute tolerance.
pub const ROUNDTRIP_TOL: f64 = 1e-10;

fn lamperti(run: &Run, seed: u64) -> Result<Found> {
    let s = &run.config.verify.lamperti;
    let (dists, roundtrip) = lamperti_check(&s.model, s.hurst, s.horizon, s.n_steps, s.n_paths, seed)?;
    let worst = dists.iter().cloned().fold(0.0, f64::max);
    Ok(Found {
        passed: worst < s.tolerance && roundtrip <= ROUNDTRIP_TOL,
        summary: summary([
            ("worst_sup_distance", json!(worst)),
            ("tolerance", json!(s.tolerance)),
            ("roundtrip_error", json!(roundtrip)),
        ]),
        detail: json!({ "sup_distances": dists }),
    })
}
