use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::verifiers::{esti_int_ratios, solution_pairs};
use super::{exit, sub_seed, write_json, Run};
use crate::concentration::{estimate_t1_constant, Model, T1_K_MAX};
use crate::error::Result;
use crate::fbm::{CirculantSampler, FbmSampler, HurstParam, KernelTable, TimeGrid};
use crate::fixtures::{Calibrated, Calibration, Provenance};
use crate::frac::{operator_kh_with, StepFunction};
use crate::rng::{stream, Purpose};
use crate::sde::{coupled_stability, Driver, DriftSpec, TimeDiffusion};
use crate::transport::PathMetric;

fn calibrated(
    max_observed: f64,
    headroom: f64,
    oracle: &str,
    samples: usize,
    seed: u64,
    date: &str,
    params: BTreeMap<String, Value>,
) -> Calibrated {
    Calibrated {
        value: max_observed * headroom,
        provenance: Provenance {
            oracle: oracle.into(),
            samples,
            seed,
            max_observed,
            headroom,
            params,
            date: date.into(),
        },
    }
}

fn params<const N: usize>(items: [(&str, Value); N]) -> BTreeMap<String, Value> {
    items.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Largest stability ratio over independent driver pairs.
fn max_stability(run: &Run, seed: u64) -> Result<f64> {
    let s = &run.config.verify.stability;
    let (drift, sigma) = s.model.additive_parts()?;
    let grid = TimeGrid::new(s.horizon, s.n_steps)?;
    let sampler = CirculantSampler::new(&grid, HurstParam::new(s.hurst)?)?;
    let ratios = (0..run.config.calibrate.stability_pairs as u64)
        .into_par_iter()
        .map(|i| {
            let g = Driver::from_path(&sampler.sample(sigma.m, seed, 2 * i)?);
            let gt = Driver::from_path(&sampler.sample(sigma.m, seed, 2 * i + 1)?);
            Ok(coupled_stability(&s.model.x0, &drift, &sigma, &g, &gt, s.beta)?.ratio)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Largest `H`-Hölder ratio `‖K_H ρ‖_H / ‖ρ‖_{L²}` over random step
/// functions: Gaussian cells and indicators of random intervals.
fn max_kh_holder(draws: usize, seed: u64) -> Result<(f64, BTreeMap<String, Value>)> {
    let (h, t, n) = (0.75, 1.0, 256);
    let grid = TimeGrid::new(t, n)?;
    let table = KernelTable::new(&grid, HurstParam::new(h)?)?;
    let ratios = (0..draws as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Purpose::RandomFunction, i, 0);
            let cells: Vec<f64> = if i % 2 == 0 {
                (0..n).map(|_| rng.sample(StandardNormal)).collect()
            } else {
                let a = rng.random_range(0..n);
                let b = rng.random_range(a + 1..=n);
                (0..n).map(|k| if (a..b).contains(&k) { 1.0 } else { 0.0 }).collect()
            };
            Ok(operator_kh_with(&StepFunction::new(grid.clone(), cells)?, &table)?.holder_ratio)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max = ratios.into_iter().fold(0.0, f64::max);
    Ok((max, params([("hurst", json!(h)), ("horizon", json!(t)), ("n_steps", json!(n))])))
}

/// Largest `C_moment / (‖σ‖_β T^{2H})` over additive models with identity
/// diffusion, where `C_moment` is the moment estimate of the T1 constant.
fn max_t1_ratio(run: &Run, seed: u64) -> Result<(f64, usize, BTreeMap<String, Value>)> {
    let c = &run.config.calibrate;
    let grid_beta = run.config.verify.t1_moments.beta;
    let mut worst = 0.0f64;
    let mut cases = Vec::new();
    let mut samples = 0;
    for (ci, &h) in c.t1_hursts.iter().enumerate() {
        for (ti, &t) in c.t1_horizons.iter().enumerate() {
            for (di, drift) in [DriftSpec::zero(1), DriftSpec::linear(-1.0, 1)].into_iter().enumerate() {
                let delta = if drift.lipschitz > 0.0 { (0.5 / drift.lipschitz).min(1.0) } else { 1.0 };
                if t > delta {
                    continue;
                }
                let sigma = TimeDiffusion::identity(1);
                let grid = TimeGrid::new(t, c.t1_steps)?;
                let scale = sigma.holder_norm(&grid, grid_beta)?.total() * t.powf(2.0 * h);
                let model = Model::Additive { x0: vec![0.0], drift, sigma };
                let case_seed = sub_seed(seed, &format!("{ci}/{ti}/{di}"));
                let (a, b) = solution_pairs(&model, h, &grid, c.t1_pairs, case_seed, "")?;
                let est = estimate_t1_constant(&a, &b, PathMetric::DInfinity, T1_K_MAX)?;
                let ratio = est.value / scale;
                worst = worst.max(ratio);
                samples += est.n_pairs;
                cases.push(json!({ "hurst": h, "horizon": t, "drift": model.drift().name, "ratio": ratio }));
            }
        }
    }
    Ok((worst, samples, params([("cases", Value::Array(cases)), ("metric", json!("d_infinity")), ("k_max", json!(T1_K_MAX))])))
}

/// Re-estimates the calibrated constants and writes `calibration.json`.
/// The seeds are derived from the run seed with labels distinct from the
/// verifiers', so a calibration never reuses the draws it is checked on.
pub fn cmd_calibrate(run: &Run) -> Result<i32> {
    let c = &run.config.calibrate;
    let date = c.date.as_str();
    let headroom = c.headroom;

    let seed = sub_seed(run.seed(), "calibrate/stability");
    log::info!("calibrating the stability constant");
    let s = &run.config.verify.stability;
    let k_stab = calibrated(
        max_stability(run, seed)?,
        headroom,
        "max over independent fBm driver pairs of |x - x~|_inf / (|sigma|_beta |g - g~|_beta T^beta)",
        c.stability_pairs,
        seed,
        date,
        params([
            ("hurst", json!(s.hurst)),
            ("beta", json!(s.beta)),
            ("horizon", json!(s.horizon)),
            ("n_steps", json!(s.n_steps)),
            ("drift", json!(s.model.drift)),
            ("diffusion", json!(s.model.diffusion)),
            ("config_hash", json!(run.hash)),
        ]),
    );

    let seed = sub_seed(run.seed(), "calibrate/esti-int");
    log::info!("calibrating the Young-integral constant");
    let e = &run.config.verify.esti_int;
    let ratios = esti_int_ratios(e.hurst, e.beta, e.horizon, e.n_steps, c.esti_int_pairs, seed, 1.0)?;
    let kappa = calibrated(
        ratios.iter().map(|r| r.0).fold(0.0, f64::max),
        headroom,
        "max over independent fBm pairs (f, g) and random windows of |int f dg| (beta - 1/2) / bracket",
        c.esti_int_pairs,
        seed,
        date,
        params([
            ("hurst", json!(e.hurst)),
            ("beta", json!(e.beta)),
            ("horizon", json!(e.horizon)),
            ("n_steps", json!(e.n_steps)),
            ("config_hash", json!(run.hash)),
        ]),
    );

    let seed = sub_seed(run.seed(), "calibrate/t1");
    log::info!("calibrating the T1 multiplier");
    let (t1_max, t1_samples, mut t1_params) = max_t1_ratio(run, seed)?;
    t1_params.insert("config_hash".into(), json!(run.hash));
    let k_t1 = calibrated(
        t1_max,
        headroom,
        "max over models of the moment estimate 2 sup_k (k! E d^2k / (2k)!)^(1/k) divided by |sigma|_beta T^2H",
        t1_samples,
        seed,
        date,
        t1_params,
    );

    let seed = sub_seed(run.seed(), "calibrate/kh");
    log::info!("calibrating the K_H Hölder ratio");
    let (kh_max, mut kh_params) = max_kh_holder(c.kh_draws, seed)?;
    kh_params.insert("config_hash".into(), json!(run.hash));
    let kh = calibrated(
        kh_max,
        headroom,
        "max over random step functions rho of the grid H-Hölder seminorm of K_H rho over |rho|_L2",
        c.kh_draws,
        seed,
        date,
        kh_params,
    );

    let cal = Calibration { version: 1, k_hat_stability: k_stab, k_hat_t1: k_t1, kappa_hat: kappa, kh_holder: kh };
    std::fs::create_dir_all(&run.out)?;
    write_json(&run.out.join("calibration.json"), &cal)?;
    Ok(exit::PASS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    #[test]
    fn calibration_output_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        let toml = "seed = 2\n\
                    [verify.stability]\nn_steps = 64\n\
                    [verify.esti_int]\nn_steps = 64\n\
                    [calibrate]\nstability_pairs = 10\nesti_int_pairs = 10\nkh_draws = 6\nt1_pairs = 50\n\
                    t1_hursts = [0.75]\nt1_horizons = [0.25, 1.0]\nt1_steps = 32\ndate = \"2026-01-01\"";
        let run = Run::new(ExperimentConfig::from_toml(toml).unwrap(), None, Some(tmp.path().into()), None).unwrap();
        assert_eq!(cmd_calibrate(&run).unwrap(), 0);
        let text = std::fs::read_to_string(tmp.path().join("calibration.json")).unwrap();
        let cal = Calibration::from_json(&text).unwrap();
        for k in [&cal.k_hat_stability, &cal.k_hat_t1, &cal.kappa_hat, &cal.kh_holder] {
            assert!(k.value > 0.0 && k.value.is_finite());
            assert_eq!(k.value, k.provenance.max_observed * 1.25);
            assert_eq!(k.provenance.date, "2026-01-01");
        }
        // Cauchy–Schwarz and the isometry bound the K_H ratio by one.
        assert!(cal.kh_holder.provenance.max_observed <= 1.0 + 1e-6);
        // The linear drift at T = 1 is outside the T1 range and skipped.
        assert_eq!(cal.k_hat_t1.provenance.params["cases"].as_array().unwrap().len(), 3);
    }
}
