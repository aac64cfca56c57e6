//! Acceptance suite: one line per criterion.
//!
//! Statistical criteria run on seeds derived from `ACCEPTANCE_SEED`, which
//! neither the shipped configs nor the calibration use. The process exits
//! non-zero when a criterion outside `KNOWN_UNATTAINABLE` fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use fbmlab::concentration::{digamma, fernique_moment_bound, phi_argmax, phi_link};
use fbmlab::config::{ExperimentConfig, VerifierName};
use fbmlab::fbm::{covariance_rh, kernel_kh, CholeskySampler, CirculantSampler, FbmSampler, HurstParam, TimeGrid};
use fbmlab::frac::{young_integral_frac, young_integral_rs, FracOrder, GridFunction};
use fbmlab::quad::{integrate, QuadOptions};
use fbmlab::runner::{run_verifier, sub_seed, Run, Status, VerifierOutcome};
use fbmlab::transport::{path_distance, wasserstein_empirical, PathEnsemble, PathMetric};
use serde_json::Value;

const ACCEPTANCE_SEED: u64 = 0x00ac_ce97_2026;

/// Criteria that cannot hold as stated. Each has an analysis in the project
/// notes; they still run and print FAIL.
const KNOWN_UNATTAINABLE: &[u32] = &[8];

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

struct Ctx {
    config: ExperimentConfig,
    out: PathBuf,
}

impl Ctx {
    fn verifier(&self, name: VerifierName, seed: u64, tweak: impl FnOnce(&mut ExperimentConfig)) -> VerifierOutcome {
        let mut config = self.config.clone();
        tweak(&mut config);
        let dir = self.out.join(format!("{name}-{seed:x}"));
        let run = Run::new(config, Some(seed), Some(dir.clone()), None).expect("acceptance config is valid");
        std::fs::create_dir_all(&dir).expect("output dir");
        run_verifier(&run, name, &dir).expect("verifier runs")
    }
}

fn summary(o: &VerifierOutcome, keys: &[&str]) -> String {
    let mut parts: Vec<String> = keys.iter().map(|k| format!("{k}={}", short(&o.summary[*k]))).collect();
    if let Some(m) = &o.message {
        parts.push(m.clone());
    }
    format!("{:?}; {}", o.status, parts.join(", "))
}

fn short(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => format!("{:.4}", n.as_f64().unwrap_or(f64::NAN)),
        other => other.to_string(),
    }
}

fn h(v: f64) -> HurstParam {
    HurstParam::new(v).expect("valid Hurst index")
}

fn covariance_fidelity(_: &Ctx) -> Verdict {
    let (n, n_paths) = (64, 10_000);
    let grid = TimeGrid::new(1.0, n).unwrap();
    let pts = &grid.points()[1..];
    let mut worst: f64 = 0.0;
    for (ci, hv) in [0.6, 0.75, 0.9].into_iter().enumerate() {
        let sampler = CholeskySampler::new(&grid, h(hv)).unwrap();
        let seed = sub_seed(ACCEPTANCE_SEED, &format!("covariance/{ci}"));
        let rows: Vec<Vec<f64>> = (0..n_paths as u64)
            .map(|i| sampler.sample(1, seed, i).unwrap().values.column(0).iter().skip(1).copied().collect())
            .collect();
        for i in 0..n {
            for j in i..n {
                let prods: Vec<f64> = rows.iter().map(|r| r[i] * r[j]).collect();
                let (mean, se) = fbmlab::stats::mean_and_se(&prods);
                let z = (mean - covariance_rh(pts[i], pts[j], h(hv)).unwrap()).abs() / se;
                worst = worst.max(z);
            }
        }
    }
    verdict(worst <= 4.0, format!("max |z| = {worst:.3} over 3 x 2080 entries"))
}

fn kernel_isometry(_: &Ctx) -> Verdict {
    let cases = [
        (0.3, 0.55),
        (0.5, 0.6),
        (1.0, 0.6),
        (1.0, 0.75),
        (2.0, 0.75),
        (0.7, 0.8),
        (1.5, 0.85),
        (1.0, 0.9),
        (3.0, 0.65),
        (0.25, 0.95),
    ];
    let mut worst: f64 = 0.0;
    for (t, hv) in cases {
        let p = 1.0 / (2.0 - 2.0 * hv);
        let integrand = |v: f64| {
            let s = v.powf(p);
            kernel_kh(t, s, h(hv)).unwrap().powi(2) * p * v.powf(p - 1.0)
        };
        let q = integrate(integrand, 0.0, t.powf(1.0 / p), QuadOptions::rel(1e-10)).unwrap();
        let target = t.powf(2.0 * hv);
        worst = worst.max((q.value - target).abs() / target);
    }
    verdict(worst < 1e-6, format!("max relative error {worst:.2e}"))
}

fn young_equivalence(_: &Ctx) -> Verdict {
    let grid = TimeGrid::new(1.0, 2048).unwrap();
    let rel = |f: &GridFunction, g: &GridFunction, alpha: f64| {
        let fr = young_integral_frac(f, g, FracOrder::new(alpha).unwrap(), 0.0, 1.0).unwrap().value;
        let rs = young_integral_rs(f, g, 0.0, 1.0).unwrap();
        (fr - rs).abs() / rs.abs()
    };
    let mut smooth: f64 = 0.0;
    for k in 0..20 {
        let (a, b) = (1.0 + 0.5 * k as f64, 1.0 + 0.2 * k as f64);
        let f = GridFunction::from_fn(&grid, |t| (a * t).sin() + 1.5).unwrap();
        let g = GridFunction::from_fn(&grid, |t| (b * t).exp() + t * t).unwrap();
        smooth = smooth.max(rel(&f, &g, 0.3));
    }
    // f = 1 + B¹², g = B² + 4t: fBm roughness, with an integral bounded away
    // from zero so that a relative tolerance is meaningful.
    let mut rough: f64 = 0.0;
    for k in 0..20u64 {
        let hv = [0.6, 0.75, 0.9][k as usize % 3];
        let sampler = CirculantSampler::new(&grid, h(hv)).unwrap();
        let p = sampler.sample(2, sub_seed(ACCEPTANCE_SEED, "young"), k).unwrap();
        let f = GridFunction::new(grid.clone(), p.values.column(0).iter().map(|b| 1.0 + b * b).collect()).unwrap();
        let g = GridFunction::new(
            grid.clone(),
            p.values.column(1).iter().zip(grid.points()).map(|(b, t)| b + 4.0 * t).collect(),
        )
        .unwrap();
        rough = rough.max(rel(&f, &g, 0.5));
    }
    verdict(
        smooth < 1e-3 && rough < 1e-2,
        format!("smooth max rel {smooth:.2e} (< 1e-3), fBm max rel {rough:.2e} (< 1e-2)"),
    )
}

fn stability(ctx: &Ctx) -> Verdict {
    let o = ctx.verifier(VerifierName::Stability, ACCEPTANCE_SEED, |_| {});
    verdict(o.status == Status::Passed, summary(&o, &["max_ratio", "k_hat", "n_pairs"]))
}

fn fernique(ctx: &Ctx) -> Verdict {
    let o = ctx.verifier(VerifierName::Fernique, ACCEPTANCE_SEED, |_| {});
    let control = ctx.verifier(VerifierName::Fernique, ACCEPTANCE_SEED, |c| c.verify.fernique.beta = 0.8);
    let k1 = fernique_moment_bound(0.75, 0.6, 0.5, 1).unwrap();
    verdict(
        o.status == Status::Passed && control.status == Status::Rejected && k1 == 64.0,
        format!(
            "{}; k=1 bound {k1}; negative control {:?}",
            summary(&o, &["worst_upper_over_bound", "n_paths"]),
            control.status
        ),
    )
}

fn grr(ctx: &Ctx) -> Verdict {
    let o = ctx.verifier(VerifierName::Grr, ACCEPTANCE_SEED, |_| {});
    verdict(o.status == Status::Passed, summary(&o, &["violations", "worst_ratio"]))
}

fn hoeffding_small(ctx: &Ctx) -> Verdict {
    let o = ctx.verifier(VerifierName::HoeffdingSmall, ACCEPTANCE_SEED, |_| {});
    verdict(o.status == Status::Passed, summary(&o, &["t1_constant", "tails"]))
}

fn hoeffding_large(ctx: &Ctx) -> Verdict {
    let o = ctx.verifier(VerifierName::HoeffdingLarge, ACCEPTANCE_SEED, |c| {
        c.verify.hoeffding_large.enforce_scaling = true;
    });
    let tails_ok = o.summary["tails"].as_array().is_some_and(|t| t.iter().all(|r| r["passed"] == true));
    verdict(
        o.status == Status::Passed,
        format!(
            "tails {}; {}",
            if tails_ok { "pass" } else { "fail" },
            summary(&o, &["scaling_slope", "scaling_expected", "scaling_within_tolerance"])
        ),
    )
}

fn coupling(ctx: &Ctx) -> Verdict {
    let o = ctx.verifier(VerifierName::Coupling, ACCEPTANCE_SEED, |_| {});
    verdict(o.status == Status::Passed, summary(&o, &["worst_pointwise_ratio", "worst_d2_ratio"]))
}

fn lamperti(ctx: &Ctx) -> Verdict {
    let o = ctx.verifier(VerifierName::Lamperti, ACCEPTANCE_SEED, |_| {});
    verdict(o.status == Status::Passed, summary(&o, &["worst_sup_distance", "roundtrip_error"]))
}

fn phi_optimization(_: &Ctx) -> Verdict {
    let mut worst_arg: f64 = 0.0;
    let mut worst_phi: f64 = 0.0;
    for c in [1.0, 2.0, 10.0, 1e6] {
        worst_arg = worst_arg.max((phi_argmax(c).unwrap() - 1.0).abs());
        worst_phi = worst_phi.max((phi_link(1.0, c).unwrap() - c / 2.0).abs() / (c / 2.0));
    }
    let psi = (digamma(2.0) - digamma(3.0) + 0.5).abs();
    verdict(
        worst_arg <= 1e-9 && worst_phi <= 1e-14 && psi <= 1e-12,
        format!("|argmax - 1| {worst_arg:.1e}, Phi(1) rel err {worst_phi:.1e}, Psi(2)-Psi(3)+1/2 = {psi:.1e}"),
    )
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn transport_cross_check(ctx: &Ctx) -> Verdict {
    let mut worst_link: f64 = 0.0;
    let mut link_ok = true;
    for k in 0..10 {
        let seed = sub_seed(ACCEPTANCE_SEED, &format!("link/{k}"));
        let o = ctx.verifier(VerifierName::GaussianTail, seed, |c| c.verify.gaussian_tail.n_pairs = 2000);
        let est = o.summary["t1_estimate"].as_f64().unwrap();
        let bound = o.summary["c_delta_over_delta"].as_f64().unwrap();
        link_ok &= o.status == Status::Passed && est <= bound;
        worst_link = worst_link.max(est / bound);
    }

    let grid = TimeGrid::new(1.0, 32).unwrap();
    let sampler = CirculantSampler::new(&grid, h(0.7)).unwrap();
    let perms = permutations(4);
    let mut worst_ot: f64 = 0.0;
    for k in 0..10u64 {
        let seed = sub_seed(ACCEPTANCE_SEED, &format!("ot/{k}"));
        let draw = |offset: u64| {
            let paths: Vec<_> = (0..4).map(|i| sampler.sample(1, seed, offset + i).unwrap().values).collect();
            PathEnsemble::new(grid.clone(), paths, (0..4).collect(), "").unwrap()
        };
        let (a, b) = (draw(0), draw(4));
        for metric in [PathMetric::DInfinity, PathMetric::DTwo] {
            for p in [1u32, 2] {
                let cost =
                    |i: usize, j: usize| path_distance(&grid, &a.paths[i], &b.paths[j], metric).unwrap().powi(p as i32);
                let brute = perms
                    .iter()
                    .map(|perm| perm.iter().enumerate().map(|(i, &j)| cost(i, j)).sum::<f64>() / 4.0)
                    .fold(f64::INFINITY, f64::min)
                    .powf(1.0 / p as f64);
                let w = wasserstein_empirical(&a, &b, p, metric).unwrap().value;
                worst_ot = worst_ot.max((w - brute).abs());
            }
        }
    }
    verdict(
        link_ok && worst_ot <= 1e-9,
        format!("max C/(C(delta)/delta) {worst_link:.4} over 10 seeds; max |W - brute force| {worst_ot:.1e}"),
    )
}

type Check = fn(&Ctx) -> Verdict;

fn main() -> ExitCode {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let config = ExperimentConfig::load(&root.join("configs/default.toml")).expect("default config loads");
    let tmp = tempfile::tempdir().expect("temp dir");
    let ctx = Ctx { config, out: tmp.path().to_path_buf() };

    let criteria: [(u32, &str, Check); 12] = [
        (1, "covariance fidelity", covariance_fidelity),
        (2, "kernel isometry", kernel_isometry),
        (3, "Young integral equivalence", young_equivalence),
        (4, "pathwise stability", stability),
        (5, "Fernique moments", fernique),
        (6, "GRR modulus", grr),
        (7, "Hoeffding small time", hoeffding_small),
        (8, "Hoeffding large time", hoeffding_large),
        (9, "drift coupling bound", coupling),
        (10, "Lamperti consistency", lamperti),
        (11, "Phi optimization", phi_optimization),
        (12, "transport cross-check", transport_cross_check),
    ];

    let mut unexpected = Vec::new();
    for (id, name, check) in criteria {
        let start = Instant::now();
        let v = check(&ctx);
        let secs = start.elapsed().as_secs_f64();
        let tag = match (v.passed, KNOWN_UNATTAINABLE.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:>2} {tag:<12} {name:<28} {secs:>7.1}s  {}", v.detail);
        if !v.passed && !KNOWN_UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: no unexpected failures");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures {unexpected:?}");
        ExitCode::FAILURE
    }
}
