//! Empirical tails of the time average of a scalar solution against the
//! small-time Hoeffding bounds, with Clopper–Pearson upper limits.
//!
//! cargo run --release --example hoeffding

use fbmlab::concentration::{verify_hoeffding_small_time, HoeffdingSetup, LipschitzFunctional, Model, DEFAULT_LEVELS};
use fbmlab::fbm::{Generator, HurstParam};
use fbmlab::sde::{DriftSpec, ScalarDiffusion};

fn main() -> fbmlab::Result<()> {
    let setup = HoeffdingSetup {
        hurst: HurstParam::new(0.75)?,
        model: Model::Scalar { x0: 0.0, drift: DriftSpec::zero(1), sigma: ScalarDiffusion::constant(1.0)? },
        functional: LipschitzFunctional::clipped_identity(3.0),
        dt: 1.0 / 512.0,
        n_paths: 4000,
        generator: Generator::Circulant,
        seed: 5,
        beta: 0.6,
        k_t1: None,
        confidence: 0.99,
        levels: DEFAULT_LEVELS.to_vec(),
        config_hash: String::new(),
    };
    for r in verify_hoeffding_small_time(&setup, 0.25)? {
        println!(
            "{} (C = {:.4}): min margin {:.4}, passed {}",
            r.bound_name,
            r.t1_constant.unwrap_or(f64::NAN),
            r.min_margin(),
            r.all_passed()
        );
    }
    Ok(())
}
