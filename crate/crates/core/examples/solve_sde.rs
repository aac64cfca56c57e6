//! Solves a scalar SDE with state-dependent diffusion directly and through
//! the Lamperti transform, along the same fBm driver.
//!
//! cargo run --example solve_sde

use fbmlab::fbm::{sample_fbm_circulant, HurstParam, TimeGrid};
use fbmlab::sde::{solve_scalar, solve_scalar_via_lamperti, Driver, DriftSpec, ScalarDiffusion};

fn main() -> fbmlab::Result<()> {
    let grid = TimeGrid::new(1.0, 1024)?;
    let driver = Driver::from_path(&sample_fbm_circulant(&grid, HurstParam::new(0.75)?, 1, 2024)?);
    let drift = DriftSpec::scalar("-sin", 1, |x| -x.sin(), 1.0, Some(1.0), None);
    let sigma = ScalarDiffusion::new(|x| 1.0 + 0.1 * x.cos(), 0.9, 1.1, 0.1)?;

    let direct = solve_scalar(0.5, &drift, &sigma, &driver)?;
    let lamperti = solve_scalar_via_lamperti(0.5, &drift, &sigma, &driver)?;
    let sup = direct.values.iter().zip(lamperti.values.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    for k in (0..=1024).step_by(128) {
        println!("t = {:.3}  direct {:+.5}  lamperti {:+.5}", grid.points()[k], direct.values[(k, 0)], lamperti.values[(k, 0)]);
    }
    println!("sup distance {sup:.2e}");
    Ok(())
}
