//! The fractional-derivative form of a Young integral against the
//! Riemann–Stieltjes sum, first for smooth data then for two fBm paths.
//!
//! cargo run --example young_integral

use fbmlab::fbm::{CirculantSampler, FbmSampler, HurstParam, TimeGrid};
use fbmlab::frac::{young_integral_frac, young_integral_rs, FracOrder, GridFunction};

fn main() -> fbmlab::Result<()> {
    let grid = TimeGrid::new(1.0, 2048)?;
    let f = GridFunction::from_fn(&grid, |t| t.cos())?;
    let g = GridFunction::from_fn(&grid, |t| t * t)?;
    let exact = 2.0 * (1f64.sin() + 1f64.cos() - 1.0);
    let frac = young_integral_frac(&f, &g, FracOrder::new(0.3)?, 0.0, 1.0)?;
    println!("∫ cos t d(t²): frac {:.8}, RS {:.8}, exact {exact:.8}", frac.value, young_integral_rs(&f, &g, 0.0, 1.0)?);

    let sampler = CirculantSampler::new(&grid, HurstParam::new(0.75)?)?;
    let p = sampler.sample(2, 9, 0)?;
    let b1 = GridFunction::new(grid.clone(), p.values.column(0).to_vec())?;
    let b2 = GridFunction::new(grid.clone(), p.values.column(1).to_vec())?;
    let frac = young_integral_frac(&b1, &b2, FracOrder::new(0.5)?, 0.0, 1.0)?;
    println!(
        "∫ B¹ dB²: frac {:.6}, RS {:.6}, Hölder exponents ≈ {:.2} / {:.2}",
        frac.value,
        young_integral_rs(&b1, &b2, 0.0, 1.0)?,
        frac.exponent_f,
        frac.exponent_g
    );
    for w in &frac.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
