//! Draws fBm paths with the three generators and compares the empirical
//! variance of `B_T` with `T^{2H}`. Writes one path as CSV to stdout.
//!
//! cargo run --example sample_fbm

use fbmlab::fbm::{io, CholeskySampler, CirculantSampler, FbmSampler, HurstParam, TimeGrid, TransferSampler};

fn main() -> fbmlab::Result<()> {
    let grid = TimeGrid::new(2.0, 128)?;
    let h = HurstParam::new(0.7)?;
    let samplers: Vec<Box<dyn FbmSampler>> = vec![
        Box::new(CholeskySampler::new(&grid, h)?),
        Box::new(CirculantSampler::new(&grid, h)?),
        Box::new(TransferSampler::new(&grid, h)?),
    ];
    let n_paths = 4000;
    for s in &samplers {
        let var = (0..n_paths)
            .map(|i| s.sample(1, 42, i).map(|p| p.values[(grid.n_steps(), 0)].powi(2)))
            .sum::<fbmlab::Result<f64>>()?
            / n_paths as f64;
        println!("{:?}: Var B_T = {var:.4} (exact {:.4})", s.generator(), 2f64.powf(1.4));
    }
    let path = samplers[1].sample(1, 42, 0)?;
    io::write_csv(&grid, &path.values, std::io::stdout().lock())
}
