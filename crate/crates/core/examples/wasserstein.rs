//! Empirical Wasserstein distances between fBm ensembles with different
//! Hurst indices, in the sup metric and the L² metric on paths.
//!
//! cargo run --example wasserstein

use fbmlab::fbm::{CirculantSampler, FbmSampler, HurstParam, TimeGrid};
use fbmlab::transport::{wasserstein_empirical, PathEnsemble, PathMetric};

fn ensemble(grid: &TimeGrid, h: f64, seed: u64, n: u64) -> fbmlab::Result<PathEnsemble> {
    let s = CirculantSampler::new(grid, HurstParam::new(h)?)?;
    let paths = (0..n).map(|i| s.sample(1, seed, i).map(|p| p.values)).collect::<fbmlab::Result<Vec<_>>>()?;
    PathEnsemble::new(grid.clone(), paths, (0..n).collect(), "")
}

fn main() -> fbmlab::Result<()> {
    let grid = TimeGrid::new(1.0, 128)?;
    let base = ensemble(&grid, 0.7, 1, 200)?;
    for h in [0.7, 0.8, 0.9] {
        let other = ensemble(&grid, h, 2, 200)?;
        let w1 = wasserstein_empirical(&base, &other, 1, PathMetric::DInfinity)?;
        let w2 = wasserstein_empirical(&base, &other, 2, PathMetric::DTwo)?;
        println!("H = 0.7 vs {h}: W1(d∞) = {:.4}, W2(d2) = {:.4}  [{:?}]", w1.value, w2.value, w2.solver);
    }
    Ok(())
}
