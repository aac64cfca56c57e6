//! Monte Carlo Hölder-norm moments of fBm against the Fernique-type bounds,
//! and the premise guard for β ≥ H.
//!
//! cargo run --release --example fernique_moments

use fbmlab::concentration::{verify_fernique, FerniqueSetup};

fn main() -> fbmlab::Result<()> {
    let setup = FerniqueSetup { n_paths: 4000, ..FerniqueSetup::default() };
    let report = verify_fernique(&setup)?;
    for m in &report.moments {
        println!("k = {}: E‖B‖^2k ≤ {:.4} (99% upper), bound {:.1}", m.k, m.upper, m.bound);
    }
    if let Some(e) = &report.exp_moment {
        println!("exp moment at α = {:.2e}: {:.4} (bound {:.4})", e.alpha, e.upper, e.bound);
    }
    let rejected = verify_fernique(&FerniqueSetup { beta: 0.8, ..setup });
    println!("β = 0.8: {}", rejected.err().map(|e| e.to_string()).unwrap_or_else(|| "accepted?".into()));
    Ok(())
}
