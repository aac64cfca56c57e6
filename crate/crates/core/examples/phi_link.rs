//! The function linking the exponential moment constant C(δ) to a T1
//! constant, and its maximizer.
//!
//! cargo run --example phi_link

use fbmlab::concentration::{phi_argmax, phi_h, phi_link};

fn main() -> fbmlab::Result<()> {
    for c in [1.0, 2.0, 10.0, 1e6] {
        println!("C(δ) = {c:>9}: argmax {:.12}, Φ(1) = {:.6}, h(1) = {:+.4}", phi_argmax(c)?, phi_link(1.0, c)?, phi_h(1.0, c)?);
        let row: Vec<String> = [1.0, 1.5, 2.0, 4.0, 8.0].iter().map(|&x| format!("{:.4}", phi_link(x, c).unwrap())).collect();
        println!("    Φ at 1, 1.5, 2, 4, 8: {}", row.join("  "));
    }
    Ok(())
}
