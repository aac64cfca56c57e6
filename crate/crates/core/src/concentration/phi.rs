use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};

/// Digamma function `Ψ = (ln Γ)'`.
pub fn digamma(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}

fn check(x: f64, c_delta: f64) -> Result<()> {
    if !(c_delta >= 1.0 && c_delta.is_finite()) {
        return domain(format!("C(delta) must be a finite value >= 1, got {c_delta}"));
    }
    if !(x >= 1.0 && x.is_finite()) {
        return domain(format!("x must be >= 1, got {x}"));
    }
    Ok(())
}

fn ln_ratio(x: f64, c_delta: f64) -> f64 {
    c_delta.ln() + 2.0 * ln_gamma(x + 1.0) - ln_gamma(2.0 * x + 1.0)
}

/// `Φ(x) = exp((1/x) ln(C(δ) Γ(x+1)² / Γ(2x+1)))`.
pub fn phi_link(x: f64, c_delta: f64) -> Result<f64> {
    check(x, c_delta)?;
    Ok((ln_ratio(x, c_delta) / x).exp())
}

/// `h(x) = -ln(C(δ) Γ(x+1)²/Γ(2x+1)) + 2x (Ψ(x+1) - Ψ(2x+1))`, which has
/// the sign of `Φ'(x)`.
pub fn phi_h(x: f64, c_delta: f64) -> Result<f64> {
    check(x, c_delta)?;
    Ok(-ln_ratio(x, c_delta) + 2.0 * x * (digamma(x + 1.0) - digamma(2.0 * x + 1.0)))
}

const SEARCH_HI: f64 = 64.0;

/// Maximizer of `Φ` on `[1, 64]`.
///
/// When `h ≤ 0` on a logarithmic grid the search is a golden-section
/// search for the maximum of a unimodal function; the bracket collapses to
/// the left end. Otherwise a grid scan picks the bracket first.
pub fn phi_argmax(c_delta: f64) -> Result<f64> {
    check(1.0, c_delta)?;
    let f = |x: f64| ln_ratio(x, c_delta) / x;
    let grid: Vec<f64> = (0..=240).map(|i| SEARCH_HI.powf(i as f64 / 240.0)).collect();
    let monotone = grid.iter().all(|&x| phi_h(x, c_delta).map(|h| h <= 0.0).unwrap_or(false));
    let (mut a, mut b) = if monotone {
        (1.0, SEARCH_HI)
    } else {
        let i = (0..grid.len()).max_by(|&i, &j| f(grid[i]).total_cmp(&f(grid[j]))).expect("non-empty grid");
        (grid[i.saturating_sub(1)], grid[(i + 1).min(grid.len() - 1)])
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-13 * b.max(1.0) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    // The maximum may sit on the bracket's end points.
    let candidates = [a, 0.5 * (a + b), b];
    Ok(candidates.into_iter().max_by(|x, y| f(*x).total_cmp(&f(*y))).expect("three candidates"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn digamma_unit_step() {
        assert!((digamma(2.0) - digamma(3.0) + 0.5).abs() < 1e-12);
        // Ψ(1) = -γ.
        assert_relative_eq!(digamma(1.0), -0.577_215_664_901_532_9, max_relative = 1e-13);
    }

    #[test]
    fn phi_at_one_is_half_c() {
        for c in [1.0, 2.0, 10.0, 1e6] {
            assert_relative_eq!(phi_link(1.0, c).unwrap(), c / 2.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn argmax_is_one() {
        for c in [1.0, 2.0, 10.0, 1e6] {
            let x = phi_argmax(c).unwrap();
            assert!((x - 1.0).abs() < 1e-9, "c = {c}: argmax {x}");
        }
    }

    #[test]
    fn h_at_one_closed_form() {
        for c in [1.0, 2.0, 7.5] {
            assert_relative_eq!(phi_h(1.0, c).unwrap(), -(c / 2.0).ln() - 1.0, epsilon = 1e-13);
        }
        // h(1) < 0 exactly when C > 2/e.
        assert!(phi_h(1.0, 1.0).unwrap() < 0.0);
    }

    #[test]
    fn h_negative_on_log_grid() {
        for c in [1.0, 2.0 * std::f64::consts::E, 10.0, 1e6] {
            for i in 0..=100 {
                let x = 1000f64.powf(i as f64 / 100.0);
                assert!(phi_h(x, c).unwrap() < 0.0, "c = {c}, x = {x}");
            }
        }
    }

    #[test]
    fn phi_decreasing() {
        for c in [1.0, 3.0, 1e4] {
            let mut prev = f64::INFINITY;
            for i in 0..200 {
                let v = phi_link(1.0 + i as f64 * 0.25, c).unwrap();
                assert!(v < prev);
                prev = v;
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(phi_link(1.0, 0.5).is_err());
        assert!(phi_argmax(0.99).is_err());
        assert!(phi_h(0.5, 2.0).is_err());
    }
}
