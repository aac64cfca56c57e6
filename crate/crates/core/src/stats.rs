//! Small statistical helpers shared by the verifiers.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::{beta_reg, inv_beta_reg};

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Upper quantile of the standard normal, `P(Z <= z) = level`.
pub fn normal_quantile(level: f64) -> f64 {
    Normal::standard().inverse_cdf(level)
}

/// One-sided Clopper–Pearson upper confidence bound for a binomial
/// proportion with `successes` out of `trials` at the given confidence.
pub fn clopper_pearson_upper(successes: usize, trials: usize, confidence: f64) -> f64 {
    assert!(trials > 0 && successes <= trials);
    assert!(confidence > 0.0 && confidence < 1.0);
    if successes == trials {
        return 1.0;
    }
    let alpha = 1.0 - confidence;
    if successes == 0 {
        return 1.0 - alpha.powf(1.0 / trials as f64);
    }
    // Upper bound p solves P(Bin(n, p) <= k) = alpha, i.e. I_p(k+1, n-k) = 1 - alpha.
    let a = successes as f64 + 1.0;
    let b = (trials - successes) as f64;
    let mut p = inv_beta_reg(a, b, confidence);
    // Polish with bisection on the regularized incomplete beta; the series
    // inversion can be loose for very unbalanced shape parameters.
    let target = confidence;
    let (mut lo, mut hi) = ((p - 1e-3).max(0.0), (p + 1e-3).min(1.0));
    if !(beta_reg(a, b, lo) <= target && beta_reg(a, b, hi) >= target) {
        lo = 0.0;
        hi = 1.0;
    }
    for _ in 0..200 {
        p = 0.5 * (lo + hi);
        if beta_reg(a, b, p) < target {
            lo = p;
        } else {
            hi = p;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    hi
}

/// Leave-one-out jackknife standard error of a statistic.
pub fn jackknife_se<F: Fn(&[f64]) -> f64>(xs: &[f64], stat: F) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let mut buf = Vec::with_capacity(n - 1);
    let leave_out: Vec<f64> = (0..n)
        .map(|i| {
            buf.clear();
            buf.extend(xs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x));
            stat(&buf)
        })
        .collect();
    let mean = leave_out.iter().sum::<f64>() / n as f64;
    let ss: f64 = leave_out.iter().map(|v| (v - mean).powi(2)).sum();
    ((n as f64 - 1.0) / n as f64 * ss).sqrt()
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    (d, kolmogorov_survival(lambda))
}

fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], level: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = level.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Least-squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Binomial, DiscreteCDF};

    #[test]
    fn clopper_pearson_inverts_binomial_cdf() {
        for &(k, n) in &[(0usize, 50usize), (3, 50), (20, 20_000), (1_000, 20_000), (49, 50)] {
            let p = clopper_pearson_upper(k, n, 0.99);
            let cdf = Binomial::new(p, n as u64).unwrap().cdf(k as u64);
            assert!((cdf - 0.01).abs() < 1e-6, "k={k} n={n} p={p} cdf={cdf}");
        }
        assert_eq!(clopper_pearson_upper(5, 5, 0.99), 1.0);
    }

    #[test]
    fn jackknife_of_mean_matches_standard_error() {
        let xs: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64).collect();
        let (_, se) = mean_and_se(&xs);
        let jk = jackknife_se(&xs, |s| s.iter().sum::<f64>() / s.len() as f64);
        assert!((se - jk).abs() < 1e-12);
    }

    #[test]
    fn ks_identical_samples() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let (d, p) = ks_two_sample(&a, &a);
        assert_eq!(d, 0.0);
        assert!(p > 0.99);
    }

    #[test]
    fn ks_shifted_samples_rejected() {
        let a: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.3).collect();
        let (d, p) = ks_two_sample(&a, &b);
        assert!((d - 0.3).abs() < 0.01);
        assert!(p < 1e-6);
    }
}
