//! Kernel values against high-precision quadrature references.

use fbmlab::fbm::{c_h, kernel_kh, kernel_kh_partial, HurstParam};
use fbmlab::quad::{integrate, QuadOptions};

fn h(v: f64) -> HurstParam {
    HurstParam::new(v).unwrap()
}

// Reference values at 40 digits. K_H uses the closed form
// c_H (t - s)^a / a · ₂F₁(-a, a; a + 1; -(t - s)/s) with a = H - 1/2.
#[test]
fn pinned_kernel_values() {
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    assert!(rel(c_h(h(0.75)), 0.267_411_158_757_997_6) < 1e-14);
    let k = kernel_kh(1.0, 0.25, h(0.75)).unwrap();
    assert!(rel(k, 1.098_281_580_157_165_5) < 1e-10, "{k}");
    assert!(rel(kernel_kh_partial(1.0, 0.5, h(0.75)).unwrap(), 0.534_822_317_515_995_2) < 1e-13);
}

#[test]
fn kernel_isometry() {
    // ∫_0^t K_H(t, s)² ds = t^{2H}.
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
    for (t, hv) in cases {
        // s = v^{1/(2-2H)} absorbs the s^{1-2H} singularity of K² at 0.
        let p = 1.0 / (2.0 - 2.0 * hv);
        let integrand = |v: f64| {
            let s = v.powf(p);
            kernel_kh(t, s, h(hv)).unwrap().powi(2) * p * v.powf(p - 1.0)
        };
        let q = integrate(integrand, 0.0, t.powf(1.0 / p), QuadOptions::rel(1e-10)).unwrap();
        let expect = t.powf(2.0 * hv);
        assert!((q.value - expect).abs() <= 1e-6 * expect, "t = {t}, H = {hv}: {} vs {expect}", q.value);
    }
}
