use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Which transportation inequality a constant belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantTag {
    /// `T1(K ‖σ‖_β T^{2H})` for the additive equation under `d_∞`.
    T1Additive,
    /// `T1(K σ2² T^{2H})` for the scalar equation under `d_∞`.
    T1Scalar,
    T2AdditiveDinf,
    T2AdditiveD2,
    T2ScalarDinf,
    T2ScalarD2,
}

/// Inputs to [`transport_constant`]. Fields not used by a given tag are
/// ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportParams {
    /// Hurst index; `1/2` is accepted to recover the Brownian constants.
    pub hurst: f64,
    pub horizon: f64,
    /// `‖σ‖_β` (additive T1).
    pub sigma_holder: f64,
    /// `‖σ‖_{0,T,∞}` (additive T2).
    pub sigma_sup: f64,
    pub lipschitz_b: f64,
    /// `sup |b|` (scalar T1).
    pub bound_b: f64,
    pub lipschitz_sigma: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    /// One-sided constant `B` (T2).
    pub one_sided: f64,
    /// Multiplier `K` of the T1 constants; `None` takes the calibrated fixture.
    pub k: Option<f64>,
}

impl Default for TransportParams {
    fn default() -> Self {
        Self {
            hurst: 0.75,
            horizon: 1.0,
            sigma_holder: 1.0,
            sigma_sup: 1.0,
            lipschitz_b: 0.0,
            bound_b: 0.0,
            lipschitz_sigma: 0.0,
            sigma1: 1.0,
            sigma2: 1.0,
            one_sided: -1.0,
            k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportConstants {
    pub tag: ConstantTag,
    pub value: f64,
    /// Whether the horizon and sign conditions of the inequality hold.
    pub valid: bool,
    pub validity: String,
    /// Set when the value rests on the calibrated `K` rather than a
    /// closed form.
    pub calibrated_k: Option<f64>,
}

/// `c_{B,T} = (e^{3BT} - 1)/3` for `B > 0`, `1 - e^{BT}` for `B < 0`.
pub fn c_bt(b: f64, t: f64) -> Result<f64> {
    if b > 0.0 {
        Ok((3.0 * b * t).exp_m1() / 3.0)
    } else if b < 0.0 {
        Ok(-(b * t).exp_m1())
    } else {
        domain("c_(B,T) is undefined for B = 0")
    }
}

pub fn transport_constant(tag: ConstantTag, p: &TransportParams) -> Result<TransportConstants> {
    let h = p.hurst;
    let t = p.horizon;
    if !(0.5..1.0).contains(&h) {
        return domain(format!("Hurst index must lie in [1/2, 1), got {h}"));
    }
    if !(t > 0.0) {
        return domain(format!("horizon must be positive, got {t}"));
    }
    let k = p.k.unwrap_or_else(|| crate::fixtures::calibration().k_hat_t1.value);
    let pre = h * t.powf(2.0 * h - 1.0);
    let needs_b = |b: f64| if b == 0.0 { domain::<()>("T2 constants divide by B; B = 0 is excluded") } else { Ok(()) };
    let (value, valid, validity, calibrated_k) = match tag {
        ConstantTag::T1Additive => {
            let delta = if p.lipschitz_b > 0.0 { (0.5 / p.lipschitz_b).min(1.0) } else { 1.0 };
            (k * p.sigma_holder * t.powf(2.0 * h), t <= delta, format!("T <= (2 L_b)^-1 ∧ 1 = {delta}"), Some(k))
        }
        ConstantTag::T1Scalar => {
            let denom = 2.0 * p.sigma2 * (p.lipschitz_b * p.sigma2 + p.lipschitz_sigma * p.bound_b);
            let lim = if denom > 0.0 { (p.sigma1 * p.sigma1 / denom).min(1.0) } else { 1.0 };
            let ok = t <= lim && p.sigma1 > 0.0 && p.sigma2 >= p.sigma1;
            (k * p.sigma2 * p.sigma2 * t.powf(2.0 * h), ok, format!("T <= 1 ∧ sigma1²/(2 sigma2 (L_b sigma2 + L_sigma B)) = {lim}"), Some(k))
        }
        ConstantTag::T2AdditiveDinf => {
            needs_b(p.one_sided)?;
            let b = p.one_sided;
            let v = 2.0 / b.abs() * pre * ((2.0 * b + b.abs()) * t).exp().max(1.0) * p.sigma_sup.powi(2);
            (v, true, "B != 0".to_string(), None)
        }
        ConstantTag::T2AdditiveD2 => {
            needs_b(p.one_sided)?;
            let b = p.one_sided;
            (2.0 / (b * b) * pre * p.sigma_sup.powi(2) * c_bt(b, t)?, true, "B != 0".to_string(), None)
        }
        ConstantTag::T2ScalarDinf => {
            needs_b(p.one_sided)?;
            let b = p.one_sided;
            let v = 2.0 * p.sigma1 * p.sigma2.powi(2) / b.abs() * pre * ((2.0 * b + b.abs()) * t / p.sigma1).exp().max(1.0);
            (v, p.sigma1 > 0.0, "B != 0, sigma1 > 0".to_string(), None)
        }
        ConstantTag::T2ScalarD2 => {
            needs_b(p.one_sided)?;
            let b = p.one_sided;
            let v = 2.0 * (p.sigma1 * p.sigma2).powi(2) / (b * b) * pre * c_bt(b / p.sigma1, t)?;
            (v, p.sigma1 > 0.0, "B != 0, sigma1 > 0".to_string(), None)
        }
    };
    Ok(TransportConstants { tag, value, valid, validity, calibrated_k })
}
