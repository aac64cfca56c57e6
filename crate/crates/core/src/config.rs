//! Experiment configuration.
//!
//! A config is a TOML file. Unknown keys anywhere are errors. Every section
//! except `seed` has defaults, so a config only needs to state what it
//! changes. The hash of a config is the SHA-256 of its canonical JSON form
//! (keys sorted, defaults filled in) and is written into every artifact.
//!
//! ```toml
//! seed = 7
//!
//! [fbm]
//! hurst = 0.75
//! horizon = 1.0
//! n_steps = 256
//! n_paths = 100
//!
//! [model]
//! equation = "additive"
//! x0 = [0.0]
//! drift = { kind = "linear", a = -1.0 }
//! diffusion = { kind = "constant", value = 1.0 }
//!
//! [verify]
//! verifiers = ["fernique", "phi-link"]
//!
//! [verify.fernique]
//! n_paths = 2000
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::concentration::Model;
use crate::error::{Error, Result};
use crate::fbm::{Generator, HurstParam};
use crate::sde::{DriftSpec, ScalarDiffusion, TimeDiffusion};
use crate::transport::PathMetric;

fn cfg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Default output directory when `--out` is not given.
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub fbm: FbmSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub calibrate: CalibrateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FbmSection {
    pub hurst: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub dim: usize,
    pub generator: Generator,
}

impl Default for FbmSection {
    fn default() -> Self {
        Self { hurst: 0.75, horizon: 1.0, n_steps: 256, n_paths: 100, dim: 1, generator: Generator::Circulant }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    /// `dX = b(X) dt + σ(t) dB^H`.
    Additive,
    /// `dX = b(X) dt + σ(X) dB^H`, one-dimensional.
    Scalar,
}

/// Named drifts with their declared constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftConfig {
    Zero,
    /// `b(x) = a x`.
    Linear { a: f64 },
    /// `b(x) = amplitude · sin x`.
    Sine { amplitude: f64 },
    /// `b(x) = a x + amplitude · sin x`.
    LinearSine { a: f64, amplitude: f64 },
}

impl DriftConfig {
    pub fn build(&self, dim: usize) -> DriftSpec {
        match *self {
            DriftConfig::Zero => DriftSpec::zero(dim),
            DriftConfig::Linear { a } => DriftSpec::linear(a, dim),
            DriftConfig::Sine { amplitude: c } => {
                DriftSpec::scalar(format!("{c} sin x"), dim, move |x| c * x.sin(), c.abs(), Some(c.abs()), Some(c.abs()))
            }
            DriftConfig::LinearSine { a, amplitude: c } => DriftSpec::scalar(
                format!("{a} x + {c} sin x"),
                dim,
                move |x| a * x + c * x.sin(),
                a.abs() + c.abs(),
                if a == 0.0 { Some(c.abs()) } else { None },
                Some(a + c.abs()),
            ),
        }
    }
}

/// Named diffusion coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionConfig {
    /// `σ = value · I` (additive) or `σ ≡ value` (scalar).
    Constant { value: f64 },
    /// `σ(t) = (base + amplitude · sin 2πt) I`, additive only.
    TimeSine { base: f64, amplitude: f64 },
    /// `σ(x) = base + amplitude · cos x`, scalar only.
    Cosine { base: f64, amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub equation: Equation,
    pub x0: Vec<f64>,
    pub drift: DriftConfig,
    pub diffusion: DiffusionConfig,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            equation: Equation::Additive,
            x0: vec![0.0],
            drift: DriftConfig::Linear { a: -1.0 },
            diffusion: DiffusionConfig::Constant { value: 1.0 },
        }
    }
}

impl ModelSection {
    fn with(equation: Equation, x0: f64, drift: DriftConfig, diffusion: DiffusionConfig) -> Self {
        Self { equation, x0: vec![x0], drift, diffusion }
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn additive_parts(&self) -> Result<(DriftSpec, TimeDiffusion)> {
        if self.equation != Equation::Additive {
            return cfg_err("this experiment needs an additive equation");
        }
        let d = self.dim();
        let sigma = match self.diffusion {
            DiffusionConfig::Constant { value } => {
                TimeDiffusion::constant(ndarray::Array2::from_diag_elem(d, value))
            }
            DiffusionConfig::TimeSine { base, amplitude } => {
                let tau = 2.0 * std::f64::consts::PI;
                TimeDiffusion::new(
                    d,
                    d,
                    move |t| ndarray::Array2::from_diag_elem(d, base + amplitude * (tau * t).sin()),
                    amplitude.abs() * tau * (d as f64).sqrt(),
                    1.0,
                )
            }
            DiffusionConfig::Cosine { .. } => return cfg_err("a state-dependent diffusion needs equation = \"scalar\""),
        };
        Ok((self.drift.build(d), sigma))
    }

    pub fn scalar_parts(&self) -> Result<(DriftSpec, ScalarDiffusion)> {
        if self.equation != Equation::Scalar || self.dim() != 1 {
            return cfg_err("this experiment needs a scalar equation with one-dimensional x0");
        }
        let sigma = match self.diffusion {
            DiffusionConfig::Constant { value } => ScalarDiffusion::constant(value),
            DiffusionConfig::Cosine { base, amplitude } => {
                ScalarDiffusion::new(move |x| base + amplitude * x.cos(), base - amplitude.abs(), base + amplitude.abs(), amplitude.abs())
            }
            DiffusionConfig::TimeSine { .. } => return cfg_err("a time-dependent diffusion needs equation = \"additive\""),
        }
        .map_err(|e| Error::Config(e.to_string()))?;
        Ok((self.drift.build(1), sigma))
    }

    pub fn build(&self) -> Result<Model> {
        if self.x0.is_empty() {
            return cfg_err("x0 must not be empty");
        }
        Ok(match self.equation {
            Equation::Additive => {
                let (drift, sigma) = self.additive_parts()?;
                Model::Additive { x0: self.x0.clone(), drift, sigma }
            }
            Equation::Scalar => {
                let (drift, sigma) = self.scalar_parts()?;
                Model::Scalar { x0: self.x0[0], drift, sigma }
            }
        })
    }
}

/// Verifiers selectable with `--verifier`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifierName {
    Stability,
    EstiInt,
    Fernique,
    Grr,
    HoeffdingSmall,
    HoeffdingLarge,
    T1Moments,
    GaussianTail,
    PhiLink,
    Coupling,
    Lamperti,
}

impl VerifierName {
    pub const ALL: [VerifierName; 11] = [
        VerifierName::Stability,
        VerifierName::EstiInt,
        VerifierName::Fernique,
        VerifierName::Grr,
        VerifierName::HoeffdingSmall,
        VerifierName::HoeffdingLarge,
        VerifierName::T1Moments,
        VerifierName::GaussianTail,
        VerifierName::PhiLink,
        VerifierName::Coupling,
        VerifierName::Lamperti,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VerifierName::Stability => "stability",
            VerifierName::EstiInt => "esti-int",
            VerifierName::Fernique => "fernique",
            VerifierName::Grr => "grr",
            VerifierName::HoeffdingSmall => "hoeffding-small",
            VerifierName::HoeffdingLarge => "hoeffding-large",
            VerifierName::T1Moments => "t1-moments",
            VerifierName::GaussianTail => "gaussian-tail",
            VerifierName::PhiLink => "phi-link",
            VerifierName::Coupling => "coupling",
            VerifierName::Lamperti => "lamperti",
        }
    }
}

impl fmt::Display for VerifierName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VerifierName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s.trim())
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|v| v.as_str()).collect();
                Error::Config(format!("unknown verifier {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub verifiers: Vec<VerifierName>,
    pub confidence: f64,
    pub stability: StabilitySection,
    pub esti_int: EstiIntSection,
    pub fernique: FerniqueSection,
    pub grr: GrrSection,
    pub hoeffding_small: HoeffdingSmallSection,
    pub hoeffding_large: HoeffdingLargeSection,
    pub t1_moments: T1MomentsSection,
    pub gaussian_tail: GaussianTailSection,
    pub phi_link: PhiLinkSection,
    pub coupling: CouplingSection,
    pub lamperti: LampertiSection,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            verifiers: VerifierName::ALL.to_vec(),
            confidence: 0.99,
            stability: Default::default(),
            esti_int: Default::default(),
            fernique: Default::default(),
            grr: Default::default(),
            hoeffding_small: Default::default(),
            hoeffding_large: Default::default(),
            t1_moments: Default::default(),
            gaussian_tail: Default::default(),
            phi_link: Default::default(),
            coupling: Default::default(),
            lamperti: Default::default(),
        }
    }
}

/// Driver sensitivity of the additive equation against the frozen `K̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySection {
    pub hurst: f64,
    pub beta: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_pairs: usize,
    pub model: ModelSection,
    /// Overrides the calibrated fixture.
    pub k_hat: Option<f64>,
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self {
            hurst: 0.75,
            beta: 0.6,
            horizon: 0.5,
            n_steps: 256,
            n_pairs: 1000,
            model: ModelSection::with(
                Equation::Additive,
                0.0,
                DriftConfig::Sine { amplitude: 1.0 },
                DiffusionConfig::Constant { value: 1.0 },
            ),
            k_hat: None,
        }
    }
}

/// Young-integral estimate on random windows against the frozen `κ̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstiIntSection {
    pub hurst: f64,
    pub beta: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_pairs: usize,
    pub kappa_hat: Option<f64>,
}

impl Default for EstiIntSection {
    fn default() -> Self {
        Self { hurst: 0.75, beta: 0.6, horizon: 1.0, n_steps: 512, n_pairs: 1000, kappa_hat: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FerniqueSection {
    pub hurst: f64,
    pub beta: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub generator: Generator,
    pub alpha: Option<f64>,
    pub k_list: Vec<u32>,
}

impl Default for FerniqueSection {
    fn default() -> Self {
        Self {
            hurst: 0.75,
            beta: 0.6,
            horizon: 0.5,
            n_steps: 256,
            n_paths: 20_000,
            generator: Generator::Circulant,
            alpha: None,
            k_list: vec![1, 2, 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrrSection {
    pub hurst: f64,
    pub beta: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub generator: Generator,
    /// Moment order of the `ξ_β` check; must be at least `1/(H - β)`.
    pub p: Option<u32>,
}

impl Default for GrrSection {
    fn default() -> Self {
        Self { hurst: 0.75, beta: 0.6, horizon: 0.5, n_steps: 256, n_paths: 1000, generator: Generator::Circulant, p: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HoeffdingSmallSection {
    pub hurst: f64,
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub beta: f64,
    /// Clip level of the time-averaged `V(x) = clamp(x, -c, c)`.
    pub clip: f64,
    pub k_t1: Option<f64>,
    pub model: ModelSection,
}

impl Default for HoeffdingSmallSection {
    fn default() -> Self {
        Self {
            hurst: 0.75,
            horizon: 0.25,
            dt: 1.0 / 1024.0,
            n_paths: 20_000,
            beta: 0.6,
            clip: 3.0,
            k_t1: None,
            model: ModelSection::with(
                Equation::Scalar,
                0.0,
                DriftConfig::Zero,
                DiffusionConfig::Constant { value: 1.0 },
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HoeffdingLargeSection {
    pub hurst: f64,
    pub horizons: Vec<f64>,
    pub dt: f64,
    pub n_paths: usize,
    pub clip: f64,
    /// Count the `T`-scaling fit in the verdict.
    pub enforce_scaling: bool,
    pub model: ModelSection,
}

impl Default for HoeffdingLargeSection {
    fn default() -> Self {
        Self {
            hurst: 0.75,
            horizons: vec![1.0, 2.0, 4.0],
            dt: 1.0 / 256.0,
            n_paths: 20_000,
            clip: 3.0,
            enforce_scaling: false,
            model: ModelSection::with(
                Equation::Scalar,
                0.0,
                DriftConfig::Linear { a: -1.0 },
                DiffusionConfig::Constant { value: 1.0 },
            ),
        }
    }
}

/// Moment-based T1 constant of the solution law against `transport_constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct T1MomentsSection {
    pub hurst: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_pairs: usize,
    pub k_max: u32,
    pub beta: f64,
    pub k_t1: Option<f64>,
    pub model: ModelSection,
}

impl Default for T1MomentsSection {
    fn default() -> Self {
        Self {
            hurst: 0.75,
            horizon: 0.25,
            n_steps: 256,
            n_pairs: 10_000,
            k_max: 6,
            beta: 0.6,
            k_t1: None,
            model: ModelSection::with(
                Equation::Additive,
                0.0,
                DriftConfig::Zero,
                DiffusionConfig::Constant { value: 1.0 },
            ),
        }
    }
}

/// The link between the moment constant and the exponential moment `C(δ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaussianTailSection {
    pub hurst: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_pairs: usize,
    pub delta: f64,
    pub beta: f64,
    pub k_max: u32,
    pub metric: PathMetric,
    pub model: ModelSection,
}

impl Default for GaussianTailSection {
    fn default() -> Self {
        Self {
            hurst: 0.75,
            horizon: 0.25,
            n_steps: 256,
            n_pairs: 10_000,
            delta: 1.0,
            beta: 0.6,
            k_max: 6,
            metric: PathMetric::DInfinity,
            model: ModelSection::with(
                Equation::Additive,
                0.0,
                DriftConfig::Zero,
                DiffusionConfig::Constant { value: 1.0 },
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhiLinkSection {
    pub c_values: Vec<f64>,
}

impl Default for PhiLinkSection {
    fn default() -> Self {
        Self { c_values: vec![1.0, 2.0, 10.0, 1e6] }
    }
}

/// Drift-coupled pairs against the Gronwall profile and the `d2` bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSection {
    pub hurst: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_seeds: usize,
    /// Value of the constant `ρ`.
    pub rho: f64,
    pub model: ModelSection,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self {
            hurst: 0.75,
            horizon: 1.0,
            n_steps: 256,
            n_seeds: 1000,
            rho: 1.0,
            model: ModelSection::with(
                Equation::Additive,
                0.0,
                DriftConfig::LinearSine { a: -2.0, amplitude: 1.0 },
                DiffusionConfig::Constant { value: 1.0 },
            ),
        }
    }
}

/// Euler against the Lamperti route for a scalar equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LampertiSection {
    pub hurst: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub tolerance: f64,
    pub model: ModelSection,
}

impl Default for LampertiSection {
    fn default() -> Self {
        Self {
            hurst: 0.75,
            horizon: 1.0,
            n_steps: 1024,
            n_paths: 50,
            tolerance: 5e-3,
            model: ModelSection::with(
                Equation::Scalar,
                0.5,
                DriftConfig::Sine { amplitude: -1.0 },
                DiffusionConfig::Cosine { base: 1.0, amplitude: 0.1 },
            ),
        }
    }
}

/// Monte Carlo maximization of the calibrated constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateSection {
    /// `value = max_observed · headroom`.
    pub headroom: f64,
    pub stability_pairs: usize,
    pub esti_int_pairs: usize,
    pub kh_draws: usize,
    pub t1_pairs: usize,
    pub t1_hursts: Vec<f64>,
    pub t1_horizons: Vec<f64>,
    pub t1_steps: usize,
    /// Written into the provenance record; a fixed string keeps the output
    /// reproducible.
    pub date: String,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        Self {
            headroom: 1.25,
            stability_pairs: 1000,
            esti_int_pairs: 1000,
            kh_draws: 100,
            t1_pairs: 10_000,
            t1_hursts: vec![0.6, 0.75, 0.9],
            t1_horizons: vec![0.25, 0.5, 1.0],
            t1_steps: 256,
            date: "unspecified".into(),
        }
    }
}

fn check_hurst(name: &str, h: f64) -> Result<()> {
    HurstParam::new(h).map(|_| ()).map_err(|_| Error::Config(format!("{name}: Hurst index {h} outside (1/2, 1)")))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        cfg_err(format!("{name} must be positive and finite, got {v}"))
    }
}

fn check_count(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        cfg_err(format!("{name} must be at least 1"))
    } else {
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Structural checks. Premises of individual inequalities (such as
    /// `β < H`) are left to the verifiers, which reject them.
    pub fn validate(&self) -> Result<()> {
        check_hurst("fbm.hurst", self.fbm.hurst)?;
        check_positive("fbm.horizon", self.fbm.horizon)?;
        check_count("fbm.n_steps", self.fbm.n_steps)?;
        check_count("fbm.n_paths", self.fbm.n_paths)?;
        check_count("fbm.dim", self.fbm.dim)?;
        if self.model.x0.is_empty() {
            return cfg_err("model.x0 must not be empty");
        }
        let v = &self.verify;
        if !(v.confidence > 0.0 && v.confidence < 1.0) {
            return cfg_err(format!("verify.confidence must lie in (0, 1), got {}", v.confidence));
        }
        for (name, h) in [
            ("verify.stability.hurst", v.stability.hurst),
            ("verify.esti_int.hurst", v.esti_int.hurst),
            ("verify.fernique.hurst", v.fernique.hurst),
            ("verify.grr.hurst", v.grr.hurst),
            ("verify.hoeffding_small.hurst", v.hoeffding_small.hurst),
            ("verify.hoeffding_large.hurst", v.hoeffding_large.hurst),
            ("verify.t1_moments.hurst", v.t1_moments.hurst),
            ("verify.gaussian_tail.hurst", v.gaussian_tail.hurst),
            ("verify.coupling.hurst", v.coupling.hurst),
            ("verify.lamperti.hurst", v.lamperti.hurst),
        ] {
            check_hurst(name, h)?;
        }
        for (name, n) in [
            ("verify.stability.n_pairs", v.stability.n_pairs),
            ("verify.esti_int.n_pairs", v.esti_int.n_pairs),
            ("verify.fernique.n_paths", v.fernique.n_paths),
            ("verify.grr.n_paths", v.grr.n_paths),
            ("verify.hoeffding_small.n_paths", v.hoeffding_small.n_paths),
            ("verify.hoeffding_large.n_paths", v.hoeffding_large.n_paths),
            ("verify.t1_moments.n_pairs", v.t1_moments.n_pairs),
            ("verify.gaussian_tail.n_pairs", v.gaussian_tail.n_pairs),
            ("verify.coupling.n_seeds", v.coupling.n_seeds),
            ("verify.lamperti.n_paths", v.lamperti.n_paths),
        ] {
            check_count(name, n)?;
        }
        if v.hoeffding_large.horizons.is_empty() {
            return cfg_err("verify.hoeffding_large.horizons must not be empty");
        }
        if v.phi_link.c_values.is_empty() {
            return cfg_err("verify.phi_link.c_values must not be empty");
        }
        let c = &self.calibrate;
        if !(c.headroom >= 1.0) {
            return cfg_err(format!("calibrate.headroom must be at least 1, got {}", c.headroom));
        }
        for &h in &c.t1_hursts {
            check_hurst("calibrate.t1_hursts", h)?;
        }
        Ok(())
    }

    /// Canonical JSON: object keys sorted, every default filled in. The
    /// output directory is left out so moving outputs keeps the hash.
    pub fn canonical_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("output_dir");
        }
        serde_json::to_string(&value).expect("JSON value serializes")
    }

    /// Hex SHA-256 of [`ExperimentConfig::canonical_json`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = ExperimentConfig::from_toml("seed = 5").unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.fbm, FbmSection::default());
        assert_eq!(cfg.verify.verifiers.len(), VerifierName::ALL.len());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("seed = 1\nsede = 2").is_err());
        assert!(ExperimentConfig::from_toml("seed = 1\n[fbm]\nhurts = 0.7").is_err());
        assert!(ExperimentConfig::from_toml("seed = 1\n[verify.fernique]\nbetta = 0.6").is_err());
        let bad_drift = "seed = 1\n[model]\nequation = \"additive\"\nx0 = [0.0]\n\
                         drift = { kind = \"linear\", a = -1.0, b = 2.0 }\ndiffusion = { kind = \"constant\", value = 1.0 }";
        assert!(ExperimentConfig::from_toml(bad_drift).is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        assert!(matches!(ExperimentConfig::from_toml("seed = 1\n[fbm]\nhurst = 0.4"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml("seed = 1\n[verify]\nconfidence = 1.5"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml("seed = 1\n[verify]\nverifiers = [\"nope\"]"), Err(Error::Config(_))));
    }

    #[test]
    fn premise_violations_pass_validation() {
        // β > H is for the verifier to reject.
        let cfg = ExperimentConfig::from_toml("seed = 1\n[verify.fernique]\nbeta = 0.8").unwrap();
        assert_eq!(cfg.verify.fernique.beta, 0.8);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::from_toml("seed = 1\n[fbm]\nhurst = 0.7").unwrap();
        let b = ExperimentConfig::from_toml("# comment\nseed   = 1\n\n[fbm]\nhurst = 0.70").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = ExperimentConfig::from_toml("seed = 2\n[fbm]\nhurst = 0.7").unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn verifier_names_round_trip() {
        for v in VerifierName::ALL {
            assert_eq!(v.as_str().parse::<VerifierName>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(json, format!("\"{}\"", v.as_str()));
        }
    }

    #[test]
    fn models_build() {
        let cfg = ExperimentConfig::from_toml("seed = 1").unwrap();
        assert!(matches!(cfg.verify.lamperti.model.build().unwrap(), Model::Scalar { .. }));
        assert!(matches!(cfg.verify.coupling.model.build().unwrap(), Model::Additive { .. }));
        let (drift, _) = cfg.verify.coupling.model.additive_parts().unwrap();
        assert_eq!(drift.one_sided, Some(-1.0));
        assert_eq!(drift.lipschitz, 3.0);
        assert!(cfg.verify.lamperti.model.additive_parts().is_err());
        let (_, sigma) = cfg.verify.lamperti.model.scalar_parts().unwrap();
        assert!((sigma.sigma1 - 0.9).abs() < 1e-15 && (sigma.sigma2 - 1.1).abs() < 1e-15);
    }
}
