//! Commands behind the `fbmlab` binary.
//!
//! Every command takes an [`ExperimentConfig`] and an output directory and
//! writes JSON reports, CSV tables and binary paths. Each file carries the
//! config hash and the seed. Work is spread over a rayon pool, but every
//! random draw is addressed by `(seed, path index)` and every merge keeps
//! index order, so the number of threads never changes a reported number.

mod calibrate;
mod verifiers;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, VerifierName};
use crate::error::{Error, Result};
use crate::fbm::{io, FbmPath, GridSpec, HurstParam, TimeGrid};
use crate::sde::Driver;

pub use calibrate::cmd_calibrate;
pub use verifiers::run_verifier;

/// Exit status of a command.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const VERIFICATION_FAILURE: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const NUMERICAL_ERROR: i32 = 3;
}

/// Exit code for an error that aborted a command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numerical { .. } | Error::BlowUp { .. } => exit::NUMERICAL_ERROR,
        Error::Config(_) | Error::Io(_) | Error::Domain(_) => exit::CONFIG_ERROR,
    }
}

/// Machine-readable form of an error, printed by the binary on failure.
pub fn diagnostic(err: &Error) -> Value {
    let kind = match err {
        Error::Domain(_) => "domain",
        Error::Numerical { .. } => "numerical",
        Error::BlowUp { .. } => "blow_up",
        Error::Config(_) => "config",
        Error::Io(_) => "io",
    };
    serde_json::json!({ "error": kind, "message": err.to_string(), "exit_code": exit_code(err) })
}

/// A loaded config together with its hash and where outputs go.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: ExperimentConfig,
    pub hash: String,
    pub out: PathBuf,
}

impl Run {
    /// Applies command-line overrides and fixes the hash of the effective
    /// config.
    pub fn new(
        mut config: ExperimentConfig,
        seed: Option<u64>,
        out: Option<PathBuf>,
        verifiers: Option<Vec<VerifierName>>,
    ) -> Result<Self> {
        if let Some(s) = seed {
            config.seed = s;
        }
        if let Some(v) = verifiers {
            config.verify.verifiers = v;
        }
        config.validate()?;
        let out = out
            .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let hash = config.hash();
        Ok(Self { config, hash, out })
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    fn dir(&self, sub: &str) -> Result<PathBuf> {
        let d = self.out.join(sub);
        fs::create_dir_all(&d)?;
        Ok(d)
    }

    /// `# <title> config_hash=<hash> seed=<seed>`.
    pub fn comment(&self, title: &str) -> String {
        format!("# {title} config_hash={} seed={}", self.hash, self.seed())
    }
}

/// Seed of one experiment, derived from the run seed and a label so that
/// experiments of one run use independent streams.
pub fn sub_seed(seed: u64, label: &str) -> u64 {
    let digest = Sha256::digest(format!("{label}:{seed}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// CSV with a comment line, a header and rows of numbers.
pub(crate) fn write_table(path: &Path, comment: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{comment}")?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `f` on a pool of `jobs` threads, or on the global pool.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Manifest {
    command: &'static str,
    config_hash: String,
    seed: u64,
    hurst: f64,
    grid: GridSpec,
    generator: crate::fbm::Generator,
    n_paths: usize,
    dim: usize,
    files: Vec<String>,
    summary: BTreeMap<String, f64>,
}

fn sample_paths(run: &Run) -> Result<(TimeGrid, Vec<FbmPath>)> {
    let f = &run.config.fbm;
    let grid = TimeGrid::new(f.horizon, f.n_steps)?;
    let sampler = f.generator.sampler(&grid, HurstParam::new(f.hurst)?)?;
    let paths = (0..f.n_paths as u64)
        .into_par_iter()
        .map(|i| sampler.sample(f.dim, run.seed(), i))
        .collect::<Result<Vec<_>>>()?;
    Ok((grid, paths))
}

fn write_path_files(run: &Run, dir: &Path, stem: &str, path: &FbmPath, files: &mut Vec<String>) -> Result<()> {
    let bin = format!("{stem}.fbmp");
    io::write_binary(path, File::create(dir.join(&bin))?)?;
    let csv = format!("{stem}.csv");
    let mut w = BufWriter::new(File::create(dir.join(&csv))?);
    writeln!(w, "{} path_index={}", run.comment("fbm"), path.path_index)?;
    io::write_csv(&path.grid, &path.values, &mut w)?;
    files.push(bin);
    files.push(csv);
    Ok(())
}

/// Samples `fbm.n_paths` fBm paths and writes each as binary and CSV, plus
/// `manifest.json`.
pub fn cmd_sample(run: &Run) -> Result<i32> {
    let (grid, paths) = sample_paths(run)?;
    let dir = run.dir("paths")?;
    let mut files = Vec::new();
    for p in &paths {
        write_path_files(run, &dir, &format!("path_{:05}", p.path_index), p, &mut files)?;
    }
    let terminal: Vec<f64> = paths.iter().map(|p| p.values[(grid.n_steps(), 0)]).collect();
    let (mean, se) = crate::stats::mean_and_se(&terminal);
    let f = &run.config.fbm;
    let manifest = Manifest {
        command: "sample",
        config_hash: run.hash.clone(),
        seed: run.seed(),
        hurst: f.hurst,
        grid: grid.clone().into(),
        generator: f.generator,
        n_paths: paths.len(),
        dim: f.dim,
        files,
        summary: BTreeMap::from([
            ("terminal_mean".into(), mean),
            ("terminal_se".into(), se),
            ("terminal_var_expected".into(), f.horizon.powf(2.0 * f.hurst)),
        ]),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(exit::PASS)
}

/// Solves the configured model along `fbm.n_paths` fBm drivers and writes
/// each solution as CSV, plus `manifest.json`.
pub fn cmd_solve(run: &Run) -> Result<i32> {
    let model = run.config.model.build()?;
    if model.noise_dim() != run.config.fbm.dim {
        return Err(Error::Config(format!(
            "fbm.dim = {} but the model needs {} noise components",
            run.config.fbm.dim,
            model.noise_dim()
        )));
    }
    let (grid, paths) = sample_paths(run)?;
    let solutions = paths
        .par_iter()
        .map(|p| model.solve(&Driver::from_path(p)))
        .collect::<Result<Vec<_>>>()?;
    let dir = run.dir("solutions")?;
    let mut files = Vec::new();
    for (p, s) in paths.iter().zip(&solutions) {
        let name = format!("solution_{:05}.csv", p.path_index);
        let mut w = BufWriter::new(File::create(dir.join(&name))?);
        writeln!(w, "{} path_index={}", run.comment("solution"), p.path_index)?;
        io::write_csv(&grid, &s.values, &mut w)?;
        files.push(name);
    }
    let terminal: Vec<f64> = solutions.iter().map(|s| s.values[(grid.n_steps(), 0)]).collect();
    let (mean, se) = crate::stats::mean_and_se(&terminal);
    let f = &run.config.fbm;
    let manifest = Manifest {
        command: "solve",
        config_hash: run.hash.clone(),
        seed: run.seed(),
        hurst: f.hurst,
        grid: grid.into(),
        generator: f.generator,
        n_paths: solutions.len(),
        dim: f.dim,
        files,
        summary: BTreeMap::from([("terminal_mean".into(), mean), ("terminal_se".into(), se)]),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(exit::PASS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    Failed,
    /// The verifier refused its inputs because a premise of the inequality
    /// does not hold.
    Rejected,
    NumericalError,
}

/// Result of one verifier.
#[derive(Debug, Clone, Serialize)]
pub struct VerifierOutcome {
    pub name: VerifierName,
    pub status: Status,
    pub seed: u64,
    pub message: Option<String>,
    /// Headline numbers.
    pub summary: BTreeMap<String, Value>,
    pub detail: Value,
}

impl VerifierOutcome {
    pub fn passed(&self) -> bool {
        self.status == Status::Passed
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub config_hash: String,
    pub seed: u64,
    pub passed: bool,
    pub exit_code: i32,
    pub verifiers: Vec<VerifierOutcome>,
}

/// Runs the selected verifiers in order, writes `verify/report.json` and
/// the CSV tables, and returns the exit code.
pub fn cmd_verify(run: &Run) -> Result<(i32, VerifyReport)> {
    let dir = run.dir("verify")?;
    let mut outcomes = Vec::new();
    for &name in &run.config.verify.verifiers {
        log::info!("running verifier {name}");
        let outcome = run_verifier(run, name, &dir)?;
        log::info!("{name}: {:?}", outcome.status);
        outcomes.push(outcome);
    }
    let code = if outcomes.iter().any(|o| o.status == Status::NumericalError) {
        exit::NUMERICAL_ERROR
    } else if outcomes.iter().all(VerifierOutcome::passed) {
        exit::PASS
    } else {
        exit::VERIFICATION_FAILURE
    };
    let report = VerifyReport {
        config_hash: run.hash.clone(),
        seed: run.seed(),
        passed: code == exit::PASS,
        exit_code: code,
        verifiers: outcomes,
    };
    write_json(&dir.join("report.json"), &report)?;
    Ok((code, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_in(dir: &Path, toml: &str) -> Run {
        Run::new(ExperimentConfig::from_toml(toml).unwrap(), None, Some(dir.to_path_buf()), None).unwrap()
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::BlowUp { step: 3 }), 3);
        assert_eq!(exit_code(&Error::Numerical { msg: "x".into(), achieved: 1.0 }), 3);
        assert_eq!(diagnostic(&Error::Config("x".into()))["exit_code"], 2);
    }

    #[test]
    fn sub_seeds_differ_by_label() {
        assert_ne!(sub_seed(1, "a"), sub_seed(1, "b"));
        assert_ne!(sub_seed(1, "a"), sub_seed(2, "a"));
        assert_eq!(sub_seed(9, "x"), sub_seed(9, "x"));
    }

    #[test]
    fn overrides_change_the_hash() {
        let cfg = ExperimentConfig::from_toml("seed = 1").unwrap();
        let a = Run::new(cfg.clone(), None, None, None).unwrap();
        let b = Run::new(cfg.clone(), Some(2), None, None).unwrap();
        let c = Run::new(cfg, None, Some("elsewhere".into()), None).unwrap();
        assert_ne!(a.hash, b.hash);
        assert_eq!(a.hash, c.hash);
        assert_eq!(a.out, PathBuf::from("out"));
    }

    #[test]
    fn sample_writes_readable_paths() {
        let tmp = tempfile::tempdir().unwrap();
        let run = run_in(tmp.path(), "seed = 3\n[fbm]\nn_steps = 16\nn_paths = 3");
        assert_eq!(cmd_sample(&run).unwrap(), 0);
        let dir = tmp.path().join("paths");
        let p = io::read_binary(File::open(dir.join("path_00002.fbmp")).unwrap()).unwrap();
        assert_eq!(p.seed, 3);
        let (t, v) = io::read_csv(File::open(dir.join("path_00002.csv")).unwrap()).unwrap();
        assert_eq!(t.len(), 17);
        assert_eq!(v, p.values);
        let text = fs::read_to_string(dir.join("path_00000.csv")).unwrap();
        assert!(text.starts_with(&format!("# fbm config_hash={} seed=3", run.hash)));
        let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["config_hash"], run.hash.as_str());
        assert_eq!(manifest["files"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn solve_checks_noise_dimension() {
        let tmp = tempfile::tempdir().unwrap();
        let run = run_in(tmp.path(), "seed = 3\n[fbm]\nn_steps = 16\nn_paths = 2\ndim = 2");
        assert!(matches!(cmd_solve(&run), Err(Error::Config(_))));
        let run = run_in(tmp.path(), "seed = 3\n[fbm]\nn_steps = 16\nn_paths = 2");
        assert_eq!(cmd_solve(&run).unwrap(), 0);
        assert!(tmp.path().join("solutions/solution_00001.csv").exists());
    }

    #[test]
    fn thread_count_does_not_change_samples() {
        let tmp = tempfile::tempdir().unwrap();
        let run = run_in(tmp.path(), "seed = 5\n[fbm]\nn_steps = 32\nn_paths = 8");
        let a = with_jobs(Some(1), || sample_paths(&run)).unwrap().unwrap().1;
        let b = with_jobs(Some(4), || sample_paths(&run)).unwrap().unwrap().1;
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values, y.values);
        }
        assert!(with_jobs(Some(0), || ()).is_err());
    }
}
