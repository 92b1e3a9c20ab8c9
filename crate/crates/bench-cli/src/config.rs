//! Benchmark definitions in TOML.
//!
//! ```toml
//! solvers = ["aladin", "admm", "fista", "proxgrad"]
//! seeds = [1, 2, 3]          # or: seed_count = 100  (seeds 0..100)
//! gamma_scale = 0.5
//! rho_scale = 0.8
//! tolerance = 1e-5
//! output_dir = "bench-out"
//!
//! [instance]
//! devices = [500, 1000, 2000]
//! antennas = [100]
//! sequence_length = [10]
//! active = [50]
//! noise_variance = 0.01
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use jadce::{InstanceConfig, SolverKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

fn d_gamma_scale() -> f64 {
    0.5
}
fn d_rho_scale() -> f64 {
    0.8
}
fn d_tolerance() -> f64 {
    1e-5
}
fn d_max_iterations() -> usize {
    10_000
}
fn d_one() -> usize {
    1
}
fn d_unit() -> f64 {
    1.0
}
fn d_noise() -> f64 {
    0.01
}
fn d_threshold() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSweep {
    pub devices: Vec<usize>,
    pub antennas: Vec<usize>,
    pub sequence_length: Vec<usize>,
    pub active: Vec<usize>,
    #[serde(default = "d_unit")]
    pub signature_variance: f64,
    #[serde(default = "d_noise")]
    pub noise_variance: f64,
    #[serde(default = "d_unit")]
    pub channel_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub instance: InstanceSweep,
    pub solvers: Vec<SolverKind>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_count: Option<u64>,
    #[serde(default = "d_one")]
    pub repetitions: usize,
    #[serde(default = "d_gamma_scale")]
    pub gamma_scale: f64,
    #[serde(default = "d_rho_scale")]
    pub rho_scale: f64,
    #[serde(default = "d_tolerance")]
    pub tolerance: f64,
    #[serde(default = "d_max_iterations")]
    pub max_iterations: usize,
    /// Trace stride for the convergence-curve output.
    #[serde(default = "d_one")]
    pub trace_every: usize,
    #[serde(default = "d_threshold")]
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Cells solved concurrently; 0 uses every core.
    #[serde(default)]
    pub threads: usize,
    /// Threads per solve. Defaults to 1 when cells run concurrently.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_threads: Option<usize>,
    #[serde(default)]
    pub deterministic: bool,
}

impl BenchConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg: BenchConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(n) = cfg.seed_count {
            if !cfg.seeds.is_empty() {
                return Err(CliError::Config("give either seeds or seed_count, not both".into()));
            }
            cfg.seeds = (0..n).collect();
            cfg.seed_count = None;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.solvers.is_empty() {
            return bad("solvers must not be empty".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1".into());
        }
        let s = &self.instance;
        for (name, list) in [
            ("instance.devices", &s.devices),
            ("instance.antennas", &s.antennas),
            ("instance.sequence_length", &s.sequence_length),
            ("instance.active", &s.active),
        ] {
            if list.is_empty() {
                return bad(format!("{name} must list at least one value"));
            }
        }
        if !(self.gamma_scale > 0.0 && self.gamma_scale <= 1.0) {
            return bad(format!("gamma_scale must lie in (0, 1], got {}", self.gamma_scale));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        self.solver_options(0).validate()?;
        for cfg in self.instance_configs() {
            cfg.validate()?;
        }
        Ok(())
    }

    /// Every combination of the swept dimensions, seed 0.
    pub fn instance_configs(&self) -> Vec<InstanceConfig> {
        let s = &self.instance;
        let mut out = Vec::new();
        for &n in &s.devices {
            for &l in &s.sequence_length {
                for &m in &s.antennas {
                    for &k in &s.active {
                        out.push(InstanceConfig {
                            devices: n,
                            antennas: m,
                            sequence_length: l,
                            active: k,
                            signature_variance: s.signature_variance,
                            noise_variance: s.noise_variance,
                            channel_variance: s.channel_variance,
                            seed: 0,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn solver_options(&self, threads: usize) -> jadce::SolverOptions {
        jadce::SolverOptions {
            rho_scale: self.rho_scale,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            trace_every: self.trace_every,
            threads,
            reduction: jadce::Reduction::from_deterministic(self.deterministic),
        }
    }

    /// Hash of everything that defines a cell except the seed.
    pub fn cell_hash(&self, cfg: &InstanceConfig) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            instance: &'a InstanceConfig,
            gamma_scale: f64,
            rho_scale: f64,
            tolerance: f64,
            max_iterations: usize,
        }
        let key = Key {
            instance: &InstanceConfig { seed: 0, ..cfg.clone() },
            gamma_scale: self.gamma_scale,
            rho_scale: self.rho_scale,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        };
        let bytes = serde_json::to_vec(&key).expect("plain struct serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

/// Instance parameters for `gen`: either a TOML file with the
/// [`InstanceConfig`] fields at top level or an `[instance]` table.
pub fn load_instance_config(path: &Path) -> CliResult<InstanceConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    #[derive(Deserialize)]
    struct Wrapped {
        instance: InstanceConfig,
    }
    let parsed = toml::from_str::<Wrapped>(&text)
        .map(|w| w.instance)
        .or_else(|_| toml::from_str::<InstanceConfig>(&text));
    parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
