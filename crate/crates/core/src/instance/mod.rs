//! Random JADCE instances and their group-Lasso form.

mod format;

pub use format::{FORMAT_VERSION, MAGIC};

use num_complex::Complex64;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{vec_pair, BlockVector, ComplexMatrix, StructuredA};

fn default_unit() -> f64 {
    1.0
}

fn default_noise() -> f64 {
    0.01
}

/// Dimensions, statistics and seed of a random instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    /// N
    pub devices: usize,
    /// M
    pub antennas: usize,
    /// L
    pub sequence_length: usize,
    /// K
    pub active: usize,
    #[serde(default = "default_unit")]
    pub signature_variance: f64,
    #[serde(default = "default_noise")]
    pub noise_variance: f64,
    #[serde(default = "default_unit")]
    pub channel_variance: f64,
    #[serde(default)]
    pub seed: u64,
}

impl InstanceConfig {
    /// N = 2000 devices, M = 100 antennas, L = 10, 50 active, noise 0.01.
    pub fn paper(seed: u64) -> Self {
        InstanceConfig {
            devices: 2000,
            antennas: 100,
            sequence_length: 10,
            active: 50,
            signature_variance: 1.0,
            noise_variance: 0.01,
            channel_variance: 1.0,
            seed,
        }
    }

    pub fn new(devices: usize, antennas: usize, sequence_length: usize, active: usize, seed: u64) -> Self {
        InstanceConfig {
            devices,
            antennas,
            sequence_length,
            active,
            seed,
            ..InstanceConfig::paper(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.devices == 0 {
            return bad("device count N must be >= 1".into());
        }
        if self.antennas == 0 {
            return bad("antenna count M must be >= 1".into());
        }
        if self.sequence_length == 0 {
            return bad("sequence length L must be >= 1".into());
        }
        if self.active > self.devices {
            return bad(format!(
                "active count K = {} exceeds device count N = {} (need K <= N)",
                self.active, self.devices
            ));
        }
        for (name, v) in [
            ("signature_variance", self.signature_variance),
            ("channel_variance", self.channel_variance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return bad(format!("noise_variance must be >= 0, got {}", self.noise_variance));
        }
        Ok(())
    }
}

/// A generated received block `Y = Q S H + Ω` with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct JadceInstance {
    pub config: InstanceConfig,
    /// L × N signatures.
    pub q: ComplexMatrix,
    /// L × M received signal.
    pub y: ComplexMatrix,
    /// N × M channels, including those of inactive devices.
    pub true_h: ComplexMatrix,
    /// Sorted zero-based indices of the active devices.
    pub true_active: Vec<usize>,
}

fn complex_gaussian(rng: &mut ChaCha20Rng, rows: usize, cols: usize, variance: f64) -> ComplexMatrix {
    let sd = (variance / 2.0).sqrt();
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(sd * re, sd * im)
    })
}

/// Draws an instance. The stream order is Q, H, Ω (row-major, real part
/// before imaginary part per entry), then the active set, so the channel
/// draws do not depend on which devices end up active.
pub fn generate(cfg: &InstanceConfig) -> Result<JadceInstance> {
    cfg.validate()?;
    let (n, m, l, k) = (cfg.devices, cfg.antennas, cfg.sequence_length, cfg.active);
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let q = complex_gaussian(&mut rng, l, n, cfg.signature_variance);
    let true_h = complex_gaussian(&mut rng, n, m, cfg.channel_variance);
    let noise = complex_gaussian(&mut rng, l, m, cfg.noise_variance);
    let mut true_active = index::sample(&mut rng, n, k).into_vec();
    true_active.sort_unstable();

    let inst = JadceInstance {
        config: cfg.clone(),
        q,
        y: ComplexMatrix::zeros(l, m),
        true_h,
        true_active,
    };
    let mut y = inst.q.matmul(&inst.signal())?;
    for r in 0..l {
        for c in 0..m {
            y.set(r, c, y.get(r, c) + noise.get(r, c));
        }
    }
    Ok(JadceInstance { y, ..inst })
}

impl JadceInstance {
    /// `S·H`: the channel rows of active devices, zero elsewhere.
    pub fn signal(&self) -> ComplexMatrix {
        let mut sh = ComplexMatrix::zeros(self.true_h.rows(), self.true_h.cols());
        for &i in &self.true_active {
            for c in 0..sh.cols() {
                sh.set(i, c, self.true_h.get(i, c));
            }
        }
        sh
    }

    /// `vec([Re SH, Im SH]ᵀ)` as a block vector.
    pub fn true_x(&self) -> BlockVector {
        BlockVector::from_vec(2 * self.config.antennas, vec_pair(&self.signal()))
            .expect("signal has N >= 1 rows")
    }

    pub fn operator(&self) -> Result<StructuredA> {
        StructuredA::new(self.q.clone(), self.config.antennas)
    }

    /// Group-Lasso problem with `γ = gamma_scale · γ_max`.
    pub fn to_problem(&self, gamma_scale: f64) -> Result<GroupLassoProblem> {
        if !(gamma_scale > 0.0 && gamma_scale <= 1.0) {
            return Err(Error::Config(format!(
                "gamma scale must lie in (0, 1], got {gamma_scale}"
            )));
        }
        let a = self.operator()?;
        let b = vec_pair(&self.y);
        let gamma_max = gamma_max(&a, &b)?;
        if gamma_max <= 0.0 {
            return Err(Error::Degenerate(
                "gamma_max = max_i ||A_i^T b|| is zero, so x = 0 is optimal for every gamma".into(),
            ));
        }
        GroupLassoProblem::new(a, b, gamma_scale * gamma_max)
    }
}

/// `max_i ‖Aᵢᵀ b‖₂`: the smallest `γ` for which `x = 0` is optimal.
pub fn gamma_max(a: &StructuredA, b: &[f64]) -> Result<f64> {
    let atb = a.adjoint(b)?;
    Ok(atb.block_norms().into_iter().fold(0.0, f64::max))
}

/// `min ½‖Ax − b‖² + γ Σᵢ ‖xᵢ‖₂` with `A` held implicitly.
#[derive(Debug, Clone)]
pub struct GroupLassoProblem {
    pub a: StructuredA,
    pub b: Vec<f64>,
    pub gamma: f64,
    pub gamma_max: f64,
}

impl GroupLassoProblem {
    /// Builds a problem for any `γ > 0`; unlike [`JadceInstance::to_problem`]
    /// this accepts `γ_max = 0` (e.g. `b = 0`).
    pub fn new(a: StructuredA, b: Vec<f64>, gamma: f64) -> Result<Self> {
        if b.len() != a.rows() {
            return Err(Error::Dimension(format!(
                "b has length {}, operator has {} rows",
                b.len(),
                a.rows()
            )));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("b has non-finite entries".into()));
        }
        let gamma_max = gamma_max(&a, &b)?;
        Ok(GroupLassoProblem {
            a,
            b,
            gamma,
            gamma_max,
        })
    }

    pub fn blocks(&self) -> usize {
        self.a.devices()
    }

    pub fn block_size(&self) -> usize {
        self.a.block_size()
    }

    pub fn zero_x(&self) -> BlockVector {
        BlockVector::zeros(self.blocks(), self.block_size())
    }
}
