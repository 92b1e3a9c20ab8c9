//! Solvers for the group-Lasso formulation of joint activity detection and
//! channel estimation (JADCE) in massive-access uplinks.
//!
//! The received block `Y = Q S H + Ω` is rewritten as
//! `min ½‖Ax − b‖² + γ Σᵢ ‖xᵢ‖₂` with one block of `2M` reals per device.
//! `A` is never formed: [`model::StructuredA`] applies it through the complex
//! signature matrix `Q` in `O(LMN)`.
//!
//! Four solvers share the [`solvers::solve`] entry point: a tailored ALADIN
//! iteration with a closed-form consensus step ([`consensus`]), the matching
//! ADMM iteration, FISTA and proximal gradient with backtracking.

pub mod consensus;
pub mod error;
pub mod instance;
pub mod metrics;
pub mod model;
pub mod reduce;
pub mod solvers;

pub use consensus::ConsensusFactor;
pub use error::{Error, Result};
pub use instance::{GroupLassoProblem, InstanceConfig, JadceInstance};
pub use model::{BlockVector, ComplexMatrix, StructuredA};
pub use reduce::Reduction;
pub use solvers::{solve, SolveReport, SolverKind, SolverOptions, Status, TraceRow};

/// Library version stamped into benchmark outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
