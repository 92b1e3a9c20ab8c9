//! The four group-Lasso solvers behind one entry point.
//!
//! All of them stop on the same two-part rule: a solver-specific progress
//! measure must drop below `ε` and the blockwise KKT residual of the returned
//! iterate must be at most `ε·max(1, γ)`. For ALADIN and ADMM the progress
//! measure is `maxᵢ ‖ξᵢ − zᵢ‖` or, failing that, the relative change of `ξ`
//! between iterations; for FISTA and proximal gradient it is the relative
//! displacement of the prox step.

mod fista;
mod proxgrad;
pub mod prox;
pub mod splitting;

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::GroupLassoProblem;
use crate::metrics;
use crate::model::BlockVector;
use crate::reduce::{self, Reduction};

pub use fista::lipschitz_estimate;
pub use prox::{local_step, soft_threshold};
pub use splitting::{Splitting, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Aladin,
    Admm,
    Fista,
    #[serde(rename = "proxgrad")]
    ProxGradient,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::Aladin,
        SolverKind::Admm,
        SolverKind::Fista,
        SolverKind::ProxGradient,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Aladin => "aladin",
            SolverKind::Admm => "admm",
            SolverKind::Fista => "fista",
            SolverKind::ProxGradient => "proxgrad",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aladin" => Ok(SolverKind::Aladin),
            "admm" => Ok(SolverKind::Admm),
            "fista" => Ok(SolverKind::Fista),
            "proxgrad" | "proxgradient" | "prox-gradient" => Ok(SolverKind::ProxGradient),
            other => Err(Error::Config(format!(
                "unknown solver '{other}' (expected aladin, admm, fista or proxgrad)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// `ρ = rho_scale · γ` for ALADIN and ADMM.
    pub rho_scale: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Record a trace row every this many iterations; 0 keeps only the last.
    pub trace_every: usize,
    /// Worker threads; 0 runs on the caller's rayon pool.
    pub threads: usize,
    pub reduction: Reduction,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rho_scale: 0.8,
            tolerance: 1e-5,
            max_iterations: 10_000,
            trace_every: 1,
            threads: 0,
            reduction: Reduction::Tree,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        if !(self.rho_scale > 0.0 && self.rho_scale.is_finite()) {
            return Err(Error::Config(format!("rho scale must be > 0, got {}", self.rho_scale)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        Ok(())
    }

    /// The KKT bound that certifies termination.
    pub fn kkt_bound(&self, gamma: f64) -> f64 {
        self.tolerance * gamma.max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    Degenerate,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::MaxIterations => "max_iterations",
            Status::Degenerate => "degenerate",
        })
    }
}

/// Wall time of one iteration split into the per-block and the coupling part.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTiming {
    pub total: Duration,
    pub parallel: Duration,
    pub consensus: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    /// `maxᵢ ‖ξᵢ − zᵢ‖` (ALADIN/ADMM) or `maxᵢ ‖xᵢ⁺ − xᵢ‖` (FISTA/ProxGradient).
    pub max_step: f64,
    pub kkt_residual: f64,
    pub elapsed: Duration,
    pub parallel: Duration,
    pub consensus: Duration,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solver: SolverKind,
    pub status: Status,
    pub iterations: usize,
    pub final_x: BlockVector,
    pub final_objective: f64,
    pub kkt_residual: f64,
    pub trace: Vec<TraceRow>,
    /// One entry per iteration, independent of `trace_every`.
    pub timings: Vec<PhaseTiming>,
}

impl SolveReport {
    /// Median per-phase time over iterations `skip + 1 ..`, in milliseconds:
    /// `(total, parallel, consensus)`.
    pub fn median_phase_ms(&self, skip: usize) -> Option<(f64, f64, f64)> {
        let rest = self.timings.get(skip..).filter(|t| !t.is_empty())?;
        let med = |f: fn(&PhaseTiming) -> Duration| {
            let mut v: Vec<f64> = rest.iter().map(|t| f(t).as_secs_f64() * 1e3).collect();
            v.sort_by(f64::total_cmp);
            let n = v.len();
            if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            }
        };
        Some((med(|t| t.total), med(|t| t.parallel), med(|t| t.consensus)))
    }
}

/// Solves from the zero start.
pub fn solve(p: &GroupLassoProblem, kind: SolverKind, opts: &SolverOptions) -> Result<SolveReport> {
    solve_from(p, kind, opts, None)
}

/// Solves from `init` (the primal start `z⁰` for ALADIN/ADMM, `x⁰` otherwise).
pub fn solve_from(
    p: &GroupLassoProblem,
    kind: SolverKind,
    opts: &SolverOptions,
    init: Option<&BlockVector>,
) -> Result<SolveReport> {
    opts.validate()?;
    let x0 = match init {
        Some(x) => {
            if x.blocks() != p.blocks() || x.block_size() != p.block_size() {
                return Err(Error::Dimension("initial point does not match the problem".into()));
            }
            x.clone()
        }
        None => p.zero_x(),
    };
    with_threads(opts.threads, || match kind {
        SolverKind::Aladin => splitting::run(p, Variant::Aladin, opts, x0),
        SolverKind::Admm => splitting::run(p, Variant::Admm, opts, x0),
        SolverKind::Fista => fista::run(p, opts, x0),
        SolverKind::ProxGradient => proxgrad::run(p, opts, x0),
    })
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if threads == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?
        .install(f)
}

/// `‖a − b‖ / max(1, ‖b‖)`.
pub(crate) fn relative_change(a: &BlockVector, b: &BlockVector) -> f64 {
    let d: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    d.sqrt() / b.norm().max(1.0)
}

/// Collects trace rows and per-iteration timings.
pub(crate) struct Recorder<'a> {
    problem: &'a GroupLassoProblem,
    every: usize,
    pub rows: Vec<TraceRow>,
    pub timings: Vec<PhaseTiming>,
}

impl<'a> Recorder<'a> {
    pub fn new(problem: &'a GroupLassoProblem, every: usize) -> Self {
        Recorder {
            problem,
            every,
            rows: Vec::new(),
            timings: Vec::new(),
        }
    }

    /// Stores the timing and, when due (or `last`), a trace row for `x`.
    pub fn record(
        &mut self,
        iter: usize,
        x: &BlockVector,
        max_step: f64,
        kkt: Option<f64>,
        timing: PhaseTiming,
        last: bool,
    ) -> Result<()> {
        self.timings.push(timing);
        let due = self.every > 0 && iter % self.every == 0;
        if !(due || last) {
            return Ok(());
        }
        if self.rows.last().is_some_and(|r| r.iter == iter) {
            return Ok(());
        }
        let objective = metrics::objective(self.problem, x)?;
        let kkt_residual = match kkt {
            Some(v) => v,
            None => metrics::kkt_residual(self.problem, x)?,
        };
        self.rows.push(TraceRow {
            iter,
            objective,
            max_step,
            kkt_residual,
            elapsed: timing.total,
            parallel: timing.parallel,
            consensus: timing.consensus,
        });
        Ok(())
    }

    pub fn finish(
        self,
        solver: SolverKind,
        status: Status,
        iterations: usize,
        final_x: BlockVector,
    ) -> Result<SolveReport> {
        let (final_objective, kkt_residual) = if final_x.is_finite() {
            (
                metrics::objective(self.problem, &final_x)?,
                metrics::kkt_residual(self.problem, &final_x)?,
            )
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(SolveReport {
            solver,
            status,
            iterations,
            final_x,
            final_objective,
            kkt_residual,
            trace: self.rows,
            timings: self.timings,
        })
    }
}

pub(crate) fn max_block_distance(a: &BlockVector, b: &BlockVector) -> f64 {
    a.iter_blocks()
        .zip(b.iter_blocks())
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(u, v)| (u - v).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Trace CSV header.
pub const TRACE_HEADER: &str =
    "iter,objective,max_step,kkt_residual,elapsed_ms,parallel_ms,consensus_ms";

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Writes the trace as CSV. With `timing = false` the three timing columns
/// are written as `0` so the bytes depend only on the iterates.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut out: W, timing: bool) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in rows {
        let (e, p, c) = if timing {
            (fmt_f64(ms(r.elapsed)), fmt_f64(ms(r.parallel)), fmt_f64(ms(r.consensus)))
        } else {
            ("0".into(), "0".into(), "0".into())
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.iter,
            fmt_f64(r.objective),
            fmt_f64(r.max_step),
            fmt_f64(r.kkt_residual),
            e,
            p,
            c
        )?;
    }
    Ok(())
}

pub(crate) fn sum_sq(v: &[f64]) -> f64 {
    reduce::dot(v, v)
}
