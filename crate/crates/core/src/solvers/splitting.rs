//! Tailored ALADIN and ADMM for the group Lasso.
//!
//! Both iterate, with `Λ = I + AAᵀ/ρ`,
//!
//! ```text
//! ξᵢ   = S_{γ/ρ}(zᵢ + Aᵢᵀλ/ρ)                       parallel
//! wᵢ   = Aᵢ(zᵢ − ξᵢ)                                 parallel
//! Δλ   = c · Λ⁻¹ Σᵢ wᵢ                               consensus
//! zᵢ  ← ξᵢ + AᵢᵀΔλ/ρ + m·(ξᵢ − zᵢ),   λ ← λ + Δλ    parallel
//! ```
//!
//! with `(c, m) = (2, 1)` for ALADIN and `(1, 0)` for ADMM. The auxiliary
//! residual block `z₀` is eliminated through the invariant `z₀ = b − λ = Az`,
//! so the start is `λ⁰ = b − Az⁰`.

use std::time::Instant;

use rayon::prelude::*;

use super::prox::{soft_threshold_into, subgradient};
use super::{max_block_distance, relative_change, PhaseTiming, Recorder, SolveReport, SolverKind, SolverOptions, Status};
use crate::consensus::{ConsensusFactor, ConsensusSolve};
use crate::error::Result;
use crate::instance::GroupLassoProblem;
use crate::metrics;
use crate::model::BlockVector;
use crate::reduce::{self, Reduction, CHUNK_BLOCKS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Aladin,
    Admm,
}

impl Variant {
    /// Factor in front of `Λ⁻¹ Σ wᵢ`.
    pub fn consensus_gain(self) -> f64 {
        match self {
            Variant::Aladin => 2.0,
            Variant::Admm => 1.0,
        }
    }

    /// Weight of the `(ξᵢ − zᵢ)` term in the z-update.
    pub fn momentum(self) -> f64 {
        match self {
            Variant::Aladin => 1.0,
            Variant::Admm => 0.0,
        }
    }

    fn kind(self) -> SolverKind {
        match self {
            Variant::Aladin => SolverKind::Aladin,
            Variant::Admm => SolverKind::Admm,
        }
    }
}

/// `zᵢ⁺ = ξᵢ + AᵢᵀΔλ/ρ + m·(ξᵢ − zᵢ)`.
pub fn z_update(variant: Variant, xi: &[f64], z: &[f64], at_delta_lambda: &[f64], rho: f64) -> Vec<f64> {
    let m = variant.momentum();
    xi.iter()
        .zip(z)
        .zip(at_delta_lambda)
        .map(|((x, z), g)| x + g / rho + m * (x - z))
        .collect()
}

/// Iteration state. `z`, `xi` have one block per device; `lambda` and
/// `delta_lambda` live in the `2LM` measurement space.
#[derive(Debug, Clone)]
pub struct SplittingState {
    pub z: BlockVector,
    pub xi: BlockVector,
    pub lambda: Vec<f64>,
    pub delta_lambda: Vec<f64>,
    pub k: usize,
}

/// Step-by-step driver; [`run`] wraps it with termination and tracing.
pub struct Splitting<'a> {
    problem: &'a GroupLassoProblem,
    consensus: &'a dyn ConsensusSolve,
    variant: Variant,
    rho: f64,
    reduction: Reduction,
    state: SplittingState,
    // Aᵀλ, kept in sync with λ
    at_lambda: BlockVector,
    step_norms: Vec<f64>,
    pending: bool,
}

impl<'a> Splitting<'a> {
    pub fn new(
        problem: &'a GroupLassoProblem,
        consensus: &'a dyn ConsensusSolve,
        variant: Variant,
        rho: f64,
        reduction: Reduction,
        z0: BlockVector,
    ) -> Result<Self> {
        let az = problem.a.apply_with(&z0, reduction)?;
        let lambda: Vec<f64> = problem.b.iter().zip(&az).map(|(b, a)| b - a).collect();
        let at_lambda = problem.a.adjoint(&lambda)?;
        let n = problem.blocks();
        Ok(Splitting {
            problem,
            consensus,
            variant,
            rho,
            reduction,
            state: SplittingState {
                xi: BlockVector::zeros(n, problem.block_size()),
                delta_lambda: vec![0.0; lambda.len()],
                lambda,
                z: z0,
                k: 0,
            },
            at_lambda,
            step_norms: vec![0.0; n],
            pending: false,
        })
    }

    pub fn state(&self) -> &SplittingState {
        &self.state
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `‖ξᵢ − zᵢ‖` from the last local step.
    pub fn step_norms(&self) -> &[f64] {
        &self.step_norms
    }

    /// `Aᵢᵀλ` for the current multiplier.
    pub fn at_lambda(&self) -> &BlockVector {
        &self.at_lambda
    }

    /// Applies the z/λ update for the last computed `Δλ`, if any.
    pub fn update(&mut self) -> Result<()> {
        if !self.pending {
            return Ok(());
        }
        let at_dl = self.problem.a.adjoint(&self.state.delta_lambda)?;
        let rho = self.rho;
        let m = self.variant.momentum();
        let bs = self.problem.block_size() * CHUNK_BLOCKS;
        let st = &mut self.state;
        st.z.as_mut_slice()
            .par_chunks_mut(bs)
            .zip(st.xi.as_slice().par_chunks(bs))
            .zip(at_dl.as_slice().par_chunks(bs))
            .for_each(|((z, x), g)| {
                for ((z, x), g) in z.iter_mut().zip(x).zip(g) {
                    *z = x + g / rho + m * (x - *z);
                }
            });
        for (l, d) in st.lambda.iter_mut().zip(&st.delta_lambda) {
            *l += d;
        }
        reduce::add_assign(self.at_lambda.as_mut_slice(), at_dl.as_slice());
        st.k += 1;
        self.pending = false;
        Ok(())
    }

    /// Computes every `ξᵢ` and returns `maxᵢ ‖ξᵢ − zᵢ‖`.
    pub fn local_step(&mut self) -> f64 {
        let bs = self.problem.block_size();
        let kappa = self.problem.gamma / self.rho;
        let rho = self.rho;
        let st = &mut self.state;
        st.xi
            .as_mut_slice()
            .par_chunks_mut(bs * CHUNK_BLOCKS)
            .zip(st.z.as_slice().par_chunks(bs * CHUNK_BLOCKS))
            .zip(self.at_lambda.as_slice().par_chunks(bs * CHUNK_BLOCKS))
            .zip(self.step_norms.par_chunks_mut(CHUNK_BLOCKS))
            .for_each(|(((xi, z), atl), steps)| {
                let mut arg = vec![0.0; bs];
                for (((xb, zb), gb), s) in xi
                    .chunks_exact_mut(bs)
                    .zip(z.chunks_exact(bs))
                    .zip(atl.chunks_exact(bs))
                    .zip(steps.iter_mut())
                {
                    for ((a, zv), gv) in arg.iter_mut().zip(zb).zip(gb) {
                        *a = zv + gv / rho;
                    }
                    soft_threshold_into(&arg, kappa, xb);
                    *s = xb
                        .iter()
                        .zip(zb)
                        .map(|(x, z)| (x - z) * (x - z))
                        .sum::<f64>()
                        .sqrt();
                }
            });
        self.step_norms.iter().cloned().fold(0.0, |a, b| if b.is_nan() { b } else { a.max(b) })
    }

    /// Per-chunk partial sums of `wᵢ = Aᵢ(zᵢ − ξᵢ)`.
    pub fn agent_products(&self) -> Result<Vec<Vec<f64>>> {
        let mut d = self.state.z.clone();
        for (dv, x) in d.as_mut_slice().iter_mut().zip(self.state.xi.as_slice()) {
            *dv -= x;
        }
        self.problem.a.chunk_products(&d)
    }

    /// Fusion-center step: `Δλ = c · Λ⁻¹ Σ wᵢ`.
    pub fn consensus(&mut self, partials: Vec<Vec<f64>>) {
        let w = reduce::combine(partials, self.reduction);
        let mut dl = self.consensus.solve(&w);
        let c = self.variant.consensus_gain();
        for v in dl.iter_mut() {
            *v *= c;
        }
        self.state.delta_lambda = dl;
        self.pending = true;
    }

    /// `gᵢ = ρ(zᵢ − ξᵢ) + Aᵢᵀλ` for block `i` after a local step.
    pub fn subgradient(&self, i: usize) -> Vec<f64> {
        subgradient(
            self.state.z.block(i),
            self.state.xi.block(i),
            self.at_lambda.block(i),
            self.rho,
        )
    }

    /// The eliminated residual block `z₀ = b − λ`.
    pub fn residual_block(&self) -> Vec<f64> {
        self.problem
            .b
            .iter()
            .zip(&self.state.lambda)
            .map(|(b, l)| b - l)
            .collect()
    }
}

pub(crate) fn run(
    p: &GroupLassoProblem,
    variant: Variant,
    opts: &SolverOptions,
    z0: BlockVector,
) -> Result<SolveReport> {
    let rho = opts.rho_scale * p.gamma;
    let factor = ConsensusFactor::precompute(p.a.q(), p.a.antennas(), rho)?;
    run_with(p, variant, opts, z0, &factor)
}

/// [`run`] with a caller-supplied consensus solver.
pub fn run_with(
    p: &GroupLassoProblem,
    variant: Variant,
    opts: &SolverOptions,
    z0: BlockVector,
    consensus: &dyn ConsensusSolve,
) -> Result<SolveReport> {
    opts.validate()?;
    let rho = opts.rho_scale * p.gamma;
    let tol = opts.tolerance;
    let kkt_bound = opts.kkt_bound(p.gamma);
    let mut s = Splitting::new(p, consensus, variant, rho, opts.reduction, z0)?;
    let mut rec = Recorder::new(p, opts.trace_every);
    let mut prev_xi: Option<BlockVector> = None;
    let mut status = Status::MaxIterations;
    let mut iterations = 0;

    for k in 1..=opts.max_iterations {
        iterations = k;
        let t0 = Instant::now();
        s.update()?;
        let max_step = s.local_step();
        let mut parallel = t0.elapsed();

        if !max_step.is_finite() || !s.state.xi.is_finite() {
            status = Status::Degenerate;
            let timing = PhaseTiming { total: t0.elapsed(), parallel, ..Default::default() };
            rec.timings.push(timing);
            break;
        }

        let stalled = prev_xi
            .as_ref()
            .is_some_and(|prev| relative_change(&s.state.xi, prev) <= tol);
        let mut kkt = None;
        if max_step <= tol || stalled {
            let r = metrics::kkt_residual(p, &s.state.xi)?;
            kkt = Some(r);
            if r <= kkt_bound {
                status = Status::Converged;
                let timing = PhaseTiming { total: t0.elapsed(), parallel, ..Default::default() };
                rec.record(k, &s.state.xi, max_step, kkt, timing, true)?;
                break;
            }
        }

        let t1 = Instant::now();
        let partials = s.agent_products()?;
        parallel += t1.elapsed();
        let t2 = Instant::now();
        s.consensus(partials);
        let consensus_time = t2.elapsed();

        let timing = PhaseTiming {
            total: t0.elapsed(),
            parallel,
            consensus: consensus_time,
        };
        rec.record(k, &s.state.xi, max_step, kkt, timing, k == opts.max_iterations)?;
        match prev_xi.as_mut() {
            Some(prev) => prev.as_mut_slice().copy_from_slice(s.state.xi.as_slice()),
            None => prev_xi = Some(s.state.xi.clone()),
        }
    }

    let final_x = s.state.xi.clone();
    if status == Status::Degenerate {
        let step = max_block_distance(&s.state.xi, &s.state.z);
        rec.rows.push(super::TraceRow {
            iter: iterations,
            objective: f64::NAN,
            max_step: step,
            kkt_residual: f64::NAN,
            elapsed: Default::default(),
            parallel: Default::default(),
            consensus: Default::default(),
        });
    }
    rec.finish(variant.kind(), status, iterations, final_x)
}
