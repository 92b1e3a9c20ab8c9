//! Accelerated proximal gradient (FISTA) with a constant step `1/L_f`.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::prox::soft_threshold_into;
use super::{max_block_distance, relative_change, sum_sq, PhaseTiming, Recorder, SolveReport, SolverKind, SolverOptions, Status};
use crate::error::Result;
use crate::instance::GroupLassoProblem;
use crate::metrics;
use crate::model::{BlockVector, StructuredA};
use crate::reduce::{Reduction, CHUNK_BLOCKS};

const POWER_TOL: f64 = 1e-6;
const POWER_MAX_ITER: usize = 200;
const POWER_SEED: u64 = 0x5eed;

/// Largest eigenvalue of `AᵀA` by power iteration (Rayleigh quotient).
pub fn lipschitz_estimate(a: &StructuredA, reduction: Reduction) -> Result<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(POWER_SEED);
    let data: Vec<f64> = (0..a.cols()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut v = BlockVector::from_vec(a.block_size(), data)?;
    let mut est = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let nv = v.norm();
        if nv == 0.0 {
            return Ok(0.0);
        }
        for x in v.as_mut_slice() {
            *x /= nv;
        }
        let av = a.apply_with(&v, reduction)?;
        let next = sum_sq(&av);
        let done = est > 0.0 && (next - est).abs() <= POWER_TOL * next;
        est = next;
        if done || est == 0.0 {
            break;
        }
        v = a.adjoint(&av)?;
    }
    Ok(est)
}

pub(crate) fn run(p: &GroupLassoProblem, opts: &SolverOptions, x0: BlockVector) -> Result<SolveReport> {
    let lf = lipschitz_estimate(&p.a, opts.reduction)?;
    let mut rec = Recorder::new(p, opts.trace_every);
    if !(lf > 0.0 && lf.is_finite()) {
        return rec.finish(SolverKind::Fista, Status::Degenerate, 0, x0);
    }
    let kappa = p.gamma / lf;
    let bs = p.block_size() * CHUNK_BLOCKS;
    let kkt_bound = opts.kkt_bound(p.gamma);

    let mut x = x0.clone();
    let mut y = x0;
    let mut x_new = x.clone();
    let mut t = 1.0_f64;
    let mut status = Status::MaxIterations;
    let mut iterations = 0;

    for k in 1..=opts.max_iterations {
        iterations = k;
        let t0 = Instant::now();
        let mut r = p.a.apply_with(&y, opts.reduction)?;
        for (ri, bi) in r.iter_mut().zip(&p.b) {
            *ri -= bi;
        }
        let consensus = t0.elapsed();

        let t1 = Instant::now();
        let g = p.a.adjoint(&r)?;
        x_new
            .as_mut_slice()
            .par_chunks_mut(bs)
            .zip(y.as_slice().par_chunks(bs))
            .zip(g.as_slice().par_chunks(bs))
            .for_each(|((out, yc), gc)| {
                let m = p.block_size();
                let mut arg = vec![0.0; m];
                for ((ob, yb), gb) in out.chunks_exact_mut(m).zip(yc.chunks_exact(m)).zip(gc.chunks_exact(m)) {
                    for ((a, yv), gv) in arg.iter_mut().zip(yb).zip(gb) {
                        *a = yv - gv / lf;
                    }
                    soft_threshold_into(&arg, kappa, ob);
                }
            });
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_new;
        for ((yv, xn), xo) in y.as_mut_slice().iter_mut().zip(x_new.as_slice()).zip(x.as_slice()) {
            *yv = xn + beta * (xn - xo);
        }
        t = t_new;
        let parallel = t1.elapsed();

        if !x_new.is_finite() {
            status = Status::Degenerate;
            rec.timings.push(PhaseTiming { total: t0.elapsed(), parallel, consensus });
            x.as_mut_slice().copy_from_slice(x_new.as_slice());
            break;
        }

        let max_step = max_block_distance(&x_new, &x);
        let progress = relative_change(&x_new, &x);
        std::mem::swap(&mut x, &mut x_new);
        let timing = PhaseTiming { total: t0.elapsed(), parallel, consensus };

        let mut kkt = None;
        if progress <= opts.tolerance {
            let v = metrics::kkt_residual(p, &x)?;
            kkt = Some(v);
            if v <= kkt_bound {
                status = Status::Converged;
                rec.record(k, &x, max_step, kkt, timing, true)?;
                break;
            }
        }
        rec.record(k, &x, max_step, kkt, timing, k == opts.max_iterations)?;
    }
    rec.finish(SolverKind::Fista, status, iterations, x)
}
