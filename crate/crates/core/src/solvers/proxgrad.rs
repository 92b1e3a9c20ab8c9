//! Proximal gradient with backtracking line search.

use std::time::Instant;

use super::prox::soft_threshold_into;
use super::{max_block_distance, relative_change, sum_sq, PhaseTiming, Recorder, SolveReport, SolverKind, SolverOptions, Status};
use crate::error::Result;
use crate::instance::GroupLassoProblem;
use crate::metrics;
use crate::model::BlockVector;
use crate::reduce;

const INITIAL_STEP: f64 = 1.0;
const MIN_STEP: f64 = 1e-300;

fn residual(p: &GroupLassoProblem, x: &BlockVector, opts: &SolverOptions) -> Result<Vec<f64>> {
    let mut r = p.a.apply_with(x, opts.reduction)?;
    for (ri, bi) in r.iter_mut().zip(&p.b) {
        *ri -= bi;
    }
    Ok(r)
}

pub(crate) fn run(p: &GroupLassoProblem, opts: &SolverOptions, x0: BlockVector) -> Result<SolveReport> {
    let mut rec = Recorder::new(p, opts.trace_every);
    let kkt_bound = opts.kkt_bound(p.gamma);
    let m = p.block_size();

    let mut x = x0;
    let mut r = residual(p, &x, opts)?;
    let mut f = 0.5 * sum_sq(&r);
    let mut step = INITIAL_STEP;
    let mut x_new = x.clone();
    let mut arg = vec![0.0; m];
    let mut status = Status::MaxIterations;
    let mut iterations = 0;

    'outer: for k in 1..=opts.max_iterations {
        iterations = k;
        let t0 = Instant::now();
        let mut parallel = std::time::Duration::ZERO;
        let mut consensus = std::time::Duration::ZERO;

        let tp = Instant::now();
        let g = p.a.adjoint(&r)?;
        parallel += tp.elapsed();

        let (r_new, f_new) = loop {
            let tp = Instant::now();
            for ((ob, xb), gb) in x_new.as_mut_slice().chunks_exact_mut(m).zip(x.iter_blocks()).zip(g.iter_blocks()) {
                for ((a, xv), gv) in arg.iter_mut().zip(xb).zip(gb) {
                    *a = xv - step * gv;
                }
                soft_threshold_into(&arg, step * p.gamma, ob);
            }
            parallel += tp.elapsed();

            let tc = Instant::now();
            let r_try = residual(p, &x_new, opts)?;
            consensus += tc.elapsed();
            let f_try = 0.5 * sum_sq(&r_try);

            let d: Vec<f64> = x_new.as_slice().iter().zip(x.as_slice()).map(|(a, b)| a - b).collect();
            let bound = f + reduce::dot(g.as_slice(), &d) + sum_sq(&d) / (2.0 * step) + 4.0 * f64::EPSILON * f.abs();
            if !f_try.is_finite() || !x_new.is_finite() {
                status = Status::Degenerate;
                rec.timings.push(PhaseTiming { total: t0.elapsed(), parallel, consensus });
                break 'outer;
            }
            if f_try <= bound {
                break (r_try, f_try);
            }
            step *= 0.5;
            if step < MIN_STEP {
                status = Status::Degenerate;
                rec.timings.push(PhaseTiming { total: t0.elapsed(), parallel, consensus });
                break 'outer;
            }
        };

        let max_step = max_block_distance(&x_new, &x);
        let progress = relative_change(&x_new, &x);
        std::mem::swap(&mut x, &mut x_new);
        r = r_new;
        f = f_new;
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
    rec.finish(SolverKind::ProxGradient, status, iterations, x)
}
