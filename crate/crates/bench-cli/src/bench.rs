//! Benchmark sweeps: configs × seeds × solvers.
//!
//! Outputs in the target directory:
//! `runs.csv` (one row per solve), `report.json` (config echo, aggregates and
//! runs), `fig1_<solver>.csv` (convergence curve of the first config and
//! seed), `fig2.csv` (iterations per config and solver) and `table1.csv`
//! (per-iteration time split).

use std::fs;
use std::path::Path;
use std::time::Instant;

use jadce::instance::generate;
use jadce::metrics::{detect, nmse};
use jadce::{solve, InstanceConfig, SolverKind, TraceRow};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::BenchConfig;
use crate::error::{CliError, CliResult};
use crate::stats::{split_pct, summarize, Summary};

/// Iterations skipped before taking per-phase medians.
const WARMUP: usize = 4;

#[derive(Debug, Clone, Serialize)]
struct RunRow {
    version: &'static str,
    config_hash: String,
    devices: usize,
    antennas: usize,
    sequence_length: usize,
    active: usize,
    seed: u64,
    solver: SolverKind,
    rep: usize,
    status: String,
    iterations: usize,
    final_objective: f64,
    kkt_residual: f64,
    kkt_residual_scaled: f64,
    missed_detection_rate: f64,
    false_alarm_rate: f64,
    nmse: f64,
    wall_ms: f64,
    total_ms: f64,
    parallel_ms: f64,
    consensus_ms: f64,
    error: String,
}

#[derive(Serialize)]
struct Fig1Row<'a> {
    version: &'static str,
    config_hash: &'a str,
    seed: u64,
    iter: usize,
    objective: f64,
    objective_gap: f64,
    max_step: f64,
    kkt_residual: f64,
}

#[derive(Serialize)]
struct Fig2Row<'a> {
    version: &'static str,
    config_hash: &'a str,
    devices: usize,
    antennas: usize,
    sequence_length: usize,
    active: usize,
    solver: SolverKind,
    runs: usize,
    converged: usize,
    median_iterations: f64,
    mean_iterations: f64,
    iqr_iterations: f64,
}

#[derive(Serialize)]
struct Table1Row<'a> {
    version: &'static str,
    config_hash: &'a str,
    devices: usize,
    antennas: usize,
    sequence_length: usize,
    active: usize,
    solver: SolverKind,
    runs: usize,
    total_ms: f64,
    parallel_ms: f64,
    consensus_ms: f64,
    parallel_pct: f64,
    consensus_pct: f64,
}

#[derive(Serialize)]
struct Aggregate {
    config_hash: String,
    devices: usize,
    antennas: usize,
    sequence_length: usize,
    active: usize,
    solver: SolverKind,
    runs: usize,
    converged: usize,
    iterations: Option<Summary>,
    ms_per_iteration: Option<Summary>,
    final_objective: Option<Summary>,
    missed_detection_rate: Option<Summary>,
    false_alarm_rate: Option<Summary>,
}

#[derive(Serialize)]
struct Report<'a> {
    version: &'static str,
    config: &'a BenchConfig,
    aggregates: Vec<Aggregate>,
    runs: &'a [RunRow],
}

pub struct BenchSummary {
    pub runs: usize,
    pub failed: usize,
    pub configs: usize,
}

struct Job<'a> {
    instance: InstanceConfig,
    hash: &'a str,
    keep_trace: bool,
}

struct JobResult {
    rows: Vec<RunRow>,
    traces: Vec<(SolverKind, Vec<TraceRow>)>,
}

fn failed_row(job: &Job, solver: SolverKind, rep: usize, status: &str, error: String) -> RunRow {
    let c = &job.instance;
    RunRow {
        version: jadce::VERSION,
        config_hash: job.hash.to_string(),
        devices: c.devices,
        antennas: c.antennas,
        sequence_length: c.sequence_length,
        active: c.active,
        seed: c.seed,
        solver,
        rep,
        status: status.into(),
        iterations: 0,
        final_objective: f64::NAN,
        kkt_residual: f64::NAN,
        kkt_residual_scaled: f64::NAN,
        missed_detection_rate: f64::NAN,
        false_alarm_rate: f64::NAN,
        nmse: f64::NAN,
        wall_ms: 0.0,
        total_ms: 0.0,
        parallel_ms: 0.0,
        consensus_ms: 0.0,
        error,
    }
}

fn run_job(cfg: &BenchConfig, job: &Job, solver_threads: usize, timing: bool) -> JobResult {
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let all_failed = |status: &str, msg: String| {
        let rows = cfg
            .solvers
            .iter()
            .flat_map(|&s| (0..cfg.repetitions).map(move |r| (s, r)))
            .map(|(s, r)| failed_row(job, s, r, status, msg.clone()))
            .collect();
        JobResult { rows, traces: Vec::new() }
    };
    let inst = match generate(&job.instance) {
        Ok(i) => i,
        Err(e) => return all_failed("error", e.to_string()),
    };
    let p = match inst.to_problem(cfg.gamma_scale) {
        Ok(p) => p,
        Err(jadce::Error::Degenerate(m)) => return all_failed("degenerate", m),
        Err(e) => return all_failed("error", e.to_string()),
    };
    for &solver in &cfg.solvers {
        for rep in 0..cfg.repetitions {
            let trace = job.keep_trace && rep == 0;
            let mut opts = cfg.solver_options(solver_threads);
            if !trace {
                opts.trace_every = 0;
            }
            let start = Instant::now();
            let report = match solve(&p, solver, &opts) {
                Ok(r) => r,
                Err(e) => {
                    rows.push(failed_row(job, solver, rep, "error", e.to_string()));
                    continue;
                }
            };
            let wall = start.elapsed().as_secs_f64() * 1e3;
            let d = detect(&report.final_x, cfg.threshold, &inst.true_active);
            let err = nmse(&report.final_x, &inst).unwrap_or(f64::NAN);
            let (t, pa, co) = report.median_phase_ms(WARMUP).unwrap_or((0.0, 0.0, 0.0));
            let (wall, t, pa, co) = if timing { (wall, t, pa, co) } else { (0.0, 0.0, 0.0, 0.0) };
            let c = &job.instance;
            rows.push(RunRow {
                version: jadce::VERSION,
                config_hash: job.hash.to_string(),
                devices: c.devices,
                antennas: c.antennas,
                sequence_length: c.sequence_length,
                active: c.active,
                seed: c.seed,
                solver,
                rep,
                status: report.status.to_string(),
                iterations: report.iterations,
                final_objective: report.final_objective,
                kkt_residual: report.kkt_residual,
                kkt_residual_scaled: report.kkt_residual / p.gamma.max(1.0),
                missed_detection_rate: d.missed_detection_rate,
                false_alarm_rate: d.false_alarm_rate,
                nmse: err,
                wall_ms: wall,
                total_ms: t,
                parallel_ms: pa,
                consensus_ms: co,
                error: String::new(),
            });
            if trace {
                traces.push((solver, report.trace));
            }
        }
    }
    JobResult { rows, traces }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn ok_rows<'a>(rows: &'a [RunRow], hash: &'a str, solver: SolverKind) -> impl Iterator<Item = &'a RunRow> + 'a {
    rows.iter()
        .filter(move |r| r.config_hash == hash && r.solver == solver && r.error.is_empty())
}

pub fn run(cfg: &BenchConfig, out: &Path, timing: bool) -> CliResult<BenchSummary> {
    cfg.validate()?;
    let configs = cfg.instance_configs();
    let hashes: Vec<String> = configs.iter().map(|c| cfg.cell_hash(c)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    let solver_threads = cfg
        .solver_threads
        .unwrap_or(if pool.current_num_threads() > 1 { 1 } else { 0 });

    let jobs: Vec<Job> = configs
        .iter()
        .zip(&hashes)
        .enumerate()
        .flat_map(|(ci, (c, h))| {
            cfg.seeds.iter().enumerate().map(move |(si, &seed)| Job {
                instance: InstanceConfig { seed, ..c.clone() },
                hash: h,
                keep_trace: ci == 0 && si == 0,
            })
        })
        .collect();
    let results: Vec<JobResult> =
        pool.install(|| jobs.par_iter().map(|j| run_job(cfg, j, solver_threads, timing)).collect());

    fs::create_dir_all(out)?;
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for r in results {
        rows.extend(r.rows);
        traces.extend(r.traces);
    }
    write_csv(&out.join("runs.csv"), &rows)?;

    // Convergence curves: gap to the best objective any solver reached.
    let first = &jobs[0];
    let best = traces
        .iter()
        .flat_map(|(_, t)| t.iter().map(|r| r.objective))
        .chain(
            rows.iter()
                .filter(|r| r.config_hash == first.hash && r.seed == first.instance.seed)
                .map(|r| r.final_objective),
        )
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    for (solver, trace) in &traces {
        write_csv(
            &out.join(format!("fig1_{solver}.csv")),
            trace.iter().map(|t| Fig1Row {
                version: jadce::VERSION,
                config_hash: first.hash,
                seed: first.instance.seed,
                iter: t.iter,
                objective: t.objective,
                objective_gap: t.objective - best,
                max_step: t.max_step,
                kkt_residual: t.kkt_residual,
            }),
        )?;
    }

    let mut fig2 = Vec::new();
    let mut table1 = Vec::new();
    let mut aggregates = Vec::new();
    for (c, h) in configs.iter().zip(&hashes) {
        for &solver in &cfg.solvers {
            let ok: Vec<&RunRow> = ok_rows(&rows, h, solver).collect();
            let first_rep: Vec<&RunRow> = ok.iter().copied().filter(|r| r.rep == 0).collect();
            let iters: Vec<f64> = first_rep.iter().map(|r| r.iterations as f64).collect();
            let converged = first_rep.iter().filter(|r| r.status == "converged").count();
            let it = summarize(&iters);
            fig2.push(Fig2Row {
                version: jadce::VERSION,
                config_hash: h,
                devices: c.devices,
                antennas: c.antennas,
                sequence_length: c.sequence_length,
                active: c.active,
                solver,
                runs: first_rep.len(),
                converged,
                median_iterations: it.map_or(f64::NAN, |s| s.median),
                mean_iterations: it.map_or(f64::NAN, |s| s.mean),
                iqr_iterations: it.map_or(f64::NAN, |s| s.iqr),
            });
            let mean = |f: fn(&RunRow) -> f64| {
                if ok.is_empty() {
                    0.0
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            let (t, pa, co) = (mean(|r| r.total_ms), mean(|r| r.parallel_ms), mean(|r| r.consensus_ms));
            let (pp, cp) = split_pct(pa, co);
            table1.push(Table1Row {
                version: jadce::VERSION,
                config_hash: h,
                devices: c.devices,
                antennas: c.antennas,
                sequence_length: c.sequence_length,
                active: c.active,
                solver,
                runs: ok.len(),
                total_ms: t,
                parallel_ms: pa,
                consensus_ms: co,
                parallel_pct: pp,
                consensus_pct: cp,
            });
            let collect = |f: fn(&RunRow) -> f64| summarize(&first_rep.iter().map(|r| f(r)).collect::<Vec<_>>());
            aggregates.push(Aggregate {
                config_hash: h.clone(),
                devices: c.devices,
                antennas: c.antennas,
                sequence_length: c.sequence_length,
                active: c.active,
                solver,
                runs: first_rep.len(),
                converged,
                iterations: it,
                ms_per_iteration: summarize(&ok.iter().map(|r| r.total_ms).collect::<Vec<_>>()),
                final_objective: collect(|r| r.final_objective),
                missed_detection_rate: collect(|r| r.missed_detection_rate),
                false_alarm_rate: collect(|r| r.false_alarm_rate),
            });
        }
    }
    write_csv(&out.join("fig2.csv"), &fig2)?;
    write_csv(&out.join("table1.csv"), &table1)?;
    let report = Report {
        version: jadce::VERSION,
        config: cfg,
        aggregates,
        runs: &rows,
    };
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;

    Ok(BenchSummary {
        runs: rows.len(),
        failed: rows.iter().filter(|r| !r.error.is_empty()).count(),
        configs: configs.len(),
    })
}
