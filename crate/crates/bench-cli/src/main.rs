mod bench;
mod config;
mod error;
mod stats;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use jadce::instance::generate;
use jadce::metrics::{detect, nmse};
use jadce::solvers::write_trace_csv;
use jadce::{InstanceConfig, JadceInstance, Reduction, SolverKind, SolverOptions, Status};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "jadce", version, about = "Generate, solve and benchmark JADCE group-Lasso instances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random instance and write it to disk.
    Gen(GenArgs),
    /// Run one solver on an instance file.
    Solve(SolveArgs),
    /// Run a benchmark sweep described by a TOML file.
    Bench(BenchArgs),
    /// Print the header and summary statistics of an instance file.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct GenArgs {
    /// TOML file with instance fields (top level or under [instance]).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    devices: Option<usize>,
    #[arg(long)]
    antennas: Option<usize>,
    #[arg(long)]
    sequence_length: Option<usize>,
    #[arg(long)]
    active: Option<usize>,
    #[arg(long)]
    noise_variance: Option<f64>,
    /// Output file; defaults to instance-<seed>.jadce in the output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the JSON mirror instead of the binary format.
    #[arg(long)]
    json: bool,
    #[arg(long, env = "JADCE_OUTPUT_DIR", default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file (binary, or JSON mirror when ending in .json).
    instance: PathBuf,
    #[arg(long, default_value = "aladin")]
    solver: SolverKind,
    #[arg(long, default_value_t = 0.5)]
    gamma_scale: f64,
    #[arg(long, default_value_t = 0.8)]
    rho_scale: f64,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 1)]
    trace_every: usize,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Fixed reduction order, bitwise reproducible across thread counts.
    #[arg(long)]
    deterministic: bool,
    /// Detection threshold as a fraction of the largest block norm.
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
    /// Write zeros in the trace timing columns.
    #[arg(long)]
    no_timing: bool,
    /// Output directory for <stem>-<solver>-trace.csv and -summary.json.
    #[arg(long, env = "JADCE_OUTPUT_DIR", default_value = ".")]
    output: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    config: PathBuf,
    /// Overrides output_dir from the config.
    #[arg(long, env = "JADCE_OUTPUT_DIR")]
    output: Option<PathBuf>,
    /// Overrides threads from the config.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    deterministic: bool,
    /// Write zeros in every timing column.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct InspectArgs {
    instance: PathBuf,
    /// Print the summary as JSON.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("jadce: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn cmd_gen(a: GenArgs) -> CliResult<ExitCode> {
    let mut cfg = match &a.config {
        Some(p) => config::load_instance_config(p)?,
        None => InstanceConfig::paper(0),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.devices {
        cfg.devices = v;
    }
    if let Some(v) = a.antennas {
        cfg.antennas = v;
    }
    if let Some(v) = a.sequence_length {
        cfg.sequence_length = v;
    }
    if let Some(v) = a.active {
        cfg.active = v;
    }
    if let Some(v) = a.noise_variance {
        cfg.noise_variance = v;
    }
    cfg.validate()?;
    let inst = generate(&cfg)?;
    let path = a.output.unwrap_or_else(|| {
        let ext = if a.json { "json" } else { "jadce" };
        a.output_dir.join(format!("instance-{}.{ext}", cfg.seed))
    });
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let bytes = if a.json {
        inst.to_json()?.into_bytes()
    } else {
        inst.to_bytes()?
    };
    fs::write(&path, &bytes)?;
    println!(
        "wrote {}: L={} M={} N={} K={} seed={} sha256={}",
        path.display(),
        cfg.sequence_length,
        cfg.antennas,
        cfg.devices,
        cfg.active,
        cfg.seed,
        hex::encode(Sha256::digest(&bytes))
    );
    Ok(ExitCode::SUCCESS)
}

fn load_instance(path: &Path) -> CliResult<JadceInstance> {
    let read = |p: &Path| {
        if p.extension().is_some_and(|e| e == "json") {
            JadceInstance::from_json(&fs::read_to_string(p)?)
        } else {
            JadceInstance::load(p)
        }
    };
    read(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct Detection {
    missed_detection_rate: f64,
    false_alarm_rate: f64,
    estimated_active: Vec<usize>,
}

#[derive(Serialize)]
struct Timing {
    wall_ms: f64,
    median_total_ms: f64,
    median_parallel_ms: f64,
    median_consensus_ms: f64,
    parallel_pct: f64,
    consensus_pct: f64,
}

#[derive(Serialize)]
struct SolveSummary {
    version: &'static str,
    instance: String,
    seed: u64,
    solver: SolverKind,
    status: Status,
    iterations: usize,
    final_objective: f64,
    kkt_residual: f64,
    kkt_residual_scaled: f64,
    gamma: f64,
    gamma_max: f64,
    rho: f64,
    tolerance: f64,
    reduction: Reduction,
    threads: usize,
    detection: Detection,
    nmse: f64,
    timing: Timing,
}

fn cmd_solve(a: SolveArgs) -> CliResult<ExitCode> {
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        return Err(CliError::Config(format!("threshold must lie in (0, 1), got {}", a.threshold)));
    }
    let opts = SolverOptions {
        rho_scale: a.rho_scale,
        tolerance: a.tol,
        max_iterations: a.max_iter,
        trace_every: a.trace_every,
        threads: a.threads,
        reduction: Reduction::from_deterministic(a.deterministic),
    };
    opts.validate()?;
    let inst = load_instance(&a.instance)?;
    let p = match inst.to_problem(a.gamma_scale) {
        Ok(p) => p,
        Err(jadce::Error::Degenerate(msg)) => {
            eprintln!("jadce: degenerate problem, nothing to solve: {msg}");
            return Ok(ExitCode::from(1));
        }
        Err(e) => return Err(e.into()),
    };
    let start = Instant::now();
    let report = jadce::solve(&p, a.solver, &opts)?;
    let wall = start.elapsed();

    fs::create_dir_all(&a.output)?;
    let stem = a
        .instance
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    let trace_path = a.output.join(format!("{stem}-{}-trace.csv", a.solver));
    let mut w = BufWriter::new(File::create(&trace_path)?);
    write_trace_csv(&report.trace, &mut w, !a.no_timing)?;
    w.flush()?;

    let d = detect(&report.final_x, a.threshold, &inst.true_active);
    let (total, par, cons) = report.median_phase_ms(4).unwrap_or((0.0, 0.0, 0.0));
    let (pp, cp) = stats::split_pct(par, cons);
    let timing = if a.no_timing {
        Timing {
            wall_ms: 0.0,
            median_total_ms: 0.0,
            median_parallel_ms: 0.0,
            median_consensus_ms: 0.0,
            parallel_pct: 0.0,
            consensus_pct: 0.0,
        }
    } else {
        Timing {
            wall_ms: wall.as_secs_f64() * 1e3,
            median_total_ms: total,
            median_parallel_ms: par,
            median_consensus_ms: cons,
            parallel_pct: pp,
            consensus_pct: cp,
        }
    };
    let summary = SolveSummary {
        version: jadce::VERSION,
        instance: a.instance.display().to_string(),
        seed: inst.config.seed,
        solver: a.solver,
        status: report.status,
        iterations: report.iterations,
        final_objective: report.final_objective,
        kkt_residual: report.kkt_residual,
        kkt_residual_scaled: report.kkt_residual / p.gamma.max(1.0),
        gamma: p.gamma,
        gamma_max: p.gamma_max,
        rho: a.rho_scale * p.gamma,
        tolerance: a.tol,
        reduction: opts.reduction,
        threads: a.threads,
        detection: Detection {
            missed_detection_rate: d.missed_detection_rate,
            false_alarm_rate: d.false_alarm_rate,
            estimated_active: d.estimated_active,
        },
        nmse: nmse(&report.final_x, &inst)?,
        timing,
    };
    let summary_path = a.output.join(format!("{stem}-{}-summary.json", a.solver));
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;

    println!(
        "{} {}: {} after {} iterations, objective {}, kkt {:.3e}, missed {} false alarm {}",
        a.solver,
        a.instance.display(),
        report.status,
        report.iterations,
        summary.final_objective,
        summary.kkt_residual,
        summary.detection.missed_detection_rate,
        summary.detection.false_alarm_rate
    );
    if report.status == Status::Degenerate {
        eprintln!("jadce: solver hit non-finite values; see {}", summary_path.display());
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(a: BenchArgs) -> CliResult<ExitCode> {
    let mut cfg = config::BenchConfig::load(&a.config)?;
    if let Some(t) = a.threads {
        cfg.threads = t;
    }
    if a.deterministic {
        cfg.deterministic = true;
    }
    let out = a
        .output
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("bench-out"));
    let summary = bench::run(&cfg, &out, !a.no_timing)?;
    println!(
        "bench: {} runs ({} failed) over {} configs x {} seeds, results in {}",
        summary.runs,
        summary.failed,
        summary.configs,
        cfg.seeds.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct InspectSummary {
    config: InstanceConfig,
    format_version: u32,
    rows: usize,
    cols: usize,
    true_active: Vec<usize>,
    gamma_max: f64,
    signal_energy: f64,
    received_energy: f64,
}

fn cmd_inspect(a: InspectArgs) -> CliResult<ExitCode> {
    let inst = load_instance(&a.instance)?;
    let op = inst.operator()?;
    let b = jadce::model::vec_pair(&inst.y);
    let s = InspectSummary {
        config: inst.config.clone(),
        format_version: jadce::instance::FORMAT_VERSION,
        rows: op.rows(),
        cols: op.cols(),
        true_active: inst.true_active.clone(),
        gamma_max: jadce::instance::gamma_max(&op, &b)?,
        signal_energy: inst.signal().frobenius_norm_sq(),
        received_energy: inst.y.frobenius_norm_sq(),
    };
    if a.json {
        println!("{}", serde_json::to_string_pretty(&s)?);
        return Ok(ExitCode::SUCCESS);
    }
    let c = &s.config;
    println!("file           {}", a.instance.display());
    println!("format         version {}", s.format_version);
    println!("dimensions     L={} M={} N={} K={}", c.sequence_length, c.antennas, c.devices, c.active);
    println!("variances      signature {} channel {} noise {}", c.signature_variance, c.channel_variance, c.noise_variance);
    println!("seed           {}", c.seed);
    println!("operator       {} x {}", s.rows, s.cols);
    println!("gamma_max      {}", s.gamma_max);
    println!("|SH|_F^2       {}", s.signal_energy);
    println!("|Y|_F^2        {}", s.received_energy);
    println!("active         {:?}", s.true_active);
    Ok(ExitCode::SUCCESS)
}
