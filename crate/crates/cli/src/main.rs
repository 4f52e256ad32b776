use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use ergodic_footprint::config::{FootprintConfig, Problem, RunConfig};
use ergodic_footprint::infomap::reconstruct;
use ergodic_footprint::io::{iteration_log_csv, read_trajectory_csv, trajectory_csv, Summary};
use ergodic_footprint::optimize::solve;
use ergodic_footprint::Error;

#[derive(Parser)]
#[command(name = "ergoplan", about = "Ergodic coverage planning with dynamic sensor footprints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepVar {
    Horizon,
    #[value(name = "k_h")]
    KH,
    #[value(name = "fixed_radius")]
    FixedRadius,
    Mode,
}

#[derive(Subcommand)]
enum Command {
    /// Plan trajectories and write all artifacts.
    Plan {
        #[command(flatten)]
        common: Common,
    },
    /// One run per value plus a comparison CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        var: SweepVar,
        /// Comma-separated values; modes are dynamic, fixed:R or point.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Recompute metrics for a trajectory CSV.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trajectory: PathBuf,
    },
    Version,
}

/// Exit code and message.
struct Failure(u8, String);

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure(2, e.to_string())
}

fn solver(e: Error) -> Failure {
    match e {
        Error::SolverFailure(_) => Failure(3, e.to_string()),
        other => Failure(3, format!("run failed: {other}")),
    }
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), Failure> {
    let mut cfg = RunConfig::from_file(&common.config).map_err(|e| usage(format!("{}: {e}", common.config.display())))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let base = common.config.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn out_dir(common: &Common, cfg: &RunConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn config_hash(cfg: &RunConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn pgm_resolution(dim: usize) -> Vec<usize> {
    if dim == 2 {
        vec![100, 100]
    } else {
        vec![32; dim]
    }
}

/// Solves one configuration and writes its artifacts. Returns the final ergodicity.
fn run_plan(cfg: &RunConfig, base: &Path, out: &Path) -> Result<f64, Failure> {
    let Problem { spec, .. } = cfg.build(base).map_err(usage)?;
    let start = Instant::now();
    let result = solve(&spec).map_err(solver)?;
    let wall_time = start.elapsed().as_secs_f64();
    let assessed = spec.assess(&result.trajectories).map_err(solver)?;

    let write = |name: &str, text: String| -> Result<(), Failure> {
        fs::write(out.join(name), text).map_err(|e| Failure(3, format!("writing {name}: {e}")))
    };
    fs::create_dir_all(out).map_err(|e| Failure(3, format!("creating {}: {e}", out.display())))?;
    write("trajectory.csv", trajectory_csv(&result.trajectories))?;
    write("iterations.csv", iteration_log_csv(&result.log))?;
    let res = pgm_resolution(spec.basis.dim());
    let stats = reconstruct(&assessed.coeffs, &spec.basis, &res).map_err(solver)?;
    write("time_average.pgm", stats.to_pgm())?;
    let map = reconstruct(&spec.phi, &spec.basis, &res).map_err(solver)?;
    write("map.pgm", map.to_pgm())?;
    let summary = Summary {
        ergodicity: assessed.ergodicity,
        point_ergodicity: assessed.point_ergodicity,
        control_cost: assessed.control_cost,
        violation: assessed.violation,
        converged: result.converged,
        wall_time,
        seed: cfg.seed,
        config_hash: config_hash(cfg),
        config: serde_json::to_value(cfg).expect("config serializes"),
    };
    write("summary.json", serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n")?;
    Ok(assessed.ergodicity)
}

fn current_k_h(f: &FootprintConfig) -> f64 {
    match *f {
        FootprintConfig::AltitudeDisk { k_h, .. } | FootprintConfig::Cone { k_h, .. } => k_h,
        _ => 0.25,
    }
}

fn samples(f: &FootprintConfig) -> Option<usize> {
    match *f {
        FootprintConfig::AltitudeDisk { samples, .. } | FootprintConfig::FixedDisk { samples, .. } => samples,
        _ => None,
    }
}

fn apply_sweep(cfg: &mut RunConfig, var: SweepVar, value: &str) -> Result<(), String> {
    let num = || value.parse::<f64>().map_err(|_| format!("not a number: {value:?}"));
    match var {
        SweepVar::Horizon => cfg.dynamics.horizon = num()?,
        SweepVar::KH => match &mut cfg.footprint {
            FootprintConfig::AltitudeDisk { k_h, .. } | FootprintConfig::Cone { k_h, .. } => *k_h = num()?,
            _ => return Err("k_h sweeps need an altitude_disk or cone footprint".into()),
        },
        SweepVar::FixedRadius => {
            cfg.footprint = FootprintConfig::FixedDisk {
                radius: num()?,
                samples: samples(&cfg.footprint),
            }
        }
        SweepVar::Mode => {
            let m = samples(&cfg.footprint);
            cfg.footprint = match value {
                "dynamic" => FootprintConfig::AltitudeDisk {
                    k_h: current_k_h(&cfg.footprint),
                    samples: m,
                },
                "point" => FootprintConfig::Point,
                "fixed" => FootprintConfig::FixedDisk { radius: 0.05, samples: m },
                v => match v.strip_prefix("fixed:").map(str::parse::<f64>) {
                    Some(Ok(radius)) => FootprintConfig::FixedDisk { radius, samples: m },
                    _ => return Err(format!("unknown mode {value:?}; use dynamic, fixed:R or point")),
                },
            }
        }
    }
    cfg.check().map_err(|e| e.to_string())
}

fn dir_name(var: SweepVar, value: &str) -> String {
    let var = match var {
        SweepVar::Horizon => "horizon",
        SweepVar::KH => "k_h",
        SweepVar::FixedRadius => "fixed_radius",
        SweepVar::Mode => "mode",
    };
    let clean: String = value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    format!("{var}_{clean}")
}

fn run_sweep(common: &Common, var: SweepVar, values: &[String]) -> Result<(), Failure> {
    let (cfg, base) = load(common)?;
    let out = out_dir(common, &cfg);
    let mut configs = Vec::new();
    for v in values {
        let mut c = cfg.clone();
        apply_sweep(&mut c, var, v).map_err(|e| usage(format!("sweep value {v:?}: {e}")))?;
        configs.push(c);
    }
    fs::create_dir_all(&out).map_err(|e| Failure(3, format!("creating {}: {e}", out.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads.unwrap_or(0))
        .build()
        .map_err(usage)?;
    let results: Vec<Result<f64, Failure>> = pool.install(|| {
        configs
            .par_iter()
            .zip(values)
            .map(|(c, v)| run_plan(c, &base, &out.join(dir_name(var, v))))
            .collect()
    });
    let mut csv = String::from("value,final_ergodicity\n");
    let mut worst = 0u8;
    for (v, r) in values.iter().zip(&results) {
        match r {
            Ok(e) => csv.push_str(&format!("{v},{e}\n")),
            Err(Failure(code, msg)) => {
                eprintln!("run {v}: {msg}");
                worst = worst.max(*code);
                csv.push_str(&format!("{v},\n"));
            }
        }
    }
    fs::write(out.join("comparison.csv"), csv).map_err(|e| Failure(3, format!("writing comparison.csv: {e}")))?;
    if worst > 0 {
        return Err(Failure(worst, "some sweep runs failed".into()));
    }
    Ok(())
}

fn run_eval(config: &Path, trajectory: &Path) -> Result<(), Failure> {
    let cfg = RunConfig::from_file(config).map_err(|e| usage(format!("{}: {e}", config.display())))?;
    let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
    let Problem { spec, .. } = cfg.build(&base).map_err(usage)?;
    let text = fs::read_to_string(trajectory).map_err(|e| usage(format!("{}: {e}", trajectory.display())))?;
    let trajs = read_trajectory_csv(&text).map_err(|e| usage(format!("{}: {e}", trajectory.display())))?;
    let assessed = spec.assess(&trajs).map_err(usage)?;
    println!("{}", serde_json::to_string_pretty(&assessed).expect("assessment serializes"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Plan { common } => load(common).and_then(|(cfg, base)| {
            let out = out_dir(common, &cfg);
            run_plan(&cfg, &base, &out).map(|e| println!("ergodicity {e}"))
        }),
        Command::Sweep { common, var, values } => run_sweep(common, *var, values),
        Command::Eval { config, trajectory } => run_eval(config, trajectory),
        Command::Version => {
            println!("ergoplan {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
