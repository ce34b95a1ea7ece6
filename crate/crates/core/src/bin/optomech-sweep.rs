use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use pulsed_optomech::cli::config::MIN_MC_TRAJECTORIES;
use pulsed_optomech::cli::{parse_config, run_sweep, write_outputs, Mode};

/// Sweep entanglement, steering and fidelity of the pulsed transfer
/// protocol over squeezing, storage time and bath occupation.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// TOML sweep configuration.
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(String))]
    mode: Option<String>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    /// Trajectories per grid point.
    #[arg(long)]
    trajectories: Option<u64>,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(m) = args.mode {
        match m.parse::<Mode>() {
            Ok(m) => cfg.mode = m,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        }
    }
    if let Some(w) = args.workers {
        if w == 0 {
            eprintln!("--workers must be >= 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        cfg.workers = Some(w);
    }
    if let Some(d) = args.out_dir {
        cfg.out_dir = d;
    }
    if let Some(s) = args.steps {
        if s < 100 {
            eprintln!("--steps must be >= 100");
            return ExitCode::from(EXIT_CONFIG);
        }
        cfg.steps = s;
    }
    if let Some(t) = args.trajectories {
        cfg.trajectories = t;
    }
    if cfg.mode.runs_mc() && cfg.trajectories < MIN_MC_TRAJECTORIES {
        eprintln!("trajectories must be >= {MIN_MC_TRAJECTORIES} when Monte Carlo runs");
        return ExitCode::from(EXIT_CONFIG);
    }

    let outcome = run_sweep(&cfg, |row| {
        eprintln!(
            "r={} tau_s={} n_bath={:.4}: delta_ent mc={} oracle={} analytic={:.6} ({:.1}s)",
            row.r,
            row.tau_s,
            row.n_bath,
            row.delta_ent_mc.map_or("-".into(), |(v, e)| format!("{v:.6}±{e:.6}")),
            row.delta_ent_oracle.map_or("-".into(), |v| format!("{v:.6}")),
            row.delta_ent_analytic,
            row.wall_time,
        );
        if row.fidelity_noisy() == Some(true) {
            eprintln!("  warning: fidelity relative error exceeds 10%");
        }
    });

    if !outcome.rows.is_empty() {
        if let Err(e) = write_outputs(&outcome.rows, &cfg.out_dir) {
            eprintln!("cannot write results to {}: {e}", cfg.out_dir.display());
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    match outcome.failure {
        Some(msg) => {
            eprintln!("sweep aborted: {msg}");
            if !outcome.rows.is_empty() {
                eprintln!("partial results written to {}", cfg.out_dir.display());
            }
            ExitCode::from(EXIT_RUNTIME)
        }
        None => {
            eprintln!("results written to {}", cfg.out_dir.display());
            ExitCode::SUCCESS
        }
    }
}
