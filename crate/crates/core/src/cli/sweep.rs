//! Grid sweep over squeezing, storage time and bath occupation.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use super::config::SweepConfig;
use super::output::ResultRow;
use crate::batch::{simulate, summarize, BatchConfig};
use crate::error::Result;
use crate::estimators::CriterionResult;
use crate::integrator::TrajectoryEngine;
use crate::model::{ProtocolParams, PulseSchedule};
use crate::oracle::{analytic_delta_ent, analytic_epr, criterion_from_covariance, gaussian_fidelity, propagate_covariance};

/// One grid point in sweep order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub r: f64,
    pub tau_s: f64,
    pub n_bath: f64,
}

/// Rows ordered by squeezing, then storage time, then bath occupation.
pub fn grid(cfg: &SweepConfig) -> Vec<GridPoint> {
    let mut out = Vec::new();
    for &r in &cfg.squeezing {
        for &tau_s in &cfg.storage_times {
            for &n_bath in &cfg.n_bath {
                out.push(GridPoint {
                    index: out.len(),
                    r,
                    tau_s,
                    n_bath,
                });
            }
        }
    }
    out
}

/// SplitMix64 finalizer; decorrelates the per-point seeds.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn value_and_error(r: &Result<CriterionResult<f64>>) -> (f64, f64) {
    match r {
        Ok(c) => (c.value, c.std_error),
        Err(_) => (f64::NAN, f64::NAN),
    }
}

/// Evaluates one grid point in the configured mode.
pub fn run_point(cfg: &SweepConfig, point: &GridPoint) -> Result<ResultRow> {
    let start = Instant::now();
    let params = ProtocolParams::<f64>::reference_defaults(point.r).with_thermal(point.n_bath);
    let schedule = PulseSchedule::new(cfg.tau1, point.tau_s, cfg.steps)?;
    let seed = point_seed(cfg.seed, point.index);

    let mut row = ResultRow {
        n_bath: point.n_bath,
        tau_s: point.tau_s,
        r: point.r,
        delta_ent_analytic: analytic_delta_ent(point.r, params.gamma_m, point.tau_s, point.n_bath),
        epr_analytic: analytic_epr(point.r, params.gamma_m, point.tau_s, point.n_bath),
        g_opt: f64::NAN,
        theta_opt: f64::NAN,
        seed,
        ..ResultRow::default()
    };

    if cfg.mode.runs_oracle() {
        let cov = propagate_covariance(&params, &schedule)?;
        match criterion_from_covariance(&cov) {
            Ok(c) => {
                row.delta_ent_oracle = Some(c.delta_ent.value);
                row.g_opt = c.delta_ent.gain;
                row.theta_opt = c.delta_ent.phase;
            }
            Err(_) => row.delta_ent_oracle = Some(f64::NAN),
        }
        row.fidelity_oracle = Some(gaussian_fidelity(&cov.output_block(), point.r).unwrap_or(f64::NAN));
    }

    if cfg.mode.runs_mc() {
        let engine = TrajectoryEngine::new(params, schedule)?;
        let out = simulate(&engine, &BatchConfig::new(cfg.trajectories, seed))?;
        let summary = summarize(&out);
        row.delta_ent_mc = Some(value_and_error(&summary.delta_ent));
        row.epr12 = Some(value_and_error(&summary.epr_12));
        row.epr21 = Some(value_and_error(&summary.epr_21));
        row.fidelity_mc = Some(summary.fidelity);
        row.n_traj = cfg.trajectories;
        row.rejected_traj = summary.rejected;
        match &summary.delta_ent {
            Ok(c) => {
                row.g_opt = c.gain;
                row.theta_opt = c.phase;
            }
            Err(_) => {
                row.g_opt = f64::NAN;
                row.theta_opt = f64::NAN;
            }
        }
    }
    row.wall_time = start.elapsed().as_secs_f64();
    Ok(row)
}

/// Rows completed so far and, if the sweep stopped early, why.
#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<ResultRow>,
    pub failure: Option<String>,
}

/// Runs every grid point on a pool of `cfg.workers` threads (default: all
/// available). Errors and worker panics stop the sweep; completed rows are
/// kept.
pub fn run_sweep(cfg: &SweepConfig, mut on_row: impl FnMut(&ResultRow)) -> SweepOutcome {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            return SweepOutcome {
                rows: Vec::new(),
                failure: Some(format!("could not start worker pool: {e}")),
            }
        }
    };
    let mut rows = Vec::new();
    for point in grid(cfg) {
        let attempt = catch_unwind(AssertUnwindSafe(|| pool.install(|| run_point(cfg, &point))));
        let failure = match attempt {
            Ok(Ok(row)) => {
                on_row(&row);
                rows.push(row);
                continue;
            }
            Ok(Err(e)) => format!("grid point r={}, tau_s={}, n_bath={}: {e}", point.r, point.tau_s, point.n_bath),
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "unknown panic".into());
                format!("worker panicked at r={}, tau_s={}, n_bath={}: {msg}", point.r, point.tau_s, point.n_bath)
            }
        };
        return SweepOutcome {
            rows,
            failure: Some(failure),
        };
    }
    SweepOutcome { rows, failure: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::parse_config;

    #[test]
    fn grid_order_and_seeds() {
        let cfg = parse_config("seed = 3\nsqueezing = [0.5, 1.0]\nstorage_times = [16.3, 40.8]\nn_bath = [0, 1, 2]").unwrap();
        let g = grid(&cfg);
        assert_eq!(g.len(), 12);
        assert_eq!((g[0].r, g[0].tau_s, g[0].n_bath), (0.5, 16.3, 0.0));
        assert_eq!((g[1].r, g[1].tau_s, g[1].n_bath), (0.5, 16.3, 1.0));
        assert_eq!((g[3].r, g[3].tau_s, g[3].n_bath), (0.5, 40.8, 0.0));
        let seeds: std::collections::HashSet<_> = g.iter().map(|p| point_seed(3, p.index)).collect();
        assert_eq!(seeds.len(), 12);
    }

    #[test]
    fn oracle_mode_leaves_mc_cells_empty() {
        let cfg = parse_config("seed = 3\nmode = \"oracle\"\nstorage_times = [16.3]\nn_bath = [0.0]").unwrap();
        let out = run_sweep(&cfg, |_| {});
        assert!(out.failure.is_none());
        let row = &out.rows[0];
        assert!(row.delta_ent_mc.is_none() && row.fidelity_mc.is_none());
        let de = row.delta_ent_oracle.unwrap();
        assert!((de - row.delta_ent_analytic).abs() < 0.01, "{de}");
        assert!(row.wall_time < 1.0, "{}", row.wall_time);
    }

    #[test]
    fn runtime_errors_stop_the_sweep() {
        let mut cfg = parse_config("seed = 3\nmode = \"oracle\"\nstorage_times = [16.3]\nn_bath = [0.0, 1.0]").unwrap();
        cfg.steps = 5;
        let out = run_sweep(&cfg, |_| {});
        assert!(out.rows.is_empty());
        assert!(out.failure.unwrap().contains("n_steps"));
    }
}
