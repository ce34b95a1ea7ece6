//! Parallel trajectory batches with results independent of the worker count.
//!
//! Trajectory `i` always uses RNG stream `i` and lands in block
//! `⌊i·B/N⌋`; workers process whole blocks and the per-block accumulators
//! are assembled in block order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    block_of, delta_ent, epr_steering, flatten, CriterionResult, Direction, FidelityAccumulator,
    MomentAccumulator, Moments, OutputSample, ScalarBlock, DEFAULT_BLOCKS,
};
use crate::integrator::TrajectoryEngine;
use crate::sampling::RngStream;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchConfig {
    pub trajectories: u64,
    pub seed: u64,
    pub n_blocks: usize,
}

impl BatchConfig {
    pub fn new(trajectories: u64, seed: u64) -> Self {
        Self {
            trajectories,
            seed,
            n_blocks: DEFAULT_BLOCKS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchOutput<T> {
    pub moments: MomentAccumulator<T>,
    pub fidelity: FidelityAccumulator<T>,
    /// Trajectories dropped for non-finite values.
    pub rejected: u64,
    pub first_rejection: Option<Error>,
}

struct BlockResult<T> {
    moments: Moments<T>,
    fidelity: ScalarBlock<T>,
    rejected: u64,
    first_rejection: Option<Error>,
}

fn block_range(block: usize, total: u64, n_blocks: usize) -> std::ops::Range<u64> {
    // inverse of `block_of`: first index i with ⌊i·B/N⌋ ≥ b
    let first = |b: usize| ((b as u128 * total as u128).div_ceil(n_blocks as u128)) as u64;
    first(block)..first(block + 1)
}

fn run_block<T: Scalar>(
    engine: &TrajectoryEngine<T>,
    cfg: &BatchConfig,
    block: usize,
    mut sink: impl FnMut(u64, &OutputSample<T>),
) -> BlockResult<T> {
    let r = engine.params().squeezing_r;
    let mut out = BlockResult {
        moments: Moments::default(),
        fidelity: ScalarBlock::default(),
        rejected: 0,
        first_rejection: None,
    };
    for i in block_range(block, cfg.trajectories, cfg.n_blocks) {
        debug_assert_eq!(block_of(i, cfg.trajectories, cfg.n_blocks), block);
        let mut rng = RngStream::new(cfg.seed, i);
        match engine.run_trajectory(&mut rng) {
            Ok(sample) => {
                out.moments.push(flatten(&sample));
                out.fidelity.count += 1;
                out.fidelity.sum += FidelityAccumulator::weight(r, &sample);
                sink(i, &sample);
            }
            Err(e) => {
                out.rejected += 1;
                out.first_rejection.get_or_insert(e);
            }
        }
    }
    out
}

fn assemble<T: Scalar>(r: T, results: Vec<BlockResult<T>>) -> BatchOutput<T> {
    let mut rejected = 0;
    let mut first_rejection = None;
    let mut moments = Vec::with_capacity(results.len());
    let mut fidelity = Vec::with_capacity(results.len());
    for b in results {
        rejected += b.rejected;
        if first_rejection.is_none() {
            first_rejection = b.first_rejection;
        }
        moments.push(b.moments);
        fidelity.push(b.fidelity);
    }
    BatchOutput {
        moments: MomentAccumulator::from_blocks(moments),
        fidelity: FidelityAccumulator::from_blocks(r, fidelity),
        rejected,
        first_rejection,
    }
}

/// Runs `cfg.trajectories` trajectories on the current rayon pool.
pub fn simulate<T: Scalar>(engine: &TrajectoryEngine<T>, cfg: &BatchConfig) -> Result<BatchOutput<T>> {
    validate(cfg)?;
    let results: Vec<_> = (0..cfg.n_blocks)
        .into_par_iter()
        .map(|b| run_block(engine, cfg, b, |_, _| {}))
        .collect();
    Ok(assemble(engine.params().squeezing_r, results))
}

/// Single-threaded run that also returns every accepted sample, in
/// trajectory order.
pub fn simulate_collect<T: Scalar>(
    engine: &TrajectoryEngine<T>,
    cfg: &BatchConfig,
) -> Result<(BatchOutput<T>, Vec<OutputSample<T>>)> {
    validate(cfg)?;
    let mut samples = Vec::with_capacity(cfg.trajectories as usize);
    let results: Vec<_> = (0..cfg.n_blocks)
        .map(|b| run_block(engine, cfg, b, |_, s| samples.push(*s)))
        .collect();
    Ok((assemble(engine.params().squeezing_r, results), samples))
}

fn validate(cfg: &BatchConfig) -> Result<()> {
    if cfg.n_blocks == 0 {
        return Err(crate::error::domain("n_blocks must be >= 1"));
    }
    if cfg.trajectories < cfg.n_blocks as u64 {
        return Err(Error::InsufficientSamples {
            needed: cfg.n_blocks as u64,
            have: cfg.trajectories,
        });
    }
    Ok(())
}

/// Estimator outputs of one batch; failed estimators are `Err`.
#[derive(Debug)]
pub struct McSummary<T> {
    pub delta_ent: Result<CriterionResult<T>>,
    pub epr_12: Result<CriterionResult<T>>,
    pub epr_21: Result<CriterionResult<T>>,
    pub fidelity: (T, T),
    pub accepted: u64,
    pub rejected: u64,
}

pub fn summarize<T: Scalar>(out: &BatchOutput<T>) -> McSummary<T> {
    McSummary {
        delta_ent: delta_ent(&out.moments),
        epr_12: epr_steering(&out.moments, Direction::OneGivenTwo),
        epr_21: epr_steering(&out.moments, Direction::TwoGivenOne),
        fidelity: out.fidelity.estimate(),
        accepted: out.moments.count(),
        rejected: out.rejected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{default_schedule, ProtocolParams};

    #[test]
    fn block_ranges_partition_indices() {
        for (total, blocks) in [(1000u64, 100usize), (1003, 100), (7, 3), (100, 100)] {
            let mut next = 0;
            for b in 0..blocks {
                let r = block_range(b, total, blocks);
                assert_eq!(r.start, next);
                for i in r.clone() {
                    assert_eq!(block_of(i, total, blocks), b);
                }
                next = r.end;
            }
            assert_eq!(next, total);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let p = ProtocolParams::reference_defaults(1.0);
        let s = default_schedule(16.3, 300).unwrap();
        let engine = TrajectoryEngine::new(p, s).unwrap();
        let cfg = BatchConfig { trajectories: 400, seed: 11, n_blocks: 20 };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate(&engine, &cfg).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.moments, b.moments);
        assert_eq!(a.fidelity, b.fidelity);
        let (c, samples) = simulate_collect(&engine, &cfg).unwrap();
        assert_eq!(a.moments, c.moments);
        assert_eq!(samples.len(), 400);
        assert_eq!(a.rejected, 0);
    }

    #[test]
    fn too_few_trajectories() {
        let p = ProtocolParams::reference_defaults(1.0);
        let s = default_schedule(16.3, 300).unwrap();
        let engine = TrajectoryEngine::new(p, s).unwrap();
        assert!(simulate(&engine, &BatchConfig::new(10, 1)).is_err());
    }
}
