//! Output-mode statistics: mergeable moment accumulators, the gain/phase
//! optimized entanglement and EPR-steering products, and the sampled
//! fidelity against the two-mode squeezed target.
//!
//! Samples are flattened to the real quadrature vector
//! `x = [Re A₁, Im A₁, Re A₂, Im A₂]`. Wigner samples estimate symmetric
//! moments directly, so the vacuum variance of each entry is `¼`.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Cov4<T> = [[T; 4]; 4];
pub type OutputSample<T> = [Complex<T>; 2];

pub const DEFAULT_BLOCKS: usize = 100;
pub const BOOTSTRAP_REPLICATES: usize = 200;
const BOOTSTRAP_SEED: u64 = 0x5eed_b007;

pub const GAIN_LIMIT: f64 = 10.0;
const GAIN_GRID: usize = 81;
const PHASE_GRID: usize = 64;
const GOLDEN_ITERS: usize = 60;

#[inline]
pub fn flatten<T: Scalar>(s: &OutputSample<T>) -> [T; 4] {
    [s[0].re, s[0].im, s[1].re, s[1].im]
}

/// Index of the block holding trajectory `index` out of `total` when the
/// trajectories are cut into `n_blocks` contiguous runs.
#[inline]
pub fn block_of(index: u64, total: u64, n_blocks: usize) -> usize {
    ((index as u128 * n_blocks as u128) / total.max(1) as u128) as usize
}

/// Raw first and second moment sums over a set of samples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments<T> {
    count: u64,
    sum: [T; 4],
    outer: Cov4<T>,
}

impl<T: Scalar> Moments<T> {
    pub fn push(&mut self, x: [T; 4]) {
        self.count += 1;
        for i in 0..4 {
            self.sum[i] += x[i];
            for j in i..4 {
                self.outer[i][j] += x[i] * x[j];
            }
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        for i in 0..4 {
            self.sum[i] += other.sum[i];
            for j in i..4 {
                self.outer[i][j] += other.outer[i][j];
            }
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> [T; 4] {
        let n = T::from_u64(self.count.max(1)).unwrap();
        self.sum.map(|s| s / n)
    }

    /// Unbiased sample covariance. Needs at least two samples.
    pub fn covariance(&self) -> Result<Cov4<T>> {
        if self.count < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                have: self.count,
            });
        }
        let n = T::from_u64(self.count).unwrap();
        let mean = self.mean();
        let mut c = [[T::zero(); 4]; 4];
        for i in 0..4 {
            for j in i..4 {
                let v = (self.outer[i][j] - n * mean[i] * mean[j]) / (n - T::one());
                c[i][j] = v;
                c[j][i] = v;
            }
        }
        Ok(c)
    }
}

/// Running moment record split into contiguous trajectory blocks so that
/// block-level errors can be formed. Merging is blockwise addition.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAccumulator<T> {
    total: Moments<T>,
    blocks: Vec<Moments<T>>,
}

impl<T: Scalar> MomentAccumulator<T> {
    pub fn new(n_blocks: usize) -> Self {
        Self {
            total: Moments::default(),
            blocks: vec![Moments::default(); n_blocks.max(1)],
        }
    }

    /// Assigns samples to `n_blocks` contiguous blocks in order.
    pub fn from_samples(samples: &[OutputSample<T>], n_blocks: usize) -> Self {
        let mut acc = Self::new(n_blocks);
        let total = samples.len() as u64;
        for (i, s) in samples.iter().enumerate() {
            acc.push(block_of(i as u64, total, acc.blocks.len()), s);
        }
        acc
    }

    /// Builds an accumulator from already-filled blocks (in block order).
    pub fn from_blocks(blocks: Vec<Moments<T>>) -> Self {
        let mut total = Moments::default();
        for b in &blocks {
            total.merge(b);
        }
        let blocks = if blocks.is_empty() { vec![Moments::default()] } else { blocks };
        Self { total, blocks }
    }

    pub fn push(&mut self, block: usize, sample: &OutputSample<T>) {
        let x = flatten(sample);
        self.total.push(x);
        self.blocks[block].push(x);
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.blocks.len(), other.blocks.len(), "block layouts differ");
        self.total.merge(&other.total);
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            a.merge(b);
        }
    }

    pub fn count(&self) -> u64 {
        self.total.count
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Moments<T>] {
        &self.blocks
    }

    pub fn totals(&self) -> &Moments<T> {
        &self.total
    }

    pub fn covariance(&self) -> Result<Cov4<T>> {
        self.total.covariance()
    }

    /// Standard error of each covariance entry from the spread of the
    /// per-block covariances. Blocks with fewer than two samples are skipped.
    pub fn covariance_std_errors(&self) -> Result<Cov4<T>> {
        let per_block: Vec<Cov4<T>> = self
            .blocks
            .iter()
            .filter_map(|b| b.covariance().ok())
            .collect();
        if per_block.len() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                have: per_block.len() as u64,
            });
        }
        let m = T::from_usize(per_block.len()).unwrap();
        let mut se = [[T::zero(); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mean = per_block.iter().map(|c| c[i][j]).fold(T::zero(), |a, b| a + b) / m;
                let var = per_block
                    .iter()
                    .map(|c| (c[i][j] - mean).powi(2))
                    .fold(T::zero(), |a, b| a + b)
                    / (m - T::one());
                se[i][j] = (var / m).sqrt();
            }
        }
        Ok(se)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combination {
    /// `X₁ − G X₂^θ`
    MinusX,
    /// `P₁ + G P₂^θ`
    PlusP,
}

/// Which mode is inferred from which in the steering product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `EPR_{1|2}`: mode 1 quadratures inferred from rotated mode-2 quadratures.
    OneGivenTwo,
    /// `EPR_{2|1}`: roles swapped.
    TwoGivenOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// `4 Δ(X₁−GX₂^θ) Δ(P₁+GP₂^θ) / (1+G²)`
    Entanglement,
    /// `4 Δ(X₁−GX₂^θ) Δ(P₁+GP₂^θ)` in the given direction.
    Steering(Direction),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionResult<T> {
    pub value: T,
    pub gain: T,
    /// In `[0, π)`; the sign of `gain` absorbs a further rotation by `π`.
    pub phase: T,
    pub std_error: T,
}

fn coefficients<T: Scalar>(combo: Combination, theta: T, gain: T) -> [T; 4] {
    let (s, c) = theta.sin_cos();
    match combo {
        Combination::MinusX => [T::one(), T::zero(), -gain * c, -gain * s],
        Combination::PlusP => [T::zero(), T::one(), -gain * s, gain * c],
    }
}

fn permuted<T: Scalar>(cov: &Cov4<T>, dir: Direction) -> Cov4<T> {
    match dir {
        Direction::OneGivenTwo => *cov,
        Direction::TwoGivenOne => {
            let p = [2, 3, 0, 1];
            let mut out = [[T::zero(); 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    out[i][j] = cov[p[i]][p[j]];
                }
            }
            out
        }
    }
}

/// Variance of a linear combination `cᵀ V c`.
#[inline]
fn quadratic_form<T: Scalar>(cov: &Cov4<T>, c: &[T; 4]) -> T {
    let mut acc = T::zero();
    for i in 0..4 {
        for j in 0..4 {
            acc += c[i] * cov[i][j] * c[j];
        }
    }
    acc
}

/// Variance of `X₁ − G X₂^θ` or `P₁ + G P₂^θ` on an explicit covariance.
pub fn combination_variance<T: Scalar>(cov: &Cov4<T>, theta: T, gain: T, combo: Combination) -> T {
    quadratic_form(cov, &coefficients(combo, theta, gain))
}

/// Sampled variance of `X₁ − G X₂^θ` (or `P₁ + G P₂^θ`).
pub fn quad_variance<T: Scalar>(
    acc: &MomentAccumulator<T>,
    theta: T,
    gain: T,
    combo: Combination,
) -> Result<T> {
    Ok(combination_variance(&acc.covariance()?, theta, gain, combo))
}

/// Criterion product at fixed `(θ, G)`; variances clamp at zero.
pub fn criterion_value<T: Scalar>(cov: &Cov4<T>, kind: Criterion, theta: T, gain: T) -> T {
    let cov = match kind {
        Criterion::Entanglement => *cov,
        Criterion::Steering(dir) => permuted(cov, dir),
    };
    let vx = combination_variance(&cov, theta, gain, Combination::MinusX).max(T::zero());
    let vp = combination_variance(&cov, theta, gain, Combination::PlusP).max(T::zero());
    let prod = T::lit(4.0) * (vx * vp).sqrt();
    match kind {
        Criterion::Entanglement => prod / (T::one() + gain * gain),
        Criterion::Steering(_) => prod,
    }
}

/// Golden-section minimization of `f` on `[a, b]`; returns `(x, f(x))`.
fn golden<T: Scalar>(mut a: T, mut b: T, f: impl Fn(T) -> T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_ITERS {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Coarse scan on a uniform grid followed by golden-section refinement
/// inside the bracket around the best grid point.
fn scan_then_refine<T: Scalar>(lo: T, hi: T, n: usize, periodic: bool, f: impl Fn(T) -> T) -> (T, T) {
    let steps = if periodic { n } else { n - 1 };
    let h = (hi - lo) / T::from_usize(steps).unwrap();
    let mut best = (lo, f(lo));
    let mut best_i = 0;
    for i in 1..n {
        let x = lo + h * T::from_usize(i).unwrap();
        let v = f(x);
        if v < best.1 {
            best = (x, v);
            best_i = i;
        }
    }
    let (a, b) = if periodic {
        (best.0 - h, best.0 + h)
    } else {
        let a = if best_i == 0 { lo } else { best.0 - h };
        let b = if best_i == n - 1 { hi } else { best.0 + h };
        (a, b)
    };
    let refined = golden(a, b, &f);
    if refined.1 <= best.1 {
        refined
    } else {
        best
    }
}

/// Minimizes a criterion over `θ ∈ [0, π)` and `G ∈ [−10, 10]`.
pub fn optimize_criterion<T: Scalar>(cov: &Cov4<T>, kind: Criterion) -> Result<CriterionResult<T>> {
    check_covariance(cov)?;
    let limit = T::lit(GAIN_LIMIT);
    let best_gain = |theta: T| {
        scan_then_refine(-limit, limit, GAIN_GRID, false, |g| criterion_value(cov, kind, theta, g))
    };
    let (theta, value) = scan_then_refine(T::zero(), T::PI(), PHASE_GRID, true, |t| best_gain(t).1);
    let (gain, _) = best_gain(theta);
    // fold θ into [0, π), flipping the gain sign for every half turn
    let turns = (theta / T::PI()).floor();
    let mut phase = theta - turns * T::PI();
    let mut gain = if turns.to_i64().unwrap_or(0) % 2 == 0 { gain } else { -gain };
    if phase >= T::PI() {
        phase -= T::PI();
        gain = -gain;
    }
    Ok(CriterionResult {
        value,
        gain,
        phase,
        std_error: T::nan(),
    })
}

fn check_covariance<T: Scalar>(cov: &Cov4<T>) -> Result<()> {
    for row in cov {
        for v in row {
            if !v.is_finite() {
                return Err(Error::DegenerateCovariance("non-finite entry".into()));
            }
        }
    }
    for (i, name) in ["Re A1", "Im A1", "Re A2", "Im A2"].iter().enumerate() {
        if !(cov[i][i] > T::zero()) {
            return Err(Error::DegenerateCovariance(format!("zero variance in {name}")));
        }
    }
    Ok(())
}

/// Standard error of `statistic` by resampling whole blocks with
/// replacement. Deterministic: the resampling stream is fixed.
pub fn block_bootstrap<T: Scalar>(
    acc: &MomentAccumulator<T>,
    replicates: usize,
    statistic: impl Fn(&Cov4<T>) -> Result<T>,
) -> T {
    let blocks = acc.blocks();
    let b = blocks.len();
    if b < 2 || replicates < 2 {
        return T::nan();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut values = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        let mut m = Moments::default();
        for _ in 0..b {
            m.merge(&blocks[rng.random_range(0..b)]);
        }
        if let Ok(v) = m.covariance().and_then(|c| statistic(&c)) {
            if v.is_finite() {
                values.push(v);
            }
        }
    }
    if values.len() < 2 {
        return T::nan();
    }
    let n = T::from_usize(values.len()).unwrap();
    let mean = values.iter().fold(T::zero(), |a, &v| a + v) / n;
    let var = values.iter().fold(T::zero(), |a, &v| a + (v - mean).powi(2)) / (n - T::one());
    var.sqrt()
}

pub const MIN_CRITERION_SAMPLES: u64 = 100;

/// Optimized criterion on the accumulated samples, with a block-bootstrap
/// standard error that re-runs the optimization on every replicate.
pub fn evaluate_criterion<T: Scalar>(acc: &MomentAccumulator<T>, kind: Criterion) -> Result<CriterionResult<T>> {
    if acc.count() < MIN_CRITERION_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_CRITERION_SAMPLES,
            have: acc.count(),
        });
    }
    let mut result = optimize_criterion(&acc.covariance()?, kind)?;
    result.std_error = block_bootstrap(acc, BOOTSTRAP_REPLICATES, |c| {
        optimize_criterion(c, kind).map(|r| r.value)
    });
    Ok(result)
}

pub fn delta_ent<T: Scalar>(acc: &MomentAccumulator<T>) -> Result<CriterionResult<T>> {
    evaluate_criterion(acc, Criterion::Entanglement)
}

pub fn epr_steering<T: Scalar>(acc: &MomentAccumulator<T>, direction: Direction) -> Result<CriterionResult<T>> {
    evaluate_criterion(acc, Criterion::Steering(direction))
}

/// Wigner density of the two-mode squeezed target at `(A₁, A₂)`:
/// `(4/π²) exp[−2(|α₊|² e^{−2r} + |α₋|² e^{2r})]`, `α± = (A₁ ± A₂*)/√2`.
pub fn w_psi<T: Scalar>(a1: Complex<T>, a2: Complex<T>, r: T) -> T {
    let s = T::FRAC_1_SQRT_2();
    let plus = (a1 + a2.conj()) * s;
    let minus = (a1 - a2.conj()) * s;
    let two_r = r + r;
    let exponent = -T::lit(2.0) * (plus.norm_sqr() * (-two_r).exp() + minus.norm_sqr() * two_r.exp());
    T::lit(4.0) / (T::PI() * T::PI()) * exponent.exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScalarBlock<T> {
    pub count: u64,
    pub sum: T,
}

/// Block sums of the fidelity weight `π² W_ψ(A₁, A₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityAccumulator<T> {
    r: T,
    blocks: Vec<ScalarBlock<T>>,
}

impl<T: Scalar> FidelityAccumulator<T> {
    pub fn new(r: T, n_blocks: usize) -> Self {
        Self {
            r,
            blocks: vec![ScalarBlock::default(); n_blocks.max(1)],
        }
    }

    pub fn from_blocks(r: T, blocks: Vec<ScalarBlock<T>>) -> Self {
        let blocks = if blocks.is_empty() { vec![ScalarBlock::default()] } else { blocks };
        Self { r, blocks }
    }

    #[inline]
    pub fn weight(r: T, sample: &OutputSample<T>) -> T {
        T::PI() * T::PI() * w_psi(sample[0], sample[1], r)
    }

    pub fn push(&mut self, block: usize, sample: &OutputSample<T>) {
        let w = Self::weight(self.r, sample);
        let b = &mut self.blocks[block];
        b.count += 1;
        b.sum += w;
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.blocks.len(), other.blocks.len(), "block layouts differ");
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            a.count += b.count;
            a.sum += b.sum;
        }
    }

    pub fn count(&self) -> u64 {
        self.blocks.iter().map(|b| b.count).sum()
    }

    /// Mean weight and the standard error from the spread of block means.
    pub fn estimate(&self) -> (T, T) {
        let n = self.count();
        if n == 0 {
            return (T::nan(), T::nan());
        }
        let total: T = self.blocks.iter().fold(T::zero(), |a, b| a + b.sum);
        let mean = total / T::from_u64(n).unwrap();
        let means: Vec<T> = self
            .blocks
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| b.sum / T::from_u64(b.count).unwrap())
            .collect();
        if means.len() < 2 {
            return (mean, T::nan());
        }
        let m = T::from_usize(means.len()).unwrap();
        let var = means.iter().fold(T::zero(), |a, &x| a + (x - mean).powi(2)) / (m - T::one());
        (mean, (var / m).sqrt())
    }
}

pub const MIN_FIDELITY_SAMPLES: usize = 10_000;

/// `F = (π²/N) Σ W_ψ(A₁ⁱ, A₂ⁱ)` with its block standard error.
pub fn fidelity_mc<T: Scalar>(samples: &[OutputSample<T>], r: T) -> Result<(T, T)> {
    if samples.len() < MIN_FIDELITY_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_FIDELITY_SAMPLES as u64,
            have: samples.len() as u64,
        });
    }
    let mut acc = FidelityAccumulator::new(r, DEFAULT_BLOCKS);
    let total = samples.len() as u64;
    for (i, s) in samples.iter().enumerate() {
        acc.push(block_of(i as u64, total, DEFAULT_BLOCKS), s);
    }
    Ok(acc.estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_source_pair, sample_vacuum, RngStream};
    use proptest::prelude::*;

    fn vacuum_samples(n: usize, seed: u64) -> Vec<OutputSample<f64>> {
        let mut rng = RngStream::new(seed, 0);
        (0..n).map(|_| [sample_vacuum(&mut rng), sample_vacuum(&mut rng)]).collect()
    }

    fn tmsv_samples(n: usize, r: f64, seed: u64) -> Vec<OutputSample<f64>> {
        let mut rng = RngStream::new(seed, 0);
        (0..n).map(|_| sample_source_pair(r, &mut rng)).collect()
    }

    fn tmsv_cov(r: f64) -> Cov4<f64> {
        let a = (2.0 * r).cosh() / 4.0;
        let s = (2.0 * r).sinh() / 4.0;
        [[a, 0.0, s, 0.0], [0.0, a, 0.0, -s], [s, 0.0, a, 0.0], [0.0, -s, 0.0, a]]
    }

    fn vacuum_cov() -> Cov4<f64> {
        let mut c = [[0.0; 4]; 4];
        for (i, row) in c.iter_mut().enumerate() {
            row[i] = 0.25;
        }
        c
    }

    #[test]
    fn vacuum_quadrature_variances() {
        let samples = vacuum_samples(200_000, 1);
        let acc = MomentAccumulator::from_samples(&samples, DEFAULT_BLOCKS);
        let se = 0.25 * (2.0 / samples.len() as f64).sqrt();
        let v0 = quad_variance(&acc, 0.3, 0.0, Combination::MinusX).unwrap();
        assert!((v0 - 0.25).abs() < 3.0 * se, "{v0}");
        for theta in [0.0, 1.0, 2.5] {
            let v = quad_variance(&acc, theta, 1.0, Combination::MinusX).unwrap();
            assert!((v - 0.5).abs() < 3.0 * 2.0 * se, "{v}");
        }
    }

    #[test]
    fn tmsv_quadrature_variance() {
        let samples = tmsv_samples(200_000, 1.0, 2);
        let acc = MomentAccumulator::from_samples(&samples, DEFAULT_BLOCKS);
        let v = quad_variance(&acc, 0.0, 1.0, Combination::MinusX).unwrap();
        let target = (-2.0f64).exp() / 2.0;
        let se = target * (2.0 / samples.len() as f64).sqrt();
        assert!((v - target).abs() < 3.0 * se, "{v} vs {target}");
    }

    #[test]
    fn quad_variance_needs_samples() {
        let acc = MomentAccumulator::<f64>::new(4);
        assert!(quad_variance(&acc, 0.0, 1.0, Combination::PlusP).is_err());
        let acc = MomentAccumulator::from_samples(&vacuum_samples(50, 1), 4);
        assert!(matches!(delta_ent(&acc), Err(Error::InsufficientSamples { .. })));
    }

    #[test]
    fn exact_tmsv_criteria() {
        let cov = tmsv_cov(1.0);
        let ent = optimize_criterion(&cov, Criterion::Entanglement).unwrap();
        assert!((ent.value - (-2.0f64).exp()).abs() < 1e-9, "{ent:?}");
        assert!((ent.gain - 1.0).abs() < 1e-4);
        for dir in [Direction::OneGivenTwo, Direction::TwoGivenOne] {
            let epr = optimize_criterion(&cov, Criterion::Steering(dir)).unwrap();
            assert!((epr.value - 1.0 / 2f64.cosh()).abs() < 1e-9, "{epr:?}");
            assert!((epr.gain - 2f64.tanh()).abs() < 1e-4);
        }
    }

    #[test]
    fn exact_vacuum_criteria() {
        let cov = vacuum_cov();
        let ent = optimize_criterion(&cov, Criterion::Entanglement).unwrap();
        assert!((ent.value - 1.0).abs() < 1e-12);
        let epr = optimize_criterion(&cov, Criterion::Steering(Direction::OneGivenTwo)).unwrap();
        assert!((epr.value - 1.0).abs() < 1e-12);
        assert!(epr.gain.abs() < 1e-6);
    }

    #[test]
    fn degenerate_covariance_is_rejected() {
        let cov = [[0.0; 4]; 4];
        assert!(matches!(
            optimize_criterion(&cov, Criterion::Entanglement),
            Err(Error::DegenerateCovariance(_))
        ));
    }

    #[test]
    fn sampled_tmsv_criteria() {
        let samples = tmsv_samples(100_000, 1.0, 3);
        let acc = MomentAccumulator::from_samples(&samples, DEFAULT_BLOCKS);
        let ent = delta_ent(&acc).unwrap();
        assert!(ent.std_error > 0.0);
        assert!((ent.value - 0.135_335_283_236_612_7).abs() < 3.0 * ent.std_error + 1e-3, "{ent:?}");
        let epr = epr_steering(&acc, Direction::OneGivenTwo).unwrap();
        assert!((epr.value - 0.265_802_228_834_079_7).abs() < 3.0 * epr.std_error + 1e-3, "{epr:?}");
    }

    #[test]
    fn vacuum_threshold() {
        let samples = vacuum_samples(100_000, 4);
        let acc = MomentAccumulator::from_samples(&samples, DEFAULT_BLOCKS);
        let ent = delta_ent(&acc).unwrap();
        assert!((ent.value - 1.0).abs() < 3.0 * ent.std_error + 2e-3, "{ent:?}");
        for dir in [Direction::OneGivenTwo, Direction::TwoGivenOne] {
            let epr = epr_steering(&acc, dir).unwrap();
            assert!(epr.value > 1.0 - 3.0 * epr.std_error - 2e-3, "{epr:?}");
        }
    }

    #[test]
    fn w_psi_examples() {
        let z = Complex::new(0.0f64, 0.0);
        for r in [0.0, 0.5, 2.0] {
            assert!((w_psi(z, z, r) - 0.405_284_734_569_351_1).abs() < 1e-15);
        }
        let one = Complex::new(1.0f64, 0.0);
        assert!((w_psi(one, one, 0.0) - 0.007_423_048_845_488_717).abs() < 1e-15);
        let big = Complex::new(100.0, 0.0);
        // α₋ = √2·100 with e^{2r} weighting: underflows cleanly
        assert_eq!(w_psi(big, -big, 3.0), 0.0);
    }

    #[test]
    fn fidelity_examples() {
        let tmsv = tmsv_samples(200_000, 1.0, 5);
        let (f, se) = fidelity_mc(&tmsv, 1.0).unwrap();
        assert!((f - 1.0).abs() < 3.0 * se, "{f} ± {se}");

        let vac = vacuum_samples(200_000, 6);
        let (f, se) = fidelity_mc(&vac, 0.0).unwrap();
        assert!((f - 1.0).abs() < 3.0 * se, "{f} ± {se}");

        let (f, se) = fidelity_mc(&vac, 1.0).unwrap();
        assert!((f - 0.419_974_341_614_026_1).abs() < 3.0 * se, "{f} ± {se}");

        assert!(fidelity_mc(&vac[..100], 1.0).is_err());
    }

    #[test]
    fn merge_matches_concatenation() {
        let a = tmsv_samples(3000, 0.7, 7);
        let mut left = MomentAccumulator::new(3);
        let mut right = MomentAccumulator::new(3);
        let mut all = MomentAccumulator::new(3);
        for (i, s) in a.iter().enumerate() {
            let b = i % 3;
            if i < 1700 {
                left.push(b, s);
            } else {
                right.push(b, s);
            }
            all.push(b, s);
        }
        left.merge(&right);
        let c1 = left.covariance().unwrap();
        let c2 = all.covariance().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((c1[i][j] - c2[i][j]).abs() <= 1e-12 * c2[i][j].abs().max(1.0));
            }
        }
        assert_eq!(left.count(), all.count());
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let acc = MomentAccumulator::from_samples(&tmsv_samples(20_000, 1.0, 8), DEFAULT_BLOCKS);
        let a = delta_ent(&acc).unwrap();
        let b = delta_ent(&acc).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn mode_two_phase_is_absorbed(phi in 0.0f64..std::f64::consts::TAU, r in 0.2f64..1.5) {
            let samples = tmsv_samples(5_000, r, 9);
            let rot = Complex::from_polar(1.0, phi);
            let rotated: Vec<_> = samples.iter().map(|s| [s[0], s[1] * rot]).collect();
            let c1 = MomentAccumulator::from_samples(&samples, 10).covariance().unwrap();
            let c2 = MomentAccumulator::from_samples(&rotated, 10).covariance().unwrap();
            for kind in [Criterion::Entanglement, Criterion::Steering(Direction::OneGivenTwo)] {
                let v1 = optimize_criterion(&c1, kind).unwrap().value;
                let v2 = optimize_criterion(&c2, kind).unwrap().value;
                prop_assert!((v1 - v2).abs() < 1e-9 * v1, "{} vs {}", v1, v2);
            }
        }

        #[test]
        fn global_phase_is_absorbed_for_symmetric_states(
            phi in 0.0f64..std::f64::consts::TAU,
            r in 0.0f64..1.5,
            loss in 0.0f64..0.9,
        ) {
            // phase-insensitive marginals: loss mixes in vacuum, correlations shrink
            let mut cov = tmsv_cov(r);
            for (i, row) in cov.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v *= 1.0 - loss;
                    if i == j {
                        *v += 0.25 * loss;
                    }
                }
            }
            let (s, c) = phi.sin_cos();
            let mut rot = [[0.0; 4]; 4];
            for m in 0..2 {
                rot[2 * m][2 * m] = c;
                rot[2 * m][2 * m + 1] = -s;
                rot[2 * m + 1][2 * m] = s;
                rot[2 * m + 1][2 * m + 1] = c;
            }
            let mut rotated = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    for k in 0..4 {
                        for l in 0..4 {
                            rotated[i][j] += rot[i][k] * cov[k][l] * rot[j][l];
                        }
                    }
                }
            }
            for kind in [Criterion::Entanglement, Criterion::Steering(Direction::TwoGivenOne)] {
                let v1 = optimize_criterion(&cov, kind).unwrap().value;
                let v2 = optimize_criterion(&rotated, kind).unwrap().value;
                prop_assert!((v1 - v2).abs() < 1e-9 * v1, "{} vs {}", v1, v2);
            }
        }

        #[test]
        fn merge_order_is_irrelevant(split_a in 1usize..900, split_b in 1usize..900) {
            let samples = tmsv_samples(1000, 0.5, 10);
            let (lo, hi) = (split_a.min(split_b), split_a.max(split_b));
            let part = |range: std::ops::Range<usize>| {
                let mut acc = MomentAccumulator::new(4);
                for i in range { acc.push(i % 4, &samples[i]); }
                acc
            };
            let (a, b, c) = (part(0..lo), part(lo..hi), part(hi..1000));
            let mut ab_c = a.clone();
            ab_c.merge(&b);
            ab_c.merge(&c);
            let mut c_ba = c.clone();
            c_ba.merge(&b);
            c_ba.merge(&a);
            let x = ab_c.covariance().unwrap();
            let y = c_ba.covariance().unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert!((x[i][j] - y[i][j]).abs() <= 1e-12 * x[i][j].abs().max(1e-3));
                }
            }
        }

        #[test]
        fn covariance_is_psd(r in 0.0f64..2.0, seed in 0u64..1000) {
            let acc = MomentAccumulator::from_samples(&tmsv_samples(500, r, seed), 5);
            let c = acc.covariance().unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert_eq!(c[i][j], c[j][i]);
                }
            }
            // random direction quadratic forms are non-negative
            let mut rng = RngStream::new(seed, 1);
            for _ in 0..20 {
                let v: [f64; 4] = std::array::from_fn(|_| f64::standard_normal(&mut rng));
                prop_assert!(quadratic_form(&c, &v) >= -1e-12);
            }
        }
    }
}
