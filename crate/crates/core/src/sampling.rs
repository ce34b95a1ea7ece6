//! Wigner-distributed initial conditions and per-step noise increments.
//!
//! Everything uses symmetric ordering: a vacuum amplitude has `⟨|z|²⟩ = ½`
//! and each real quadrature has variance `¼`.

use num_complex::Complex;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Result};
use crate::model::ProtocolParams;
use crate::scalar::Scalar;

/// Per-trajectory random stream. Distinct `(seed, stream_id)` pairs address
/// disjoint ChaCha keystreams, so trajectories can be generated in any order
/// on any thread and still reproduce bit for bit.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Amplitudes of one trajectory: source pair, cavity pair, mechanical pair
/// and the two output-mode accumulators.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajectoryState<T> {
    pub alpha: [Complex<T>; 2],
    pub delta: [Complex<T>; 2],
    pub beta: [Complex<T>; 2],
    pub a_out: [Complex<T>; 2],
}

impl<T: Scalar> TrajectoryState<T> {
    pub fn is_finite(&self) -> bool {
        self.alpha
            .iter()
            .chain(&self.delta)
            .chain(&self.beta)
            .chain(&self.a_out)
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// One step's Wiener increments: `xi[0..2]` are the optical vacuum inputs of
/// the two channels, `xi[2..4]` the mechanical bath noises.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseIncrements<T> {
    pub xi: [Complex<T>; 4],
}

#[inline]
fn gaussian<T: Scalar, R: RngCore + ?Sized>(sd: T, rng: &mut R) -> Complex<T> {
    let re = T::standard_normal(rng);
    let im = T::standard_normal(rng);
    Complex::new(sd * re, sd * im)
}

/// Maps four unit normals `[ξx⁺, ξy⁺, ξx⁻, ξy⁻]` to a two-mode squeezed pair:
/// `α± = (ξx± + iξy±)e^{±r}/2`, `α₁ = (α₊ + α₋)/√2`, `α₂ = (α₊* − α₋*)/√2`.
pub fn source_pair_from_normals<T: Scalar>(r: T, normals: [T; 4]) -> [Complex<T>; 2] {
    let half = T::lit(0.5);
    let plus = Complex::new(normals[0], normals[1]) * (r.exp() * half);
    let minus = Complex::new(normals[2], normals[3]) * ((-r).exp() * half);
    let s = T::FRAC_1_SQRT_2();
    [(plus + minus) * s, (plus.conj() - minus.conj()) * s]
}

pub fn sample_source_pair<T: Scalar, R: RngCore + ?Sized>(r: T, rng: &mut R) -> [Complex<T>; 2] {
    let normals = [
        T::standard_normal(rng),
        T::standard_normal(rng),
        T::standard_normal(rng),
        T::standard_normal(rng),
    ];
    source_pair_from_normals(r, normals)
}

pub fn sample_vacuum<T: Scalar, R: RngCore + ?Sized>(rng: &mut R) -> Complex<T> {
    gaussian(T::lit(0.5), rng)
}

/// Thermal Wigner sample with `⟨|β|²⟩ = n0 + ½`.
pub fn sample_thermal<T: Scalar, R: RngCore + ?Sized>(n0: T, rng: &mut R) -> Result<Complex<T>> {
    if !(n0.is_finite() && n0 >= T::zero()) {
        return Err(domain(format!("thermal occupation must be >= 0, got {n0}")));
    }
    let sd = ((n0 + T::lit(0.5)) * T::lit(0.5)).sqrt();
    Ok(gaussian(sd, rng))
}

/// Increments over a step of length `dt`: real and imaginary parts each have
/// variance `dt/4`, so `⟨ξ_k ξ_l*⟩ = ½ δ_kl dt`.
pub fn draw_noise<T: Scalar, R: RngCore + ?Sized>(dt: T, rng: &mut R) -> NoiseIncrements<T> {
    let sd = dt.sqrt() * T::lit(0.5);
    NoiseIncrements {
        xi: [
            gaussian(sd, rng),
            gaussian(sd, rng),
            gaussian(sd, rng),
            gaussian(sd, rng),
        ],
    }
}

/// Draws the full initial state: entangled source, vacuum cavities, thermal
/// mechanics at `n_mech_init`, empty output accumulators.
pub fn initial_state<T: Scalar, R: RngCore + ?Sized>(
    p: &ProtocolParams<T>,
    rng: &mut R,
) -> Result<TrajectoryState<T>> {
    if !(p.squeezing_r.is_finite() && p.squeezing_r >= T::zero()) {
        return Err(domain(format!("squeezing must be >= 0, got {}", p.squeezing_r)));
    }
    let alpha = sample_source_pair(p.squeezing_r, rng);
    let delta = [sample_vacuum(rng), sample_vacuum(rng)];
    let beta = [
        sample_thermal(p.n_mech_init, rng)?,
        sample_thermal(p.n_mech_init, rng)?,
    ];
    Ok(TrajectoryState {
        alpha,
        delta,
        beta,
        a_out: [Complex::default(); 2],
    })
}
