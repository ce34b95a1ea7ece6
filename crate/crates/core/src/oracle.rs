//! Sampling-free references: the closed-form storage-decoherence predictions
//! and exact second-moment transport of the full linear system.
//!
//! The covariance is carried over 16 real coordinates, the real and
//! imaginary parts of `(α₁, α₂, δ₁, δ₂, β₁, β₂, A₁, A₂)` in that order, and
//! obeys `V̇ = F V + V Fᵀ + Q`. A complex drift coefficient `c` becomes the
//! real block `[[Re c, −Im c], [Im c, Re c]]`; each complex Wiener increment
//! carries `¼ dτ` per real part, so `Q = ¼ (b_ξ b_ξᵀ + b_η b_ηᵀ) ⊗ I₂` per
//! channel, with `b_ξ = (√(2κ), −√2, 0, u)` and `b_η = (0, 0, σ_m, 0)`.

use crate::error::{Error, Result};
use crate::estimators::{optimize_criterion, Cov4, Criterion, CriterionResult, Direction};
use crate::integrator::mech_noise_amplitude;
use crate::linalg::{cholesky, determinant};
use crate::model::{ProtocolParams, PulseSchedule};
use crate::pulses::{coupling_unchecked, kappa, ReadoutMode};
use crate::scalar::Scalar;

const DIM: usize = 16;
const PSD_SHIFT: f64 = 1e-10;

/// `Δ_ent = b e^{−2r} + (1−b)(1+2n̄)` with `b = e^{−2γ_m τ_s}`.
pub fn analytic_delta_ent<T: Scalar>(r: T, gamma_m: T, tau_s: T, n_bath: T) -> T {
    let two = T::lit(2.0);
    let b = (-two * gamma_m * tau_s).exp();
    b * (-two * r).exp() + (T::one() - b) * (T::one() + two * n_bath)
}

/// `EPR = (2ab(1−b)c + b² + c²(1−b)²) / (ab + (1−b)c)` with `a = cosh 2r`,
/// `b = e^{−2γ_m τ_s}`, `c = 1+2n̄`.
pub fn analytic_epr<T: Scalar>(r: T, gamma_m: T, tau_s: T, n_bath: T) -> T {
    let two = T::lit(2.0);
    let a = (two * r).cosh();
    let b = (-two * gamma_m * tau_s).exp();
    let c = T::one() + two * n_bath;
    let nb = T::one() - b;
    (two * a * b * nb * c + b * b + c * c * nb * nb) / (a * b + nb * c)
}

/// Complex state components, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Source,
    Cavity,
    Mechanics,
    Output,
}

/// Real coordinate of a component's real (`imag = false`) or imaginary part.
pub const fn real_index(component: Component, channel: usize, imag: bool) -> usize {
    let var = match component {
        Component::Source => 0,
        Component::Cavity => 1,
        Component::Mechanics => 2,
        Component::Output => 3,
    };
    2 * (2 * var + channel) + imag as usize
}

/// Symmetric-ordered covariance of all 16 real coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadCovariance<T> {
    m: Vec<T>,
}

impl<T: Scalar> QuadCovariance<T> {
    /// Exact initial covariance: two-mode squeezed source, vacuum cavities,
    /// thermal mechanics and empty output accumulators.
    pub fn initial(p: &ProtocolParams<T>) -> Self {
        let mut m = vec![T::zero(); DIM * DIM];
        let quarter = T::lit(0.25);
        let two_r = p.squeezing_r + p.squeezing_r;
        let diag = two_r.cosh() * quarter;
        let off = two_r.sinh() * quarter;
        let thermal = (p.n_mech_init + T::lit(0.5)) * T::lit(0.5);
        for k in 0..2 {
            for im in [false, true] {
                let a = real_index(Component::Source, k, im);
                m[a * DIM + a] = diag;
                let d = real_index(Component::Cavity, k, im);
                m[d * DIM + d] = quarter;
                let b = real_index(Component::Mechanics, k, im);
                m[b * DIM + b] = thermal;
            }
        }
        let x1 = real_index(Component::Source, 0, false);
        let x2 = real_index(Component::Source, 1, false);
        let y1 = real_index(Component::Source, 0, true);
        let y2 = real_index(Component::Source, 1, true);
        for (i, j, v) in [(x1, x2, off), (y1, y2, -off)] {
            m[i * DIM + j] = v;
            m[j * DIM + i] = v;
        }
        Self { m }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.m[i * DIM + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.m
    }

    /// Covariance of `(Re A₁, Im A₁, Re A₂, Im A₂)`.
    pub fn output_block(&self) -> Cov4<T> {
        let base = real_index(Component::Output, 0, false);
        let mut out = [[T::zero(); 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(base + i, base + j);
            }
        }
        out
    }

    /// Cholesky of `V + shift·I`; the failing pivot if not positive definite.
    pub fn check_psd(&self, shift: T) -> Result<(), (usize, T)> {
        let mut a = self.m.clone();
        for i in 0..DIM {
            a[i * DIM + i] += shift;
        }
        cholesky(&mut a, DIM)
    }
}

/// Switches for partial models used in limit checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    /// When off, `g ≡ 0`: the cavities never exchange excitations with the
    /// mechanics.
    pub coupling: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { coupling: true }
    }
}

/// Drift and diffusion at one time, both dense `16 × 16`.
fn lyapunov_terms<T: Scalar>(
    tau: T,
    p: &ProtocolParams<T>,
    s: &PulseSchedule<T>,
    readout: &ReadoutMode<T>,
    opts: &OracleOptions,
) -> (Vec<T>, Vec<T>) {
    let zero = T::zero();
    let two = T::lit(2.0);
    let k = kappa(tau, s);
    let root_2k = (two * k).sqrt();
    let g = if opts.coupling { coupling_unchecked(tau, s) } else { zero };
    let w = readout.weight(tau);
    let sigma = mech_noise_amplitude(p);
    let sqrt2 = T::SQRT_2();

    // (row, col, Re c, Im c) over the complex variables α=0, δ=1, β=2, A=3
    let entries = [
        (0, 0, -k, zero),
        (1, 0, sqrt2 * root_2k, zero),
        (1, 1, -T::one(), zero),
        (1, 2, zero, -g),
        (2, 1, zero, -g),
        (2, 2, -p.gamma_m, zero),
        (3, 0, -w * root_2k, zero),
        (3, 1, w * sqrt2, zero),
    ];
    let b_xi = [root_2k, -sqrt2, zero, w];
    let b_eta = [zero, zero, sigma, zero];

    let mut f = vec![zero; DIM * DIM];
    let mut q = vec![zero; DIM * DIM];
    let quarter = T::lit(0.25);
    for ch in 0..2 {
        let at = |var: usize| 2 * (2 * var + ch);
        for &(i, j, re, im) in &entries {
            let (r, c) = (at(i), at(j));
            f[r * DIM + c] += re;
            f[r * DIM + c + 1] -= im;
            f[(r + 1) * DIM + c] += im;
            f[(r + 1) * DIM + c + 1] += re;
        }
        for i in 0..4 {
            for j in 0..4 {
                let v = quarter * (b_xi[i] * b_xi[j] + b_eta[i] * b_eta[j]);
                if v != zero {
                    for part in 0..2 {
                        q[(at(i) + part) * DIM + at(j) + part] += v;
                    }
                }
            }
        }
    }
    (f, q)
}

/// `F V + (F V)ᵀ + Q`.
fn lyapunov_rate<T: Scalar>(f: &[T], q: &[T], v: &[T]) -> Vec<T> {
    let mut fv = [T::zero(); DIM * DIM];
    for i in 0..DIM {
        for k in 0..DIM {
            let a = f[i * DIM + k];
            if a == T::zero() {
                continue;
            }
            for j in 0..DIM {
                fv[i * DIM + j] += a * v[k * DIM + j];
            }
        }
    }
    let mut out = vec![T::zero(); DIM * DIM];
    for i in 0..DIM {
        for j in 0..DIM {
            out[i * DIM + j] = fv[i * DIM + j] + fv[j * DIM + i] + q[i * DIM + j];
        }
    }
    out
}

/// Exact covariance at `τ_max` by classical RK4 on the Lyapunov equation,
/// on the same grid and stage times as the stochastic integrator.
pub fn propagate_covariance<T: Scalar>(p: &ProtocolParams<T>, s: &PulseSchedule<T>) -> Result<QuadCovariance<T>> {
    propagate_covariance_with(p, s, &OracleOptions::default())
}

pub fn propagate_covariance_with<T: Scalar>(
    p: &ProtocolParams<T>,
    s: &PulseSchedule<T>,
    opts: &OracleOptions,
) -> Result<QuadCovariance<T>> {
    p.validate()?;
    let readout = ReadoutMode::for_schedule(s)?;
    let dt = s.dt();
    let half = T::lit(0.5);
    let shift = T::lit(PSD_SHIFT);
    let mut cov = QuadCovariance::initial(p);
    let axpy = |v: &[T], k: &[T], h: T| -> Vec<T> { v.iter().zip(k).map(|(&a, &b)| a + b * h).collect() };

    for n in 0..s.n_steps() {
        let tau = T::from_usize(n).unwrap() * dt;
        let (f0, q0) = lyapunov_terms(tau, p, s, &readout, opts);
        let (fh, qh) = lyapunov_terms(tau + dt * half, p, s, &readout, opts);
        let (f1, q1) = lyapunov_terms(tau + dt, p, s, &readout, opts);
        let v = &cov.m;
        let k1 = lyapunov_rate(&f0, &q0, v);
        let k2 = lyapunov_rate(&fh, &qh, &axpy(v, &k1, dt * half));
        let k3 = lyapunov_rate(&fh, &qh, &axpy(v, &k2, dt * half));
        let k4 = lyapunov_rate(&f1, &q1, &axpy(v, &k3, dt));
        let sixth = dt / T::lit(6.0);
        let two = T::lit(2.0);
        for i in 0..DIM * DIM {
            cov.m[i] += (k1[i] + (k2[i] + k3[i]) * two + k4[i]) * sixth;
        }
        // keep exact symmetry against rounding drift
        for i in 0..DIM {
            for j in i + 1..DIM {
                let avg = (cov.m[i * DIM + j] + cov.m[j * DIM + i]) * half;
                cov.m[i * DIM + j] = avg;
                cov.m[j * DIM + i] = avg;
            }
        }
        if let Err((_, pivot)) = cov.check_psd(shift) {
            return Err(Error::NotPositiveSemidefinite {
                step: n,
                min_pivot: pivot.to_f64_lossy(),
            });
        }
    }
    Ok(cov)
}

/// Criteria evaluated on exact moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCriteria<T> {
    pub delta_ent: CriterionResult<T>,
    pub epr_12: CriterionResult<T>,
    pub epr_21: CriterionResult<T>,
}

/// Same `(G, θ)` optimization as the sampled estimators, on the noiseless
/// output block. Standard errors are zero.
pub fn criterion_from_covariance<T: Scalar>(v: &QuadCovariance<T>) -> Result<OracleCriteria<T>> {
    criteria_from_output_block(&v.output_block())
}

pub fn criteria_from_output_block<T: Scalar>(block: &Cov4<T>) -> Result<OracleCriteria<T>> {
    let exact = |kind| {
        optimize_criterion(block, kind).map(|mut r| {
            r.std_error = T::zero();
            r
        })
    };
    Ok(OracleCriteria {
        delta_ent: exact(Criterion::Entanglement)?,
        epr_12: exact(Criterion::Steering(Direction::OneGivenTwo))?,
        epr_21: exact(Criterion::Steering(Direction::TwoGivenOne))?,
    })
}

/// Quadrature covariance of the two-mode squeezed target.
pub fn tmsv_covariance<T: Scalar>(r: T) -> Cov4<T> {
    let quarter = T::lit(0.25);
    let a = (r + r).cosh() * quarter;
    let s = (r + r).sinh() * quarter;
    let z = T::zero();
    [[a, z, s, z], [z, a, z, -s], [s, z, a, z], [z, -s, z, a]]
}

/// Overlap of a zero-mean Gaussian output state with the squeezed target:
/// `F = 1 / (4 √det(V_ψ + V_ρ))`.
pub fn gaussian_fidelity<T: Scalar>(v_out: &Cov4<T>, r: T) -> Result<T> {
    let target = tmsv_covariance(r);
    let mut sum = [T::zero(); 16];
    for i in 0..4 {
        for j in 0..4 {
            sum[i * 4 + j] = target[i][j] + v_out[i][j];
        }
    }
    let det = determinant(&sum, 4);
    if !(det > T::zero()) || !det.is_finite() {
        return Err(Error::DegenerateCovariance(format!(
            "fidelity overlap matrix has determinant {det}"
        )));
    }
    Ok((T::lit(4.0) * det.sqrt()).recip())
}
