//! Stochastic RK4 integration of the cascaded source → optomechanical cavity
//! chain, with the matched temporal output modes integrated alongside.
//!
//! Per channel `k` the Wigner amplitudes obey
//!
//! ```text
//! α̇ = −κ α + √(2κ) ξ
//! δ̇ = −δ − i g β + 2√κ α − √2 ξ
//! β̇ = −γ_m β − i g δ + √(2γ_m(2n̄+1)) η
//! Ȧ = u(τ−τ₂) [√2 δ − √(2κ) α + ξ]        (only inside the readout window)
//! ```
//!
//! The same optical increment `ξ` drives the source, the cavity and the output
//! record. Each step draws the Wiener increments once and holds `ξ/dτ` fixed
//! across the four RK4 stages; the pulse shapes are re-evaluated at each stage
//! time. Since the system is complex-linear with additive noise, one step is
//! an affine map `y' = M y + n_ξ ξ + n_η η`; [`TrajectoryEngine`] obtains those
//! maps by pushing basis vectors through the same stage code and then reuses
//! them for every trajectory.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::model::{ProtocolParams, PulseSchedule};
use crate::pulses::{coupling_unchecked, kappa, ReadoutMode};
use crate::sampling::{draw_noise, initial_state, NoiseIncrements, RngStream, TrajectoryState};
use crate::scalar::Scalar;

type C<T> = Complex<T>;

/// `[α, δ, β, A]` of a single channel.
type ModeVec<T> = [C<T>; 4];

/// Time derivatives of the six dynamical amplitudes (deterministic part).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriftEvaluation<T> {
    pub alpha: [C<T>; 2],
    pub delta: [C<T>; 2],
    pub beta: [C<T>; 2],
}

/// Pulse-dependent coefficients at one stage time.
#[derive(Debug, Clone, Copy)]
struct Coefficients<T> {
    kappa: T,
    sqrt_2kappa: T,
    g: T,
    weight: T,
    gamma: T,
    mech_noise: T,
}

impl<T: Scalar> Coefficients<T> {
    #[inline]
    fn at(tau: T, p: &ProtocolParams<T>, s: &PulseSchedule<T>, readout: Option<&ReadoutMode<T>>) -> Self {
        let k = kappa(tau, s);
        let two = T::lit(2.0);
        Self {
            kappa: k,
            sqrt_2kappa: (two * k).sqrt(),
            g: coupling_unchecked(tau, s),
            weight: readout.map_or(T::zero(), |m| m.weight(tau)),
            gamma: p.gamma_m,
            mech_noise: mech_noise_amplitude(p),
        }
    }
}

/// `√(2γ_m(2n̄+1))`.
#[inline]
pub fn mech_noise_amplitude<T: Scalar>(p: &ProtocolParams<T>) -> T {
    let two = T::lit(2.0);
    (two * p.gamma_m * (two * p.n_bath + T::one())).sqrt()
}

/// Full stage rate of one channel. `xi` and `eta` are noise *rates*
/// (increment divided by the step).
#[inline]
fn mode_rate<T: Scalar>(y: &ModeVec<T>, c: &Coefficients<T>, xi: C<T>, eta: C<T>) -> ModeVec<T> {
    let [a, d, b, _] = *y;
    let ig = C::new(T::zero(), c.g);
    let sqrt2 = T::SQRT_2();
    // 2√κ = √2 · √(2κ)
    let feed = a * (sqrt2 * c.sqrt_2kappa);
    let da = -a * c.kappa + xi * c.sqrt_2kappa;
    let dd = -d - ig * b + feed - xi * sqrt2;
    let db = -b * c.gamma - ig * d + eta * c.mech_noise;
    let out = d * sqrt2 - a * c.sqrt_2kappa + xi;
    [da, dd, db, out * c.weight]
}

#[inline]
fn axpy<T: Scalar>(y: &ModeVec<T>, k: &ModeVec<T>, h: T) -> ModeVec<T> {
    [y[0] + k[0] * h, y[1] + k[1] * h, y[2] + k[2] * h, y[3] + k[3] * h]
}

/// One RK4 step of one channel with the noise drive held constant.
fn mode_rk4_step<T: Scalar>(
    y: &ModeVec<T>,
    stages: &[Coefficients<T>; 3],
    dt: T,
    xi: C<T>,
    eta: C<T>,
) -> ModeVec<T> {
    let half = T::lit(0.5);
    let xi_rate = xi / dt;
    let eta_rate = eta / dt;
    let k1 = mode_rate(y, &stages[0], xi_rate, eta_rate);
    let k2 = mode_rate(&axpy(y, &k1, dt * half), &stages[1], xi_rate, eta_rate);
    let k3 = mode_rate(&axpy(y, &k2, dt * half), &stages[1], xi_rate, eta_rate);
    let k4 = mode_rate(&axpy(y, &k3, dt), &stages[2], xi_rate, eta_rate);
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let mut out = *y;
    for i in 0..4 {
        out[i] += (k1[i] + (k2[i] + k3[i]) * two + k4[i]) * sixth;
    }
    out
}

fn split<T: Scalar>(s: &TrajectoryState<T>, k: usize) -> ModeVec<T> {
    [s.alpha[k], s.delta[k], s.beta[k], s.a_out[k]]
}

fn join<T: Scalar>(s: &mut TrajectoryState<T>, k: usize, y: ModeVec<T>) {
    s.alpha[k] = y[0];
    s.delta[k] = y[1];
    s.beta[k] = y[2];
    s.a_out[k] = y[3];
}

fn stage_coefficients<T: Scalar>(
    tau: T,
    dt: T,
    p: &ProtocolParams<T>,
    s: &PulseSchedule<T>,
    readout: Option<&ReadoutMode<T>>,
) -> [Coefficients<T>; 3] {
    let half = T::lit(0.5);
    [
        Coefficients::at(tau, p, s, readout),
        Coefficients::at(tau + dt * half, p, s, readout),
        Coefficients::at(tau + dt, p, s, readout),
    ]
}

/// Deterministic right-hand side at time `tau` (`0 ≤ tau ≤ τ_max`).
pub fn drift<T: Scalar>(
    state: &TrajectoryState<T>,
    tau: T,
    p: &ProtocolParams<T>,
    s: &PulseSchedule<T>,
) -> DriftEvaluation<T> {
    let c = Coefficients::at(tau, p, s, None);
    let zero = C::default();
    let mut out = DriftEvaluation::default();
    for k in 0..2 {
        let r = mode_rate(&split(state, k), &c, zero, zero);
        out.alpha[k] = r[0];
        out.delta[k] = r[1];
        out.beta[k] = r[2];
    }
    out
}

/// Adds one step's noise increments to the dynamical amplitudes
/// (Euler–Maruyama form, κ at `tau`): `+√(2κ)ξ_k` on `α_k`, `−√2 ξ_k` on `δ_k`
/// and `+√(2γ_m(2n̄+1)) ξ_{2+k}` on `β_k`. Output accumulators are untouched;
/// see [`accumulate_output`].
pub fn apply_noise<T: Scalar>(
    state: &TrajectoryState<T>,
    tau: T,
    xi: &NoiseIncrements<T>,
    p: &ProtocolParams<T>,
    s: &PulseSchedule<T>,
) -> TrajectoryState<T> {
    let sqrt_2kappa = (T::lit(2.0) * kappa(tau, s)).sqrt();
    let sigma = mech_noise_amplitude(p);
    let mut out = *state;
    for k in 0..2 {
        out.alpha[k] += xi.xi[k] * sqrt_2kappa;
        out.delta[k] -= xi.xi[k] * T::SQRT_2();
        out.beta[k] += xi.xi[2 + k] * sigma;
    }
    out
}

/// Euler form of the output-mode integral over one step: `u` sampled at the
/// step midpoint times the deterministic output field at `tau`, plus `u·ξ_k`
/// with the same increment that drove the cavity. No change before the window.
pub fn accumulate_output<T: Scalar>(
    state: &TrajectoryState<T>,
    tau: T,
    dt: T,
    xi: &NoiseIncrements<T>,
    s: &PulseSchedule<T>,
    readout: &ReadoutMode<T>,
) -> [C<T>; 2] {
    let mid = tau + dt * T::lit(0.5);
    let u = readout.weight(mid);
    let sqrt_2kappa = (T::lit(2.0) * kappa(tau, s)).sqrt();
    let mut a = state.a_out;
    if u == T::zero() {
        return a;
    }
    for (k, acc) in a.iter_mut().enumerate() {
        let field = state.delta[k] * T::SQRT_2() - state.alpha[k] * sqrt_2kappa;
        *acc += (field * dt + xi.xi[k]) * u;
    }
    a
}

/// One direct RK4 step of the full state (both channels), output modes
/// included.
pub fn rk4_step<T: Scalar>(
    state: &TrajectoryState<T>,
    tau: T,
    dt: T,
    xi: &NoiseIncrements<T>,
    p: &ProtocolParams<T>,
    s: &PulseSchedule<T>,
    readout: &ReadoutMode<T>,
) -> TrajectoryState<T> {
    let stages = stage_coefficients(tau, dt, p, s, Some(readout));
    let mut out = *state;
    for k in 0..2 {
        let y = mode_rk4_step(&split(state, k), &stages, dt, xi.xi[k], xi.xi[2 + k]);
        join(&mut out, k, y);
    }
    out
}

/// One Euler–Maruyama step: drift, noise and output record from the same
/// increments. Used as a low-order reference for the RK4 scheme.
pub fn euler_step<T: Scalar>(
    state: &TrajectoryState<T>,
    tau: T,
    dt: T,
    xi: &NoiseIncrements<T>,
    p: &ProtocolParams<T>,
    s: &PulseSchedule<T>,
    readout: &ReadoutMode<T>,
) -> TrajectoryState<T> {
    let f = drift(state, tau, p, s);
    let a_out = accumulate_output(state, tau, dt, xi, s, readout);
    let mut next = apply_noise(state, tau, xi, p, s);
    for k in 0..2 {
        next.alpha[k] += f.alpha[k] * dt;
        next.delta[k] += f.delta[k] * dt;
        next.beta[k] += f.beta[k] * dt;
    }
    next.a_out = a_out;
    next
}

/// Affine map of one RK4 step for a single channel.
#[derive(Debug, Clone, Copy)]
struct StepMap<T> {
    m: [[C<T>; 4]; 4],
    n_xi: ModeVec<T>,
    n_eta: ModeVec<T>,
}

impl<T: Scalar> StepMap<T> {
    fn compile(stages: &[Coefficients<T>; 3], dt: T) -> Self {
        let zero = C::default();
        let one = C::new(T::one(), T::zero());
        let mut m = [[zero; 4]; 4];
        for j in 0..4 {
            let mut e = [zero; 4];
            e[j] = one;
            let col = mode_rk4_step(&e, stages, dt, zero, zero);
            for i in 0..4 {
                m[i][j] = col[i];
            }
        }
        let n_xi = mode_rk4_step(&[zero; 4], stages, dt, one, zero);
        let n_eta = mode_rk4_step(&[zero; 4], stages, dt, zero, one);
        let map = Self { m, n_xi, n_eta };
        debug_assert!(map.has_expected_structure());
        map
    }

    /// Uses the structural zeros of the map: `α` evolves alone, nothing feeds
    /// back from `A`, and `η` never reaches `α`.
    #[inline]
    fn apply(&self, y: &ModeVec<T>, xi: C<T>, eta: C<T>) -> ModeVec<T> {
        let m = &self.m;
        let [a, d, b, out] = *y;
        [
            m[0][0] * a + self.n_xi[0] * xi,
            m[1][0] * a + m[1][1] * d + m[1][2] * b + self.n_xi[1] * xi + self.n_eta[1] * eta,
            m[2][0] * a + m[2][1] * d + m[2][2] * b + self.n_xi[2] * xi + self.n_eta[2] * eta,
            m[3][0] * a + m[3][1] * d + m[3][2] * b + out + self.n_xi[3] * xi + self.n_eta[3] * eta,
        ]
    }

    fn has_expected_structure(&self) -> bool {
        let zero = C::default();
        let one = C::new(T::one(), T::zero());
        self.m[0][1] == zero
            && self.m[0][2] == zero
            && self.m[0][3] == zero
            && self.m[1][3] == zero
            && self.m[2][3] == zero
            && self.m[3][3] == one
            && self.n_eta[0] == zero
    }
}

/// Precompiled stochastic integrator for one `(params, schedule)` pair.
/// Immutable and shareable across worker threads.
#[derive(Debug, Clone)]
pub struct TrajectoryEngine<T> {
    params: ProtocolParams<T>,
    schedule: PulseSchedule<T>,
    readout: ReadoutMode<T>,
    dt: T,
    steps: Vec<StepMap<T>>,
}

/// Non-finite checks run this often (and after the last step).
const FINITE_CHECK_INTERVAL: usize = 256;

impl<T: Scalar> TrajectoryEngine<T> {
    pub fn new(params: ProtocolParams<T>, schedule: PulseSchedule<T>) -> Result<Self> {
        params.validate()?;
        let readout = ReadoutMode::for_schedule(&schedule)?;
        let dt = schedule.dt();
        let steps = (0..schedule.n_steps())
            .map(|i| {
                let tau = T::from_usize(i).unwrap() * dt;
                StepMap::compile(&stage_coefficients(tau, dt, &params, &schedule, Some(&readout)), dt)
            })
            .collect();
        Ok(Self {
            params,
            schedule,
            readout,
            dt,
            steps,
        })
    }

    pub fn params(&self) -> &ProtocolParams<T> {
        &self.params
    }

    pub fn schedule(&self) -> &PulseSchedule<T> {
        &self.schedule
    }

    pub fn readout(&self) -> &ReadoutMode<T> {
        &self.readout
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Samples an initial state and integrates it to `τ_max`, returning the
    /// two output-mode amplitudes.
    pub fn run_trajectory(&self, rng: &mut RngStream) -> Result<[C<T>; 2]> {
        let init = initial_state(&self.params, rng)?;
        self.integrate(init, rng)
    }

    /// Integrates a given initial state with noise from `rng`.
    pub fn integrate(&self, init: TrajectoryState<T>, rng: &mut RngStream) -> Result<[C<T>; 2]> {
        let mut y = [split(&init, 0), split(&init, 1)];
        let last = self.steps.len() - 1;
        for (n, map) in self.steps.iter().enumerate() {
            let noise = draw_noise(self.dt, rng);
            y[0] = map.apply(&y[0], noise.xi[0], noise.xi[2]);
            y[1] = map.apply(&y[1], noise.xi[1], noise.xi[3]);
            if (n % FINITE_CHECK_INTERVAL == 0 || n == last) && !all_finite(&y) {
                return Err(Error::NonFiniteTrajectory {
                    index: rng.stream_id(),
                    step: n,
                });
            }
        }
        Ok([y[0][3], y[1][3]])
    }

    /// Same as [`Self::integrate`] but stepping with [`rk4_step`] directly,
    /// without the compiled maps. Slow; used to validate the compilation.
    pub fn integrate_direct(&self, init: TrajectoryState<T>, rng: &mut RngStream) -> TrajectoryState<T> {
        let mut y = init;
        for n in 0..self.steps.len() {
            let tau = T::from_usize(n).unwrap() * self.dt;
            let noise = draw_noise(self.dt, rng);
            y = rk4_step(&y, tau, self.dt, &noise, &self.params, &self.schedule, &self.readout);
        }
        y
    }
}

fn all_finite<T: Scalar>(y: &[ModeVec<T>; 2]) -> bool {
    y.iter()
        .flatten()
        .all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Convenience wrapper compiling an engine for a single trajectory.
pub fn run_trajectory<T: Scalar>(
    p: &ProtocolParams<T>,
    s: &PulseSchedule<T>,
    rng: &mut RngStream,
) -> Result<[C<T>; 2]> {
    TrajectoryEngine::new(*p, *s)?.run_trajectory(rng)
}

/// Noise-free time series, one record per grid point including `τ = 0`.
#[derive(Debug, Clone)]
pub struct DeterministicRun<T> {
    pub times: Vec<T>,
    pub states: Vec<TrajectoryState<T>>,
}

impl<T: Scalar> DeterministicRun<T> {
    pub fn final_state(&self) -> &TrajectoryState<T> {
        self.states.last().expect("runs always hold the initial record")
    }

    /// Index of the grid point nearest `tau`.
    pub fn index_near(&self, tau: T) -> usize {
        let dt = self.times[1] - self.times[0];
        let i = (tau / dt).round().to_usize().unwrap_or(0);
        i.min(self.times.len() - 1)
    }

    /// Cavity output field `√2 δ_k − √(2κ) α_k` at record `i`.
    pub fn output_field(&self, i: usize, k: usize, s: &PulseSchedule<T>) -> C<T> {
        let st = &self.states[i];
        let sqrt_2kappa = (T::lit(2.0) * kappa(self.times[i], s)).sqrt();
        st.delta[k] * T::SQRT_2() - st.alpha[k] * sqrt_2kappa
    }

    /// Trapezoid estimate of `∫|d_out,k|² dτ` from the start to each record.
    pub fn emitted_energy(&self, k: usize, s: &PulseSchedule<T>) -> Vec<T> {
        let half = T::lit(0.5);
        let mut acc = T::zero();
        let mut out = Vec::with_capacity(self.times.len());
        out.push(acc);
        for i in 1..self.times.len() {
            let dt = self.times[i] - self.times[i - 1];
            let a = self.output_field(i - 1, k, s).norm_sqr();
            let b = self.output_field(i, k, s).norm_sqr();
            acc += (a + b) * half * dt;
            out.push(acc);
        }
        out
    }
}

/// Integrates the noise-free equations from `α_k(0) = source_amplitude[k]`
/// with empty cavities and mechanics, recording the state at every step.
pub fn run_deterministic<T: Scalar>(
    p: &ProtocolParams<T>,
    s: &PulseSchedule<T>,
    source_amplitude: [C<T>; 2],
) -> Result<DeterministicRun<T>> {
    p.validate()?;
    let readout = ReadoutMode::for_schedule(s)?;
    let dt = s.dt();
    let quiet = NoiseIncrements::default();
    let mut state = TrajectoryState {
        alpha: source_amplitude,
        ..TrajectoryState::default()
    };
    let mut times = Vec::with_capacity(s.n_steps() + 1);
    let mut states = Vec::with_capacity(s.n_steps() + 1);
    times.push(T::zero());
    states.push(state);
    for n in 0..s.n_steps() {
        let tau = T::from_usize(n).unwrap() * dt;
        state = rk4_step(&state, tau, dt, &quiet, p, s, &readout);
        times.push(T::from_usize(n + 1).unwrap() * dt);
        states.push(state);
    }
    Ok(DeterministicRun { times, states })
}
