//! Protocol parameters and the dimensionless time base `τ = Γ_c t`.
//!
//! Physical inputs are ordinary frequencies in Hz (the `/2π` values quoted
//! for rates) and a bath temperature in kelvin. Dimensionless rates are plain
//! ratios against the cavity decay rate, which is the same whether both are
//! taken as angular or ordinary frequencies.
//!
//! Convention for the default parameter set: the mechanical resonance is
//! `ω_m = 14.23` (that is, `ν_m = 14.23 × 0.26 GHz ≈ 3.70 GHz`, which gives a
//! bath occupation of 0.70 at 200 mK), while the damping and coupling are
//! stored as `2π × 1.59e-5` and `2π × 3.5e-3`. The storage-decay factor
//! `exp(−2 γ_m τ_s)` therefore uses `γ_m ≈ 9.99e-5`.

use crate::error::{domain, Result};
use crate::scalar::Scalar;

/// Planck constant, J·s (exact SI value).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K (exact SI value).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Cavity decay rate `Γ_c/2π` used for the default parameter set, Hz.
pub const DEFAULT_CAVITY_DECAY_HZ: f64 = 0.26e9;
pub const DEFAULT_OMEGA_M: f64 = 14.23;
pub const DEFAULT_GAMMA_M_OVER_2PI: f64 = 1.59e-5;
pub const DEFAULT_CHI0_OVER_2PI: f64 = 3.5e-3;
pub const DEFAULT_TEMPERATURE_K: f64 = 0.2;
pub const DEFAULT_TAU1: f64 = 8.17;
pub const DEFAULT_STEPS: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams<T> {
    /// `Γ_c/2π`, Hz.
    pub cavity_decay_rate: T,
    /// `ν_m`, Hz.
    pub mech_frequency: T,
    /// `γ_m/2π`, Hz.
    pub mech_damping: T,
    /// `χ₀/2π`, Hz.
    pub coupling: T,
    /// Kelvin.
    pub bath_temperature: T,
}

impl<T: Scalar> PhysicalParams<T> {
    pub fn new(
        cavity_decay_rate: T,
        mech_frequency: T,
        mech_damping: T,
        coupling: T,
        bath_temperature: T,
    ) -> Result<Self> {
        let p = Self {
            cavity_decay_rate,
            mech_frequency,
            mech_damping,
            coupling,
            bath_temperature,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameter set close to the silicon optomechanical crystal experiments:
    /// `Γ_c/2π = 0.26 GHz`, 200 mK bath.
    pub fn reference_defaults() -> Self {
        let nu_c = T::lit(DEFAULT_CAVITY_DECAY_HZ);
        let two_pi = T::TAU();
        Self {
            cavity_decay_rate: nu_c,
            mech_frequency: T::lit(DEFAULT_OMEGA_M) * nu_c,
            mech_damping: two_pi * T::lit(DEFAULT_GAMMA_M_OVER_2PI) * nu_c,
            coupling: two_pi * T::lit(DEFAULT_CHI0_OVER_2PI) * nu_c,
            bath_temperature: T::lit(DEFAULT_TEMPERATURE_K),
        }
    }

    pub fn with_temperature(mut self, kelvin: T) -> Result<Self> {
        self.bath_temperature = kelvin;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("cavity_decay_rate", self.cavity_decay_rate),
            ("mech_frequency", self.mech_frequency),
            ("mech_damping", self.mech_damping),
            ("coupling", self.coupling),
            ("bath_temperature", self.bath_temperature),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > T::zero()) {
                return Err(domain(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.mech_frequency <= self.mech_damping {
            return Err(domain(format!(
                "oscillator must be underdamped: mech_frequency {} <= mech_damping {}",
                self.mech_frequency, self.mech_damping
            )));
        }
        Ok(())
    }
}

/// Dimensionless constants of the linearized model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams<T> {
    pub gamma_m: T,
    pub omega_m: T,
    pub squeezing_r: T,
    /// Mean bath phonon number `n̄_th,m`.
    pub n_bath: T,
    /// Initial mechanical occupation; independent of `n_bath` to allow pre-cooled starts.
    pub n_mech_init: T,
    pub chi0: T,
}

impl<T: Scalar> ProtocolParams<T> {
    /// Default dimensionless constants with squeezing `r`, and a thermalized
    /// start at the 200 mK bath occupation.
    pub fn reference_defaults(squeezing_r: T) -> Self {
        let phys = PhysicalParams::<T>::reference_defaults();
        to_dimensionless(&phys, squeezing_r).expect("default physical parameters are valid")
    }

    /// Sets both the bath and the initial mechanical occupation.
    pub fn with_thermal(mut self, n: T) -> Self {
        self.n_bath = n;
        self.n_mech_init = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("gamma_m", self.gamma_m),
            ("squeezing_r", self.squeezing_r),
            ("n_bath", self.n_bath),
            ("n_mech_init", self.n_mech_init),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= T::zero()) {
                return Err(domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Converts physical rates to the `τ = Γ_c t` time base. The bath occupation
/// is computed from the physical mechanical frequency and temperature, and
/// the mechanical mode starts thermalized with the bath.
pub fn to_dimensionless<T: Scalar>(p: &PhysicalParams<T>, squeezing_r: T) -> Result<ProtocolParams<T>> {
    p.validate()?;
    if !(squeezing_r.is_finite() && squeezing_r >= T::zero()) {
        return Err(domain(format!("squeezing must be finite and >= 0, got {squeezing_r}")));
    }
    let n_bath = thermal_occupation(p)?;
    let out = ProtocolParams {
        gamma_m: p.mech_damping / p.cavity_decay_rate,
        omega_m: p.mech_frequency / p.cavity_decay_rate,
        squeezing_r,
        n_bath,
        n_mech_init: n_bath,
        chi0: p.coupling / p.cavity_decay_rate,
    };
    Ok(out)
}

/// Mean bath phonon number `1/(exp(hν_m/k_B T) − 1)`.
pub fn thermal_occupation<T: Scalar>(p: &PhysicalParams<T>) -> Result<T> {
    bose_occupation(p.mech_frequency, p.bath_temperature)
}

/// Bose–Einstein occupation of a mode at `frequency_hz` and `temperature_k`.
/// Zero temperature gives zero; negative temperature is rejected.
pub fn bose_occupation<T: Scalar>(frequency_hz: T, temperature_k: T) -> Result<T> {
    if !(frequency_hz.is_finite() && frequency_hz > T::zero()) {
        return Err(domain(format!("frequency must be finite and > 0, got {frequency_hz}")));
    }
    if temperature_k.is_nan() || temperature_k < T::zero() {
        return Err(domain(format!("temperature must be >= 0, got {temperature_k}")));
    }
    if temperature_k == T::zero() {
        return Ok(T::zero());
    }
    let x = T::lit(PLANCK / BOLTZMANN) * frequency_hz / temperature_k;
    Ok(x.exp_m1().recip())
}

/// Pulse timing in dimensionless units. `tau2` and `tau_max` are derived and
/// cannot be set independently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSchedule<T> {
    tau1: T,
    tau_s: T,
    tau2: T,
    tau_max: T,
    n_steps: usize,
}

impl<T: Scalar> PulseSchedule<T> {
    pub fn new(tau1: T, tau_s: T, n_steps: usize) -> Result<Self> {
        if !(tau1.is_finite() && tau1 > T::lit(3.0)) {
            return Err(domain(format!("tau1 must exceed 3, got {tau1}")));
        }
        if !(tau_s.is_finite() && tau_s >= T::zero()) {
            return Err(domain(format!("tau_s must be finite and >= 0, got {tau_s}")));
        }
        if n_steps < 100 {
            return Err(domain(format!("n_steps must be >= 100, got {n_steps}")));
        }
        Ok(Self {
            tau1,
            tau_s,
            tau2: tau1 + tau_s,
            tau_max: tau1 + tau1 + tau_s,
            n_steps,
        })
    }

    pub fn tau1(&self) -> T {
        self.tau1
    }
    pub fn tau_s(&self) -> T {
        self.tau_s
    }
    pub fn tau2(&self) -> T {
        self.tau2
    }
    pub fn tau_max(&self) -> T {
        self.tau_max
    }
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Uniform step `τ_max / n_steps`.
    pub fn dt(&self) -> T {
        self.tau_max / T::from_usize(self.n_steps).unwrap()
    }

    /// Time at which the write pulse hands over to the read pulse and the
    /// output-mode integration begins.
    pub fn switchover(&self) -> T {
        self.tau1 + self.tau_s / T::lit(2.0)
    }

    pub fn with_steps(self, n_steps: usize) -> Result<Self> {
        Self::new(self.tau1, self.tau_s, n_steps)
    }
}

/// `τ₁ = 8.17` schedule with the given storage time.
pub fn default_schedule<T: Scalar>(tau_s: T, n_steps: usize) -> Result<PulseSchedule<T>> {
    PulseSchedule::new(T::lit(DEFAULT_TAU1), tau_s, n_steps)
}
