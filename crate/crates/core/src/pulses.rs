//! Pulse shapes: source transmissivity `κ(τ)`, optomechanical coupling
//! `g(τ)`, and the sech temporal-mode envelope used for readout.

use crate::error::{domain, Result};
use crate::model::PulseSchedule;
use crate::scalar::{sech, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<T> {
    start: T,
    end: T,
    center: T,
}

impl<T: Scalar> Window<T> {
    /// Infinite endpoints are allowed.
    pub fn new(start: T, end: T, center: T) -> Result<Self> {
        if start.is_nan() || end.is_nan() || !center.is_finite() {
            return Err(domain("window bounds must not be NaN and center must be finite"));
        }
        if !(start < end) {
            return Err(domain(format!("window start {start} must precede end {end}")));
        }
        if !(start <= center && center <= end) {
            return Err(domain(format!("window center {center} outside [{start}, {end}]")));
        }
        Ok(Self { start, end, center })
    }

    pub fn infinite(center: T) -> Self {
        Self {
            start: T::neg_infinity(),
            end: T::infinity(),
            center,
        }
    }

    /// Output-mode integration window `[τ₁ + τ_s/2, τ_max]`, centered on the
    /// read pulse peak `τ₂`.
    pub fn readout(s: &PulseSchedule<T>) -> Self {
        Self {
            start: s.switchover(),
            end: s.tau_max(),
            center: s.tau2(),
        }
    }

    pub fn start(&self) -> T {
        self.start
    }
    pub fn end(&self) -> T {
        self.end
    }
    pub fn center(&self) -> T {
        self.center
    }

    pub fn contains(&self, tau: T) -> bool {
        tau >= self.start && tau <= self.end
    }
}

/// Source-cavity transmissivity `½[1 + tanh(τ − τ₁)]`, evaluated in the
/// equivalent logistic form so that the far left tail stays positive.
#[inline]
pub fn kappa<T: Scalar>(tau: T, schedule: &PulseSchedule<T>) -> T {
    let x = tau - schedule.tau1();
    (T::one() + (-(x + x)).exp()).recip()
}

#[inline]
pub fn envelope_u<T: Scalar>(tau: T, center: T, norm: T) -> T {
    norm * sech(tau - center)
}

/// Normalization making `∫ u² = 1` over the window: `1/√(tanh(b−c) − tanh(a−c))`.
pub fn norm_restricted<T: Scalar>(w: &Window<T>) -> Result<T> {
    let span = (w.end - w.center).tanh() - (w.start - w.center).tanh();
    if !(span > T::zero()) {
        return Err(domain(format!(
            "window [{}, {}] has zero sech² weight",
            w.start, w.end
        )));
    }
    Ok(span.sqrt().recip())
}

/// Optomechanical coupling `−√2·u(τ − τ₁)` up to the switchover, then
/// `−√2·u(τ − τ₂)`, both with the infinite-domain norm `√½`.
pub fn coupling_g<T: Scalar>(tau: T, schedule: &PulseSchedule<T>) -> Result<T> {
    if !(tau >= T::zero() && tau <= schedule.tau_max()) {
        return Err(domain(format!(
            "tau {tau} outside [0, {}]",
            schedule.tau_max()
        )));
    }
    Ok(coupling_unchecked(tau, schedule))
}

#[inline]
pub(crate) fn coupling_unchecked<T: Scalar>(tau: T, schedule: &PulseSchedule<T>) -> T {
    let center = if tau <= schedule.switchover() {
        schedule.tau1()
    } else {
        schedule.tau2()
    };
    -(T::SQRT_2() * envelope_u(tau, center, T::FRAC_1_SQRT_2()))
}

/// Matched readout mode: `u(τ − τ₂)` with the restricted-window norm,
/// gated to zero outside the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutMode<T> {
    window: Window<T>,
    norm: T,
}

impl<T: Scalar> ReadoutMode<T> {
    pub fn new(window: Window<T>) -> Result<Self> {
        let norm = norm_restricted(&window)?;
        Ok(Self { window, norm })
    }

    pub fn for_schedule(s: &PulseSchedule<T>) -> Result<Self> {
        Self::new(Window::readout(s))
    }

    pub fn window(&self) -> &Window<T> {
        &self.window
    }

    pub fn norm(&self) -> T {
        self.norm
    }

    #[inline]
    pub fn weight(&self, tau: T) -> T {
        if self.window.contains(tau) {
            envelope_u(tau, self.window.center, self.norm)
        } else {
            T::zero()
        }
    }
}
