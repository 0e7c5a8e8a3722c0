//! The two-mode field N[exp(−imt) + A exp(−iωt + ikx)] and its reduction to
//! a single beat-phase equation.
//!
//! Both modes share the prefactor exp(−imt), so every polar quantity depends
//! on (t, x) only through the phase of the moving mode relative to the rest
//! mode, η = (m − ω)t + kx. With D(η) = m + A²ω + A(m + ω)cos η:
//!
//! ```text
//! R²   = N²(1 + A² + 2A cos η)
//! E    = D(η) / (1 + A² + 2A cos η)
//! P    = A k (A + cos η) / (1 + A² + 2A cos η)
//! v    = P / E = A k (A + cos η) / D(η)
//! dη/dt = (m − ω) + k v(η) = m(ω − m)(A² − 1) / D(η)
//! ```
//!
//! The last line means η has no fixed point unless |A| = 1. When D keeps one
//! sign, η circulates forever; when D changes sign (e.g. the default
//! parameters), every worldline reaches E = 0 in finite lab time.

use num_complex::Complex64;

use super::GuidanceError;
use crate::wavefield::{Mode, WaveField, ENERGY_RELATIVE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeParams {
    pub mass: f64,
    pub omega: f64,
    /// Relative amplitude A of the moving mode (real).
    pub a: f64,
    /// Overall normalization N; drops out of every velocity.
    pub norm: f64,
}

impl TwoModeParams {
    /// ω > m > 0 and finite A are required.
    pub fn new(mass: f64, omega: f64, a: f64) -> Result<Self, String> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(format!("mass must be positive, got {mass}"));
        }
        if !(omega.is_finite() && omega > mass) {
            return Err(format!("omega must exceed the mass ({mass}), got {omega}"));
        }
        if !a.is_finite() {
            return Err(format!("A must be finite, got {a}"));
        }
        Ok(TwoModeParams {
            mass,
            omega,
            a,
            norm: 1.0,
        })
    }

    /// m = 1, ω = 3 (k = √8), A = 2/3.
    pub fn preset() -> Self {
        TwoModeParams {
            mass: 1.0,
            omega: 3.0,
            a: 2.0 / 3.0,
            norm: 1.0,
        }
    }

    pub fn wavenumber(&self) -> f64 {
        ((self.omega - self.mass) * (self.omega + self.mass)).sqrt()
    }

    pub fn wavefield(&self) -> WaveField {
        let m = self.mass;
        let rest = Mode::on_shell(Complex64::new(self.norm, 0.0), &[0.0], m).expect("valid rest mode");
        let moving = Mode::on_shell(Complex64::new(self.norm * self.a, 0.0), &[self.wavenumber()], m)
            .expect("valid moving mode");
        WaveField::new(m, 1, vec![rest, moving]).expect("valid two-mode field")
    }

    /// η = (m − ω)t + kx.
    pub fn beat_phase(&self, t: f64, x: f64) -> f64 {
        (self.mass - self.omega) * t + self.wavenumber() * x
    }

    /// x such that the beat phase at time t equals `eta`.
    pub fn position_for_phase(&self, t: f64, eta: f64) -> f64 {
        (eta - (self.mass - self.omega) * t) / self.wavenumber()
    }

    /// D(η) = m + A²ω + A(m + ω)cos η.
    pub fn denominator(&self, eta: f64) -> f64 {
        let a = self.a;
        self.mass + a * a * self.omega + a * (self.mass + self.omega) * eta.cos()
    }

    fn unnormalized_density(&self, eta: f64) -> f64 {
        1.0 + self.a * self.a + 2.0 * self.a * eta.cos()
    }

    pub fn density(&self, eta: f64) -> f64 {
        self.norm * self.norm * self.unnormalized_density(eta)
    }

    pub fn energy(&self, eta: f64) -> f64 {
        self.denominator(eta) / self.unnormalized_density(eta)
    }

    pub fn momentum(&self, eta: f64) -> f64 {
        self.a * self.wavenumber() * (self.a + eta.cos()) / self.unnormalized_density(eta)
    }

    /// |D| below which the velocity is treated as singular; matches the
    /// field's energy-density threshold.
    pub fn singular_threshold(&self) -> f64 {
        let s = 1.0 + self.a.abs();
        ENERGY_RELATIVE * s * s * self.omega
    }

    pub fn velocity(&self, eta: f64) -> Result<f64, GuidanceError> {
        let d = self.denominator(eta);
        if d.abs() <= self.singular_threshold() {
            return Err(GuidanceError::ESingularity {
                energy_density: d,
                threshold: self.singular_threshold(),
            });
        }
        Ok(self.a * self.wavenumber() * (self.a + eta.cos()) / d)
    }

    /// m(ω − m)(A² − 1), the constant numerator of dη/dt.
    pub fn drift_numerator(&self) -> f64 {
        self.mass * (self.omega - self.mass) * (self.a * self.a - 1.0)
    }

    /// True when D(η) never vanishes, so η circulates without singularities.
    pub fn is_circulating(&self) -> bool {
        let base = self.mass + self.a * self.a * self.omega;
        base > self.a.abs() * (self.mass + self.omega)
    }
}

/// Beat phase paired with its lab time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaState {
    pub eta: f64,
    pub t: f64,
}

impl EtaState {
    pub fn from_event(params: &TwoModeParams, t: f64, x: f64) -> Self {
        EtaState {
            eta: params.beat_phase(t, x),
            t,
        }
    }

    pub fn position(&self, params: &TwoModeParams) -> f64 {
        params.position_for_phase(self.t, self.eta)
    }
}

/// dη/dt = (m − ω) + k·v(η) along a guided worldline.
pub fn eta_reduced_rhs(eta: f64, params: &TwoModeParams) -> Result<f64, GuidanceError> {
    Ok((params.mass - params.omega) + params.wavenumber() * params.velocity(eta)?)
}
