//! Klein–Gordon fields as finite sums of on-shell, positive-frequency plane
//! waves, evaluated exactly (with analytic derivatives) at any event.

mod polar;

pub use polar::{minkowski_square, polar_decompose, Polar};

use num_complex::Complex64;
use thiserror::Error;

/// Relative tolerance on ω² = m² + |k|² for user-supplied frequencies.
pub const SHELL_TOLERANCE: f64 = 1e-12;
/// Node threshold relative to (Σ|aⱼ|)².
pub const NODE_RELATIVE: f64 = 1e-12;
/// Energy-density threshold relative to (Σ|aⱼ|)² · max ω.
pub const ENERGY_RELATIVE: f64 = 1e-10;
/// Bound on |(□ + m²)Φ| relative to Σ|aⱼ|(ωⱼ² + |kⱼ|² + m²).
pub const KG_RESIDUAL_RELATIVE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("event is at a node of the field (R² = {r2:e} <= {threshold:e})")]
    NodeProximity { r2: f64, threshold: f64 },
    #[error("mode frequency {omega} is off the mass shell (expected {expected})")]
    ShellViolation { omega: f64, expected: f64 },
    #[error("invalid wave field: {0}")]
    Invalid(String),
}

/// A spacetime point (t, x) with up to three spatial components. Unused
/// components are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Event {
    pub t: f64,
    pub x: [f64; 3],
}

impl Event {
    pub fn new(t: f64, x: &[f64]) -> Self {
        let mut e = Event { t, x: [0.0; 3] };
        for (dst, src) in e.x.iter_mut().zip(x) {
            *dst = *src;
        }
        e
    }

    pub fn line(t: f64, x: f64) -> Self {
        Event { t, x: [x, 0.0, 0.0] }
    }

    fn check_finite(&self) -> Result<(), FieldError> {
        if self.t.is_finite() && self.x.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(FieldError::NonFinite("event coordinate"))
        }
    }
}

/// One plane-wave component a·exp(−iωt + ik·x) with ω = +√(m² + |k|²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    amplitude: Complex64,
    k: [f64; 3],
    omega: f64,
}

fn shell_frequency(k: &[f64; 3], mass: f64) -> f64 {
    (mass * mass + k.iter().map(|c| c * c).sum::<f64>()).sqrt()
}

fn pad(k: &[f64]) -> Result<[f64; 3], FieldError> {
    if k.is_empty() || k.len() > 3 {
        return Err(FieldError::Invalid(format!(
            "wave vector must have 1 to 3 components, got {}",
            k.len()
        )));
    }
    let mut out = [0.0; 3];
    out[..k.len()].copy_from_slice(k);
    Ok(out)
}

impl Mode {
    /// Mode on the mass shell of `mass`, frequency derived from `k`.
    pub fn on_shell(amplitude: Complex64, k: &[f64], mass: f64) -> Result<Self, FieldError> {
        let k = pad(k)?;
        if !(amplitude.re.is_finite() && amplitude.im.is_finite()) {
            return Err(FieldError::NonFinite("mode amplitude"));
        }
        if !k.iter().all(|c| c.is_finite()) {
            return Err(FieldError::NonFinite("wave vector"));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(FieldError::Invalid(format!("mass must be positive, got {mass}")));
        }
        Ok(Mode {
            amplitude,
            k,
            omega: shell_frequency(&k, mass),
        })
    }

    /// Mode with an explicitly supplied frequency, which must lie on the
    /// mass shell to within [`SHELL_TOLERANCE`].
    pub fn with_frequency(
        amplitude: Complex64,
        k: &[f64],
        omega: f64,
        mass: f64,
    ) -> Result<Self, FieldError> {
        let mode = Mode::on_shell(amplitude, k, mass)?;
        if !(omega > 0.0) || (omega - mode.omega).abs() > SHELL_TOLERANCE * mode.omega {
            return Err(FieldError::ShellViolation {
                omega,
                expected: mode.omega,
            });
        }
        Ok(Mode { omega, ..mode })
    }

    pub fn amplitude(&self) -> Complex64 {
        self.amplitude
    }

    pub fn wavevector(&self) -> [f64; 3] {
        self.k
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
}

/// Finite superposition of on-shell modes sharing one mass.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    mass: f64,
    dim: usize,
    modes: Vec<Mode>,
    amplitude_sum: f64,
    max_omega: f64,
}

impl WaveField {
    pub fn new(mass: f64, dim: usize, modes: Vec<Mode>) -> Result<Self, FieldError> {
        if !(1..=3).contains(&dim) {
            return Err(FieldError::Invalid(format!("spatial dimension must be 1..=3, got {dim}")));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(FieldError::Invalid(format!("mass must be positive, got {mass}")));
        }
        if modes.is_empty() {
            return Err(FieldError::Invalid("no modes".into()));
        }
        for mode in &modes {
            if mode.k[dim..].iter().any(|&c| c != 0.0) {
                return Err(FieldError::Invalid(format!(
                    "wave vector {:?} has components beyond dimension {dim}",
                    mode.k
                )));
            }
            let expected = shell_frequency(&mode.k, mass);
            if (mode.omega - expected).abs() > SHELL_TOLERANCE * expected {
                return Err(FieldError::ShellViolation {
                    omega: mode.omega,
                    expected,
                });
            }
        }
        let amplitude_sum: f64 = modes.iter().map(|m| m.amplitude.norm()).sum();
        if !(amplitude_sum > 0.0) {
            return Err(FieldError::Invalid("all mode amplitudes are zero".into()));
        }
        let max_omega = modes.iter().map(|m| m.omega).fold(0.0, f64::max);
        Ok(WaveField {
            mass,
            dim,
            modes,
            amplitude_sum,
            max_omega,
        })
    }

    /// Plane wave of unit amplitude in one spatial dimension.
    pub fn plane_wave(mass: f64, k: f64) -> Result<Self, FieldError> {
        WaveField::new(mass, 1, vec![Mode::on_shell(Complex64::new(1.0, 0.0), &[k], mass)?])
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Σ|aⱼ|, the scale every threshold is measured against.
    pub fn amplitude_sum(&self) -> f64 {
        self.amplitude_sum
    }

    pub fn max_omega(&self) -> f64 {
        self.max_omega
    }

    /// R² below which polar quantities are undefined.
    pub fn node_threshold(&self) -> f64 {
        NODE_RELATIVE * self.amplitude_sum * self.amplitude_sum
    }

    /// |𝓔| = |R² ∂S/∂t| below which the guidance velocity is singular.
    pub fn energy_threshold(&self) -> f64 {
        ENERGY_RELATIVE * self.amplitude_sum * self.amplitude_sum * self.max_omega
    }

    /// Same field with every amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: Complex64) -> Result<Self, FieldError> {
        let modes = self
            .modes
            .iter()
            .map(|m| Mode {
                amplitude: m.amplitude * factor,
                ..*m
            })
            .collect();
        WaveField::new(self.mass, self.dim, modes)
    }

    fn accumulate(&self, event: &Event) -> (Complex64, [Complex64; 4], [Complex64; 4]) {
        let i = Complex64::i();
        let mut phi = Complex64::default();
        let mut dphi = [Complex64::default(); 4];
        let mut d2phi = [Complex64::default(); 4];
        for mode in &self.modes {
            let phase = -mode.omega * event.t
                + mode.k[..self.dim]
                    .iter()
                    .zip(&event.x)
                    .map(|(k, x)| k * x)
                    .sum::<f64>();
            let (s, c) = phase.sin_cos();
            let e = mode.amplitude * Complex64::new(c, s);
            phi += e;
            dphi[0] += -i * mode.omega * e;
            d2phi[0] += -(mode.omega * mode.omega) * e;
            for d in 0..self.dim {
                dphi[d + 1] += i * mode.k[d] * e;
                d2phi[d + 1] += -(mode.k[d] * mode.k[d]) * e;
            }
        }
        (phi, dphi, d2phi)
    }

    /// Φ with exact first and second derivatives at `event`, plus the polar
    /// decomposition where the field is not at a node.
    pub fn evaluate(&self, event: Event) -> Result<FieldSample, FieldError> {
        event.check_finite()?;
        let (phi, dphi, d2phi) = self.accumulate(&event);
        let polar = polar_decompose(phi, &dphi, &d2phi, self.dim, self.mass, self.node_threshold()).ok();
        Ok(FieldSample {
            event,
            dim: self.dim,
            phi,
            dphi,
            d2phi,
            r2: phi.norm_sqr(),
            polar,
            node_threshold: self.node_threshold(),
            energy_threshold: self.energy_threshold(),
        })
    }

    /// Φ and its first derivatives only.
    pub fn value_and_gradient(&self, event: Event) -> Result<(Complex64, [Complex64; 4]), FieldError> {
        event.check_finite()?;
        let (phi, dphi, _) = self.accumulate(&event);
        Ok((phi, dphi))
    }

    /// Covariant current jμ = Im(Φ*∂μΦ) = R²∂μS. Finite at nodes.
    pub fn current(&self, event: Event) -> Result<[f64; 4], FieldError> {
        let (phi, dphi) = self.value_and_gradient(event)?;
        let conj = phi.conj();
        let mut j = [0.0; 4];
        for mu in 0..=self.dim {
            j[mu] = (conj * dphi[mu]).im;
        }
        Ok(j)
    }

    /// Σ|aⱼ|(ωⱼ² + |kⱼ|² + m²), the rounding scale of the KG operator.
    pub fn klein_gordon_scale(&self) -> f64 {
        let m2 = self.mass * self.mass;
        self.modes
            .iter()
            .map(|md| {
                let k2: f64 = md.k.iter().map(|c| c * c).sum();
                md.amplitude.norm() * (md.omega * md.omega + k2 + m2)
            })
            .sum()
    }
}

/// Φ, its derivatives and polar quantities at one event.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub event: Event,
    pub dim: usize,
    pub phi: Complex64,
    /// ∂μΦ ordered (t, x, y, z).
    pub dphi: [Complex64; 4],
    /// ∂μ∂μΦ (diagonal), which is all □ needs.
    pub d2phi: [Complex64; 4],
    pub r2: f64,
    /// `None` at nodes.
    pub polar: Option<Polar>,
    pub node_threshold: f64,
    pub energy_threshold: f64,
}

impl FieldSample {
    pub fn polar(&self) -> Result<&Polar, FieldError> {
        self.polar.as_ref().ok_or(FieldError::NodeProximity {
            r2: self.r2,
            threshold: self.node_threshold,
        })
    }

    /// Covariant current Im(Φ*∂μΦ).
    pub fn current(&self) -> [f64; 4] {
        let conj = self.phi.conj();
        let mut j = [0.0; 4];
        for mu in 0..=self.dim {
            j[mu] = (conj * self.dphi[mu]).im;
        }
        j
    }
}

/// |(□ + m²)Φ| at `event` from analytic second derivatives.
pub fn klein_gordon_residual(wf: &WaveField, event: Event) -> Result<f64, FieldError> {
    event.check_finite()?;
    let (phi, _, d2phi) = wf.accumulate(&event);
    let mut op = d2phi[0] + wf.mass * wf.mass * phi;
    for d in 1..=wf.dim {
        op -= d2phi[d];
    }
    Ok(op.norm())
}

/// |∂μ(R²∂^μS)| by second-order central differences with step `h` in every
/// coordinate.
pub fn continuity_residual(wf: &WaveField, event: Event, h: f64) -> Result<f64, FieldError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(FieldError::Invalid(format!("finite-difference step must be positive, got {h}")));
    }
    event.check_finite()?;
    let flux = |e: Event, mu: usize| -> Result<f64, FieldError> {
        let s = wf.evaluate(e)?;
        let p = s.polar()?;
        Ok(p.r2 * p.grad_s[mu])
    };
    let mut div = 0.0;
    for mu in 0..=wf.dim {
        let mut fwd = event;
        let mut bwd = event;
        if mu == 0 {
            fwd.t += h;
            bwd.t -= h;
        } else {
            fwd.x[mu - 1] += h;
            bwd.x[mu - 1] -= h;
        }
        let d = (flux(fwd, mu)? - flux(bwd, mu)?) / (2.0 * h);
        div += if mu == 0 { d } else { -d };
    }
    Ok(div.abs())
}
