//! Continuous k-space profiles f(k) in one spatial dimension and their
//! discretization into finite mode sums.

use num_complex::Complex64;
use thiserror::Error;

use crate::quadrature::QuadratureRule;
use crate::wavefield::{Event, FieldError, Mode, WaveField};

/// Half-width of the gaussian quadrature window, in units of sigma.
pub const GAUSSIAN_WINDOW_SIGMAS: f64 = 6.0;
/// A positive-support gaussian must have k0 − 4σ > 0.
pub const GAUSSIAN_SUPPORT_SIGMAS: f64 = 4.0;
/// Maximum relative change of Φ and ∂Φ under node doubling.
pub const RESOLUTION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PacketError {
    #[error("invalid packet: {0}")]
    Invalid(String),
    #[error("packet unresolved at n = {n}: doubling the nodes changes the field by {change:e} (relative)")]
    Unresolved { n: usize, change: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// f(k) = exp(−(k − k0)² / (2σ²))
    Gaussian { k0: f64, sigma: f64 },
    /// f(k) = 1 on [kmin, kmax]
    TopHat { kmin: f64, kmax: f64 },
}

impl Profile {
    pub fn amplitude(&self, k: f64) -> f64 {
        match *self {
            Profile::Gaussian { k0, sigma } => {
                let u = (k - k0) / sigma;
                (-0.5 * u * u).exp()
            }
            Profile::TopHat { kmin, kmax } => {
                if (kmin..=kmax).contains(&k) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Profile::Gaussian { .. } => "gaussian",
            Profile::TopHat { .. } => "tophat",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketSpec {
    profile: Profile,
    n: usize,
    rule: QuadratureRule,
    support_positive: bool,
}

impl PacketSpec {
    pub fn new(
        profile: Profile,
        n: usize,
        rule: QuadratureRule,
        support_positive: bool,
    ) -> Result<Self, PacketError> {
        if n < 2 {
            return Err(PacketError::Invalid(format!("node count must be at least 2, got {n}")));
        }
        if let QuadratureRule::GaussLegendre = rule {
            if n > crate::quadrature::MAX_SINGLE_PANEL_ORDER {
                return Err(PacketError::Invalid(format!(
                    "gauss_legendre supports at most {} nodes; use composite_gauss_legendre",
                    crate::quadrature::MAX_SINGLE_PANEL_ORDER
                )));
            }
        }
        match profile {
            Profile::Gaussian { k0, sigma } => {
                if !k0.is_finite() || !(sigma.is_finite() && sigma > 0.0) {
                    return Err(PacketError::Invalid(format!(
                        "gaussian needs finite k0 and sigma > 0 (k0 = {k0}, sigma = {sigma})"
                    )));
                }
                if support_positive && k0 - GAUSSIAN_SUPPORT_SIGMAS * sigma <= 0.0 {
                    return Err(PacketError::Invalid(format!(
                        "support_positive gaussian needs k0 > {GAUSSIAN_SUPPORT_SIGMAS}·sigma"
                    )));
                }
            }
            Profile::TopHat { kmin, kmax } => {
                if !(kmin.is_finite() && kmax.is_finite() && kmin < kmax) {
                    return Err(PacketError::Invalid(format!(
                        "tophat needs kmin < kmax (kmin = {kmin}, kmax = {kmax})"
                    )));
                }
                if support_positive && kmin <= 0.0 {
                    return Err(PacketError::Invalid(format!(
                        "support_positive tophat needs kmin > 0, got {kmin}"
                    )));
                }
            }
        }
        Ok(PacketSpec {
            profile,
            n,
            rule,
            support_positive,
        })
    }

    pub fn gaussian(k0: f64, sigma: f64, n: usize, support_positive: bool) -> Result<Self, PacketError> {
        PacketSpec::new(Profile::Gaussian { k0, sigma }, n, QuadratureRule::GaussLegendre, support_positive)
    }

    pub fn tophat(kmin: f64, kmax: f64, n: usize, support_positive: bool) -> Result<Self, PacketError> {
        PacketSpec::new(Profile::TopHat { kmin, kmax }, n, QuadratureRule::GaussLegendre, support_positive)
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn support_positive(&self) -> bool {
        self.support_positive
    }

    /// Same profile with a different node count and rule.
    pub fn with_nodes(&self, n: usize, rule: QuadratureRule) -> Result<Self, PacketError> {
        PacketSpec::new(self.profile, n, rule, self.support_positive)
    }

    /// k-interval covered by the quadrature.
    pub fn interval(&self) -> (f64, f64) {
        match self.profile {
            Profile::Gaussian { k0, sigma } => {
                let lo = k0 - GAUSSIAN_WINDOW_SIGMAS * sigma;
                let hi = k0 + GAUSSIAN_WINDOW_SIGMAS * sigma;
                if self.support_positive {
                    (lo.max(0.0), hi)
                } else {
                    (lo, hi)
                }
            }
            Profile::TopHat { kmin, kmax } => (kmin, kmax),
        }
    }

    /// κ: the smallest radius with f negligible outside |k| ≤ κ.
    pub fn bandwidth(&self) -> f64 {
        let (lo, hi) = self.interval();
        lo.abs().max(hi.abs())
    }

    pub fn amplitude(&self, k: f64) -> f64 {
        self.profile.amplitude(k)
    }

    /// Quadrature nodes kⱼ and weights wⱼ at the spec's resolution.
    pub fn nodes(&self) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = self.interval();
        self.rule.nodes(self.n, lo, hi)
    }

    /// ∫ g(k)·|f(k)|² dk with the spec's own nodes.
    pub fn weighted_integral<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let (k, w) = self.nodes();
        k.iter()
            .zip(&w)
            .map(|(&kj, &wj)| {
                let f = self.amplitude(kj);
                wj * f * f * g(kj)
            })
            .sum()
    }

    /// Mode sum Σ f(kⱼ)wⱼ exp(−iωⱼt + ikⱼx) without any resolution check.
    pub fn build_field(&self, mass: f64) -> Result<WaveField, PacketError> {
        let (k, w) = self.nodes();
        let modes = k
            .iter()
            .zip(&w)
            .map(|(&kj, &wj)| Mode::on_shell(Complex64::new(self.amplitude(kj) * wj, 0.0), &[kj], mass))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(WaveField::new(mass, 1, modes)?)
    }

    /// Probe events used when the caller supplies none: t = 0, at the centre
    /// and a short distance either side.
    pub fn default_probes(&self) -> Vec<Event> {
        let (lo, hi) = self.interval();
        let offset = 0.05 / (0.5 * (hi - lo));
        vec![Event::line(0.0, 0.0), Event::line(0.0, offset), Event::line(0.0, -offset)]
    }
}

/// Largest relative change of (Φ, ∂tΦ, ∂xΦ) at `probes` when the node count
/// is doubled.
pub fn resolution_change(spec: &PacketSpec, mass: f64, probes: &[Event]) -> Result<f64, PacketError> {
    let coarse = spec.build_field(mass)?;
    let fine = spec.with_nodes(2 * spec.n, spec.rule)?.build_field(mass)?;
    let mut worst: f64 = 0.0;
    for &probe in probes {
        let (pc, dc) = coarse.value_and_gradient(probe)?;
        let (pf, df) = fine.value_and_gradient(probe)?;
        let diff = (pc - pf).norm_sqr() + (dc[0] - df[0]).norm_sqr() + (dc[1] - df[1]).norm_sqr();
        let size = pf.norm_sqr() + df[0].norm_sqr() + df[1].norm_sqr();
        let change = if size > 0.0 {
            (diff / size).sqrt()
        } else if diff > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst = worst.max(change);
    }
    Ok(worst)
}

/// Discretize `spec` into a [`WaveField`], checking resolution at the default
/// probes.
pub fn discretize_packet(spec: &PacketSpec, mass: f64) -> Result<WaveField, PacketError> {
    discretize_packet_at(spec, mass, &spec.default_probes())
}

/// Discretize `spec`, requiring that doubling the node count moves Φ and ∂Φ
/// by less than [`RESOLUTION_TOLERANCE`] (relative) at every probe.
pub fn discretize_packet_at(spec: &PacketSpec, mass: f64, probes: &[Event]) -> Result<WaveField, PacketError> {
    let change = resolution_change(spec, mass, probes)?;
    if !(change < RESOLUTION_TOLERANCE) {
        return Err(PacketError::Unresolved { n: spec.n, change });
    }
    spec.build_field(mass)
}
