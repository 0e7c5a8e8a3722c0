//! Averaged velocities: the two-mode beat average, the far-field limit of a
//! packet, and long-time ratios of the energy and momentum densities.

mod density;

use std::fmt;

use thiserror::Error;

use crate::packet::{discretize_packet_at, PacketError, PacketSpec};
use crate::trajectory::{guidance_velocity, GuidanceError, Trajectory, TwoModeParams};
use crate::wavefield::{Event, FieldError, WaveField};

pub use density::{
    density_ladder, density_oracle, long_time_density_average, required_modes, DensityAverageReport, DensityOptions,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("{0}")]
    Domain(String),
    #[error("window ({t_lo}, {t_hi}) is not inside the trajectory span [{t_start}, {t_end}] or holds fewer than two samples")]
    EmptyWindow {
        t_lo: f64,
        t_hi: f64,
        t_start: f64,
        t_end: f64,
    },
    #[error("packet has no drift (limit velocity is zero); there is no centroid ray to scan along")]
    NoDrift,
    #[error(transparent)]
    Packet(#[from] PacketError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// √((ω − m)/(ω + m)), the beat-averaged speed of the two-mode field.
pub fn eq14_prediction(m: f64, omega: f64) -> Result<f64, AnalysisError> {
    if !(m > 0.0 && m.is_finite() && omega.is_finite() && omega > m) {
        return Err(AnalysisError::Domain(format!(
            "need omega > m > 0 (m = {m}, omega = {omega})"
        )));
    }
    Ok(((omega - m) / (omega + m)).sqrt())
}

/// Mean lab-frame velocity over one full beat period when the beat phase
/// circulates: A²k/(m + A²ω). Reduces to (ω − m)/k at |A| = 1.
pub fn two_mode_cycle_average(params: &TwoModeParams) -> Result<f64, AnalysisError> {
    if !params.is_circulating() {
        return Err(AnalysisError::Domain(format!(
            "beat phase does not circulate for A = {}: E changes sign along every worldline",
            params.a
        )));
    }
    let a2 = params.a * params.a;
    Ok(a2 * params.wavenumber() / (params.mass + a2 * params.omega))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AverageReport {
    pub window: (f64, f64),
    pub mean_v: [f64; 3],
    pub predicted_v: Option<[f64; 3]>,
    pub abs_error: Option<f64>,
    pub converged: bool,
}

impl AverageReport {
    /// Attach a closed-form prediction; `converged` when the displacement
    /// mean is within `tolerance` of it.
    pub fn compare_with(mut self, predicted: [f64; 3], tolerance: f64) -> Self {
        let err = distance(&self.mean_v, &predicted);
        self.predicted_v = Some(predicted);
        self.abs_error = Some(err);
        self.converged = err <= tolerance;
        self
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Displacement mean (x(t_hi) − x(t_lo))/(t_hi − t_lo) from the continuous
/// extension of `traj`.
pub fn time_average_velocity(traj: &Trajectory, window: (f64, f64)) -> Result<AverageReport, AnalysisError> {
    let (t_lo, t_hi) = window;
    let empty = || AnalysisError::EmptyWindow {
        t_lo,
        t_hi,
        t_start: traj.t_start(),
        t_end: traj.t_last(),
    };
    if !(t_lo < t_hi) {
        return Err(empty());
    }
    let inside = traj.samples.iter().filter(|s| s.t >= t_lo && s.t <= t_hi).count();
    if inside < 2 {
        return Err(empty());
    }
    let (x_lo, x_hi) = match (traj.position_at(t_lo), traj.position_at(t_hi)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(empty()),
    };
    let mut mean_v = [0.0; 3];
    for i in 0..traj.dim {
        mean_v[i] = (x_hi[i] - x_lo[i]) / (t_hi - t_lo);
    }
    Ok(AverageReport {
        window,
        mean_v,
        predicted_v: None,
        abs_error: None,
        converged: false,
    })
}

/// ∫|f|²k / ∫|f|²ω with the packet's own quadrature.
pub fn far_field_velocity_limit(spec: &PacketSpec, m: f64) -> [f64; 3] {
    let num = spec.weighted_integral(|k| k);
    let den = spec.weighted_integral(|k| (m * m + k * k).sqrt());
    [num / den, 0.0, 0.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeStatus {
    Ok,
    /// |x|κ < 1: outside the regime where the limit applies.
    NearField,
    Node,
    ESingularity,
}

impl fmt::Display for ProbeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeStatus::Ok => "ok",
            ProbeStatus::NearField => "near_field",
            ProbeStatus::Node => "node",
            ProbeStatus::ESingularity => "E_singularity",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldReport {
    pub probe_x: [f64; 3],
    /// Lab time at which the probe was evaluated.
    pub probe_t: f64,
    pub distance_in_bandwidths: f64,
    /// `None` when the velocity is undefined at the probe.
    pub exact_v: Option<[f64; 3]>,
    pub limit_v: [f64; 3],
    /// |exact_v − limit_v|; NaN when `exact_v` is `None`.
    pub deviation: f64,
    pub status: ProbeStatus,
}

/// Exact guidance velocity against the far-field limit at each probe
/// position.
///
/// The packet is focused at x = 0 at time `t`. Each probe x is evaluated
/// where the packet's energy centroid crosses it, at lab time
/// t + x/v_lim: the centroid of a free packet moves exactly at v_lim, and
/// only along that ray does the local velocity settle onto the limit.
pub fn far_field_scan(spec: &PacketSpec, m: f64, t: f64, probes: &[f64]) -> Result<Vec<FarFieldReport>, AnalysisError> {
    let limit_v = far_field_velocity_limit(spec, m);
    let v = limit_v[0];
    if !(v.abs() > 1e-12) {
        return Err(AnalysisError::NoDrift);
    }
    if let Some(bad) = probes.iter().find(|x| !(x.is_finite() && **x != 0.0)) {
        return Err(AnalysisError::Domain(format!("probe positions must be finite and nonzero, got {bad}")));
    }
    // time-translation invariance: evaluate the field focused at 0
    let events: Vec<Event> = probes.iter().map(|&x| Event::line(x / v, x)).collect();
    let wf = discretize_packet_at(spec, m, &events)?;
    let kappa = spec.bandwidth();
    events
        .iter()
        .map(|&ev| {
            let x = ev.x[0];
            let distance_in_bandwidths = x.abs() * kappa;
            let sample = wf.evaluate(ev)?;
            let (exact_v, status) = match guidance_velocity(&sample) {
                Ok(v) => (
                    Some(v),
                    if distance_in_bandwidths < 1.0 {
                        ProbeStatus::NearField
                    } else {
                        ProbeStatus::Ok
                    },
                ),
                Err(GuidanceError::Node { .. }) => (None, ProbeStatus::Node),
                Err(GuidanceError::ESingularity { .. }) => (None, ProbeStatus::ESingularity),
                Err(GuidanceError::Field(e)) => return Err(AnalysisError::Field(e)),
            };
            Ok(FarFieldReport {
                probe_x: ev.x,
                probe_t: t + ev.t,
                distance_in_bandwidths,
                exact_v,
                limit_v,
                deviation: exact_v.map_or(f64::NAN, |e| distance(&e, &limit_v)),
                status,
            })
        })
        .collect()
}

/// Medians of `values` grouped into `bins` log-spaced bins of `keys` over
/// [lo, hi]. Empty bins are skipped.
pub fn binned_medians(keys: &[f64], values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); bins];
    for (&k, &v) in keys.iter().zip(values) {
        if !(k >= lo && k <= hi) || !v.is_finite() {
            continue;
        }
        let u = ((k.ln() - llo) / (lhi - llo) * bins as f64) as usize;
        groups[u.min(bins - 1)].push(v);
    }
    groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|mut g| {
            g.sort_by(f64::total_cmp);
            let n = g.len();
            if n % 2 == 1 {
                g[n / 2]
            } else {
                0.5 * (g[n / 2 - 1] + g[n / 2])
            }
        })
        .collect()
}

/// Whether the binned median of the deviations never increases with
/// distance across [lo, hi] (in units of 1/κ).
pub fn median_trend_nonincreasing(reports: &[FarFieldReport], lo: f64, hi: f64, bins: usize) -> bool {
    let keys: Vec<f64> = reports.iter().map(|r| r.distance_in_bandwidths).collect();
    let vals: Vec<f64> = reports.iter().map(|r| r.deviation).collect();
    let med = binned_medians(&keys, &vals, lo, hi, bins);
    med.len() >= 2 && med.windows(2).all(|w| w[1] <= w[0])
}

/// (𝓔, 𝓟) = (−Im(Φ*∂tΦ), Im(Φ*∇Φ)) = (−R²∂S/∂t, R²∇S). Finite at nodes.
pub fn ensemble_densities(wf: &WaveField, event: Event) -> Result<(f64, [f64; 3]), AnalysisError> {
    let j = wf.current(event)?;
    Ok((-j[0], [j[1], j[2], j[3]]))
}
