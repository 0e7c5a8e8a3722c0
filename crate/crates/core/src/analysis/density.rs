//! Time averages of (𝓔, 𝓟) at a fixed position over (−T/2, T/2), and the
//! k-space quadratures they tend to.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{far_field_velocity_limit, AnalysisError};
use crate::packet::PacketSpec;
use crate::quadrature::{gauss_legendre_unit, QuadratureRule};
use crate::wavefield::WaveField;

const PANEL_ORDER: usize = 16;
const ORACLE_NODES: usize = 8192;
/// Relative size of rounding noise in a 16-node panel sum.
const ROUNDING_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityOptions {
    /// Tolerance of the adaptive time quadrature, relative to ∫|𝓔|dt over
    /// the passage of the packet.
    pub rel_tol: f64,
    /// Largest phase step |x − v_g t|·Δk between neighbouring k nodes
    /// anywhere in the window; sets the number of modes.
    pub phase_per_node: f64,
    pub max_depth: usize,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions {
            rel_tol: 1e-11,
            phase_per_node: 1.0,
            max_depth: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityAverageReport {
    /// Averaging span T.
    pub span: f64,
    pub x: f64,
    /// Modes used to discretize the packet.
    pub modes: usize,
    pub avg_energy_density: f64,
    pub avg_momentum_density: f64,
    /// c·∫|f|²ω²/k dk
    pub oracle_energy: f64,
    /// c·∫|f|²ω dk
    pub oracle_momentum: f64,
    /// Least-squares c shared by both oracle integrals.
    pub fit_constant: f64,
    pub ratio: f64,
    pub oracle_ratio: f64,
    pub time_nodes: usize,
}

/// Modes needed so that the discretized packet stays faithful at `x` for all
/// |t| ≤ T/2: the mode sum revives spuriously once the phase
/// (x − v_g t)·k moves by O(1) rad between neighbouring nodes.
pub fn required_modes(spec: &PacketSpec, m: f64, x: f64, span: f64, opts: &DensityOptions) -> usize {
    let (lo, hi) = spec.interval();
    let vg = |k: f64| k / (m * m + k * k).sqrt();
    let vmax = vg(lo).abs().max(vg(hi).abs());
    let reach = x.abs() + vmax * 0.5 * span;
    let n = ((hi - lo) * reach / opts.phase_per_node).ceil() as usize;
    n.max(spec.n()).div_ceil(PANEL_ORDER) * PANEL_ORDER
}

/// Field at one position, reduced to per-mode coefficients aⱼe^{ikⱼx}.
struct Station {
    coeff: Vec<Complex64>,
    omega: Vec<f64>,
    k: Vec<f64>,
}

impl Station {
    fn new(wf: &WaveField, x: f64) -> Self {
        let modes = wf.modes();
        Station {
            coeff: modes
                .iter()
                .map(|md| {
                    let (s, c) = (md.wavevector()[0] * x).sin_cos();
                    md.amplitude() * Complex64::new(c, s)
                })
                .collect(),
            omega: modes.iter().map(|md| md.omega()).collect(),
            k: modes.iter().map(|md| md.wavevector()[0]).collect(),
        }
    }

    /// (𝓔, 𝓟) at time t.
    fn densities(&self, t: f64) -> [f64; 2] {
        let mut phi = Complex64::default();
        let mut w_phi = Complex64::default();
        let mut k_phi = Complex64::default();
        for ((c, &w), &k) in self.coeff.iter().zip(&self.omega).zip(&self.k) {
            let (s, co) = (-w * t).sin_cos();
            let e = c * Complex64::new(co, s);
            phi += e;
            w_phi += w * e;
            k_phi += k * e;
        }
        // ∂tΦ = −iΣωe, ∂xΦ = iΣke
        let conj = phi.conj();
        [(conj * w_phi).re, (conj * k_phi).re]
    }
}

struct TimeQuadrature<'a> {
    station: &'a Station,
    x: Vec<f64>,
    w: Vec<f64>,
    max_depth: usize,
}

impl TimeQuadrature<'_> {
    /// (∫𝓔, ∫𝓟, ∫(|𝓔| + |𝓟|)) over one panel.
    fn panel(&self, lo: f64, hi: f64) -> [f64; 3] {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = [0.0; 3];
        for (u, w) in self.x.iter().zip(&self.w) {
            let d = self.station.densities(mid + half * u);
            acc[0] += w * d[0];
            acc[1] += w * d[1];
            acc[2] += w * (d[0].abs() + d[1].abs());
        }
        [acc[0] * half, acc[1] * half, acc[2] * half]
    }

    /// Adaptive bisection; `tol` is an absolute tolerance per unit time.
    /// Differences at the rounding level of the panel sums always pass.
    fn adaptive(&self, lo: f64, hi: f64, whole: [f64; 3], tol: f64, depth: usize, evals: &mut usize) -> [f64; 3] {
        let mid = 0.5 * (lo + hi);
        let left = self.panel(lo, mid);
        let right = self.panel(mid, hi);
        *evals += 2 * PANEL_ORDER;
        let sum = [left[0] + right[0], left[1] + right[1], left[2] + right[2]];
        let err = (sum[0] - whole[0]).abs().max((sum[1] - whole[1]).abs());
        let floor = ROUNDING_FLOOR * sum[2];
        if err <= (tol * (hi - lo)).max(floor) || depth >= self.max_depth || mid <= lo || mid >= hi {
            return sum;
        }
        let a = self.adaptive(lo, mid, left, tol, depth + 1, evals);
        let b = self.adaptive(mid, hi, right, tol, depth + 1, evals);
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    }
}

/// Panel edges covering [lo, hi]: uniform panels of width `h` over the core
/// [c_lo, c_hi], then widths doubling outward.
fn panel_edges(lo: f64, hi: f64, c_lo: f64, c_hi: f64, h: f64) -> Vec<f64> {
    let c_lo = c_lo.clamp(lo, hi);
    let c_hi = c_hi.clamp(lo, hi);
    let mut left = Vec::new();
    let mut w = h;
    let mut e = c_lo;
    while e > lo {
        e = (e - w).max(lo);
        left.push(e);
        w *= 2.0;
    }
    left.reverse();
    let mut edges = left;
    let n_core = ((c_hi - c_lo) / h).ceil().max(1.0) as usize;
    for i in 0..=n_core {
        let t = if i == n_core { c_hi } else { c_lo + (c_hi - c_lo) * i as f64 / n_core as f64 };
        edges.push(t);
    }
    let mut w = h;
    let mut e = c_hi;
    while e < hi {
        e = (e + w).min(hi);
        edges.push(e);
        w *= 2.0;
    }
    edges.dedup();
    edges
}

/// ∫(𝓔, 𝓟)dt over (−T/2, T/2) at `x`, with the number of time nodes used.
fn window_integral(wf: &WaveField, x: f64, span: f64, core: (f64, f64), opts: &DensityOptions) -> ([f64; 2], usize) {
    let station = Station::new(wf, x);
    let (ux, uw) = gauss_legendre_unit(PANEL_ORDER);
    let quad = TimeQuadrature {
        station: &station,
        x: ux,
        w: uw,
        max_depth: opts.max_depth,
    };
    let (wmin, wmax) = station
        .omega
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &w| (a.min(w), b.max(w)));
    let beat = wmax - wmin;
    // a panel spans half a period of the fastest beat
    let h = if beat > 0.0 { (std::f64::consts::PI / beat).min(span) } else { span };
    let (lo, hi) = (-0.5 * span, 0.5 * span);
    let edges = panel_edges(lo, hi, core.0, core.1, h);

    let coarse: Vec<[f64; 3]> = edges.par_windows(2).map(|e| quad.panel(e[0], e[1])).collect();
    // magnitude scale from the core passage
    let scale: f64 = edges
        .windows(2)
        .zip(&coarse)
        .filter(|(e, _)| e[0] >= core.0 - h && e[1] <= core.1 + h)
        .map(|(_, c)| c[2])
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let tol = opts.rel_tol * scale / span;
    let refined: Vec<([f64; 3], usize)> = edges
        .par_windows(2)
        .zip(coarse.par_iter())
        .map(|(e, &c)| {
            let mut evals = PANEL_ORDER;
            let v = quad.adaptive(e[0], e[1], c, tol, 0, &mut evals);
            (v, evals)
        })
        .collect();
    let mut total = [0.0; 2];
    let mut evals = 0;
    for (v, n) in refined {
        total[0] += v[0];
        total[1] += v[1];
        evals += n;
    }
    (total, evals)
}

/// (∫|f|²ω²/k dk, ∫|f|²ω dk): the long-time averages of 𝓔 and 𝓟 up to a
/// common factor.
pub fn density_oracle(spec: &PacketSpec, m: f64) -> Result<(f64, f64), AnalysisError> {
    if !spec.support_positive() {
        return Err(AnalysisError::Domain(
            "density averages need a packet with support_positive set (k > 0 throughout)".into(),
        ));
    }
    let fine = spec.with_nodes(ORACLE_NODES, QuadratureRule::CompositeGaussLegendre { order: PANEL_ORDER })?;
    Ok((
        fine.weighted_integral(|k| (m * m + k * k) / k),
        fine.weighted_integral(|k| (m * m + k * k).sqrt()),
    ))
}

/// Long-time averages of (𝓔, 𝓟) at `x` over (−T/2, T/2) for a positive-support
/// packet, against the k-space quadratures ∫|f|²ω²/k and ∫|f|²ω.
pub fn long_time_density_average(
    spec: &PacketSpec,
    m: f64,
    x: f64,
    span: f64,
    opts: &DensityOptions,
) -> Result<DensityAverageReport, AnalysisError> {
    if !spec.support_positive() {
        return Err(AnalysisError::Domain(
            "density averages need a packet with support_positive set (k > 0 throughout)".into(),
        ));
    }
    if !(span.is_finite() && span > 0.0) {
        return Err(AnalysisError::Domain(format!("averaging span must be positive, got {span}")));
    }
    if !(m.is_finite() && m > 0.0) {
        return Err(AnalysisError::Domain(format!("mass must be positive, got {m}")));
    }
    if !x.is_finite() {
        return Err(AnalysisError::Domain(format!("position must be finite, got {x}")));
    }
    let n = required_modes(spec, m, x, span, opts);
    let fine = spec.with_nodes(n, QuadratureRule::CompositeGaussLegendre { order: PANEL_ORDER })?;
    let wf = fine.build_field(m)?;

    // the packet crosses x around x/v; its extent there sets the core width
    let v = far_field_velocity_limit(spec, m)[0];
    let (klo, khi) = spec.interval();
    let vg = |k: f64| k / (m * m + k * k).sqrt();
    let spread = (vg(khi) - vg(klo)).abs();
    let t_c = if v.abs() > 1e-12 { x / v } else { 0.0 };
    let half = (40.0 / (khi - klo) + spread * t_c.abs()) / v.abs().max(0.05);
    let (integral, time_nodes) = window_integral(&wf, x, span, (t_c - half, t_c + half), opts);

    let avg_e = integral[0] / span;
    let avg_p = integral[1] / span;
    let (i_e, i_p) = density_oracle(spec, m)?;
    let c = (avg_e * i_e + avg_p * i_p) / (i_e * i_e + i_p * i_p);
    Ok(DensityAverageReport {
        span,
        x,
        modes: wf.modes().len(),
        avg_energy_density: avg_e,
        avg_momentum_density: avg_p,
        oracle_energy: c * i_e,
        oracle_momentum: c * i_p,
        fit_constant: c,
        ratio: avg_p / avg_e,
        oracle_ratio: i_p / i_e,
        time_nodes,
    })
}

/// Reports for each span in `spans`, in order.
pub fn density_ladder(
    spec: &PacketSpec,
    m: f64,
    x: f64,
    spans: &[f64],
    opts: &DensityOptions,
) -> Result<Vec<DensityAverageReport>, AnalysisError> {
    spans
        .iter()
        .map(|&s| long_time_density_average(spec, m, x, s, opts))
        .collect()
}
