//! Guided worldlines: the velocity field v = P/E with E = −∂S/∂t and
//! P = ∇S, integrated in lab time with event detection for nodes, E = 0
//! singularities and light-speed crossings.

mod integrator;
pub mod two_mode;

use std::fmt;

use thiserror::Error;

use crate::wavefield::{Event, FieldError, FieldSample, WaveField};
use integrator::{step_factor, try_step, Segment, State};

pub use two_mode::{eta_reduced_rhs, EtaState, TwoModeParams};

/// Relative width of the lightlike band: |E² − |P|²| ≤ band·(E² + |P|²).
pub const LIGHTLIKE_BAND: f64 = 1e-9;
/// When the step controller underflows, a last accepted state with |𝓔| (or
/// R²) below this fraction of its threshold scale is reported as the
/// singularity being approached rather than as a bare underflow.
pub const SINGULAR_APPROACH_BAND: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GuidanceError {
    #[error("guidance velocity undefined at a node (R² = {r2:e} <= {threshold:e})")]
    Node { r2: f64, threshold: f64 },
    #[error("guidance velocity singular: energy density {energy_density:e} within {threshold:e} of zero")]
    ESingularity { energy_density: f64, threshold: f64 },
    #[error(transparent)]
    Field(FieldError),
}

impl From<FieldError> for GuidanceError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::NodeProximity { r2, threshold } => GuidanceError::Node { r2, threshold },
            other => GuidanceError::Field(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("integration interval must satisfy t0 < t_end (t0 = {t0}, t_end = {t_end})")]
    InvalidInterval { t0: f64, t_end: f64 },
    #[error("invalid integrator options: {0}")]
    InvalidOptions(String),
    #[error("cannot start at the initial event: {0}")]
    Start(GuidanceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CausalClass {
    Timelike,
    Spacelike,
    Lightlike,
}

impl fmt::Display for CausalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CausalClass::Timelike => "timelike",
            CausalClass::Spacelike => "spacelike",
            CausalClass::Lightlike => "lightlike",
        })
    }
}

/// Causal character of the four-momentum (E, P).
pub fn classify_causal(energy: f64, momentum: &[f64]) -> CausalClass {
    let p2: f64 = momentum.iter().map(|p| p * p).sum();
    let e2 = energy * energy;
    let band = LIGHTLIKE_BAND * (e2 + p2);
    let s = e2 - p2;
    if s > band {
        CausalClass::Timelike
    } else if s < -band {
        CausalClass::Spacelike
    } else {
        CausalClass::Lightlike
    }
}

/// v = P/E from the node-safe current jμ = Im(Φ*∂μΦ), i.e. vᵢ = −jᵢ/j₀.
pub fn guidance_velocity(sample: &FieldSample) -> Result<[f64; 3], GuidanceError> {
    velocity_from_current(&sample.current(), sample.r2, sample.node_threshold, sample.energy_threshold)
}

fn velocity_from_current(
    j: &[f64; 4],
    r2: f64,
    node_threshold: f64,
    energy_threshold: f64,
) -> Result<[f64; 3], GuidanceError> {
    if !(r2 > node_threshold) {
        return Err(GuidanceError::Node {
            r2,
            threshold: node_threshold,
        });
    }
    let energy_density = -j[0];
    if !(energy_density.abs() > energy_threshold) {
        return Err(GuidanceError::ESingularity {
            energy_density,
            threshold: energy_threshold,
        });
    }
    Ok([j[1] / energy_density, j[2] / energy_density, j[3] / energy_density])
}

/// Velocity at an event without second derivatives.
pub fn velocity_at(wf: &WaveField, event: Event) -> Result<[f64; 3], GuidanceError> {
    let (phi, dphi) = wf.value_and_gradient(event)?;
    let conj = phi.conj();
    let mut j = [0.0; 4];
    for mu in 0..=wf.dim() {
        j[mu] = (conj * dphi[mu]).im;
    }
    velocity_from_current(&j, phi.norm_sqr(), wf.node_threshold(), wf.energy_threshold())
}

/// Everything recorded at one point of a worldline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceState {
    pub t: f64,
    pub x: [f64; 3],
    pub v: [f64; 3],
    pub energy: f64,
    pub momentum: [f64; 3],
    pub r2: f64,
    pub msq: f64,
    pub causal_class: CausalClass,
}

impl GuidanceState {
    pub fn from_sample(sample: &FieldSample) -> Result<Self, GuidanceError> {
        let v = guidance_velocity(sample)?;
        let polar = sample.polar()?;
        let momentum = polar.momentum();
        Ok(GuidanceState {
            t: sample.event.t,
            x: sample.event.x,
            v,
            energy: polar.energy(),
            momentum,
            r2: polar.r2,
            msq: polar.msq,
            causal_class: classify_causal(polar.energy(), &momentum),
        })
    }

    pub fn at(wf: &WaveField, event: Event) -> Result<Self, GuidanceError> {
        GuidanceState::from_sample(&wf.evaluate(event)?)
    }

    pub fn speed(&self) -> f64 {
        norm(&self.v)
    }
}

fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Completed,
    NodeHit,
    ESingularity,
    StepUnderflow,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Completed => "completed",
            Termination::NodeHit => "node_hit",
            Termination::ESingularity => "E_singularity",
            Termination::StepUnderflow => "step_underflow",
        })
    }
}

/// Interval of lab time with |v| > 1. `v_extreme` is the recorded velocity
/// of largest magnitude inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Episode {
    pub t_start: f64,
    pub t_end: f64,
    pub v_extreme: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Defaults to 1e−14·(t_end − t0).
    pub h_min: Option<f64>,
    /// Output spacing; defaults to 1e−2·(t_end − t0).
    pub stride: Option<f64>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-9,
            atol: 1e-12,
            h_min: None,
            stride: None,
        }
    }
}

/// A guided worldline sampled at a fixed stride and at every detected event.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dim: usize,
    pub samples: Vec<GuidanceState>,
    pub termination: Termination,
    pub episodes: Vec<Episode>,
    /// Sum of the per-step local error estimates (max-norm).
    pub error_estimate: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    segments: Vec<Segment>,
}

impl Trajectory {
    pub fn t_start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn t_last(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn last(&self) -> &GuidanceState {
        &self.samples[self.samples.len() - 1]
    }

    /// Position from the integrator's continuous extension; `None` outside
    /// the integrated span.
    pub fn position_at(&self, t: f64) -> Option<[f64; 3]> {
        if !(t >= self.t_start() && t <= self.t_last()) {
            return None;
        }
        if self.segments.is_empty() {
            return Some(self.samples[0].x);
        }
        let idx = self.segments.partition_point(|s| s.t1() < t);
        let seg = &self.segments[idx.min(self.segments.len() - 1)];
        Some(seg.eval(t))
    }

    /// Whether `t` lies inside a recorded superluminal episode.
    pub fn in_episode(&self, t: f64) -> bool {
        self.episodes.iter().any(|e| t >= e.t_start && t <= e.t_end)
    }
}

struct Monitor<'a> {
    wf: &'a WaveField,
}

impl Monitor<'_> {
    fn state(&self, t: f64, x: &State) -> Result<GuidanceState, GuidanceError> {
        GuidanceState::at(self.wf, Event { t, x: *x })
    }

    /// Light-speed crossing inside [ta, tb] on the segment, by bisection.
    fn refine_crossing(&self, seg: &Segment, mut ta: f64, mut tb: f64, above_at_a: bool) -> f64 {
        for _ in 0..200 {
            let tm = 0.5 * (ta + tb);
            if tm <= ta || tm >= tb || tb - ta <= 1e-13 * tb.abs().max(1.0) {
                break;
            }
            let above = match velocity_at(self.wf, Event { t: tm, x: seg.eval(tm) }) {
                Ok(v) => norm(&v) > 1.0,
                Err(_) => true,
            };
            if above == above_at_a {
                ta = tm;
            } else {
                tb = tm;
            }
        }
        // report the endpoint closest to |v| = 1
        let gap = |t: f64| {
            velocity_at(self.wf, Event { t, x: seg.eval(t) })
                .map(|v| (norm(&v) - 1.0).abs())
                .unwrap_or(f64::INFINITY)
        };
        if gap(ta) <= gap(tb) {
            ta
        } else {
            tb
        }
    }
}

/// Integrate dx/dt = v(t, x) from (t0, x0) to t_end with an adaptive
/// Dormand–Prince 5(4) pair.
pub fn integrate(
    wf: &WaveField,
    x0: &[f64],
    t0: f64,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory, TrajectoryError> {
    if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
        return Err(TrajectoryError::InvalidInterval { t0, t_end });
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(TrajectoryError::InvalidOptions(format!(
            "tolerances must be positive (rtol = {}, atol = {})",
            opts.rtol, opts.atol
        )));
    }
    if x0.len() != wf.dim() {
        return Err(TrajectoryError::InvalidOptions(format!(
            "initial position has {} components, field has dimension {}",
            x0.len(),
            wf.dim()
        )));
    }
    let span = t_end - t0;
    let h_min = opts.h_min.unwrap_or(1e-14 * span);
    let stride = opts.stride.unwrap_or(1e-2 * span);
    if !(h_min > 0.0 && stride > 0.0) {
        return Err(TrajectoryError::InvalidOptions(format!(
            "h_min and stride must be positive (h_min = {h_min}, stride = {stride})"
        )));
    }
    let dim = wf.dim();
    let monitor = Monitor { wf };
    let start = Event::new(t0, x0);
    let first = GuidanceState::at(wf, start).map_err(TrajectoryError::Start)?;

    let mut rhs = |t: f64, x: &State| -> Result<State, GuidanceError> {
        let v = velocity_at(wf, Event { t, x: *x })?;
        if v.iter().all(|c| c.is_finite()) {
            Ok(v)
        } else {
            Err(GuidanceError::Field(FieldError::NonFinite("velocity")))
        }
    };

    let mut samples = vec![first];
    let mut episodes: Vec<Episode> = Vec::new();
    let mut open_episode: Option<Episode> = (first.speed() > 1.0).then_some(Episode {
        t_start: t0,
        t_end: t0,
        v_extreme: first.v,
    });
    let mut segments = Vec::new();
    let mut error_estimate = 0.0;
    let mut accepted_steps = 0;
    let mut rejected_steps = 0;

    let mut t = t0;
    let mut x: State = first.x;
    let mut k1 = first.v;
    let mut last_state = first;
    let mut h = (0.1 * stride).min(span);
    let mut next_output = 1usize;
    let termination;

    let bump = |ep: &mut Episode, s: &GuidanceState| {
        if s.speed() > norm(&ep.v_extreme) {
            ep.v_extreme = s.v;
        }
    };

    loop {
        if t >= t_end {
            termination = Termination::Completed;
            break;
        }
        let remaining = t_end - t;
        h = h.min(remaining);
        if h < h_min && remaining > h_min {
            termination = classify_underflow(wf, &last_state);
            break;
        }
        let trial = match try_step(&mut rhs, t, &x, &k1, h, dim, opts.rtol, opts.atol) {
            Ok(tr) => tr,
            Err(_) => {
                rejected_steps += 1;
                h *= 0.25;
                continue;
            }
        };
        if !(trial.err <= 1.0) {
            rejected_steps += 1;
            h *= step_factor(trial.err).min(0.9);
            continue;
        }
        let t_new = if h == remaining { t_end } else { t + h };
        let end_state = match monitor.state(t_new, &trial.y1) {
            Ok(s) => s,
            Err(_) => {
                rejected_steps += 1;
                h *= 0.25;
                continue;
            }
        };
        accepted_steps += 1;
        error_estimate += trial.local_error;
        let seg = trial.segment;

        let mut pending: Vec<GuidanceState> = Vec::new();
        let above_a = last_state.speed() > 1.0;
        let above_b = end_state.speed() > 1.0;
        if above_a != above_b {
            let tc = monitor.refine_crossing(&seg, t, t_new, above_a);
            if let Ok(cs) = monitor.state(tc, &seg.eval(tc)) {
                if above_a {
                    if let Some(mut ep) = open_episode.take() {
                        ep.t_end = tc;
                        episodes.push(ep);
                    }
                } else {
                    open_episode = Some(Episode {
                        t_start: tc,
                        t_end: tc,
                        v_extreme: cs.v,
                    });
                }
                pending.push(cs);
            }
        }
        while next_output as f64 * stride + t0 <= t_new {
            let to = t0 + next_output as f64 * stride;
            next_output += 1;
            if to <= t {
                continue;
            }
            if let Ok(s) = monitor.state(to, &seg.eval(to)) {
                pending.push(s);
            }
        }
        pending.push(end_state);
        pending.sort_by(|a, b| a.t.total_cmp(&b.t));

        let mut emitted: Vec<GuidanceState> = Vec::with_capacity(pending.len());
        for s in pending {
            let prev_t = emitted.last().map_or(samples[samples.len() - 1].t, |p| p.t);
            if s.t > prev_t {
                emitted.push(s);
            }
        }
        if let Some(ep) = open_episode.as_mut() {
            for s in &emitted {
                if s.t >= ep.t_start {
                    bump(ep, s);
                }
            }
        }
        // step endpoints are kept only when they coincide with an output time
        // or the end of the run; everything else is interior to the stride
        let keep_end = t_new >= t_end;
        for s in emitted {
            let is_end = s.t == t_new;
            let on_stride = ((s.t - t0) / stride).fract().abs() < 1e-12 || ((s.t - t0) / stride).fract() > 1.0 - 1e-12;
            let is_event = (norm(&s.v) - 1.0).abs() < 1e-6 && !is_end;
            if !is_end || keep_end || on_stride || is_event {
                samples.push(s);
            }
        }

        segments.push(seg);
        t = t_new;
        x = trial.y1;
        k1 = trial.k7;
        last_state = end_state;
        h *= step_factor(trial.err);
    }

    if termination != Termination::Completed {
        // the final accepted state closes the record
        if last_state.t > samples[samples.len() - 1].t {
            samples.push(last_state);
        }
    }
    if let Some(mut ep) = open_episode.take() {
        ep.t_end = last_state.t;
        episodes.push(ep);
    }

    Ok(Trajectory {
        dim,
        samples,
        termination,
        episodes,
        error_estimate,
        accepted_steps,
        rejected_steps,
        segments,
    })
}

fn classify_underflow(wf: &WaveField, last: &GuidanceState) -> Termination {
    let s2 = wf.amplitude_sum() * wf.amplitude_sum();
    let energy_density = last.energy * last.r2;
    if energy_density.abs() <= SINGULAR_APPROACH_BAND * s2 * wf.max_omega() {
        Termination::ESingularity
    } else if last.r2 <= SINGULAR_APPROACH_BAND * s2 {
        Termination::NodeHit
    } else {
        Termination::StepUnderflow
    }
}
