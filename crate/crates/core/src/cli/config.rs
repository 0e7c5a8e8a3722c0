//! Line-based `key = value` scenario files.
//!
//! ```text
//! scenario = two_mode        # or packet
//! m = 1
//! omega = 3                  # two_mode only
//! A = 0.6666666667           # two_mode only
//! packet.family = gaussian   # packet only: gaussian | tophat
//! packet.k0 = 1              # gaussian
//! packet.sigma = 0.2         # gaussian
//! packet.kmin = 0.5          # tophat
//! packet.kmax = 1.5          # tophat
//! packet.n = 512
//! packet.rule = gauss_legendre          # optional, or composite_gauss_legendre
//! packet.support_positive = true        # optional, default false
//! x0 = 0
//! t0 = 0
//! t_end = 200
//! integrator.rtol = 1e-9
//! integrator.atol = 1e-12
//! outputs.stride = 0.5
//! outputs.probes = 10, 20, 40          # farfield probe positions
//! outputs.window = 100, 200            # averaging window (t_lo, t_hi)
//! outputs.T = 1000                     # first density span
//! outputs.T_levels = 3                 # spans T, 2T, 4T, ...
//! ```

use std::collections::HashMap;
use std::str::FromStr;

use thiserror::Error;

use crate::packet::{PacketSpec, Profile};
use crate::quadrature::{QuadratureRule, MAX_SINGLE_PANEL_ORDER};
use crate::trajectory::{IntegratorOptions, TwoModeParams};

pub const KEYS: &[&str] = &[
    "scenario",
    "m",
    "omega",
    "A",
    "packet.family",
    "packet.k0",
    "packet.sigma",
    "packet.kmin",
    "packet.kmax",
    "packet.n",
    "packet.rule",
    "packet.support_positive",
    "x0",
    "t0",
    "t_end",
    "integrator.rtol",
    "integrator.atol",
    "outputs.stride",
    "outputs.probes",
    "outputs.window",
    "outputs.T",
    "outputs.T_levels",
];

const TWO_MODE_KEYS: &[&str] = &["omega", "A"];
const PACKET_KEYS: &[&str] = &[
    "packet.family",
    "packet.k0",
    "packet.sigma",
    "packet.kmin",
    "packet.kmax",
    "packet.n",
    "packet.rule",
    "packet.support_positive",
];

pub const DEFAULT_SPAN: f64 = 1000.0;
pub const DEFAULT_SPAN_LEVELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid `{key}`: {message}")]
pub struct ValidationError {
    pub key: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    TwoMode(TwoModeParams),
    Packet(PacketSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub stride: Option<f64>,
    pub probes: Option<Vec<f64>>,
    pub window: Option<(f64, f64)>,
    pub span: f64,
    pub span_levels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub m: f64,
    pub source: Source,
    pub x0: Option<f64>,
    pub t0: f64,
    pub t_end: Option<f64>,
    pub integrator: IntegratorOptions,
    pub outputs: Outputs,
}

impl ScenarioConfig {
    pub fn scenario(&self) -> &'static str {
        match self.source {
            Source::TwoMode(_) => "two_mode",
            Source::Packet(_) => "packet",
        }
    }
}

struct Entry {
    line: usize,
    value: String,
}

struct Table {
    entries: HashMap<&'static str, Entry>,
}

fn invalid(key: &str, message: impl Into<String>) -> ValidationError {
    ValidationError {
        key: key.to_string(),
        message: message.into(),
    }
}

impl Table {
    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn parse<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| {
                ParseError {
                    line: e.line,
                    message: format!("`{key}` expects {what}, got `{}`", e.value),
                }
                .into()
            }),
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.parse::<f64>(key, "a number")? {
            Some(v) if !v.is_finite() => Err(invalid(key, format!("must be finite, got {v}")).into()),
            other => Ok(other),
        }
    }

    fn required_real(&self, key: &str) -> Result<f64, ConfigError> {
        self.real(key)?.ok_or_else(|| invalid(key, "required but missing").into())
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(e) = self.raw(key) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for part in e.value.split(',') {
            let v: f64 = part.trim().parse().map_err(|_| ParseError {
                line: e.line,
                message: format!("`{key}` expects comma-separated numbers, got `{}`", e.value),
            })?;
            if !v.is_finite() {
                return Err(invalid(key, format!("entries must be finite, got {v}")).into());
            }
            out.push(v);
        }
        Ok(Some(out))
    }
}

fn tokenize(text: &str) -> Result<Table, ParseError> {
    let mut entries: HashMap<&'static str, Entry> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(ParseError {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let (k, v) = (k.trim(), v.trim());
        let Some(&key) = KEYS.iter().find(|&&known| known == k) else {
            return Err(ParseError {
                line,
                message: format!("unknown key `{k}`"),
            });
        };
        if v.is_empty() {
            return Err(ParseError {
                line,
                message: format!("`{key}` has no value"),
            });
        }
        if let Some(prev) = entries.get(key) {
            return Err(ParseError {
                line,
                message: format!("`{key}` already set on line {}", prev.line),
            });
        }
        entries.insert(
            key,
            Entry {
                line,
                value: v.to_string(),
            },
        );
    }
    Ok(Table { entries })
}

fn forbid(table: &Table, keys: &[&str], scenario: &str) -> Result<(), ValidationError> {
    match keys.iter().find(|k| table.has(k)) {
        Some(k) => Err(invalid(k, format!("not used by scenario {scenario}"))),
        None => Ok(()),
    }
}

fn parse_source(table: &Table, m: f64) -> Result<Source, ConfigError> {
    let scenario = table
        .raw("scenario")
        .ok_or_else(|| invalid("scenario", "required but missing"))?;
    match scenario.value.as_str() {
        "two_mode" => {
            forbid(table, PACKET_KEYS, "two_mode")?;
            let omega = table.required_real("omega")?;
            let a = table.required_real("A")?;
            if !(omega > m) {
                return Err(invalid("omega", format!("mass shell requires omega > m = {m}, got {omega}")).into());
            }
            let params = TwoModeParams::new(m, omega, a).map_err(|e| invalid("A", e))?;
            Ok(Source::TwoMode(params))
        }
        "packet" => {
            forbid(table, TWO_MODE_KEYS, "packet")?;
            let family = table
                .raw("packet.family")
                .ok_or_else(|| invalid("packet.family", "required but missing"))?;
            let profile = match family.value.as_str() {
                "gaussian" => {
                    forbid(table, &["packet.kmin", "packet.kmax"], "packet with family gaussian")?;
                    Profile::Gaussian {
                        k0: table.required_real("packet.k0")?,
                        sigma: table.required_real("packet.sigma")?,
                    }
                }
                "tophat" => {
                    forbid(table, &["packet.k0", "packet.sigma"], "packet with family tophat")?;
                    Profile::TopHat {
                        kmin: table.required_real("packet.kmin")?,
                        kmax: table.required_real("packet.kmax")?,
                    }
                }
                other => {
                    return Err(invalid("packet.family", format!("expected gaussian or tophat, got `{other}`")).into())
                }
            };
            let n = table
                .parse::<usize>("packet.n", "a positive integer")?
                .ok_or_else(|| invalid("packet.n", "required but missing"))?;
            let rule = match table.raw("packet.rule") {
                None => QuadratureRule::default(),
                Some(e) => e.value.parse().map_err(|msg: String| invalid("packet.rule", msg))?,
            };
            let support_positive = table
                .parse::<bool>("packet.support_positive", "true or false")?
                .unwrap_or(false);
            if n < 2 || (rule == QuadratureRule::GaussLegendre && n > MAX_SINGLE_PANEL_ORDER) {
                return Err(invalid(
                    "packet.n",
                    format!("need 2 <= n (and n <= {MAX_SINGLE_PANEL_ORDER} for gauss_legendre), got {n}"),
                )
                .into());
            }
            let profile_key = match profile {
                Profile::Gaussian { .. } => "packet.sigma",
                Profile::TopHat { .. } => "packet.kmax",
            };
            PacketSpec::new(profile, n, rule, false).map_err(|e| invalid(profile_key, e.to_string()))?;
            let spec = PacketSpec::new(profile, n, rule, support_positive)
                .map_err(|e| invalid("packet.support_positive", e.to_string()))?;
            Ok(Source::Packet(spec))
        }
        other => Err(invalid("scenario", format!("expected two_mode or packet, got `{other}`")).into()),
    }
}

/// Parse and validate a scenario file. Defaults apply only to the
/// `integrator.*` and `outputs.*` keys and to `t0`.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let table = tokenize(text)?;
    let m = table.required_real("m")?;
    if !(m > 0.0) {
        return Err(invalid("m", format!("mass must be positive, got {m}")).into());
    }
    let source = parse_source(&table, m)?;

    let x0 = table.real("x0")?;
    let t0 = table.real("t0")?.unwrap_or(0.0);
    let t_end = table.real("t_end")?;
    if let Some(te) = t_end {
        if !(te > t0) {
            return Err(invalid("t_end", format!("must exceed t0 = {t0}, got {te}")).into());
        }
    }

    let defaults = IntegratorOptions::default();
    let rtol = table.real("integrator.rtol")?.unwrap_or(defaults.rtol);
    let atol = table.real("integrator.atol")?.unwrap_or(defaults.atol);
    if !(rtol > 0.0) {
        return Err(invalid("integrator.rtol", format!("must be positive, got {rtol}")).into());
    }
    if !(atol > 0.0) {
        return Err(invalid("integrator.atol", format!("must be positive, got {atol}")).into());
    }

    let stride = table.real("outputs.stride")?;
    if let Some(s) = stride {
        if !(s > 0.0) {
            return Err(invalid("outputs.stride", format!("must be positive, got {s}")).into());
        }
    }
    let probes = table.list("outputs.probes")?;
    let window = match table.list("outputs.window")? {
        None => None,
        Some(w) if w.len() == 2 && w[0] < w[1] => Some((w[0], w[1])),
        Some(w) => return Err(invalid("outputs.window", format!("expected `t_lo, t_hi` with t_lo < t_hi, got {w:?}")).into()),
    };
    let span = table.real("outputs.T")?.unwrap_or(DEFAULT_SPAN);
    if !(span > 0.0) {
        return Err(invalid("outputs.T", format!("must be positive, got {span}")).into());
    }
    let span_levels = table
        .parse::<usize>("outputs.T_levels", "a positive integer")?
        .unwrap_or(DEFAULT_SPAN_LEVELS);
    if span_levels == 0 {
        return Err(invalid("outputs.T_levels", "must be at least 1").into());
    }

    Ok(ScenarioConfig {
        m,
        source,
        x0,
        t0,
        t_end,
        integrator: IntegratorOptions {
            rtol,
            atol,
            h_min: None,
            stride,
        },
        outputs: Outputs {
            stride,
            probes,
            window,
            span,
            span_levels,
        },
    })
}
