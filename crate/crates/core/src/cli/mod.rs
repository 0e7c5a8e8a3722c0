//! Command runners behind the `kgbohm` binary. Every runner returns the CSV
//! text it would print, so the binary only handles files and exit codes.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{
    density_ladder, eq14_prediction, far_field_scan, far_field_velocity_limit, time_average_velocity,
    AnalysisError, DensityOptions,
};
use crate::packet::{discretize_packet, PacketError, PacketSpec};
use crate::trajectory::{integrate, GuidanceError, TrajectoryError};
use crate::wavefield::WaveField;
pub use config::{parse_config, ConfigError, ParseError, ScenarioConfig, Source, ValidationError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SINGULAR_START: i32 = 3;
pub const EXIT_SWEEP_ALL_FAILED: i32 = 4;

/// Caps the worker count of `sweep`.
pub const THREADS_ENV: &str = "KGBOHM_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Trajectory,
    Farfield,
    Density,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Trajectory => "trajectory",
            Command::Farfield => "farfield",
            Command::Density => "density",
            Command::Sweep => "sweep",
        }
    }

    fn parse(s: &str) -> Option<Command> {
        [Command::Trajectory, Command::Farfield, Command::Density, Command::Sweep]
            .into_iter()
            .find(|c| c.name() == s)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Unsupported(String),
    #[error("cannot start: {0}")]
    SingularStart(GuidanceError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Packet(#[from] PacketError),
    #[error(transparent)]
    Trajectory(TrajectoryError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::SingularStart(_) => EXIT_SINGULAR_START,
            CliError::Io { .. } => EXIT_IO,
            _ => EXIT_CONFIG,
        }
    }
}

fn missing(key: &str, command: &str) -> CliError {
    CliError::Config(ConfigError::Validation(ValidationError {
        key: key.into(),
        message: format!("required by the {command} command"),
    }))
}

/// 17 significant digits: round-trips every double.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn field_of(cfg: &ScenarioConfig) -> Result<WaveField, CliError> {
    match &cfg.source {
        Source::TwoMode(p) => Ok(p.wavefield()),
        Source::Packet(spec) => Ok(discretize_packet(spec, cfg.m)?),
    }
}

fn packet_of<'a>(cfg: &'a ScenarioConfig, command: &str) -> Result<&'a PacketSpec, CliError> {
    match &cfg.source {
        Source::Packet(spec) => Ok(spec),
        Source::TwoMode(_) => Err(CliError::Config(ConfigError::Validation(ValidationError {
            key: "scenario".into(),
            message: format!("the {command} command needs scenario = packet"),
        }))),
    }
}

pub fn run_trajectory_command(cfg: &ScenarioConfig) -> Result<String, CliError> {
    let x0 = cfg.x0.ok_or_else(|| missing("x0", "trajectory"))?;
    let t_end = cfg.t_end.ok_or_else(|| missing("t_end", "trajectory"))?;
    let wf = field_of(cfg)?;
    let traj = integrate(&wf, &[x0], cfg.t0, t_end, &cfg.integrator).map_err(|e| match e {
        TrajectoryError::Start(g) => CliError::SingularStart(g),
        other => CliError::Trajectory(other),
    })?;

    let mut out = String::from("t,x,v,E,P,R2,Msq,causal_class,in_episode\n");
    for s in &traj.samples {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            num(s.t),
            num(s.x[0]),
            num(s.v[0]),
            num(s.energy),
            num(s.momentum[0]),
            num(s.r2),
            num(s.msq),
            s.causal_class,
            u8::from(traj.in_episode(s.t))
        )
        .unwrap();
    }
    let window = cfg
        .outputs
        .window
        .unwrap_or((cfg.t0 + 0.5 * (traj.t_last() - cfg.t0), traj.t_last()));
    let mean = time_average_velocity(&traj, window).map_or(f64::NAN, |r| r.mean_v[0]);
    writeln!(out, "# termination={}", traj.termination).unwrap();
    writeln!(out, "# episodes={}", traj.episodes.len()).unwrap();
    writeln!(out, "# mean_v_window={}", num(mean)).unwrap();
    if let Source::TwoMode(p) = &cfg.source {
        writeln!(out, "# eq14_prediction={}", num(eq14_prediction(p.mass, p.omega)?)).unwrap();
    }
    Ok(out)
}

/// |x|κ ladder from 0.1 to 1000, four per decade.
pub fn default_probe_distances() -> Vec<f64> {
    (0..=16).map(|i| 10f64.powf(-1.0 + 0.25 * i as f64)).collect()
}

pub fn run_farfield_command(cfg: &ScenarioConfig) -> Result<String, CliError> {
    let spec = packet_of(cfg, "farfield")?;
    let kappa = spec.bandwidth();
    let probes = match &cfg.outputs.probes {
        Some(p) => p.clone(),
        None => default_probe_distances().into_iter().map(|d| d / kappa).collect(),
    };
    let reports = far_field_scan(spec, cfg.m, cfg.t0, &probes)?;
    let mut out = String::from("probe_x,distance_in_bandwidths,exact_v,limit_v,deviation,status\n");
    for r in &reports {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            num(r.probe_x[0]),
            num(r.distance_in_bandwidths),
            num(r.exact_v.map_or(f64::NAN, |v| v[0])),
            num(r.limit_v[0]),
            num(r.deviation),
            r.status
        )
        .unwrap();
    }
    writeln!(out, "# limit_v={}", num(far_field_velocity_limit(spec, cfg.m)[0])).unwrap();
    Ok(out)
}

pub fn run_density_command(cfg: &ScenarioConfig) -> Result<String, CliError> {
    let spec = packet_of(cfg, "density")?;
    if !spec.support_positive() {
        return Err(CliError::Config(ConfigError::Validation(ValidationError {
            key: "packet.support_positive".into(),
            message: "the density command needs positive k support (set packet.support_positive = true)".into(),
        })));
    }
    let spans: Vec<f64> = (0..cfg.outputs.span_levels)
        .map(|i| cfg.outputs.span * 2f64.powi(i as i32))
        .collect();
    let reports = density_ladder(spec, cfg.m, cfg.x0.unwrap_or(0.0), &spans, &DensityOptions::default())?;
    let mut out = String::from("T,avg_E,avg_P,ratio,oracle_E,oracle_P,oracle_ratio\n");
    for r in &reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            num(r.span),
            num(r.avg_energy_density),
            num(r.avg_momentum_density),
            num(r.ratio),
            num(r.oracle_energy),
            num(r.oracle_momentum),
            num(r.oracle_ratio)
        )
        .unwrap();
    }
    Ok(out)
}

/// Parse `text` and run a single (non-sweep) command on it.
pub fn run_command(command: Command, text: &str) -> Result<String, CliError> {
    let cfg = parse_config(text)?;
    match command {
        Command::Trajectory => run_trajectory_command(&cfg),
        Command::Farfield => run_farfield_command(&cfg),
        Command::Density => run_density_command(&cfg),
        Command::Sweep => Err(CliError::Unsupported("sweep manifests cannot be nested".into())),
    }
}

/// One manifest line: `<command> <config-path>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepItem {
    pub command: String,
    pub config: String,
}

pub fn parse_manifest(text: &str) -> Vec<SweepItem> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            let mut parts = l.splitn(2, char::is_whitespace);
            SweepItem {
                command: parts.next().unwrap_or("").to_string(),
                config: parts.next().unwrap_or("").trim().to_string(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub command: String,
    pub config: String,
    pub status: i32,
    pub output: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub index_path: PathBuf,
}

impl SweepOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.rows.iter().any(|r| r.status == EXIT_OK) {
            EXIT_OK
        } else {
            EXIT_SWEEP_ALL_FAILED
        }
    }
}

/// Worker count from `KGBOHM_THREADS`; `None` when unset or unusable.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok().filter(|&n| n > 0)
}

fn run_item(i: usize, item: &SweepItem, base: &Path, out_dir: &Path) -> SweepRow {
    let mut row = SweepRow {
        index: i,
        command: item.command.clone(),
        config: item.config.clone(),
        status: EXIT_OK,
        output: String::new(),
        message: String::new(),
    };
    let result = (|| -> Result<String, CliError> {
        let command = Command::parse(&item.command)
            .ok_or_else(|| CliError::Unsupported(format!("unknown command `{}`", item.command)))?;
        if item.config.is_empty() {
            return Err(CliError::Unsupported("manifest line has no config path".into()));
        }
        let path = base.join(&item.config);
        let text = fs::read_to_string(&path).map_err(|e| {
            CliError::Unsupported(format!("cannot read {}: {e}", path.display()))
        })?;
        let csv = run_command(command, &text)?;
        let name = format!("scenario_{i:03}_{}.csv", command.name());
        let target = out_dir.join(&name);
        fs::write(&target, csv).map_err(|source| CliError::Io {
            path: target.clone(),
            source,
        })?;
        Ok(name)
    })();
    match result {
        Ok(name) => row.output = name,
        Err(e) => {
            row.status = e.exit_code();
            row.message = e.to_string();
        }
    }
    row
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Run every manifest entry independently (at most `threads` at a time) and
/// write `index.csv` into `out_dir`, rows in manifest order. Config paths are
/// relative to `base`.
pub fn run_sweep(manifest: &str, base: &Path, out_dir: &Path, threads: Option<usize>) -> Result<SweepOutcome, CliError> {
    let items = parse_manifest(manifest);
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Unsupported(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        items
            .par_iter()
            .enumerate()
            .map(|(i, item)| run_item(i, item, base, out_dir))
            .collect()
    });

    let mut index = String::from("index,command,config,status,output,message\n");
    for r in &rows {
        writeln!(
            index,
            "{},{},{},{},{},{}",
            r.index,
            csv_field(&r.command),
            csv_field(&r.config),
            r.status,
            csv_field(&r.output),
            csv_field(&r.message)
        )
        .unwrap();
    }
    let index_path = out_dir.join("index.csv");
    fs::write(&index_path, index).map_err(|source| CliError::Io {
        path: index_path.clone(),
        source,
    })?;
    Ok(SweepOutcome { rows, index_path })
}
