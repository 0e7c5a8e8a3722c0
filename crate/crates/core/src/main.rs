use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use kgbohm::cli::{run_command, run_sweep, thread_cap, CliError, Command, EXIT_CONFIG, EXIT_IO};

/// Guided worldlines of Klein-Gordon superpositions.
#[derive(Debug, Parser)]
#[command(name = "kgbohm", version)]
struct Args {
    command: Command,
    /// Scenario file, or for `sweep` a manifest of `<command> <config>` lines.
    #[arg(long)]
    config: PathBuf,
    /// Output file (default stdout); for `sweep`, the output directory
    /// (default: the manifest's directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { code(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("kgbohm: cannot read {}: {e}", args.config.display());
            return code(EXIT_CONFIG);
        }
    };

    if args.command == Command::Sweep {
        let base = args.config.parent().map(PathBuf::from).unwrap_or_default();
        let out_dir = args.out.clone().unwrap_or_else(|| base.clone());
        return match run_sweep(&text, &base, &out_dir, thread_cap()) {
            Ok(outcome) => {
                for r in outcome.rows.iter().filter(|r| r.status != 0) {
                    eprintln!("kgbohm: scenario {} ({} {}): {}", r.index, r.command, r.config, r.message);
                }
                code(outcome.exit_code())
            }
            Err(e) => {
                eprintln!("kgbohm: {e}");
                code(e.exit_code())
            }
        };
    }

    let csv = match run_command(args.command, &text) {
        Ok(csv) => csv,
        Err(e) => {
            eprintln!("kgbohm: {e}");
            return code(e.exit_code());
        }
    };
    let written = match &args.out {
        Some(path) => fs::write(path, &csv).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => std::io::stdout().write_all(csv.as_bytes()).map_err(|source| CliError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kgbohm: {e}");
            code(EXIT_IO)
        }
    }
}
