use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pdc_bell::bell::{chsh_decomposition, chsh_tables, optimize_angles, ChshSettings};
use pdc_bell::lhv::{lhv_feasible, LhvVerdict, TableSet};
use pdc_bell::measurement::{joint_distribution, Block, PolarizerAngle};
use pdc_bell::montecarlo::{estimate_correlators, read_event_log, run_experiment, validate_config, write_event_log, RunConfig};
use pdc_bell::optics::vacuum_diluted_state;
use pdc_bell::Error;
use serde::Serialize;

const EXIT_INFEASIBLE: u8 = 3;
const EXIT_INPUT: u8 = 2;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(name = "pdc-bell", version, about = "Bell tests with an unheralded down-conversion pair source")]
struct Cli {
    /// Directory for relative `--out` paths.
    #[arg(long, global = true, env = "PDC_BELL_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the state at the detection stations and its block weights.
    State {
        #[arg(long, default_value_t = 1.0)]
        p_pair: f64,
    },
    /// Joint outcome distribution for one setting pair, or all four CHSH
    /// tables with `--settings`.
    Table {
        #[arg(long, value_parser = parse_angle, required_unless_present = "settings", conflicts_with = "settings")]
        xi: Option<f64>,
        #[arg(long, value_parser = parse_angle, required_unless_present = "settings", conflicts_with = "settings")]
        eta: Option<f64>,
        #[arg(long, value_parser = parse_settings)]
        settings: Option<ChshSettings>,
        #[arg(long, default_value_t = 1.0)]
        p_pair: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CHSH value with its favorable/unfavorable decomposition.
    Chsh {
        #[arg(long, value_parser = parse_settings)]
        settings: ChshSettings,
        #[arg(long, default_value_t = 1.0)]
        p_pair: f64,
    },
    /// Search the four analyzer angles for the largest CHSH value.
    Optimize {
        #[arg(long, default_value_t = 1.0)]
        p_pair: f64,
    },
    /// Decide whether four tables admit a local hidden variable model.
    /// Exits 0 if they do and 3 if they do not.
    LhvCheck {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a time-binned event log from a run configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate correlators and CHSH from an event log.
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_settings)]
        settings: ChshSettings,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// `<number>deg` or `<number>rad`.
fn parse_angle(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let (number, to_rad) = if let Some(n) = s.strip_suffix("deg") {
        (n, std::f64::consts::PI / 180.0)
    } else if let Some(n) = s.strip_suffix("rad") {
        (n, 1.0)
    } else {
        return Err(format!("angle `{s}` needs a `deg` or `rad` suffix"));
    };
    let v: f64 = number
        .trim()
        .parse()
        .map_err(|_| format!("angle `{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("angle `{s}` is not finite"));
    }
    Ok(v * to_rad)
}

/// Four comma-separated angles `xi,xi',eta,eta'`.
fn parse_settings(s: &str) -> Result<ChshSettings, String> {
    let angles: Vec<f64> = s.split(',').map(parse_angle).collect::<Result<_, _>>()?;
    let r: [f64; 4] = angles
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected 4 angles, got {}", v.len()))?;
    Ok(ChshSettings::from_radians(r))
}

enum Failure {
    Input(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonUnitaryMatrix { .. }
            | Error::ModeLabelMismatch(_)
            | Error::WrongStage { .. }
            | Error::ZeroNorm
            | Error::OccupancyOverflow { .. }
            | Error::OutOfModel { .. }
            | Error::BoundMismatch { .. }
            | Error::LpVerification(_) => Failure::Internal(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn resolve_out(dir: Option<&Path>, path: &Path) -> PathBuf {
    match dir {
        Some(d) if path.is_relative() => d.join(path),
        _ => path.to_path_buf(),
    }
}

fn open_input(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn create_output(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Failure::Input(format!("{}: {e}", parent.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("library types serialize");
    s.push('\n');
    s
}

/// Writes JSON to `out` if given, otherwise to stdout.
fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Failure> {
    let text = to_json(value);
    match out {
        Some(path) => {
            let mut w = create_output(path)?;
            w.write_all(text.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct Weights {
    favorable: f64,
    unfavorable: f64,
    vacuum: f64,
}

#[derive(Serialize)]
struct StateReport {
    amplitudes: pdc_bell::StateVector,
    weights: Weights,
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let out_dir = cli.out_dir.as_deref();
    let out_path = |p: &Option<PathBuf>| p.as_ref().map(|p| resolve_out(out_dir, p));
    match cli.command {
        Command::State { p_pair } => {
            let state = vacuum_diluted_state(p_pair)?;
            let d = joint_distribution(&state, PolarizerAngle::new(0.0), PolarizerAngle::new(0.0))?;
            emit(
                &StateReport {
                    amplitudes: state,
                    weights: Weights {
                        favorable: d.block_weight(Block::Favorable),
                        unfavorable: d.block_weight(Block::Unfavorable),
                        vacuum: d.block_weight(Block::Vacuum),
                    },
                },
                None,
            )?;
        }
        Command::Table {
            xi,
            eta,
            settings,
            p_pair,
            out,
        } => {
            let state = vacuum_diluted_state(p_pair)?;
            let out = out_path(&out);
            match settings {
                Some(s) => emit(&TableSet::new(chsh_tables(&state, &s)?)?, out.as_deref())?,
                None => {
                    let (xi, eta) = (xi.expect("required by clap"), eta.expect("required by clap"));
                    emit(&joint_distribution(&state, xi.into(), eta.into())?, out.as_deref())?
                }
            }
        }
        Command::Chsh { settings, p_pair } => {
            emit(&chsh_decomposition(&vacuum_diluted_state(p_pair)?, &settings)?, None)?;
        }
        Command::Optimize { p_pair } => {
            emit(&optimize_angles(&vacuum_diluted_state(p_pair)?)?, None)?;
        }
        Command::LhvCheck { input, out } => {
            let set: TableSet = serde_json::from_reader(open_input(&input)?)
                .map_err(|e| Failure::Input(format!("{}: {e}", input.display())))?;
            let verdict = lhv_feasible(&set.tables)?;
            emit(&verdict, out_path(&out).as_deref())?;
            if let LhvVerdict::Infeasible(_) = verdict {
                return Ok(EXIT_INFEASIBLE);
            }
        }
        Command::Simulate { config, out, seed } => {
            let mut cfg: RunConfig = serde_json::from_reader(open_input(&config)?)
                .map_err(|e| Failure::Input(format!("{}: {e}", config.display())))?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            for w in validate_config(&cfg)?.warnings {
                eprintln!("warning: {w}");
            }
            let log = run_experiment(&cfg)?;
            let path = resolve_out(out_dir, &out);
            write_event_log(&log, create_output(&path)?)?;
            emit(&estimate_correlators(&log, &cfg.settings_rad)?, None)?;
        }
        Command::Analyze { input, settings, out } => {
            let log = read_event_log(open_input(&input)?)?;
            emit(&estimate_correlators(&log, &settings)?, out_path(&out).as_deref())?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles_need_units() {
        assert_eq!(parse_angle("90deg").unwrap(), std::f64::consts::FRAC_PI_2);
        assert_eq!(parse_angle("0.5rad").unwrap(), 0.5);
        assert!(parse_angle("0.5").is_err());
        assert!(parse_angle("xdeg").is_err());
        assert!(parse_angle("infrad").is_err());
    }

    #[test]
    fn settings_need_four_angles() {
        let s = parse_settings("0deg,45deg,112.5deg,67.5deg").unwrap();
        for (a, b) in s.radians().iter().zip(ChshSettings::optimal().radians()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(parse_settings("0deg,45deg,1rad").is_err());
    }

    #[test]
    fn relative_outputs_follow_the_out_dir() {
        let d = Path::new("/data");
        assert_eq!(resolve_out(Some(d), Path::new("a.json")), PathBuf::from("/data/a.json"));
        assert_eq!(resolve_out(Some(d), Path::new("/tmp/a.json")), PathBuf::from("/tmp/a.json"));
        assert_eq!(resolve_out(None, Path::new("a.json")), PathBuf::from("a.json"));
    }
}
