use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spdc_cli::commands;
use spdc_cli::config::{self, ScenarioConfig};
use spdc_cli::{CliError, Format};
use spdc_core::spatialphase::ScanAxis;

/// Two-crystal SPDC entanglement source simulator and compensator designer.
#[derive(Debug, Parser)]
#[command(name = "spdc", version)]
struct Cli {
    /// Materials database (TOML); defaults to the builtin set.
    #[arg(long, global = true)]
    materials: Option<PathBuf>,
    /// Scenario config file.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Builtin scenario: ultrafast-bbo, diode-bibo-degenerate or
    /// diode-bibo-nondegenerate.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Refractive and group indices, GVD and walkoff of one material.
    Index {
        material: String,
        lambda_nm: f64,
        /// Polar angle of the wave normal from the crystal z axis, degrees.
        #[arg(long, default_value_t = 90.0, allow_hyphen_values = true)]
        theta: f64,
        /// Azimuth of the wave normal from the crystal x axis, degrees.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        phi: f64,
    },
    /// Relative phase across the signal iris.
    Phasemap {
        #[arg(long, value_enum, default_value = "on")]
        compensated: OnOff,
        #[arg(long, value_enum, default_value = "radial")]
        axis: Axis,
        /// First and last offset, mm, as `a,b`.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true, default_value = "-2.5,2.5")]
        range: (f64, f64),
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Design every compensator given as "design" and predict the state
    /// before and after.
    Design,
    /// Tangle curve against precompensator delay or iris diameter.
    Sweep {
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Delays in fs or diameters in mm, as `a,b`.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        range: (f64, f64),
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Density matrix collected through one iris.
    State {
        /// Iris diameter, mm; defaults to the first listed in the config.
        #[arg(long)]
        iris: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Axis {
    Radial,
    Tangential,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepAxis {
    Iris,
    #[value(name = "pc_delay")]
    PcDelay,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `start,end`")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if !(a.is_finite() && b.is_finite()) {
        return Err("range bounds must be finite".into());
    }
    if !(a < b) {
        return Err(format!("empty range {a},{b}"));
    }
    Ok((a, b))
}

fn scenario(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    match (&cli.config, &cli.preset) {
        (Some(p), _) => ScenarioConfig::load(p),
        (None, Some(name)) => ScenarioConfig::preset(name),
        (None, None) => Err(CliError::Usage("this command needs --config or --preset".into())),
    }
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let report = match &cli.command {
        Command::Index {
            material,
            lambda_nm,
            theta,
            phi,
        } => {
            let db = config::materials(cli.materials.as_deref(), None)?;
            commands::index(&db, material, *lambda_nm, *theta, *phi)?
        }
        cmd => {
            let cfg = scenario(cli)?;
            let db = config::materials(cli.materials.as_deref(), Some(&cfg))?;
            if let Command::Design = cmd {
                commands::design(&cfg, &db)?
            } else {
                let setup = commands::prepare(&cfg, &db)?;
                match cmd {
                    Command::Phasemap {
                        compensated,
                        axis,
                        range,
                        samples,
                    } => {
                        let axis = match axis {
                            Axis::Radial => ScanAxis::Radial,
                            Axis::Tangential => ScanAxis::Tangential,
                        };
                        if *samples < 2 {
                            return Err(CliError::Usage("--samples must be at least 2".into()));
                        }
                        commands::phasemap(&setup, matches!(compensated, OnOff::On), axis, *range, *samples)?
                    }
                    Command::Sweep { axis, range, points } => {
                        if *points < 2 {
                            return Err(CliError::Usage("--points must be at least 2".into()));
                        }
                        match axis {
                            SweepAxis::PcDelay => commands::sweep_pc_delay(&setup, *range, *points)?,
                            SweepAxis::Iris => commands::sweep_iris(&setup, *range, *points)?,
                        }
                    }
                    Command::State { iris } => {
                        let d = iris
                            .or_else(|| setup.collection.iris_diameters_mm.first().copied())
                            .ok_or_else(|| CliError::Usage("no iris diameter given".into()))?;
                        commands::state(&setup, d)?
                    }
                    Command::Index { .. } | Command::Design => unreachable!(),
                }
            }
        }
    };
    report.render(cli.format)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|text| match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
