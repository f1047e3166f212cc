use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info};
use mbres_cli::commands::*;
use mbres_cli::table::format_record;
use mbres_cli::{parse_grid, CliError, Result, RunConfig, SweepTable, Units};
use mbres_core::dynamics::SidebandModel;
use mbres_core::fitting::{MbFitMode, MbWeighting};

#[derive(Parser)]
#[command(name = "mbres", version, about = "Superconducting resonator response, simulation and fitting")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (a directory for `simulate`); standard output if omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Units of command-line numbers, e.g. `mK,GHz,ns`. Files are always SI.
    #[arg(long, global = true)]
    units: Option<String>,
    /// Run per-frequency simulations in parallel.
    #[arg(long, global = true)]
    parallel: bool,
    /// More diagnostics on standard error (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Conductivity ratios σ1/σn, σ2/σn over a temperature grid.
    Conductivity {
        #[arg(long = "T", value_name = "GRID")]
        temps: String,
    },
    /// Forward frequency and loss shifts over a temperature grid.
    Response {
        #[arg(long = "T", value_name = "GRID")]
        temps: String,
    },
    /// Effective temperature and predicted frequency shift from a loss column.
    Teff {
        #[arg(long)]
        input: PathBuf,
    },
    /// Quasiparticle recombination time.
    Tauqp {
        #[arg(long = "T", value_name = "GRID", conflicts_with = "nqp")]
        temps: Option<String>,
        /// Densities instead of temperatures; needs `material.N0`.
        #[arg(long, value_name = "GRID")]
        nqp: Option<String>,
    },
    /// Time-domain simulation of the pulsed gate/readout sequence.
    Simulate {
        #[arg(long, value_name = "GRID")]
        fro: String,
        #[arg(long, default_value_t = f64::INFINITY)]
        snr_db: f64,
    },
    /// Sideband level against gate frequency and its half-power point.
    Sidebands {
        #[arg(long)]
        tau_eff: f64,
        /// Gate frequencies; default 200 log-spaced points over 0.1-25 MHz.
        #[arg(long, value_name = "GRID")]
        fg: Option<String>,
        /// Frequency-modulation depth; default 100 kHz.
        #[arg(long)]
        depth: Option<f64>,
        #[arg(long, value_enum, default_value_t = ModelArg::QuasiStatic)]
        model: ModelArg,
        /// Carrier frequency; default on resonance.
        #[arg(long)]
        fro: Option<f64>,
    },
    #[command(subcommand)]
    Fit(FitCommand),
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    QuasiStatic,
    Dynamic,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Joint,
    Frequency,
    Loss,
    Averaged,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Uniform,
    Relative,
}

#[derive(Args)]
struct FitInput {
    #[arg(long)]
    input: PathBuf,
    /// Where to write the residual table.
    #[arg(long)]
    residuals: Option<PathBuf>,
}

#[derive(Subcommand)]
enum FitCommand {
    /// Notch-resonator circle fit of a `freq_Hz,re,im` trace.
    Circle(FitInput),
    /// Lorentzian fit of |S21|² (or a `y` column) against frequency.
    Lorentzian(FitInput),
    /// Exponential relaxation of |s| in a `t_s,re,im` trace.
    Exp {
        #[command(flatten)]
        io: FitInput,
        #[arg(long)]
        t_start: Option<f64>,
        #[arg(long)]
        t_stop: Option<f64>,
        /// Anchor value at the window start.
        #[arg(long)]
        a: Option<f64>,
    },
    /// Participation ratio and critical temperature from a response table.
    Mb {
        #[command(flatten)]
        io: FitInput,
        #[arg(long, value_enum, default_value_t = ModeArg::Averaged)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = WeightArg::Uniform)]
        weighting: WeightArg,
        #[arg(long)]
        t_ref: Option<f64>,
    },
}

#[derive(Subcommand)]
enum GenCommand {
    /// Synthetic notch trace from the configured baseline.
    S21 {
        #[arg(long, default_value_t = 801)]
        points: usize,
        /// Span in loaded linewidths.
        #[arg(long, default_value_t = 10.0)]
        span: f64,
        #[arg(long, default_value_t = 0.0)]
        phi: f64,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 0.0)]
        phase: f64,
        /// Cable delay.
        #[arg(long, default_value_t = 0.0)]
        delay: f64,
        #[arg(long, default_value_t = f64::INFINITY)]
        snr_db: f64,
    },
    /// Ring-up trace of the baseline resonator.
    Timetrace {
        #[arg(long)]
        fro: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        drive_start: Option<f64>,
        #[arg(long)]
        drive_stop: Option<f64>,
        #[arg(long, default_value_t = f64::INFINITY)]
        snr_db: f64,
    },
    /// Forward response sweep with multiplicative noise.
    Response {
        #[arg(long = "T", value_name = "GRID")]
        temps: String,
        #[arg(long, default_value_t = 0.0)]
        rel_noise: f64,
    },
}

fn emit_table(table: &SweepTable, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => table.write_path(p),
        None => table.write_to(std::io::stdout().lock()),
    }
}

fn emit_fit(fit: &FitOutput, io: &FitInput, out: Option<&Path>) -> Result<()> {
    let text = format_record(&fit.record);
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    if let Some(p) = &io.residuals {
        fit.residuals.write_path(p)?;
    }
    Ok(())
}

/// Returns the process exit code on success.
fn run(cli: Cli) -> Result<u8> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(u) = &cli.units {
        cfg.units = Units::parse(u)?;
    }
    let u = cfg.units;
    let out = cli.out.as_deref();
    let scaled = |v: Option<f64>, scale: f64| v.map(|x| x * scale);

    match cli.command {
        Command::Conductivity { temps } => emit_table(&cmd_conductivity(&cfg, &parse_grid(&temps, u.temperature)?)?, out)?,
        Command::Response { temps } => emit_table(&cmd_response(&cfg, &parse_grid(&temps, u.temperature)?)?, out)?,
        Command::Teff { input } => {
            let r = cmd_teff(&cfg, &SweepTable::read_path(&input)?)?;
            emit_table(&r.table, out)?;
            if !r.flagged.is_empty() {
                error!("{} of {} rows could not be inverted", r.flagged.len(), r.table.rows.len());
                return Ok(2);
            }
        }
        Command::Tauqp { temps, nqp } => {
            let table = match (temps, nqp) {
                (Some(t), None) => cmd_tauqp(&cfg, &parse_grid(&t, u.temperature)?)?,
                (None, Some(n)) => cmd_tauqp_density(&cfg, &parse_grid(&n, 1.0)?)?,
                _ => return Err(CliError::Config("give exactly one of --T or --nqp".into())),
            };
            emit_table(&table, out)?;
        }
        Command::Simulate { fro, snr_db } => {
            let dir = out.ok_or_else(|| CliError::Config("simulate writes several files; pass --out DIR".into()))?;
            std::fs::create_dir_all(dir)?;
            let r = cmd_simulate(&cfg, &parse_grid(&fro, u.frequency)?, snr_db, cli.parallel)?;
            for (k, t) in r.traces.iter().enumerate() {
                t.write_path(&dir.join(format!("trace_{k:03}.csv")))?;
            }
            r.map.write_path(&dir.join("map.csv"))?;
            r.trajectory.write_path(&dir.join("trajectory.csv"))?;
            info!("wrote {} traces to {}", r.traces.len(), dir.display());
        }
        Command::Sidebands {
            tau_eff,
            fg,
            depth,
            model,
            fro,
        } => {
            let grid = match fg {
                Some(g) => parse_grid(&g, u.frequency)?,
                None => mbres_core::dynamics::log_grid(0.1e6, 25e6, 200),
            };
            let model = match model {
                ModelArg::QuasiStatic => SidebandModel::QuasiStatic,
                ModelArg::Dynamic => SidebandModel::Dynamic,
            };
            let r = cmd_sidebands(
                &cfg,
                tau_eff * u.time,
                scaled(depth, u.frequency).unwrap_or(1e5),
                &grid,
                model,
                scaled(fro, u.frequency),
            )?;
            emit_table(&r.table, out)?;
            info!("f_-3dB = {} Hz", r.f_3db);
        }
        Command::Fit(fit) => match fit {
            FitCommand::Circle(io) => emit_fit(&cmd_fit_circle(&SweepTable::read_path(&io.input)?)?, &io, out)?,
            FitCommand::Lorentzian(io) => {
                emit_fit(&cmd_fit_lorentzian(&SweepTable::read_path(&io.input)?)?, &io, out)?
            }
            FitCommand::Exp { io, t_start, t_stop, a } => {
                let window = ExpFitWindow {
                    t_start: scaled(t_start, u.time),
                    t_stop: scaled(t_stop, u.time),
                    a,
                };
                emit_fit(&cmd_fit_exp(&SweepTable::read_path(&io.input)?, &window)?, &io, out)?
            }
            FitCommand::Mb {
                io,
                mode,
                weighting,
                t_ref,
            } => {
                let settings = MbFitSettings {
                    mode: match mode {
                        ModeArg::Joint => MbFitMode::Joint,
                        ModeArg::Frequency => MbFitMode::Frequency,
                        ModeArg::Loss => MbFitMode::Loss,
                        ModeArg::Averaged => MbFitMode::Averaged,
                    },
                    weighting: match weighting {
                        WeightArg::Uniform => MbWeighting::Uniform,
                        WeightArg::Relative => MbWeighting::Relative,
                    },
                    t_ref: scaled(t_ref, u.temperature),
                };
                emit_fit(&cmd_fit_mb(&cfg, &SweepTable::read_path(&io.input)?, &settings)?, &io, out)?
            }
        },
        Command::Gen(g) => {
            let table = match g {
                GenCommand::S21 {
                    points,
                    span,
                    phi,
                    amplitude,
                    phase,
                    delay,
                    snr_db,
                } => cmd_gen_s21(
                    &cfg,
                    &GenS21Options {
                        points,
                        span_linewidths: span,
                        phi,
                        amplitude,
                        phase,
                        delay: delay * u.time,
                        snr_db,
                    },
                )?,
                GenCommand::Timetrace {
                    fro,
                    dt,
                    duration,
                    drive_start,
                    drive_stop,
                    snr_db,
                } => {
                    let d = GenTimetraceOptions::default();
                    cmd_gen_timetrace(
                        &cfg,
                        &GenTimetraceOptions {
                            f_ro: scaled(fro, u.frequency),
                            dt: scaled(dt, u.time).unwrap_or(d.dt),
                            duration: scaled(duration, u.time).unwrap_or(d.duration),
                            drive_start: scaled(drive_start, u.time).unwrap_or(d.drive_start),
                            drive_stop: scaled(drive_stop, u.time).unwrap_or(d.drive_stop),
                            snr_db,
                        },
                    )?
                }
                GenCommand::Response { temps, rel_noise } => {
                    cmd_gen_response(&cfg, &parse_grid(&temps, u.temperature)?, rel_noise)?
                }
            };
            emit_table(&table, out)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        }
    };
    // Builder::new() ignores the environment; all state comes from flags.
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e}");
            ExitCode::from(1)
        }
    }
}
