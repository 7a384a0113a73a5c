//! Command-line front end for the simulator: synthetic data generation,
//! closed-loop simulation, the forgetting-factor sweep, and thermal model
//! step-response checks.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use occumpc::clock;
use occumpc::sim::report;
use occumpc::sim::synth::{
    synth_occupancy, synth_weather, write_pulse_csv, write_weather_csv, OccupancyPattern,
    WeatherPattern,
};
use occumpc::sim::{self, ControllerKind, ScenarioConfig, ThermalSource};
use occumpc::thermal::{build_single_zone, discretize, StateSpaceModel};

#[derive(Parser)]
#[command(
    name = "occumpc",
    about = "Occupancy-predictive HVAC control simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop simulation and write report files.
    Simulate(SimulateArgs),
    /// Sweep the forgetting factor and report one-hour RMS prediction error.
    SweepLambda(SweepArgs),
    /// Generate a synthetic motion-sensor pulse log.
    SynthOccupancy(SynthOccupancyArgs),
    /// Generate a synthetic hourly weather file.
    SynthWeather(SynthWeatherArgs),
    /// Write the zone step-response trace of the thermal model.
    StepResponse(StepResponseArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario config file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for trace.csv, metrics.txt, histogram.csv,
    /// occupancy.csv.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the config's random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's controller.
    #[arg(long)]
    controller: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated forgetting factors; default covers 0.5 and
    /// 0.90..=1.00 in steps of 0.01.
    #[arg(long)]
    lambdas: Option<String>,
}

#[derive(Args)]
struct SynthOccupancyArgs {
    /// Output pulse CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 67)]
    days: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Series start (ISO-8601 or epoch seconds).
    #[arg(long, default_value = "2007-02-12T00:00:00Z")]
    start: String,
    #[arg(long, default_value_t = 9.0)]
    start_hour: f64,
    #[arg(long, default_value_t = 17.0)]
    end_hour: f64,
    #[arg(long, default_value_t = 20.0)]
    jitter_minutes: f64,
    /// Day index from which the block shifts by --drift-hours.
    #[arg(long)]
    drift_day: Option<u32>,
    #[arg(long, default_value_t = 0.0)]
    drift_hours: f64,
    /// Probability a weekday has a block; 0 writes an empty log.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    #[arg(long, default_value_t = 60)]
    pulse_period_seconds: u32,
}

#[derive(Args)]
struct SynthWeatherArgs {
    /// Output weather CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 67)]
    days: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "2007-02-12T00:00:00Z")]
    start: String,
    #[arg(long, default_value_t = -2.0)]
    mean: f64,
    #[arg(long, default_value_t = 5.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 8.0)]
    ground: f64,
}

#[derive(Args)]
struct StepResponseArgs {
    /// Scenario config supplying the thermal model; the default demo
    /// building is used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    initial: f64,
    #[arg(long, default_value_t = 20.0)]
    step_to: f64,
    /// Trace length in hours; defaults to ten dominant time constants.
    #[arg(long)]
    hours: Option<usize>,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => simulate(args),
        Command::SweepLambda(args) => sweep_lambda(args),
        Command::SynthOccupancy(args) => synth_occupancy_cmd(args),
        Command::SynthWeather(args) => synth_weather_cmd(args),
        Command::StepResponse(args) => step_response(args),
    }
}

fn load_config(path: &PathBuf) -> Result<ScenarioConfig> {
    ScenarioConfig::from_file(path)
        .with_context(|| format!("failed to load config {}", path.display()))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(controller) = &args.controller {
        config.controller = ControllerKind::parse(controller)?;
    }
    let (trace, metrics) = sim::run_simulation(&config)?;
    report::emit_reports(&trace, &metrics, &args.out)?;
    println!(
        "{}: {} steps, energy {:.1} kWh, total discomfort {:.1}, peak {:.2}",
        config.controller.name(),
        trace.records.len(),
        metrics.total_energy_kwh,
        metrics.total_discomfort,
        metrics.peak_discomfort
    );
    println!("reports written to {}", args.out.display());
    Ok(())
}

fn sweep_lambda(args: SweepArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let lambdas = match &args.lambdas {
        Some(list) => list
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad lambda {v:?}"))
            })
            .collect::<Result<Vec<f64>>>()?,
        None => {
            let mut grid = vec![0.5];
            grid.extend((90..=100).map(|i| i as f64 / 100.0));
            grid
        }
    };
    let rows = sim::lambda_sweep(&config, &lambdas)?;
    report::emit_sweep(&rows, &args.out)?;
    for (lambda, rms) in &rows {
        println!("lambda {lambda:.3}: rms {rms:.4}");
    }
    let best = rows
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one lambda");
    println!("best lambda {:.3} (rms {:.4})", best.0, best.1);
    println!("sweep written to {}", args.out.join("sweep.csv").display());
    Ok(())
}

fn synth_occupancy_cmd(args: SynthOccupancyArgs) -> Result<()> {
    let start = parse_start(&args.start)?;
    let pattern = OccupancyPattern {
        start_hour: args.start_hour,
        end_hour: args.end_hour,
        jitter_minutes: args.jitter_minutes,
        drift_day: args.drift_day,
        drift_hours: args.drift_hours,
        rate: args.rate,
        pulse_period_seconds: args.pulse_period_seconds,
        weekdays_only: true,
    };
    let events = synth_occupancy(args.seed, start, args.days, &pattern);
    write_pulse_csv(&events, &args.out)?;
    println!("{} pulses written to {}", events.len(), args.out.display());
    Ok(())
}

fn synth_weather_cmd(args: SynthWeatherArgs) -> Result<()> {
    let start = parse_start(&args.start)?;
    let pattern = WeatherPattern {
        mean_c: args.mean,
        daily_amplitude_c: args.amplitude,
        peak_hour: 15.0,
        noise_c: args.noise,
        ground_c: args.ground,
    };
    let series = synth_weather(args.seed, start, args.days as usize * 24, &pattern);
    write_weather_csv(&series, &args.out)?;
    println!(
        "{} hourly rows written to {}",
        series.len(),
        args.out.display()
    );
    Ok(())
}

fn step_response(args: StepResponseArgs) -> Result<()> {
    let model: StateSpaceModel = match &args.config {
        Some(path) => {
            let config = load_config(path)?;
            match &config.thermal {
                ThermalSource::ModelFile(file) => StateSpaceModel::load(file)?,
                ThermalSource::Builder(params) => {
                    discretize(&build_single_zone(params)?, 3600.0)?
                }
            }
        }
        None => discretize(&build_single_zone(&Default::default())?, 3600.0)?,
    };
    let hours = match args.hours {
        Some(h) => h,
        None => (10.0 * model.dominant_time_constant() / 3600.0).ceil() as usize,
    };
    if hours == 0 {
        bail!("trace length must be positive");
    }
    let trace = model.step_response(args.initial, args.step_to, hours);
    report::emit_step_response(&trace, model.step_seconds(), &args.out)?;
    println!(
        "{} states, spectral radius {:.6}, dominant time constant {:.1} h",
        model.state_count(),
        model.spectral_radius(),
        model.dominant_time_constant() / 3600.0
    );
    println!(
        "zone settles at {:.3} C after {} h; trace written to {}",
        trace.last().unwrap(),
        hours,
        args.out.join("step_response.csv").display()
    );
    Ok(())
}

fn parse_start(text: &str) -> Result<i64> {
    clock::parse_timestamp(text).map_err(|e| anyhow::anyhow!("bad --start: {e}"))
}
