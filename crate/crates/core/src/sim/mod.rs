//! Closed-loop simulation harness.
//!
//! Wires ingestion, the occupancy model, the thermal plant, and a
//! controller into an hourly loop: observe the occupancy fraction, train
//! the model on the previous transition, solve the horizon problem with a
//! perfect-foresight weather window, apply the first input to the plant,
//! and log. A pre-training phase replays the leading days of the occupancy
//! stream through the trainer before metering starts.

pub mod report;
pub mod synth;

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use thiserror::Error;

use crate::clock;
use crate::control::{
    self, ControlError, EnergyGain, MpcConfig,
};
use crate::ingest::{self, IngestError, OccupancySeries, WeatherSeries};
use crate::occupancy::{OccupancyError, OccupancyModel};
use crate::thermal::{self, SingleZoneParams, StateSpaceModel, ThermalError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Occupancy(#[from] OccupancyError),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
    #[error("controller failed at step {step}: {source}")]
    Solver {
        step: usize,
        #[source]
        source: ControlError,
    },
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Predictive,
    Triggered,
    Scheduled,
}

impl ControllerKind {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        match text.trim() {
            "predictive" => Ok(Self::Predictive),
            "triggered" => Ok(Self::Triggered),
            "scheduled" => Ok(Self::Scheduled),
            other => Err(SimError::Config(format!(
                "unknown controller {other:?} (expected predictive, triggered, or scheduled)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Predictive => "predictive",
            Self::Triggered => "triggered",
            Self::Scheduled => "scheduled",
        }
    }
}

/// Where the thermal plant comes from: the parametric builder or an
/// externally supplied state-space file.
#[derive(Debug, Clone, PartialEq)]
pub enum ThermalSource {
    Builder(SingleZoneParams),
    ModelFile(PathBuf),
}

/// Everything one simulation run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub pulse_file: PathBuf,
    pub weather_file: PathBuf,
    pub thermal: ThermalSource,
    pub controller: ControllerKind,
    pub mpc: MpcConfig,
    pub lambda: f64,
    pub period: usize,
    pub grid_size: usize,
    pub dwell_seconds: u32,
    pub pretrain_days: u32,
    pub sim_days: u32,
    pub start_time: i64,
    pub weekend_policy: bool,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            pulse_file: PathBuf::new(),
            weather_file: PathBuf::new(),
            thermal: ThermalSource::Builder(SingleZoneParams::default()),
            controller: ControllerKind::Predictive,
            mpc: MpcConfig::default(),
            lambda: 0.974,
            period: 24,
            grid_size: 201,
            dwell_seconds: 900,
            pretrain_days: 7,
            sim_days: 60,
            // Monday 2007-02-12 00:00 UTC.
            start_time: 1_171_238_400,
            weekend_policy: true,
            seed: 42,
        }
    }
}

impl ScenarioConfig {
    /// Total steps covered by the input series: pre-training plus metering.
    pub fn total_steps(&self) -> usize {
        (self.pretrain_days + self.sim_days) as usize * 24
    }

    pub fn pretrain_steps(&self) -> usize {
        self.pretrain_days as usize * 24
    }

    /// Parses a `key = value` config file. Lines starting with `#` are
    /// comments; relative paths resolve against the config file directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_key_values(&text, base)
    }

    pub fn from_key_values(text: &str, base_dir: &Path) -> Result<Self, SimError> {
        let mut config = Self::default();
        let mut builder = SingleZoneParams::default();
        let mut model_file: Option<PathBuf> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SimError::Config(format!("line {}: expected `key = value`", idx + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |message: String| SimError::Config(format!("line {}: {message}", idx + 1));
            let parse_f64 = |v: &str, name: &str| -> Result<f64, SimError> {
                v.parse()
                    .map_err(|_| bad(format!("bad number for {name}: {v:?}")))
            };
            match key {
                "pulse_file" => config.pulse_file = resolve(base_dir, value),
                "weather_file" => config.weather_file = resolve(base_dir, value),
                "thermal_model_file" => model_file = Some(resolve(base_dir, value)),
                "controller" => config.controller = ControllerKind::parse(value)?,
                "lambda" => config.lambda = parse_f64(value, key)?,
                "period_m" => {
                    config.period = value
                        .parse()
                        .map_err(|_| bad(format!("bad period_m {value:?}")))?
                }
                "grid_g" => {
                    config.grid_size = value
                        .parse()
                        .map_err(|_| bad(format!("bad grid_g {value:?}")))?
                }
                "dwell_seconds" => {
                    config.dwell_seconds = value
                        .parse()
                        .map_err(|_| bad(format!("bad dwell_seconds {value:?}")))?
                }
                "pretrain_days" => {
                    config.pretrain_days = value
                        .parse()
                        .map_err(|_| bad(format!("bad pretrain_days {value:?}")))?
                }
                "sim_days" => {
                    config.sim_days = value
                        .parse()
                        .map_err(|_| bad(format!("bad sim_days {value:?}")))?
                }
                "start_time" => {
                    config.start_time = clock::parse_timestamp(value).map_err(&bad)?
                }
                "weekend_policy" => {
                    config.weekend_policy = parse_flag(value).ok_or_else(|| {
                        bad(format!("bad weekend_policy {value:?} (use on/off)"))
                    })?
                }
                "seed" => {
                    config.seed = value
                        .parse()
                        .map_err(|_| bad(format!("bad seed {value:?}")))?
                }
                "horizon_n" => {
                    config.mpc.horizon = value
                        .parse()
                        .map_err(|_| bad(format!("bad horizon_n {value:?}")))?
                }
                "beta" => config.mpc.beta = parse_f64(value, key)?,
                "r" => config.mpc.energy_gain = EnergyGain::Constant(parse_f64(value, key)?),
                "r_sequence" => {
                    let gains: Result<Vec<f64>, _> =
                        value.split(',').map(|v| v.trim().parse::<f64>()).collect();
                    config.mpc.energy_gain = EnergyGain::PerStep(
                        gains.map_err(|_| bad(format!("bad r_sequence {value:?}")))?,
                    );
                }
                "tau" => config.mpc.tau = parse_f64(value, key)?,
                "tau_setback" => config.mpc.tau_setback = parse_f64(value, key)?,
                "u_min" => config.mpc.u_min = parse_f64(value, key)?,
                "u_max" => config.mpc.u_max = parse_f64(value, key)?,
                "solver_tolerance" => config.mpc.solver_tolerance = parse_f64(value, key)?,
                "max_iterations" => {
                    config.mpc.max_iterations = value
                        .parse()
                        .map_err(|_| bad(format!("bad max_iterations {value:?}")))?
                }
                "zone_width_m" => builder.width_m = parse_f64(value, key)?,
                "zone_depth_m" => builder.depth_m = parse_f64(value, key)?,
                "zone_height_m" => builder.height_m = parse_f64(value, key)?,
                "h_in" => builder.h_in = parse_f64(value, key)?,
                "h_out" => builder.h_out = parse_f64(value, key)?,
                "infiltration_ach" => builder.infiltration_ach = parse_f64(value, key)?,
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        config.thermal = match model_file {
            Some(path) => ThermalSource::ModelFile(path),
            None => ThermalSource::Builder(builder),
        };
        Ok(config)
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.pulse_file.as_os_str().is_empty() {
            return Err(SimError::Config("pulse_file is not set".to_string()));
        }
        if self.weather_file.as_os_str().is_empty() {
            return Err(SimError::Config("weather_file is not set".to_string()));
        }
        if self.sim_days == 0 {
            return Err(SimError::Config("sim_days must be positive".to_string()));
        }
        if self.period != 24 {
            return Err(SimError::Config(
                "period_m must be 24 for hourly slots".to_string(),
            ));
        }
        self.mpc.validate()?;
        Ok(())
    }
}

fn resolve(base: &Path, value: &str) -> PathBuf {
    let p = PathBuf::from(value);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn parse_flag(value: &str) -> Option<bool> {
    match value {
        "on" | "true" | "1" | "yes" => Some(true),
        "off" | "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

/// One metered simulation step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Epoch seconds at the start of the interval.
    pub clock: i64,
    pub slot: usize,
    /// Occupancy fraction observed over this interval.
    pub gamma_observed: f64,
    /// One-step-ahead expectation produced at this step for the next one.
    pub gamma_predicted_next: f64,
    /// Zone air temperature at the start of the interval, degC.
    pub zone_temp: f64,
    pub outdoor_temp: f64,
    /// Applied heat input over the interval, W.
    pub heat_input: f64,
    /// Occupancy-weighted discomfort, degC * hr * occupancy.
    pub discomfort: f64,
    pub energy_kwh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub records: Vec<StepRecord>,
    pub step_seconds: i64,
    pub tau: f64,
    pub controller: ControllerKind,
}

/// Discomfort histogram with fixed-width bins starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn of(values: impl Iterator<Item = f64>, bin_width: f64) -> Self {
        let mut counts: Vec<u64> = Vec::new();
        for v in values {
            let bin = (v / bin_width).floor().max(0.0) as usize;
            if bin >= counts.len() {
                counts.resize(bin + 1, 0);
            }
            counts[bin] += 1;
        }
        if counts.is_empty() {
            counts.push(0);
        }
        Self { bin_width, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub const HISTOGRAM_BIN_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub total_discomfort: f64,
    pub peak_discomfort: f64,
    pub discomfort_variance: f64,
    pub total_energy_kwh: f64,
    /// Percent saved against a reference (scheduled) run, when set.
    pub savings_vs_reference: Option<f64>,
    pub histogram: Histogram,
}

impl MetricsSummary {
    /// Table-style savings column: `(reference - self) / reference * 100`.
    pub fn savings_percent(&self, reference_energy_kwh: f64) -> f64 {
        (reference_energy_kwh - self.total_energy_kwh) / reference_energy_kwh * 100.0
    }

    pub fn set_reference(&mut self, reference_energy_kwh: f64) {
        self.savings_vs_reference = Some(self.savings_percent(reference_energy_kwh));
    }
}

/// Sums, peaks, and bins the per-step records.
pub fn compute_metrics(trace: &SimulationTrace) -> MetricsSummary {
    let discomforts: Vec<f64> = trace.records.iter().map(|r| r.discomfort).collect();
    let total_discomfort: f64 = discomforts.iter().sum();
    let peak_discomfort = discomforts.iter().copied().fold(0.0, f64::max);
    let n = discomforts.len().max(1) as f64;
    let mean = total_discomfort / n;
    let discomfort_variance =
        discomforts.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    let total_energy_kwh = trace.records.iter().map(|r| r.energy_kwh).sum();
    MetricsSummary {
        total_discomfort,
        peak_discomfort,
        discomfort_variance,
        total_energy_kwh,
        savings_vs_reference: None,
        histogram: Histogram::of(discomforts.into_iter(), HISTOGRAM_BIN_WIDTH),
    }
}

struct LoadedScenario {
    occupancy: OccupancySeries,
    weather: WeatherSeries,
    plant: StateSpaceModel,
}

fn load_scenario(config: &ScenarioConfig) -> Result<LoadedScenario, SimError> {
    config.validate()?;
    let events = ingest::read_pulse_csv(&config.pulse_file)?;
    let intervals = ingest::merge_pulses(&events, config.dwell_seconds);
    let occupancy = ingest::discretize(
        &intervals,
        config.start_time,
        3600,
        config.total_steps(),
    );
    let weather = ingest::read_weather_csv(&config.weather_file)?;
    if weather.start_time != config.start_time {
        return Err(SimError::Config(format!(
            "weather starts at {}, scenario starts at {}",
            clock::format_timestamp(weather.start_time),
            clock::format_timestamp(config.start_time)
        )));
    }
    if weather.step_seconds != 3600 {
        return Err(SimError::Config(format!(
            "weather step is {} s, the simulator runs hourly",
            weather.step_seconds
        )));
    }
    if weather.len() < config.total_steps() {
        return Err(SimError::Config(format!(
            "weather covers {} steps, scenario needs {}",
            weather.len(),
            config.total_steps()
        )));
    }
    let plant = match &config.thermal {
        ThermalSource::Builder(params) => {
            let network = thermal::build_single_zone(params)?;
            thermal::discretize(&network, 3600.0)?
        }
        ThermalSource::ModelFile(path) => StateSpaceModel::load(path)?,
    };
    if plant.input_count() != 2 {
        return Err(SimError::Config(format!(
            "thermal model takes {} boundary inputs, weather provides 2 (outdoor, ground)",
            plant.input_count()
        )));
    }
    if (plant.step_seconds() - 3600.0).abs() > 1e-9 {
        return Err(SimError::Config(format!(
            "thermal model step is {} s, the simulator runs hourly",
            plant.step_seconds()
        )));
    }
    Ok(LoadedScenario {
        occupancy,
        weather,
        plant,
    })
}

fn weather_row(weather: &WeatherSeries, index: usize) -> DVector<f64> {
    let i = index.min(weather.len() - 1);
    DVector::from_vec(vec![weather.outdoor_dry_bulb[i], weather.ground_temp[i]])
}

/// Whether the transition between two consecutive intervals may train the
/// model: under the weekend policy both endpoints must be weekdays.
fn trainable(policy: bool, epoch_from: i64, epoch_to: i64) -> bool {
    !policy || (!clock::is_weekend(epoch_from) && !clock::is_weekend(epoch_to))
}

/// Runs the closed loop and returns the metered trace plus its metrics.
pub fn run_simulation(
    config: &ScenarioConfig,
) -> Result<(SimulationTrace, MetricsSummary), SimError> {
    let scenario = load_scenario(config)?;
    let gammas = &scenario.occupancy.gammas;
    let plant = &scenario.plant;
    let horizon = config.mpc.horizon;

    let mut model = OccupancyModel::new(config.period, config.grid_size, config.lambda)?;

    // Pre-training replay over the leading days.
    let pretrain_steps = config.pretrain_steps();
    for k in 1..pretrain_steps {
        let epoch_prev = config.start_time + (k as i64 - 1) * 3600;
        let epoch_now = epoch_prev + 3600;
        if trainable(config.weekend_policy, epoch_prev, epoch_now) {
            let slot = clock::hour_of_day(epoch_prev) as usize;
            model.train_step(slot, gammas[k - 1], gammas[k])?;
        }
    }

    let mut x = DVector::from_element(plant.state_count(), config.mpc.tau_setback);
    let mut records = Vec::with_capacity(config.sim_days as usize * 24);

    for (step, k) in (pretrain_steps..config.total_steps()).enumerate() {
        let epoch = config.start_time + k as i64 * 3600;
        let slot = clock::hour_of_day(epoch) as usize;
        let gamma = gammas[k];

        // Train on the transition that just completed.
        if k >= 1 {
            let epoch_prev = epoch - 3600;
            if trainable(config.weekend_policy, epoch_prev, epoch) {
                let slot_prev = clock::hour_of_day(epoch_prev) as usize;
                model.train_step(slot_prev, gammas[k - 1], gamma)?;
            }
        }

        // Perfect-foresight weather window for the horizon.
        let forecast: Vec<DVector<f64>> = (0..horizon)
            .map(|j| weather_row(&scenario.weather, k + j))
            .collect();
        let augmented = thermal::augment(plant, config.mpc.tau, &forecast)?;
        let x_tilde = augmented.initial_state(&x)?;

        let weekend = config.weekend_policy && clock::is_weekend(epoch);
        let decision = if weekend {
            control::setback_controller(&augmented, &x_tilde, &config.mpc)
        } else {
            match config.controller {
                ControllerKind::Predictive => {
                    control::solve_mpc(&augmented, &x_tilde, gamma, &model, slot, &config.mpc)
                }
                ControllerKind::Triggered => {
                    control::triggered_controller(&augmented, &x_tilde, gamma, &config.mpc)
                }
                ControllerKind::Scheduled => control::scheduled_controller(
                    &augmented,
                    &x_tilde,
                    gamma,
                    slot as u32,
                    false,
                    &config.mpc,
                ),
            }
        }
        .map_err(|source| SimError::Solver { step, source })?;

        let u = decision.applied_u;
        let zone = plant.zone_temp(&x);
        let discomfort = gamma * (zone - config.mpc.tau).abs();
        records.push(StepRecord {
            step,
            clock: epoch,
            slot,
            gamma_observed: gamma,
            gamma_predicted_next: model.predict(slot, gamma, 1),
            zone_temp: zone,
            outdoor_temp: scenario.weather.outdoor_dry_bulb[k.min(scenario.weather.len() - 1)],
            heat_input: u,
            discomfort,
            energy_kwh: u * 3600.0 / 3.6e6,
        });

        let w = weather_row(&scenario.weather, k);
        x = plant.simulate_step(&x, u, &w)?;
    }

    let trace = SimulationTrace {
        records,
        step_seconds: 3600,
        tau: config.mpc.tau,
        controller: config.controller,
    };
    let metrics = compute_metrics(&trace);
    Ok((trace, metrics))
}

/// One-hour RMS prediction error for each forgetting factor: a fresh model
/// streams the scenario's occupancy series, and every observation is
/// compared with the expectation produced one step earlier. Weekend steps
/// are excluded from both training and scoring under the weekend policy.
pub fn lambda_sweep(
    config: &ScenarioConfig,
    lambdas: &[f64],
) -> Result<Vec<(f64, f64)>, SimError> {
    for lambda in lambdas {
        if !(0.0..=1.0).contains(lambda) {
            return Err(SimError::Config(format!(
                "lambda {lambda} outside [0, 1]"
            )));
        }
    }
    let events = ingest::read_pulse_csv(&config.pulse_file)?;
    let intervals = ingest::merge_pulses(&events, config.dwell_seconds);
    let occupancy = ingest::discretize(
        &intervals,
        config.start_time,
        3600,
        config.total_steps(),
    );
    lambdas
        .iter()
        .map(|lambda| Ok((*lambda, stream_rms(config, &occupancy.gammas, *lambda)?)))
        .collect()
}

fn stream_rms(config: &ScenarioConfig, gammas: &[f64], lambda: f64) -> Result<f64, SimError> {
    let mut model = OccupancyModel::new(config.period, config.grid_size, lambda)?;
    let mut previous_prediction: Option<f64> = None;
    let mut squared = 0.0;
    let mut scored = 0usize;
    for (k, gamma) in gammas.iter().enumerate() {
        let epoch = config.start_time + k as i64 * 3600;
        let weekend_now = config.weekend_policy && clock::is_weekend(epoch);
        let weekend_prev = config.weekend_policy && k >= 1 && clock::is_weekend(epoch - 3600);
        if let Some(p) = previous_prediction {
            if !weekend_now && !weekend_prev {
                squared += (p - gamma) * (p - gamma);
                scored += 1;
            }
        }
        if k >= 1 && trainable(config.weekend_policy, epoch - 3600, epoch) {
            let slot_prev = clock::hour_of_day(epoch - 3600) as usize;
            model.train_step(slot_prev, gammas[k - 1], *gamma)?;
        }
        let slot = clock::hour_of_day(epoch) as usize;
        previous_prediction = Some(model.predict(slot, *gamma, 1));
    }
    if scored == 0 {
        return Err(SimError::Config(
            "occupancy stream too short to score predictions".to_string(),
        ));
    }
    Ok((squared / scored as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let text = "\
# scenario
pulse_file = pulses.csv
weather_file = weather.csv
controller = scheduled
lambda = 0.9
dwell_seconds = 600
pretrain_days = 3
sim_days = 14
start_time = 2007-02-12T00:00:00Z
weekend_policy = off
seed = 7
horizon_n = 12
beta = 2.0
r = 0.0005
tau = 22.0
u_max = 6000
";
        let config = ScenarioConfig::from_key_values(text, dir.path()).unwrap();
        assert_eq!(config.controller, ControllerKind::Scheduled);
        assert_eq!(config.pulse_file, dir.path().join("pulses.csv"));
        assert_eq!(config.lambda, 0.9);
        assert_eq!(config.mpc.horizon, 12);
        assert_eq!(config.mpc.tau, 22.0);
        assert!(!config.weekend_policy);
        assert_eq!(config.seed, 7);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = ScenarioConfig::from_key_values("no_such_key = 1", Path::new("."));
        assert!(matches!(err, Err(SimError::Config(_))));
    }

    #[test]
    fn histogram_bins_and_totals() {
        let h = Histogram::of([0.0, 0.1, 0.49, 0.5, 1.7].into_iter(), 0.5);
        assert_eq!(h.counts, vec![3, 1, 0, 1]);
        assert_eq!(h.total(), 5);
    }

    #[test]
    fn metrics_sums_match_by_construction() {
        let records: Vec<StepRecord> = (0..10)
            .map(|i| StepRecord {
                step: i,
                clock: i as i64 * 3600,
                slot: i % 24,
                gamma_observed: 0.5,
                gamma_predicted_next: 0.5,
                zone_temp: 20.0,
                outdoor_temp: 0.0,
                heat_input: 1000.0,
                discomfort: i as f64 * 0.1,
                energy_kwh: 1.0,
            })
            .collect();
        let trace = SimulationTrace {
            records,
            step_seconds: 3600,
            tau: 23.0,
            controller: ControllerKind::Predictive,
        };
        let metrics = compute_metrics(&trace);
        assert!((metrics.total_energy_kwh - 10.0).abs() < 1e-12);
        assert!((metrics.total_discomfort - 4.5).abs() < 1e-12);
        assert!((metrics.peak_discomfort - 0.9).abs() < 1e-12);
        assert_eq!(metrics.histogram.total(), 10);
        let mut with_ref = metrics.clone();
        with_ref.set_reference(20.0);
        assert!((with_ref.savings_vs_reference.unwrap() - 50.0).abs() < 1e-12);
    }
}
