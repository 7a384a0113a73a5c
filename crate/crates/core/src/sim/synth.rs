//! Seeded synthetic occupancy and weather generators.
//!
//! The real motion-sensor dataset and the TMY weather file behind the
//! original experiments are not redistributable, so the harness ships
//! deterministic stand-ins: weekday meeting-style pulse logs with
//! configurable jitter and drift, and a cold-season sinusoidal weather
//! cycle with mild autoregressive noise.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clock;
use crate::ingest::{IngestError, PulseEvent, WeatherSeries};

/// Weekday occupancy block with jitter and an optional mid-stream shift.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyPattern {
    /// Nominal block start, fractional hours.
    pub start_hour: f64,
    /// Nominal block end, fractional hours.
    pub end_hour: f64,
    /// Uniform jitter applied independently to both edges, minutes.
    pub jitter_minutes: f64,
    /// Day index from which the whole block shifts by `drift_hours`.
    pub drift_day: Option<u32>,
    pub drift_hours: f64,
    /// Probability that a weekday has a block at all; 0 means no pulses.
    pub rate: f64,
    /// Spacing of sensor pulses while occupied, seconds.
    pub pulse_period_seconds: u32,
    /// Restrict blocks to Monday through Friday.
    pub weekdays_only: bool,
}

impl Default for OccupancyPattern {
    fn default() -> Self {
        Self {
            start_hour: 9.0,
            end_hour: 17.0,
            jitter_minutes: 20.0,
            drift_day: None,
            drift_hours: 0.0,
            rate: 1.0,
            pulse_period_seconds: 60,
            weekdays_only: true,
        }
    }
}

/// Generates a pulse log for `days` days starting at `start_time`.
/// Deterministic for a given seed and pattern.
pub fn synth_occupancy(
    seed: u64,
    start_time: i64,
    days: u32,
    pattern: &OccupancyPattern,
) -> Vec<PulseEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    let period = pattern.pulse_period_seconds.max(1) as i64;
    for day in 0..days {
        let day_start = start_time + day as i64 * 86_400;
        // Draw per-day randomness unconditionally so the stream for day d
        // does not depend on how earlier days were filtered.
        let present = rng.gen::<f64>() < pattern.rate;
        let start_jitter = rng.gen_range(-1.0..=1.0) * pattern.jitter_minutes / 60.0;
        let end_jitter = rng.gen_range(-1.0..=1.0) * pattern.jitter_minutes / 60.0;
        if pattern.weekdays_only && clock::is_weekend(day_start) {
            continue;
        }
        if !present {
            continue;
        }
        let shift = match pattern.drift_day {
            Some(d) if day >= d => pattern.drift_hours,
            _ => 0.0,
        };
        let start_h = (pattern.start_hour + shift + start_jitter).clamp(0.0, 24.0);
        let end_h = (pattern.end_hour + shift + end_jitter).clamp(0.0, 24.0);
        if end_h <= start_h {
            continue;
        }
        let mut t = day_start + (start_h * 3600.0).round() as i64;
        let block_end = day_start + (end_h * 3600.0).round() as i64;
        while t < block_end {
            events.push(PulseEvent {
                timestamp: t,
                sensor_id: "synth".to_string(),
            });
            t += period;
        }
    }
    events.sort_by_key(|e| e.timestamp);
    events
}

/// Writes a pulse log in the `timestamp,sensor_id` CSV format.
pub fn write_pulse_csv(events: &[PulseEvent], path: impl AsRef<Path>) -> Result<(), IngestError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "timestamp,sensor_id")?;
    for e in events {
        writeln!(out, "{},{}", clock::format_timestamp(e.timestamp), e.sensor_id)?;
    }
    out.flush()?;
    Ok(())
}

/// Daily sinusoidal weather cycle with autoregressive noise.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherPattern {
    pub mean_c: f64,
    pub daily_amplitude_c: f64,
    /// Hour of day at which the cycle peaks.
    pub peak_hour: f64,
    /// Standard scale of the AR(1) noise, degC.
    pub noise_c: f64,
    pub ground_c: f64,
}

impl Default for WeatherPattern {
    /// Cold-season defaults: the daily peak stays near freezing so the
    /// demo building's 8 kW heater just saturates during recovery ramps.
    fn default() -> Self {
        Self {
            mean_c: -2.0,
            daily_amplitude_c: 5.0,
            peak_hour: 15.0,
            noise_c: 0.5,
            ground_c: 8.0,
        }
    }
}

/// Generates `hours` hourly weather rows starting at `start_time`.
/// Deterministic for a given seed and pattern.
pub fn synth_weather(
    seed: u64,
    start_time: i64,
    hours: usize,
    pattern: &WeatherPattern,
) -> WeatherSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let mut outdoor = Vec::with_capacity(hours);
    let mut noise = 0.0;
    for k in 0..hours {
        let epoch = start_time + k as i64 * 3600;
        let hour = clock::hour_of_day(epoch) as f64;
        let cycle = pattern.daily_amplitude_c * (TAU * (hour - pattern.peak_hour) / 24.0).cos();
        noise = 0.9 * noise + 0.3 * pattern.noise_c * rng.gen_range(-1.0..=1.0);
        outdoor.push(pattern.mean_c + cycle + noise);
    }
    WeatherSeries {
        start_time,
        step_seconds: 3600,
        outdoor_dry_bulb: outdoor,
        ground_temp: vec![pattern.ground_c; hours],
    }
}

/// Writes a weather series in the `timestamp,dry_bulb_c,ground_c` format.
pub fn write_weather_csv(
    series: &WeatherSeries,
    path: impl AsRef<Path>,
) -> Result<(), IngestError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "timestamp,dry_bulb_c,ground_c")?;
    for k in 0..series.len() {
        writeln!(
            out,
            "{},{:.6},{:.6}",
            clock::format_timestamp(series.start_time + k as i64 * series.step_seconds),
            series.outdoor_dry_bulb[k],
            series.ground_temp[k]
        )?;
    }
    out.flush()?;
    Ok(())
}
