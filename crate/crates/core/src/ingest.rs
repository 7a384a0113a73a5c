//! Sensor pulse and weather ingestion.
//!
//! Motion sensors report asynchronous pulses; the model wants fractional
//! occupancy per fixed time step. Pulses are extended forward by a dwell
//! time, merged into disjoint occupied intervals, and averaged over the
//! step grid to produce the duty-cycle sequence.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::clock;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: parse error at line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{0}: file is empty")]
    EmptyFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One motion-sensor pulse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PulseEvent {
    pub timestamp: i64,
    pub sensor_id: String,
}

/// Half-open occupied interval `[start, end)` in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub start: i64,
    pub end: i64,
}

/// Fractional occupancy per step.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancySeries {
    pub start_time: i64,
    pub step_seconds: i64,
    pub gammas: Vec<f64>,
}

/// Outdoor dry-bulb and ground temperatures per step, in degrees C.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    pub start_time: i64,
    pub step_seconds: i64,
    pub outdoor_dry_bulb: Vec<f64>,
    pub ground_temp: Vec<f64>,
}

impl WeatherSeries {
    pub fn len(&self) -> usize {
        self.outdoor_dry_bulb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outdoor_dry_bulb.is_empty()
    }
}

/// Extends each pulse forward by the dwell time and merges overlapping or
/// touching intervals. Output intervals are disjoint and sorted; duplicate
/// pulses have no effect.
pub fn merge_pulses(events: &[PulseEvent], dwell_seconds: u32) -> Vec<Interval> {
    let dwell = dwell_seconds as i64;
    coalesce_intervals(
        events
            .iter()
            .map(|e| Interval {
                start: e.timestamp,
                end: e.timestamp + dwell,
            })
            .collect(),
    )
}

/// Sorts intervals and unions any that overlap or touch; empty intervals
/// are dropped. Idempotent on its own output.
pub fn coalesce_intervals(mut intervals: Vec<Interval>) -> Vec<Interval> {
    intervals.sort_by_key(|iv| (iv.start, iv.end));
    let mut merged: Vec<Interval> = Vec::new();
    for iv in intervals {
        match merged.last_mut() {
            Some(last) if iv.start <= last.end => last.end = last.end.max(iv.end),
            _ => merged.push(iv),
        }
    }
    merged.retain(|iv| iv.end > iv.start);
    merged
}

/// Averages disjoint sorted intervals over a fixed step grid: gamma for a
/// step is the occupied overlap divided by the step length, clamped to [0, 1].
pub fn discretize(
    intervals: &[Interval],
    start_time: i64,
    step_seconds: i64,
    n_steps: usize,
) -> OccupancySeries {
    let mut gammas = vec![0.0; n_steps];
    for iv in intervals {
        if iv.end <= start_time {
            continue;
        }
        let span_end = start_time + step_seconds * n_steps as i64;
        if iv.start >= span_end {
            break;
        }
        let first = ((iv.start - start_time).max(0) / step_seconds) as usize;
        let last = (((iv.end - start_time - 1) / step_seconds) as usize).min(n_steps - 1);
        for (k, gamma) in gammas.iter_mut().enumerate().take(last + 1).skip(first) {
            let step_start = start_time + step_seconds * k as i64;
            let step_end = step_start + step_seconds;
            let overlap = iv.end.min(step_end) - iv.start.max(step_start);
            if overlap > 0 {
                *gamma += overlap as f64 / step_seconds as f64;
            }
        }
    }
    for g in &mut gammas {
        *g = g.clamp(0.0, 1.0);
    }
    OccupancySeries {
        start_time,
        step_seconds,
        gammas,
    }
}

/// Reads a pulse log CSV with header `timestamp,sensor_id`. Timestamps are
/// integer epoch seconds or ISO-8601; rows are sorted by time on return.
pub fn read_pulse_csv(path: impl AsRef<Path>) -> Result<Vec<PulseEvent>, IngestError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(IngestError::EmptyFile(name)),
    };
    expect_header(&header, "timestamp,sensor_id", &name)?;

    let mut events = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let (ts, id) = trimmed.split_once(',').ok_or_else(|| IngestError::Parse {
            path: name.clone(),
            line: idx + 1,
            message: "expected `timestamp,sensor_id`".to_string(),
        })?;
        let timestamp = clock::parse_timestamp(ts).map_err(|message| IngestError::Parse {
            path: name.clone(),
            line: idx + 1,
            message,
        })?;
        events.push(PulseEvent {
            timestamp,
            sensor_id: id.trim().to_string(),
        });
    }
    events.sort_by_key(|e| e.timestamp);
    Ok(events)
}

/// Reads a weather CSV with header `timestamp,dry_bulb_c,ground_c`. Rows
/// must be sorted and evenly spaced.
pub fn read_weather_csv(path: impl AsRef<Path>) -> Result<WeatherSeries, IngestError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(IngestError::EmptyFile(name)),
    };
    expect_header(&header, "timestamp,dry_bulb_c,ground_c", &name)?;

    let mut stamps: Vec<i64> = Vec::new();
    let mut dry = Vec::new();
    let mut ground = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let parse = |message: String| IngestError::Parse {
            path: name.clone(),
            line: idx + 1,
            message,
        };
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 3 {
            return Err(parse(format!("expected 3 fields, got {}", fields.len())));
        }
        stamps.push(clock::parse_timestamp(fields[0]).map_err(parse)?);
        dry.push(parse_temp(fields[1]).map_err(parse)?);
        ground.push(parse_temp(fields[2]).map_err(parse)?);
    }
    if stamps.is_empty() {
        return Err(IngestError::EmptyFile(name));
    }
    let step_seconds = if stamps.len() >= 2 {
        stamps[1] - stamps[0]
    } else {
        3600
    };
    if step_seconds <= 0 {
        return Err(IngestError::Parse {
            path: name,
            line: 3,
            message: "timestamps must be strictly increasing".to_string(),
        });
    }
    for (i, pair) in stamps.windows(2).enumerate() {
        if pair[1] - pair[0] != step_seconds {
            return Err(IngestError::Parse {
                path: name,
                line: i + 3,
                message: format!(
                    "uneven step: {} s here, {} s at the start",
                    pair[1] - pair[0],
                    step_seconds
                ),
            });
        }
    }
    Ok(WeatherSeries {
        start_time: stamps[0],
        step_seconds,
        outdoor_dry_bulb: dry,
        ground_temp: ground,
    })
}

/// Writes an occupancy series as `step_index,gamma` rows.
pub fn write_occupancy_csv(
    series: &OccupancySeries,
    path: impl AsRef<Path>,
) -> Result<(), IngestError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "step_index,gamma")?;
    for (k, g) in series.gammas.iter().enumerate() {
        writeln!(out, "{k},{g:.6}")?;
    }
    out.flush()?;
    Ok(())
}

fn parse_temp(tok: &str) -> Result<f64, String> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| format!("bad temperature {tok:?}"))?;
    if !v.is_finite() {
        return Err(format!("non-finite temperature {tok:?}"));
    }
    Ok(v)
}

fn expect_header(got: &str, want: &str, path: &str) -> Result<(), IngestError> {
    if got.trim() != want {
        return Err(IngestError::Parse {
            path: path.to_string(),
            line: 1,
            message: format!("expected header `{want}`, got {got:?}"),
        });
    }
    Ok(())
}
