//! Report files: trace CSV, metrics table, discomfort histogram, and the
//! forgetting-factor sweep. Formats are fixed-precision so reruns of the
//! same scenario produce byte-identical output.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::clock;
use crate::ingest::OccupancySeries;
use crate::sim::{MetricsSummary, SimError, SimulationTrace};

/// Writes `trace.csv`, `metrics.txt`, `histogram.csv`, and `occupancy.csv`
/// into `out_dir`, creating it if needed. Existing files are overwritten.
pub fn emit_reports(
    trace: &SimulationTrace,
    metrics: &MetricsSummary,
    out_dir: impl AsRef<Path>,
) -> Result<(), SimError> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;

    let mut out = BufWriter::new(fs::File::create(out_dir.join("trace.csv"))?);
    writeln!(
        out,
        "step,clock,gamma_observed,gamma_predicted_next,zone_c,outdoor_c,heat_w,discomfort,energy_kwh"
    )?;
    for r in &trace.records {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.9}",
            r.step,
            clock::format_timestamp(r.clock),
            r.gamma_observed,
            r.gamma_predicted_next,
            r.zone_temp,
            r.outdoor_temp,
            r.heat_input,
            r.discomfort,
            r.energy_kwh
        )?;
    }
    out.flush()?;

    let mut out = BufWriter::new(fs::File::create(out_dir.join("metrics.txt"))?);
    writeln!(out, "controller = {}", trace.controller.name())?;
    writeln!(out, "steps = {}", trace.records.len())?;
    writeln!(out, "total_discomfort_c_hr_occ = {:.6}", metrics.total_discomfort)?;
    writeln!(out, "peak_discomfort_c_hr_occ = {:.6}", metrics.peak_discomfort)?;
    writeln!(out, "discomfort_variance = {:.6}", metrics.discomfort_variance)?;
    writeln!(out, "total_energy_kwh = {:.6}", metrics.total_energy_kwh)?;
    match metrics.savings_vs_reference {
        Some(s) => writeln!(out, "savings_vs_reference_pct = {s:.2}")?,
        None => writeln!(out, "savings_vs_reference_pct = n/a")?,
    }
    out.flush()?;

    let mut out = BufWriter::new(fs::File::create(out_dir.join("histogram.csv"))?);
    writeln!(out, "bin_start,bin_end,count")?;
    for (i, count) in metrics.histogram.counts.iter().enumerate() {
        let lo = i as f64 * metrics.histogram.bin_width;
        writeln!(
            out,
            "{:.2},{:.2},{}",
            lo,
            lo + metrics.histogram.bin_width,
            count
        )?;
    }
    out.flush()?;

    let occupancy = OccupancySeries {
        start_time: trace.records.first().map_or(0, |r| r.clock),
        step_seconds: trace.step_seconds,
        gammas: trace.records.iter().map(|r| r.gamma_observed).collect(),
    };
    crate::ingest::write_occupancy_csv(&occupancy, out_dir.join("occupancy.csv"))?;
    Ok(())
}

/// Writes the forgetting-factor sweep as `sweep.csv`.
pub fn emit_sweep(rows: &[(f64, f64)], out_dir: impl AsRef<Path>) -> Result<(), SimError> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let mut out = BufWriter::new(fs::File::create(out_dir.join("sweep.csv"))?);
    writeln!(out, "lambda,rms_error")?;
    for (lambda, rms) in rows {
        writeln!(out, "{lambda:.6},{rms:.9}")?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a zone-temperature step-response trace as `step_response.csv`.
pub fn emit_step_response(
    trace: &[f64],
    step_seconds: f64,
    out_dir: impl AsRef<Path>,
) -> Result<(), SimError> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let mut out = BufWriter::new(fs::File::create(out_dir.join("step_response.csv"))?);
    writeln!(out, "hour,zone_c")?;
    for (k, v) in trace.iter().enumerate() {
        writeln!(out, "{:.3},{:.6}", k as f64 * step_seconds / 3600.0, v)?;
    }
    out.flush()?;
    Ok(())
}
