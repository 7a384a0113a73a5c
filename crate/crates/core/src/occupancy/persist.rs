//! Occupancy model snapshots.
//!
//! Plain text: a header line `M G lambda`, then `2M` rows of `G` density
//! samples (occupied-origin slots 0..M-1 first, then vacant-origin). Values
//! are written with 17 significant digits so a round trip is bit exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{OccupancyError, OccupancyModel, ProbabilityGrid};

impl OccupancyModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), OccupancyError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.to_writer(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn to_writer(&self, out: &mut impl Write) -> Result<(), OccupancyError> {
        writeln!(
            out,
            "{} {} {:.16e}",
            self.period, self.grid_size, self.lambda
        )?;
        for grid in self.occupied.iter().chain(self.vacant.iter()) {
            let mut line = String::with_capacity(grid.len() * 24);
            for (i, v) in grid.values().iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{v:.16e}"));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, OccupancyError> {
        Self::from_reader(&mut BufReader::new(File::open(path)?))
    }

    pub fn from_reader(input: &mut impl Read) -> Result<Self, OccupancyError> {
        let reader = BufReader::new(input);
        let mut lines = reader.lines().enumerate();

        let (_, header) = lines
            .next()
            .ok_or_else(|| format_err(1, "empty model file"))?;
        let header = header?;
        let mut fields = header.split_whitespace();
        let period: usize = parse_field(fields.next(), 1, "period")?;
        let grid_size: usize = parse_field(fields.next(), 1, "grid size")?;
        let lambda: f64 = parse_field(fields.next(), 1, "lambda")?;
        if fields.next().is_some() {
            return Err(format_err(1, "trailing fields in header"));
        }
        if period < 1 || grid_size < super::MIN_GRID_SIZE || !(0.0..=1.0).contains(&lambda) {
            return Err(format_err(1, "header values out of range"));
        }

        let mut grids = Vec::with_capacity(2 * period);
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if grids.len() == 2 * period {
                return Err(OccupancyError::DimensionMismatch(format!(
                    "expected {} density rows, found more",
                    2 * period
                )));
            }
            let mut values = Vec::with_capacity(grid_size);
            for tok in line.split_whitespace() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| format_err(idx + 1, &format!("bad density value {tok:?}")))?;
                if !v.is_finite() || v < 0.0 {
                    return Err(format_err(idx + 1, "density values must be finite and >= 0"));
                }
                values.push(v);
            }
            if values.len() != grid_size {
                return Err(OccupancyError::DimensionMismatch(format!(
                    "row {} has {} samples, header declares G={}",
                    idx + 1,
                    values.len(),
                    grid_size
                )));
            }
            let grid = ProbabilityGrid::from_raw(values);
            if (grid.integral() - 1.0).abs() > 1e-6 {
                return Err(format_err(idx + 1, "density row does not integrate to 1"));
            }
            grids.push(grid);
        }
        if grids.len() != 2 * period {
            return Err(OccupancyError::DimensionMismatch(format!(
                "expected {} density rows, found {}",
                2 * period,
                grids.len()
            )));
        }
        let vacant = grids.split_off(period);
        Ok(Self {
            period,
            grid_size,
            lambda,
            occupied: grids,
            vacant,
        })
    }
}

fn format_err(line: usize, message: &str) -> OccupancyError {
    OccupancyError::Format {
        line,
        message: message.to_string(),
    }
}

fn parse_field<T: std::str::FromStr>(
    tok: Option<&str>,
    line: usize,
    name: &str,
) -> Result<T, OccupancyError> {
    let raw = tok.ok_or_else(|| format_err(line, &format!("missing {name}")))?;
    raw.parse()
        .map_err(|_| format_err(line, &format!("bad {name} {raw:?}")))
}
