//! Periodic two-state Markov occupancy model with online Bayesian training.
//!
//! The model keeps, for every period slot, a pair of bias densities: one for
//! transitions out of the occupied state and one for transitions out of the
//! vacant state. Fractional observations train both families with weights
//! given by the observed occupancy fractions, linear forgetting keeps the
//! densities mobile, and the expected biases populate a sparse periodic
//! transition matrix used to project occupancy any number of steps ahead.
//!
//! Training requires `&mut` access (single writer); prediction is read-only
//! and models are plain data, safe to move or share across threads.

mod grid;
mod persist;

pub use grid::{ProbabilityGrid, DEFAULT_GRID_SIZE, MIN_GRID_SIZE};

use grid::check_unit_interval;
use nalgebra::{DMatrix, RowDVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OccupancyError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate posterior: observation has zero likelihood under the density")]
    DegeneratePosterior,
    #[error("model file format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One discretized occupancy observation: the period slot it belongs to and
/// the fraction of that interval during which the space was occupied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyObservation {
    pub slot: usize,
    pub gamma: f64,
}

impl OccupancyObservation {
    pub fn new(slot: usize, gamma: f64, period: usize) -> Result<Self, OccupancyError> {
        if slot >= period {
            return Err(OccupancyError::InvalidArgument(format!(
                "slot {slot} out of range for period {period}"
            )));
        }
        check_unit_interval(gamma, "gamma")?;
        Ok(Self { slot, gamma })
    }
}

/// Periodic occupancy model: `period` slots, each holding an occupied-origin
/// and a vacant-origin transition-bias density.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyModel {
    period: usize,
    grid_size: usize,
    lambda: f64,
    occupied: Vec<ProbabilityGrid>,
    vacant: Vec<ProbabilityGrid>,
}

impl OccupancyModel {
    /// Fresh model with uniform densities in every slot.
    pub fn new(period: usize, grid_size: usize, lambda: f64) -> Result<Self, OccupancyError> {
        if period < 1 {
            return Err(OccupancyError::InvalidArgument(
                "period must be at least 1".to_string(),
            ));
        }
        check_unit_interval(lambda, "lambda")?;
        let prior = ProbabilityGrid::uniform(grid_size)?;
        Ok(Self {
            period,
            grid_size,
            lambda,
            occupied: vec![prior.clone(); period],
            vacant: vec![prior; period],
        })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Density of the occupied-to-occupied transition bias for a slot.
    pub fn occupied_density(&self, slot: usize) -> &ProbabilityGrid {
        &self.occupied[slot]
    }

    /// Density of the vacant-to-occupied transition bias for a slot.
    pub fn vacant_density(&self, slot: usize) -> &ProbabilityGrid {
        &self.vacant[slot]
    }

    fn check_slot(&self, slot: usize) -> Result<(), OccupancyError> {
        if slot >= self.period {
            return Err(OccupancyError::InvalidArgument(format!(
                "slot {slot} out of range for period {}",
                self.period
            )));
        }
        Ok(())
    }

    /// Trains slot `slot` on the observed transition `(gamma_now, gamma_next)`.
    ///
    /// Both posteriors (as-if-occupied-next and as-if-vacant-next) are blended
    /// by `gamma_next`; the blend is weighted into the occupied family by
    /// `gamma_now` and into the vacant family by `1 - gamma_now`. Forgetting
    /// is applied afterwards to both of the slot's densities. Other slots are
    /// untouched.
    pub fn train_step(
        &mut self,
        slot: usize,
        gamma_now: f64,
        gamma_next: f64,
    ) -> Result<(), OccupancyError> {
        self.check_slot(slot)?;
        check_unit_interval(gamma_now, "gamma_now")?;
        check_unit_interval(gamma_next, "gamma_next")?;

        let occupied = Self::trained_density(&self.occupied[slot], gamma_now, gamma_next)?
            .apply_forgetting(self.lambda)?;
        let vacant = Self::trained_density(&self.vacant[slot], 1.0 - gamma_now, gamma_next)?
            .apply_forgetting(self.lambda)?;
        self.occupied[slot] = occupied;
        self.vacant[slot] = vacant;
        Ok(())
    }

    /// Posterior blend for one family. `origin_weight` is the probability the
    /// interval started in this family's origin state; with weight zero the
    /// prior passes through untouched and no likelihood is evaluated.
    fn trained_density(
        prior: &ProbabilityGrid,
        origin_weight: f64,
        gamma_next: f64,
    ) -> Result<ProbabilityGrid, OccupancyError> {
        if origin_weight == 0.0 {
            return Ok(prior.clone());
        }
        let mut parts: Vec<(f64, ProbabilityGrid)> = Vec::with_capacity(3);
        if gamma_next > 0.0 {
            parts.push((origin_weight * gamma_next, prior.bayes_update(true)?));
        }
        if gamma_next < 1.0 {
            parts.push((
                origin_weight * (1.0 - gamma_next),
                prior.bayes_update(false)?,
            ));
        }
        parts.push((1.0 - origin_weight, prior.clone()));
        let refs: Vec<(f64, &ProbabilityGrid)> = parts.iter().map(|(w, g)| (*w, g)).collect();
        ProbabilityGrid::blend(&refs)
    }

    /// Assembles the sparse periodic transition matrix over the unrolled
    /// state space `[occupied slots 0..M-1 | vacant slots 0..M-1]`.
    pub fn transition_matrix(&self) -> TransitionMatrix {
        let m = self.period;
        let mut entries = DMatrix::<f64>::zeros(2 * m, 2 * m);
        for k in 0..m {
            let next = (k + 1) % m;
            let p = self.occupied[k].expected_bias();
            entries[(k, next)] = p;
            entries[(k, m + next)] = 1.0 - p;
            let q = self.vacant[k].expected_bias();
            entries[(m + k, next)] = q;
            entries[(m + k, m + next)] = 1.0 - q;
        }
        TransitionMatrix { entries, period: m }
    }

    /// Expected occupancy `steps` intervals ahead of slot `slot`, given the
    /// current fractional occupancy. `steps = 0` returns the observation.
    pub fn predict(&self, slot: usize, gamma_now: f64, steps: usize) -> f64 {
        if steps == 0 {
            return gamma_now;
        }
        *self
            .predict_horizon(slot, gamma_now, steps)
            .last()
            .expect("steps >= 1")
    }

    /// Expected occupancies 1..=steps intervals ahead, in order.
    pub fn predict_horizon(&self, slot: usize, gamma_now: f64, steps: usize) -> Vec<f64> {
        self.transition_matrix()
            .project_horizon(slot, gamma_now, steps)
    }
}

/// Row-stochastic transition matrix of the unrolled periodic chain. Each row
/// has exactly two structural entries, both pointing at the next slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    entries: DMatrix<f64>,
    period: usize,
}

impl TransitionMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn dim(&self) -> usize {
        2 * self.period
    }

    /// Expected occupancy after `steps` applications of the chain, starting
    /// from probability `gamma` on the occupied state of `slot`.
    pub fn project(&self, slot: usize, gamma: f64, steps: usize) -> f64 {
        if steps == 0 {
            return gamma;
        }
        *self
            .project_horizon(slot, gamma, steps)
            .last()
            .expect("steps >= 1")
    }

    /// Expected occupancy at each of the next `steps` intervals.
    pub fn project_horizon(&self, slot: usize, gamma: f64, steps: usize) -> Vec<f64> {
        let m = self.period;
        let mut dist = RowDVector::<f64>::zeros(2 * m);
        dist[slot] = gamma;
        dist[m + slot] = 1.0 - gamma;
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            dist *= &self.entries;
            out.push(dist.view((0, 0), (1, m)).sum());
        }
        out
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|r| self.entries.row(r).sum())
            .collect()
    }
}
