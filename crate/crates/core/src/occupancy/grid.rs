//! Numerical density over a transition bias in [0, 1].
//!
//! Posteriors here are products of Bernoulli likelihoods blended with a
//! uniform prior; once forgetting mixes densities the family has no
//! closed form, so each density is kept as samples on a uniform grid and
//! integrated with the trapezoidal rule.

use super::OccupancyError;

/// Default number of grid points per density.
pub const DEFAULT_GRID_SIZE: usize = 201;

/// Minimum admissible number of grid points.
pub const MIN_GRID_SIZE: usize = 3;

/// A pre-normalization integral below this is treated as a degenerate
/// posterior (the observation had zero likelihood under the density).
const DEGENERATE_MASS: f64 = 1e-12;

/// Density samples over a uniform grid of bias values `theta_i = i/(G-1)`.
///
/// Invariants: all samples are finite and non-negative, and the trapezoidal
/// integral over [0, 1] is 1 within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityGrid {
    values: Vec<f64>,
}

impl ProbabilityGrid {
    /// Uniform density (all samples 1), the no-knowledge prior.
    pub fn uniform(size: usize) -> Result<Self, OccupancyError> {
        if size < MIN_GRID_SIZE {
            return Err(OccupancyError::InvalidArgument(format!(
                "grid size must be at least {MIN_GRID_SIZE}, got {size}"
            )));
        }
        Ok(Self {
            values: vec![1.0; size],
        })
    }

    /// Builds a grid from raw samples, normalizing them to unit integral.
    pub fn from_unnormalized(values: Vec<f64>) -> Result<Self, OccupancyError> {
        if values.len() < MIN_GRID_SIZE {
            return Err(OccupancyError::InvalidArgument(format!(
                "grid size must be at least {MIN_GRID_SIZE}, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(OccupancyError::InvalidArgument(
                "density samples must be finite and non-negative".to_string(),
            ));
        }
        let mut grid = Self { values };
        let mass = grid.integral();
        if mass < DEGENERATE_MASS {
            return Err(OccupancyError::DegeneratePosterior);
        }
        grid.scale(1.0 / mass);
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Bias value at sample index `i`.
    pub fn theta(&self, i: usize) -> f64 {
        i as f64 / (self.values.len() - 1) as f64
    }

    fn step(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    /// Trapezoidal integral of the density over [0, 1].
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.step())
    }

    /// Trapezoidal estimate of the mean bias, clamped to [0, 1].
    pub fn expected_bias(&self) -> f64 {
        let weighted: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| self.theta(i) * v)
            .collect();
        trapezoid(&weighted, self.step()).clamp(0.0, 1.0)
    }

    /// Bayes update against a Bernoulli outcome: multiplies by `theta` when
    /// the next interval was occupied and by `1 - theta` otherwise, then
    /// renormalizes.
    pub fn bayes_update(&self, occupied_next: bool) -> Result<Self, OccupancyError> {
        let values: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let theta = self.theta(i);
                v * if occupied_next { theta } else { 1.0 - theta }
            })
            .collect();
        let mass = trapezoid(&values, self.step());
        if mass < DEGENERATE_MASS {
            return Err(OccupancyError::DegeneratePosterior);
        }
        let mut grid = Self { values };
        grid.scale(1.0 / mass);
        Ok(grid)
    }

    /// Linear forgetting: blends the density toward the uniform prior,
    /// `lambda * self + (1 - lambda) * 1`, and renormalizes.
    pub fn apply_forgetting(&self, lambda: f64) -> Result<Self, OccupancyError> {
        check_unit_interval(lambda, "lambda")?;
        if lambda == 1.0 {
            return Ok(self.clone());
        }
        let values: Vec<f64> = self
            .values
            .iter()
            .map(|v| lambda * v + (1.0 - lambda))
            .collect();
        Self::from_unnormalized(values)
    }

    /// Convex combination of grids with the given weights, renormalized.
    /// Weights must be non-negative and the grids equally sized.
    pub(super) fn blend(parts: &[(f64, &ProbabilityGrid)]) -> Result<Self, OccupancyError> {
        let size = parts[0].1.len();
        let mut values = vec![0.0; size];
        for (weight, grid) in parts {
            debug_assert_eq!(grid.len(), size);
            for (acc, v) in values.iter_mut().zip(grid.values()) {
                *acc += weight * v;
            }
        }
        Self::from_unnormalized(values)
    }

    pub(super) fn from_raw(values: Vec<f64>) -> Self {
        Self { values }
    }

    fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    /// Checks the type invariants (non-negativity, unit integral).
    pub fn validate(&self) -> Result<(), OccupancyError> {
        if self.values.len() < MIN_GRID_SIZE {
            return Err(OccupancyError::InvalidArgument(
                "grid too small".to_string(),
            ));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(OccupancyError::InvalidArgument(
                "density samples must be finite and non-negative".to_string(),
            ));
        }
        let mass = self.integral();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(OccupancyError::InvalidArgument(format!(
                "density integrates to {mass}, expected 1"
            )));
        }
        Ok(())
    }
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    let interior: f64 = values[1..n - 1].iter().sum();
    step * (0.5 * values[0] + interior + 0.5 * values[n - 1])
}

pub(super) fn check_unit_interval(value: f64, name: &str) -> Result<(), OccupancyError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(OccupancyError::InvalidArgument(format!(
            "{name} must lie in [0, 1], got {value}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const G: usize = DEFAULT_GRID_SIZE;

    /// Analytic Beta(a, b) mean, the conjugate oracle for boolean updates
    /// starting from the uniform prior.
    fn beta_mean(ones: u32, zeros: u32) -> f64 {
        (ones + 1) as f64 / (ones + zeros + 2) as f64
    }

    #[test]
    fn uniform_integrates_to_one() {
        let g = ProbabilityGrid::uniform(G).unwrap();
        assert!((g.integral() - 1.0).abs() < 1e-12);
        assert_eq!(g.expected_bias(), 0.5);
        g.validate().unwrap();
    }

    #[test]
    fn rejects_tiny_grid() {
        assert!(matches!(
            ProbabilityGrid::uniform(0),
            Err(OccupancyError::InvalidArgument(_))
        ));
        assert!(ProbabilityGrid::uniform(2).is_err());
        assert!(ProbabilityGrid::uniform(3).is_ok());
    }

    #[test]
    fn single_update_matches_beta_mean() {
        let g = ProbabilityGrid::uniform(G).unwrap();
        let up = g.bayes_update(true).unwrap();
        assert!((up.integral() - 1.0).abs() < 1e-9);
        assert!((up.expected_bias() - beta_mean(1, 0)).abs() < 1e-4);
    }

    #[test]
    fn update_sequences_match_laplace_rule() {
        // Order must not matter; interleave ones and zeros.
        for (ones, zeros) in [(3u32, 1u32), (0, 5), (7, 7), (10, 2)] {
            let mut g = ProbabilityGrid::uniform(G).unwrap();
            let (mut n1, mut n0) = (0, 0);
            while n1 < ones || n0 < zeros {
                if n1 < ones {
                    g = g.bayes_update(true).unwrap();
                    n1 += 1;
                }
                if n0 < zeros {
                    g = g.bayes_update(false).unwrap();
                    n0 += 1;
                }
            }
            assert!(
                (g.expected_bias() - beta_mean(ones, zeros)).abs() < 1e-4,
                "ones={ones} zeros={zeros}"
            );
        }
    }

    #[test]
    fn degenerate_posterior_detected() {
        // All mass at theta = 0, then observe an occupied transition.
        let mut values = vec![0.0; G];
        values[0] = 1.0;
        let spike = ProbabilityGrid::from_unnormalized(values).unwrap();
        assert!(matches!(
            spike.bayes_update(true),
            Err(OccupancyError::DegeneratePosterior)
        ));
        assert!(spike.bayes_update(false).is_ok());
    }

    #[test]
    fn spike_at_one_has_extreme_mean() {
        let mut values = vec![0.0; G];
        values[G - 1] = 1.0;
        let spike = ProbabilityGrid::from_unnormalized(values).unwrap();
        assert!(spike.expected_bias() >= 1.0 - 1.0 / (G - 1) as f64);
    }

    #[test]
    fn forgetting_limits() {
        let trained = ProbabilityGrid::uniform(G)
            .unwrap()
            .bayes_update(true)
            .unwrap();
        let same = trained.apply_forgetting(1.0).unwrap();
        assert_eq!(trained.values(), same.values());
        let reset = trained.apply_forgetting(0.0).unwrap();
        for v in reset.values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!(trained.apply_forgetting(1.5).is_err());
    }

    #[test]
    fn forgetting_mixes_expected_bias_linearly() {
        // Density proportional to theta has mean 2/3; blending toward the
        // uniform prior moves the mean linearly toward 1/2.
        let ramp = ProbabilityGrid::uniform(G)
            .unwrap()
            .bayes_update(true)
            .unwrap();
        let mixed = ramp.apply_forgetting(0.85).unwrap();
        let expect = 0.85 * (2.0 / 3.0) + 0.15 * 0.5;
        assert!((mixed.expected_bias() - expect).abs() < 1e-4);
    }
}
