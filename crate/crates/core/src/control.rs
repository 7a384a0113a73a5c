//! Finite-horizon heat-input controllers.
//!
//! All three controllers solve the same box-constrained QP over the input
//! sequence; they differ only in the per-step discomfort weights and the
//! setpoint they regulate toward:
//!
//! - predictive: weights are occupancy expectations projected from the
//!   latest observation through the Markov model;
//! - triggered: the current boolean occupancy held over the whole horizon;
//! - scheduled: a fixed daily window plus occupancy triggering, with the
//!   schedule known over the horizon.
//!
//! The stage cost is `weight * beta * (x_zone - tau)^2 + r * |u|`; with the
//! default heat-only bounds `0 <= u <= u_max` the energy term is linear, so
//! the problem is a convex QP. A two-sided input range splits `u` into
//! positive and negative parts to keep `|u|` exact.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::occupancy::OccupancyModel;
use crate::qp::{solve_box_qp, BoxQp, QpError};
use crate::thermal::AugmentedModel;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(
        "solver failed to reach tolerance {tolerance:.3e} within {iterations} iterations \
         (residual {residual:.3e})"
    )]
    SolverFailure {
        iterations: usize,
        tolerance: f64,
        residual: f64,
    },
}

impl From<QpError> for ControlError {
    fn from(err: QpError) -> Self {
        match err {
            QpError::DimensionMismatch(msg) => ControlError::DimensionMismatch(msg),
            QpError::InfeasibleBox { index, lo, hi } => ControlError::InvalidConfig(format!(
                "input bounds infeasible at step {index}: [{lo}, {hi}]"
            )),
            QpError::SolverFailure {
                iterations,
                tolerance,
                residual,
            } => ControlError::SolverFailure {
                iterations,
                tolerance,
                residual,
            },
        }
    }
}

/// Energy cost gain per watt; a sequence allows time-of-day pricing.
#[derive(Debug, Clone, PartialEq)]
pub enum EnergyGain {
    Constant(f64),
    PerStep(Vec<f64>),
}

impl EnergyGain {
    pub fn at(&self, step: usize) -> f64 {
        match self {
            EnergyGain::Constant(r) => *r,
            EnergyGain::PerStep(rs) => rs[step.min(rs.len() - 1)],
        }
    }
}

/// Controller tuning shared by all three implementations.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    pub horizon: usize,
    /// Discomfort gain, cost per degC^2 of occupancy-weighted deviation.
    pub beta: f64,
    /// Energy gain, cost per W.
    pub energy_gain: EnergyGain,
    /// Comfort setpoint, degC.
    pub tau: f64,
    /// Setback setpoint used by the baselines when vacant and on weekends.
    pub tau_setback: f64,
    /// Input bounds in W. Heat-only is `[0, u_max]`; a negative lower bound
    /// enables cooling.
    pub u_min: f64,
    pub u_max: f64,
    pub solver_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 24,
            beta: 1.0,
            energy_gain: EnergyGain::Constant(5.0e-3),
            tau: 23.0,
            tau_setback: 10.0,
            u_min: 0.0,
            u_max: 8000.0,
            solver_tolerance: 1e-8,
            max_iterations: 200,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if self.horizon < 1 {
            return Err(ControlError::InvalidConfig(
                "horizon must be at least 1".to_string(),
            ));
        }
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(ControlError::InvalidConfig(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        let gains: Vec<f64> = (0..self.horizon).map(|j| self.energy_gain.at(j)).collect();
        if gains.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(ControlError::InvalidConfig(
                "energy gain must be non-negative".to_string(),
            ));
        }
        if let EnergyGain::PerStep(rs) = &self.energy_gain {
            if rs.is_empty() {
                return Err(ControlError::InvalidConfig(
                    "per-step energy gain sequence is empty".to_string(),
                ));
            }
        }
        if !self.u_max.is_finite() || self.u_max <= 0.0 || self.u_min > self.u_max {
            return Err(ControlError::InvalidConfig(format!(
                "input bounds [{}, {}] invalid",
                self.u_min, self.u_max
            )));
        }
        if !self.solver_tolerance.is_finite() || self.solver_tolerance <= 0.0 {
            return Err(ControlError::InvalidConfig(
                "solver tolerance must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

/// Result of one horizon solve. Only the first input is applied; the rest
/// of the sequence is discarded by the receding-horizon loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlDecision {
    pub u_sequence: Vec<f64>,
    pub applied_u: f64,
    pub predicted_cost: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Occupancy-weighted stage cost `gamma * beta * (x_zone - tau)^2 + r * |u|`.
pub fn stage_cost(x_zone: f64, tau: f64, u: f64, gamma: f64, beta: f64, r: f64) -> f64 {
    gamma * beta * (x_zone - tau) * (x_zone - tau) + r * u.abs()
}

/// Predictive controller: discomfort weights are the occupancy expectations
/// conditioned on the live observation; the weight at the current step is
/// the observation itself.
pub fn solve_mpc(
    augmented: &AugmentedModel,
    x_tilde0: &DVector<f64>,
    gamma_now: f64,
    model: &OccupancyModel,
    slot: usize,
    config: &MpcConfig,
) -> Result<ControlDecision, ControlError> {
    let n = config.horizon;
    let mut weights = Vec::with_capacity(n);
    weights.push(gamma_now);
    if n > 1 {
        weights.extend(model.predict_horizon(slot, gamma_now, n - 1));
    }
    solve_weighted(augmented, x_tilde0, &weights, config)
}

/// Occupancy-triggered baseline: the current boolean occupancy (ties round
/// up) is held over the whole horizon and the setpoint switches between
/// comfort and setback accordingly.
pub fn triggered_controller(
    augmented: &AugmentedModel,
    x_tilde0: &DVector<f64>,
    gamma_now: f64,
    config: &MpcConfig,
) -> Result<ControlDecision, ControlError> {
    let occupied = gamma_now >= 0.5;
    let weights = vec![if occupied { 1.0 } else { 0.0 }; config.horizon];
    let tau = if occupied { config.tau } else { config.tau_setback };
    let xt = with_setpoint(augmented, x_tilde0, tau);
    solve_weighted(augmented, &xt, &weights, config)
}

/// Daily schedule window for the scheduled baseline, hours [start, end).
pub const SCHEDULE_START_HOUR: u32 = 5;
pub const SCHEDULE_END_HOUR: u32 = 21;

/// Scheduled baseline: full weight during the daily window or while the
/// space is occupied, with the window applied over the horizon using the
/// known schedule. With the weekend flag set, occupancy is ignored and the
/// controller regulates toward the setback setpoint with zero weights.
pub fn scheduled_controller(
    augmented: &AugmentedModel,
    x_tilde0: &DVector<f64>,
    gamma_now: f64,
    clock_hour: u32,
    weekend: bool,
    config: &MpcConfig,
) -> Result<ControlDecision, ControlError> {
    if weekend {
        return setback_controller(augmented, x_tilde0, config);
    }
    let occupied = gamma_now >= 0.5;
    let weights: Vec<f64> = (0..config.horizon)
        .map(|j| {
            let hour = (clock_hour + j as u32) % 24;
            let in_window = (SCHEDULE_START_HOUR..SCHEDULE_END_HOUR).contains(&hour);
            if in_window || occupied {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let tau = if weights.iter().any(|w| *w > 0.0) {
        config.tau
    } else {
        config.tau_setback
    };
    let xt = with_setpoint(augmented, x_tilde0, tau);
    solve_weighted(augmented, &xt, &weights, config)
}

/// Setback mode: zero discomfort weights and the setback setpoint. With a
/// positive energy gain the optimal input is identically zero.
pub fn setback_controller(
    augmented: &AugmentedModel,
    x_tilde0: &DVector<f64>,
    config: &MpcConfig,
) -> Result<ControlDecision, ControlError> {
    let weights = vec![0.0; config.horizon];
    let xt = with_setpoint(augmented, x_tilde0, config.tau_setback);
    solve_weighted(augmented, &xt, &weights, config)
}

fn with_setpoint(
    augmented: &AugmentedModel,
    x_tilde0: &DVector<f64>,
    tau: f64,
) -> DVector<f64> {
    let mut xt = x_tilde0.clone();
    if augmented.setpoint_index() < xt.len() {
        xt[augmented.setpoint_index()] = tau;
    }
    xt
}

/// Solves the horizon problem for an explicit discomfort-weight sequence:
/// minimize `sum_j weights[j] * beta * (x_zone[k+j] - tau)^2 + r_j * |u_j|`
/// subject to the augmented dynamics and the input box.
pub fn solve_weighted(
    augmented: &AugmentedModel,
    x_tilde0: &DVector<f64>,
    weights: &[f64],
    config: &MpcConfig,
) -> Result<ControlDecision, ControlError> {
    config.validate()?;
    let n = config.horizon;
    if weights.len() != n {
        return Err(ControlError::DimensionMismatch(format!(
            "{} weights for horizon {}",
            weights.len(),
            n
        )));
    }
    if augmented.horizon() < n {
        return Err(ControlError::DimensionMismatch(format!(
            "augmented model carries {} forecast steps, horizon needs {}",
            augmented.horizon(),
            n
        )));
    }
    if x_tilde0.len() != augmented.dim() {
        return Err(ControlError::DimensionMismatch(format!(
            "augmented state has {} entries, model expects {}",
            x_tilde0.len(),
            augmented.dim()
        )));
    }
    if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(ControlError::InvalidConfig(
            "discomfort weights must lie in [0, 1]".to_string(),
        ));
    }

    // Free responses d0[j] = c' A~^j xt0 and impulse responses
    // h[m] = c' A~^m B~, with c extracting (x_zone - tau).
    let dim = augmented.dim();
    let mut c = DVector::<f64>::zeros(dim);
    c[augmented.zone_index()] = 1.0;
    c[augmented.setpoint_index()] = -1.0;
    let mut d0 = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n.saturating_sub(1));
    let mut v = c;
    for j in 0..n {
        d0.push(v.dot(x_tilde0));
        if j + 1 < n {
            h.push(v.dot(augmented.b_tilde()));
        }
        if j + 1 < n {
            v = augmented.a_tilde().transpose() * v;
        }
    }

    // Quadratic form over the input sequence: the deviation at step j is
    // d0[j] + sum_{i<j} h[j-1-i] u[i].
    let beta = config.beta;
    let mut hessian = DMatrix::<f64>::zeros(n, n);
    let mut linear = DVector::<f64>::zeros(n);
    for j in 0..n {
        let w = weights[j] * beta;
        if w == 0.0 {
            continue;
        }
        for i in 0..j {
            let hi = h[j - 1 - i];
            linear[i] += 2.0 * w * d0[j] * hi;
            for i2 in 0..=i {
                let contribution = 2.0 * w * hi * h[j - 1 - i2];
                hessian[(i, i2)] += contribution;
                if i2 != i {
                    hessian[(i2, i)] += contribution;
                }
            }
        }
    }
    let gains: Vec<f64> = (0..n).map(|j| config.energy_gain.at(j)).collect();

    let (u, solution) = if config.u_min >= 0.0 {
        // Heat-only: |u| = u, plain linear energy term.
        for (l, r) in linear.iter_mut().zip(&gains) {
            *l += r;
        }
        let problem = BoxQp {
            hessian,
            linear,
            lower: DVector::from_element(n, config.u_min),
            upper: DVector::from_element(n, config.u_max),
        };
        let sol = solve_box_qp(&problem, None, config.solver_tolerance, config.max_iterations)?;
        (sol.x.iter().copied().collect::<Vec<f64>>(), sol)
    } else {
        // Two-sided range: split u into positive and negative parts so the
        // energy term stays |u| = u_pos + u_neg.
        let mut split_h = DMatrix::<f64>::zeros(2 * n, 2 * n);
        split_h.view_mut((0, 0), (n, n)).copy_from(&hessian);
        split_h.view_mut((n, n), (n, n)).copy_from(&hessian);
        split_h.view_mut((0, n), (n, n)).copy_from(&(-&hessian));
        split_h.view_mut((n, 0), (n, n)).copy_from(&(-&hessian));
        let mut split_q = DVector::<f64>::zeros(2 * n);
        for j in 0..n {
            split_q[j] = linear[j] + gains[j];
            split_q[n + j] = -linear[j] + gains[j];
        }
        let mut lower = DVector::<f64>::zeros(2 * n);
        let mut upper = DVector::<f64>::zeros(2 * n);
        for j in 0..n {
            lower[j] = 0.0;
            upper[j] = config.u_max.max(0.0);
            lower[n + j] = 0.0;
            upper[n + j] = -config.u_min;
        }
        let problem = BoxQp {
            hessian: split_h,
            linear: split_q,
            lower,
            upper,
        };
        let sol = solve_box_qp(&problem, None, config.solver_tolerance, config.max_iterations)?;
        let u: Vec<f64> = (0..n).map(|j| sol.x[j] - sol.x[n + j]).collect();
        (u, sol)
    };

    // Report the true horizon objective including the input-independent
    // discomfort already locked in by the current state.
    let predicted_cost = {
        let mut cost = 0.0;
        for j in 0..n {
            let mut dev = d0[j];
            for i in 0..j {
                dev += h[j - 1 - i] * u[i];
            }
            cost += weights[j] * beta * dev * dev + gains[j] * u[j].abs();
        }
        cost
    };

    Ok(ControlDecision {
        applied_u: u[0],
        u_sequence: u,
        predicted_cost,
        kkt_residual: solution.kkt_residual,
        iterations: solution.iterations,
    })
}
