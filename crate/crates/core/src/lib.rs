//! Occupancy-predictive model-predictive HVAC control.
//!
//! The crate provides the four pieces needed to close the loop on a
//! simulated single-zone building, plus the simulation engine that wires
//! them together:
//!
//! - [`occupancy`]: an online-trained periodic Markov occupancy model with
//!   linear forgetting, producing multi-step occupancy expectations.
//! - [`ingest`]: motion-sensor pulse logs and weather files converted into
//!   discrete-time series.
//! - [`thermal`]: parametric single-zone RC networks, exact zero-order-hold
//!   discretization, and the setpoint/forecast state augmentation.
//! - [`control`]: the occupancy-weighted finite-horizon controller and the
//!   triggered/scheduled baselines, all solving the same box-constrained QP.
//! - [`sim`]: scenario configuration, the closed simulation loop, metrics,
//!   the forgetting-factor sweep, synthetic data generators, and report
//!   writers.

pub mod clock;
pub mod control;
pub mod ingest;
pub mod occupancy;
pub mod qp;
pub mod sim;
pub mod thermal;

pub use control::{ControlDecision, ControlError, EnergyGain, MpcConfig};
pub use ingest::{
    merge_pulses, IngestError, Interval, OccupancySeries, PulseEvent, WeatherSeries,
};
pub use occupancy::{
    OccupancyError, OccupancyModel, OccupancyObservation, ProbabilityGrid, TransitionMatrix,
};
pub use sim::{
    run_simulation, ControllerKind, MetricsSummary, ScenarioConfig, SimError, SimulationTrace,
};
pub use thermal::{
    augment, build_single_zone, AugmentedModel, Layer, RcNetwork, SingleZoneParams,
    StateSpaceModel, ThermalError,
};
