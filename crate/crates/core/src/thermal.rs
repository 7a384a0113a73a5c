//! Single-zone building thermal model.
//!
//! A lumped RC network (capacitive nodes, conductive links, boundary
//! temperature sources) is discretized exactly by zero-order hold into
//! `x[k+1] = A x[k] + B_u u[k] + B_w w[k]`, then augmented with the
//! setpoint register and a weather-forecast shift register for the
//! controller. One-hour steps with wall time constants make Euler
//! discretization visibly wrong, hence the matrix exponential.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ThermalError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("node {0} has non-positive capacitance")]
    SingularCapacitance(usize),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("model file format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lumped thermal network: node capacitances, node-to-node conductances,
/// and node-to-boundary conductances. Boundary sources carry labels; the
/// zone air node is the controlled one.
#[derive(Debug, Clone, PartialEq)]
pub struct RcNetwork {
    capacitances: Vec<f64>,
    node_links: Vec<(usize, usize, f64)>,
    boundary_links: Vec<(usize, usize, f64)>,
    boundary_labels: Vec<String>,
    zone_node: usize,
}

impl RcNetwork {
    pub fn new(
        capacitances: Vec<f64>,
        node_links: Vec<(usize, usize, f64)>,
        boundary_links: Vec<(usize, usize, f64)>,
        boundary_labels: Vec<String>,
        zone_node: usize,
    ) -> Result<Self, ThermalError> {
        let n = capacitances.len();
        if n == 0 {
            return Err(ThermalError::InvalidNetwork("no nodes".to_string()));
        }
        if let Some(i) = capacitances.iter().position(|c| !c.is_finite() || *c <= 0.0) {
            return Err(ThermalError::SingularCapacitance(i));
        }
        if zone_node >= n {
            return Err(ThermalError::InvalidNetwork(format!(
                "zone node {zone_node} out of range for {n} nodes"
            )));
        }
        for (a, b, g) in &node_links {
            if *a >= n || *b >= n || a == b {
                return Err(ThermalError::InvalidNetwork(format!(
                    "bad link ({a}, {b})"
                )));
            }
            if !g.is_finite() || *g < 0.0 {
                return Err(ThermalError::InvalidNetwork(format!(
                    "negative conductance on link ({a}, {b})"
                )));
            }
        }
        for (i, b, g) in &boundary_links {
            if *i >= n || *b >= boundary_labels.len() {
                return Err(ThermalError::InvalidNetwork(format!(
                    "bad boundary link ({i}, {b})"
                )));
            }
            if !g.is_finite() || *g < 0.0 {
                return Err(ThermalError::InvalidNetwork(format!(
                    "negative conductance on boundary link ({i}, {b})"
                )));
            }
        }
        let network = Self {
            capacitances,
            node_links,
            boundary_links,
            boundary_labels,
            zone_node,
        };
        network.check_connected()?;
        Ok(network)
    }

    /// Every node must reach a boundary source through positive
    /// conductances, otherwise part of the network floats and the
    /// discretized system is not strictly stable.
    fn check_connected(&self) -> Result<(), ThermalError> {
        let n = self.capacitances.len();
        let mut reached = vec![false; n];
        let mut queue: Vec<usize> = self
            .boundary_links
            .iter()
            .filter(|(_, _, g)| *g > 0.0)
            .map(|(i, _, _)| *i)
            .collect();
        if queue.is_empty() {
            return Err(ThermalError::InvalidNetwork(
                "no boundary conductance".to_string(),
            ));
        }
        while let Some(i) = queue.pop() {
            if reached[i] {
                continue;
            }
            reached[i] = true;
            for (a, b, g) in &self.node_links {
                if *g > 0.0 {
                    if *a == i && !reached[*b] {
                        queue.push(*b);
                    }
                    if *b == i && !reached[*a] {
                        queue.push(*a);
                    }
                }
            }
        }
        match reached.iter().position(|r| !r) {
            Some(i) => Err(ThermalError::InvalidNetwork(format!(
                "node {i} is not connected to any boundary source"
            ))),
            None => Ok(()),
        }
    }

    pub fn node_count(&self) -> usize {
        self.capacitances.len()
    }

    pub fn boundary_count(&self) -> usize {
        self.boundary_labels.len()
    }

    pub fn boundary_labels(&self) -> &[String] {
        &self.boundary_labels
    }

    pub fn zone_node(&self) -> usize {
        self.zone_node
    }
}

/// One homogeneous material layer of a wall, roof, or floor assembly,
/// listed inside to outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub thickness_m: f64,
    pub conductivity_w_mk: f64,
    pub density_kg_m3: f64,
    pub specific_heat_j_kgk: f64,
}

impl Layer {
    pub const fn new(
        thickness_m: f64,
        conductivity_w_mk: f64,
        density_kg_m3: f64,
        specific_heat_j_kgk: f64,
    ) -> Self {
        Self {
            thickness_m,
            conductivity_w_mk,
            density_kg_m3,
            specific_heat_j_kgk,
        }
    }
}

/// Geometry and materials for the constructive single-zone builder.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleZoneParams {
    pub width_m: f64,
    pub depth_m: f64,
    pub height_m: f64,
    pub wall_layers: Vec<Layer>,
    pub roof_layers: Vec<Layer>,
    pub floor_layers: Vec<Layer>,
    /// Interior film coefficient, W/(m^2 K). Time-invariant.
    pub h_in: f64,
    /// Exterior film coefficient, W/(m^2 K). Time-invariant.
    pub h_out: f64,
    /// Infiltration air changes per hour, coupling zone air to outdoor air.
    pub infiltration_ach: f64,
}

const AIR_DENSITY: f64 = 1.204; // kg/m^3
const AIR_SPECIFIC_HEAT: f64 = 1005.0; // J/(kg K)

impl Default for SingleZoneParams {
    /// Demo building: a 10 m x 15 m x 3 m zone with massive interior layers
    /// and exterior insulation, sized so an 8 kW heater just saturates in
    /// cold-season conditions.
    fn default() -> Self {
        let concrete = |t| Layer::new(t, 1.4, 2300.0, 880.0);
        let insulation = |t| Layer::new(t, 0.04, 30.0, 1200.0);
        Self {
            width_m: 10.0,
            depth_m: 15.0,
            height_m: 3.0,
            wall_layers: vec![concrete(0.05), insulation(0.10)],
            roof_layers: vec![concrete(0.05), insulation(0.12)],
            floor_layers: vec![concrete(0.08), insulation(0.10)],
            h_in: 3.0,
            h_out: 17.0,
            infiltration_ach: 0.2,
        }
    }
}

pub const BOUNDARY_OUTDOOR: usize = 0;
pub const BOUNDARY_GROUND: usize = 1;

/// Builds the star-plus-chain network: one zone air node, a layered chain
/// per wall and the roof running to outdoor air, and a floor chain running
/// to ground. Node 0 is the zone.
pub fn build_single_zone(params: &SingleZoneParams) -> Result<RcNetwork, ThermalError> {
    for (name, v) in [
        ("width", params.width_m),
        ("depth", params.depth_m),
        ("height", params.height_m),
        ("h_in", params.h_in),
        ("h_out", params.h_out),
    ] {
        if !v.is_finite() || v <= 0.0 {
            return Err(ThermalError::InvalidGeometry(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    if params.infiltration_ach < 0.0 {
        return Err(ThermalError::InvalidGeometry(
            "infiltration_ach must be non-negative".to_string(),
        ));
    }
    for (name, layers) in [
        ("wall", &params.wall_layers),
        ("roof", &params.roof_layers),
        ("floor", &params.floor_layers),
    ] {
        if layers.is_empty() {
            return Err(ThermalError::InvalidGeometry(format!(
                "{name} needs at least one layer"
            )));
        }
        for layer in layers.iter() {
            let positive = |v: f64| v.is_finite() && v > 0.0;
            if !positive(layer.thickness_m)
                || !positive(layer.conductivity_w_mk)
                || !positive(layer.density_kg_m3)
                || !positive(layer.specific_heat_j_kgk)
            {
                return Err(ThermalError::InvalidGeometry(format!(
                    "{name} layer properties must be positive: {layer:?}"
                )));
            }
        }
    }

    let volume = params.width_m * params.depth_m * params.height_m;
    let mut capacitances = vec![volume * AIR_DENSITY * AIR_SPECIFIC_HEAT];
    let mut node_links = Vec::new();
    let mut boundary_links = Vec::new();

    let add_chain = |capacitances: &mut Vec<f64>,
                         node_links: &mut Vec<(usize, usize, f64)>,
                         boundary_links: &mut Vec<(usize, usize, f64)>,
                         area: f64,
                         layers: &[Layer],
                         boundary: usize,
                         h_in: f64,
                         h_out: Option<f64>| {
        let mut prev = 0usize; // zone node
        // Resistance carried over from the previous node's outer half layer
        // (starts as the interior film).
        let mut carried_resistance = 1.0 / (h_in * area);
        for layer in layers {
            let node = capacitances.len();
            capacitances.push(area * layer.thickness_m * layer.density_kg_m3 * layer.specific_heat_j_kgk);
            let half = 0.5 * layer.thickness_m / (layer.conductivity_w_mk * area);
            node_links.push((prev, node, 1.0 / (carried_resistance + half)));
            carried_resistance = half;
            prev = node;
        }
        let film = match h_out {
            Some(h) => 1.0 / (h * area),
            None => 0.0,
        };
        boundary_links.push((prev, boundary, 1.0 / (carried_resistance + film)));
    };

    let wall_areas = [
        params.width_m * params.height_m,
        params.width_m * params.height_m,
        params.depth_m * params.height_m,
        params.depth_m * params.height_m,
    ];
    for area in wall_areas {
        add_chain(
            &mut capacitances,
            &mut node_links,
            &mut boundary_links,
            area,
            &params.wall_layers,
            BOUNDARY_OUTDOOR,
            params.h_in,
            Some(params.h_out),
        );
    }
    let plan_area = params.width_m * params.depth_m;
    add_chain(
        &mut capacitances,
        &mut node_links,
        &mut boundary_links,
        plan_area,
        &params.roof_layers,
        BOUNDARY_OUTDOOR,
        params.h_in,
        Some(params.h_out),
    );
    // Floor slab conducts straight into the ground, no exterior film.
    add_chain(
        &mut capacitances,
        &mut node_links,
        &mut boundary_links,
        plan_area,
        &params.floor_layers,
        BOUNDARY_GROUND,
        params.h_in,
        None,
    );

    if params.infiltration_ach > 0.0 {
        let flow = params.infiltration_ach * volume / 3600.0 * AIR_DENSITY * AIR_SPECIFIC_HEAT;
        boundary_links.push((0, BOUNDARY_OUTDOOR, flow));
    }

    RcNetwork::new(
        capacitances,
        node_links,
        boundary_links,
        vec!["outdoor".to_string(), "ground".to_string()],
        0,
    )
}

/// Discrete-time thermal dynamics `x[k+1] = A x[k] + B_u u[k] + B_w w[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b_u: DVector<f64>,
    b_w: DMatrix<f64>,
    step_seconds: f64,
    zone_index: usize,
}

/// Exact zero-order-hold discretization of the continuous network dynamics
/// `C dx/dt = -L x + sources` over `step_seconds`, via the matrix
/// exponential of the stacked system.
pub fn discretize(network: &RcNetwork, step_seconds: f64) -> Result<StateSpaceModel, ThermalError> {
    if let Some(i) = network.capacitances.iter().position(|c| !c.is_finite() || *c <= 0.0) {
        return Err(ThermalError::SingularCapacitance(i));
    }
    if !step_seconds.is_finite() || step_seconds < 0.0 {
        return Err(ThermalError::InvalidNetwork(format!(
            "step_seconds must be non-negative, got {step_seconds}"
        )));
    }
    let n = network.node_count();
    let m = network.boundary_count();

    if step_seconds == 0.0 {
        return Ok(StateSpaceModel {
            a: DMatrix::identity(n, n),
            b_u: DVector::zeros(n),
            b_w: DMatrix::zeros(n, m),
            step_seconds,
            zone_index: network.zone_node,
        });
    }

    // Continuous dynamics x' = A_c x + B_c [u; w].
    let mut a_c = DMatrix::<f64>::zeros(n, n);
    let mut b_c = DMatrix::<f64>::zeros(n, 1 + m);
    for (i, j, g) in &network.node_links {
        a_c[(*i, *i)] -= g;
        a_c[(*j, *j)] -= g;
        a_c[(*i, *j)] += g;
        a_c[(*j, *i)] += g;
    }
    for (i, b, g) in &network.boundary_links {
        a_c[(*i, *i)] -= g;
        b_c[(*i, 1 + b)] += g;
    }
    b_c[(network.zone_node, 0)] = 1.0;
    for i in 0..n {
        let inv_c = 1.0 / network.capacitances[i];
        for j in 0..n {
            a_c[(i, j)] *= inv_c;
        }
        for j in 0..(1 + m) {
            b_c[(i, j)] *= inv_c;
        }
    }

    // exp([[A_c, B_c], [0, 0]] dt) = [[A_d, B_d], [0, I]].
    let dim = n + 1 + m;
    let mut stacked = DMatrix::<f64>::zeros(dim, dim);
    stacked.view_mut((0, 0), (n, n)).copy_from(&(a_c * step_seconds));
    stacked
        .view_mut((0, n), (n, 1 + m))
        .copy_from(&(b_c * step_seconds));
    let phi = stacked.exp();

    Ok(StateSpaceModel {
        a: phi.view((0, 0), (n, n)).into_owned(),
        b_u: phi.view((0, n), (n, 1)).column(0).into_owned(),
        b_w: phi.view((0, n + 1), (n, m)).into_owned(),
        step_seconds,
        zone_index: network.zone_node,
    })
}

impl StateSpaceModel {
    pub fn from_matrices(
        a: DMatrix<f64>,
        b_u: DVector<f64>,
        b_w: DMatrix<f64>,
        step_seconds: f64,
        zone_index: usize,
    ) -> Result<Self, ThermalError> {
        let n = a.nrows();
        if a.ncols() != n || b_u.len() != n || b_w.nrows() != n {
            return Err(ThermalError::DimensionMismatch(format!(
                "A is {}x{}, B_u has {} rows, B_w has {} rows",
                n,
                a.ncols(),
                b_u.len(),
                b_w.nrows()
            )));
        }
        if zone_index >= n {
            return Err(ThermalError::DimensionMismatch(format!(
                "zone index {zone_index} out of range for {n} states"
            )));
        }
        Ok(Self {
            a,
            b_u,
            b_w,
            step_seconds,
            zone_index,
        })
    }

    pub fn state_count(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_count(&self) -> usize {
        self.b_w.ncols()
    }

    pub fn step_seconds(&self) -> f64 {
        self.step_seconds
    }

    pub fn zone_index(&self) -> usize {
        self.zone_index
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b_u(&self) -> &DVector<f64> {
        &self.b_u
    }

    pub fn b_w(&self) -> &DMatrix<f64> {
        &self.b_w
    }

    pub fn zone_temp(&self, x: &DVector<f64>) -> f64 {
        x[self.zone_index]
    }

    /// One simulation step: `A x + B_u u + B_w w`.
    pub fn simulate_step(
        &self,
        x: &DVector<f64>,
        u: f64,
        w: &DVector<f64>,
    ) -> Result<DVector<f64>, ThermalError> {
        if x.len() != self.state_count() {
            return Err(ThermalError::DimensionMismatch(format!(
                "state has {} entries, model expects {}",
                x.len(),
                self.state_count()
            )));
        }
        if w.len() != self.input_count() {
            return Err(ThermalError::DimensionMismatch(format!(
                "weather input has {} entries, model expects {}",
                w.len(),
                self.input_count()
            )));
        }
        Ok(&self.a * x + &self.b_u * u + &self.b_w * w)
    }

    /// Largest eigenvalue magnitude of the state transition matrix.
    pub fn spectral_radius(&self) -> f64 {
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|e| e.norm())
            .fold(0.0, f64::max)
    }

    /// Time constant implied by the dominant eigenvalue, in seconds.
    pub fn dominant_time_constant(&self) -> f64 {
        let rho = self.spectral_radius();
        if rho >= 1.0 || rho <= 0.0 {
            return f64::INFINITY;
        }
        -self.step_seconds / rho.ln()
    }

    /// Zone temperature trace for a boundary step: the state starts at
    /// `initial_c` everywhere, all boundaries jump to `boundary_c`, and the
    /// heater stays off. The trace includes the initial sample.
    pub fn step_response(&self, initial_c: f64, boundary_c: f64, n_steps: usize) -> Vec<f64> {
        let mut x = DVector::from_element(self.state_count(), initial_c);
        let w = DVector::from_element(self.input_count(), boundary_c);
        let mut trace = Vec::with_capacity(n_steps + 1);
        trace.push(self.zone_temp(&x));
        for _ in 0..n_steps {
            x = &self.a * &x + &self.b_w * &w;
            trace.push(self.zone_temp(&x));
        }
        trace
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ThermalError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.to_writer(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// Text format: header `n m step_seconds zone_index`, then A (n rows of
    /// n values), B_u (n rows of 1 value), B_w (n rows of m values).
    pub fn to_writer(&self, out: &mut impl Write) -> Result<(), ThermalError> {
        let n = self.state_count();
        let m = self.input_count();
        writeln!(
            out,
            "{} {} {:.16e} {}",
            n, m, self.step_seconds, self.zone_index
        )?;
        let write_rows = |out: &mut dyn Write, mat: &DMatrix<f64>| -> std::io::Result<()> {
            for r in 0..mat.nrows() {
                let row: Vec<String> = (0..mat.ncols())
                    .map(|c| format!("{:.16e}", mat[(r, c)]))
                    .collect();
                writeln!(out, "{}", row.join(" "))?;
            }
            Ok(())
        };
        write_rows(out, &self.a)?;
        let b_u = DMatrix::from_column_slice(n, 1, self.b_u.as_slice());
        write_rows(out, &b_u)?;
        write_rows(out, &self.b_w)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ThermalError> {
        Self::from_reader(&mut BufReader::new(File::open(path)?))
    }

    pub fn from_reader(input: &mut impl Read) -> Result<Self, ThermalError> {
        let reader = BufReader::new(input);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut header: Option<(usize, usize, f64, usize)> = None;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if header.is_none() {
                let toks: Vec<&str> = trimmed.split_whitespace().collect();
                if toks.len() != 4 {
                    return Err(ThermalError::Format {
                        line: idx + 1,
                        message: "header must be `n m step_seconds zone_index`".to_string(),
                    });
                }
                let bad = |message: String| ThermalError::Format {
                    line: idx + 1,
                    message,
                };
                let n: usize = toks[0].parse().map_err(|_| bad("bad n".to_string()))?;
                let m: usize = toks[1].parse().map_err(|_| bad("bad m".to_string()))?;
                let dt: f64 = toks[2]
                    .parse()
                    .map_err(|_| bad("bad step_seconds".to_string()))?;
                let zi: usize = toks[3]
                    .parse()
                    .map_err(|_| bad("bad zone_index".to_string()))?;
                if n == 0 || zi >= n || !dt.is_finite() || dt < 0.0 {
                    return Err(bad("header values out of range".to_string()));
                }
                header = Some((n, m, dt, zi));
                continue;
            }
            let mut row = Vec::new();
            for tok in trimmed.split_whitespace() {
                row.push(tok.parse::<f64>().map_err(|_| ThermalError::Format {
                    line: idx + 1,
                    message: format!("bad matrix value {tok:?}"),
                })?);
            }
            rows.push(row);
        }
        let (n, m, dt, zi) = header.ok_or(ThermalError::Format {
            line: 1,
            message: "empty model file".to_string(),
        })?;
        if rows.len() != 3 * n {
            return Err(ThermalError::DimensionMismatch(format!(
                "expected {} matrix rows, found {}",
                3 * n,
                rows.len()
            )));
        }
        let expect_width = |rows: &[Vec<f64>], offset: usize, width: usize| {
            rows.iter().skip(offset).take(n).enumerate().try_for_each(
                |(i, row)| -> Result<(), ThermalError> {
                    if row.len() != width {
                        return Err(ThermalError::DimensionMismatch(format!(
                            "matrix row {} has {} values, expected {}",
                            offset + i + 1,
                            row.len(),
                            width
                        )));
                    }
                    Ok(())
                },
            )
        };
        expect_width(&rows, 0, n)?;
        expect_width(&rows, n, 1)?;
        expect_width(&rows, 2 * n, m)?;
        let a = DMatrix::from_fn(n, n, |r, c| rows[r][c]);
        let b_u = DVector::from_fn(n, |r, _| rows[n + r][0]);
        let b_w = DMatrix::from_fn(n, m, |r, c| rows[2 * n + r][c]);
        Self::from_matrices(a, b_u, b_w, dt, zi)
    }
}

/// Thermal model augmented with the constant setpoint and a weather
/// forecast shift register, for the controller's rollout
/// `xt[k+1] = A~ xt[k] + B~ u[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedModel {
    a_tilde: DMatrix<f64>,
    b_tilde: DVector<f64>,
    state_count: usize,
    input_count: usize,
    horizon: usize,
    zone_index: usize,
    setpoint_index: usize,
    forecast_start: usize,
    tau: f64,
    forecast: Vec<DVector<f64>>,
}

/// Builds the augmented model for one control step. `forecast` holds the
/// boundary temperatures for the next `N` steps (element 0 is the current
/// step); the shift register replays them during the rollout and holds the
/// last row beyond the horizon. Rebuild with a fresh forecast before each
/// solve.
pub fn augment(
    model: &StateSpaceModel,
    tau: f64,
    forecast: &[DVector<f64>],
) -> Result<AugmentedModel, ThermalError> {
    let n = model.state_count();
    let m = model.input_count();
    let horizon = forecast.len();
    if horizon == 0 {
        return Err(ThermalError::DimensionMismatch(
            "forecast must cover at least one step".to_string(),
        ));
    }
    for (j, row) in forecast.iter().enumerate() {
        if row.len() != m {
            return Err(ThermalError::DimensionMismatch(format!(
                "forecast row {} has {} entries, model expects {}",
                j,
                row.len(),
                m
            )));
        }
    }
    let setpoint_index = n;
    let forecast_start = n + 1;
    let dim = n + 1 + horizon * m;
    let mut a_tilde = DMatrix::<f64>::zeros(dim, dim);
    a_tilde.view_mut((0, 0), (n, n)).copy_from(model.a());
    // Zone dynamics read the head of the register as this step's weather.
    a_tilde
        .view_mut((0, forecast_start), (n, m))
        .copy_from(model.b_w());
    // The setpoint holds.
    a_tilde[(setpoint_index, setpoint_index)] = 1.0;
    // The register shifts one row per step and holds its last row.
    for j in 0..horizon {
        let dst = forecast_start + j * m;
        let src = forecast_start + (j + 1).min(horizon - 1) * m;
        for r in 0..m {
            a_tilde[(dst + r, src + r)] = 1.0;
        }
    }
    let mut b_tilde = DVector::<f64>::zeros(dim);
    b_tilde.rows_mut(0, n).copy_from(model.b_u());

    Ok(AugmentedModel {
        a_tilde,
        b_tilde,
        state_count: n,
        input_count: m,
        horizon,
        zone_index: model.zone_index(),
        setpoint_index,
        forecast_start,
        tau,
        forecast: forecast.to_vec(),
    })
}

impl AugmentedModel {
    pub fn a_tilde(&self) -> &DMatrix<f64> {
        &self.a_tilde
    }

    pub fn b_tilde(&self) -> &DVector<f64> {
        &self.b_tilde
    }

    pub fn dim(&self) -> usize {
        self.a_tilde.nrows()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn zone_index(&self) -> usize {
        self.zone_index
    }

    pub fn setpoint_index(&self) -> usize {
        self.setpoint_index
    }

    pub fn forecast_register_indices(&self) -> std::ops::Range<usize> {
        self.forecast_start..self.dim()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Stacks the thermal state, the setpoint, and the forecast registers
    /// into the augmented initial state.
    pub fn initial_state(&self, x: &DVector<f64>) -> Result<DVector<f64>, ThermalError> {
        if x.len() != self.state_count {
            return Err(ThermalError::DimensionMismatch(format!(
                "state has {} entries, model expects {}",
                x.len(),
                self.state_count
            )));
        }
        let mut xt = DVector::zeros(self.dim());
        xt.rows_mut(0, self.state_count).copy_from(x);
        xt[self.setpoint_index] = self.tau;
        for (j, row) in self.forecast.iter().enumerate() {
            xt.rows_mut(self.forecast_start + j * self.input_count, self.input_count)
                .copy_from(row);
        }
        Ok(xt)
    }

    /// One rollout step under the augmented dynamics.
    pub fn rollout_step(&self, xt: &DVector<f64>, u: f64) -> DVector<f64> {
        &self.a_tilde * xt + &self.b_tilde * u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_network() -> RcNetwork {
        RcNetwork::new(
            vec![1.0e6],
            vec![],
            vec![(0, 0, 100.0)],
            vec!["outdoor".to_string()],
            0,
        )
        .unwrap()
    }

    #[test]
    fn scalar_discretization_matches_closed_form() {
        let model = discretize(&scalar_network(), 3600.0).unwrap();
        let a = model.a()[(0, 0)];
        assert!((a - (-0.36f64).exp()).abs() < 1e-12);
        assert!((model.b_w()[(0, 0)] - (1.0 - a)).abs() < 1e-12);
        // One step from 10 C toward a 20 C boundary.
        let x = DVector::from_vec(vec![10.0]);
        let w = DVector::from_vec(vec![20.0]);
        let next = model.simulate_step(&x, 0.0, &w).unwrap();
        assert!((next[0] - 13.023).abs() < 1e-3);
    }

    #[test]
    fn zero_step_is_identity() {
        let model = discretize(&scalar_network(), 0.0).unwrap();
        assert_eq!(model.a()[(0, 0)], 1.0);
        assert_eq!(model.b_u()[0], 0.0);
        assert_eq!(model.b_w()[(0, 0)], 0.0);
    }

    #[test]
    fn builder_counts_nodes() {
        let single = SingleZoneParams {
            width_m: 5.0,
            depth_m: 5.0,
            height_m: 3.0,
            wall_layers: vec![Layer::new(0.2, 0.5, 1400.0, 1000.0)],
            roof_layers: vec![Layer::new(0.2, 0.5, 1400.0, 1000.0)],
            floor_layers: vec![Layer::new(0.2, 0.5, 1400.0, 1000.0)],
            h_in: 3.0,
            h_out: 17.0,
            infiltration_ach: 0.0,
        };
        // 1 zone node + 6 single-node surface chains.
        let network = build_single_zone(&single).unwrap();
        assert_eq!(network.node_count(), 7);
        assert_eq!(network.boundary_count(), 2);

        let double = SingleZoneParams {
            wall_layers: vec![
                Layer::new(0.1, 0.5, 1400.0, 1000.0),
                Layer::new(0.05, 0.04, 30.0, 1200.0),
            ],
            ..single
        };
        // Walls contribute two nodes each: 1 + 4*2 + 1 + 1.
        assert_eq!(build_single_zone(&double).unwrap().node_count(), 11);
    }

    #[test]
    fn zero_thickness_is_invalid_geometry() {
        let params = SingleZoneParams {
            wall_layers: vec![Layer::new(0.0, 0.5, 1400.0, 1000.0)],
            ..SingleZoneParams::default()
        };
        assert!(matches!(
            build_single_zone(&params),
            Err(ThermalError::InvalidGeometry(_))
        ));
    }

    #[test]
    fn disconnected_network_is_rejected() {
        let result = RcNetwork::new(
            vec![1.0e5, 1.0e5],
            vec![],
            vec![(0, 0, 10.0)],
            vec!["outdoor".to_string()],
            0,
        );
        assert!(matches!(result, Err(ThermalError::InvalidNetwork(_))));
    }

    #[test]
    fn demo_building_equilibrium_and_stability() {
        let network = build_single_zone(&SingleZoneParams::default()).unwrap();
        let model = discretize(&network, 3600.0).unwrap();
        let n = model.state_count();
        let x = DVector::from_element(n, 20.0);
        let w = DVector::from_element(2, 20.0);
        let next = model.simulate_step(&x, 0.0, &w).unwrap();
        for i in 0..n {
            assert!((next[i] - 20.0).abs() < 1e-9, "node {i}: {}", next[i]);
        }
        let rho = model.spectral_radius();
        assert!(rho < 1.0, "spectral radius {rho}");
    }

    #[test]
    fn discretization_semigroup() {
        let network = build_single_zone(&SingleZoneParams::default()).unwrap();
        let full = discretize(&network, 3600.0).unwrap();
        let half = discretize(&network, 1800.0).unwrap();
        let squared = half.a() * half.a();
        let diff = (full.a() - squared).abs().max();
        assert!(diff < 1e-9, "max entry difference {diff}");
    }

    #[test]
    fn superposition_in_the_input() {
        let network = build_single_zone(&SingleZoneParams::default()).unwrap();
        let model = discretize(&network, 3600.0).unwrap();
        let n = model.state_count();
        let x = DVector::from_fn(n, |i, _| 12.0 + i as f64);
        let w = DVector::from_vec(vec![-3.0, 8.0]);
        let zero_w = DVector::zeros(2);
        let base = model.simulate_step(&x, 1000.0, &w).unwrap();
        let bump = model
            .simulate_step(&DVector::zeros(n), 500.0, &zero_w)
            .unwrap();
        let combined = model.simulate_step(&x, 1500.0, &w).unwrap();
        let diff = (&base + &bump - combined).abs().max();
        assert!(diff < 1e-9);
    }

    #[test]
    fn step_response_is_monotone_and_converges() {
        let network = build_single_zone(&SingleZoneParams::default()).unwrap();
        let model = discretize(&network, 3600.0).unwrap();
        let horizon = (10.0 * model.dominant_time_constant() / 3600.0).ceil() as usize;
        let trace = model.step_response(10.0, 20.0, horizon);
        for pair in trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12);
        }
        let last = *trace.last().unwrap();
        assert!((last - 20.0).abs() < 0.1, "final zone temp {last}");
        // A zero step goes nowhere.
        let flat = model.step_response(15.0, 15.0, 24);
        for v in flat {
            assert!((v - 15.0).abs() < 1e-9);
        }
    }

    #[test]
    fn model_file_round_trip() {
        let network = build_single_zone(&SingleZoneParams::default()).unwrap();
        let model = discretize(&network, 3600.0).unwrap();
        let mut buf = Vec::new();
        model.to_writer(&mut buf).unwrap();
        let loaded = StateSpaceModel::from_reader(&mut buf.as_slice()).unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn model_file_errors() {
        assert!(matches!(
            StateSpaceModel::from_reader(&mut "bad header".as_bytes()),
            Err(ThermalError::Format { .. })
        ));
        let network = scalar_network();
        let model = discretize(&network, 3600.0).unwrap();
        let mut buf = Vec::new();
        model.to_writer(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: Vec<&str> = text.lines().take(2).collect();
        assert!(matches!(
            StateSpaceModel::from_reader(&mut truncated.join("\n").as_bytes()),
            Err(ThermalError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn augmented_rollout_matches_plain_rollout() {
        let network = build_single_zone(&SingleZoneParams::default()).unwrap();
        let model = discretize(&network, 3600.0).unwrap();
        let n = model.state_count();
        let horizon = 6;
        let w0 = DVector::from_vec(vec![-5.0, 8.0]);
        let forecast = vec![w0.clone(); horizon];
        let aug = augment(&model, 23.0, &forecast).unwrap();
        let x0 = DVector::from_fn(n, |i, _| 10.0 + 0.1 * i as f64);
        let mut xt = aug.initial_state(&x0).unwrap();
        let mut x = x0;
        let inputs = [0.0, 4000.0, 8000.0, 1000.0, 0.0, 2000.0];
        for u in inputs {
            xt = aug.rollout_step(&xt, u);
            x = model.simulate_step(&x, u, &w0).unwrap();
            for i in 0..n {
                assert!((xt[i] - x[i]).abs() < 1e-9);
            }
            // The setpoint register never moves.
            assert!((xt[aug.setpoint_index()] - 23.0).abs() < 1e-12);
        }
    }

    #[test]
    fn augmented_register_shifts_changing_forecast() {
        let network = scalar_network();
        let model = discretize(&network, 3600.0).unwrap();
        let forecast: Vec<DVector<f64>> =
            (0..4).map(|j| DVector::from_vec(vec![j as f64])).collect();
        let aug = augment(&model, 21.0, &forecast).unwrap();
        let mut xt = aug.initial_state(&DVector::from_vec(vec![0.0])).unwrap();
        let mut x = DVector::from_vec(vec![0.0]);
        for j in 0..6 {
            xt = aug.rollout_step(&xt, 0.0);
            // Register holds the last row beyond the horizon.
            let w = DVector::from_vec(vec![forecast[j.min(3)][0]]);
            x = model.simulate_step(&x, 0.0, &w).unwrap();
            assert!((xt[0] - x[0]).abs() < 1e-12);
        }
        // A one-step horizon embeds a single register block.
        let single = augment(&model, 21.0, &forecast[..1]).unwrap();
        assert_eq!(single.dim(), 1 + 1 + 1);
    }

    #[test]
    fn random_networks_have_unit_dc_gain() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            // Random chain with random extra links and 1-2 boundary taps.
            let n = rng.gen_range(2..9);
            let caps: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0e4..5.0e7)).collect();
            let mut links: Vec<(usize, usize, f64)> = (1..n)
                .map(|i| (i - 1, i, rng.gen_range(1.0..500.0)))
                .collect();
            for _ in 0..rng.gen_range(0..3) {
                let a = rng.gen_range(0..n);
                let b = rng.gen_range(0..n);
                if a != b {
                    links.push((a, b, rng.gen_range(1.0..200.0)));
                }
            }
            let mut taps = vec![(rng.gen_range(0..n), 0, rng.gen_range(1.0..300.0))];
            if rng.gen_bool(0.5) {
                taps.push((rng.gen_range(0..n), 1, rng.gen_range(1.0..300.0)));
            }
            let network = RcNetwork::new(
                caps,
                links,
                taps,
                vec!["outdoor".to_string(), "ground".to_string()],
                0,
            )
            .unwrap();
            let model = discretize(&network, 3600.0).unwrap();
            assert!(model.spectral_radius() < 1.0, "trial {trial}");
            let t = 17.0;
            let x = DVector::from_element(n, t);
            let w = DVector::from_element(network.boundary_count(), t);
            let next = model.simulate_step(&x, 0.0, &w).unwrap();
            for i in 0..n {
                assert!((next[i] - t).abs() < 1e-9, "trial {trial} node {i}");
            }
        }
    }
}
