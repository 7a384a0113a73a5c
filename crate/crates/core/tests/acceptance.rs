//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them). Criteria with a
//! stated runtime budget assert it.

use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use occumpc::control::{self, EnergyGain, MpcConfig};
use occumpc::occupancy::{OccupancyModel, ProbabilityGrid};
use occumpc::sim::synth::{
    synth_occupancy, synth_weather, write_pulse_csv, write_weather_csv, OccupancyPattern,
    WeatherPattern,
};
use occumpc::sim::{self, report, ControllerKind, ScenarioConfig};
use occumpc::thermal::{self, RcNetwork, SingleZoneParams};

const GRID: usize = 201;
const MONDAY: i64 = 1_171_238_400; // 2007-02-12T00:00:00Z

fn verdict(criterion: &str, ok: bool) {
    println!(
        "criterion {criterion}: {}",
        if ok { "PASS" } else { "FAIL" }
    );
}

/// Writes synthetic pulse and weather files and returns a scenario over
/// them. `days` covers pre-training plus metering.
fn synthetic_scenario(
    dir: &std::path::Path,
    seed: u64,
    pattern: &OccupancyPattern,
    pretrain_days: u32,
    sim_days: u32,
) -> ScenarioConfig {
    let days = pretrain_days + sim_days;
    let pulses = synth_occupancy(seed, MONDAY, days, pattern);
    let pulse_file = dir.join("pulses.csv");
    write_pulse_csv(&pulses, &pulse_file).unwrap();
    let weather = synth_weather(seed, MONDAY, days as usize * 24, &WeatherPattern::default());
    let weather_file = dir.join("weather.csv");
    write_weather_csv(&weather, &weather_file).unwrap();
    ScenarioConfig {
        pulse_file,
        weather_file,
        pretrain_days,
        sim_days,
        seed,
        ..ScenarioConfig::default()
    }
}

/// Criterion 1: boolean training against the conjugate Beta oracle for
/// every count pair with up to 20 observations.
#[test]
fn criterion_1_conjugate_oracle() {
    let started = Instant::now();
    let mut worst = 0.0f64;
    for total in 0..=20usize {
        for ones in 0..=total {
            let zeros = total - ones;
            let mut model = OccupancyModel::new(24, GRID, 1.0).unwrap();
            // Interleave outcomes; conjugacy makes the order irrelevant.
            let (mut n1, mut n0) = (0, 0);
            while n1 < ones || n0 < zeros {
                if n1 < ones {
                    model.train_step(5, 1.0, 1.0).unwrap();
                    n1 += 1;
                }
                if n0 < zeros {
                    model.train_step(5, 1.0, 0.0).unwrap();
                    n0 += 1;
                }
            }
            let oracle = (ones + 1) as f64 / (total + 2) as f64;
            let got = model.occupied_density(5).expected_bias();
            worst = worst.max((got - oracle).abs());
        }
    }
    let elapsed = started.elapsed();
    let ok = worst < 1e-4 && elapsed.as_secs_f64() < 1.0;
    verdict("1 (conjugate oracle suite)", ok);
    assert!(
        ok,
        "worst error {worst:.2e}, elapsed {:.3} s",
        elapsed.as_secs_f64()
    );
}

/// Criterion 2: ten thousand random fractional training steps leave every
/// density normalized to 1e-9.
#[test]
fn criterion_2_normalization_endurance() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut model = OccupancyModel::new(24, GRID, 0.974).unwrap();
    for _ in 0..10_000 {
        let slot = rng.gen_range(0..24);
        let gamma_now: f64 = rng.gen();
        let gamma_next: f64 = rng.gen();
        model.train_step(slot, gamma_now, gamma_next).unwrap();
    }
    let mut worst = 0.0f64;
    for k in 0..24 {
        worst = worst.max((model.occupied_density(k).integral() - 1.0).abs());
        worst = worst.max((model.vacant_density(k).integral() - 1.0).abs());
    }
    let elapsed = started.elapsed();
    let ok = worst < 1e-9 && elapsed.as_secs_f64() < 10.0;
    verdict("2 (normalization endurance)", ok);
    assert!(
        ok,
        "worst drift {worst:.2e}, elapsed {:.3} s",
        elapsed.as_secs_f64()
    );
}

/// Criterion 3: transition matrix structure and one/two-step projections.
#[test]
fn criterion_3_transition_matrix_properties() {
    let mut model = OccupancyModel::new(24, GRID, 0.95).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..400 {
        let slot = rng.gen_range(0..24);
        model
            .train_step(slot, rng.gen(), rng.gen())
            .unwrap();
    }
    let tm = model.transition_matrix();
    let mut ok = true;
    for (r, sum) in tm.row_sums().iter().enumerate() {
        ok &= (sum - 1.0).abs() < 1e-9;
        let nonzeros = tm.entries().row(r).iter().filter(|v| **v != 0.0).count();
        ok &= nonzeros == 2;
    }
    for slot in 0..24 {
        ok &= model.predict(slot, 1.0, 1) == model.occupied_density(slot).expected_bias();
        ok &= model.predict(slot, 0.0, 1) == model.vacant_density(slot).expected_bias();
        // Two steps, brute-forced over the four transition paths.
        let gamma = 0.6;
        let p0 = model.occupied_density(slot).expected_bias();
        let q0 = model.vacant_density(slot).expected_bias();
        let next = (slot + 1) % 24;
        let p1 = model.occupied_density(next).expected_bias();
        let q1 = model.vacant_density(next).expected_bias();
        let by_paths = gamma * p0 * p1
            + gamma * (1.0 - p0) * q1
            + (1.0 - gamma) * q0 * p1
            + (1.0 - gamma) * (1.0 - q0) * q1;
        ok &= (model.predict(slot, gamma, 2) - by_paths).abs() < 1e-9;
    }
    verdict("3 (transition matrix properties)", ok);
    assert!(ok);
}

/// Criterion 4: with heavy forgetting the density keeps shifting under
/// alternating training long after the no-forgetting posterior has frozen.
#[test]
fn criterion_4_forgetting_keeps_density_mobile() {
    let shift_at_50 = |lambda: f64| -> f64 {
        let mut grid = ProbabilityGrid::uniform(GRID).unwrap();
        let mut biases = Vec::new();
        for i in 0..52 {
            grid = grid.bayes_update(i % 2 == 0).unwrap();
            grid = grid.apply_forgetting(lambda).unwrap();
            biases.push(grid.expected_bias());
        }
        (biases[50] - biases[49]).abs()
    };
    let relaxed = shift_at_50(0.85);
    let strict = shift_at_50(1.0);
    let factor = relaxed / strict;
    let ok = factor >= 5.0;
    verdict("4 (forgetting lateral mobility)", ok);
    assert!(ok, "shift {relaxed:.5} vs {strict:.5}, factor {factor:.2}");
}

/// Criterion 5: RMS-vs-lambda has an interior minimum on a drifting
/// schedule.
#[test]
fn criterion_5_lambda_sweep_interior_minimum() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let pattern = OccupancyPattern {
        jitter_minutes: 30.0,
        drift_day: Some(45),
        drift_hours: 2.0,
        ..OccupancyPattern::default()
    };
    let config = synthetic_scenario(dir.path(), 9, &pattern, 0, 90);
    let mut lambdas = vec![0.5];
    lambdas.extend((90..=100).map(|i| i as f64 / 100.0));
    let rows = sim::lambda_sweep(&config, &lambdas).unwrap();
    report::emit_sweep(&rows, dir.path()).unwrap();
    let rms = |lambda: f64| -> f64 {
        rows.iter()
            .find(|(l, _)| (*l - lambda).abs() < 1e-9)
            .unwrap()
            .1
    };
    let interior = (90..=99)
        .map(|i| rms(i as f64 / 100.0))
        .fold(f64::INFINITY, f64::min);
    let elapsed = started.elapsed();
    let ok = interior < rms(1.0) && interior < rms(0.5) && elapsed.as_secs_f64() < 60.0;
    verdict("5 (lambda sweep shape)", ok);
    assert!(
        ok,
        "interior {interior:.4}, rms(1.0) {:.4}, rms(0.5) {:.4}, elapsed {:.1} s",
        rms(1.0),
        rms(0.5),
        elapsed.as_secs_f64()
    );
}

/// Criterion 6: thermal invariants of the demo building.
#[test]
fn criterion_6_thermal_invariants() {
    let network = thermal::build_single_zone(&SingleZoneParams::default()).unwrap();
    let model = thermal::discretize(&network, 3600.0).unwrap();
    let mut ok = true;

    // Unit DC gain: uniform temperature is a fixed point.
    let n = model.state_count();
    let x = DVector::from_element(n, 20.0);
    let w = DVector::from_element(2, 20.0);
    let next = model.simulate_step(&x, 0.0, &w).unwrap();
    ok &= (0..n).all(|i| (next[i] - 20.0).abs() < 1e-9);

    ok &= model.spectral_radius() < 1.0;

    // Semigroup consistency of the exact discretization.
    let half = thermal::discretize(&network, 1800.0).unwrap();
    ok &= (model.a() - half.a() * half.a()).abs().max() < 1e-9;

    // Monotone step response converging to the stepped boundary.
    let hours = (10.0 * model.dominant_time_constant() / 3600.0).ceil() as usize;
    let trace = model.step_response(10.0, 20.0, hours);
    ok &= trace.windows(2).all(|p| p[1] >= p[0] - 1e-12);
    ok &= (trace.last().unwrap() - 20.0).abs() < 0.1;

    verdict("6 (thermal invariants)", ok);
    assert!(ok);
}

/// Criterion 7: the QP matches exhaustive grid search on a scalar plant
/// for horizons up to 3.
#[test]
fn criterion_7_mpc_grid_oracle() {
    let started = Instant::now();
    let network = RcNetwork::new(
        vec![1.0e6],
        vec![],
        vec![(0, 0, 100.0)],
        vec!["outdoor".to_string()],
        0,
    )
    .unwrap();
    let plant = thermal::discretize(&network, 3600.0).unwrap();
    // Scalar coefficients for the independent rollout.
    let a = plant.a()[(0, 0)];
    let b_u = plant.b_u()[0];
    let b_w = plant.b_w()[(0, 0)];
    let outdoor = -5.0;
    let tau = 23.0;
    let levels = 81usize;

    let mut ok = true;
    for horizon in 1..=3usize {
        let config = MpcConfig {
            horizon,
            beta: 1.0,
            energy_gain: EnergyGain::Constant(5.0e-4),
            u_max: 4000.0,
            ..MpcConfig::default()
        };
        let weights: Vec<f64> = (0..horizon).map(|j| 0.9 - 0.2 * j as f64).collect();
        let forecast = vec![DVector::from_vec(vec![outdoor]); horizon];
        let augmented = thermal::augment(&plant, tau, &forecast).unwrap();
        let x_tilde = augmented
            .initial_state(&DVector::from_vec(vec![15.0]))
            .unwrap();
        let decision = control::solve_weighted(&augmented, &x_tilde, &weights, &config).unwrap();

        let cell = config.u_max / (levels - 1) as f64;
        let mut best_cost = f64::INFINITY;
        let mut best = vec![0.0; horizon];
        let mut index = vec![0usize; horizon];
        loop {
            let mut x = 15.0;
            let mut cost = 0.0;
            for j in 0..horizon {
                let u = index[j] as f64 * cell;
                cost += weights[j] * (x - tau) * (x - tau) + 5.0e-4 * u;
                x = a * x + b_u * u + b_w * outdoor;
            }
            if cost < best_cost {
                best_cost = cost;
                for j in 0..horizon {
                    best[j] = index[j] as f64 * cell;
                }
            }
            let mut digit = 0;
            loop {
                index[digit] += 1;
                if index[digit] < levels {
                    break;
                }
                index[digit] = 0;
                digit += 1;
                if digit == horizon {
                    break;
                }
            }
            if digit == horizon {
                break;
            }
        }

        for (chosen, oracle) in decision.u_sequence.iter().zip(&best) {
            ok &= (chosen - oracle).abs() <= cell;
        }
        // Objective sandwich: the QP beats every grid point, and the grid
        // beats the QP solution rounded onto the grid, so the remaining
        // gap is exactly what one quantization cell costs.
        let rollout = |inputs: &[f64]| {
            let mut x = 15.0;
            let mut cost = 0.0;
            for (j, u) in inputs.iter().enumerate() {
                cost += weights[j] * (x - tau) * (x - tau) + 5.0e-4 * u;
                x = a * x + b_u * u + b_w * outdoor;
            }
            cost
        };
        let rounded: Vec<f64> = decision
            .u_sequence
            .iter()
            .map(|u| (u / cell).round() * cell)
            .collect();
        ok &= decision.predicted_cost <= best_cost + 1e-9;
        ok &= best_cost <= rollout(&rounded) + 1e-9;
    }
    let elapsed = started.elapsed();
    let ok = ok && elapsed.as_secs_f64() < 30.0;
    verdict("7 (mpc exhaustive-search oracle)", ok);
    assert!(ok, "elapsed {:.1} s", elapsed.as_secs_f64());
}

/// Criterion 8: zero occupancy expectations with a positive energy gain
/// give exactly zero input.
#[test]
fn criterion_8_zero_occupancy_means_zero_input() {
    let network = thermal::build_single_zone(&SingleZoneParams::default()).unwrap();
    let plant = thermal::discretize(&network, 3600.0).unwrap();
    let config = MpcConfig::default();
    let forecast = vec![DVector::from_vec(vec![-10.0, 8.0]); config.horizon];
    let augmented = thermal::augment(&plant, config.tau, &forecast).unwrap();
    let x = DVector::from_element(plant.state_count(), 5.0);
    let x_tilde = augmented.initial_state(&x).unwrap();
    let weights = vec![0.0; config.horizon];
    let decision = control::solve_weighted(&augmented, &x_tilde, &weights, &config).unwrap();
    let ok = decision.u_sequence.iter().all(|u| *u == 0.0) && decision.applied_u == 0.0;
    verdict("8 (zero-occupancy optimality)", ok);
    assert!(ok);
}

/// Criterion 9: the two-month three-controller comparison reproduces the
/// qualitative performance table: triggered uses least energy, scheduled
/// the most; scheduled has the lowest peak discomfort, triggered the
/// worst; the predictive controller saves at least 10% of the scheduled
/// energy while keeping peak discomfort at or below 60% of triggered's.
#[test]
fn criterion_9_controller_comparison_table() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let base = synthetic_scenario(dir.path(), 42, &OccupancyPattern::default(), 7, 60);

    let run = |kind: ControllerKind| {
        let config = ScenarioConfig {
            controller: kind,
            ..base.clone()
        };
        sim::run_simulation(&config).unwrap().1
    };
    let predictive = run(ControllerKind::Predictive);
    let triggered = run(ControllerKind::Triggered);
    let scheduled = run(ControllerKind::Scheduled);

    let energy_order = triggered.total_energy_kwh < predictive.total_energy_kwh
        && predictive.total_energy_kwh < scheduled.total_energy_kwh;
    let peak_order = scheduled.peak_discomfort < predictive.peak_discomfort
        && predictive.peak_discomfort < triggered.peak_discomfort;
    let savings = predictive.savings_percent(scheduled.total_energy_kwh);
    let peak_ratio = predictive.peak_discomfort / triggered.peak_discomfort;
    let elapsed = started.elapsed();
    let ok = energy_order
        && peak_order
        && savings >= 10.0
        && peak_ratio <= 0.6
        && elapsed.as_secs_f64() < 300.0;
    verdict("9 (controller comparison table)", ok);
    assert!(
        ok,
        "energy t/p/s = {:.0}/{:.0}/{:.0} kWh, peak s/p/t = {:.2}/{:.2}/{:.2}, \
         savings {savings:.1}%, peak ratio {peak_ratio:.2}, elapsed {:.0} s",
        triggered.total_energy_kwh,
        predictive.total_energy_kwh,
        scheduled.total_energy_kwh,
        scheduled.peak_discomfort,
        predictive.peak_discomfort,
        triggered.peak_discomfort,
        elapsed.as_secs_f64()
    );
}

/// Criterion 10: on consistently scheduled weekdays the trained predictive
/// controller heats before occupancy begins.
#[test]
fn criterion_10_preconditioning_before_onset() {
    let dir = tempfile::tempdir().unwrap();
    let pattern = OccupancyPattern {
        jitter_minutes: 0.0,
        ..OccupancyPattern::default()
    };
    let config = synthetic_scenario(dir.path(), 11, &pattern, 7, 21);
    let (trace, _) = sim::run_simulation(&config).unwrap();

    let mut onset_days = 0usize;
    let mut preconditioned = 0usize;
    for day in trace.records.chunks(24) {
        let onset = day
            .iter()
            .position(|r| r.gamma_observed >= 0.5)
            .unwrap_or(0);
        if onset == 0 {
            continue; // vacant day (weekend)
        }
        onset_days += 1;
        if day[onset - 1].heat_input > 0.0 {
            preconditioned += 1;
        }
    }
    let share = preconditioned as f64 / onset_days.max(1) as f64;
    let ok = onset_days >= 10 && share >= 0.8;
    verdict("10 (pre-conditioning before onset)", ok);
    assert!(ok, "{preconditioned}/{onset_days} days preconditioned");
}

/// Criterion 11: identical config and seed produce bit-identical report
/// files.
#[test]
fn criterion_11_bit_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let config = synthetic_scenario(dir.path(), 5, &OccupancyPattern::default(), 2, 12);

    let emit = |out: &std::path::Path| {
        let (trace, metrics) = sim::run_simulation(&config).unwrap();
        report::emit_reports(&trace, &metrics, out).unwrap();
    };
    let out_a = dir.path().join("run_a");
    let out_b = dir.path().join("run_b");
    emit(&out_a);
    emit(&out_b);

    let mut ok = true;
    for file in ["trace.csv", "metrics.txt", "histogram.csv", "occupancy.csv"] {
        let a = std::fs::read(out_a.join(file)).unwrap();
        let b = std::fs::read(out_b.join(file)).unwrap();
        ok &= a == b;
        ok &= !a.is_empty();
    }
    verdict("11 (bit-identical reruns)", ok);
    assert!(ok);
}
