//! Time-domain engine wiring circuit, controller, and plant.
//!
//! Every plant step of length `plant_dt` does, in order: a controller update on
//! control-cycle boundaries (from a sensor sample), modulation into the terminal
//! voltage, the circuit input edge, the quasi-static stack solve plus plate A
//! integration at the electrode voltage, and the circuit advance.

use std::fs;
use std::path::Path;

use crate::circuit::{envelope, Integrator, LeakageCircuit};
use crate::control::{modulate, PiController};
use crate::error::{Error, Result};
use crate::plant::{Plant, PlantState, Sensor};

use super::config::{DriveKind, ScenarioConfig, ScenarioKind, TargetWave};
use super::crank::crank_angle;
use super::metrics::{metrics, MetricsReport, SETTLING_BAND};
use super::sweep::{frequency_sweep, hysteresis_sweep, SweepTable};
use super::trace::{col, SimTrace};

/// Reference tracking RMSE of the bench at 0.05 Hz and 0.5 Hz, m.
pub const BENCH_RMSE_SLOW: f64 = 0.077e-3;
pub const BENCH_RMSE_FAST: f64 = 0.211e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub trace: SimTrace,
    pub report: MetricsReport,
    pub table: Option<SweepTable>,
}

/// Runs a scenario and writes its trace and report to the configured paths.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun> {
    let run = execute(config)?;
    if let Some(path) = &config.output.trace {
        write_file(path, run.trace.to_csv_string().as_bytes())?;
    }
    if let Some(path) = &config.output.report {
        let mut text = run.report.to_text();
        if let Some(table) = &run.table {
            text.push('\n');
            text.push_str(&table.to_text());
        }
        write_file(path, text.as_bytes())?;
    }
    Ok(run)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Runs a scenario without touching the file system.
pub fn execute(config: &ScenarioConfig) -> Result<ScenarioRun> {
    config.validate()?;
    match config.kind {
        ScenarioKind::FreqSweep => {
            let table = frequency_sweep(config, &config.sweep.frequencies, &config.sweep.loads)?;
            let mut report = MetricsReport::default();
            for row in &table.rows {
                report.push(
                    &format!("ptp_f{:e}_m{:e}", row.frequency, row.load),
                    row.peak_to_peak,
                );
            }
            Ok(ScenarioRun {
                trace: SimTrace::new(config.record_dt),
                report,
                table: Some(table),
            })
        }
        ScenarioKind::HysteresisSweep => {
            let sweep = hysteresis_sweep(config, config.sweep.v_max, config.sweep.steps)?;
            let report = MetricsReport {
                max_hysteresis_strain: Some(sweep.mhs),
                max_output_strain: Some(sweep.mos),
                extra: vec![("mhs_mos_ratio".to_owned(), sweep.ratio())],
                ..Default::default()
            };
            Ok(ScenarioRun {
                trace: sweep.trace,
                report,
                table: None,
            })
        }
        _ => {
            let trace = simulate(config)?;
            let report = report_for(config, &trace)?;
            Ok(ScenarioRun {
                trace,
                report,
                table: None,
            })
        }
    }
}

fn steps_of(span: f64, dt: f64) -> usize {
    (span / dt).round() as usize
}

/// Integrates the coupled system and records a trace.
pub fn simulate(config: &ScenarioConfig) -> Result<SimTrace> {
    let dt = config.plant_dt;
    let steps = steps_of(config.duration, dt);
    let record_every = steps_of(config.record_dt, dt).max(1);
    let cycle_every = steps_of(config.controller.cycle_dt, dt).max(1);

    if dt > 0.01 * config.circuit.time_constant() {
        return Err(Error::Configuration(format!(
            "plant_dt = {dt} s exceeds 1% of the leakage time constant {} s",
            config.circuit.time_constant()
        )));
    }
    let mut circuit = LeakageCircuit::new(config.circuit)?;
    let plant = Plant::new(config.plant, config.actuator, config.disturbance.clone())?;
    let mut sensor = Sensor::new(&config.plant)?;
    let closed_loop = config.kind.is_closed_loop();
    let mut controller = PiController::new(config.controller)?;

    let mut trace = SimTrace::new(dt * record_every as f64);
    trace.rows.reserve(steps / record_every + 1);
    let mut state = PlantState::default();
    let mut magnitude = if closed_loop { 0.0 } else { config.drive.magnitude };

    for i in 0..=steps {
        let t = i as f64 * dt;
        state.t = t;
        let target = config.target.value(t);
        if closed_loop && i % cycle_every == 0 {
            let measured = sensor.sample(&state);
            magnitude = controller.step(target, measured).magnitude;
        }
        let u_i = match config.drive.wave {
            DriveKind::Dc => magnitude,
            DriveKind::AcSquare => modulate(magnitude, t, config.drive.frequency)?,
        };
        circuit.set_input(u_i);
        let u_o = circuit.output();
        let outcome = plant.step(&state, u_o, dt).map_err(|e| match e {
            Error::Numerical(msg) => {
                Error::Numerical(format!("{msg}; last recorded row {:?}", trace.rows.last()))
            }
            other => other,
        })?;
        if i % record_every == 0 {
            let x_a = if config.plant.rigid {
                outcome.state.x_a
            } else {
                state.x_a
            };
            trace.rows.push([
                t,
                u_i,
                u_o,
                magnitude,
                outcome.state.x_b,
                x_a,
                target,
                outcome.stack_force,
                outcome.disturbance,
            ]);
        }
        state = outcome.state;
        circuit.advance(dt, Integrator::Exponential);
    }
    if !trace.all_finite() {
        return Err(Error::Numerical("trace contains non-finite values".into()));
    }
    Ok(trace)
}

fn peak_to_peak(values: &[f64]) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn report_for(config: &ScenarioConfig, trace: &SimTrace) -> Result<MetricsReport> {
    let start = trace.index_at(config.window_start);
    let window = start..trace.len();
    let x_a = trace.column(col::X_A);
    let x_b = trace.column(col::X_B);
    let target = trace.column(col::TARGET);
    let dt = trace.dt_record;
    let mut report = metrics(&x_a, &target, dt, window.clone())?;

    match config.kind {
        ScenarioKind::DcDecay => {
            let first = x_b[0];
            let last = x_b[x_b.len() - 1];
            report.push("x_b_initial", first);
            report.push("x_b_final", last);
            report.push(
                "drop_fraction",
                if first > 0.0 { 1.0 - last / first } else { 0.0 },
            );
        }
        ScenarioKind::AcHold | ScenarioKind::Isolation => {
            let env = envelope(&config.circuit, config.drive.frequency)?;
            let u_o: Vec<f64> = trace.column(col::U_O)[window.clone()]
                .iter()
                .map(|v| v.abs())
                .collect();
            let ripple_b = peak_to_peak(&x_b[window.clone()]);
            let ripple_a = peak_to_peak(&x_a[window.clone()]);
            report.push("envelope_k1", env.k1);
            report.push("envelope_k2", env.k2);
            if config.drive.magnitude > 0.0 {
                let max = u_o.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let min = u_o.iter().cloned().fold(f64::INFINITY, f64::min);
                report.push("u_o_max_ratio", max / config.drive.magnitude);
                report.push("u_o_min_ratio", min / config.drive.magnitude);
            }
            report.push("x_b_mean", mean(&x_b[window.clone()]));
            report.push("x_b_ripple", ripple_b);
            report.push("x_a_ripple", ripple_a);
            report.push(
                "ripple_ratio",
                if ripple_b > 0.0 { ripple_a / ripple_b } else { 0.0 },
            );
        }
        ScenarioKind::Track => track_metrics(config, trace, &x_a, &target, &mut report),
        ScenarioKind::Impact => impact_metrics(config, trace, &x_a, &target, &mut report),
        ScenarioKind::Rotary => {
            let angle = |h: f64| crank_angle(&config.crank, h.clamp(0.0, config.crank.max_displacement()));
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &h in &x_a[window.clone()] {
                let a = angle(h)?;
                lo = lo.min(a);
                hi = hi.max(a);
            }
            let (t_lo, t_hi) = target
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                    (l.min(v), h.max(v))
                });
            report.push("angle_min_deg", lo.to_degrees());
            report.push("angle_max_deg", hi.to_degrees());
            report.push("angle_span_deg", (hi - lo).to_degrees());
            report.push("setpoint_span_deg", (angle(t_hi)? - angle(t_lo)?).to_degrees());
        }
        ScenarioKind::Biopsy => {
            let resistance = trace.column(col::DISTURBANCE);
            let peak = resistance.iter().fold(0.0f64, |m, &f| m.max(-f));
            report.push("max_resistance", peak);
            // Error over the last second of each setpoint hold.
            for (k, &(start, value)) in config.target.steps.iter().enumerate() {
                let end = config.target.steps.get(k + 1).map_or(config.duration, |s| s.0);
                let hold = trace.index_at(start.max(end - 1.0))..trace.index_at(end).min(x_a.len());
                if start < config.window_start || hold.is_empty() {
                    continue;
                }
                let mean_sq =
                    x_a[hold.clone()].iter().map(|x| (x - value).powi(2)).sum::<f64>() / hold.len() as f64;
                report.push(&format!("setpoint_{k}_rmse"), mean_sq.sqrt());
            }
        }
        ScenarioKind::FreqSweep | ScenarioKind::HysteresisSweep => unreachable!("handled by sweeps"),
    }
    Ok(report)
}

/// Per-edge statistics of square-wave tracking.
fn track_metrics(
    config: &ScenarioConfig,
    trace: &SimTrace,
    x_a: &[f64],
    target: &[f64],
    report: &mut MetricsReport,
) {
    let spec = &config.target;
    let step = 2.0 * spec.amplitude;
    if spec.wave == TargetWave::Square && step > 0.0 {
        let half = 0.5 / spec.frequency;
        let mut rising_overshoot = 0.0f64;
        let mut falling_overshoot = 0.0f64;
        let mut steady_error = 0.0f64;
        let mut plateau_reached = true;
        let mut edge = 0usize;
        loop {
            let t0 = edge as f64 * half;
            let t1 = t0 + half;
            if t1 > config.duration + 1e-9 {
                break;
            }
            let range = trace.index_at(t0)..trace.index_at(t1).min(x_a.len());
            edge += 1;
            if t0 < config.window_start || range.is_empty() {
                continue;
            }
            let setpoint = target[range.start];
            let rising = edge % 2 == 1;
            let excess = x_a[range.clone()]
                .iter()
                .map(|x| if rising { x - setpoint } else { setpoint - x })
                .fold(0.0f64, f64::max);
            // The first edge starts from rest, not from the opposite plateau.
            if edge > 1 {
                if rising {
                    rising_overshoot = rising_overshoot.max(excess);
                } else {
                    falling_overshoot = falling_overshoot.max(excess);
                }
            }
            let tail_start = range.end - ((range.len() / 10).max(1));
            let tail = &x_a[tail_start..range.end];
            let err = (mean(tail) - setpoint).abs();
            steady_error = steady_error.max(err);
            if err > SETTLING_BAND * step {
                plateau_reached = false;
            }
        }
        report.push("rising_overshoot_pct", 100.0 * rising_overshoot / step);
        report.push("falling_overshoot_pct", 100.0 * falling_overshoot / step);
        report.push("steady_state_error_pct", 100.0 * steady_error / step);
        report.push("plateaus_reached", if plateau_reached { 1.0 } else { 0.0 });
    }
    let start = trace.index_at(config.window_start);
    let target_ptp = peak_to_peak(&target[start..]);
    if target_ptp > 0.0 {
        report.push("amplitude_ratio", peak_to_peak(&x_a[start..]) / target_ptp);
    }
    report.push("bench_rmse_0_05hz", BENCH_RMSE_SLOW);
    report.push("bench_rmse_0_5hz", BENCH_RMSE_FAST);
}

/// Recovery after the first disturbance step and after its removal.
fn impact_metrics(
    config: &ScenarioConfig,
    trace: &SimTrace,
    x_a: &[f64],
    target: &[f64],
    report: &mut MetricsReport,
) {
    for (k, &(t_step, _)) in config.disturbance.steps.iter().enumerate() {
        let end = config
            .disturbance
            .steps
            .get(k + 1)
            .map_or(config.duration, |s| s.0);
        let range = trace.index_at(t_step)..trace.index_at(end).min(x_a.len());
        if range.is_empty() {
            continue;
        }
        let setpoint = target[range.start];
        let band = SETTLING_BAND * setpoint.abs();
        let deviation = x_a[range.clone()]
            .iter()
            .map(|x| (x - setpoint).abs())
            .fold(0.0f64, f64::max);
        let recovery = match x_a[range.clone()]
            .iter()
            .rposition(|x| (x - setpoint).abs() > band)
        {
            None => 0.0,
            Some(i) if range.start + i + 1 == range.end => f64::INFINITY,
            Some(i) => (i + 1) as f64 * trace.dt_record,
        };
        report.push(&format!("step_{k}_max_deviation"), deviation);
        report.push(&format!("step_{k}_recovery_time"), recovery);
    }
}
