//! Frequency and hysteresis sweeps.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::plant::Plant;

use super::config::{DriveKind, ScenarioConfig, ScenarioKind};
use super::scenario::simulate;
use super::trace::{col, format_value, SimTrace};

/// Post-drive settling time before amplitudes are measured, s.
pub const SWEEP_SETTLE: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    /// Hz.
    pub frequency: f64,
    /// Payload, kg.
    pub load: f64,
    /// Peak-to-peak stack displacement after settling, m.
    pub peak_to_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn get(&self, frequency: f64, load: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.frequency == frequency && r.load == load)
            .map(|r| r.peak_to_peak)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("frequency,load,peak_to_peak\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{}",
                format_value(r.frequency),
                format_value(r.load),
                format_value(r.peak_to_peak)
            );
        }
        out
    }
}

/// AC hold configuration for one sweep point.
pub fn sweep_point_config(config: &ScenarioConfig, frequency: f64, load: f64) -> ScenarioConfig {
    let mut point = config.clone();
    point.kind = ScenarioKind::AcHold;
    point.drive.wave = DriveKind::AcSquare;
    point.drive.frequency = frequency;
    point.plant = config.plant_with_payload(load);
    point.window_start = SWEEP_SETTLE;
    point.duration = SWEEP_SETTLE + 2.0 / frequency + 0.5;
    point.output = Default::default();
    point
}

/// Peak-to-peak `x_b` after settling for every `(frequency, load)` pair, in
/// input order (loads vary fastest). Points run in parallel.
pub fn frequency_sweep(config: &ScenarioConfig, frequencies: &[f64], loads: &[f64]) -> Result<SweepTable> {
    if let Some(f) = frequencies.iter().find(|f| !(0.1..=10.0).contains(*f)) {
        return Err(Error::validation(
            "sweep.frequencies",
            format!("{f} Hz outside [0.1, 10] Hz"),
        ));
    }
    let points: Vec<(f64, f64)> = frequencies
        .iter()
        .flat_map(|&f| loads.iter().map(move |&m| (f, m)))
        .collect();
    let rows = points
        .par_iter()
        .map(|&(frequency, load)| {
            let point = sweep_point_config(config, frequency, load);
            point.validate()?;
            let trace = simulate(&point)?;
            let start = trace.index_at(SWEEP_SETTLE);
            let x_b = &trace.column(col::X_B)[start..];
            let (lo, hi) = x_b
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            Ok(SweepRow {
                frequency,
                load,
                peak_to_peak: hi - lo,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisSweep {
    /// `(magnitude, strain)` on the rising branch.
    pub up: Vec<(f64, f64)>,
    /// `(magnitude, strain)` on the falling branch, in decreasing magnitude.
    pub down: Vec<(f64, f64)>,
    /// Largest falling-minus-rising strain at equal magnitude.
    pub mhs: f64,
    /// Largest strain.
    pub mos: f64,
    /// Rows in sweep order, one per magnitude, at pseudo-time spacing `record_dt`.
    pub trace: SimTrace,
}

impl HysteresisSweep {
    pub fn ratio(&self) -> f64 {
        if self.mos > 0.0 {
            self.mhs / self.mos
        } else {
            0.0
        }
    }
}

/// Quasi-static 0 → `v_max` → 0 magnitude sweep in `steps` increments per
/// direction. The stack sees the divider share `K·magnitude`.
pub fn hysteresis_sweep(config: &ScenarioConfig, v_max: f64, steps: u32) -> Result<HysteresisSweep> {
    if !(v_max > 0.0) || steps < 2 {
        return Err(Error::validation("sweep", "v_max must be > 0 and steps >= 2"));
    }
    let plant = Plant::new(config.plant, config.actuator, Default::default())?;
    let k = config.circuit.k();
    let preload = config.plant.preload();
    let magnitudes: Vec<f64> = (0..=steps)
        .chain((0..steps).rev())
        .map(|j| v_max * j as f64 / steps as f64)
        .collect();

    let mut trace = SimTrace::new(config.record_dt);
    let mut state = 0.0;
    let mut strains = Vec::with_capacity(magnitudes.len());
    for (i, &magnitude) in magnitudes.iter().enumerate() {
        let u_o = k * magnitude;
        state = plant.static_equilibrium(u_o, state)?;
        strains.push(config.actuator.strain(state));
        trace.rows.push([
            i as f64 * config.record_dt,
            magnitude,
            u_o,
            magnitude,
            state,
            state,
            0.0,
            preload,
            0.0,
        ]);
    }
    let n = steps as usize;
    let up: Vec<(f64, f64)> = (0..=n).map(|j| (magnitudes[j], strains[j])).collect();
    let down: Vec<(f64, f64)> = (n..magnitudes.len())
        .map(|j| (magnitudes[j], strains[j]))
        .collect();
    let mhs = down
        .iter()
        .map(|&(_, s_down)| s_down)
        .zip(up.iter().rev().map(|&(_, s_up)| s_up))
        .map(|(d, u)| d - u)
        .fold(0.0f64, f64::max);
    let mos = strains.iter().cloned().fold(0.0f64, f64::max);
    Ok(HysteresisSweep {
        up,
        down,
        mhs,
        mos,
        trace,
    })
}

/// Play width giving `target_ratio` of maximum hysteresis to maximum output
/// strain on the configured sweep, by bisection.
pub fn calibrate_play_width(config: &ScenarioConfig, target_ratio: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&target_ratio) {
        return Err(Error::Domain(format!(
            "target ratio must lie in [0, 1), got {target_ratio}"
        )));
    }
    let ratio_at = |w: f64| -> Result<f64> {
        let mut c = config.clone();
        c.plant.play_width = w;
        Ok(hysteresis_sweep(&c, c.sweep.v_max, c.sweep.steps)?.ratio())
    };
    let (mut lo, mut hi) = (0.0, 4.0);
    if ratio_at(hi)? < target_ratio {
        return Err(Error::Range(format!(
            "ratio {target_ratio} not reachable with play width <= {hi}"
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ratio_at(mid)? < target_ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memoryless_sweep_has_no_hysteresis() {
        let mut c = ScenarioConfig::default_for(ScenarioKind::HysteresisSweep);
        c.plant.play_width = 0.0;
        let s = hysteresis_sweep(&c, 8000.0, 40).unwrap();
        assert_eq!(s.mhs, 0.0);
        assert!(s.mos > 0.0 && s.mos <= 1.0);
        assert_eq!(s.up.len(), 41);
        assert_eq!(s.down.len(), 41);
    }

    #[test]
    fn calibration_matches_closed_form() {
        // Relative play: rising branch s·e^{−w}, so MHS/MOS = 1 − e^{−2w} on a fine grid.
        let mut c = ScenarioConfig::default_for(ScenarioKind::HysteresisSweep);
        c.sweep.steps = 4000;
        let w = calibrate_play_width(&c, 0.3).unwrap();
        let expected = -0.5 * (0.7f64).ln();
        assert!((w - expected).abs() < 2e-3, "{w} vs {expected}");
    }
}
