//! Scalar performance metrics over a window of a trace.

use std::fmt::Write as _;
use std::ops::Range;

use crate::error::{Error, Result};

/// Settling band as a fraction of the step height.
pub const SETTLING_BAND: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    /// Root-mean-square tracking error, m.
    pub rmse: f64,
    /// Largest excursion beyond the final target, percent of the step height.
    pub overshoot_pct: f64,
    /// Max − min of the output over the window, m.
    pub peak_to_peak: f64,
    /// Time from the window start until the output stays inside the settling band, s.
    pub settling_time: f64,
    pub max_hysteresis_strain: Option<f64>,
    pub max_output_strain: Option<f64>,
    /// Scenario-specific values, reported after the standard keys in insertion order.
    pub extra: Vec<(String, f64)>,
}

impl MetricsReport {
    pub fn push(&mut self, key: &str, value: f64) {
        self.extra.push((key.to_owned(), value));
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.extra.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }

    /// `key: value` lines with values at 9 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: f64| {
            let _ = writeln!(out, "{k}: {v:.8e}");
        };
        line("rmse", self.rmse);
        line("overshoot_pct", self.overshoot_pct);
        line("peak_to_peak", self.peak_to_peak);
        line("settling_time", self.settling_time);
        if let Some(v) = self.max_hysteresis_strain {
            line("max_hysteresis_strain", v);
        }
        if let Some(v) = self.max_output_strain {
            line("max_output_strain", v);
        }
        for (k, v) in &self.extra {
            line(k, *v);
        }
        out
    }
}

/// Metrics of `output` against `target` over `window` (sample indices),
/// with samples `dt` apart.
///
/// The step height is the final target minus the output at the window start;
/// overshoot is the largest excursion past the target in the step direction.
pub fn metrics(output: &[f64], target: &[f64], dt: f64, window: Range<usize>) -> Result<MetricsReport> {
    if output.len() != target.len() {
        return Err(Error::Data(format!(
            "output and target lengths differ ({} vs {})",
            output.len(),
            target.len()
        )));
    }
    if window.start >= window.end || window.end > output.len() {
        return Err(Error::Data(format!(
            "empty or out-of-bounds metrics window {window:?} for {} samples",
            output.len()
        )));
    }
    let xs = &output[window.clone()];
    let ts = &target[window.clone()];
    let n = xs.len() as f64;

    let rmse = (xs.iter().zip(ts).map(|(x, r)| (x - r).powi(2)).sum::<f64>() / n).sqrt();
    let (min, max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });

    let final_target = ts[ts.len() - 1];
    let height = final_target - xs[0];
    let (overshoot_pct, settling_time) = if height == 0.0 {
        (0.0, 0.0)
    } else {
        let direction = height.signum();
        let excess = xs
            .iter()
            .zip(ts)
            .map(|(x, r)| (x - r) * direction)
            .fold(0.0f64, f64::max);
        let band = SETTLING_BAND * height.abs();
        let last_outside = xs.iter().zip(ts).rposition(|(x, r)| (x - r).abs() > band);
        let settling = match last_outside {
            None => 0.0,
            Some(i) => (i + 1) as f64 * dt,
        };
        (100.0 * excess / height.abs(), settling)
    };

    Ok(MetricsReport {
        rmse,
        overshoot_pct,
        peak_to_peak: max - min,
        settling_time,
        ..Default::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_tracking() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin()).collect();
        let m = metrics(&x, &x, 0.01, 0..100).unwrap();
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.overshoot_pct, 0.0);
    }

    #[test]
    fn sinusoid_ripple() {
        let a = 0.3;
        let n = 10_000;
        let x: Vec<f64> = (0..n)
            .map(|i| 2.0 + a * (2.0 * std::f64::consts::PI * i as f64 / 1000.0).sin())
            .collect();
        let target = vec![2.0; n];
        let m = metrics(&x, &target, 1e-3, 0..n).unwrap();
        assert!((m.rmse - a / 2f64.sqrt()).abs() < 1e-9);
        assert!((m.peak_to_peak - 2.0 * a).abs() < 1e-9);
    }

    #[test]
    fn first_order_settling() {
        let dt = 1e-4;
        let n = 100_000;
        let x: Vec<f64> = (0..n).map(|i| 1.0 - (-(i as f64) * dt).exp()).collect();
        let target = vec![1.0; n];
        let m = metrics(&x, &target, dt, 0..n).unwrap();
        assert!(
            (m.settling_time - (-(0.05f64).ln())).abs() <= 2.0 * dt,
            "{}",
            m.settling_time
        );
        assert_eq!(m.overshoot_pct, 0.0);
    }

    #[test]
    fn overshoot_percent() {
        let x = vec![0.0, 0.5, 1.2, 1.0, 1.0];
        let m = metrics(&x, &[1.0; 5], 1.0, 0..5).unwrap();
        assert!((m.overshoot_pct - 20.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_windows() {
        assert!(metrics(&[1.0], &[1.0], 1.0, 0..0).is_err());
        assert!(metrics(&[1.0], &[1.0, 2.0], 1.0, 0..1).is_err());
        assert!(metrics(&[1.0], &[1.0], 1.0, 0..2).is_err());
    }

    #[test]
    fn report_text() {
        let mut m = MetricsReport {
            rmse: 1e-4,
            ..Default::default()
        };
        m.push("ripple_ratio", 0.125);
        let text = m.to_text();
        assert!(text.starts_with("rmse: 1.00000000e-4\n"));
        assert!(text.ends_with("ripple_ratio: 1.25000000e-1\n"));
    }
}
