//! Identification of leakage constants from decay records.

use std::fmt::Write as _;

use crate::actuator::{ea_pressure, stack_displacement, ActuatorConfig};
use crate::circuit::CircuitParams;
use crate::error::{require_positive, Error, Result};

/// What a decay record measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Voltage,
    Displacement,
    Current,
}

/// Uniformly sampled decay record starting at the DC step (`t = 0⁺`).
#[derive(Debug, Clone, PartialEq)]
pub struct DecayTrace {
    pub dt: f64,
    pub values: Vec<f64>,
    pub kind: TraceKind,
    /// Magnitude of the DC step that produced the record, volts, when known.
    pub drive_magnitude: Option<f64>,
}

pub const MIN_SAMPLES: usize = 10;

impl DecayTrace {
    pub fn validate(&self) -> Result<()> {
        require_positive("dt", self.dt)?;
        if self.values.len() < MIN_SAMPLES {
            return Err(Error::Data(format!(
                "decay trace needs at least {MIN_SAMPLES} samples, got {}",
                self.values.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitWeighting {
    /// Ordinary least squares on the log values.
    #[default]
    Uniform,
    /// Least absolute deviations on the log values, by iteratively reweighted least squares.
    AbsoluteDeviation,
}

/// Which individual circuit constants a fit pins down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Identifiability {
    pub c1: bool,
    pub c2: bool,
    pub r_leak: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    /// Fitted value at `t = 0⁺`, in trace units.
    pub amplitude: f64,
    /// Divider ratio, available for voltage records with a known drive magnitude.
    pub k_hat: Option<f64>,
    pub p_hat: f64,
    /// RMS of `value − amplitude·e^{p_hat·t}`, in trace units.
    pub residual_rms: f64,
    pub identifiable: Identifiability,
}

impl FitResult {
    /// `key: value` report lines.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "amplitude: {:.9e}", self.amplitude);
        match self.k_hat {
            Some(k) => {
                let _ = writeln!(out, "k_hat: {k:.9e}");
            }
            None => out.push_str("k_hat: unidentified\n"),
        }
        let _ = writeln!(out, "p_hat: {:.9e}", self.p_hat);
        let _ = writeln!(out, "time_constant: {:.9e}", -1.0 / self.p_hat);
        let _ = writeln!(out, "residual_rms: {:.9e}", self.residual_rms);
        let _ = writeln!(out, "identifiable_c1: {}", self.identifiable.c1);
        let _ = writeln!(out, "identifiable_c2: {}", self.identifiable.c2);
        let _ = writeln!(out, "identifiable_r_leak: {}", self.identifiable.r_leak);
        out
    }
}

/// Fits `|v(t)| = A·e^{P·t}` by linear regression of `ln|v|` on `t`.
pub fn fit_exponential(trace: &DecayTrace, weighting: FitWeighting) -> Result<FitResult> {
    trace.validate()?;
    if trace.kind == TraceKind::Displacement {
        return Err(Error::Data(
            "displacement does not decay exponentially; use calibrate_p_from_displacement_drop".into(),
        ));
    }
    if let Some((i, v)) = trace
        .values
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
    {
        return Err(Error::Data(format!("sample {i} is not strictly positive: {v}")));
    }
    let first = trace.values[0];
    if trace.values.iter().all(|&v| v == first) {
        return Err(Error::Rank(
            "trace is constant; decay rate is unidentifiable".into(),
        ));
    }

    let times: Vec<f64> = (0..trace.values.len()).map(|i| i as f64 * trace.dt).collect();
    let logs: Vec<f64> = trace.values.iter().map(|v| v.ln()).collect();
    let mut weights = vec![1.0; logs.len()];
    let (mut intercept, mut slope) = weighted_line(&times, &logs, &weights)?;
    if weighting == FitWeighting::AbsoluteDeviation {
        for _ in 0..100 {
            for ((w, &t), &y) in weights.iter_mut().zip(&times).zip(&logs) {
                *w = 1.0 / (y - intercept - slope * t).abs().max(1e-12);
            }
            let (next_intercept, next_slope) = weighted_line(&times, &logs, &weights)?;
            let converged = (next_slope - slope).abs() <= 1e-14 * slope.abs().max(1e-300)
                && (next_intercept - intercept).abs() <= 1e-14 * intercept.abs().max(1.0);
            intercept = next_intercept;
            slope = next_slope;
            if converged {
                break;
            }
        }
    }
    if !(slope < 0.0) {
        return Err(Error::Rank(format!("fitted rate {slope} is not a decay")));
    }

    let amplitude = intercept.exp();
    let residual_rms = (times
        .iter()
        .zip(&trace.values)
        .map(|(&t, &v)| (v - amplitude * (slope * t).exp()).powi(2))
        .sum::<f64>()
        / times.len() as f64)
        .sqrt();
    let (k_hat, identifiable) = match trace.kind {
        TraceKind::Voltage => (
            trace.drive_magnitude.map(|u| amplitude / u),
            Identifiability::default(),
        ),
        _ => (
            None,
            Identifiability {
                c1: true,
                ..Default::default()
            },
        ),
    };
    Ok(FitResult {
        amplitude,
        k_hat,
        p_hat: slope,
        residual_rms,
        identifiable,
    })
}

fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> Result<(f64, f64)> {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
        sxx += wi * (xi - mx) * (xi - mx);
        sxy += wi * (xi - mx) * (yi - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::Rank("sample times are degenerate".into()));
    }
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

/// Series capacitance from the initial input current of a DC step,
/// `i(0⁺) = c1·K·|P|·U`.
pub fn recover_c1(initial_current: f64, k: f64, p: f64, magnitude: f64) -> Result<f64> {
    require_positive("initial_current", initial_current)?;
    require_positive("magnitude", magnitude)?;
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::validation("k", format!("must lie in (0, 1), got {k}")));
    }
    if !(p < 0.0) {
        return Err(Error::validation("p", format!("must be < 0, got {p}")));
    }
    Ok(initial_current / (k * p.abs() * magnitude))
}

/// Recovers all three circuit constants from a voltage fit and a current fit of
/// the same DC step.
pub fn identify_circuit(
    voltage: &FitResult,
    current: &FitResult,
    magnitude: f64,
) -> Result<(CircuitParams, Identifiability)> {
    let k = voltage
        .k_hat
        .ok_or_else(|| Error::Data("voltage fit lacks a drive magnitude".into()))?;
    let c1 = recover_c1(current.amplitude, k, voltage.p_hat, magnitude)?;
    let params = CircuitParams::from_constants(c1, k, voltage.p_hat)?;
    Ok((
        params,
        Identifiability {
            c1: true,
            c2: true,
            r_leak: true,
        },
    ))
}

/// DC decay experiment: a stack under constant load driven by a DC step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayScenario {
    pub actuator: ActuatorConfig,
    /// Divider ratio `K` of the circuit.
    pub k: f64,
    /// DC step magnitude, volts.
    pub magnitude: f64,
    /// Force on the stack, N.
    pub load_force: f64,
}

impl DecayScenario {
    /// Relative displacement drop at `horizon` for decay rate `p`, through the
    /// voltage → pressure → displacement pipeline.
    pub fn displacement_drop(&self, p: f64, horizon: f64) -> Result<f64> {
        let initial = self.displacement_at(self.k * self.magnitude)?;
        if initial <= 0.0 {
            return Err(Error::Range("no displacement at t = 0⁺".into()));
        }
        let later = self.displacement_at(self.k * self.magnitude * (p * horizon).exp())?;
        Ok(1.0 - later / initial)
    }

    fn displacement_at(&self, voltage: f64) -> Result<f64> {
        let pressure = ea_pressure(&self.actuator.film, voltage)?;
        stack_displacement(&self.actuator, pressure, self.load_force)
    }
}

/// Lower end of the searched decay rates.
pub const P_SEARCH_MIN: f64 = -100.0;
const P_SEARCH_TINY: f64 = -1e-12;

/// Decay rate `P` at which the modelled displacement drops by `drop_fraction`
/// after `horizon` seconds. Solved by bisection over `(P_SEARCH_MIN, 0)` in log|P|.
pub fn calibrate_p_from_displacement_drop(
    drop_fraction: f64,
    horizon: f64,
    scenario: &DecayScenario,
) -> Result<f64> {
    if !(drop_fraction > 0.0 && drop_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "drop fraction must lie in (0, 1), got {drop_fraction}"
        )));
    }
    require_positive("horizon", horizon)?;
    scenario.actuator.validate()?;

    let drop_at_log = |log_rate: f64| scenario.displacement_drop(-log_rate.exp(), horizon);
    let (mut lo, mut hi) = (P_SEARCH_TINY.abs().ln(), P_SEARCH_MIN.abs().ln());

    // The bracket is only valid if the drop grows with |P|.
    let mut previous = f64::NEG_INFINITY;
    for i in 0..=64 {
        let d = drop_at_log(lo + (hi - lo) * i as f64 / 64.0)?;
        if d < previous - 1e-12 {
            return Err(Error::Numerical(
                "displacement drop is not monotone in |P|; bisection bracket invalid".into(),
            ));
        }
        previous = d;
    }

    let floor = drop_at_log(lo)?;
    let ceiling = drop_at_log(hi)?;
    if drop_fraction > ceiling {
        return Err(Error::Range(format!(
            "drop {drop_fraction} unreachable: at most {ceiling} for P >= {P_SEARCH_MIN}"
        )));
    }
    if drop_fraction < floor {
        return Err(Error::Range(format!(
            "drop {drop_fraction} unreachable: at least {floor} for P <= {P_SEARCH_TINY}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if drop_at_log(mid)? < drop_fraction {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(-(0.5 * (lo + hi)).exp())
}

/// Fills runs of at most `max_gap` missing samples by linear interpolation.
/// Leading or trailing gaps and longer runs are rejected.
pub fn interpolate_gaps(values: &[Option<f64>], max_gap: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(values.len());
    let mut i = 0;
    while i < values.len() {
        match values[i] {
            Some(v) => {
                out.push(v);
                i += 1;
            }
            None => {
                let start = i;
                while i < values.len() && values[i].is_none() {
                    i += 1;
                }
                let len = i - start;
                if start == 0 || i == values.len() {
                    return Err(Error::Data(format!(
                        "missing samples at the {} of the record",
                        if start == 0 { "start" } else { "end" }
                    )));
                }
                if len > max_gap {
                    return Err(Error::Data(format!(
                        "{len} consecutive missing samples at index {start} (at most {max_gap} allowed)"
                    )));
                }
                let (a, b) = (out[start - 1], values[i].unwrap_or_default());
                for j in 1..=len {
                    out.push(a + (b - a) * j as f64 / (len + 1) as f64);
                }
            }
        }
    }
    Ok(out)
}

/// Maximum run of missing samples tolerated when reading records.
pub const MAX_INTERPOLATED_GAP: usize = 3;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actuator::GRAVITY;

    fn synthetic(k: f64, p: f64, u: f64, n: usize, dt: f64) -> DecayTrace {
        DecayTrace {
            dt,
            values: (0..n).map(|i| k * u * (p * i as f64 * dt).exp()).collect(),
            kind: TraceKind::Voltage,
            drive_magnitude: Some(u),
        }
    }

    #[test]
    fn exact_recovery() {
        let fit = fit_exponential(&synthetic(0.5, -0.5, 6000.0, 500, 0.02), FitWeighting::Uniform).unwrap();
        assert!((fit.k_hat.unwrap() / 0.5 - 1.0).abs() < 1e-10);
        assert!((fit.p_hat / -0.5 - 1.0).abs() < 1e-10);
        assert!(fit.residual_rms < 1e-9);
        assert_eq!(fit.identifiable, Identifiability::default());
        let robust = fit_exponential(
            &synthetic(0.5, -0.5, 6000.0, 500, 0.02),
            FitWeighting::AbsoluteDeviation,
        )
        .unwrap();
        assert!((robust.p_hat / -0.5 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn robust_mode_resists_outliers() {
        let mut trace = synthetic(0.5, -0.5, 6000.0, 200, 0.02);
        for i in (5..200).step_by(20) {
            trace.values[i] *= 3.0;
        }
        let ols = fit_exponential(&trace, FitWeighting::Uniform).unwrap();
        let lad = fit_exponential(&trace, FitWeighting::AbsoluteDeviation).unwrap();
        assert!((lad.p_hat + 0.5).abs() < 1e-3);
        assert!((lad.p_hat + 0.5).abs() < (ols.p_hat + 0.5).abs());
    }

    #[test]
    fn data_errors() {
        let mut trace = synthetic(0.5, -0.5, 1.0, 20, 0.1);
        trace.values[3] = 0.0;
        assert!(matches!(
            fit_exponential(&trace, FitWeighting::Uniform),
            Err(Error::Data(_))
        ));
        let flat = DecayTrace {
            values: vec![2.0; 20],
            ..trace.clone()
        };
        assert!(matches!(
            fit_exponential(&flat, FitWeighting::Uniform),
            Err(Error::Rank(_))
        ));
        let short = DecayTrace {
            values: vec![1.0, 0.5],
            ..trace
        };
        assert!(matches!(
            fit_exponential(&short, FitWeighting::Uniform),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn current_trace_gives_c1() {
        let (k, p, u) = (0.5, -0.5, 6000.0);
        let trace = DecayTrace {
            dt: 0.01,
            values: (0..100).map(|i| 1.5e-6 * (p * i as f64 * 0.01).exp()).collect(),
            kind: TraceKind::Current,
            drive_magnitude: Some(u),
        };
        let fit = fit_exponential(&trace, FitWeighting::Uniform).unwrap();
        assert!(fit.identifiable.c1 && !fit.identifiable.c2 && !fit.identifiable.r_leak);
        let c1 = recover_c1(fit.amplitude, k, fit.p_hat, u).unwrap();
        assert!((c1 / 1e-9 - 1.0).abs() < 1e-9);

        let voltage = fit_exponential(&synthetic(k, p, u, 100, 0.01), FitWeighting::Uniform).unwrap();
        let (params, ident) = identify_circuit(&voltage, &fit, u).unwrap();
        assert!(ident.c1 && ident.c2 && ident.r_leak);
        assert!((params.c2 / 1e-9 - 1.0).abs() < 1e-9);
        assert!((params.r_leak / 1e9 - 1.0).abs() < 1e-9);
    }

    fn pi25() -> DecayScenario {
        DecayScenario {
            actuator: ActuatorConfig {
                stack_count: 3,
                film: crate::actuator::FilmInterface {
                    eps_rel: 3.4,
                    single_thickness: 25e-6,
                },
                ..Default::default()
            },
            k: 0.5,
            magnitude: 6000.0,
            load_force: 0.08 * GRAVITY,
        }
    }

    #[test]
    fn calibration_round_trip_and_ordering() {
        let s = pi25();
        let p1 = calibrate_p_from_displacement_drop(0.065, 80.0, &s).unwrap();
        assert!((s.displacement_drop(p1, 80.0).unwrap() - 0.065).abs() < 1e-3);
        let p2 = calibrate_p_from_displacement_drop(0.963, 10.0, &s).unwrap();
        assert!(p2 < p1);
        let p_small = calibrate_p_from_displacement_drop(1e-6, 80.0, &s).unwrap();
        assert!(p_small < 0.0 && p_small > p1);
        assert!(calibrate_p_from_displacement_drop(0.0, 80.0, &s).is_err());
        assert!(calibrate_p_from_displacement_drop(0.5, 0.0, &s).is_err());
    }

    #[test]
    fn unreachable_drop_reports_range() {
        // Even the fastest searched decay cannot lose 99% within 1 ms.
        let err = calibrate_p_from_displacement_drop(0.99, 1e-3, &pi25()).unwrap_err();
        assert!(
            matches!(err, Error::Range(ref m) if m.contains("at most")),
            "{err}"
        );
    }

    #[test]
    fn gap_interpolation() {
        let filled = interpolate_gaps(&[Some(1.0), None, None, Some(4.0)], 3).unwrap();
        assert_eq!(filled, vec![1.0, 2.0, 3.0, 4.0]);
        assert!(interpolate_gaps(&[Some(1.0), None, None, None, None, Some(4.0)], 3).is_err());
        assert!(interpolate_gaps(&[None, Some(1.0)], 3).is_err());
        assert!(interpolate_gaps(&[Some(1.0), None], 3).is_err());
    }
}
