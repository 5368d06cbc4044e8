//! Discrete PI magnitude controller and square-wave modulator.
//!
//! The controller output is the magnitude of the AC square wave; the modulator
//! applies a polarity that flips every half period on a global clock, so
//! magnitude updates never shift the flip instants.

use crate::error::{require_non_negative, require_positive, Error, Result};

/// Time base of the integral accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntegralTimeBase {
    /// Integral accumulates `e·cycle_dt`; `ki` in V/(m·s).
    #[default]
    Seconds,
    /// Integral accumulates `e` once per cycle; `ki` in V/(m·cycle).
    Cycles,
}

impl IntegralTimeBase {
    pub fn as_str(&self) -> &'static str {
        match self {
            IntegralTimeBase::Seconds => "seconds",
            IntegralTimeBase::Cycles => "cycles",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "seconds" => Some(Self::Seconds),
            "cycles" => Some(Self::Cycles),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiGains {
    /// Proportional gain, V/m.
    pub kp: f64,
    /// Integral gain, V/(m·s) or V/(m·cycle) depending on `time_base`.
    pub ki: f64,
    /// Control period, seconds.
    pub cycle_dt: f64,
    /// Lower output limit; the actuator cannot pull, so this is 0.
    pub u_min: f64,
    pub u_max: f64,
    pub time_base: IntegralTimeBase,
}

/// Proportional gain of 0.8 kV/mm expressed in V/m.
pub const HARDWARE_KP: f64 = 0.8e3 / 1e-3;
/// Integral gain of 0.005 kV/mm accumulated per 1 ms cycle, in V/(m·cycle).
pub const HARDWARE_KI_PER_CYCLE: f64 = 0.005e3 / 1e-3;

impl PiGains {
    /// The hand-tuned hardware gains, read as kV/mm with a per-cycle integral.
    pub fn hardware() -> Self {
        Self {
            kp: HARDWARE_KP,
            ki: HARDWARE_KI_PER_CYCLE,
            cycle_dt: 1e-3,
            u_min: 0.0,
            u_max: 8000.0,
            time_base: IntegralTimeBase::Cycles,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_non_negative("kp", self.kp)?;
        require_non_negative("ki", self.ki)?;
        require_positive("cycle_dt", self.cycle_dt)?;
        if self.u_min != 0.0 {
            return Err(Error::validation("u_min", "must be 0"));
        }
        require_positive("u_max", self.u_max)?;
        if !self.u_max.is_finite() {
            return Err(Error::validation("u_max", "must be finite"));
        }
        Ok(())
    }

    /// Integral gain converted to V/(m·s).
    pub fn ki_per_second(&self) -> f64 {
        match self.time_base {
            IntegralTimeBase::Seconds => self.ki,
            IntegralTimeBase::Cycles => self.ki / self.cycle_dt,
        }
    }

    fn integration_weight(&self) -> f64 {
        match self.time_base {
            IntegralTimeBase::Seconds => self.cycle_dt,
            IntegralTimeBase::Cycles => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    /// Accumulated error, in meter-seconds or meter-cycles per the time base.
    pub integral: f64,
    pub last_magnitude: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiOutput {
    pub magnitude: f64,
    /// Set when an input was non-finite; the output is then held.
    pub fault: bool,
    pub saturated: bool,
}

/// One controller cycle. Integration is frozen while the output is saturated
/// and the error pushes it further into saturation.
pub fn pi_step(
    gains: &PiGains,
    state: &ControllerState,
    target: f64,
    measured: f64,
) -> (PiOutput, ControllerState) {
    let t = state.t + gains.cycle_dt;
    let error = target - measured;
    if !error.is_finite() {
        return (
            PiOutput {
                magnitude: state.last_magnitude,
                fault: true,
                saturated: false,
            },
            ControllerState { t, ..*state },
        );
    }

    let tentative = state.integral + error * gains.integration_weight();
    let unclamped = gains.kp * error + gains.ki * tentative;
    let winding_up = unclamped > gains.u_max && error > 0.0;
    let winding_down = unclamped < gains.u_min && error < 0.0;
    let integral = if winding_up || winding_down {
        state.integral
    } else {
        tentative
    };
    let raw = gains.kp * error + gains.ki * integral;
    let magnitude = raw.clamp(gains.u_min, gains.u_max);
    (
        PiOutput {
            magnitude,
            fault: false,
            saturated: raw != magnitude,
        },
        ControllerState {
            integral,
            last_magnitude: magnitude,
            t,
        },
    )
}

/// Stateful wrapper around [`pi_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct PiController {
    gains: PiGains,
    state: ControllerState,
}

impl PiController {
    pub fn new(gains: PiGains) -> Result<Self> {
        gains.validate()?;
        Ok(Self {
            gains,
            state: ControllerState::default(),
        })
    }

    pub fn gains(&self) -> &PiGains {
        &self.gains
    }

    pub fn state(&self) -> &ControllerState {
        &self.state
    }

    pub fn step(&mut self, target: f64, measured: f64) -> PiOutput {
        let (out, next) = pi_step(&self.gains, &self.state, target, measured);
        self.state = next;
        out
    }
}

/// Signed square-wave command `magnitude·(−1)^floor(2·f·t)`.
pub fn modulate(magnitude: f64, t: f64, frequency: f64) -> Result<f64> {
    if !(frequency > 0.0) || !frequency.is_finite() {
        return Err(Error::Domain(format!("frequency must be > 0, got {frequency}")));
    }
    if magnitude.is_nan() || magnitude < 0.0 {
        return Err(Error::Domain(format!("magnitude must be >= 0, got {magnitude}")));
    }
    let half_periods = half_period_index(2.0 * frequency * t);
    Ok(if half_periods.rem_euclid(2.0) == 0.0 {
        magnitude
    } else {
        -magnitude
    })
}

/// `floor(x)`, except that values within rounding noise of an integer snap to
/// it, so sample times like `0.1 + 0.15` still land on the flip.
fn half_period_index(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
        nearest
    } else {
        x.floor()
    }
}
