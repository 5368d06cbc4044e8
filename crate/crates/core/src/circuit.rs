//! Electrode leakage model.
//!
//! The actuator electrodes are modelled as a series capacitor `c1` feeding a
//! parallel `c2 || r_leak` network. Under a DC step the electrode voltage
//! decays as `K·e^{P·t}`; under an AC square wave it settles into a bounded
//! oscillation between the envelope constants `K2` and `K1`.
//!
//! Closed forms and a numerical integrator are both provided; the integrator
//! is exact between input discontinuities (exponential update) and applies the
//! capacitive-divider jump `K·Δu_i` at each edge.

use crate::error::{require_non_negative, require_positive, Error, Result};

/// Leakage circuit constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams {
    /// Series (film) capacitance, farads.
    pub c1: f64,
    /// Parallel capacitance, farads.
    pub c2: f64,
    /// Parallel leakage resistance, ohms.
    pub r_leak: f64,
}

/// Derived constants of the leakage model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageConstants {
    /// Capacitive divider ratio `c1 / (c1 + c2)`.
    pub k: f64,
    /// Decay rate `-1 / (r_leak·(c1 + c2))`, per second.
    pub p: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        Self {
            c1: 1e-9,
            c2: 1e-9,
            r_leak: 1e9,
        }
    }
}

impl CircuitParams {
    pub fn new(c1: f64, c2: f64, r_leak: f64) -> Result<Self> {
        let params = Self { c1, c2, r_leak };
        params.validate()?;
        Ok(params)
    }

    /// Builds parameters that reproduce the given `(K, P)` for a chosen `c1`.
    pub fn from_constants(c1: f64, k: f64, p: f64) -> Result<Self> {
        require_positive("c1", c1)?;
        if !(k > 0.0 && k < 1.0) {
            return Err(Error::validation("k", format!("must lie in (0, 1), got {k}")));
        }
        if !(p < 0.0) {
            return Err(Error::validation("p", format!("must be < 0, got {p}")));
        }
        let total = c1 / k;
        Self::new(c1, total - c1, -1.0 / (p * total))
    }

    pub fn validate(&self) -> Result<()> {
        for (field, value) in [("c1", self.c1), ("c2", self.c2)] {
            require_positive(field, value)?;
            if !value.is_finite() {
                return Err(Error::validation(field, "must be finite"));
            }
        }
        // An infinite leakage resistance is the leak-free limit and is allowed.
        require_positive("r_leak", self.r_leak)
    }

    pub fn k(&self) -> f64 {
        self.c1 / (self.c1 + self.c2)
    }

    pub fn p(&self) -> f64 {
        -1.0 / (self.r_leak * (self.c1 + self.c2))
    }

    /// Time constant `1/|P|`, seconds.
    pub fn time_constant(&self) -> f64 {
        self.r_leak * (self.c1 + self.c2)
    }
}

pub fn derive_constants(params: &CircuitParams) -> Result<LeakageConstants> {
    params.validate()?;
    Ok(LeakageConstants {
        k: params.k(),
        p: params.p(),
    })
}

/// Electrode voltage after a DC step of `magnitude` volts applied at `t = 0`.
pub fn dc_output(params: &CircuitParams, magnitude: f64, t: f64) -> Result<f64> {
    params.validate()?;
    check_time(t)?;
    Ok(magnitude * params.k() * (params.p() * t).exp())
}

/// Electrode voltage under an AC square wave that starts positive at `t = 0`.
///
/// Uses the collapsed geometric sum so the cost is O(1) in the number of
/// elapsed half periods.
pub fn ac_square_output(params: &CircuitParams, magnitude: f64, frequency: f64, t: f64) -> Result<f64> {
    params.validate()?;
    check_time(t)?;
    check_frequency(frequency)?;
    let a = half_period(frequency);
    Ok(magnitude * ac_unit_response(params.k(), params.p(), a, t))
}

fn ac_unit_response(k: f64, p: f64, a: f64, t: f64) -> f64 {
    let n = (t / a).floor();
    let delta = t - n * a;
    let sign = if (n as u64).is_multiple_of(2) { 1.0 } else { -1.0 };
    let decay = (p * t).exp();
    let denom = 1.0 + (p * a).exp();
    // K·e^{Pt} − 2K·e^{Pt}/(1+e^{Pa}) + 2K·(−1)^n·e^{PΔt}/(1+e^{Pa})
    k * decay * (1.0 - 2.0 / denom) + sign * 2.0 * k * (p * delta).exp() / denom
}

/// Parity of the number of elapsed half periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Periodic steady-state electrode voltage at offset `delta_t` into a half period.
pub fn steady_state_output(
    params: &CircuitParams,
    magnitude: f64,
    frequency: f64,
    delta_t: f64,
    parity: Parity,
) -> Result<f64> {
    params.validate()?;
    check_frequency(frequency)?;
    let a = half_period(frequency);
    if !(0.0..a).contains(&delta_t) {
        return Err(Error::Domain(format!(
            "delta_t must lie in [0, {a}), got {delta_t}"
        )));
    }
    let sign = match parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
    };
    let (k, p) = (params.k(), params.p());
    Ok(sign * 2.0 * k * (p * delta_t).exp() / (1.0 + (p * a).exp()) * magnitude)
}

/// Upper and lower bounds of the steady-state electrode voltage, per volt of drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub k1: f64,
    pub k2: f64,
}

impl Envelope {
    /// Normalized ripple `K1 − K2`.
    pub fn width(&self) -> f64 {
        self.k1 - self.k2
    }
}

pub fn envelope(params: &CircuitParams, frequency: f64) -> Result<Envelope> {
    params.validate()?;
    check_frequency(frequency)?;
    let (k, p) = (params.k(), params.p());
    let decay = (p * half_period(frequency)).exp();
    Ok(Envelope {
        k1: 2.0 * k / (1.0 + decay),
        k2: 2.0 * k * decay / (1.0 + decay),
    })
}

/// Gain of the circuit transfer function at angular frequency `omega`.
pub fn transfer_magnitude(params: &CircuitParams, omega: f64) -> Result<f64> {
    params.validate()?;
    if omega.is_nan() || omega < 0.0 {
        return Err(Error::Domain(format!("omega must be >= 0, got {omega}")));
    }
    if omega.is_infinite() {
        return Ok(params.k());
    }
    let num = params.r_leak * params.c1 * omega;
    let re: f64 = 1.0;
    let im = params.r_leak * (params.c1 + params.c2) * omega;
    if im.is_infinite() {
        return Ok(params.k());
    }
    Ok(num / re.hypot(im))
}

pub fn half_period(frequency: f64) -> f64 {
    0.5 / frequency
}

fn check_time(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    Ok(())
}

fn check_frequency(frequency: f64) -> Result<()> {
    if !(frequency > 0.0) || !frequency.is_finite() {
        return Err(Error::Domain(format!("frequency must be > 0, got {frequency}")));
    }
    Ok(())
}

/// Input voltage applied to the actuator terminals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveWaveform {
    /// Constant voltage switched on at `t = 0`.
    DcStep { magnitude: f64 },
    /// Square wave starting positive at `t = 0`.
    AcSquare { magnitude: f64, frequency: f64 },
}

impl DriveWaveform {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DriveWaveform::DcStep { magnitude } => require_non_negative("magnitude", magnitude),
            DriveWaveform::AcSquare { magnitude, frequency } => {
                require_non_negative("magnitude", magnitude)?;
                require_positive("frequency", frequency)?;
                if !frequency.is_finite() {
                    return Err(Error::validation("frequency", "must be finite"));
                }
                Ok(())
            }
        }
    }

    pub fn magnitude(&self) -> f64 {
        match *self {
            DriveWaveform::DcStep { magnitude } | DriveWaveform::AcSquare { magnitude, .. } => magnitude,
        }
    }

    pub fn half_period(&self) -> Option<f64> {
        match *self {
            DriveWaveform::DcStep { .. } => None,
            DriveWaveform::AcSquare { frequency, .. } => Some(half_period(frequency)),
        }
    }

    /// Number of polarity reversals that have occurred at time `t`.
    pub fn flips(&self, t: f64) -> u64 {
        match self.half_period() {
            None => 0,
            Some(a) => (t / a).floor().max(0.0) as u64,
        }
    }

    /// Value at time `t >= 0`; for the square wave `magnitude·(−1)^floor(t/a)`.
    pub fn sample(&self, t: f64) -> f64 {
        if self.flips(t).is_multiple_of(2) {
            self.magnitude()
        } else {
            -self.magnitude()
        }
    }

    /// Closed-form electrode voltage for this waveform.
    pub fn analytic_output(&self, params: &CircuitParams, t: f64) -> Result<f64> {
        match *self {
            DriveWaveform::DcStep { magnitude } => dc_output(params, magnitude, t),
            DriveWaveform::AcSquare { magnitude, frequency } => {
                ac_square_output(params, magnitude, frequency, t)
            }
        }
    }
}

/// One recorded sample of the circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageSample {
    /// Terminal (input) voltage.
    pub u_i: f64,
    /// Electrode (output) voltage.
    pub u_o: f64,
    /// Input current, amperes.
    pub i_in: f64,
}

/// Uniformly sampled circuit record; sample `k` is at time `k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageTrace {
    pub dt: f64,
    pub samples: Vec<VoltageSample>,
}

impl VoltageTrace {
    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.dt
    }

    pub fn u_o(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.u_o)
    }
}

/// Integration scheme for the continuous segments between input edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// Exact exponential update.
    #[default]
    Exponential,
    /// Classical fourth-order Runge-Kutta, kept as a cross-check.
    Rk4,
}

/// Stateful leakage circuit, advanced in time by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageCircuit {
    params: CircuitParams,
    k: f64,
    p: f64,
    u_i: f64,
    u_o: f64,
}

impl LeakageCircuit {
    /// A discharged circuit with zero input.
    pub fn new(params: CircuitParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            k: params.k(),
            p: params.p(),
            params,
            u_i: 0.0,
            u_o: 0.0,
        })
    }

    pub fn params(&self) -> &CircuitParams {
        &self.params
    }

    pub fn input(&self) -> f64 {
        self.u_i
    }

    pub fn output(&self) -> f64 {
        self.u_o
    }

    /// Switches the terminal voltage instantaneously; the electrode voltage
    /// jumps by the divider share of the change.
    pub fn set_input(&mut self, u_i: f64) {
        if u_i != self.u_i {
            self.u_o += self.k * (u_i - self.u_i);
            self.u_i = u_i;
        }
    }

    /// Advances with constant input for `dt` seconds.
    pub fn advance(&mut self, dt: f64, integrator: Integrator) {
        if dt <= 0.0 {
            return;
        }
        match integrator {
            Integrator::Exponential => self.u_o *= (self.p * dt).exp(),
            Integrator::Rk4 => {
                // du_o/dt = P·u_o while the input is constant.
                let p = self.p;
                let y = self.u_o;
                let k1 = p * y;
                let k2 = p * (y + 0.5 * dt * k1);
                let k3 = p * (y + 0.5 * dt * k2);
                let k4 = p * (y + dt * k3);
                self.u_o = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
    }

    /// Current drawn through `c1` while the input is constant.
    pub fn input_current(&self) -> f64 {
        -self.params.c1 * self.p * self.u_o
    }

    pub fn sample(&self) -> VoltageSample {
        VoltageSample {
            u_i: self.u_i,
            u_o: self.u_o,
            i_in: self.input_current(),
        }
    }
}

fn check_resolution(params: &CircuitParams, dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Configuration(format!("dt must be > 0, got {dt}")));
    }
    let limit = 0.01 * params.time_constant();
    if dt > limit {
        return Err(Error::Configuration(format!(
            "dt = {dt} s exceeds the resolution limit {limit} s (1% of the leakage time constant)"
        )));
    }
    Ok(())
}

/// Integrates the circuit under `waveform` from a discharged state.
///
/// Square-wave edges are located exactly, so the result is independent of
/// whether `dt` divides the half period. Returns `floor(duration/dt) + 1` samples.
pub fn simulate_ode(
    params: &CircuitParams,
    waveform: &DriveWaveform,
    duration: f64,
    dt: f64,
    integrator: Integrator,
) -> Result<VoltageTrace> {
    params.validate()?;
    waveform.validate()?;
    check_resolution(params, dt)?;
    require_non_negative("duration", duration)?;

    let steps = (duration / dt).floor() as usize;
    let mut circuit = LeakageCircuit::new(*params)?;
    let mut samples = Vec::with_capacity(steps + 1);
    circuit.set_input(waveform.sample(0.0));
    samples.push(circuit.sample());

    let mut t_prev = 0.0;
    for index in 1..=steps {
        let t = index as f64 * dt;
        if let Some(a) = waveform.half_period() {
            let mut t_cursor = t_prev;
            for edge in waveform.flips(t_prev) + 1..=waveform.flips(t) {
                let t_edge = edge as f64 * a;
                circuit.advance(t_edge - t_cursor, integrator);
                let sign = if edge % 2 == 0 { 1.0 } else { -1.0 };
                circuit.set_input(sign * waveform.magnitude());
                t_cursor = t_edge;
            }
            circuit.advance(t - t_cursor, integrator);
        } else {
            circuit.advance(t - t_prev, integrator);
        }
        samples.push(circuit.sample());
        t_prev = t;
    }
    Ok(VoltageTrace { dt, samples })
}

/// Integrates the circuit under a zero-order-hold input sequence: `inputs[k]`
/// is applied from `k·dt` (as a step edge) until `(k+1)·dt`.
pub fn simulate_sampled(
    params: &CircuitParams,
    inputs: &[f64],
    dt: f64,
    integrator: Integrator,
) -> Result<VoltageTrace> {
    params.validate()?;
    check_resolution(params, dt)?;
    if inputs.is_empty() {
        return Err(Error::Data("input sequence is empty".into()));
    }
    let mut circuit = LeakageCircuit::new(*params)?;
    let mut samples = Vec::with_capacity(inputs.len());
    for (index, &u) in inputs.iter().enumerate() {
        if index > 0 {
            circuit.advance(dt, integrator);
        }
        circuit.set_input(u);
        samples.push(circuit.sample());
    }
    Ok(VoltageTrace { dt, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> CircuitParams {
        CircuitParams::new(1e-9, 1e-9, 1e9).unwrap()
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn constants_for_equal_capacitors() {
        let c = derive_constants(&unit()).unwrap();
        assert!(close(c.k, 0.5, 1e-15));
        assert!(close(c.p, -0.5, 1e-15));
    }

    #[test]
    fn constants_hand_evaluated() {
        let c = derive_constants(&CircuitParams::new(2e-9, 6e-9, 5e8).unwrap()).unwrap();
        assert!(close(c.k, 0.25, 1e-15));
        assert!(close(c.p, -0.25, 1e-15));
    }

    #[test]
    fn leak_free_limit() {
        let c = derive_constants(&CircuitParams::new(3e-9, 1e-9, 1e30).unwrap()).unwrap();
        assert!(close(c.k, 0.75, 1e-15));
        assert!(c.p < 0.0 && c.p > -1e-20);
        let inf = derive_constants(&CircuitParams::new(3e-9, 1e-9, f64::INFINITY).unwrap()).unwrap();
        assert_eq!(inf.p, 0.0);
    }

    #[test]
    fn rejects_non_positive_fields_by_name() {
        for (params, field) in [
            (CircuitParams { c1: 0.0, ..unit() }, "c1"),
            (CircuitParams { c2: -1e-9, ..unit() }, "c2"),
            (
                CircuitParams {
                    r_leak: 0.0,
                    ..unit()
                },
                "r_leak",
            ),
        ] {
            match derive_constants(&params) {
                Err(Error::Validation { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected validation error for {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn dc_output_values() {
        let p = unit();
        assert!(close(dc_output(&p, 6000.0, 0.0).unwrap(), 3000.0, 1e-15));
        assert!(close(
            dc_output(&p, 6000.0, 2.0 * 2f64.ln()).unwrap(),
            1500.0,
            1e-14
        ));
        assert_eq!(dc_output(&p, 6000.0, 1e6).unwrap(), 0.0);
        assert!(matches!(dc_output(&p, 6000.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn ac_first_half_period_matches_dc() {
        let p = unit();
        for i in 0..25 {
            let t = i as f64 * 0.01;
            let ac = ac_square_output(&p, 6000.0, 2.0, t).unwrap();
            let dc = dc_output(&p, 6000.0, t).unwrap();
            assert!(close(ac, dc, 1e-14), "t={t}: {ac} vs {dc}");
        }
        assert!(matches!(
            ac_square_output(&p, 1.0, 0.0, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ac_approaches_envelope_at_large_t() {
        let p = unit();
        let env = envelope(&p, 2.0).unwrap();
        // n = 400 (even) at t = 100 s
        let at_edge = ac_square_output(&p, 1.0, 2.0, 100.0).unwrap();
        assert!(close(at_edge, env.k1, 1e-12));
        let before_edge = ac_square_output(&p, 1.0, 2.0, 100.25 - 1e-9).unwrap();
        assert!(close(before_edge, env.k2, 1e-8));
    }

    #[test]
    fn steady_state_examples() {
        let p = unit();
        let even0 = steady_state_output(&p, 1.0, 2.0, 0.0, Parity::Even).unwrap();
        let env = envelope(&p, 2.0).unwrap();
        assert_eq!(even0, env.k1);
        let late = steady_state_output(&p, 1.0, 2.0, 0.25 - 1e-12, Parity::Even).unwrap();
        assert!(close(late, env.k2, 1e-10));
        let odd = steady_state_output(&p, 1.0, 2.0, 0.0, Parity::Odd).unwrap();
        assert_eq!(odd, -env.k1);
        // 2K/(1+e^{Pa}) with K=0.5, P=-0.5, a=0.25
        assert!((even0 - 0.531_209).abs() < 1e-6);
        assert!(steady_state_output(&p, 1.0, 2.0, 0.25, Parity::Even).is_err());
        assert!(steady_state_output(&p, 1.0, 2.0, -0.1, Parity::Even).is_err());
    }

    #[test]
    fn envelope_limits() {
        let p = unit();
        let env = envelope(&p, 2.0).unwrap();
        assert!((env.k1 - 0.5312).abs() < 5e-5);
        assert!((env.k2 - 0.4688).abs() < 5e-5);
        let fast = envelope(&p, 1e9).unwrap();
        assert!(close(fast.k1, 0.5, 1e-9) && close(fast.k2, 0.5, 1e-9));
        let slow = envelope(&p, 1e-4).unwrap();
        assert!(close(slow.k1, 1.0, 1e-9) && slow.k2 < 1e-9);
    }

    #[test]
    fn transfer_magnitude_limits() {
        let p = unit();
        assert_eq!(transfer_magnitude(&p, 0.0).unwrap(), 0.0);
        assert!(close(transfer_magnitude(&p, 1e12).unwrap(), 0.5, 1e-9));
        assert_eq!(transfer_magnitude(&p, f64::INFINITY).unwrap(), 0.5);
        let corner = transfer_magnitude(&p, 0.5).unwrap();
        assert!(close(corner, 0.5 / 2f64.sqrt(), 1e-14));
        assert!(transfer_magnitude(&p, -1.0).is_err());
    }

    #[test]
    fn dc_step_input_current() {
        let trace = simulate_ode(
            &unit(),
            &DriveWaveform::DcStep { magnitude: 6000.0 },
            0.1,
            0.01,
            Integrator::Exponential,
        )
        .unwrap();
        assert!(close(trace.samples[0].i_in, 1.5e-6, 1e-12));
    }

    #[test]
    fn resolution_guard() {
        let wave = DriveWaveform::DcStep { magnitude: 1.0 };
        // time constant 2 s → limit 0.02 s
        assert!(simulate_ode(&unit(), &wave, 1.0, 0.02, Integrator::Exponential).is_ok());
        assert!(matches!(
            simulate_ode(&unit(), &wave, 1.0, 0.03, Integrator::Exponential),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn waveform_sampling() {
        let w = DriveWaveform::AcSquare {
            magnitude: 2.0,
            frequency: 2.0,
        };
        assert_eq!(w.sample(0.0), 2.0);
        assert_eq!(w.sample(0.2499), 2.0);
        assert_eq!(w.sample(0.25), -2.0);
        assert_eq!(w.sample(0.5), 2.0);
        assert!(DriveWaveform::AcSquare {
            magnitude: 1.0,
            frequency: 0.0
        }
        .validate()
        .is_err());
        assert!(DriveWaveform::DcStep { magnitude: -1.0 }.validate().is_err());
    }

    #[test]
    fn sampled_input_matches_waveform_when_edges_on_grid() {
        let p = unit();
        let wave = DriveWaveform::AcSquare {
            magnitude: 100.0,
            frequency: 2.0,
        };
        let dt = 0.0125; // 20 samples per half period
        let inputs: Vec<f64> = (0..400).map(|i| wave.sample((i as f64 + 0.5) * dt)).collect();
        let sampled = simulate_sampled(&p, &inputs, dt, Integrator::Exponential).unwrap();
        for (i, s) in sampled.samples.iter().enumerate().skip(1) {
            let exact = wave.analytic_output(&p, i as f64 * dt + 1e-12).unwrap();
            assert!((s.u_o - exact).abs() <= 1e-9 * 100.0, "i={i}");
        }
    }

    #[test]
    fn from_constants_round_trip() {
        let p = CircuitParams::from_constants(2e-9, 0.25, -0.25).unwrap();
        assert!(close(p.c2, 6e-9, 1e-12));
        assert!(close(p.r_leak, 5e8, 1e-12));
    }
}
