//! Series-elastic mechanism: actuator stack under plate B, spring, and the
//! loaded plate A riding on a damped slider.
//!
//! The stack is quasi-static. Within each step its displacement `x_b` is the
//! fixed point of `x_b = play(stack_displacement(P_e(|u|), F_b(x_b)))`, where the
//! stack force `F_b` is the spring force plus the gravity preload of both plates.
//! Plate A obeys `m_a·a = k·(x_b − x_a) − c·v_a + disturbance(t, x_a)` and is
//! integrated with RK4. Positions are measured from the unpowered rest state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::actuator::{ea_pressure, stack_displacement, ActuatorConfig, GRAVITY};
use crate::error::{require_non_negative, require_positive, Error, Result};

/// Largest integration step accepted by [`plant_step`].
pub const MAX_PLANT_DT: f64 = 1e-4;

const FIXED_POINT_ITERATIONS: usize = 50;
const SOLVE_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// Series spring stiffness, N/m.
    pub spring_k: f64,
    /// Slider damping on plate A, N·s/m.
    pub damping_c: f64,
    /// Plate A plus payload, kg.
    pub mass_a: f64,
    /// Plate B, kg.
    pub mass_b: f64,
    /// Log-width of the relative play operator on the stack displacement; 0 disables hysteresis.
    pub play_width: f64,
    /// Displacement sensor noise standard deviation, m.
    pub sensor_noise_sd: f64,
    pub rng_seed: u64,
    /// Replace the spring by a rigid pole (x_a ≡ x_b).
    pub rigid: bool,
}

/// Mass of the slider block carrying plate A, kg.
pub const SLIDER_MASS: f64 = 0.03;
/// Default damping ratio used to derive the slider damping.
pub const DEFAULT_DAMPING_RATIO: f64 = 1.2;

impl Default for PlantParams {
    fn default() -> Self {
        Self::with_payload(0.02)
    }
}

impl PlantParams {
    /// Default mechanism (14 N/m spring) carrying `payload` kg on plate A.
    pub fn with_payload(payload: f64) -> Self {
        let spring_k = 14.0;
        let mass_a = payload + SLIDER_MASS;
        Self {
            spring_k,
            damping_c: damping_for_ratio(DEFAULT_DAMPING_RATIO, spring_k, mass_a),
            mass_a,
            mass_b: SLIDER_MASS,
            play_width: 0.0,
            sensor_noise_sd: 0.0,
            rng_seed: 0,
            rigid: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("spring_k", self.spring_k)?;
        require_non_negative("damping_c", self.damping_c)?;
        require_positive("mass_a", self.mass_a)?;
        require_non_negative("mass_b", self.mass_b)?;
        require_non_negative("play_width", self.play_width)?;
        require_non_negative("sensor_noise_sd", self.sensor_noise_sd)
    }

    /// Force of both plates resting on the stack.
    pub fn preload(&self) -> f64 {
        (self.mass_a + self.mass_b) * GRAVITY
    }

    pub fn damping_ratio(&self) -> f64 {
        self.damping_c / (2.0 * (self.spring_k * self.mass_a).sqrt())
    }
}

/// Viscous damping giving damping ratio `zeta` for a spring-mass pair.
pub fn damping_for_ratio(zeta: f64, spring_k: f64, mass: f64) -> f64 {
    2.0 * zeta * (spring_k * mass).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    /// Plate A displacement (the controlled output), m.
    pub x_a: f64,
    pub v_a: f64,
    /// Stack (plate B) displacement, m.
    pub x_b: f64,
    /// Memory of the play operator (its last output), m.
    pub play_state: f64,
    pub t: f64,
}

/// External forces on plate A.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DisturbanceProfile {
    /// `(t_start, force)` steps; the force (upward positive, N) holds until the next step.
    pub steps: Vec<(f64, f64)>,
    /// `(x_a, resistance)` table, linearly interpolated and clamped at the ends;
    /// resistance (N) pushes plate A down.
    pub resistance: Vec<(f64, f64)>,
}

impl DisturbanceProfile {
    pub fn validate(&self) -> Result<()> {
        for pair in self.steps.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(Error::validation(
                    "disturbance.steps",
                    "start times must be strictly increasing",
                ));
            }
        }
        for pair in self.resistance.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(Error::validation(
                    "disturbance.resistance",
                    "positions must be strictly increasing",
                ));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty() && self.resistance.is_empty()
    }

    pub fn step_force(&self, t: f64) -> f64 {
        self.steps
            .iter()
            .take_while(|(start, _)| *start <= t)
            .last()
            .map_or(0.0, |&(_, f)| f)
    }

    pub fn resistance_at(&self, x: f64) -> f64 {
        let table = &self.resistance;
        match table.len() {
            0 => 0.0,
            1 => table[0].1,
            _ => {
                if x <= table[0].0 {
                    return table[0].1;
                }
                let last = table[table.len() - 1];
                if x >= last.0 {
                    return last.1;
                }
                let i = table.partition_point(|&(xi, _)| xi <= x);
                let (x0, f0) = table[i - 1];
                let (x1, f1) = table[i];
                f0 + (f1 - f0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// Net upward force on plate A.
    pub fn force(&self, t: f64, x_a: f64) -> f64 {
        self.step_force(t) - self.resistance_at(x_a)
    }
}

/// Rate-independent play (backlash) operator.
pub fn play(input: f64, width: f64, state: f64) -> (f64, f64) {
    let output = state.clamp(input - width, input + width);
    (output, output)
}

/// Play operator acting on the logarithm of a non-negative signal:
/// `exp(play(ln input, log_width, ln state))`. Both branches meet at zero
/// input, so an unloaded stack always returns to rest.
pub fn relative_play(input: f64, log_width: f64, state: f64) -> (f64, f64) {
    if log_width == 0.0 {
        return (input, input);
    }
    let output = state.clamp(input * (-log_width).exp(), input * log_width.exp());
    (output, output)
}

/// Mechanism parameters, actuator geometry, and disturbances of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub params: PlantParams,
    pub actuator: ActuatorConfig,
    pub disturbance: DisturbanceProfile,
}

/// Result of one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: PlantState,
    /// Force carried by the stack at the solved `x_b`, N.
    pub stack_force: f64,
    /// Net disturbance force on plate A at the start of the step, N.
    pub disturbance: f64,
}

impl Plant {
    pub fn new(
        params: PlantParams,
        actuator: ActuatorConfig,
        disturbance: DisturbanceProfile,
    ) -> Result<Self> {
        params.validate()?;
        actuator.validate()?;
        disturbance.validate()?;
        Ok(Self {
            params,
            actuator,
            disturbance,
        })
    }

    fn stack_force(&self, state: &PlantState, x_b: f64, disturbance: f64) -> f64 {
        let p = &self.params;
        if p.rigid {
            (p.preload() - disturbance).max(0.0)
        } else {
            (p.spring_k * (x_b - state.x_a) + p.preload()).max(0.0)
        }
    }

    /// Play output of the stack displacement for a trial `x_b`.
    fn stack_map(&self, state: &PlantState, pressure: f64, x_b: f64, disturbance: f64) -> Result<f64> {
        let force = self.stack_force(state, x_b, disturbance);
        let free = stack_displacement(&self.actuator, pressure, force)?;
        Ok(relative_play(free, self.params.play_width, state.play_state).0)
    }

    /// Solves the quasi-static stack displacement for the electrode voltage `voltage`.
    pub fn solve_stack(&self, state: &PlantState, voltage: f64, disturbance: f64) -> Result<f64> {
        let pressure = ea_pressure(&self.actuator.film, voltage.abs())?;
        let map = |x: f64| self.stack_map(state, pressure, x, disturbance);
        if self.params.rigid {
            return map(state.x_b);
        }

        let mut x = state.x_b;
        for _ in 0..FIXED_POINT_ITERATIONS {
            let next = map(x)?;
            if (next - x).abs() <= SOLVE_TOLERANCE {
                return Ok(next);
            }
            x = next;
        }

        // The map is non-increasing in x_b, so g(x) = map(x) − x has a single root.
        let mut lo = 0.0;
        let mut hi = self.actuator.max_stack_displacement().max(state.play_state)
            * (1.0 + self.params.play_width.exp());
        let g_lo = map(lo)? - lo;
        let g_hi = map(hi)? - hi;
        if g_lo < 0.0 || g_hi > 0.0 {
            return Err(Error::Numerical(format!(
                "stack solve failed to bracket at t = {}: state {state:?}, voltage {voltage}",
                state.t
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if map(mid)? - mid > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= SOLVE_TOLERANCE {
                break;
            }
        }
        // Return the image of the bracket so the fixed-point residual stays tiny.
        let x = 0.5 * (lo + hi);
        let image = map(x)?;
        if (image - x).abs() > 1e-9 {
            return Err(Error::Numerical(format!(
                "stack solve residual {} m at t = {}: state {state:?}, voltage {voltage}",
                (image - x).abs(),
                state.t
            )));
        }
        Ok(x)
    }

    /// Advances the mechanism by `dt` with the electrode voltage held at `voltage`.
    pub fn step(&self, state: &PlantState, voltage: f64, dt: f64) -> Result<StepOutcome> {
        if !(dt > 0.0 && dt <= MAX_PLANT_DT) {
            return Err(Error::Configuration(format!(
                "plant step must lie in (0, {MAX_PLANT_DT}] s, got {dt}"
            )));
        }
        let p = &self.params;
        let disturbance = self.disturbance.force(state.t, state.x_a);
        let x_b = self.solve_stack(state, voltage, disturbance)?;
        let stack_force = self.stack_force(state, x_b, disturbance);
        let t = state.t + dt;

        let (x_a, v_a) = if p.rigid {
            (x_b, (x_b - state.x_a) / dt)
        } else {
            let accel = |time: f64, x: f64, v: f64| {
                (p.spring_k * (x_b - x) - p.damping_c * v + self.disturbance.force(time, x)) / p.mass_a
            };
            let (x0, v0, t0) = (state.x_a, state.v_a, state.t);
            let h = dt;
            let k1x = v0;
            let k1v = accel(t0, x0, v0);
            let k2x = v0 + 0.5 * h * k1v;
            let k2v = accel(t0 + 0.5 * h, x0 + 0.5 * h * k1x, k2x);
            let k3x = v0 + 0.5 * h * k2v;
            let k3v = accel(t0 + 0.5 * h, x0 + 0.5 * h * k2x, k3x);
            let k4x = v0 + h * k3v;
            let k4v = accel(t0 + h, x0 + h * k3x, k4x);
            (
                x0 + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
                v0 + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
            )
        };
        if !(x_a.is_finite() && v_a.is_finite()) {
            return Err(Error::Numerical(format!(
                "plate A state diverged at t = {t}: last valid {state:?}"
            )));
        }

        Ok(StepOutcome {
            state: PlantState {
                x_a,
                v_a,
                x_b,
                play_state: x_b,
                t,
            },
            stack_force,
            disturbance,
        })
    }

    /// Rest position of both plates at a constant electrode voltage, with no
    /// disturbance and the given play memory.
    pub fn static_equilibrium(&self, voltage: f64, play_state: f64) -> Result<f64> {
        let pressure = ea_pressure(&self.actuator.film, voltage.abs())?;
        let free = stack_displacement(&self.actuator, pressure, self.params.preload())?;
        Ok(relative_play(free, self.params.play_width, play_state).0)
    }

    /// Total mechanical energy of plate A relative to its spring rest point.
    pub fn plate_energy(&self, state: &PlantState) -> f64 {
        let p = &self.params;
        0.5 * p.mass_a * state.v_a * state.v_a + 0.5 * p.spring_k * (state.x_b - state.x_a).powi(2)
    }
}

/// Free-function form of [`Plant::step`].
pub fn plant_step(
    params: &PlantParams,
    state: &PlantState,
    applied_voltage: f64,
    actuator: &ActuatorConfig,
    dt: f64,
) -> Result<PlantState> {
    let plant = Plant::new(*params, *actuator, DisturbanceProfile::default())?;
    Ok(plant.step(state, applied_voltage, dt)?.state)
}

/// Laser displacement sensor with seeded Gaussian noise on plate A.
#[derive(Debug, Clone)]
pub struct Sensor {
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
}

impl Sensor {
    pub fn new(params: &PlantParams) -> Result<Self> {
        require_non_negative("sensor_noise_sd", params.sensor_noise_sd)?;
        let noise = if params.sensor_noise_sd > 0.0 {
            Some(
                Normal::new(0.0, params.sensor_noise_sd)
                    .map_err(|e| Error::validation("sensor_noise_sd", e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(params.rng_seed),
            noise,
        })
    }

    pub fn sample(&mut self, state: &PlantState) -> f64 {
        match &self.noise {
            Some(normal) => state.x_a + normal.sample(&mut self.rng),
            None => state.x_a,
        }
    }
}

/// One-shot form of [`Sensor::sample`].
pub fn sample_sensor(sensor: &mut Sensor, state: &PlantState) -> f64 {
    sensor.sample(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plant(params: PlantParams) -> Plant {
        Plant::new(params, ActuatorConfig::default(), DisturbanceProfile::default()).unwrap()
    }

    #[test]
    fn rest_state_is_equilibrium() {
        let plant = plant(PlantParams::default());
        let mut state = PlantState::default();
        for _ in 0..10_000 {
            state = plant.step(&state, 0.0, 1e-4).unwrap().state;
        }
        assert_eq!(state.x_a, 0.0);
        assert_eq!(state.x_b, 0.0);
        assert_eq!(state.v_a, 0.0);
    }

    #[test]
    fn play_operator_definition() {
        assert_eq!(play(0.3, 0.0, 7.0), (0.3, 0.3));
        // ramp up by 2w then down by 2w
        let w = 0.1;
        let mut state = 0.0;
        let mut up = Vec::new();
        for i in 0..=20 {
            let (out, s) = play(i as f64 * 0.01, w, state);
            state = s;
            up.push(out);
        }
        assert!((up[20] - (0.2 - w)).abs() < 1e-12);
        let (out, _) = play(0.0, w, state);
        assert!((out - w).abs() < 1e-12);
    }

    #[test]
    fn relative_play_is_play_in_log_space() {
        let w = 0.2;
        let mut state = 1e-3;
        for &input in &[2e-3, 5e-3, 4e-3, 1e-3, 3e-3] {
            let (rel, next) = relative_play(input, w, state);
            let (log_out, _) = play(f64::ln(input), w, f64::ln(state));
            assert!((rel.ln() - log_out).abs() < 1e-12);
            state = next;
        }
        assert_eq!(relative_play(0.0, w, 5.0).0, 0.0);
    }

    #[test]
    fn rigid_mode_tracks_stack() {
        let plant = plant(PlantParams {
            rigid: true,
            ..Default::default()
        });
        let mut state = PlantState::default();
        for i in 0..5_000 {
            let u = if i < 2_500 { 3000.0 } else { 2000.0 };
            state = plant.step(&state, u, 1e-4).unwrap().state;
            assert_eq!(state.x_a, state.x_b);
        }
    }

    #[test]
    fn stack_never_negative_and_fixed_point_holds() {
        let params = PlantParams {
            play_width: 0.18,
            ..Default::default()
        };
        let plant = plant(params);
        let mut state = PlantState::default();
        for i in 0..20_000 {
            let u = 600.0 * (1.0 + (i as f64 * 1e-3).sin());
            let prev = state;
            let out = plant.step(&prev, u, 1e-4).unwrap();
            state = out.state;
            assert!(state.x_b >= 0.0);
            assert!(out.stack_force >= 0.0);
            let p = ea_pressure(&plant.actuator.film, u).unwrap();
            let image = relative_play(
                stack_displacement(&plant.actuator, p, out.stack_force).unwrap(),
                params.play_width,
                prev.play_state,
            )
            .0;
            assert!((image - state.x_b).abs() <= 1e-9);
        }
    }

    #[test]
    fn energy_decays_without_drive() {
        let plant = plant(PlantParams::default());
        let mut state = PlantState {
            x_a: 0.002,
            ..Default::default()
        };
        let mut energy = plant.plate_energy(&state);
        for _ in 0..20_000 {
            state = plant.step(&state, 0.0, 1e-4).unwrap().state;
            let e = plant.plate_energy(&state);
            assert!(e <= energy + 1e-15);
            energy = e;
        }
    }

    #[test]
    fn step_guard() {
        let plant = plant(PlantParams::default());
        assert!(matches!(
            plant.step(&PlantState::default(), 0.0, 2e-4),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn disturbance_lookup() {
        let d = DisturbanceProfile {
            steps: vec![(1.0, -0.5), (2.0, 0.0)],
            resistance: vec![(0.0, 0.0), (0.002, 1.0)],
        };
        assert_eq!(d.step_force(0.5), 0.0);
        assert_eq!(d.step_force(1.5), -0.5);
        assert_eq!(d.step_force(3.0), 0.0);
        assert!((d.resistance_at(0.001) - 0.5).abs() < 1e-12);
        assert_eq!(d.resistance_at(0.01), 1.0);
        let bad = DisturbanceProfile {
            steps: vec![(1.0, 0.0), (1.0, 1.0)],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sensor_noise() {
        let state = PlantState {
            x_a: 0.004,
            ..Default::default()
        };
        let mut exact = Sensor::new(&PlantParams::default()).unwrap();
        assert_eq!(exact.sample(&state), 0.004);

        let noisy = PlantParams {
            sensor_noise_sd: 1e-5,
            rng_seed: 7,
            ..Default::default()
        };
        let mut a = Sensor::new(&noisy).unwrap();
        let mut b = Sensor::new(&noisy).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| sample_sensor(&mut a, &state)).collect();
        for &x in xs.iter().take(100) {
            assert_eq!(x, b.sample(&state));
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var.sqrt() - 1e-5).abs() < 0.05 * 1e-5);
    }
}
