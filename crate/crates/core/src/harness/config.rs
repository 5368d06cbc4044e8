//! Scenario configuration and its text format.
//!
//! ```text
//! # comment
//! [scenario]
//! kind = TRACK
//! duration = 4e1
//!
//! [plant]
//! spring_k = 1.4e1
//! ```
//!
//! Sections and keys are fixed; unknown ones are errors. Every key is optional
//! except `scenario.kind` and `scenario.duration`; omitted keys take the
//! defaults of the scenario kind. Values are SI units. Lists are
//! comma-separated; pairs are written `a:b`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use crate::actuator::{ActuatorConfig, FilmInterface};
use crate::circuit::CircuitParams;
use crate::control::{IntegralTimeBase, PiGains};
use crate::error::{Error, Result};
use crate::plant::{DisturbanceProfile, PlantParams, MAX_PLANT_DT, SLIDER_MASS};

use super::crank::CrankSlider;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    DcDecay,
    AcHold,
    FreqSweep,
    HysteresisSweep,
    Track,
    Impact,
    Isolation,
    Rotary,
    Biopsy,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 9] = [
        ScenarioKind::DcDecay,
        ScenarioKind::AcHold,
        ScenarioKind::FreqSweep,
        ScenarioKind::HysteresisSweep,
        ScenarioKind::Track,
        ScenarioKind::Impact,
        ScenarioKind::Isolation,
        ScenarioKind::Rotary,
        ScenarioKind::Biopsy,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::DcDecay => "DC_DECAY",
            ScenarioKind::AcHold => "AC_HOLD",
            ScenarioKind::FreqSweep => "FREQ_SWEEP",
            ScenarioKind::HysteresisSweep => "HYSTERESIS_SWEEP",
            ScenarioKind::Track => "TRACK",
            ScenarioKind::Impact => "IMPACT",
            ScenarioKind::Isolation => "ISOLATION",
            ScenarioKind::Rotary => "ROTARY",
            ScenarioKind::Biopsy => "BIOPSY",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Scenarios driven by the PI loop.
    pub fn is_closed_loop(&self) -> bool {
        matches!(
            self,
            ScenarioKind::Track | ScenarioKind::Impact | ScenarioKind::Rotary | ScenarioKind::Biopsy
        )
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveKind {
    Dc,
    AcSquare,
}

impl DriveKind {
    fn as_str(&self) -> &'static str {
        match self {
            DriveKind::Dc => "DC",
            DriveKind::AcSquare => "AC_SQUARE",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "DC" => Some(DriveKind::Dc),
            "AC_SQUARE" => Some(DriveKind::AcSquare),
            _ => None,
        }
    }
}

/// Terminal waveform. Open-loop scenarios use `magnitude`; closed-loop ones take
/// the magnitude from the controller and only use the wave kind and frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    pub wave: DriveKind,
    /// Volts.
    pub magnitude: f64,
    /// Hz, AC only.
    pub frequency: f64,
}

impl Default for DriveSpec {
    fn default() -> Self {
        Self {
            wave: DriveKind::AcSquare,
            magnitude: 6000.0,
            frequency: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetWave {
    Constant,
    /// Starts at `offset + amplitude` and alternates with `offset − amplitude`.
    Square,
    Sine,
    /// Piecewise constant table of `(t_start, value)`.
    Steps,
}

impl TargetWave {
    fn as_str(&self) -> &'static str {
        match self {
            TargetWave::Constant => "CONSTANT",
            TargetWave::Square => "SQUARE",
            TargetWave::Sine => "SINE",
            TargetWave::Steps => "STEPS",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "CONSTANT" => Some(TargetWave::Constant),
            "SQUARE" => Some(TargetWave::Square),
            "SINE" => Some(TargetWave::Sine),
            "STEPS" => Some(TargetWave::Steps),
            _ => None,
        }
    }
}

/// Displacement setpoint for plate A.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub wave: TargetWave,
    /// m.
    pub amplitude: f64,
    /// m.
    pub offset: f64,
    /// Hz.
    pub frequency: f64,
    pub steps: Vec<(f64, f64)>,
}

impl Default for TargetSpec {
    fn default() -> Self {
        Self {
            wave: TargetWave::Constant,
            amplitude: 0.0,
            offset: 0.0,
            frequency: 0.05,
            steps: Vec::new(),
        }
    }
}

impl TargetSpec {
    pub fn value(&self, t: f64) -> f64 {
        match self.wave {
            TargetWave::Constant => self.offset,
            TargetWave::Square => {
                let half_periods = (2.0 * self.frequency * t).floor();
                if half_periods.rem_euclid(2.0) == 0.0 {
                    self.offset + self.amplitude
                } else {
                    self.offset - self.amplitude
                }
            }
            TargetWave::Sine => {
                self.offset + self.amplitude * (2.0 * std::f64::consts::PI * self.frequency * t).sin()
            }
            TargetWave::Steps => self
                .steps
                .iter()
                .take_while(|(start, _)| *start <= t)
                .last()
                .map_or(0.0, |&(_, v)| v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Drive frequencies for FREQ_SWEEP, Hz.
    pub frequencies: Vec<f64>,
    /// Payloads on plate A for FREQ_SWEEP, kg.
    pub loads: Vec<f64>,
    /// Peak drive magnitude for HYSTERESIS_SWEEP, V.
    pub v_max: f64,
    /// Magnitude increments per sweep direction.
    pub steps: u32,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            frequencies: vec![0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0],
            loads: vec![0.05, 0.08, 0.13],
            v_max: 8000.0,
            steps: 80,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSpec {
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Simulated time, s.
    pub duration: f64,
    /// Trace sampling interval, s.
    pub record_dt: f64,
    /// Mechanical integration step, s.
    pub plant_dt: f64,
    /// Start of the metrics window, s.
    pub window_start: f64,
    pub circuit: CircuitParams,
    pub actuator: ActuatorConfig,
    pub plant: PlantParams,
    pub controller: PiGains,
    pub drive: DriveSpec,
    pub target: TargetSpec,
    pub disturbance: DisturbanceProfile,
    pub sweep: SweepSpec,
    pub crank: CrankSlider,
    pub output: OutputSpec,
}

/// Log-width of the relative play operator that gives a 30 % ratio of maximum
/// hysteresis strain to maximum output strain, `−ln(0.7)/2`. On a sweep the
/// rising branch is `s·e^{−w}`, so the ratio is `1 − e^{−2w}` in the limit of
/// fine magnitude steps; `calibrate_play_width` converges to this value.
pub const DEFAULT_PLAY_WIDTH: f64 = 0.178_337;

/// PI gains used by the closed-loop scenarios.
pub fn default_gains() -> PiGains {
    PiGains {
        kp: 1.0e5,
        ki: 3.0e5,
        cycle_dt: 1e-3,
        u_min: 0.0,
        u_max: 8000.0,
        time_base: IntegralTimeBase::Seconds,
    }
}

impl ScenarioConfig {
    /// Defaults for a scenario kind, matching the corresponding bench experiment.
    pub fn default_for(kind: ScenarioKind) -> Self {
        let mut config = Self {
            kind,
            duration: 10.0,
            record_dt: 1e-3,
            plant_dt: 1e-4,
            window_start: 0.0,
            circuit: CircuitParams::default(),
            actuator: ActuatorConfig::default(),
            plant: PlantParams::with_payload(0.05),
            controller: default_gains(),
            drive: DriveSpec::default(),
            target: TargetSpec::default(),
            disturbance: DisturbanceProfile::default(),
            sweep: SweepSpec::default(),
            crank: CrankSlider::default(),
            output: OutputSpec::default(),
        };
        match kind {
            ScenarioKind::DcDecay => {
                config.duration = 80.0;
                config.actuator.stack_count = 3;
                config.actuator.film.single_thickness = 25e-6;
                config.plant = PlantParams {
                    rigid: true,
                    ..PlantParams::with_payload(0.02)
                };
                config.drive = DriveSpec {
                    wave: DriveKind::Dc,
                    ..DriveSpec::default()
                };
            }
            ScenarioKind::AcHold | ScenarioKind::FreqSweep => {
                config.duration = 65.0;
                config.window_start = 60.0;
                config.plant = PlantParams {
                    rigid: true,
                    ..PlantParams::with_payload(0.05)
                };
            }
            ScenarioKind::HysteresisSweep => {
                config.plant = PlantParams {
                    play_width: DEFAULT_PLAY_WIDTH,
                    ..PlantParams::with_payload(0.06)
                };
            }
            ScenarioKind::Isolation => {
                config.duration = 65.0;
                config.window_start = 60.0;
                config.plant = PlantParams::with_payload(0.02);
            }
            ScenarioKind::Track => {
                config.duration = 40.0;
                config.window_start = 20.0;
                config.plant.play_width = DEFAULT_PLAY_WIDTH;
                config.target = TargetSpec {
                    wave: TargetWave::Square,
                    amplitude: 0.002,
                    offset: 0.004,
                    frequency: 0.05,
                    steps: Vec::new(),
                };
            }
            ScenarioKind::Impact => {
                config.duration = 12.0;
                config.plant.play_width = DEFAULT_PLAY_WIDTH;
                config.target = TargetSpec {
                    offset: 0.005,
                    ..TargetSpec::default()
                };
                config.disturbance.steps = vec![(4.0, -0.05 * crate::actuator::GRAVITY), (8.0, 0.0)];
            }
            ScenarioKind::Rotary => {
                config.duration = 40.0;
                config.plant.play_width = DEFAULT_PLAY_WIDTH;
                config.target = TargetSpec {
                    wave: TargetWave::Steps,
                    steps: vec![
                        (0.0, 0.0),
                        (2.0, 0.002),
                        (6.0, 0.004),
                        (10.0, 0.006),
                        (14.0, 0.008),
                        (20.0, 0.006),
                        (24.0, 0.004),
                        (28.0, 0.002),
                        (32.0, 0.0),
                    ],
                    ..TargetSpec::default()
                };
            }
            ScenarioKind::Biopsy => {
                config.duration = 20.0;
                config.plant.play_width = DEFAULT_PLAY_WIDTH;
                config.target = TargetSpec {
                    wave: TargetWave::Steps,
                    steps: vec![(0.0, 0.0), (2.0, 0.002), (8.0, 0.0035), (14.0, 0.0)],
                    ..TargetSpec::default()
                };
                // Muscle layer, air gap, then liver.
                config.disturbance.resistance = vec![
                    (0.0, 0.0),
                    (0.0005, 0.15),
                    (0.0024, 0.15),
                    (0.0025, 0.0),
                    (0.0029, 0.0),
                    (0.003, 0.08),
                    (0.005, 0.08),
                ];
            }
        }
        config
    }

    /// Checks every field and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        let mut check = |ok: bool, field: &str, msg: &str| {
            if !ok {
                errors.push(format!("{field}: {msg}"));
            }
        };
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();

        check(pos(self.duration), "scenario.duration", "must be > 0");
        check(pos(self.record_dt), "scenario.record_dt", "must be > 0");
        check(
            pos(self.plant_dt) && self.plant_dt <= MAX_PLANT_DT,
            "scenario.plant_dt",
            "must lie in (0, 1e-4]",
        );
        if pos(self.plant_dt) && pos(self.record_dt) {
            check(
                is_multiple(self.record_dt, self.plant_dt),
                "scenario.record_dt",
                "must be a whole multiple of plant_dt",
            );
        }
        check(nonneg(self.window_start), "scenario.window_start", "must be >= 0");
        check(
            self.window_start < self.duration,
            "scenario.window_start",
            "must be earlier than duration",
        );

        check(pos(self.circuit.c1), "circuit.c1", "must be > 0");
        check(pos(self.circuit.c2), "circuit.c2", "must be > 0");
        check(self.circuit.r_leak > 0.0, "circuit.r_leak", "must be > 0");

        let a = &self.actuator;
        check(pos(a.width), "actuator.width", "must be > 0");
        check(pos(a.oil_volume), "actuator.oil_volume", "must be > 0");
        check(
            a.film.eps_rel >= 1.0 && a.film.eps_rel.is_finite(),
            "actuator.film_eps_rel",
            "must be >= 1",
        );
        check(
            pos(a.film.single_thickness),
            "actuator.film_thickness",
            "must be > 0",
        );
        check(a.stack_count >= 1, "actuator.stack_count", "must be >= 1");
        check(pos(a.cell_height), "actuator.cell_height", "must be > 0");

        let p = &self.plant;
        check(pos(p.spring_k), "plant.spring_k", "must be > 0");
        check(nonneg(p.damping_c), "plant.damping_c", "must be >= 0");
        check(pos(p.mass_a), "plant.mass_a", "must be > 0");
        check(nonneg(p.mass_b), "plant.mass_b", "must be >= 0");
        check(nonneg(p.play_width), "plant.play_width", "must be >= 0");
        check(nonneg(p.sensor_noise_sd), "plant.sensor_noise_sd", "must be >= 0");

        let g = &self.controller;
        check(nonneg(g.kp), "controller.kp", "must be >= 0");
        check(nonneg(g.ki), "controller.ki", "must be >= 0");
        check(pos(g.cycle_dt), "controller.cycle_dt", "must be > 0");
        check(pos(g.u_max), "controller.u_max", "must be > 0");
        if pos(g.cycle_dt) && pos(self.plant_dt) {
            check(
                is_multiple(g.cycle_dt, self.plant_dt),
                "controller.cycle_dt",
                "must be a whole multiple of plant_dt",
            );
        }

        check(nonneg(self.drive.magnitude), "drive.magnitude", "must be >= 0");
        if self.drive.wave == DriveKind::AcSquare {
            check(pos(self.drive.frequency), "drive.frequency", "must be > 0");
        }

        if self.kind.is_closed_loop() {
            match self.target.wave {
                TargetWave::Square | TargetWave::Sine => {
                    check(pos(self.target.frequency), "target.frequency", "must be > 0")
                }
                TargetWave::Steps => check(
                    !self.target.steps.is_empty(),
                    "target.steps",
                    "must list at least one step",
                ),
                TargetWave::Constant => {}
            }
            check(
                self.target.steps.windows(2).all(|w| w[1].0 > w[0].0),
                "target.steps",
                "start times must be strictly increasing",
            );
        }
        check(
            self.disturbance.steps.windows(2).all(|w| w[1].0 > w[0].0),
            "disturbance.steps",
            "start times must be strictly increasing",
        );
        check(
            self.disturbance.resistance.windows(2).all(|w| w[1].0 > w[0].0),
            "disturbance.resistance",
            "positions must be strictly increasing",
        );

        match self.kind {
            ScenarioKind::FreqSweep => {
                check(
                    !self.sweep.frequencies.is_empty(),
                    "sweep.frequencies",
                    "must not be empty",
                );
                check(
                    self.sweep.frequencies.iter().all(|&f| (0.1..=10.0).contains(&f)),
                    "sweep.frequencies",
                    "must lie within [0.1, 10] Hz",
                );
                check(!self.sweep.loads.is_empty(), "sweep.loads", "must not be empty");
                check(
                    self.sweep.loads.iter().all(|&m| nonneg(m)),
                    "sweep.loads",
                    "must be >= 0",
                );
            }
            ScenarioKind::HysteresisSweep => {
                check(pos(self.sweep.v_max), "sweep.v_max", "must be > 0");
                check(self.sweep.steps >= 2, "sweep.steps", "must be >= 2");
            }
            _ => {}
        }

        let c = &self.crank;
        check(pos(c.crank_radius), "crank.crank_radius", "must be > 0");
        check(
            c.rod_length > c.crank_radius,
            "crank.rod_length",
            "must exceed crank_radius",
        );
        check(
            (0.0..std::f64::consts::PI).contains(&c.zero_angle),
            "crank.zero_angle",
            "must lie in [0, π)",
        );

        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Parses and validates; syntax, key, and field errors are reported together.
    pub fn parse(text: &str) -> Result<Self> {
        let doc = Document::parse(text)?;
        let (config, mut errors) = Self::read_document(&doc)?;
        if let Err(Error::Config(invalid)) = config.validate() {
            errors.extend(invalid);
        }
        if errors.is_empty() {
            Ok(config)
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Interprets a document without validating field values.
    pub fn from_document(doc: &Document) -> Result<Self> {
        let (config, errors) = Self::read_document(doc)?;
        if errors.is_empty() {
            Ok(config)
        } else {
            Err(Error::Config(errors))
        }
    }

    fn read_document(doc: &Document) -> Result<(Self, Vec<String>)> {
        let mut errors = Vec::new();
        let kind = match doc.get("scenario", "kind") {
            Some(v) => match ScenarioKind::parse(v) {
                Some(k) => Some(k),
                None => {
                    errors.push(format!("scenario.kind: unknown scenario `{v}`"));
                    None
                }
            },
            None => {
                errors.push("scenario.kind: required".to_owned());
                None
            }
        };
        if doc.get("scenario", "duration").is_none() {
            errors.push("scenario.duration: required".to_owned());
        }
        let Some(kind) = kind else {
            return Err(Error::Config(errors));
        };

        let mut c = Self::default_for(kind);
        let mut r = Reader { doc, errors };
        r.f64("scenario", "duration", &mut c.duration);
        r.f64("scenario", "record_dt", &mut c.record_dt);
        r.f64("scenario", "plant_dt", &mut c.plant_dt);
        r.f64("scenario", "window_start", &mut c.window_start);

        r.f64("circuit", "c1", &mut c.circuit.c1);
        r.f64("circuit", "c2", &mut c.circuit.c2);
        r.f64("circuit", "r_leak", &mut c.circuit.r_leak);

        r.f64("actuator", "width", &mut c.actuator.width);
        r.f64("actuator", "oil_volume", &mut c.actuator.oil_volume);
        r.f64("actuator", "film_eps_rel", &mut c.actuator.film.eps_rel);
        r.f64(
            "actuator",
            "film_thickness",
            &mut c.actuator.film.single_thickness,
        );
        r.parsed("actuator", "stack_count", &mut c.actuator.stack_count);
        r.f64("actuator", "cell_height", &mut c.actuator.cell_height);

        r.f64("plant", "spring_k", &mut c.plant.spring_k);
        r.f64("plant", "damping_c", &mut c.plant.damping_c);
        r.f64("plant", "mass_a", &mut c.plant.mass_a);
        r.f64("plant", "mass_b", &mut c.plant.mass_b);
        r.f64("plant", "play_width", &mut c.plant.play_width);
        r.f64("plant", "sensor_noise_sd", &mut c.plant.sensor_noise_sd);
        r.parsed("plant", "rng_seed", &mut c.plant.rng_seed);
        r.parsed("plant", "rigid", &mut c.plant.rigid);

        r.f64("controller", "kp", &mut c.controller.kp);
        r.f64("controller", "ki", &mut c.controller.ki);
        r.f64("controller", "cycle_dt", &mut c.controller.cycle_dt);
        r.f64("controller", "u_max", &mut c.controller.u_max);
        r.with(
            "controller",
            "integral_time_base",
            &mut c.controller.time_base,
            IntegralTimeBase::parse,
            "seconds|cycles",
        );

        r.with(
            "drive",
            "wave",
            &mut c.drive.wave,
            DriveKind::parse,
            "DC|AC_SQUARE",
        );
        r.f64("drive", "magnitude", &mut c.drive.magnitude);
        r.f64("drive", "frequency", &mut c.drive.frequency);

        r.with(
            "target",
            "wave",
            &mut c.target.wave,
            TargetWave::parse,
            "CONSTANT|SQUARE|SINE|STEPS",
        );
        r.f64("target", "amplitude", &mut c.target.amplitude);
        r.f64("target", "offset", &mut c.target.offset);
        r.f64("target", "frequency", &mut c.target.frequency);
        r.pairs("target", "steps", &mut c.target.steps);

        r.pairs("disturbance", "steps", &mut c.disturbance.steps);
        r.pairs("disturbance", "resistance", &mut c.disturbance.resistance);

        r.list("sweep", "frequencies", &mut c.sweep.frequencies);
        r.list("sweep", "loads", &mut c.sweep.loads);
        r.f64("sweep", "v_max", &mut c.sweep.v_max);
        r.parsed("sweep", "steps", &mut c.sweep.steps);

        r.f64("crank", "crank_radius", &mut c.crank.crank_radius);
        r.f64("crank", "rod_length", &mut c.crank.rod_length);
        r.f64("crank", "zero_angle", &mut c.crank.zero_angle);

        if let Some(v) = doc.get("output", "trace") {
            c.output.trace = Some(PathBuf::from(v));
        }
        if let Some(v) = doc.get("output", "report") {
            c.output.report = Some(PathBuf::from(v));
        }

        // A kind's default window may not fit a shortened run.
        if doc.get("scenario", "window_start").is_none() && c.window_start >= c.duration {
            c.window_start = 0.0;
        }

        let mut errors = r.errors;
        errors.extend(doc.unknown_keys());
        Ok((c, errors))
    }

    /// Serializes every field; parsing the result yields an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = |name: &str, entries: Vec<(&str, String)>| {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "[{name}]");
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {v}");
            }
        };
        let f = |v: f64| format!("{v:e}");
        let list = |vs: &[f64]| vs.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(", ");
        let pairs = |ps: &[(f64, f64)]| {
            ps.iter()
                .map(|(a, b)| format!("{a:e}:{b:e}"))
                .collect::<Vec<_>>()
                .join(", ")
        };

        section(
            "scenario",
            vec![
                ("kind", self.kind.to_string()),
                ("duration", f(self.duration)),
                ("record_dt", f(self.record_dt)),
                ("plant_dt", f(self.plant_dt)),
                ("window_start", f(self.window_start)),
            ],
        );
        section(
            "circuit",
            vec![
                ("c1", f(self.circuit.c1)),
                ("c2", f(self.circuit.c2)),
                ("r_leak", f(self.circuit.r_leak)),
            ],
        );
        let a = &self.actuator;
        section(
            "actuator",
            vec![
                ("width", f(a.width)),
                ("oil_volume", f(a.oil_volume)),
                ("film_eps_rel", f(a.film.eps_rel)),
                ("film_thickness", f(a.film.single_thickness)),
                ("stack_count", a.stack_count.to_string()),
                ("cell_height", f(a.cell_height)),
            ],
        );
        let p = &self.plant;
        section(
            "plant",
            vec![
                ("spring_k", f(p.spring_k)),
                ("damping_c", f(p.damping_c)),
                ("mass_a", f(p.mass_a)),
                ("mass_b", f(p.mass_b)),
                ("play_width", f(p.play_width)),
                ("sensor_noise_sd", f(p.sensor_noise_sd)),
                ("rng_seed", p.rng_seed.to_string()),
                ("rigid", p.rigid.to_string()),
            ],
        );
        let g = &self.controller;
        section(
            "controller",
            vec![
                ("kp", f(g.kp)),
                ("ki", f(g.ki)),
                ("cycle_dt", f(g.cycle_dt)),
                ("u_max", f(g.u_max)),
                ("integral_time_base", g.time_base.as_str().to_owned()),
            ],
        );
        section(
            "drive",
            vec![
                ("wave", self.drive.wave.as_str().to_owned()),
                ("magnitude", f(self.drive.magnitude)),
                ("frequency", f(self.drive.frequency)),
            ],
        );
        section(
            "target",
            vec![
                ("wave", self.target.wave.as_str().to_owned()),
                ("amplitude", f(self.target.amplitude)),
                ("offset", f(self.target.offset)),
                ("frequency", f(self.target.frequency)),
                ("steps", pairs(&self.target.steps)),
            ],
        );
        section(
            "disturbance",
            vec![
                ("steps", pairs(&self.disturbance.steps)),
                ("resistance", pairs(&self.disturbance.resistance)),
            ],
        );
        section(
            "sweep",
            vec![
                ("frequencies", list(&self.sweep.frequencies)),
                ("loads", list(&self.sweep.loads)),
                ("v_max", f(self.sweep.v_max)),
                ("steps", self.sweep.steps.to_string()),
            ],
        );
        section(
            "crank",
            vec![
                ("crank_radius", f(self.crank.crank_radius)),
                ("rod_length", f(self.crank.rod_length)),
                ("zero_angle", f(self.crank.zero_angle)),
            ],
        );
        let mut output = Vec::new();
        if let Some(p) = &self.output.trace {
            output.push(("trace", p.display().to_string()));
        }
        if let Some(p) = &self.output.report {
            output.push(("report", p.display().to_string()));
        }
        if !output.is_empty() {
            section("output", output);
        }
        out
    }

    /// Plant parameters with `payload` kg on plate A.
    pub fn plant_with_payload(&self, payload: f64) -> PlantParams {
        let mut plant = self.plant;
        let zeta = plant.damping_ratio();
        plant.mass_a = payload + SLIDER_MASS;
        plant.damping_c = crate::plant::damping_for_ratio(zeta, plant.spring_k, plant.mass_a);
        plant
    }

    pub fn film(&self) -> FilmInterface {
        self.actuator.film
    }
}

fn is_multiple(value: f64, step: f64) -> bool {
    let ratio = value / step;
    ratio >= 1.0 - 1e-9 && (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0)
}

/// Parsed `[section]` / `key = value` text, before interpretation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    entries: BTreeMap<(String, String), (usize, String)>,
}

const KNOWN: &[(&str, &[&str])] = &[
    (
        "scenario",
        &["kind", "duration", "record_dt", "plant_dt", "window_start"],
    ),
    ("circuit", &["c1", "c2", "r_leak"]),
    (
        "actuator",
        &[
            "width",
            "oil_volume",
            "film_eps_rel",
            "film_thickness",
            "stack_count",
            "cell_height",
        ],
    ),
    (
        "plant",
        &[
            "spring_k",
            "damping_c",
            "mass_a",
            "mass_b",
            "play_width",
            "sensor_noise_sd",
            "rng_seed",
            "rigid",
        ],
    ),
    (
        "controller",
        &["kp", "ki", "cycle_dt", "u_max", "integral_time_base"],
    ),
    ("drive", &["wave", "magnitude", "frequency"]),
    ("target", &["wave", "amplitude", "offset", "frequency", "steps"]),
    ("disturbance", &["steps", "resistance"]),
    ("sweep", &["frequencies", "loads", "v_max", "steps"]),
    ("crank", &["crank_radius", "rod_length", "zero_angle"]),
    ("output", &["trace", "report"]),
];

impl Document {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Document::default();
        let mut errors = Vec::new();
        let mut section: Option<String> = None;
        for (number, raw) in text.lines().enumerate() {
            let number = number + 1;
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                match rest.strip_suffix(']') {
                    Some(name) if !name.trim().is_empty() => {
                        section = Some(name.trim().to_owned());
                    }
                    _ => errors.push(format!("line {number}: malformed section header `{line}`")),
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {number}: expected `key = value`, got `{line}`"));
                continue;
            };
            let Some(sec) = &section else {
                errors.push(format!("line {number}: key `{}` outside any section", key.trim()));
                continue;
            };
            let slot = (sec.clone(), key.trim().to_owned());
            if let Some((first, _)) = doc.entries.get(&slot) {
                errors.push(format!(
                    "line {number}: duplicate key {}.{} (first on line {first})",
                    slot.0, slot.1
                ));
                continue;
            }
            doc.entries.insert(slot, (number, value.trim().to_owned()));
        }
        if errors.is_empty() {
            Ok(doc)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entries
            .get(&(section.to_owned(), key.to_owned()))
            .map(|(_, v)| v.as_str())
    }

    fn unknown_keys(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|((section, key), _)| {
                !KNOWN
                    .iter()
                    .any(|(s, keys)| s == section && keys.contains(&key.as_str()))
            })
            .map(|((section, key), (line, _))| format!("line {line}: unknown key {section}.{key}"))
            .collect()
    }
}

struct Reader<'a> {
    doc: &'a Document,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn with<T>(
        &mut self,
        section: &str,
        key: &str,
        slot: &mut T,
        parse: impl Fn(&str) -> Option<T>,
        expected: &str,
    ) {
        if let Some(raw) = self.doc.get(section, key) {
            match parse(raw) {
                Some(v) => *slot = v,
                None => self
                    .errors
                    .push(format!("{section}.{key}: expected {expected}, got `{raw}`")),
            }
        }
    }

    fn f64(&mut self, section: &str, key: &str, slot: &mut f64) {
        self.with(section, key, slot, |s| s.parse().ok(), "a number");
    }

    fn parsed<T: std::str::FromStr>(&mut self, section: &str, key: &str, slot: &mut T) {
        self.with(
            section,
            key,
            slot,
            |s| s.parse().ok(),
            "a value of the right type",
        );
    }

    fn list(&mut self, section: &str, key: &str, slot: &mut Vec<f64>) {
        self.with(
            section,
            key,
            slot,
            parse_list,
            "a comma-separated list of numbers",
        );
    }

    fn pairs(&mut self, section: &str, key: &str, slot: &mut Vec<(f64, f64)>) {
        self.with(
            section,
            key,
            slot,
            parse_pairs,
            "a comma-separated list of a:b pairs",
        );
    }
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    if s.trim().is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(|v| v.trim().parse().ok()).collect()
}

fn parse_pairs(s: &str) -> Option<Vec<(f64, f64)>> {
    if s.trim().is_empty() {
        return Some(Vec::new());
    }
    s.split(',')
        .map(|pair| {
            let (a, b) = pair.split_once(':')?;
            Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
        })
        .collect()
}
