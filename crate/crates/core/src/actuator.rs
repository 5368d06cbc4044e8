//! Quasi-static displacement of a stacked electrohydraulic actuator.
//!
//! Each cell is a liquid-filled pouch of width `L0` holding oil volume `V0`.
//! Zipping electrodes pressurize the liquid to `P_e`; the free bulge of height
//! `H` carries the load over a contact length `S`:
//!
//! ```text
//! volume:  (H·S + π·H²/4)·L0 = V0
//! force:   L0·P_e·S = F
//! ```
//!
//! Eliminating `S` gives `π·H²/4 + (F/(L0·P_e))·H − V0/L0 = 0`, whose positive
//! root is the cell displacement. Cells are stacked in series, so every cell
//! carries the same force and displacements add.

use std::f64::consts::PI;

use crate::error::{require_non_negative, require_positive, Error, Result};

/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854e-12;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;

/// Dielectric shell of the pouch where the electrodes zip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilmInterface {
    /// Relative permittivity of the film.
    pub eps_rel: f64,
    /// Thickness of one film layer, meters. The zipped interface is two layers.
    pub single_thickness: f64,
}

impl FilmInterface {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_rel >= 1.0) || !self.eps_rel.is_finite() {
            return Err(Error::validation(
                "film_eps_rel",
                format!("must be >= 1, got {}", self.eps_rel),
            ));
        }
        require_positive("film_thickness", self.single_thickness)
    }

    /// Total dielectric thickness of the zipped double fold.
    pub fn zipped_thickness(&self) -> f64 {
        2.0 * self.single_thickness
    }
}

/// Parallel-plate electrostatic adhesion pad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EaPad {
    pub eps_rel: f64,
    /// Electrode gap, meters.
    pub gap: f64,
    /// Electrode overlap area, square meters.
    pub area: f64,
}

impl EaPad {
    pub fn validate(&self) -> Result<()> {
        require_positive("eps_rel", self.eps_rel)?;
        require_positive("gap", self.gap)?;
        require_positive("area", self.area)
    }
}

/// Geometry of an actuator stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorConfig {
    /// Pouch width `L0`, meters.
    pub width: f64,
    /// Liquid volume per cell `V0`, cubic meters.
    pub oil_volume: f64,
    pub film: FilmInterface,
    /// Number of cells in series.
    pub stack_count: u32,
    /// Rest height of one cell, meters; only used to express displacement as strain.
    pub cell_height: f64,
}

impl Default for ActuatorConfig {
    fn default() -> Self {
        Self {
            width: 0.06,
            oil_volume: 3.2e-6,
            film: FilmInterface {
                eps_rel: 3.4,
                single_thickness: 50e-6,
            },
            stack_count: 11,
            cell_height: 0.016,
        }
    }
}

impl ActuatorConfig {
    pub fn validate(&self) -> Result<()> {
        require_positive("width", self.width)?;
        require_positive("oil_volume", self.oil_volume)?;
        require_positive("cell_height", self.cell_height)?;
        if self.stack_count == 0 {
            return Err(Error::validation("stack_count", "must be >= 1"));
        }
        self.film.validate()
    }

    /// Free-bulge height of one cell at zero load, `2·√(V0/(π·L0))`.
    pub fn max_cell_displacement(&self) -> f64 {
        2.0 * (self.oil_volume / (PI * self.width)).sqrt()
    }

    pub fn max_stack_displacement(&self) -> f64 {
        self.stack_count as f64 * self.max_cell_displacement()
    }

    /// Total rest height of the stack.
    pub fn stack_height(&self) -> f64 {
        self.stack_count as f64 * self.cell_height
    }

    /// Stack displacement expressed as strain of the stack height.
    pub fn strain(&self, stack_displacement: f64) -> f64 {
        stack_displacement / self.stack_height()
    }
}

/// Electrostatic adhesion force between two parallel electrodes.
pub fn ea_force(pad: &EaPad, voltage: f64) -> Result<f64> {
    pad.validate()?;
    Ok(0.5 * pad.eps_rel * EPS0 * pad.area * voltage * voltage / (pad.gap * pad.gap))
}

/// Liquid pressure balanced by the electrostatic stress of the zipped film.
pub fn ea_pressure(film: &FilmInterface, voltage: f64) -> Result<f64> {
    film.validate()?;
    let d = film.zipped_thickness();
    Ok(0.5 * film.eps_rel * EPS0 * voltage * voltage / (d * d))
}

/// Voltage that produces `pressure` across the zipped film; inverse of [`ea_pressure`].
pub fn voltage_for_pressure(film: &FilmInterface, pressure: f64) -> Result<f64> {
    film.validate()?;
    require_non_negative("pressure", pressure)?;
    Ok(film.zipped_thickness() * (2.0 * pressure / (film.eps_rel * EPS0)).sqrt())
}

fn check_load(load_force: f64) -> Result<()> {
    if load_force.is_nan() || load_force < 0.0 {
        return Err(Error::Domain(format!(
            "load force must be >= 0 (the actuator only pushes), got {load_force}"
        )));
    }
    Ok(())
}

/// Displacement of a single cell under liquid pressure `pressure` and load `load_force`.
pub fn cell_displacement(config: &ActuatorConfig, pressure: f64, load_force: f64) -> Result<f64> {
    config.validate()?;
    check_load(load_force)?;
    if pressure.is_nan() || pressure < 0.0 {
        return Err(Error::Domain(format!("pressure must be >= 0, got {pressure}")));
    }
    if pressure == 0.0 {
        return Ok(0.0);
    }
    let c = config.oil_volume / config.width;
    let b = load_force / (config.width * pressure);
    if b.is_infinite() {
        return Ok(0.0);
    }
    // Positive root of π/4·H² + b·H − c = 0 in cancellation-free form.
    Ok(2.0 * c / (b + (b * b + PI * c).sqrt()))
}

/// Contact length `S` that conserves oil volume at cell displacement `h`.
pub fn contact_length(config: &ActuatorConfig, h: f64) -> Result<f64> {
    config.validate()?;
    let h_max = config.max_cell_displacement();
    if !(h > 0.0 && h <= h_max) {
        return Err(Error::Domain(format!(
            "cell displacement must lie in (0, {h_max}], got {h}"
        )));
    }
    Ok((config.oil_volume / (config.width * h) - PI * h / 4.0).max(0.0))
}

pub fn stack_displacement(config: &ActuatorConfig, pressure: f64, load_force: f64) -> Result<f64> {
    Ok(config.stack_count as f64 * cell_displacement(config, pressure, load_force)?)
}

/// Drive voltage that holds the stack at a requested displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageSolution {
    /// Electrode voltage, volts (non-negative).
    pub voltage: f64,
    /// Set when the load is zero: any positive voltage yields the free bulge, and
    /// `voltage` reports the infimum 0.
    pub degenerate_zero_load: bool,
}

/// Inverts the stack displacement map for the electrode voltage.
pub fn voltage_for_displacement(
    config: &ActuatorConfig,
    h_target: f64,
    load_force: f64,
) -> Result<VoltageSolution> {
    config.validate()?;
    check_load(load_force)?;
    let h_stack_max = config.max_stack_displacement();
    if !(h_target > 0.0 && h_target < h_stack_max) {
        return Err(Error::Range(format!(
            "target displacement {h_target} m is outside (0, {h_stack_max}) m"
        )));
    }
    if load_force == 0.0 {
        return Ok(VoltageSolution {
            voltage: 0.0,
            degenerate_zero_load: true,
        });
    }
    let h = h_target / config.stack_count as f64;
    let s = contact_length(config, h)?;
    if s <= 0.0 {
        return Err(Error::Range(format!(
            "target displacement {h_target} m needs infinite pressure under load"
        )));
    }
    let pressure = load_force / (config.width * s);
    Ok(VoltageSolution {
        voltage: voltage_for_pressure(&config.film, pressure)?,
        degenerate_zero_load: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Root of the volume/force quadratic by plain bisection.
    fn bisect_root(config: &ActuatorConfig, pressure: f64, force: f64) -> f64 {
        let f = |h: f64| {
            PI * h * h / 4.0 + force / (config.width * pressure) * h - config.oil_volume / config.width
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn ea_force_examples() {
        let pad = EaPad {
            eps_rel: 3.4,
            gap: 100e-6,
            area: 36e-4,
        };
        assert_eq!(ea_force(&pad, 0.0).unwrap(), 0.0);
        let f = ea_force(&pad, 6000.0).unwrap();
        assert!((f - 195.0).abs() < 0.5, "{f}");
        assert!(rel(ea_force(&pad, 12000.0).unwrap(), 4.0 * f) < 1e-14);
    }

    #[test]
    fn ea_pressure_examples() {
        let film = ActuatorConfig::default().film;
        assert_eq!(film.zipped_thickness(), 100e-6);
        assert_eq!(ea_pressure(&film, 0.0).unwrap(), 0.0);
        let p6 = ea_pressure(&film, 6000.0).unwrap();
        assert!((p6 - 5.42e4).abs() < 50.0, "{p6}");
        let p8 = ea_pressure(&film, 8000.0).unwrap();
        assert!(rel(p8, p6 * (8.0f64 / 6.0).powi(2)) < 1e-14);
        assert!(rel(voltage_for_pressure(&film, p6).unwrap(), 6000.0) < 1e-14);
    }

    #[test]
    fn zero_load_free_bulge() {
        let cfg = ActuatorConfig::default();
        let h = cell_displacement(&cfg, 5.42e4, 0.0).unwrap();
        assert_eq!(h, cfg.max_cell_displacement());
        assert!((h - 8.24e-3).abs() < 5e-6, "{h}");
        assert_eq!(cell_displacement(&cfg, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn loaded_cell_matches_bisection() {
        let cfg = ActuatorConfig::default();
        let h = cell_displacement(&cfg, 5.42e4, 0.4905).unwrap();
        assert!((h - bisect_root(&cfg, 5.42e4, 0.4905)).abs() < 1e-12);
        assert!((h - 8.14e-3).abs() < 1e-5, "{h}");
    }

    #[test]
    fn vanishing_pressure_under_load() {
        let cfg = ActuatorConfig::default();
        assert!(cell_displacement(&cfg, 1e-9, 0.5).unwrap() < 1e-12);
        assert_eq!(cell_displacement(&cfg, 1e-320, 0.5).unwrap(), 0.0);
        assert!(matches!(
            cell_displacement(&cfg, 1e4, -0.1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn contact_length_consistency() {
        let cfg = ActuatorConfig::default();
        let s = contact_length(&cfg, 8.144e-3).unwrap();
        assert!((s - 1.53e-4).abs() < 1e-5, "{s}");
        let load = cfg.width * 5.42e4 * s;
        assert!((load - 0.49).abs() < 0.01, "{load}");
        assert!(contact_length(&cfg, cfg.max_cell_displacement()).unwrap() < 1e-15);
        assert!(contact_length(&cfg, 0.0).is_err());
        assert!(contact_length(&cfg, 0.01).is_err());

        let half = ActuatorConfig {
            oil_volume: cfg.oil_volume / 2.0,
            ..cfg
        };
        let h = 5e-3;
        let drop = contact_length(&cfg, h).unwrap() - contact_length(&half, h).unwrap();
        assert!(rel(drop, cfg.oil_volume / (2.0 * cfg.width * h)) < 1e-12);
    }

    #[test]
    fn stack_scales_cells() {
        let one = ActuatorConfig {
            stack_count: 1,
            ..Default::default()
        };
        let eleven = ActuatorConfig {
            stack_count: 11,
            ..Default::default()
        };
        let cell = cell_displacement(&one, 3e4, 0.7).unwrap();
        assert_eq!(stack_displacement(&one, 3e4, 0.7).unwrap(), cell);
        let stack = stack_displacement(&eleven, 3e4, 0.7).unwrap();
        assert!(rel(stack, 11.0 * cell) < 1e-15);
        assert!(rel(one.strain(cell), eleven.strain(stack)) < 1e-14);
    }

    #[test]
    fn voltage_inversion() {
        let cfg = ActuatorConfig::default();
        let load = 1.0;
        let mut last = 0.0;
        for i in 1..20 {
            let h = i as f64 * 0.045 * cfg.max_stack_displacement();
            let sol = voltage_for_displacement(&cfg, h, load).unwrap();
            assert!(!sol.degenerate_zero_load);
            assert!(sol.voltage > last);
            last = sol.voltage;
            let back = stack_displacement(&cfg, ea_pressure(&cfg.film, sol.voltage).unwrap(), load).unwrap();
            assert!((back - h).abs() <= 1e-9, "h={h} back={back}");
        }
        let zero = voltage_for_displacement(&cfg, 0.01, 0.0).unwrap();
        assert!(zero.degenerate_zero_load);
        assert_eq!(zero.voltage, 0.0);
        assert!(matches!(
            voltage_for_displacement(&cfg, cfg.max_stack_displacement(), load),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            voltage_for_displacement(&cfg, 0.0, load),
            Err(Error::Range(_))
        ));
    }
}
