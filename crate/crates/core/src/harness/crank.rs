//! Offset-free crank-slider converting stack displacement into joint rotation.

use crate::error::{require_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrankSlider {
    /// Crank radius, m.
    pub crank_radius: f64,
    /// Connecting rod length, m.
    pub rod_length: f64,
    /// Crank angle at zero slider displacement, rad, in `[0, π)`.
    pub zero_angle: f64,
}

/// Rod length of the default joint, m.
pub const DEFAULT_ROD_LENGTH: f64 = 0.04;
/// Stroke of the default joint, m.
pub const DEFAULT_STROKE: f64 = 0.008;
/// Rotation spanned by the default stroke, degrees.
pub const DEFAULT_SPAN_DEG: f64 = 48.1;

impl Default for CrankSlider {
    fn default() -> Self {
        Self::for_stroke(DEFAULT_ROD_LENGTH, DEFAULT_STROKE, DEFAULT_SPAN_DEG.to_radians())
            .expect("default crank geometry is solvable")
    }
}

impl CrankSlider {
    pub fn validate(&self) -> Result<()> {
        require_positive("crank_radius", self.crank_radius)?;
        if !(self.rod_length > self.crank_radius) {
            return Err(Error::validation(
                "rod_length",
                format!(
                    "must exceed crank_radius ({} <= {})",
                    self.rod_length, self.crank_radius
                ),
            ));
        }
        if !(0.0..std::f64::consts::PI).contains(&self.zero_angle) {
            return Err(Error::validation("zero_angle", "must lie in [0, π)"));
        }
        Ok(())
    }

    /// Distance from the crank pivot to the slider pin at crank angle `theta`.
    pub fn slider_position(&self, theta: f64) -> f64 {
        let (r, l) = (self.crank_radius, self.rod_length);
        r * theta.cos() + (l * l - (r * theta.sin()).powi(2)).sqrt()
    }

    /// Slider travel from the zero position at crank angle `theta`.
    pub fn displacement(&self, theta: f64) -> f64 {
        self.slider_position(self.zero_angle) - self.slider_position(theta)
    }

    /// Largest reachable displacement (slider at bottom dead centre).
    pub fn max_displacement(&self) -> f64 {
        self.slider_position(self.zero_angle) - (self.rod_length - self.crank_radius)
    }

    /// Solves the crank radius (zero angle 0) so that `stroke` spans `span` radians.
    pub fn for_stroke(rod_length: f64, stroke: f64, span: f64) -> Result<Self> {
        require_positive("rod_length", rod_length)?;
        require_positive("stroke", stroke)?;
        if !(span > 0.0 && span < std::f64::consts::PI) {
            return Err(Error::Domain(format!("span must lie in (0, π), got {span}")));
        }
        let travel = |r: f64| {
            CrankSlider {
                crank_radius: r,
                rod_length,
                zero_angle: 0.0,
            }
            .displacement(span)
        };
        // Travel at a fixed angle grows with the radius.
        let (mut lo, mut hi) = (0.0, rod_length * (1.0 - 1e-12));
        if travel(hi) < stroke {
            return Err(Error::Range(format!(
                "a {stroke} m stroke cannot span {span} rad with a {rod_length} m rod"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if travel(mid) < stroke {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let geom = CrankSlider {
            crank_radius: 0.5 * (lo + hi),
            rod_length,
            zero_angle: 0.0,
        };
        geom.validate()?;
        Ok(geom)
    }
}

/// Crank angle (rad) at slider displacement `h` from the zero position.
pub fn crank_angle(geom: &CrankSlider, h: f64) -> Result<f64> {
    geom.validate()?;
    let reach = geom.max_displacement();
    if !(0.0..=reach).contains(&h) {
        return Err(Error::Range(format!(
            "slider displacement {h} m outside [0, {reach}] m"
        )));
    }
    let (r, l) = (geom.crank_radius, geom.rod_length);
    let x = geom.slider_position(geom.zero_angle) - h;
    let cos = ((x * x + r * r - l * l) / (2.0 * x * r)).clamp(-1.0, 1.0);
    Ok(cos.acos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_spans_target() {
        let g = CrankSlider::default();
        let span = crank_angle(&g, DEFAULT_STROKE).unwrap() - crank_angle(&g, 0.0).unwrap();
        assert!((span.to_degrees() - 48.1).abs() < 1e-6);
        assert!(g.crank_radius > 0.0 && g.crank_radius < g.rod_length);
    }

    #[test]
    fn zero_displacement_is_zero_angle() {
        let g = CrankSlider {
            zero_angle: 0.3,
            ..CrankSlider::default()
        };
        assert!((crank_angle(&g, 0.0).unwrap() - 0.3).abs() < 1e-7);
    }

    #[test]
    fn forward_inverse_agree() {
        let g = CrankSlider {
            zero_angle: 0.2,
            ..CrankSlider::default()
        };
        for i in 0..50 {
            let theta = 0.2 + i as f64 * 0.05;
            let h = g.displacement(theta);
            assert!(
                (crank_angle(&g, h).unwrap() - theta).abs() < 1e-6,
                "theta={theta}"
            );
        }
    }

    #[test]
    fn unreachable_displacement() {
        let g = CrankSlider::default();
        assert!(matches!(crank_angle(&g, -1e-3), Err(Error::Range(_))));
        assert!(matches!(
            crank_angle(&g, g.max_displacement() + 1e-6),
            Err(Error::Range(_))
        ));
        assert!(CrankSlider {
            rod_length: 0.01,
            crank_radius: 0.02,
            zero_angle: 0.0
        }
        .validate()
        .is_err());
    }
}
