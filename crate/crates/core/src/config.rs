use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::TISSUE_POISSON_RATIO;

/// Boundary treatment applied to grid nodes near one face of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// Node velocity set to zero.
    Sticky,
    /// Normal velocity component set to zero.
    Slip,
}

/// One condition per domain face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Boundaries {
    pub x_min: BoundaryCondition,
    pub x_max: BoundaryCondition,
    pub y_min: BoundaryCondition,
    pub y_max: BoundaryCondition,
    pub z_min: BoundaryCondition,
    pub z_max: BoundaryCondition,
}

impl Default for Boundaries {
    /// Tissue attached at its base (the −z face), free to slide elsewhere.
    fn default() -> Self {
        Boundaries {
            x_min: BoundaryCondition::Slip,
            x_max: BoundaryCondition::Slip,
            y_min: BoundaryCondition::Slip,
            y_max: BoundaryCondition::Slip,
            z_min: BoundaryCondition::Sticky,
            z_max: BoundaryCondition::Slip,
        }
    }
}

impl Boundaries {
    pub fn all(condition: BoundaryCondition) -> Self {
        Boundaries {
            x_min: condition,
            x_max: condition,
            y_min: condition,
            y_max: condition,
            z_min: condition,
            z_max: condition,
        }
    }

    /// Condition for `axis` on the low (`upper == false`) or high side.
    pub fn face(&self, axis: usize, upper: bool) -> BoundaryCondition {
        match (axis, upper) {
            (0, false) => self.x_min,
            (0, true) => self.x_max,
            (1, false) => self.y_min,
            (1, true) => self.y_max,
            (2, false) => self.z_min,
            _ => self.z_max,
        }
    }
}

/// Simulation constants. Gravity is not modelled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Grid cells per axis across the domain cube.
    pub grid_resolution: usize,
    /// Half side of the domain cube `[-h, h]³`.
    pub domain_half_extent: f64,
    /// Simulation step (s).
    pub dt: f64,
    /// Duration of one video frame (s).
    pub frame_dt: f64,
    /// B-spline degree of the transfer kernel (2 or 3).
    pub spline_degree: usize,
    pub boundaries: Boundaries,
    /// Radius of the drive region around a trajectory start point.
    pub drive_radius: f64,
    pub poisson_ratio: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let grid_resolution = 50;
        let domain_half_extent = 1.0;
        SimConfig {
            grid_resolution,
            domain_half_extent,
            dt: 1.0e-4,
            frame_dt: 0.04,
            spline_degree: 2,
            boundaries: Boundaries::default(),
            drive_radius: 3.0 * 2.0 * domain_half_extent / grid_resolution as f64,
            poisson_ratio: TISSUE_POISSON_RATIO,
        }
    }
}

impl SimConfig {
    pub fn dx(&self) -> f64 {
        2.0 * self.domain_half_extent / self.grid_resolution as f64
    }

    /// Grid nodes per axis (cells + 1).
    pub fn nodes_per_axis(&self) -> usize {
        self.grid_resolution + 1
    }

    pub fn domain_min(&self) -> f64 {
        -self.domain_half_extent
    }

    /// Simulation steps per video frame.
    pub fn frame_stride(&self) -> usize {
        (self.frame_dt / self.dt).round().max(1.0) as usize
    }

    /// Width (in nodes) of the band near each face where boundary
    /// conditions apply; one full stencil.
    pub fn boundary_band(&self) -> usize {
        self.spline_degree + 1
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.grid_resolution < 8 {
            return fail(format!("grid_resolution {} < 8", self.grid_resolution));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return fail(format!("dt {} must be positive", self.dt));
        }
        if self.dt > self.frame_dt {
            return fail(format!("dt {} exceeds frame_dt {}", self.dt, self.frame_dt));
        }
        if !(self.domain_half_extent > 0.0) {
            return fail("domain extent must be positive".into());
        }
        if !matches!(self.spline_degree, 2 | 3) {
            return fail(format!(
                "spline degree {} unsupported (2 or 3)",
                self.spline_degree
            ));
        }
        if !(self.drive_radius > 0.0) {
            return fail("drive_radius must be positive".into());
        }
        if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
            return fail(format!("poisson_ratio {} outside (0, 0.5)", self.poisson_ratio));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_setup() {
        let c = SimConfig::default();
        assert_eq!(c.grid_resolution, 50);
        assert_eq!(c.dt, 1e-4);
        assert_eq!(c.frame_stride(), 400);
        assert!((c.dx() - 0.04).abs() < 1e-15);
        assert!((c.drive_radius - 0.12).abs() < 1e-12);
        assert_eq!(c.boundaries.z_min, BoundaryCondition::Sticky);
        assert_eq!(c.boundaries.x_max, BoundaryCondition::Slip);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = SimConfig {
            grid_resolution: 4,
            ..SimConfig::default()
        };
        assert!(c.validate().is_err());
        c.grid_resolution = 50;
        c.dt = 0.1;
        assert!(c.validate().is_err());
        c.dt = 1e-4;
        c.spline_degree = 1;
        assert!(c.validate().is_err());
    }
}
