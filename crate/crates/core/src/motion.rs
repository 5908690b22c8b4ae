//! Trajectory-driven grid velocity overrides.

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::mpm::{bspline_weights, Grid};
use crate::scene::Particle;
use crate::trajectory::Trajectory;

/// Indices of all particles within `radius` of `p0`.
pub fn select_region(particles: &[Particle], p0: &Vec3, radius: f64) -> Result<Vec<usize>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidConfig(format!("region radius {radius} must be positive")));
    }
    let r2 = radius * radius;
    let tagged: Vec<usize> = particles
        .iter()
        .enumerate()
        .filter(|(_, p)| (p.position - p0).norm_squared() <= r2)
        .map(|(i, _)| i)
        .collect();
    if tagged.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(tagged)
}

/// Piecewise-constant drive velocity at simulation time `t`: the finite
/// difference of the trajectory over the frame interval containing `t`.
/// `None` once the trajectory has ended (or before it starts).
pub fn drive_velocity(trajectory: &Trajectory, t: f64, frame_dt: f64) -> Option<Vec3> {
    if !(t >= 0.0) {
        return None;
    }
    let n = (t / frame_dt + 1e-9).floor() as i64;
    let p0 = trajectory.point_at(n)?;
    let p1 = trajectory.point_at(n + 1)?;
    Some((p1 - p0) / frame_dt)
}

/// Flags the stencil nodes of every tagged particle with `velocity`;
/// `None` clears all drive flags instead.
pub fn drive_nodes(
    grid: &mut Grid,
    particles: &[Particle],
    tagged: &[usize],
    velocity: Option<Vec3>,
) -> Result<()> {
    let Some(v) = velocity else {
        grid.clear_drive();
        return Ok(());
    };
    let geometry = *grid.geometry();
    for &t in tagged {
        let p = particles
            .get(t)
            .ok_or_else(|| Error::InvalidConfig(format!("tagged particle {t} out of range")))?;
        let s = bspline_weights(&p.position, &geometry)
            .map_err(|_| Error::ParticleOutOfGrid { particle: t })?;
        grid.add_drive(&s, v, 1);
    }
    Ok(())
}

/// A trajectory bound to the particles it grips.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDrive {
    pub trajectory: Trajectory,
    pub tagged: Vec<usize>,
}

impl TrajectoryDrive {
    /// Tags the particles around the trajectory start point.
    pub fn new(trajectory: Trajectory, particles: &[Particle]) -> Result<Self> {
        let tagged = select_region(particles, &trajectory.start_point, trajectory.region_radius)?;
        Ok(TrajectoryDrive { trajectory, tagged })
    }

    pub fn velocity_at(&self, t: f64, frame_dt: f64) -> Option<Vec3> {
        drive_velocity(&self.trajectory, t, frame_dt)
    }

    /// Simulation time at which the drive releases.
    pub fn end_time(&self, frame_dt: f64) -> f64 {
        self.trajectory.last_frame() as f64 * frame_dt
    }
}
