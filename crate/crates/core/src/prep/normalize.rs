use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::scene::Particle;

/// Fraction of the `[-1, 1]` cube a normalized scene spans along its
/// longest axis.
pub const NORMALIZED_SPAN: f64 = 0.95;

/// Axis-aligned bounds of particle positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneBounds {
    pub min: Vec3,
    pub max: Vec3,
}

impl SceneBounds {
    pub fn of(positions: impl IntoIterator<Item = Vec3>) -> Result<Self> {
        let mut it = positions.into_iter();
        let first = it.next().ok_or(Error::EmptyScene)?;
        let (min, max) = it.fold((first, first), |(lo, hi), p| (lo.inf(&p), hi.sup(&p)));
        Ok(SceneBounds { min, max })
    }

    pub fn of_particles(particles: &[Particle]) -> Result<Self> {
        Self::of(particles.iter().map(|p| p.position))
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }
}

/// Uniform scale followed by a translation: `x ↦ scale·x + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub scale: f64,
    pub translation: Vec3,
}

impl Transform {
    pub fn identity() -> Self {
        Transform { scale: 1.0, translation: Vec3::zeros() }
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        x * self.scale + self.translation
    }

    pub fn invert(&self, y: &Vec3) -> Vec3 {
        (y - self.translation) / self.scale
    }

    pub fn inverse(&self) -> Transform {
        Transform { scale: 1.0 / self.scale, translation: -self.translation / self.scale }
    }

    /// Maps positions and splat scales.
    pub fn apply_particles(&self, particles: &mut [Particle]) {
        for p in particles {
            p.position = self.apply(&p.position);
            p.scale *= self.scale;
        }
    }
}

/// Centres the cloud in the simulation cube and scales its longest side to
/// `2 · NORMALIZED_SPAN`.
pub fn normalize(particles: &[Particle]) -> Result<(Vec<Particle>, Transform)> {
    let bounds = SceneBounds::of_particles(particles)?;
    let longest = bounds.extent().max();
    if !(longest > 0.0) || !longest.is_finite() {
        return Err(Error::DegenerateExtent);
    }
    let scale = 2.0 * NORMALIZED_SPAN / longest;
    let transform = Transform { scale, translation: -bounds.center() * scale };
    let mut out = particles.to_vec();
    transform.apply_particles(&mut out);
    Ok((out, transform))
}

/// Maps normalized particles back to the original frame.
pub fn denormalize(particles: &[Particle], transform: &Transform) -> Vec<Particle> {
    let mut out = particles.to_vec();
    for p in &mut out {
        p.position = transform.invert(&p.position);
        p.scale /= transform.scale;
    }
    out
}
