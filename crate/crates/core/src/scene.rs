//! Particles and scenes.
//!
//! A particle is both an MPM material point and a Gaussian splat. Density is
//! not stored: it is implied by `mass / volume0` at construction time.

use std::fmt;

use crate::config::SimConfig;
use crate::material::{MaterialField, MaterialParams};
use crate::math::{Mat3, Quat, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec3,
    pub velocity: Vec3,
    pub mass: f64,
    /// Rest volume.
    pub volume0: f64,
    /// Elastic deformation gradient.
    pub f_elastic: Mat3,
    /// Viscous deformation gradient.
    pub f_viscous: Mat3,
    /// APIC affine velocity matrix (1/s).
    pub affine: Mat3,
    pub opacity: f64,
    pub rotation: Quat,
    pub scale: Vec3,
    /// View-independent RGB in `[0, 1]`.
    pub color: Vec3,
}

impl Particle {
    /// A particle at rest with unit mass and volume and a small grey splat.
    pub fn at(position: Vec3) -> Self {
        Particle {
            position,
            velocity: Vec3::zeros(),
            mass: 1.0,
            volume0: 1.0,
            f_elastic: Mat3::identity(),
            f_viscous: Mat3::identity(),
            affine: Mat3::zeros(),
            opacity: 1.0,
            rotation: Quat::identity(),
            scale: Vec3::repeat(0.01),
            color: Vec3::repeat(0.5),
        }
    }

    pub fn splat(position: Vec3, rotation: Quat, scale: Vec3, opacity: f64, color: Vec3) -> Self {
        Particle {
            rotation,
            scale,
            opacity,
            color,
            ..Particle::at(position)
        }
    }

    /// Resets the simulation state while keeping position and splat attributes.
    pub fn reset_dynamics(&mut self) {
        self.velocity = Vec3::zeros();
        self.f_elastic = Mat3::identity();
        self.f_viscous = Mat3::identity();
        self.affine = Mat3::zeros();
    }
}

/// Particles plus the material field indexed in parallel with them.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub particles: Vec<Particle>,
    pub material: MaterialField,
}

impl Scene {
    pub fn new(particles: Vec<Particle>, params: MaterialParams) -> Self {
        let material = MaterialField::uniform(particles.len(), params);
        Scene { particles, material }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Sets mass and rest volume assuming each particle occupies an equal
    /// share of `total_volume` at `density`.
    pub fn assign_uniform_mass(&mut self, total_volume: f64, density: f64) {
        let n = self.particles.len().max(1) as f64;
        let volume = total_volume / n;
        for p in &mut self.particles {
            p.volume0 = volume;
            p.mass = density * volume;
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.particles.iter().map(|p| p.mass).sum()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.particles
            .iter()
            .fold(Vec3::zeros(), |acc, p| acc + p.velocity * p.mass)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyScene,
    OutsideDomain { particle: usize },
    NonPositiveMass { particle: usize },
    NonPositiveVolume { particle: usize },
    DegenerateDeformation { particle: usize },
    NonFinite { particle: usize },
    BadRenderAttributes { particle: usize },
    MaterialMismatch,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyScene => write!(f, "empty scene"),
            Violation::OutsideDomain { particle } => {
                write!(f, "particle {particle}: position outside domain")
            }
            Violation::NonPositiveMass { particle } => {
                write!(f, "particle {particle}: non-positive mass")
            }
            Violation::NonPositiveVolume { particle } => {
                write!(f, "particle {particle}: non-positive rest volume")
            }
            Violation::DegenerateDeformation { particle } => {
                write!(f, "particle {particle}: degenerate deformation gradient")
            }
            Violation::NonFinite { particle } => write!(f, "particle {particle}: non-finite state"),
            Violation::BadRenderAttributes { particle } => {
                write!(f, "particle {particle}: opacity, scale or rotation out of range")
            }
            Violation::MaterialMismatch => write!(f, "material field does not match particles"),
        }
    }
}

/// Lists every invariant violation; an empty report means the scene is
/// ready to simulate.
pub fn validate_scene(scene: &Scene, config: &SimConfig) -> Vec<Violation> {
    let mut report = Vec::new();
    if scene.particles.is_empty() {
        report.push(Violation::EmptyScene);
        return report;
    }
    if scene.material.len() != scene.particles.len() || scene.material.validate().is_err() {
        report.push(Violation::MaterialMismatch);
    }
    let h = config.domain_half_extent;
    for (i, p) in scene.particles.iter().enumerate() {
        let finite = p.position.iter().all(|v| v.is_finite())
            && p.velocity.iter().all(|v| v.is_finite())
            && p.f_elastic.iter().all(|v| v.is_finite())
            && p.f_viscous.iter().all(|v| v.is_finite())
            && p.affine.iter().all(|v| v.is_finite());
        if !finite {
            report.push(Violation::NonFinite { particle: i });
            continue;
        }
        if p.position.iter().any(|c| c.abs() > h) {
            report.push(Violation::OutsideDomain { particle: i });
        }
        if !(p.mass > 0.0) {
            report.push(Violation::NonPositiveMass { particle: i });
        }
        if !(p.volume0 > 0.0) {
            report.push(Violation::NonPositiveVolume { particle: i });
        }
        if !(p.f_elastic.determinant() > 0.0) || !(p.f_viscous.determinant() > 0.0) {
            report.push(Violation::DegenerateDeformation { particle: i });
        }
        let render_ok = (0.0..=1.0).contains(&p.opacity)
            && p.scale.iter().all(|&s| s > 0.0)
            && (p.rotation.into_inner().norm() - 1.0).abs() < 1e-6;
        if !render_ok {
            report.push(Violation::BadRenderAttributes { particle: i });
        }
    }
    report
}
