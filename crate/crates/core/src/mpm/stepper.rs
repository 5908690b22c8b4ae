//! Time stepping and multi-frame runs.

use rayon::prelude::*;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::math::{polar_rotation, quat_from_rotation, Mat3, Quat, Vec3};
use crate::motion::TrajectoryDrive;
use crate::scene::{Particle, Scene};

use super::grid::Grid;
use super::transfer::{compute_kernels, gather, scatter, update_deformation, ParticleKernel};

/// Drive applied during one step: the tagged particles' support nodes get
/// `velocity`, or nothing when it is `None`.
#[derive(Debug, Clone, Copy)]
pub struct DriveInput<'a> {
    pub tagged: &'a [usize],
    pub velocity: Option<Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    /// Steps completed, including this one.
    pub step: usize,
    pub time: f64,
    /// Grid mass after the particle-to-grid transfer.
    pub total_mass: f64,
    pub particle_mass: f64,
    /// Σ m_i v_i on the grid after the velocity update.
    pub grid_momentum: Vec3,
    /// Particle momentum after the step.
    pub total_momentum: Vec3,
    pub max_velocity: f64,
    pub active_nodes: usize,
    pub driven_nodes: usize,
}

/// Owns the grid and scratch buffers; one scene is stepped at a time.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimConfig,
    grid: Grid,
    kernels: Vec<ParticleKernel>,
    /// `(F_E, R)` after the last step; saves one SVD per particle per step.
    polar: Vec<(Mat3, Mat3)>,
    steps: usize,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        Ok(Simulator {
            grid: Grid::new(&config),
            config,
            kernels: Vec::new(),
            polar: Vec::new(),
            steps: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.config.dt
    }

    /// Restarts the clock; grid contents are discarded on the next step.
    pub fn reset_clock(&mut self) {
        self.steps = 0;
    }

    /// Advances `scene` by one `dt`.
    pub fn step(&mut self, scene: &mut Scene, drives: &[DriveInput]) -> Result<StepDiagnostics> {
        let n = scene.len();
        if n == 0 {
            return Err(Error::EmptyScene);
        }
        if scene.material.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} material entries for {n} particles",
                scene.material.len()
            )));
        }
        let dt = self.config.dt;
        let polar = (self.polar.len() == n).then_some(self.polar.as_slice());
        compute_kernels(scene, self.grid.geometry(), polar, &mut self.kernels)?;
        scatter(&self.kernels, &mut self.grid);
        let total_mass = self.grid.total_mass();

        for (d, drive) in drives.iter().enumerate() {
            let Some(v) = drive.velocity else { continue };
            for &t in drive.tagged {
                let k = self.kernels.get(t).ok_or_else(|| {
                    Error::InvalidConfig(format!("tagged particle {t} out of range"))
                })?;
                self.grid.add_drive(&k.stencil, v, d as u32 + 1);
            }
        }
        let driven_nodes = self.grid.driven_node_count();
        self.grid.update_velocities(dt, &self.config.boundaries);
        let grid_momentum = self.grid.total_momentum();

        self.polar.resize(n, (Mat3::zeros(), Mat3::identity()));
        let grid = &self.grid;
        let kernels = &self.kernels;
        let params = &scene.material.params;
        let failure = scene
            .particles
            .par_iter_mut()
            .zip(self.polar.par_iter_mut())
            .enumerate()
            .filter_map(|(i, (p, cache))| {
                advance_particle(i, p, cache, &kernels[i], grid, &params[i], dt)
                    .err()
                    .map(|e| (i, e))
            })
            .min_by_key(|(i, _)| *i);
        if let Some((_, e)) = failure {
            self.polar.clear();
            return Err(e);
        }

        let max_velocity = scene
            .particles
            .iter()
            .map(|p| p.velocity.norm())
            .fold(0.0, f64::max);
        let travel = dt * max_velocity;
        let dx = self.config.dx();
        if !(travel < dx) {
            return Err(Error::Cfl { travel, dx });
        }
        self.steps += 1;
        Ok(StepDiagnostics {
            step: self.steps,
            time: self.time(),
            total_mass,
            particle_mass: scene.total_mass(),
            grid_momentum,
            total_momentum: scene.total_momentum(),
            max_velocity,
            active_nodes: self.grid.active_node_count(),
            driven_nodes,
        })
    }
}

/// Grid-to-particle gather, deformation update, advection and splat
/// rotation for one particle.
fn advance_particle(
    i: usize,
    p: &mut Particle,
    cache: &mut (Mat3, Mat3),
    kernel: &ParticleKernel,
    grid: &Grid,
    params: &crate::material::MaterialParams,
    dt: f64,
) -> Result<()> {
    let (v, c) = gather(grid, &kernel.stencil, &kernel.position);
    p.velocity = v;
    p.affine = c;
    update_deformation(i, p, params, &c, dt)?;
    p.position += v * dt;
    let r_new = polar_rotation(&p.f_elastic);
    let q = quat_from_rotation(&(r_new * kernel.rotation.transpose())) * p.rotation;
    p.rotation = Quat::new_normalize(q.into_inner());
    *cache = (p.f_elastic, r_new);
    Ok(())
}

/// Number of snapshots a run of `n_steps` produces: one every `stride`
/// steps starting with the initial state.
pub fn frame_count(n_steps: usize, stride: usize) -> usize {
    if n_steps == 0 {
        1
    } else {
        (n_steps - 1) / stride.max(1) + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub frame: usize,
    pub step: usize,
    pub time: f64,
    pub particles: Vec<Particle>,
}

/// A frame boundary reached during [`run_with`].
#[derive(Debug)]
pub struct FrameEvent<'a> {
    pub frame: usize,
    pub step: usize,
    pub time: f64,
    pub particles: &'a [Particle],
    /// Diagnostics of the step that produced this frame; `None` for the
    /// initial state.
    pub diagnostics: Option<StepDiagnostics>,
}

/// Steps `scene` in place and calls `on_frame` at every snapshot step
/// (`k · stride` for `k · stride < n_steps`, or once when `n_steps` is 0).
/// Steps after the last snapshot are not taken since nothing observes them.
/// Errors carry the failing step index.
pub fn run_with<F>(
    scene: &mut Scene,
    config: &SimConfig,
    drives: &[TrajectoryDrive],
    n_steps: usize,
    frame_stride: usize,
    mut on_frame: F,
) -> Result<()>
where
    F: FnMut(FrameEvent<'_>) -> Result<()>,
{
    if frame_stride == 0 {
        return Err(Error::InvalidConfig("frame_stride must be positive".into()));
    }
    let mut sim = Simulator::new(config.clone())?;
    let frames = frame_count(n_steps, frame_stride);
    on_frame(FrameEvent {
        frame: 0,
        step: 0,
        time: 0.0,
        particles: &scene.particles,
        diagnostics: None,
    })?;
    let last_step = (frames - 1) * frame_stride;
    let mut velocities = vec![None; drives.len()];
    for s in 0..last_step {
        let t = s as f64 * config.dt;
        for (v, d) in velocities.iter_mut().zip(drives) {
            *v = d.velocity_at(t, config.frame_dt);
        }
        let inputs: Vec<DriveInput> = drives
            .iter()
            .zip(&velocities)
            .map(|(d, &velocity)| DriveInput {
                tagged: &d.tagged,
                velocity,
            })
            .collect();
        let diag = sim.step(scene, &inputs).map_err(|e| Error::AtStep {
            step: s,
            source: Box::new(e),
        })?;
        let done = s + 1;
        if done % frame_stride == 0 {
            on_frame(FrameEvent {
                frame: done / frame_stride,
                step: done,
                time: done as f64 * config.dt,
                particles: &scene.particles,
                diagnostics: Some(diag),
            })?;
        }
    }
    Ok(())
}

/// Runs a copy of `scene` and collects every snapshot.
pub fn run(
    scene: &Scene,
    config: &SimConfig,
    drives: &[TrajectoryDrive],
    n_steps: usize,
    frame_stride: usize,
) -> Result<Vec<Snapshot>> {
    let mut work = scene.clone();
    let mut out = Vec::with_capacity(frame_count(n_steps, frame_stride));
    run_with(&mut work, config, drives, n_steps, frame_stride, |e| {
        out.push(Snapshot {
            frame: e.frame,
            step: e.step,
            time: e.time,
            particles: e.particles.to_vec(),
        });
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::MaterialParams;
    use crate::trajectory::Trajectory;

    fn block(n: usize, spacing: f64, center: Vec3) -> Scene {
        let mut particles = Vec::new();
        let half = (n as f64 - 1.0) / 2.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let offset = Vec3::new(i as f64 - half, j as f64 - half, k as f64 - half);
                    particles.push(Particle::at(center + offset * spacing));
                }
            }
        }
        let mut scene = Scene::new(particles, MaterialParams::from_shear(2.0e3, 1.0, 1.0));
        let side = n as f64 * spacing;
        scene.assign_uniform_mass(side * side * side, 1.0e3);
        scene
    }

    #[test]
    fn frame_accounting() {
        assert_eq!(frame_count(0, 400), 1);
        assert_eq!(frame_count(1, 400), 1);
        assert_eq!(frame_count(400, 400), 1);
        assert_eq!(frame_count(401, 400), 2);
        assert_eq!(frame_count(80_000, 400), 200);
    }

    #[test]
    fn zero_steps_returns_input() {
        let scene = block(3, 0.02, Vec3::zeros());
        let snaps = run(&scene, &SimConfig::default(), &[], 0, 400).unwrap();
        assert_eq!(snaps.len(), 1);
        assert_eq!(snaps[0].particles, scene.particles);
    }

    #[test]
    fn rest_scene_stays_put() {
        let mut scene = block(4, 0.02, Vec3::new(0.0, 0.0, 0.2));
        let before = scene.particles.clone();
        let mut sim = Simulator::new(SimConfig::default()).unwrap();
        for _ in 0..1000 {
            sim.step(&mut scene, &[]).unwrap();
        }
        for (a, b) in before.iter().zip(&scene.particles) {
            assert!((a.position - b.position).norm() < 1e-12);
        }
    }

    #[test]
    fn translation_drive_conserves_mass() {
        let mut scene = block(4, 0.02, Vec3::new(0.0, 0.0, 0.2));
        let m0 = scene.total_mass();
        let tagged: Vec<usize> = (0..scene.len()).collect();
        let drive = [DriveInput {
            tagged: &tagged,
            velocity: Some(Vec3::new(0.5, 0.0, 0.0)),
        }];
        let mut sim = Simulator::new(SimConfig::default()).unwrap();
        for _ in 0..50 {
            let d = sim.step(&mut scene, &drive).unwrap();
            assert_eq!(d.particle_mass, m0);
            assert!((d.total_mass - m0).abs() <= 1e-12 * m0);
        }
        let mean_v = scene.total_momentum() / m0;
        assert!((mean_v - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn cfl_violation_is_an_error() {
        let mut scene = block(2, 0.02, Vec3::zeros());
        for p in &mut scene.particles {
            p.velocity = Vec3::new(1000.0, 0.0, 0.0);
        }
        let mut sim = Simulator::new(SimConfig::default()).unwrap();
        assert!(matches!(
            sim.step(&mut scene, &[]),
            Err(Error::Cfl { .. })
        ));
    }

    #[test]
    fn runs_are_bit_identical() {
        let scene = block(4, 0.02, Vec3::new(0.0, 0.0, 0.0));
        let traj = Trajectory::new(
            vec![(0, Vec3::zeros()), (2, Vec3::new(0.02, 0.01, 0.0))],
            0.03,
        )
        .unwrap();
        let drive = TrajectoryDrive::new(traj, &scene.particles).unwrap();
        let config = SimConfig::default();
        let a = run(&scene, &config, std::slice::from_ref(&drive), 1200, 400).unwrap();
        let b = run(&scene, &config, &[drive], 1200, 400).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a, b);
        assert_ne!(a[0].particles, a[2].particles);
    }

    #[test]
    fn splat_rotation_follows_spin() {
        let mut scene = block(5, 0.02, Vec3::zeros());
        let omega = 2.0;
        for p in &mut scene.particles {
            p.velocity = Vec3::new(-omega * p.position.y, omega * p.position.x, 0.0);
            p.affine = Mat3::new(0.0, -omega, 0.0, omega, 0.0, 0.0, 0.0, 0.0, 0.0);
        }
        let mut sim = Simulator::new(SimConfig::default()).unwrap();
        for _ in 0..200 {
            sim.step(&mut scene, &[]).unwrap();
        }
        let p = &scene.particles[scene.len() / 2];
        assert!((p.rotation.into_inner().norm() - 1.0).abs() < 1e-12);
        let angle = p.rotation.angle();
        // Rotated by roughly ω t = 0.04 rad about z.
        assert!((angle - 0.04).abs() < 0.01, "angle {angle}");
    }
}
