//! APIC particle/grid transfers and the per-particle state update.

use rayon::prelude::*;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::material::MaterialParams;
use crate::math::{polar_rotation, symmetric_part, Mat3, Vec3};
use crate::scene::{Particle, Scene};

use super::constitutive::{corotated_kirchhoff, viscous_stress};
use super::grid::{Grid, NodeBox};
use super::kernel::{bspline_weights, GridGeometry, Stencil, MAX_SUPPORT};

/// Everything a particle contributes to the grid in one step.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ParticleKernel {
    pub stencil: Stencil,
    pub position: Vec3,
    pub mass: f64,
    pub momentum: Vec3,
    pub mass_affine: Mat3,
    /// `V⁰ J (σ_E + σ_v)`.
    pub stress: Mat3,
    /// Polar rotation of the elastic gradient at the start of the step.
    pub rotation: Mat3,
}

impl ParticleKernel {
    fn placeholder() -> Self {
        ParticleKernel {
            stencil: Stencil {
                base: [0; 3],
                width: 0,
                weights: [[0.0; 4]; 3],
                gradients: [[0.0; 4]; 3],
            },
            position: Vec3::zeros(),
            mass: 0.0,
            momentum: Vec3::zeros(),
            mass_affine: Mat3::zeros(),
            stress: Mat3::zeros(),
            rotation: Mat3::identity(),
        }
    }
}

fn finite_state(p: &Particle) -> bool {
    p.position.iter().all(|v| v.is_finite())
        && p.velocity.iter().all(|v| v.is_finite())
        && p.f_elastic.iter().all(|v| v.is_finite())
        && p.f_viscous.iter().all(|v| v.is_finite())
        && p.affine.iter().all(|v| v.is_finite())
        && p.mass.is_finite()
}

/// Builds the transfer kernel of particle `index`. `rotation` short-circuits
/// the SVD when the caller already knows the polar factor of `F_E`.
pub(crate) fn particle_kernel(
    index: usize,
    p: &Particle,
    params: &MaterialParams,
    geometry: &GridGeometry,
    rotation: Option<Mat3>,
) -> Result<ParticleKernel> {
    if !finite_state(p) {
        return Err(Error::NonFinite { particle: index });
    }
    let stencil = bspline_weights(&p.position, geometry)
        .map_err(|_| Error::ParticleOutOfGrid { particle: index })?;
    let f = &p.f_elastic;
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(Error::InvertedElement { particle: index, det: j });
    }
    let r = rotation.unwrap_or_else(|| polar_rotation(f));
    let mut tau = corotated_kirchhoff(f, &r, j, params.mu_e, params.lambda_e);
    if params.eta_v > 0.0 {
        let d = symmetric_part(&p.affine);
        tau += viscous_stress(&p.f_viscous, &d, params.eta_v) * j;
    }
    Ok(ParticleKernel {
        stencil,
        position: p.position,
        mass: p.mass,
        momentum: p.velocity * p.mass,
        mass_affine: p.affine * p.mass,
        stress: tau * p.volume0,
        rotation: r,
    })
}

/// Computes kernels for every particle in parallel. On failure the error of
/// the lowest failing index is returned, so errors are reproducible.
pub(crate) fn compute_kernels(
    scene: &Scene,
    geometry: &GridGeometry,
    cached_rotations: Option<&[(Mat3, Mat3)]>,
    out: &mut Vec<ParticleKernel>,
) -> Result<()> {
    let n = scene.particles.len();
    let make = |i: usize| {
        let p = &scene.particles[i];
        let r = cached_rotations
            .and_then(|c| c.get(i))
            .filter(|(f, _)| *f == p.f_elastic)
            .map(|(_, r)| *r);
        particle_kernel(i, p, &scene.material.params[i], geometry, r)
    };
    out.resize(n, ParticleKernel::placeholder());
    let bad = out
        .par_iter_mut()
        .enumerate()
        .filter_map(|(i, slot)| match make(i) {
            Ok(k) => {
                *slot = k;
                None
            }
            Err(_) => Some(i),
        })
        .min();
    match bad {
        Some(i) => Err(make(i).unwrap_err()),
        None => Ok(()),
    }
}

/// Serial scatter in particle order. Fixed accumulation order makes every
/// node sum reproducible bit for bit.
/// Node-minus-particle coordinate per axis over the stencil.
#[inline]
fn offsets(geometry: &GridGeometry, s: &Stencil, position: &Vec3) -> [[f64; MAX_SUPPORT]; 3] {
    let mut out = [[0.0; MAX_SUPPORT]; 3];
    for (axis, row) in out.iter_mut().enumerate() {
        for (a, o) in row.iter_mut().enumerate().take(s.width) {
            *o = geometry.node_coordinate(s.base[axis] + a) - position[axis];
        }
    }
    out
}

pub(crate) fn scatter(kernels: &[ParticleKernel], grid: &mut Grid) {
    let bbox = kernels
        .iter()
        .map(|k| NodeBox::of_stencil(&k.stencil))
        .reduce(|a, b| a.union(&b));
    grid.reset(bbox);
    if kernels.is_empty() {
        grid.mass_epsilon = 0.0;
        return;
    }
    let mean_mass = kernels.iter().map(|k| k.mass).sum::<f64>() / kernels.len() as f64;
    grid.mass_epsilon = 1e-12 * mean_mass;
    let geometry = *grid.geometry();
    let nodes = grid.nodes_mut();
    for k in kernels {
        let s = &k.stencil;
        let [wx, wy, wz] = &s.weights;
        let [gx, gy, gz] = &s.gradients;
        let offsets = offsets(&geometry, s, &k.position);
        let ma = &k.mass_affine;
        let (c0, c1, c2) = (ma.column(0), ma.column(1), ma.column(2));
        let stress = &k.stress;
        let width = s.width;
        for a in 0..width {
            let p_a = k.momentum + c0 * offsets[0][a];
            for b in 0..width {
                let p_ab = p_a + c1 * offsets[1][b];
                let w_ab = wx[a] * wy[b];
                let gx_ab = gx[a] * wy[b];
                let gy_ab = wx[a] * gy[b];
                let row = geometry.index(s.base[0] + a, s.base[1] + b, s.base[2]);
                for (c, node) in nodes[row..row + width].iter_mut().enumerate() {
                    let w = w_ab * wz[c];
                    let grad = Vec3::new(gx_ab * wz[c], gy_ab * wz[c], w_ab * gz[c]);
                    node.mass += w * k.mass;
                    node.momentum += (p_ab + c2 * offsets[2][c]) * w;
                    node.force -= stress * grad;
                }
            }
        }
    }
    grid.normalize_momentum();
}

/// Particle-to-grid transfer of mass, APIC momentum and internal force.
/// Previous grid contents are discarded.
pub fn p2g(scene: &Scene, grid: &mut Grid) -> Result<()> {
    let mut kernels = Vec::with_capacity(scene.len());
    compute_kernels(scene, grid.geometry(), None, &mut kernels)?;
    scatter(&kernels, grid);
    Ok(())
}

/// Applies internal forces, any drive override, then the boundary
/// conditions.
pub fn grid_update(grid: &mut Grid, dt: f64, config: &SimConfig) {
    grid.update_velocities(dt, &config.boundaries);
}

/// Interpolated velocity and APIC affine matrix at `position`.
#[inline]
pub(crate) fn gather(grid: &Grid, stencil: &Stencil, position: &Vec3) -> (Vec3, Mat3) {
    let geometry = grid.geometry();
    let nodes = grid.nodes();
    let s = stencil;
    let [wx, wy, wz] = &s.weights;
    let offsets = offsets(geometry, s, position);
    let width = s.width;
    let mut v = Vec3::zeros();
    let mut b = Mat3::zeros();
    for a in 0..width {
        let ox = offsets[0][a];
        for bb in 0..width {
            let oy = offsets[1][bb];
            let w_ab = wx[a] * wy[bb];
            let row = geometry.index(s.base[0] + a, s.base[1] + bb, s.base[2]);
            // Accumulate Σ w v and Σ w v z first; x and y offsets are
            // constant along the row.
            let mut row_v = Vec3::zeros();
            let mut row_vz = Vec3::zeros();
            for (c, node) in nodes[row..row + width].iter().enumerate() {
                let wv = node.velocity * (w_ab * wz[c]);
                row_v += wv;
                row_vz += wv * offsets[2][c];
            }
            v += row_v;
            let mut col = b.column_mut(0);
            col += row_v * ox;
            let mut col = b.column_mut(1);
            col += row_v * oy;
            let mut col = b.column_mut(2);
            col += row_vz;
        }
    }
    (v, b * geometry.affine_scale())
}

/// Grid-to-particle transfer of velocity and affine matrix.
pub fn g2p(grid: &Grid, scene: &mut Scene) -> Result<()> {
    let geometry = *grid.geometry();
    scene
        .particles
        .par_iter_mut()
        .enumerate()
        .try_for_each(|(i, p)| {
            let s = bspline_weights(&p.position, &geometry)
                .map_err(|_| Error::ParticleOutOfGrid { particle: i })?;
            let (v, c) = gather(grid, &s, &p.position);
            p.velocity = v;
            p.affine = c;
            Ok(())
        })
}

/// Multiplicative updates `F_E ← F_E(I + dt∇v)` and
/// `F_v ← F_v(I + γ dt D)` with `∇v` taken as the APIC matrix.
pub fn update_deformation(
    index: usize,
    particle: &mut Particle,
    params: &MaterialParams,
    grad_v: &Mat3,
    dt: f64,
) -> Result<()> {
    let guard = dt * grad_v.norm();
    if !(guard < 0.5) {
        return Err(Error::StabilityGuard {
            particle: index,
            value: guard,
        });
    }
    let fe = particle.f_elastic * (Mat3::identity() + grad_v * dt);
    let det = fe.determinant();
    if !(det > 0.0) {
        return Err(Error::InvertedElement { particle: index, det });
    }
    particle.f_elastic = fe;
    if params.gamma_v > 0.0 {
        let d = symmetric_part(grad_v);
        let fv = particle.f_viscous * (Mat3::identity() + d * (params.gamma_v * dt));
        let det = fv.determinant();
        if !(det > 0.0) {
            return Err(Error::InvertedElement { particle: index, det });
        }
        particle.f_viscous = fv;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::MaterialParams;

    fn scene_of(points: &[Vec3]) -> Scene {
        Scene::new(
            points.iter().map(|&p| Particle::at(p)).collect(),
            MaterialParams::default(),
        )
    }

    #[test]
    fn single_particle_at_rest() {
        let config = SimConfig::default();
        let mut grid = Grid::new(&config);
        let scene = scene_of(&[Vec3::new(0.013, 0.2, -0.1)]);
        p2g(&scene, &mut grid).unwrap();
        assert!((grid.total_mass() - 1.0).abs() < 1e-15);
        grid.for_each_active(|_, n| {
            assert_eq!(n.momentum, Vec3::zeros());
            assert_eq!(n.force, Vec3::zeros());
        });
    }

    #[test]
    fn rigid_translation_reaches_every_massive_node() {
        let config = SimConfig::default();
        let mut grid = Grid::new(&config);
        let u = Vec3::new(0.3, -0.2, 0.1);
        let mut scene = scene_of(&[
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.017, 0.031, 0.0),
            Vec3::new(0.1, -0.05, 0.02),
        ]);
        for p in &mut scene.particles {
            p.velocity = u;
        }
        p2g(&scene, &mut grid).unwrap();
        let eps = grid.mass_epsilon();
        grid.for_each_active(|_, n| {
            if n.mass > eps {
                assert!((n.velocity - u).norm() < 1e-14);
            }
        });
    }

    #[test]
    fn nan_state_reports_particle() {
        let config = SimConfig::default();
        let mut grid = Grid::new(&config);
        let mut scene = scene_of(&[Vec3::zeros(), Vec3::zeros(), Vec3::zeros()]);
        scene.particles[1].velocity.x = f64::NAN;
        scene.particles[2].velocity.x = f64::NAN;
        assert!(matches!(
            p2g(&scene, &mut grid),
            Err(Error::NonFinite { particle: 1 })
        ));
    }

    #[test]
    fn deformation_updates() {
        let params = MaterialParams::from_shear(1.0, 1.0, 0.0);
        let mut p = Particle::at(Vec3::zeros());
        update_deformation(0, &mut p, &params, &Mat3::zeros(), 0.1).unwrap();
        assert_eq!(p.f_elastic, Mat3::identity());

        let grad = Mat3::from_diagonal(&Vec3::new(1.0, 0.0, 0.0));
        update_deformation(0, &mut p, &params, &grad, 0.1).unwrap();
        assert_eq!(p.f_elastic, Mat3::from_diagonal(&Vec3::new(1.1, 1.0, 1.0)));
        // γ = 0 leaves the viscous gradient alone.
        assert_eq!(p.f_viscous, Mat3::identity());

        let viscous = MaterialParams::from_shear(1.0, 1.0, 2.0);
        let mut q = Particle::at(Vec3::zeros());
        update_deformation(0, &mut q, &viscous, &grad, 0.1).unwrap();
        assert!((q.f_viscous[(0, 0)] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn stability_guard_trips() {
        let mut p = Particle::at(Vec3::zeros());
        let grad = Mat3::identity() * 10.0;
        let r = update_deformation(4, &mut p, &MaterialParams::default(), &grad, 0.1);
        assert!(matches!(r, Err(Error::StabilityGuard { particle: 4, .. })));
    }
}
