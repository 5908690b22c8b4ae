#![allow(dead_code)]

use tissuesim::{MaterialParams, Particle, Quat, Scene, Vec3};

/// Cube of `n³` splats on a 0.04 lattice, resting on the floor band and
/// centred under the default camera.
pub fn block_scene(n: usize) -> Scene {
    let sp = 0.04;
    let c = (n as f64 - 1.0) / 2.0;
    let mut ps = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let pos = Vec3::new((i as f64 - c) * sp, (j as f64 - c) * sp, -0.95 + k as f64 * sp);
                let shade = if (i + j + k) % 2 == 0 { 0.8 } else { 0.5 };
                ps.push(Particle::splat(pos, Quat::identity(), Vec3::repeat(0.03), 0.9, Vec3::new(shade, 0.3, 0.3)));
            }
        }
    }
    let len = ps.len();
    let mut scene = Scene::new(ps, MaterialParams::from_shear(2e3, 1.0, 0.0));
    scene.assign_uniform_mass(len as f64 * sp * sp * sp, 1e3);
    scene
}
