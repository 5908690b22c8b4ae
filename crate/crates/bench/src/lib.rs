//! Shared fixtures for the benchmarks.

use tissuesim::{MaterialParams, Particle, Quat, Scene, Vec3};

/// `n³` splats on a 0.04 lattice resting on the floor, centred in x and y.
pub fn block_scene(n: usize) -> Scene {
    let sp = 0.04;
    let c = (n as f64 - 1.0) / 2.0;
    let mut ps = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let pos = Vec3::new((i as f64 - c) * sp, (j as f64 - c) * sp, -0.95 + k as f64 * sp);
                let shade = 0.3 + 0.5 * ((i + 2 * j + 3 * k) % 5) as f64 / 4.0;
                ps.push(Particle::splat(pos, Quat::identity(), Vec3::repeat(0.03), 0.8, Vec3::new(shade, 0.3, 0.4)));
            }
        }
    }
    let len = ps.len();
    let mut scene = Scene::new(ps, MaterialParams::from_shear(2e3, 1.0, 0.0));
    scene.assign_uniform_mass(len as f64 * sp * sp * sp, 1e3);
    scene
}

/// Deterministic pseudo-random points in the unit cube.
pub fn scattered_points(n: usize, seed: u64) -> Vec<Vec3> {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..n).map(|_| Vec3::new(next(), next(), next())).collect()
}
