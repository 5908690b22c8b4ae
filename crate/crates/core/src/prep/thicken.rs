//! Surface thickening: layered copies of surface splats pushed along view
//! rays, kept only inside the source bounding box with its far depth
//! extended.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::normalize::SceneBounds;
use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};
use crate::scene::Particle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThickenConfig {
    /// Number of layers `L`; layer `l` scales positions by `(u + l)/L`.
    pub layers: usize,
    /// Relative extension of the far depth bound.
    pub z_expand: f64,
    pub seed: u64,
    /// Optional limit on the total output count; kept copies are then
    /// subsampled uniformly.
    pub cap: Option<usize>,
}

impl Default for ThickenConfig {
    fn default() -> Self {
        ThickenConfig { layers: 1000, z_expand: 0.25, seed: 0, cap: None }
    }
}

/// Frame in which copies are scaled: `x_view = R (x − origin)`, with the
/// origin at the camera centre and `+z` along the viewing direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewFrame {
    pub origin: Vec3,
    pub rotation: Mat3,
}

impl ViewFrame {
    pub fn identity() -> Self {
        ViewFrame { origin: Vec3::zeros(), rotation: Mat3::identity() }
    }

    pub fn at(origin: Vec3) -> Self {
        ViewFrame { origin, rotation: Mat3::identity() }
    }

    pub fn from_camera(camera: &Camera) -> Self {
        ViewFrame { origin: camera.eye, rotation: camera.rotation }
    }

    pub fn to_view(&self, x: &Vec3) -> Vec3 {
        self.rotation * (x - self.origin)
    }

    pub fn to_world(&self, v: &Vec3) -> Vec3 {
        self.rotation.transpose() * v + self.origin
    }
}

/// What thickening did; stored next to the output scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThickenReport {
    pub layers: usize,
    pub z_expand: f64,
    pub seed: u64,
    pub cap: Option<usize>,
    pub input_count: usize,
    pub candidates: usize,
    /// Copies that passed the bounding-box test.
    pub kept: usize,
    /// Copies actually emitted (differs from `kept` only under a cap).
    pub emitted: usize,
    pub output_count: usize,
    /// Bounds in view coordinates with the far depth already extended.
    pub bounds_min: [f64; 3],
    pub bounds_max: [f64; 3],
}

impl ThickenReport {
    pub fn capped(&self) -> bool {
        self.emitted < self.kept
    }
}

/// Bounds used by the keep test, in view coordinates.
pub fn keep_bounds(particles: &[Particle], view: &ViewFrame, z_expand: f64) -> Result<SceneBounds> {
    let mut b = SceneBounds::of(particles.iter().map(|p| view.to_view(&p.position)))?;
    b.max.z *= 1.0 + z_expand;
    Ok(b)
}

/// Generator for layer `l`: one ChaCha stream per layer, so layers can be
/// processed in any order.
pub fn layer_rng(seed: u64, layer: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(layer as u64);
    rng
}

/// Adds thickening copies behind a surface. The input particles are
/// returned unchanged as a prefix. Every view-space depth must be positive.
pub fn thicken(
    particles: &[Particle],
    config: &ThickenConfig,
    view: &ViewFrame,
) -> Result<(Vec<Particle>, ThickenReport)> {
    if particles.is_empty() {
        return Err(Error::EmptyScene);
    }
    if config.layers == 0 {
        return Err(Error::InvalidConfig("thickening needs at least one layer".into()));
    }
    if !(config.z_expand >= 0.0) {
        return Err(Error::InvalidConfig("z_expand must be non-negative".into()));
    }
    if let Some(cap) = config.cap {
        if cap < particles.len() {
            return Err(Error::InvalidConfig(format!(
                "cap {cap} is below the input count {}",
                particles.len()
            )));
        }
    }
    let local: Vec<Vec3> = particles.iter().map(|p| view.to_view(&p.position)).collect();
    if let Some(i) = local.iter().position(|v| !(v.z > 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "particle {i} is not in front of the thickening origin (view depth {})",
            local[i].z
        )));
    }
    let bounds = keep_bounds(particles, view, config.z_expand)?;
    let l_total = config.layers as f64;

    // (source index, view position) per kept copy, in layer-major order.
    let kept: Vec<(usize, Vec3)> = (1..=config.layers)
        .into_par_iter()
        .map(|l| {
            let mut rng = layer_rng(config.seed, l);
            let mut out = Vec::new();
            for (i, mu) in local.iter().enumerate() {
                let u: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
                let v = Vec3::new(
                    mu.x * (u[0] + l as f64) / l_total,
                    mu.y * (u[1] + l as f64) / l_total,
                    mu.z * (u[2] + l as f64) / l_total,
                );
                if bounds.contains(&v) {
                    out.push((i, v));
                }
            }
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let kept_count = kept.len();
    let selected: Vec<(usize, Vec3)> = match config.cap {
        Some(cap) if particles.len() + kept_count > cap => {
            let mut rng = layer_rng(config.seed, 0);
            let mut idx = rand::seq::index::sample(&mut rng, kept_count, cap - particles.len()).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|k| kept[k]).collect()
        }
        _ => kept,
    };

    let mut out = Vec::with_capacity(particles.len() + selected.len());
    out.extend_from_slice(particles);
    for (i, v) in &selected {
        let mut p = particles[*i].clone();
        p.position = view.to_world(v);
        out.push(p);
    }
    let report = ThickenReport {
        layers: config.layers,
        z_expand: config.z_expand,
        seed: config.seed,
        cap: config.cap,
        input_count: particles.len(),
        candidates: particles.len() * config.layers,
        kept: kept_count,
        emitted: selected.len(),
        output_count: out.len(),
        bounds_min: bounds.min.into(),
        bounds_max: bounds.max.into(),
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(p: [f64; 3]) -> Particle {
        Particle::at(Vec3::from(p))
    }

    /// Independent replay of the layered sampling.
    fn brute_force_count(local: &[Vec3], layers: usize, z_expand: f64, seed: u64) -> usize {
        let mut lo = local[0];
        let mut hi = local[0];
        for p in local {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        hi.z *= 1.0 + z_expand;
        let mut count = 0;
        for l in 1..=layers {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(l as u64);
            for mu in local {
                let mut inside = true;
                for k in 0..3 {
                    let u: f64 = rng.gen();
                    let c = mu[k] * (u + l as f64) / layers as f64;
                    inside &= c >= lo[k] && c <= hi[k];
                }
                count += inside as usize;
            }
        }
        count
    }

    #[test]
    fn single_kernel_count_matches_enumeration() {
        let ps = vec![at([0.0, 0.0, 0.8])];
        let (out, report) = thicken(&ps, &ThickenConfig { layers: 1000, seed: 5, ..Default::default() }, &ViewFrame::identity()).unwrap();
        let expected = brute_force_count(&[Vec3::new(0.0, 0.0, 0.8)], 1000, 0.25, 5);
        assert_eq!(report.kept, expected);
        assert_eq!(out.len(), 1 + expected);
        // Only copies pushed outward (factor ≥ 1) stay inside [z_M, 1.25 z_M].
        assert!(expected > 0 && expected <= 2);
    }

    #[test]
    fn copies_stay_in_expanded_box_and_prefix_is_preserved() {
        let ps: Vec<Particle> = (0..20)
            .map(|i| at([0.1 + 0.02 * i as f64, 0.3 - 0.01 * i as f64, 1.0 + 0.03 * (i % 5) as f64]))
            .collect();
        let cfg = ThickenConfig { layers: 200, seed: 9, ..Default::default() };
        let (out, report) = thicken(&ps, &cfg, &ViewFrame::identity()).unwrap();
        assert_eq!(&out[..ps.len()], &ps[..]);
        let b = SceneBounds { min: report.bounds_min.into(), max: report.bounds_max.into() };
        assert!(out.iter().all(|p| b.contains(&p.position)));
        let local: Vec<Vec3> = ps.iter().map(|p| p.position).collect();
        assert_eq!(report.kept, brute_force_count(&local, 200, 0.25, 9));
        let (again, _) = thicken(&ps, &cfg, &ViewFrame::identity()).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn last_layer_keeps_center_kernel() {
        // Box spans the two corner kernels; the centre kernel's last-layer
        // copy (factor in [1, 1 + 1/L)) stays inside.
        let ps = vec![at([0.0, 0.0, 0.5]), at([1.0, 1.0, 1.0]), at([0.5, 0.5, 0.75])];
        let cfg = ThickenConfig { layers: 10, seed: 1, ..Default::default() };
        let (out, _) = thicken(&ps, &cfg, &ViewFrame::identity()).unwrap();
        let c = Vec3::new(0.5, 0.5, 0.75);
        assert!(out[3..].iter().any(|p| (p.position - c).norm() < 0.11 && (0..3).all(|k| p.position[k] >= c[k])));
    }

    #[test]
    fn camera_frame_matches_shifted_identity() {
        let ps = vec![at([0.2, 0.1, -0.3]), at([-0.4, 0.3, -0.1]), at([0.0, -0.2, -0.5])];
        let cam = Camera::look_at(Vec3::new(0.0, 0.0, 2.0), Vec3::zeros(), Vec3::y(), 100.0, 8, 8).unwrap();
        let cfg = ThickenConfig { layers: 50, seed: 3, ..Default::default() };
        let (out, report) = thicken(&ps, &cfg, &ViewFrame::from_camera(&cam)).unwrap();
        let local: Vec<Vec3> = ps.iter().map(|p| cam.to_camera(&p.position)).collect();
        assert_eq!(report.kept, brute_force_count(&local, 50, 0.25, 3));
        // Copies move away from the camera along +view z, i.e. toward −z.
        assert!(out[3..].iter().all(|p| p.position.z < 2.0));
    }

    #[test]
    fn cap_and_preconditions() {
        let ps: Vec<Particle> = (0..10).map(|i| at([0.1 * i as f64, 0.0, 1.0 + 0.01 * i as f64])).collect();
        let cfg = ThickenConfig { layers: 100, seed: 2, cap: Some(15), ..Default::default() };
        let (out, report) = thicken(&ps, &cfg, &ViewFrame::identity()).unwrap();
        assert_eq!(out.len(), 15);
        assert!(report.capped() && report.kept > 5);
        let small = ThickenConfig { cap: Some(3), ..cfg };
        assert!(thicken(&ps, &small, &ViewFrame::identity()).is_err());
        assert!(thicken(&[at([0.0, 0.0, -1.0])], &ThickenConfig::default(), &ViewFrame::identity()).is_err());
    }
}
