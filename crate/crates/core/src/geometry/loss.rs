use super::bundle::TrajectoryBundle;
use crate::error::{Error, Result};
use crate::math::Vec3;

/// Sum over each neighbour set of `Δμ_j · Δμ_k` for unordered pairs `j < k`.
pub fn traj_loss_paper(bundle: &TrajectoryBundle, t: usize) -> f64 {
    pair_sum(bundle, t, |a, b| a.dot(b))
}

/// Sum over each neighbour set of `‖Δμ_j − Δμ_k‖²` for unordered pairs.
pub fn traj_loss_relative(bundle: &TrajectoryBundle, t: usize) -> f64 {
    pair_sum(bundle, t, |a, b| (a - b).norm_squared())
}

fn pair_sum(bundle: &TrajectoryBundle, t: usize, f: impl Fn(&Vec3, &Vec3) -> f64) -> f64 {
    assert!(t >= 1 && t < bundle.frame_count(), "frame {t} has no displacement");
    let d: Vec<Vec3> = (0..bundle.point_count()).map(|i| bundle.displacement(t, i)).collect();
    let mut total = 0.0;
    for set in &bundle.neighbors {
        for (a, &j) in set.iter().enumerate() {
            for &k in &set[a + 1..] {
                total += f(&d[j], &d[k]);
            }
        }
    }
    total
}

/// Penalizes splats that are too large or too elongated:
/// `Σ ReLU(max S − r_m) + ReLU(max S / min S − r_ani)`.
pub fn aniso_loss(scales: &[Vec3], r_m: f64, r_ani: f64) -> Result<f64> {
    let mut total = 0.0;
    for (i, s) in scales.iter().enumerate() {
        let (lo, hi) = (s.min(), s.max());
        if !(lo > 0.0) {
            return Err(Error::Domain(format!("kernel {i} has a non-positive scale")));
        }
        total += (hi - r_m).max(0.0) + (hi / lo - r_ani).max(0.0);
    }
    Ok(total)
}

pub const DEFAULT_MAX_SCALE: f64 = 1.0;
pub const DEFAULT_ANISOTROPY: f64 = 3.0;
