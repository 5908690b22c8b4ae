//! Perspective projection of 3D Gaussians to screen-space ellipses.

use crate::camera::Camera;
use crate::math::{Mat3, Vec3};
use crate::scene::Particle;

/// Eigenvalue floor of the screen covariance (px²); keeps sub-pixel splats
/// from aliasing away.
pub const COVARIANCE_FLOOR: f64 = 0.3;

/// Contributions with alpha below this are skipped.
pub const ALPHA_MIN: f64 = 1.0 / 255.0;

/// Upper clamp on a single splat's alpha.
pub const ALPHA_MAX: f64 = 0.999;

/// A splat in screen space, ready for compositing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedSplat {
    /// Index of the source particle.
    pub index: usize,
    /// Pixel coordinates of the centre.
    pub center: [f64; 2],
    /// Screen covariance `[Σxx, Σxy, Σyy]`.
    pub cov: [f64; 3],
    /// Inverse covariance `[a, b, c]`, so `q = a dx² + 2b dx dy + c dy²`.
    pub conic: [f64; 3],
    /// Camera-space depth.
    pub depth: f64,
    pub opacity: f64,
    pub color: [f64; 3],
    /// Inclusive pixel bounds `[x0, y0, x1, y1]` outside of which alpha
    /// never reaches [`ALPHA_MIN`].
    pub bounds: [i64; 4],
}

impl ProjectedSplat {
    /// Alpha at pixel centre `(px, py)` before thresholding.
    #[inline]
    pub fn alpha_at(&self, px: f64, py: f64) -> f64 {
        let dx = px - self.center[0];
        let dy = py - self.center[1];
        let [a, b, c] = self.conic;
        let q = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy;
        (self.opacity * (-0.5 * q).exp()).min(ALPHA_MAX)
    }
}

/// World-space covariance `R S Sᵀ Rᵀ`.
pub fn covariance_3d(p: &Particle) -> Mat3 {
    let r = p.rotation.to_rotation_matrix().into_inner();
    let s = Mat3::from_diagonal(&p.scale);
    let m = r * s;
    m * m.transpose()
}

/// Projects one particle; `None` when it lies in front of the near plane or
/// can never contribute a visible alpha.
pub fn project_splat(index: usize, p: &Particle, camera: &Camera) -> Option<ProjectedSplat> {
    let t = camera.to_camera(&p.position);
    if !(t.z > camera.near) || !(p.opacity >= ALPHA_MIN) {
        return None;
    }
    let (fx, fy) = (camera.fx, camera.fy);
    let inv_z = 1.0 / t.z;
    let center = [fx * t.x * inv_z + camera.cx, fy * t.y * inv_z + camera.cy];
    // Affine approximation of the perspective map around the centre.
    let j0 = Vec3::new(fx * inv_z, 0.0, -fx * t.x * inv_z * inv_z);
    let j1 = Vec3::new(0.0, fy * inv_z, -fy * t.y * inv_z * inv_z);
    let w = camera.rotation;
    let sigma = w * covariance_3d(p) * w.transpose();
    let s0 = sigma * j0;
    let s1 = sigma * j1;
    let raw = [j0.dot(&s0), j0.dot(&s1), j1.dot(&s1)];
    let cov = floor_eigenvalues(raw, COVARIANCE_FLOOR);
    let det = cov[0] * cov[2] - cov[1] * cov[1];
    let conic = [cov[2] / det, -cov[1] / det, cov[0] / det];
    if !(cov.iter().chain(&conic).all(|v| v.is_finite()) && center.iter().all(|v| v.is_finite())) {
        return None;
    }
    let opacity = p.opacity.min(1.0);
    // Where o·exp(−q/2) ≥ 1/255 the quadratic form is at most 2 ln(255 o);
    // the ellipse extent along an axis is sqrt(that · Σ_axis).
    let q_max = 2.0 * (opacity / ALPHA_MIN).ln();
    let rx = (q_max * cov[0]).sqrt() + 1.0;
    let ry = (q_max * cov[2]).sqrt() + 1.0;
    let bounds = [
        (center[0] - rx).floor() as i64,
        (center[1] - ry).floor() as i64,
        (center[0] + rx).ceil() as i64,
        (center[1] + ry).ceil() as i64,
    ];
    Some(ProjectedSplat {
        index,
        center,
        cov,
        conic,
        depth: t.z,
        opacity,
        color: [p.color.x, p.color.y, p.color.z],
        bounds,
    })
}

/// Clamps the eigenvalues of a symmetric 2×2 matrix from below.
fn floor_eigenvalues(m: [f64; 3], floor: f64) -> [f64; 3] {
    let [a, b, c] = m;
    let mean = 0.5 * (a + c);
    let diff = 0.5 * (a - c);
    let rad = (diff * diff + b * b).sqrt();
    let (l1, l2) = (mean + rad, mean - rad);
    if l2 >= floor {
        return m;
    }
    let (n1, n2) = (l1.max(floor), l2.max(floor));
    if rad < 1e-300 {
        return [n1, 0.0, n1];
    }
    // Unit eigenvector of l1.
    let (ex, ey) = if diff >= 0.0 {
        let v = (rad + diff, b);
        let n = (v.0 * v.0 + v.1 * v.1).sqrt();
        (v.0 / n, v.1 / n)
    } else {
        let v = (b, rad - diff);
        let n = (v.0 * v.0 + v.1 * v.1).sqrt();
        (v.0 / n, v.1 / n)
    };
    [
        n1 * ex * ex + n2 * ey * ey,
        (n1 - n2) * ex * ey,
        n1 * ey * ey + n2 * ex * ex,
    ]
}
