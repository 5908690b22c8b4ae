//! Small fixed-size linear algebra used by the simulation core.
//!
//! The 3x3 SVD here is the hot path of every simulation step (one per
//! particle for the elastic stress and one for the splat rotation update),
//! so it is a dedicated cyclic-Jacobi routine rather than a general
//! Golub-Kahan solver. It returns the *signed* decomposition: `U` and `V`
//! are proper rotations and the sign of `det(A)` is carried by the last
//! singular value, so `U Vᵀ` is always the rotation of the polar
//! decomposition.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Quat = UnitQuaternion<f64>;

const JACOBI_MAX_SWEEPS: usize = 16;

/// `A = U diag(sigma) Vᵀ` with `U, V ∈ SO(3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Svd3 {
    pub u: Mat3,
    pub sigma: Vec3,
    pub v: Mat3,
}

impl Svd3 {
    pub fn rotation(&self) -> Mat3 {
        self.u * self.v.transpose()
    }

    pub fn recompose(&self) -> Mat3 {
        self.u * Mat3::from_diagonal(&self.sigma) * self.v.transpose()
    }
}

type M = [[f64; 3]; 3];

#[inline]
fn to_rows(a: &Mat3) -> M {
    [
        [a[(0, 0)], a[(0, 1)], a[(0, 2)]],
        [a[(1, 0)], a[(1, 1)], a[(1, 2)]],
        [a[(2, 0)], a[(2, 1)], a[(2, 2)]],
    ]
}

#[inline]
fn from_rows(m: &M) -> Mat3 {
    Mat3::new(
        m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
    )
}

/// Signed singular value decomposition of a 3x3 matrix.
///
/// Singular values are sorted by decreasing magnitude; only the last one
/// can be negative (when `det(A) < 0`).
pub fn svd3(a: &Mat3) -> Svd3 {
    let a = to_rows(a);

    // S = AᵀA
    let mut s = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = a[0][i] * a[0][j] + a[1][i] * a[1][j] + a[2][i] * a[2][j];
            s[i][j] = v;
            s[j][i] = v;
        }
    }

    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for &(p, q, r) in &[(0usize, 1usize, 2usize), (0, 2, 1), (1, 2, 0)] {
            let apq = s[p][q];
            let scale = s[p][p].abs() + s[q][q].abs();
            if apq == 0.0 || apq.abs() <= 1e-18 * scale {
                s[p][q] = 0.0;
                s[q][p] = 0.0;
                continue;
            }
            rotated = true;
            let theta = (s[q][q] - s[p][p]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let sn = t * c;

            s[p][p] -= t * apq;
            s[q][q] += t * apq;
            s[p][q] = 0.0;
            s[q][p] = 0.0;
            let srp = s[r][p];
            let srq = s[r][q];
            s[r][p] = c * srp - sn * srq;
            s[p][r] = s[r][p];
            s[r][q] = sn * srp + c * srq;
            s[q][r] = s[r][q];

            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - sn * vq;
                row[q] = sn * vp + c * vq;
            }
        }
        if !rotated {
            break;
        }
    }

    // B = A V
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = a[i][0] * v[0][j] + a[i][1] * v[1][j] + a[i][2] * v[2][j];
        }
    }

    // Sort columns by decreasing norm; every swap flips one column sign so
    // V stays a proper rotation.
    let norm2 = |b: &M, j: usize| b[0][j] * b[0][j] + b[1][j] * b[1][j] + b[2][j] * b[2][j];
    let mut n = [norm2(&b, 0), norm2(&b, 1), norm2(&b, 2)];
    let swap = |b: &mut M, v: &mut M, n: &mut [f64; 3], i: usize, j: usize| {
        for row in 0..3 {
            let (bi, bj) = (b[row][i], b[row][j]);
            b[row][i] = -bj;
            b[row][j] = bi;
            let (vi, vj) = (v[row][i], v[row][j]);
            v[row][i] = -vj;
            v[row][j] = vi;
        }
        n.swap(i, j);
    };
    if n[0] < n[1] {
        swap(&mut b, &mut v, &mut n, 0, 1);
    }
    if n[0] < n[2] {
        swap(&mut b, &mut v, &mut n, 0, 2);
    }
    if n[1] < n[2] {
        swap(&mut b, &mut v, &mut n, 1, 2);
    }

    // QR of B by Givens rotations: B = U R with R upper triangular
    // (diagonal up to Jacobi residual since B has orthogonal columns).
    let mut u = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for &(p, q, col) in &[(0usize, 1usize, 0usize), (0, 2, 0), (1, 2, 1)] {
        let x = b[p][col];
        let y = b[q][col];
        let rr = x.hypot(y);
        if rr == 0.0 {
            continue;
        }
        let c = x / rr;
        let sn = y / rr;
        for k in 0..3 {
            let bp = b[p][k];
            let bq = b[q][k];
            b[p][k] = c * bp + sn * bq;
            b[q][k] = -sn * bp + c * bq;
        }
        for row in u.iter_mut() {
            let up = row[p];
            let uq = row[q];
            row[p] = c * up + sn * uq;
            row[q] = -sn * up + c * uq;
        }
    }

    Svd3 {
        u: from_rows(&u),
        sigma: Vec3::new(b[0][0], b[1][1], b[2][2]),
        v: from_rows(&v),
    }
}

/// Rotation factor `R` of the polar decomposition `F = R S`.
///
/// Uses the determinant-scaled Newton iteration `X ← ½(ζX + ζ⁻¹X⁻ᵀ)` when
/// `det F > 0`, which converges quadratically and is far cheaper than an
/// SVD near the identity. Other inputs go through [`svd3`].
pub fn polar_rotation(f: &Mat3) -> Mat3 {
    let mut x: [f64; 9] = std::array::from_fn(|i| f[(i / 3, i % 3)]);
    let mut converged = false;
    for _ in 0..32 {
        let c = cofactor(&x);
        let det = x[0] * c[0] + x[1] * c[1] + x[2] * c[2];
        if !(det > 0.0) || !det.is_finite() {
            break;
        }
        // Scaling only pays off far from convergence.
        let zeta = if (det - 1.0).abs() < 1e-3 {
            1.0
        } else {
            det.cbrt().recip()
        };
        let a = 0.5 * zeta;
        let b = 0.5 / (zeta * det);
        let mut change: f64 = 0.0;
        for i in 0..9 {
            let next = a * x[i] + b * c[i];
            change = change.max((next - x[i]).abs());
            x[i] = next;
        }
        if converged {
            return Mat3::from_row_slice(&x);
        }
        // One more sweep after this reaches round-off.
        converged = change <= 1e-8;
    }
    svd3(f).rotation()
}

/// Row-major cofactor matrix, equal to `det(A) A⁻ᵀ`.
#[inline]
fn cofactor(m: &[f64; 9]) -> [f64; 9] {
    [
        m[4] * m[8] - m[5] * m[7],
        m[5] * m[6] - m[3] * m[8],
        m[3] * m[7] - m[4] * m[6],
        m[2] * m[7] - m[1] * m[8],
        m[0] * m[8] - m[2] * m[6],
        m[1] * m[6] - m[0] * m[7],
        m[1] * m[5] - m[2] * m[4],
        m[2] * m[3] - m[0] * m[5],
        m[0] * m[4] - m[1] * m[3],
    ]
}

pub fn symmetric_part(m: &Mat3) -> Mat3 {
    (m + m.transpose()) * 0.5
}

/// Converts an (approximately) orthonormal matrix into a unit quaternion.
pub fn quat_from_rotation(r: &Mat3) -> Quat {
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng) -> Mat3 {
        Mat3::from_fn(|_, _| rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn svd_recomposes_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let a = random_matrix(&mut rng);
            let svd = svd3(&a);
            assert!((svd.recompose() - a).norm() < 1e-12 * a.norm().max(1.0));
            assert!((svd.u.determinant() - 1.0).abs() < 1e-12);
            assert!((svd.v.determinant() - 1.0).abs() < 1e-12);
            assert!((svd.u.transpose() * svd.u - Mat3::identity()).norm() < 1e-12);
            assert!(svd.sigma[0] >= svd.sigma[1].abs() - 1e-14);
            assert!(svd.sigma[1] >= svd.sigma[2].abs() - 1e-14);
            assert!(svd.sigma[0] >= 0.0 && svd.sigma[1] >= 0.0);
            assert_eq!(svd.sigma[2] < 0.0, a.determinant() < 0.0);
        }
    }

    #[test]
    fn svd_matches_nalgebra_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = random_matrix(&mut rng);
            let ours = svd3(&a).sigma.map(f64::abs);
            let mut theirs: Vec<f64> = a.svd(false, false).singular_values.iter().copied().collect();
            theirs.sort_by(|x, y| y.total_cmp(x));
            for i in 0..3 {
                assert!((ours[i] - theirs[i]).abs() < 1e-12, "{ours:?} vs {theirs:?}");
            }
        }
    }

    #[test]
    fn svd_handles_degenerate_inputs() {
        for a in [
            Mat3::identity(),
            Mat3::zeros(),
            Mat3::from_diagonal(&Vec3::new(2.0, 2.0, 0.5)),
            Mat3::from_diagonal(&Vec3::new(1.0, -1.0, 1.0)),
            Mat3::new(1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        ] {
            let svd = svd3(&a);
            assert!((svd.recompose() - a).norm() < 1e-12, "{a}");
        }
    }

    #[test]
    fn newton_polar_matches_svd_polar() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 500 {
            let f = Mat3::identity() + random_matrix(&mut rng) * 0.4;
            if f.determinant() <= 0.05 {
                continue;
            }
            checked += 1;
            let a = polar_rotation(&f);
            let b = svd3(&f).rotation();
            assert!((a - b).norm() < 1e-12, "{f}");
            assert!((a.transpose() * a - Mat3::identity()).norm() < 1e-13);
        }
    }

    #[test]
    fn polar_of_rotation_is_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let axis = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            let q = UnitQuaternion::from_scaled_axis(axis * 3.0);
            let r = q.to_rotation_matrix().into_inner();
            assert!((polar_rotation(&r) - r).norm() < 1e-12);
        }
    }
}
