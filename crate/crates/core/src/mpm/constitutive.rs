//! Fixed corotated elasticity and the viscous branch.

use crate::math::{polar_rotation, svd3, Mat3};

/// Deformation gradient with non-positive determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inverted {
    pub det: f64,
}

/// Energy density `μ Σ(σ_i − 1)² + λ/2 (J − 1)²`.
pub fn corotated_energy(f: &Mat3, mu: f64, lambda: f64) -> f64 {
    let s = svd3(f);
    let j = f.determinant();
    mu * s.sigma.iter().map(|x| (x - 1.0).powi(2)).sum::<f64>() + 0.5 * lambda * (j - 1.0).powi(2)
}

/// First Piola-Kirchhoff stress `∂Ψ/∂F = 2μ(F − R) + λ(J − 1)J F⁻ᵀ`.
pub fn corotated_piola(f: &Mat3, mu: f64, lambda: f64) -> Result<Mat3, Inverted> {
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(Inverted { det: j });
    }
    let r = polar_rotation(f);
    let f_inv_t = f.try_inverse().ok_or(Inverted { det: j })?.transpose();
    Ok((f - r) * (2.0 * mu) + f_inv_t * (lambda * (j - 1.0) * j))
}

/// Kirchhoff stress `τ = Jσ` given the polar rotation of `f`.
#[inline]
pub(crate) fn corotated_kirchhoff(f: &Mat3, r: &Mat3, j: f64, mu: f64, lambda: f64) -> Mat3 {
    (f - r) * f.transpose() * (2.0 * mu) + Mat3::identity() * (lambda * (j - 1.0) * j)
}

/// Cauchy stress of the fixed corotated model.
pub fn corotated_stress(f: &Mat3, mu: f64, lambda: f64) -> Result<Mat3, Inverted> {
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(Inverted { det: j });
    }
    let r = polar_rotation(f);
    Ok(corotated_kirchhoff(f, &r, j, mu, lambda) / j)
}

/// Viscous Cauchy stress `det(F_v) · 2η · D`.
pub fn viscous_stress(f_viscous: &Mat3, d: &Mat3, eta: f64) -> Mat3 {
    d * (f_viscous.determinant() * 2.0 * eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    #[test]
    fn rest_state_is_stress_free() {
        let s = corotated_stress(&Mat3::identity(), 10.0, 40.0).unwrap();
        assert!(s.norm() < 1e-14);
    }

    #[test]
    fn uniaxial_hand_case() {
        let f = Mat3::from_diagonal(&Vec3::new(1.1, 1.0, 1.0));
        let s = corotated_stress(&f, 1.0, 0.0).unwrap();
        let expected = Mat3::from_diagonal(&Vec3::new(0.2, 0.0, 0.0));
        assert!((s - expected).norm() < 1e-12);
    }

    #[test]
    fn inverted_gradient_errors() {
        let f = Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0));
        assert_eq!(corotated_stress(&f, 1.0, 1.0), Err(Inverted { det: -1.0 }));
    }

    #[test]
    fn viscous_hand_cases() {
        let d = Mat3::from_diagonal(&Vec3::new(0.1, 0.0, 0.0));
        let s = viscous_stress(&Mat3::identity(), &d, 2.0);
        assert_eq!(s, Mat3::from_diagonal(&Vec3::new(0.4, 0.0, 0.0)));
        assert_eq!(viscous_stress(&Mat3::identity(), &d, 0.0), Mat3::zeros());
        let fv = Mat3::new(1.2, 0.1, 0.0, 0.0, 0.9, 0.3, 0.0, 0.0, 1.1);
        assert_eq!(viscous_stress(&fv, &Mat3::zeros(), 5.0), Mat3::zeros());
    }

    fn rotation(axis: [f64; 3], angle: f64) -> Mat3 {
        let axis = nalgebra::Unit::new_normalize(Vec3::from(axis));
        Rotation3::from_axis_angle(&axis, angle).into_inner()
    }

    fn arb_f() -> impl Strategy<Value = Mat3> {
        proptest::array::uniform9(-0.4f64..0.4).prop_filter_map("det range", |v| {
            let f = Mat3::identity() + Mat3::from_row_slice(&v);
            let d = f.determinant();
            (0.5..=2.0).contains(&d).then_some(f)
        })
    }

    proptest! {
        #[test]
        fn rotations_are_stress_free(ax in proptest::array::uniform3(-1.0f64..1.0), angle in -3.1f64..3.1) {
            prop_assume!(Vec3::from(ax).norm() > 1e-3);
            let s = corotated_stress(&rotation(ax, angle), 3.0, 7.0).unwrap();
            prop_assert!(s.norm() <= 1e-10);
        }

        #[test]
        fn objectivity(f in arb_f(), ax in proptest::array::uniform3(-1.0f64..1.0), angle in -3.1f64..3.1) {
            prop_assume!(Vec3::from(ax).norm() > 1e-3);
            let q = rotation(ax, angle);
            let a = corotated_stress(&(q * f), 2.0, 5.0).unwrap();
            let b = q * corotated_stress(&f, 2.0, 5.0).unwrap() * q.transpose();
            prop_assert!((a - b).norm() < 1e-8);
        }

        #[test]
        fn cauchy_is_symmetric(f in arb_f()) {
            let s = corotated_stress(&f, 2.0, 5.0).unwrap();
            prop_assert!((s - s.transpose()).norm() < 1e-9);
        }

        #[test]
        fn cauchy_matches_piola(f in arb_f()) {
            let p = corotated_piola(&f, 2.0, 5.0).unwrap();
            let s = corotated_stress(&f, 2.0, 5.0).unwrap();
            let from_p = p * f.transpose() / f.determinant();
            prop_assert!((s - from_p).norm() < 1e-9);
        }
    }
}
