use nalgebra::{Matrix3, SVD};

use crate::error::{Error, Result};
use crate::model::{EyeRegionModel, ParameterVector};
use crate::{Rot3, Vec3};

/// Optimal proper rotation `R` minimising `sum |R a_i - b_i|^2` over
/// centred point sets. Returns `None` when the target set spans fewer than
/// three dimensions.
pub fn kabsch(from: &[Vec3], to: &[Vec3]) -> Option<Rot3> {
    assert_eq!(from.len(), to.len());
    let n = from.len() as f64;
    let ca = from.iter().sum::<Vec3>() / n;
    let cb = to.iter().sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    let mut spread = Matrix3::zeros();
    for (a, b) in from.iter().zip(to) {
        h += (b - cb) * (a - ca).transpose();
        spread += (b - cb) * (b - cb).transpose();
    }
    let s = spread.symmetric_eigenvalues();
    let (lo, hi) = (s.min(), s.max());
    if !(hi > 0.0) || lo <= 1e-9 * hi {
        return None;
    }
    let svd = SVD::new(h, true, true);
    let u = svd.u?;
    let vt = svd.v_t?;
    let d = (u * vt).determinant().signum();
    let m = u * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * vt;
    Some(Rot3::from_matrix_unchecked(m))
}

/// Initial parameters for a first frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Initialization {
    pub phi: ParameterVector,
    /// Set when the landmarks were too degenerate for a rotation estimate
    /// and the identity was used.
    pub degenerate: bool,
}

/// Rigid alignment of the rest-pose landmarks to observed 3D landmarks.
/// Everything else starts at its default.
pub fn initialize(model: &EyeRegionModel, landmarks_3d: Option<&[Vec3]>) -> Result<Initialization> {
    let observed = landmarks_3d.ok_or(Error::InvalidParameter {
        name: "landmarks_3d",
        reason: "initialization needs 3D landmark estimates".into(),
    })?;
    let rest = model.rest_landmarks();
    if observed.len() != rest.len() {
        return Err(Error::Count {
            what: "3D landmarks",
            expected: rest.len(),
            got: observed.len(),
        });
    }
    let mean = observed.iter().sum::<Vec3>() / observed.len() as f64;
    let rotation = kabsch(&rest, observed);
    if rotation.is_none() {
        log::warn!("degenerate landmark configuration; using identity head rotation");
    }
    let (rx, ry, rz) = rotation.unwrap_or_else(Rot3::identity).euler_angles();
    // The rest landmarks are centred on the head origin, so the translation
    // is just the observed centroid.
    let phi = ParameterVector {
        rotation: [rx, ry, rz],
        translation: [mean.x, mean.y, mean.z],
        ..ParameterVector::default()
    };
    Ok(Initialization {
        phi,
        degenerate: rotation.is_none(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::pose::head_rotation;
    use proptest::prelude::*;

    fn cloud() -> Vec<Vec3> {
        (0..12)
            .map(|i| {
                let t = i as f64;
                Vec3::new((t * 1.3).sin() * 20.0, (t * 0.7).cos() * 9.0 + t, (t * 2.1).sin() * 5.0)
            })
            .collect()
    }

    #[test]
    fn identity_and_translation() {
        let a = cloud();
        let b: Vec<Vec3> = a.iter().map(|p| p + Vec3::new(3.0, -2.0, 7.0)).collect();
        let r = kabsch(&a, &b).unwrap();
        assert!((r.matrix() - Matrix3::identity()).norm() < 1e-12);
    }

    #[test]
    fn reflection_still_proper() {
        let a = cloud();
        let b: Vec<Vec3> = a.iter().map(|p| Vec3::new(-p.x, p.y, p.z)).collect();
        let r = kabsch(&a, &b).unwrap();
        assert!((r.matrix().determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planar_targets_are_degenerate() {
        let a = cloud();
        let b: Vec<Vec3> = a.iter().map(|p| Vec3::new(p.x, p.y, 0.0)).collect();
        assert!(kabsch(&a, &b).is_none());
    }

    proptest! {
        #[test]
        fn recovers_rotation(rx in -1.0f64..1.0, ry in -1.0f64..1.0, rz in -1.0f64..1.0) {
            let a = cloud();
            let r = head_rotation(&[rx, ry, rz]);
            let b: Vec<Vec3> = a.iter().map(|p| r * p).collect();
            let got = kabsch(&a, &b).unwrap();
            prop_assert!((got.matrix() - r.matrix()).norm() < 1e-9);
            prop_assert!((got.matrix().determinant() - 1.0).abs() < 1e-12);
        }
    }
}
