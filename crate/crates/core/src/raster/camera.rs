use log::warn;

use crate::error::{Error, Result};
use crate::Vec3;

/// Pinhole intrinsics. The camera sits at the origin looking down `-z`;
/// `project` maps camera-space millimetres to continuous pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::InvalidParameter {
                name: "camera.focal",
                reason: format!("focal lengths must be positive, got {} {}", self.fx, self.fy),
            });
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::ZeroArea);
        }
        let (w, h) = (self.width as f64, self.height as f64);
        if !(0.0..=w).contains(&self.cx) || !(0.0..=h).contains(&self.cy) {
            warn!(
                "principal point ({}, {}) lies outside the {}x{} image",
                self.cx, self.cy, self.width, self.height
            );
        }
        Ok(())
    }

    /// Same intrinsics rescaled to a different image size.
    pub fn scaled(&self, width: usize, height: usize) -> Self {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width,
            height,
        }
    }

    /// `u = cx + fx x / (-z)`, `v = cy + fy y / (-z)`.
    #[inline]
    pub fn project(&self, p: &Vec3) -> Result<[f64; 2]> {
        if !(p.z < 0.0) {
            return Err(Error::BehindCamera(p.z));
        }
        Ok(self.project_unchecked(p))
    }

    #[inline]
    pub(crate) fn project_unchecked(&self, p: &Vec3) -> [f64; 2] {
        let inv = 1.0 / -p.z;
        [self.cx + self.fx * p.x * inv, self.cy + self.fy * p.y * inv]
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cam() -> Camera {
        Camera::new(500.0, 480.0, 64.0, 48.0, 128, 96).unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        assert_eq!(cam().project(&Vec3::new(0.0, 0.0, -1000.0)).unwrap(), [64.0, 48.0]);
    }

    #[test]
    fn halving_depth_doubles_offset() {
        let c = cam();
        let a = c.project(&Vec3::new(3.0, -2.0, -400.0)).unwrap();
        let b = c.project(&Vec3::new(3.0, -2.0, -200.0)).unwrap();
        assert!(((b[0] - 64.0) - 2.0 * (a[0] - 64.0)).abs() < 1e-12);
        assert!(((b[1] - 48.0) - 2.0 * (a[1] - 48.0)).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_is_rejected() {
        assert!(matches!(
            cam().project(&Vec3::new(0.0, 0.0, 0.0)),
            Err(Error::BehindCamera(_))
        ));
        assert!(cam().project(&Vec3::new(0.0, 0.0, 5.0)).is_err());
    }

    #[test]
    fn invalid_intrinsics() {
        assert!(Camera::new(0.0, 1.0, 0.0, 0.0, 10, 10).is_err());
        assert!(matches!(Camera::new(1.0, 1.0, 0.0, 0.0, 0, 10), Err(Error::ZeroArea)));
    }

    proptest! {
        #[test]
        fn projection_is_scale_invariant(
            x in -200.0f64..200.0, y in -200.0f64..200.0, z in -2000.0f64..-10.0, s in 0.01f64..50.0
        ) {
            let c = cam();
            let a = c.project(&Vec3::new(x, y, z)).unwrap();
            let b = c.project(&Vec3::new(s * x, s * y, s * z)).unwrap();
            prop_assert!((a[0] - b[0]).abs() < 1e-9 * (1.0 + a[0].abs()));
            prop_assert!((a[1] - b[1]).abs() < 1e-9 * (1.0 + a[1].abs()));
        }
    }
}
