//! Eyeball shading helpers: corneal refraction, reflection and eyelid
//! ambient occlusion.

use nalgebra::{Matrix4, Vector4};

use crate::model::eyeball::EyeballGeometry;
use crate::Vec3;

/// Refractive index of the cornea.
pub const CORNEA_INDEX: f64 = 1.376;

/// Fewer projected lid points than this disables occlusion.
pub const MIN_LID_POINTS: usize = 10;

/// Snell refraction of unit direction `d` through a surface with unit normal
/// `n` (pointing against `d`), where `eta` is the ratio of indices `n1 / n2`.
/// Returns `None` on total internal reflection.
pub fn refract(d: &Vec3, n: &Vec3, eta: f64) -> Option<Vec3> {
    let cos_i = -n.dot(d);
    let k = 1.0 - eta * eta * (1.0 - cos_i * cos_i);
    if k < 0.0 {
        return None;
    }
    Some(d * eta + n * (eta * cos_i - k.sqrt()))
}

/// Mirror reflection of direction `d` about unit normal `n`.
pub fn reflect(d: &Vec3, n: &Vec3) -> Vec3 {
    d - n * (2.0 * d.dot(n))
}

/// Refracts a view ray at cornea point `q` (eyeball-local) and intersects it
/// with the iris plane. `d` is the unit view direction in the same frame.
pub fn refract_corneal(q: &Vec3, d: &Vec3, geometry: &EyeballGeometry, index: f64) -> Option<Vec3> {
    let mut n = (q - geometry.cornea_center()).normalize();
    if n.dot(d) > 0.0 {
        n = -n;
    }
    let t = refract(d, &n, 1.0 / index)?;
    if t.z >= 0.0 {
        return None;
    }
    let s = (geometry.limbus_depth() - q.z) / t.z;
    (s >= 0.0).then(|| q + t * s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AoSettings {
    /// Occlusion factor under the lids.
    pub min: f64,
    /// Width of the transition band in eyeball uv units.
    pub band: f64,
}

impl Default for AoSettings {
    fn default() -> Self {
        Self { min: 0.3, band: 0.15 }
    }
}

impl AoSettings {
    /// Maps signed distance from the nearest lid curve (positive between
    /// the lids) to an occlusion factor in `[min, 1]`.
    pub fn factor(&self, distance: f64) -> f64 {
        (self.min + (1.0 - self.min) * distance / self.band).clamp(self.min, 1.0)
    }
}

/// Cubic `c0 + c1 u + c2 u^2 + c3 u^3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cubic(pub [f64; 4]);

impl Cubic {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let c = &self.0;
        c[0] + u * (c[1] + u * (c[2] + u * c[3]))
    }

    /// Least-squares fit of `v = P(u)`. `None` for fewer than
    /// [`MIN_LID_POINTS`] points or a singular system.
    pub fn fit(points: &[(f64, f64)]) -> Option<Self> {
        if points.len() < MIN_LID_POINTS {
            return None;
        }
        let mut ata = Matrix4::<f64>::zeros();
        let mut atb = Vector4::<f64>::zeros();
        for &(u, v) in points {
            let row = Vector4::new(1.0, u, u * u, u * u * u);
            ata += row * row.transpose();
            atb += row * v;
        }
        let c = ata.cholesky()?.solve(&atb);
        Some(Self([c[0], c[1], c[2], c[3]]))
    }

    pub fn residual(&self, points: &[(f64, f64)]) -> f64 {
        points.iter().map(|&(u, v)| (v - self.eval(u)).powi(2)).sum()
    }
}

/// Upper and lower lid curves in eyeball disc coordinates (`v` grows downward).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LidCurves {
    pub upper: Cubic,
    pub lower: Cubic,
}

impl LidCurves {
    /// Fits both curves to lid points already in eyeball disc coordinates.
    pub fn fit(upper: &[(f64, f64)], lower: &[(f64, f64)]) -> Option<Self> {
        Some(Self {
            upper: Cubic::fit(upper)?,
            lower: Cubic::fit(lower)?,
        })
    }

    /// Signed distance in `v` to the nearest lid; positive between the lids.
    pub fn distance(&self, u: f64, v: f64) -> f64 {
        (v - self.upper.eval(u)).min(self.lower.eval(u) - v)
    }
}

/// Disc coordinates of a point seen from the eyeball centre, in the
/// eyeball-local frame. Points behind the eyeball centre give `None`.
pub fn disc_coords(local: &Vec3) -> Option<(f64, f64)> {
    let n = local.norm();
    (local.z > 0.0 && n > 0.0).then(|| (local.x / n, local.y / n))
}
