//! Two-sphere eyeball: geometry, tessellation and iris/sclera material.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::image::bilinear_taps;
use crate::Vec3;

/// Anatomical constants of the eyeball, in millimetres. The eyeball local
/// frame is centred on the sclera sphere with the optical axis along `+z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EyeballGeometry {
    pub sclera_radius: f64,
    pub cornea_radius: f64,
    /// Radius of the limbus circle where cornea and sclera spheres meet.
    pub limbus_radius: f64,
}

impl Default for EyeballGeometry {
    fn default() -> Self {
        Self {
            sclera_radius: 12.0,
            cornea_radius: 8.0,
            limbus_radius: 6.0,
        }
    }
}

impl EyeballGeometry {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sclera_radius > 0.0
            && self.cornea_radius > 0.0
            && self.limbus_radius > 0.0
            && self.limbus_radius < self.cornea_radius
            && self.limbus_radius < self.sclera_radius;
        if !ok {
            return Err(Error::Asset(format!("inconsistent eyeball geometry {self:?}")));
        }
        Ok(())
    }

    /// Distance from the sclera centre to the limbus plane, which is also
    /// where the iris plane sits.
    pub fn limbus_depth(&self) -> f64 {
        (self.sclera_radius.powi(2) - self.limbus_radius.powi(2)).sqrt()
    }

    /// Offset of the cornea sphere centre along the optical axis.
    pub fn cornea_offset(&self) -> f64 {
        self.limbus_depth() - (self.cornea_radius.powi(2) - self.limbus_radius.powi(2)).sqrt()
    }

    pub fn cornea_center(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.cornea_offset())
    }

    /// Polar angle of the limbus seen from the sclera centre.
    pub fn limbus_angle(&self) -> f64 {
        (self.limbus_radius / self.sclera_radius).asin()
    }

    /// Limbus radius as a fraction of the sclera radius.
    pub fn limbus_ratio(&self) -> f64 {
        self.limbus_radius / self.sclera_radius
    }

    /// Distance from the sclera centre to the two-sphere surface along polar angle `theta`.
    pub fn surface_radius(&self, theta: f64) -> f64 {
        if theta <= self.limbus_angle() {
            let zc = self.cornea_offset();
            let s = theta.sin();
            zc * theta.cos() + (self.cornea_radius.powi(2) - zc * zc * s * s).sqrt()
        } else {
            self.sclera_radius
        }
    }
}

/// Tessellated eyeball surface in eyeball-local coordinates.
#[derive(Clone, Debug)]
pub struct EyeballMesh {
    pub positions: Vec<Vec3>,
    pub triangles: Arc<Vec<[u32; 3]>>,
    /// Vertices on the limbus ring.
    pub iris_boundary: Vec<u32>,
}

pub const EYEBALL_SEGMENTS: usize = 24;
const CORNEA_RINGS: usize = 4;
const SCLERA_RINGS: usize = 10;

impl EyeballMesh {
    /// Fixed-resolution tessellation of the two-sphere surface with outward winding.
    pub fn tessellate(geometry: &EyeballGeometry) -> Self {
        let seg = EYEBALL_SEGMENTS;
        let limbus = geometry.limbus_angle();
        let mut thetas = Vec::new();
        for k in 1..=CORNEA_RINGS {
            thetas.push(limbus * k as f64 / CORNEA_RINGS as f64);
        }
        for k in 1..SCLERA_RINGS {
            thetas.push(limbus + (PI - limbus) * k as f64 / SCLERA_RINGS as f64);
        }
        let at = |theta: f64, phi: f64| {
            let dir = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            dir * geometry.surface_radius(theta)
        };
        let mut positions = vec![at(0.0, 0.0)];
        for &theta in &thetas {
            for j in 0..seg {
                positions.push(at(theta, 2.0 * PI * j as f64 / seg as f64));
            }
        }
        let south = positions.len() as u32;
        positions.push(Vec3::new(0.0, 0.0, -geometry.sclera_radius));

        let ring = |r: usize, j: usize| (1 + r * seg + j % seg) as u32;
        let mut triangles = Vec::new();
        for j in 0..seg {
            triangles.push([0, ring(0, j), ring(0, j + 1)]);
        }
        for r in 0..thetas.len() - 1 {
            for j in 0..seg {
                triangles.push([ring(r, j), ring(r + 1, j), ring(r + 1, j + 1)]);
                triangles.push([ring(r, j), ring(r + 1, j + 1), ring(r, j + 1)]);
            }
        }
        let last = thetas.len() - 1;
        for j in 0..seg {
            triangles.push([south, ring(last, j + 1), ring(last, j)]);
        }
        let iris_boundary = (0..seg).map(|j| ring(CORNEA_RINGS - 1, j)).collect();
        Self {
            positions,
            triangles: Arc::new(triangles),
            iris_boundary,
        }
    }

    /// Centre of the pupil: the limbus ring centroid on the optical axis.
    pub fn pupil_center(&self) -> Vec3 {
        let sum: Vec3 = self.iris_boundary.iter().map(|&i| self.positions[i as usize]).sum();
        let c = sum / self.iris_boundary.len() as f64;
        Vec3::new(0.0, 0.0, c.z)
    }
}

/// Base eyeball texture over the frontal disc of the eyeball.
///
/// Texel `(i, j)` corresponds to disc coordinates
/// `(2 (i + 0.5) / size - 1, 2 (j + 0.5) / size - 1)`, i.e. the x and y
/// components of the unit direction from the eyeball centre. The iris mask
/// marks texels that receive the iris colour; all others are sclera.
#[derive(Clone, Debug, PartialEq)]
pub struct EyeTexture {
    size: usize,
    rgb: Vec<[f32; 3]>,
    iris: Vec<bool>,
}

impl EyeTexture {
    pub fn new(size: usize, rgb: Vec<[f32; 3]>, iris: Vec<bool>) -> Result<Self> {
        if size == 0 || rgb.len() != size * size || iris.len() != size * size {
            return Err(Error::Asset(format!(
                "eye texture of size {size} needs {} texels, got {} colours and {} mask entries",
                size * size,
                rgb.len(),
                iris.len()
            )));
        }
        Ok(Self { size, rgb, iris })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn rgb(&self) -> &[[f32; 3]] {
        &self.rgb
    }

    pub fn iris_mask(&self) -> &[bool] {
        &self.iris
    }

    pub fn texel_disc_coords(&self, i: usize, j: usize) -> (f64, f64) {
        let s = self.size as f64;
        (2.0 * (i as f64 + 0.5) / s - 1.0, 2.0 * (j as f64 + 0.5) / s - 1.0)
    }
}

/// Eyeball appearance: base texture modulated by iris colour and sclera tint.
#[derive(Clone, Debug)]
pub struct EyeballMaterial {
    pub texture: Arc<EyeTexture>,
    pub iris_color: [f64; 3],
    pub sclera_tint: [f64; 3],
    pub iris_scale: f64,
    /// Limbus radius over sclera radius in the base texture.
    pub limbus_ratio: f64,
}

impl EyeballMaterial {
    /// Maps an actual disc radius to the radius in the unscaled base texture.
    /// The iris disc is stretched by `iris_scale`; the sclera annulus is
    /// compressed to compensate so the map stays continuous and onto.
    pub fn iris_warp(&self, rho: f64) -> f64 {
        let l = self.limbus_ratio;
        let scaled = l * self.iris_scale;
        if rho < scaled {
            rho / self.iris_scale
        } else if scaled >= 1.0 {
            1.0
        } else {
            l + (rho - scaled) * (1.0 - l) / (1.0 - scaled)
        }
    }

    #[inline]
    fn effective_texel(&self, idx: usize) -> [f64; 3] {
        let base = self.texture.rgb[idx];
        let m = if self.texture.iris[idx] {
            &self.iris_color
        } else {
            &self.sclera_tint
        };
        [base[0] as f64 * m[0], base[1] as f64 * m[1], base[2] as f64 * m[2]]
    }

    /// Texel after iris/tint modulation.
    pub fn texel(&self, i: usize, j: usize) -> [f64; 3] {
        self.effective_texel(j * self.texture.size + i)
    }

    /// Bilinear lookup at disc coordinates `(dx, dy)` of the actual (scaled) eyeball.
    pub fn sample(&self, dx: f64, dy: f64) -> [f64; 3] {
        let rho = (dx * dx + dy * dy).sqrt();
        let (bx, by) = if rho > 0.0 {
            let s = self.iris_warp(rho.min(1.0)) / rho;
            (dx * s, dy * s)
        } else {
            (0.0, 0.0)
        };
        let n = self.texture.size;
        let (x0, x1, tx) = bilinear_taps((bx * 0.5 + 0.5) * n as f64, n);
        let (y0, y1, ty) = bilinear_taps((by * 0.5 + 0.5) * n as f64, n);
        let p00 = self.effective_texel(y0 * n + x0);
        let p10 = self.effective_texel(y0 * n + x1);
        let p01 = self.effective_texel(y1 * n + x0);
        let p11 = self.effective_texel(y1 * n + x1);
        let mut out = [0.0; 3];
        for c in 0..3 {
            let top = p00[c] * (1.0 - tx) + p10[c] * tx;
            let bottom = p01[c] * (1.0 - tx) + p11[c] * tx;
            out[c] = top * (1.0 - ty) + bottom * ty;
        }
        out
    }
}

/// Guard range for the iris scale factor.
pub const IRIS_SCALE_RANGE: (f64, f64) = (0.5, 2.0);

/// Eyeball mesh with its material, in eyeball-local coordinates.
#[derive(Clone, Debug)]
pub struct Eyeball {
    pub mesh: EyeballMesh,
    pub material: EyeballMaterial,
}

/// Builds an eyeball with iris size `iris_scale`, iris colour and sclera tint.
///
/// Limbus ring vertices are scaled radially about the pupil centre.
pub fn build_eyeball(
    base_mesh: &EyeballMesh,
    texture: &Arc<EyeTexture>,
    geometry: &EyeballGeometry,
    iris_scale: f64,
    iris_color: [f64; 3],
    sclera_tint: [f64; 3],
) -> Result<Eyeball> {
    let (lo, hi) = IRIS_SCALE_RANGE;
    if !(iris_scale > lo && iris_scale < hi) {
        return Err(Error::InvalidParameter {
            name: "beta_iris",
            reason: format!("{iris_scale} outside guard range ({lo}, {hi})"),
        });
    }
    let mut mesh = base_mesh.clone();
    let pupil = base_mesh.pupil_center();
    for &i in &base_mesh.iris_boundary {
        let v = &mut mesh.positions[i as usize];
        *v = pupil + (*v - pupil) * iris_scale;
    }
    Ok(Eyeball {
        mesh,
        material: EyeballMaterial {
            texture: Arc::clone(texture),
            iris_color,
            sclera_tint,
            iris_scale,
            limbus_ratio: geometry.limbus_ratio(),
        },
    })
}
