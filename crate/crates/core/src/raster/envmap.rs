//! Equirectangular environment maps for eyeball reflections.
//!
//! A direction `d` (camera space) maps to longitude `atan2(d.x, d.z)` and
//! latitude `asin(-d.y)`, so the map centre faces the camera and its top row
//! is image-up.

use std::f64::consts::PI;

use crate::Vec3;

pub const MAP_COUNT: usize = 5;
pub const MAP_NAMES: [&str; MAP_COUNT] = ["window", "ring_light", "outdoor_sky", "indoor_warm", "dark"];

const WIDTH: usize = 64;
const HEIGHT: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct EnvMap {
    width: usize,
    height: usize,
    data: Vec<[f32; 3]>,
}

fn gaussian(d: f64, s: f64) -> f64 {
    (-(d / s).powi(2)).exp()
}

fn direction(lon: f64, lat: f64) -> Vec3 {
    Vec3::new(lat.cos() * lon.sin(), -lat.sin(), lat.cos() * lon.cos())
}

impl EnvMap {
    /// Bakes a map from a radiance function of direction.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(Vec3) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for j in 0..height {
            let lat = PI / 2.0 - PI * (j as f64 + 0.5) / height as f64;
            for i in 0..width {
                let lon = -PI + 2.0 * PI * (i as f64 + 0.5) / width as f64;
                data.push(f(direction(lon, lat)).map(|v| v as f32));
            }
        }
        Self { width, height, data }
    }

    pub fn constant(rgb: [f64; 3]) -> Self {
        Self::from_fn(4, 2, |_| rgb)
    }

    /// The five built-in maps, indexed by map id.
    pub fn builtin() -> Vec<EnvMap> {
        let window = |d: Vec3| {
            let lon = d.x.atan2(d.z);
            let lat = (-d.y).clamp(-1.0, 1.0).asin();
            let inside = (-0.6..0.1).contains(&lon) && (0.05..0.55).contains(&lat);
            let frame = (lon + 0.25).abs() < 0.02 && inside;
            if inside && !frame {
                [0.95, 0.97, 1.0]
            } else {
                [0.10, 0.09, 0.08]
            }
        };
        let ring = |d: Vec3| {
            let angle = d.z.clamp(-1.0, 1.0).acos();
            let v = 0.05 + 0.95 * gaussian(angle - 0.28, 0.06);
            [v, v, v * 0.98]
        };
        let sky = |d: Vec3| {
            let up = -d.y;
            if up > 0.0 {
                let t = up.powf(0.5);
                [0.55 + 0.15 * t, 0.70 + 0.12 * t, 0.95]
            } else {
                [0.22, 0.20, 0.12]
            }
        };
        let warm = |d: Vec3| {
            let lamp = gaussian((d - Vec3::new(0.5, -0.35, 0.79).normalize()).norm(), 0.25);
            [0.42 + 0.58 * lamp, 0.28 + 0.55 * lamp, 0.14 + 0.36 * lamp]
        };
        let dark = |d: Vec3| {
            let glow = 0.06 * gaussian((d - Vec3::new(-0.6, 0.2, 0.77).normalize()).norm(), 0.3);
            [0.015 + glow, 0.015 + glow, 0.02 + glow]
        };
        vec![
            Self::from_fn(WIDTH, HEIGHT, window),
            Self::from_fn(WIDTH, HEIGHT, ring),
            Self::from_fn(WIDTH, HEIGHT, sky),
            Self::from_fn(WIDTH, HEIGHT, warm),
            Self::from_fn(WIDTH, HEIGHT, dark),
        ]
    }

    /// Bilinear lookup, wrapping in longitude and clamping in latitude.
    pub fn lookup(&self, d: &Vec3) -> [f64; 3] {
        let n = d.norm();
        let lon = d.x.atan2(d.z);
        let lat = (-d.y / n).clamp(-1.0, 1.0).asin();
        let fx = (lon + PI) / (2.0 * PI) * self.width as f64 - 0.5;
        let fy = (PI / 2.0 - lat) / PI * self.height as f64 - 0.5;
        let x0f = fx.floor();
        let tx = fx - x0f;
        let x0 = (x0f as isize).rem_euclid(self.width as isize) as usize;
        let x1 = (x0 + 1) % self.width;
        let fy = fy.clamp(0.0, (self.height - 1) as f64);
        let y0 = fy.floor() as usize;
        let ty = fy - y0 as f64;
        let y1 = (y0 + 1).min(self.height - 1);
        let at = |x: usize, y: usize| self.data[y * self.width + x];
        let mut out = [0.0; 3];
        for c in 0..3 {
            let top = at(x0, y0)[c] as f64 * (1.0 - tx) + at(x1, y0)[c] as f64 * tx;
            let bottom = at(x0, y1)[c] as f64 * (1.0 - tx) + at(x1, y1)[c] as f64 * tx;
            out[c] = top * (1.0 - ty) + bottom * ty;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_map_is_constant() {
        let m = EnvMap::constant([0.2, 0.4, 0.6]);
        for d in [Vec3::z(), -Vec3::z(), Vec3::new(1.0, -2.0, 0.5)] {
            let v = m.lookup(&d);
            assert!((v[0] - 0.2).abs() < 1e-6 && (v[2] - 0.6).abs() < 1e-6);
        }
    }

    #[test]
    fn builtin_maps_differ_toward_the_camera() {
        let maps = EnvMap::builtin();
        let dirs = [Vec3::new(0.0, 0.0, 1.0), Vec3::new(-0.2, -0.3, 1.0), Vec3::new(0.3, 0.2, 1.0)];
        for a in 0..MAP_COUNT {
            for b in a + 1..MAP_COUNT {
                let diff: f64 = dirs
                    .iter()
                    .map(|d| {
                        let (p, q) = (maps[a].lookup(d), maps[b].lookup(d));
                        (0..3).map(|c| (p[c] - q[c]).abs()).sum::<f64>()
                    })
                    .sum();
                assert!(diff > 0.1, "maps {a} and {b} look alike");
            }
        }
    }

    #[test]
    fn sky_is_bright_above() {
        let sky = &EnvMap::builtin()[2];
        assert!(sky.lookup(&Vec3::new(0.0, -1.0, 0.1))[2] > sky.lookup(&Vec3::new(0.0, 1.0, 0.1))[2]);
    }
}
