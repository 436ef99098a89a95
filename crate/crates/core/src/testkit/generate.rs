//! Seeded synthetic eye-region assets.
//!
//! The face part is a set of six concentric elliptical rings around the eye
//! opening (38 samples each) plus one nasal-bridge vertex: 229 vertices.
//! Vertex `k * 38 + j` lies on ring `k` at angle `2 pi j / 38`; `j = 0` is the
//! nasal corner (`+x`), `j = 19` the temporal corner. Ring 0 is the lid
//! margin and sits on a sphere just outside the eyeball; outer rings blend
//! into a gently curved brow and cheek surface.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::eyeball::{EyeTexture, EyeballGeometry};
use crate::model::{AssetData, EyeRegionModel, FACE_VERTICES, LANDMARK_COUNT, SHAPE_MODES, TEXTURE_MODES};

pub const RINGS: usize = 6;
pub const RING_SAMPLES: usize = 38;
pub const NASAL_VERTEX: usize = RINGS * RING_SAMPLES;

/// Depth of a flat face plane used when `relief` is zero.
const FLAT_DEPTH: f64 = 14.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticModelSpec {
    pub seed: u64,
    pub texture_size: usize,
    pub eye_texture_size: usize,
    /// Multiplies every shape standard deviation.
    pub shape_scale: f64,
    /// Multiplies every texture standard deviation.
    pub texture_scale: f64,
    /// 1 for the curved eye-region surface, 0 for a flat plane at z = 14 mm.
    pub relief: f64,
}

impl Default for SyntheticModelSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            texture_size: 512,
            eye_texture_size: 256,
            shape_scale: 1.0,
            texture_scale: 1.0,
            relief: 1.0,
        }
    }
}

pub fn vertex_index(ring: usize, j: usize) -> usize {
    ring * RING_SAMPLES + j % RING_SAMPLES
}

fn ring_point(k: usize, j: usize, relief: f64) -> [f64; 3] {
    let t = k as f64 / (RINGS - 1) as f64;
    let phi = 2.0 * PI * j as f64 / RING_SAMPLES as f64;
    let a = 11.5 + 9.0 * t;
    let h = if phi.sin() >= 0.0 { 5.5 + 16.5 * t } else { 4.5 + 11.5 * t };
    let x = a * phi.cos();
    let y = -h * phi.sin();
    let r = (x * x + y * y).sqrt().min(13.0);
    let inner = (13.5f64 * 13.5 - r * r).sqrt();
    let face = 9.0 + 3.5 * (-((y + 20.0) / 5.0).powi(2)).exp() - 0.004 * x * x;
    let s = t.powf(0.7);
    let z = (1.0 - s) * inner + s * face;
    [x, y, relief * z + (1.0 - relief) * FLAT_DEPTH]
}

fn nasal_point(relief: f64) -> [f64; 3] {
    [25.5, 2.0, relief * 9.0 + (1.0 - relief) * FLAT_DEPTH]
}

fn mean_shape(relief: f64) -> Vec<[f64; 3]> {
    let mut v = Vec::with_capacity(FACE_VERTICES);
    for k in 0..RINGS {
        for j in 0..RING_SAMPLES {
            v.push(ring_point(k, j, relief));
        }
    }
    v.push(nasal_point(relief));
    v
}

/// Triangles with normals facing `+z`, computed on the curved surface.
fn triangles() -> Vec<[u32; 3]> {
    let pts = mean_shape(1.0);
    let mut tris = Vec::new();
    for k in 0..RINGS - 1 {
        for j in 0..RING_SAMPLES {
            let a = vertex_index(k, j);
            let b = vertex_index(k, j + 1);
            let c = vertex_index(k + 1, j);
            let d = vertex_index(k + 1, j + 1);
            tris.push([a, d, c]);
            tris.push([a, b, d]);
        }
    }
    let outer = RINGS - 1;
    tris.push([NASAL_VERTEX, vertex_index(outer, RING_SAMPLES - 1), vertex_index(outer, 0)]);
    tris.push([NASAL_VERTEX, vertex_index(outer, 0), vertex_index(outer, 1)]);
    tris.into_iter()
        .map(|[a, b, c]| {
            let (pa, pb, pc) = (pts[a], pts[b], pts[c]);
            let nz = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]);
            if nz > 0.0 {
                [a as u32, b as u32, c as u32]
            } else {
                [a as u32, c as u32, b as u32]
            }
        })
        .collect()
}

/// Face-local `(x, y)` to texture coordinates.
pub fn face_uv(x: f64, y: f64) -> [f64; 2] {
    [(x + 26.0) / 54.0, (y + 25.0) / 45.0]
}

fn face_xy(u: f64, v: f64) -> (f64, f64) {
    (u * 54.0 - 26.0, v * 45.0 - 25.0)
}

fn eyelid_weight(k: usize, j: usize) -> f64 {
    if k >= 3 || j >= RING_SAMPLES {
        return 0.0;
    }
    let phi = 2.0 * PI * j as f64 / RING_SAMPLES as f64;
    let w = (PI * k as f64 / 6.0).cos().powi(2);
    if phi.sin() >= -1e-12 {
        w
    } else {
        0.35 * w
    }
}

fn landmark_map() -> Vec<f32> {
    let n = FACE_VERTICES;
    let mut left: Vec<[(usize, f64); 3]> = Vec::new();
    for j in [3, 6, 9, 13, 16] {
        left.push([(vertex_index(4, j), 0.5), (vertex_index(5, j), 0.25), (vertex_index(4, j + 1), 0.25)]);
    }
    let lids: Vec<[(usize, f64); 3]> = [0usize, 6, 13, 19, 25, 32]
        .iter()
        .map(|&j| {
            [
                (vertex_index(0, j), 0.5),
                (vertex_index(0, j + RING_SAMPLES - 1), 0.25),
                (vertex_index(0, j + 1), 0.25),
            ]
        })
        .collect();
    let mirror = |row: &[(usize, f64); 3]| row.map(|(i, w)| (i + n, w));
    let mut rows: Vec<[(usize, f64); 3]> = Vec::with_capacity(LANDMARK_COUNT);
    rows.extend(left.iter().copied());
    rows.extend(left.iter().map(mirror));
    rows.push([(NASAL_VERTEX, 1.0), (vertex_index(5, 0), 0.0), (vertex_index(5, 1), 0.0)]);
    rows.push([(NASAL_VERTEX, 0.5), (NASAL_VERTEX + n, 0.5), (vertex_index(5, 0), 0.0)]);
    rows.push(mirror(&rows[10]));
    rows.extend(lids.iter().copied());
    rows.extend(lids.iter().map(mirror));
    rows.iter().flat_map(|r| r.iter().flat_map(|&(i, w)| [i as f32, w as f32])).collect()
}

/// Orthonormalizes the columns of a row-major matrix in place.
fn gram_schmidt(m: &mut [f64], rows: usize, cols: usize) {
    for _ in 0..2 {
        for k in 0..cols {
            for j in 0..k {
                let dot: f64 = (0..rows).map(|r| m[r * cols + k] * m[r * cols + j]).sum();
                for r in 0..rows {
                    m[r * cols + k] -= dot * m[r * cols + j];
                }
            }
            let norm = (0..rows).map(|r| m[r * cols + k].powi(2)).sum::<f64>().sqrt();
            for r in 0..rows {
                m[r * cols + k] /= norm;
            }
        }
    }
}

/// Random smooth function of two variables: a few low-frequency plane waves.
struct SmoothField {
    waves: Vec<(f64, f64, f64, f64)>,
}

impl SmoothField {
    fn new(rng: &mut ChaCha8Rng, terms: usize, max_freq: f64) -> Self {
        let waves = (0..terms)
            .map(|_| {
                let angle = rng.random_range(0.0..2.0 * PI);
                let freq = rng.random_range(0.2..1.0) * max_freq;
                (freq * angle.cos(), freq * angle.sin(), rng.random_range(0.0..2.0 * PI), rng.random_range(-1.0..1.0))
            })
            .collect();
        Self { waves }
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        self.waves.iter().map(|(fx, fy, ph, a)| a * (fx * x + fy * y + ph).sin()).sum()
    }
}

fn shape_basis(rng: &mut ChaCha8Rng, mean: &[[f64; 3]]) -> Vec<f64> {
    let rows = 3 * FACE_VERTICES;
    let mut m = vec![0.0; rows * SHAPE_MODES];
    for k in 0..SHAPE_MODES {
        let max_freq = 0.04 + 0.012 * k as f64;
        let fields: Vec<SmoothField> = (0..3).map(|_| SmoothField::new(rng, 4, max_freq)).collect();
        for (i, p) in mean.iter().enumerate() {
            let ring = (i / RING_SAMPLES).min(RINGS - 1) as f64;
            let attenuation = 0.3 + 0.7 * ring / (RINGS - 1) as f64;
            for c in 0..3 {
                m[(3 * i + c) * SHAPE_MODES + k] = attenuation * fields[c].eval(p[0], p[1]);
            }
        }
    }
    gram_schmidt(&mut m, rows, SHAPE_MODES);
    m
}

fn texture_basis(rng: &mut ChaCha8Rng, size: usize) -> Vec<f64> {
    let texels = size * size;
    let rows = 3 * texels;
    let mut m = vec![0.0; rows * TEXTURE_MODES];
    for k in 0..TEXTURE_MODES {
        let max_freq = 4.0 + 2.0 * k as f64;
        let fields: Vec<SmoothField> = (0..3).map(|_| SmoothField::new(rng, 3, max_freq)).collect();
        for ty in 0..size {
            let v = (ty as f64 + 0.5) / size as f64;
            for tx in 0..size {
                let u = (tx as f64 + 0.5) / size as f64;
                let r = ty * size + tx;
                for c in 0..3 {
                    m[(3 * r + c) * TEXTURE_MODES + k] = fields[c].eval(u, v);
                }
            }
        }
    }
    gram_schmidt(&mut m, rows, TEXTURE_MODES);
    m
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

/// Skin with brow, upper-lid crease and a dark lash line at the lid margin.
fn skin_texel(u: f64, v: f64) -> [f64; 3] {
    let (x, y) = face_xy(u, v);
    let mottling = 0.03 * (0.9 * x + 0.4 * y).sin() + 0.02 * (0.5 * x - 1.1 * y).cos();
    let mut c = [0.80 + mottling, 0.62 + mottling, 0.52 + mottling];
    let upper = y <= 0.0;
    let (a, h) = if upper { (11.5, 5.5) } else { (11.5, 4.5) };
    let e = ((x / a).powi(2) + (y / h).powi(2)).sqrt();
    if !upper {
        c = mix(c, [0.78, 0.55, 0.50], 0.5 * (1.0 - smoothstep(1.0, 1.8, e)));
    }
    if upper {
        let crease = ((x / 14.0).powi(2) + (y / 9.0).powi(2)).sqrt();
        c = mix(c, [0.62, 0.45, 0.40], 0.6 * (-((crease - 1.0) / 0.06).powi(2)).exp());
    }
    let lash_width = if upper { 0.12 } else { 0.06 };
    c = mix(c, [0.12, 0.08, 0.07], 0.9 * (-((e - 1.0) / lash_width).powi(2)).exp());
    let brow = (-((y + 19.0 - 0.004 * x * x) / 2.2).powi(2)).exp() * smoothstep(22.0, 14.0, x.abs());
    mix(c, [0.25, 0.17, 0.12], 0.85 * brow)
}

fn eye_texture(size: usize, limbus_ratio: f64) -> Result<EyeTexture> {
    let mut rgb = Vec::with_capacity(size * size);
    let mut iris = Vec::with_capacity(size * size);
    for j in 0..size {
        for i in 0..size {
            let dx = 2.0 * (i as f64 + 0.5) / size as f64 - 1.0;
            let dy = 2.0 * (j as f64 + 0.5) / size as f64 - 1.0;
            let rho = (dx * dx + dy * dy).sqrt();
            let inside = rho < limbus_ratio;
            let c = if inside {
                let r = rho / limbus_ratio;
                let angle = dy.atan2(dx);
                let streak = 0.85 + 0.15 * (23.0 * angle).sin() * (7.0 * angle + 9.0 * r).cos();
                let base = mix([0.45, 0.32, 0.18], [0.20, 0.14, 0.08], smoothstep(0.6, 1.0, r));
                let iris_c = base.map(|v| v * streak);
                mix([0.02, 0.02, 0.02], iris_c, smoothstep(0.33, 0.40, r))
            } else {
                mix([0.93, 0.91, 0.88], [0.85, 0.68, 0.64], smoothstep(0.75, 1.0, rho))
            };
            rgb.push(c.map(|v| v as f32));
            iris.push(inside);
        }
    }
    EyeTexture::new(size, rgb, iris)
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Generates raw asset arrays for `spec`. Identical specs give identical bytes.
pub fn generate_asset(spec: &SyntheticModelSpec) -> Result<AssetData> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mean = mean_shape(spec.relief);
    let shape_basis = shape_basis(&mut rng, &mean);
    let size = spec.texture_size;
    let texture_basis = texture_basis(&mut rng, size);
    let texels = size * size;

    let mut mean_texture = Vec::with_capacity(3 * texels);
    for ty in 0..size {
        for tx in 0..size {
            let c = skin_texel((tx as f64 + 0.5) / size as f64, (ty as f64 + 0.5) / size as f64);
            mean_texture.extend(c.map(|v| v.clamp(0.0, 1.0) as f32));
        }
    }

    let uvs: Vec<f32> = mean.iter().flat_map(|p| face_uv(p[0], p[1])).map(|v| v as f32).collect();
    let mut eyelid_weights = Vec::with_capacity(FACE_VERTICES);
    for k in 0..RINGS {
        for j in 0..RING_SAMPLES {
            eyelid_weights.push(eyelid_weight(k, j) as f32);
        }
    }
    eyelid_weights.push(0.0);

    let shape_sigma: Vec<f64> = (0..SHAPE_MODES).map(|k| spec.shape_scale * 15.0 * 0.85f64.powi(k as i32)).collect();
    let tex_unit = (3.0 * texels as f64).sqrt();
    let texture_sigma: Vec<f64> = (0..TEXTURE_MODES)
        .map(|k| spec.texture_scale * 0.04 * tex_unit * 0.8f64.powi(k as i32))
        .collect();

    let geometry = EyeballGeometry::default();
    let upper_margin = (0..=RING_SAMPLES / 2).map(|j| vertex_index(0, j) as u32).collect();
    let lower_margin = (RING_SAMPLES / 2..=RING_SAMPLES).map(|j| vertex_index(0, j) as u32).collect();
    Ok(AssetData {
        vertex_count: FACE_VERTICES,
        texture_size: size,
        mean_shape: mean.iter().flatten().map(|&v| v as f32).collect(),
        shape_basis: to_f32(&shape_basis),
        shape_sigma: to_f32(&shape_sigma),
        mean_texture,
        texture_basis: to_f32(&texture_basis),
        texture_sigma: to_f32(&texture_sigma),
        triangles: triangles().into_iter().flatten().collect(),
        uvs,
        eyelid_weights,
        eyelid_corners: [vertex_index(0, RING_SAMPLES / 2) as u32, vertex_index(0, 0) as u32],
        upper_margin,
        lower_margin,
        landmark_map: landmark_map(),
        eyeball: geometry,
        eye_texture: eye_texture(spec.eye_texture_size, geometry.limbus_ratio())?,
    })
}

/// Generates an asset and builds the model from it.
pub fn generate_model(spec: &SyntheticModelSpec) -> Result<EyeRegionModel> {
    EyeRegionModel::from_asset(&generate_asset(spec)?)
}
