//! Generative eye-region model.
//!
//! A face part is a 229-vertex mesh whose local origin is the centre of its
//! eyeball. The stored mean shape is the left part (nasal corner toward `+x`);
//! the right part is its mirror image across the `yz` plane. Vertices
//! `0..229` address the left part and `229..458` the right part wherever a
//! global face-vertex index is used (landmarks, flow).

pub mod asset;
pub mod eyeball;
pub mod params;
pub mod pose;
pub mod scene;

use std::sync::Arc;

pub use asset::AssetData;
pub use eyeball::{EyeTexture, EyeballGeometry, EyeballMaterial, EyeballMesh};
pub use params::{param_group, param_name, ParamGroup, ParamMask, ParameterVector, PARAM_COUNT, SHAPE_MODES, TEXTURE_MODES};
pub use pose::GazeAngles;
pub use scene::{EyeballPart, FacePart, Lighting, LidMargins, Scene, Side, SurfaceTopology};

use crate::error::{Error, Result};
use crate::image::Texture;
use crate::Vec3;

/// Vertices per face part.
pub const FACE_VERTICES: usize = 229;
/// Tracked landmarks: 5 + 5 brow points, 3 nose points, 6 + 6 eyelid points.
pub const LANDMARK_COUNT: usize = 25;
/// Weighted vertex taps per landmark.
pub const LANDMARK_TAPS: usize = 3;

/// Semantic names of the landmarks, in file order.
pub const LANDMARK_NAMES: [&str; LANDMARK_COUNT] = [
    "brow_l0", "brow_l1", "brow_l2", "brow_l3", "brow_l4",
    "brow_r0", "brow_r1", "brow_r2", "brow_r3", "brow_r4",
    "nose_l", "nose_c", "nose_r",
    "lid_l0", "lid_l1", "lid_l2", "lid_l3", "lid_l4", "lid_l5",
    "lid_r0", "lid_r1", "lid_r2", "lid_r3", "lid_r4", "lid_r5",
];

/// One landmark as a weighted sum of global face-vertex indices.
pub type LandmarkRow = [(u32, f64); LANDMARK_TAPS];

/// Per-vertex data for procedural eyelid posing.
#[derive(Clone, Debug)]
pub struct EyelidRig {
    /// Rotation weight in `[0, 1]` per face-part vertex.
    pub weights: Vec<f64>,
    /// The two eye-corner vertices defining the rotation axis.
    pub corners: [u32; 2],
    /// Lid-margin vertices, used for eyeball ambient occlusion.
    pub upper_margin: Vec<u32>,
    pub lower_margin: Vec<u32>,
}

/// PCA shape and texture model plus everything needed to pose and render it.
///
/// Immutable after construction and cheap to share between threads.
#[derive(Debug)]
pub struct EyeRegionModel {
    mean_shape: Vec<Vec3>,
    /// `3n x 16`, row-major, orthonormal columns.
    shape_basis: Vec<f64>,
    shape_sigma: [f64; SHAPE_MODES],
    texture_size: usize,
    mean_texture: Vec<f32>,
    /// `3 size^2 x 8`, row-major.
    texture_basis: Vec<f32>,
    texture_sigma: [f64; TEXTURE_MODES],
    topology: [Arc<SurfaceTopology>; 2],
    landmark_map: Vec<LandmarkRow>,
    eyelid: EyelidRig,
    eyeball: EyeballGeometry,
    eyeball_mesh: EyeballMesh,
    eye_texture: Arc<EyeTexture>,
    head_origin: Vec3,
}

/// Modified Gram-Schmidt, run twice for stability. Columns of a row-major
/// `rows x cols` matrix.
fn orthonormalize_columns(m: &mut [f64], rows: usize, cols: usize) -> Result<()> {
    for _pass in 0..2 {
        for k in 0..cols {
            for j in 0..k {
                let dot: f64 = (0..rows).map(|r| m[r * cols + k] * m[r * cols + j]).sum();
                for r in 0..rows {
                    m[r * cols + k] -= dot * m[r * cols + j];
                }
            }
            let norm = (0..rows).map(|r| m[r * cols + k].powi(2)).sum::<f64>().sqrt();
            if !(norm > 1e-8) {
                return Err(Error::Asset(format!("shape basis column {k} is degenerate")));
            }
            for r in 0..rows {
                m[r * cols + k] /= norm;
            }
        }
    }
    Ok(())
}

fn positive_sigmas<const N: usize>(what: &str, values: &[f32]) -> Result<[f64; N]> {
    if values.len() != N {
        return Err(Error::Asset(format!("{what}: expected {N} values, got {}", values.len())));
    }
    let mut out = [0.0; N];
    for (o, &v) in out.iter_mut().zip(values) {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Asset(format!("{what} must be strictly positive, got {v}")));
        }
        *o = v as f64;
    }
    Ok(out)
}

fn mirror_triangles(triangles: &[[u32; 3]]) -> Vec<[u32; 3]> {
    triangles.iter().map(|&[a, b, c]| [a, c, b]).collect()
}

impl EyeRegionModel {
    /// Validates raw asset arrays and builds the model.
    ///
    /// The shape basis is re-orthonormalized in double precision so the
    /// unit-norm invariant holds exactly despite `f32` storage.
    pub fn from_asset(data: &AssetData) -> Result<Self> {
        let n = data.vertex_count;
        if n != FACE_VERTICES {
            return Err(Error::Asset(format!("face part must have {FACE_VERTICES} vertices, got {n}")));
        }
        let check_len = |what: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Asset(format!("{what}: expected {want} values, got {got}")))
            }
        };
        check_len("mu_geo", data.mean_shape.len(), 3 * n)?;
        check_len("shape_basis", data.shape_basis.len(), 3 * n * SHAPE_MODES)?;
        let texels = data.texture_size * data.texture_size;
        if texels == 0 {
            return Err(Error::Asset("texture size is zero".into()));
        }
        check_len("mu_tex", data.mean_texture.len(), 3 * texels)?;
        check_len("texture_basis", data.texture_basis.len(), 3 * texels * TEXTURE_MODES)?;
        check_len("uv", data.uvs.len(), 2 * n)?;
        check_len("eyelid_weights", data.eyelid_weights.len(), n)?;
        check_len("landmark_map", data.landmark_map.len(), LANDMARK_COUNT * LANDMARK_TAPS * 2)?;
        if data.triangles.is_empty() || data.triangles.len() % 3 != 0 {
            return Err(Error::Asset(format!("topology length {} is not a positive multiple of 3", data.triangles.len())));
        }
        let all_finite = data
            .mean_shape
            .iter()
            .chain(&data.shape_basis)
            .chain(&data.mean_texture)
            .chain(&data.texture_basis)
            .chain(&data.uvs)
            .chain(&data.eyelid_weights)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Asset("non-finite value in asset arrays".into()));
        }

        let shape_sigma = positive_sigmas::<SHAPE_MODES>("sigma_geo", &data.shape_sigma)?;
        let texture_sigma = positive_sigmas::<TEXTURE_MODES>("sigma_tex", &data.texture_sigma)?;
        let mean_shape: Vec<Vec3> = data
            .mean_shape
            .chunks_exact(3)
            .map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64))
            .collect();
        let mut shape_basis: Vec<f64> = data.shape_basis.iter().map(|&v| v as f64).collect();
        orthonormalize_columns(&mut shape_basis, 3 * n, SHAPE_MODES)?;

        let triangles: Vec<[u32; 3]> = data.triangles.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(Error::Asset(format!("triangle {t:?} references a vertex outside 0..{n}")));
        }
        let uvs: Vec<[f64; 2]> = data.uvs.chunks_exact(2).map(|c| [c[0] as f64, c[1] as f64]).collect();
        let left = SurfaceTopology::new(triangles.clone(), uvs.clone(), true)?;
        let right = SurfaceTopology::new(mirror_triangles(&triangles), uvs, true)?;

        let mut landmark_map = Vec::with_capacity(LANDMARK_COUNT);
        for (row_index, row) in data.landmark_map.chunks_exact(2 * LANDMARK_TAPS).enumerate() {
            let mut taps = [(0u32, 0.0f64); LANDMARK_TAPS];
            let mut sum = 0.0;
            for (k, tap) in taps.iter_mut().enumerate() {
                let (idx, w) = (row[2 * k], row[2 * k + 1] as f64);
                if !(idx >= 0.0 && idx.fract() == 0.0 && (idx as usize) < 2 * n) {
                    return Err(Error::Asset(format!("landmark {row_index}: bad vertex index {idx}")));
                }
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::Asset(format!("landmark {row_index}: weight {w} outside [0, 1]")));
                }
                *tap = (idx as u32, w);
                sum += w;
            }
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::Asset(format!("landmark {row_index}: weights sum to {sum}, not 1")));
            }
            for tap in taps.iter_mut() {
                tap.1 /= sum;
            }
            landmark_map.push(taps);
        }

        let weights: Vec<f64> = data.eyelid_weights.iter().map(|&w| w as f64).collect();
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::Asset("eyelid weights must lie in [0, 1]".into()));
        }
        let in_range = |i: &u32| (*i as usize) < n;
        if !data.eyelid_corners.iter().all(in_range)
            || !data.upper_margin.iter().all(in_range)
            || !data.lower_margin.iter().all(in_range)
        {
            return Err(Error::Asset("eyelid vertex index out of range".into()));
        }
        if data.eyelid_corners[0] == data.eyelid_corners[1] {
            return Err(Error::Asset("eyelid corners must be distinct".into()));
        }
        let eyelid = EyelidRig {
            weights,
            corners: data.eyelid_corners,
            upper_margin: data.upper_margin.clone(),
            lower_margin: data.lower_margin.clone(),
        };

        data.eyeball.validate()?;
        let eye_texture = Arc::new(data.eye_texture.clone());
        let eyeball_mesh = EyeballMesh::tessellate(&data.eyeball);

        let mut model = Self {
            mean_shape,
            shape_basis,
            shape_sigma,
            texture_size: data.texture_size,
            mean_texture: data.mean_texture.clone(),
            texture_basis: data.texture_basis.clone(),
            texture_sigma,
            topology: [Arc::new(left), Arc::new(right)],
            landmark_map,
            eyelid,
            eyeball: data.eyeball,
            eyeball_mesh,
            eye_texture,
            head_origin: Vec3::zeros(),
        };
        model.head_origin = model.part_landmark_centroid(params::DEFAULT_IOD);
        Ok(model)
    }

    /// `mu_geo + U diag(sigma_geo) beta` as 229 points.
    pub fn shape_sample(&self, beta: &[f64]) -> Result<Vec<Vec3>> {
        if beta.len() != SHAPE_MODES {
            return Err(Error::Count {
                what: "shape coefficients",
                expected: SHAPE_MODES,
                got: beta.len(),
            });
        }
        let mut scaled = [0.0; SHAPE_MODES];
        for k in 0..SHAPE_MODES {
            scaled[k] = beta[k] * self.shape_sigma[k];
        }
        let mut out = self.mean_shape.clone();
        if scaled.iter().all(|s| *s == 0.0) {
            return Ok(out);
        }
        for (i, v) in out.iter_mut().enumerate() {
            for c in 0..3 {
                let row = &self.shape_basis[(3 * i + c) * SHAPE_MODES..][..SHAPE_MODES];
                let d: f64 = row.iter().zip(&scaled).map(|(u, s)| u * s).sum();
                v[c] += d;
            }
        }
        Ok(out)
    }

    /// Unclamped `mu_tex + V diag(sigma_tex) tau`, row-major RGB in `f64`.
    pub fn texture_combination(&self, tau: &[f64]) -> Result<Vec<f64>> {
        if tau.len() != TEXTURE_MODES {
            return Err(Error::Count {
                what: "texture coefficients",
                expected: TEXTURE_MODES,
                got: tau.len(),
            });
        }
        let mut scaled = [0.0; TEXTURE_MODES];
        for k in 0..TEXTURE_MODES {
            scaled[k] = tau[k] * self.texture_sigma[k];
        }
        Ok(self
            .mean_texture
            .iter()
            .zip(self.texture_basis.chunks_exact(TEXTURE_MODES))
            .map(|(&m, row)| m as f64 + row.iter().zip(&scaled).map(|(&v, s)| v as f64 * s).sum::<f64>())
            .collect())
    }

    /// Face texture for coefficients `tau`, clamped to `[0, 1]`.
    pub fn texture_sample(&self, tau: &[f64]) -> Result<Texture> {
        let combined = self.texture_combination(tau)?;
        let texels = combined
            .chunks_exact(3)
            .map(|c| [c[0].clamp(0.0, 1.0) as f32, c[1].clamp(0.0, 1.0) as f32, c[2].clamp(0.0, 1.0) as f32])
            .collect();
        Texture::from_texels(self.texture_size, self.texture_size, texels)
    }

    pub fn mean_shape(&self) -> &[Vec3] {
        &self.mean_shape
    }

    /// Entry `(row, mode)` of the orthonormal shape basis.
    pub fn shape_basis(&self, row: usize, mode: usize) -> f64 {
        self.shape_basis[row * SHAPE_MODES + mode]
    }

    pub fn shape_sigma(&self) -> &[f64; SHAPE_MODES] {
        &self.shape_sigma
    }

    pub fn texture_size(&self) -> usize {
        self.texture_size
    }

    pub fn mean_texture(&self) -> &[f32] {
        &self.mean_texture
    }

    /// Entry `(row, mode)` of the texture basis.
    pub fn texture_basis(&self, row: usize, mode: usize) -> f64 {
        self.texture_basis[row * TEXTURE_MODES + mode] as f64
    }

    pub fn texture_sigma(&self) -> &[f64; TEXTURE_MODES] {
        &self.texture_sigma
    }

    pub fn topology(&self, side: Side) -> &Arc<SurfaceTopology> {
        &self.topology[side.index()]
    }

    pub fn landmark_map(&self) -> &[LandmarkRow] {
        &self.landmark_map
    }

    pub fn eyelid(&self) -> &EyelidRig {
        &self.eyelid
    }

    pub fn eyeball_geometry(&self) -> &EyeballGeometry {
        &self.eyeball
    }

    pub fn eyeball_mesh(&self) -> &EyeballMesh {
        &self.eyeball_mesh
    }

    pub fn eye_texture(&self) -> &Arc<EyeTexture> {
        &self.eye_texture
    }

    /// Head-frame origin expressed in the frame where the left eyeball sits
    /// at `(-iod/2, 0, 0)`. It is the rest-pose landmark centroid, so the
    /// global translation equals the mean 3D landmark at rest.
    pub fn head_origin(&self) -> Vec3 {
        self.head_origin
    }

    fn part_landmark_centroid(&self, iod: f64) -> Vec3 {
        let sum: Vec3 = self
            .landmark_map
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&(idx, w)| {
                        let (side, local) = split_index(idx as usize);
                        place_on_side(self.mean_shape[local], side, iod) * w
                    })
                    .sum::<Vec3>()
            })
            .sum();
        sum / LANDMARK_COUNT as f64
    }
}

/// Splits a global face-vertex index into part and local index.
pub fn split_index(i: usize) -> (Side, usize) {
    if i < FACE_VERTICES {
        (Side::Left, i)
    } else {
        (Side::Right, i - FACE_VERTICES)
    }
}

/// Maps a left-part local point onto `side`, offset along x by `iod / 2`.
pub(crate) fn place_on_side(p: Vec3, side: Side, iod: f64) -> Vec3 {
    match side {
        Side::Left => Vec3::new(p.x - 0.5 * iod, p.y, p.z),
        Side::Right => Vec3::new(-p.x + 0.5 * iod, p.y, p.z),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::generate::{generate_model, SyntheticModelSpec};

    fn small_model() -> EyeRegionModel {
        generate_model(&SyntheticModelSpec {
            texture_size: 32,
            ..SyntheticModelSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_coefficients_give_means() {
        let m = small_model();
        assert_eq!(m.shape_sample(&[0.0; 16]).unwrap(), m.mean_shape());
        let t = m.texture_combination(&[0.0; 8]).unwrap();
        assert!(t.iter().zip(m.mean_texture()).all(|(a, &b)| *a == b as f64));
    }

    #[test]
    fn single_mode_displacement() {
        let m = small_model();
        for k in [0, 7, 15] {
            let mut beta = [0.0; 16];
            beta[k] = 1.0;
            let s = m.shape_sample(&beta).unwrap();
            for (i, v) in s.iter().enumerate() {
                for c in 0..3 {
                    let want = m.mean_shape()[i][c] + m.shape_sigma()[k] * m.shape_basis(3 * i + c, k);
                    assert!((v[c] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shape_basis_is_orthonormal() {
        let m = small_model();
        for a in 0..16 {
            for b in 0..16 {
                let dot: f64 = (0..3 * FACE_VERTICES).map(|r| m.shape_basis(r, a) * m.shape_basis(r, b)).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10, "{a} {b} {dot}");
            }
        }
    }

    #[test]
    fn texture_is_symmetric_before_clamping() {
        let m = small_model();
        let mut tau = [0.0; 8];
        tau[0] = 1.0;
        let plus = m.texture_combination(&tau).unwrap();
        tau[0] = -1.0;
        let minus = m.texture_combination(&tau).unwrap();
        for ((p, q), &mu) in plus.iter().zip(&minus).zip(m.mean_texture()) {
            assert!(((p - mu as f64) + (q - mu as f64)).abs() < 1e-12);
        }
        let tex = m.texture_sample(&[3.0; 8]).unwrap();
        assert!(tex.texels().iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn coefficient_counts_are_checked() {
        let m = small_model();
        assert!(matches!(m.shape_sample(&[0.0; 15]), Err(Error::Count { .. })));
        assert!(matches!(m.texture_sample(&[0.0; 9]), Err(Error::Count { .. })));
    }

    #[test]
    fn landmark_rows_sum_to_one() {
        let m = small_model();
        for row in m.landmark_map() {
            let s: f64 = row.iter().map(|t| t.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
