//! Asset directory format.
//!
//! ```text
//! manifest.txt        key = value lines (see `Manifest`)
//! mu_geo.f32          229 x 3 mean vertex positions, mm
//! shape_basis.f32     687 x 16 row-major shape basis
//! sigma_geo.f32       16 shape standard deviations
//! mu_tex.pflt         mean texture as an RGB float map
//! texture_basis.f32   (3 size^2) x 8 row-major texture basis
//! sigma_tex.f32       8 texture standard deviations
//! topology.u32        triangle vertex indices, 3 per triangle
//! uv.f32              229 x 2 texture coordinates
//! eyelid_weights.f32  229 eyelid rotation weights
//! landmark_map.f32    25 x 3 (vertex index, weight) pairs
//! eye_texture.pflt    eyeball base texture, RGB plus iris mask channel
//! ```
//!
//! Raw arrays are little-endian with no header.

use std::fs;
use std::path::Path;

use super::eyeball::{EyeTexture, EyeballGeometry};
use super::{EyeRegionModel, LANDMARK_COUNT, LANDMARK_NAMES, SHAPE_MODES, TEXTURE_MODES};
use crate::error::{Error, Result};
use crate::io::{decode_float_map, encode_float_map, FloatMap};

pub const ASSET_VERSION: u32 = 1;

/// Raw asset contents exactly as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct AssetData {
    pub vertex_count: usize,
    pub texture_size: usize,
    pub mean_shape: Vec<f32>,
    pub shape_basis: Vec<f32>,
    pub shape_sigma: Vec<f32>,
    pub mean_texture: Vec<f32>,
    pub texture_basis: Vec<f32>,
    pub texture_sigma: Vec<f32>,
    pub triangles: Vec<u32>,
    pub uvs: Vec<f32>,
    pub eyelid_weights: Vec<f32>,
    pub eyelid_corners: [u32; 2],
    pub upper_margin: Vec<u32>,
    pub lower_margin: Vec<u32>,
    pub landmark_map: Vec<f32>,
    pub eyeball: EyeballGeometry,
    pub eye_texture: EyeTexture,
}

/// Parsed `manifest.txt`.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub version: u32,
    pub vertex_count: usize,
    pub shape_modes: usize,
    pub texture_modes: usize,
    pub texture_size: usize,
    pub triangle_count: usize,
    pub landmark_names: Vec<String>,
    pub eyelid_corners: [u32; 2],
    pub upper_margin: Vec<u32>,
    pub lower_margin: Vec<u32>,
    pub eyeball: EyeballGeometry,
    pub eye_texture_size: usize,
}

const M: &str = "manifest";

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

impl Manifest {
    pub fn format(&self) -> String {
        let g = &self.eyeball;
        format!(
            "# eye-region model asset\n\
             version = {}\n\
             vertex_count = {}\n\
             shape_modes = {}\n\
             texture_modes = {}\n\
             texture_size = {}\n\
             triangle_count = {}\n\
             landmark_names = {}\n\
             eyelid_corners = {}\n\
             upper_margin = {}\n\
             lower_margin = {}\n\
             sclera_radius = {:?}\n\
             cornea_radius = {:?}\n\
             limbus_radius = {:?}\n\
             eye_texture_size = {}\n",
            self.version,
            self.vertex_count,
            self.shape_modes,
            self.texture_modes,
            self.texture_size,
            self.triangle_count,
            self.landmark_names.join(" "),
            join(&self.eyelid_corners),
            join(&self.upper_margin),
            join(&self.lower_margin),
            g.sclera_radius,
            g.cornea_radius,
            g.limbus_radius,
            self.eye_texture_size,
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, &str, &str)> = Vec::new();
        for (line_no, line) in crate::io::content_lines(text) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(M, line_no, "expected `key = value`"))?;
            let key = key.trim();
            if entries.iter().any(|e| e.1 == key) {
                return Err(Error::parse(M, line_no, format!("duplicate key `{key}`")));
            }
            entries.push((line_no, key, value.trim()));
        }
        let get = |key: &str| {
            entries
                .iter()
                .find(|e| e.1 == key)
                .map(|e| (e.0, e.2))
                .ok_or_else(|| Error::parse(M, 0, format!("missing key `{key}`")))
        };
        let int = |key: &str| -> Result<usize> {
            let (line, v) = get(key)?;
            v.parse().map_err(|_| Error::parse(M, line, format!("`{key}` is not an integer")))
        };
        let real = |key: &str| -> Result<f64> {
            let (line, v) = get(key)?;
            crate::io::parse_f64(M, line, v)
        };
        let list = |key: &str| -> Result<Vec<u32>> {
            let (line, v) = get(key)?;
            v.split_ascii_whitespace()
                .map(|t| t.parse().map_err(|_| Error::parse(M, line, format!("`{key}`: bad index `{t}`"))))
                .collect()
        };
        let version = int("version")?;
        if version != ASSET_VERSION as usize {
            return Err(Error::parse(M, get("version")?.0, format!("unsupported version {version}")));
        }
        let corners = list("eyelid_corners")?;
        if corners.len() != 2 {
            return Err(Error::parse(M, get("eyelid_corners")?.0, "need exactly two corner vertices"));
        }
        let landmark_names: Vec<String> = get("landmark_names")?.1.split_ascii_whitespace().map(String::from).collect();
        if landmark_names.len() != LANDMARK_COUNT {
            return Err(Error::parse(
                M,
                get("landmark_names")?.0,
                format!("expected {LANDMARK_COUNT} landmark names, got {}", landmark_names.len()),
            ));
        }
        let manifest = Self {
            version: ASSET_VERSION,
            vertex_count: int("vertex_count")?,
            shape_modes: int("shape_modes")?,
            texture_modes: int("texture_modes")?,
            texture_size: int("texture_size")?,
            triangle_count: int("triangle_count")?,
            landmark_names,
            eyelid_corners: [corners[0], corners[1]],
            upper_margin: list("upper_margin")?,
            lower_margin: list("lower_margin")?,
            eyeball: EyeballGeometry {
                sclera_radius: real("sclera_radius")?,
                cornea_radius: real("cornea_radius")?,
                limbus_radius: real("limbus_radius")?,
            },
            eye_texture_size: int("eye_texture_size")?,
        };
        if manifest.shape_modes != SHAPE_MODES || manifest.texture_modes != TEXTURE_MODES {
            return Err(Error::parse(
                M,
                0,
                format!(
                    "expected {SHAPE_MODES} shape and {TEXTURE_MODES} texture modes, got {} and {}",
                    manifest.shape_modes, manifest.texture_modes
                ),
            ));
        }
        let limit = crate::io::MAX_DIMENSION;
        if manifest.texture_size == 0 || manifest.texture_size > limit || manifest.eye_texture_size == 0 || manifest.eye_texture_size > limit {
            return Err(Error::parse(M, 0, "texture size out of range"));
        }
        Ok(manifest)
    }
}

fn f32_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn u32_bytes(values: &[u32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn read_raw(dir: &Path, name: &str, count: usize) -> Result<Vec<[u8; 4]>> {
    let bytes = fs::read(dir.join(name))?;
    if bytes.len() != 4 * count {
        return Err(Error::Asset(format!("{name}: expected {} bytes, got {}", 4 * count, bytes.len())));
    }
    Ok(bytes.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]).collect())
}

fn read_f32(dir: &Path, name: &str, count: usize) -> Result<Vec<f32>> {
    Ok(read_raw(dir, name, count)?.into_iter().map(f32::from_le_bytes).collect())
}

fn read_map(dir: &Path, name: &str, size: usize, channels: usize) -> Result<FloatMap> {
    let map = decode_float_map(&fs::read(dir.join(name))?)?;
    if map.width != size || map.height != size || map.channels != channels {
        return Err(Error::Asset(format!(
            "{name}: expected {size}x{size}x{channels}, got {}x{}x{}",
            map.width, map.height, map.channels
        )));
    }
    Ok(map)
}

impl AssetData {
    pub fn manifest(&self) -> Manifest {
        Manifest {
            version: ASSET_VERSION,
            vertex_count: self.vertex_count,
            shape_modes: SHAPE_MODES,
            texture_modes: TEXTURE_MODES,
            texture_size: self.texture_size,
            triangle_count: self.triangles.len() / 3,
            landmark_names: LANDMARK_NAMES.iter().map(|s| s.to_string()).collect(),
            eyelid_corners: self.eyelid_corners,
            upper_margin: self.upper_margin.clone(),
            lower_margin: self.lower_margin.clone(),
            eyeball: self.eyeball,
            eye_texture_size: self.eye_texture.size(),
        }
    }

    /// Writes the asset into `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("manifest.txt"), self.manifest().format())?;
        fs::write(dir.join("mu_geo.f32"), f32_bytes(&self.mean_shape))?;
        fs::write(dir.join("shape_basis.f32"), f32_bytes(&self.shape_basis))?;
        fs::write(dir.join("sigma_geo.f32"), f32_bytes(&self.shape_sigma))?;
        let mu_tex = FloatMap::new(self.texture_size, self.texture_size, 3, self.mean_texture.clone())?;
        fs::write(dir.join("mu_tex.pflt"), encode_float_map(&mu_tex))?;
        fs::write(dir.join("texture_basis.f32"), f32_bytes(&self.texture_basis))?;
        fs::write(dir.join("sigma_tex.f32"), f32_bytes(&self.texture_sigma))?;
        fs::write(dir.join("topology.u32"), u32_bytes(&self.triangles))?;
        fs::write(dir.join("uv.f32"), f32_bytes(&self.uvs))?;
        fs::write(dir.join("eyelid_weights.f32"), f32_bytes(&self.eyelid_weights))?;
        fs::write(dir.join("landmark_map.f32"), f32_bytes(&self.landmark_map))?;
        let tex = &self.eye_texture;
        let eye: Vec<f32> = tex
            .rgb()
            .iter()
            .zip(tex.iris_mask())
            .flat_map(|(c, &m)| [c[0], c[1], c[2], if m { 1.0 } else { 0.0 }])
            .collect();
        let eye = FloatMap::new(tex.size(), tex.size(), 4, eye)?;
        fs::write(dir.join("eye_texture.pflt"), encode_float_map(&eye))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = Manifest::parse(&fs::read_to_string(dir.join("manifest.txt"))?)?;
        let n = manifest.vertex_count;
        if n == 0 || n > 1 << 20 || manifest.triangle_count > 1 << 22 {
            return Err(Error::Asset("manifest counts out of range".into()));
        }
        let size = manifest.texture_size;
        let mean_texture = read_map(dir, "mu_tex.pflt", size, 3)?.data;
        let eye = read_map(dir, "eye_texture.pflt", manifest.eye_texture_size, 4)?;
        let (rgb, mask) = eye
            .data
            .chunks_exact(4)
            .map(|c| ([c[0], c[1], c[2]], c[3] > 0.5))
            .unzip();
        Ok(Self {
            vertex_count: n,
            texture_size: size,
            mean_shape: read_f32(dir, "mu_geo.f32", 3 * n)?,
            shape_basis: read_f32(dir, "shape_basis.f32", 3 * n * SHAPE_MODES)?,
            shape_sigma: read_f32(dir, "sigma_geo.f32", SHAPE_MODES)?,
            mean_texture,
            texture_basis: read_f32(dir, "texture_basis.f32", 3 * size * size * TEXTURE_MODES)?,
            texture_sigma: read_f32(dir, "sigma_tex.f32", TEXTURE_MODES)?,
            triangles: read_raw(dir, "topology.u32", 3 * manifest.triangle_count)?
                .into_iter()
                .map(u32::from_le_bytes)
                .collect(),
            uvs: read_f32(dir, "uv.f32", 2 * n)?,
            eyelid_weights: read_f32(dir, "eyelid_weights.f32", n)?,
            eyelid_corners: manifest.eyelid_corners,
            upper_margin: manifest.upper_margin,
            lower_margin: manifest.lower_margin,
            landmark_map: read_f32(dir, "landmark_map.f32", LANDMARK_COUNT * 6)?,
            eyeball: manifest.eyeball,
            eye_texture: EyeTexture::new(manifest.eye_texture_size, rgb, mask)?,
        })
    }
}

impl EyeRegionModel {
    /// Loads and validates an asset directory.
    pub fn load(dir: &Path) -> Result<Self> {
        Self::from_asset(&AssetData::load(dir)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::generate::{generate_asset, SyntheticModelSpec};

    fn spec() -> SyntheticModelSpec {
        SyntheticModelSpec {
            texture_size: 16,
            eye_texture_size: 16,
            ..SyntheticModelSpec::default()
        }
    }

    #[test]
    fn save_load_round_trip() {
        let asset = generate_asset(&spec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        asset.save(dir.path()).unwrap();
        assert_eq!(AssetData::load(dir.path()).unwrap(), asset);
        EyeRegionModel::load(dir.path()).unwrap();
    }

    #[test]
    fn manifest_round_trip() {
        let m = generate_asset(&spec()).unwrap().manifest();
        assert_eq!(Manifest::parse(&m.format()).unwrap(), m);
    }

    #[test]
    fn manifest_errors() {
        let text = generate_asset(&spec()).unwrap().manifest().format();
        assert!(Manifest::parse(&text.replace("version = 1", "version = 2")).is_err());
        assert!(Manifest::parse(&text.replace("shape_modes = 16", "shape_modes = 15")).is_err());
        assert!(Manifest::parse(&format!("{text}version = 1\n")).is_err());
        assert!(Manifest::parse("no equals sign").is_err());
    }

    #[test]
    fn truncated_array_is_rejected() {
        let asset = generate_asset(&spec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        asset.save(dir.path()).unwrap();
        fs::write(dir.path().join("sigma_geo.f32"), [0u8; 8]).unwrap();
        assert!(matches!(AssetData::load(dir.path()), Err(Error::Asset(_))));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut asset = generate_asset(&spec()).unwrap();
        asset.shape_sigma[3] = 0.0;
        assert!(EyeRegionModel::from_asset(&asset).is_err());
        let mut asset = generate_asset(&spec()).unwrap();
        asset.landmark_map[1] = 0.75;
        assert!(EyeRegionModel::from_asset(&asset).is_err());
        let mut asset = generate_asset(&spec()).unwrap();
        asset.triangles[5] = 229;
        assert!(EyeRegionModel::from_asset(&asset).is_err());
    }
}
