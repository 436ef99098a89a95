//! Deterministic CPU rasterizer.
//!
//! Rendering runs in two passes. The visibility pass ([`fill`]) finds the
//! nearest triangle and its perspective-correct barycentrics at every pixel
//! centre; the shading pass then evaluates the face and eyeball shaders from
//! those fragments. There is no antialiasing: a pixel belongs to exactly one
//! part or to the background.

pub mod camera;
pub mod envmap;
pub mod fill;
pub mod shade;
pub mod subdiv;

pub use camera::Camera;
pub use envmap::EnvMap;
pub use shade::AoSettings;

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::model::scene::{EyeballPart, Scene, Side};
use crate::{Rot3, Vec3};
use fill::{fill, FillInput, Fragment, Fragments};
use shade::{disc_coords, reflect, refract_corneal, LidCurves};

/// Per-pixel part label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Part {
    Background = 0,
    FaceLeft = 1,
    FaceRight = 2,
    EyeLeft = 3,
    EyeRight = 4,
}

impl Part {
    pub fn face(side: Side) -> Self {
        match side {
            Side::Left => Part::FaceLeft,
            Side::Right => Part::FaceRight,
        }
    }

    pub fn eye(side: Side) -> Self {
        match side {
            Side::Left => Part::EyeLeft,
            Side::Right => Part::EyeRight,
        }
    }

    pub fn is_face(self) -> bool {
        matches!(self, Part::FaceLeft | Part::FaceRight)
    }

    pub fn is_eye(self) -> bool {
        matches!(self, Part::EyeLeft | Part::EyeRight)
    }

    pub fn is_foreground(self) -> bool {
        self != Part::Background
    }
}

/// Rendered image with part labels and depth.
///
/// Background pixels have depth `+inf` and colour zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub color: RgbImage,
    pub mask: Vec<Part>,
    /// Distance along `-z` in mm.
    pub depth: Vec<f64>,
}

impl Raster {
    pub fn width(&self) -> usize {
        self.color.width()
    }

    pub fn height(&self) -> usize {
        self.color.height()
    }

    pub fn part(&self, x: usize, y: usize) -> Part {
        self.mask[y * self.width() + x]
    }

    /// Indices of foreground pixels in row-major order.
    pub fn foreground(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i].is_foreground()).collect()
    }
}

/// Dense per-pixel 2D displacement with a coverage mask. Displacements are
/// zero wherever coverage is false.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    vectors: Vec<[f64; 2]>,
    coverage: Vec<bool>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            vectors: vec![[0.0; 2]; width * height],
            coverage: vec![false; width * height],
        }
    }

    pub fn from_parts(width: usize, height: usize, vectors: Vec<[f64; 2]>, coverage: Vec<bool>) -> Result<Self> {
        if vectors.len() != width * height || coverage.len() != width * height {
            return Err(Error::Count {
                what: "flow pixels",
                expected: width * height,
                got: vectors.len().min(coverage.len()),
            });
        }
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "flow",
                reason: "non-finite displacement".into(),
            });
        }
        if vectors.iter().zip(&coverage).any(|(v, &c)| !c && *v != [0.0; 2]) {
            return Err(Error::InvalidParameter {
                name: "flow",
                reason: "non-zero displacement outside coverage".into(),
            });
        }
        Ok(Self {
            width,
            height,
            vectors,
            coverage,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.vectors
    }

    pub fn coverage(&self) -> &[bool] {
        &self.coverage
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 2] {
        self.vectors[y * self.width + x]
    }

    pub fn covered(&self, x: usize, y: usize) -> bool {
        self.coverage[y * self.width + x]
    }

    /// Sets a displacement and marks the pixel covered.
    pub fn set(&mut self, x: usize, y: usize, v: [f64; 2]) {
        let i = y * self.width + x;
        self.vectors[i] = v;
        self.coverage[i] = true;
    }

    /// Largest displacement magnitude.
    pub fn max_norm(&self) -> f64 {
        self.vectors.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderSettings {
    /// Apply one step of Loop subdivision to face parts before rasterizing.
    pub subdivide: bool,
    pub refractive_index: f64,
    pub ao: AoSettings,
    /// Scale of the reflection-map contribution.
    pub specular: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            subdivide: true,
            refractive_index: shade::CORNEA_INDEX,
            ao: AoSettings::default(),
            specular: 0.25,
        }
    }
}

/// Area-weighted vertex normals.
pub fn vertex_normals(positions: &[Vec3], triangles: &[[u32; 3]]) -> Vec<Vec3> {
    let mut normals = vec![Vec3::zeros(); positions.len()];
    for t in triangles {
        let [a, b, c] = t.map(|i| positions[i as usize]);
        let n = (b - a).cross(&(c - a));
        for &i in t {
            normals[i as usize] += n;
        }
    }
    for n in normals.iter_mut() {
        let len = n.norm();
        if len > 0.0 {
            *n /= len;
        }
    }
    normals
}

struct PreparedFace<'a> {
    part: Part,
    positions: Vec<Vec3>,
    triangles: &'a [[u32; 3]],
    uvs: &'a [[f64; 2]],
    normals: Vec<Vec3>,
}

struct PreparedEye<'a> {
    eye: &'a EyeballPart,
    to_local: Rot3,
    lids: Option<LidCurves>,
}

impl<'a> PreparedEye<'a> {
    fn new(eye: &'a EyeballPart) -> Self {
        let to_local = eye.orientation.inverse();
        let lids = eye.lids.as_ref().and_then(|lids| {
            let project = |pts: &[Vec3]| -> Vec<(f64, f64)> {
                pts.iter().filter_map(|p| disc_coords(&(to_local * (p - eye.center)))).collect()
            };
            LidCurves::fit(&project(&lids.upper), &project(&lids.lower))
        });
        Self { eye, to_local, lids }
    }
}

/// Shading inputs at one eyeball fragment.
struct EyeSample {
    albedo: [f64; 3],
    occlusion: f64,
    normal: Vec3,
    view: Vec3,
}

/// Occlusion-weighted specular term for one eyeball fragment.
fn specular(sample: &EyeSample, map: &EnvMap, scale: f64) -> [f64; 3] {
    let env = map.lookup(&reflect(&sample.view, &sample.normal));
    let k = scale * sample.occlusion;
    env.map(|e| k * e)
}

#[derive(Clone, Debug)]
pub struct Renderer {
    settings: RenderSettings,
    maps: Vec<EnvMap>,
}

impl Default for Renderer {
    fn default() -> Self {
        Self::new(RenderSettings::default())
    }
}

impl Renderer {
    pub fn new(settings: RenderSettings) -> Self {
        Self {
            settings,
            maps: EnvMap::builtin(),
        }
    }

    /// Renderer with custom reflection maps in place of the built-in five.
    pub fn with_maps(settings: RenderSettings, maps: Vec<EnvMap>) -> Self {
        Self { settings, maps }
    }

    pub fn settings(&self) -> &RenderSettings {
        &self.settings
    }

    pub fn map_count(&self) -> usize {
        self.maps.len()
    }

    fn map(&self, id: usize) -> Result<&EnvMap> {
        self.maps.get(id).ok_or(Error::InvalidReflectionMap(id))
    }

    fn prepare_faces<'a>(&self, scene: &'a Scene, subdivide: bool) -> Result<Vec<PreparedFace<'a>>> {
        scene
            .faces
            .iter()
            .map(|face| {
                let topo = &*face.topology;
                if face.positions.len() != topo.vertex_count() {
                    return Err(Error::Count {
                        what: "face-part vertices",
                        expected: topo.vertex_count(),
                        got: face.positions.len(),
                    });
                }
                let (positions, triangles, uvs) = match (&topo.refinement, subdivide) {
                    (Some(r), true) => (r.stencils.apply(&face.positions), r.stencils.triangles(), &r.uvs[..]),
                    _ => (face.positions.clone(), &topo.triangles[..], &topo.uvs[..]),
                };
                let normals = vertex_normals(&positions, triangles);
                Ok(PreparedFace {
                    part: Part::face(face.side),
                    positions,
                    triangles,
                    uvs,
                    normals,
                })
            })
            .collect()
    }

    fn visibility(faces: &[PreparedFace], scene: &Scene, camera: &Camera) -> Result<Fragments> {
        camera.validate()?;
        let mut inputs: Vec<FillInput> = faces
            .iter()
            .map(|f| FillInput {
                positions: &f.positions,
                triangles: f.triangles,
                cull_back: false,
            })
            .collect();
        inputs.extend(scene.eyes.iter().map(|e| FillInput {
            positions: &e.positions,
            triangles: &e.triangles,
            cull_back: true,
        }));
        Ok(fill(&inputs, camera))
    }

    fn eye_sample(&self, eye: &PreparedEye, frag: &Fragment) -> EyeSample {
        let part = eye.eye;
        let tri = part.triangles[frag.triangle as usize];
        let p: Vec3 = (0..3).map(|k| part.positions[tri[k] as usize] * frag.bary[k]).sum();
        let view = p.normalize();
        let q = eye.to_local * (p - part.center);
        let local_view = eye.to_local * view;
        let geometry = &part.geometry;
        let material = &part.material;
        let radial = q.x.hypot(q.y);
        let cornea = q.z > 0.0 && radial < geometry.limbus_radius * material.iris_scale;
        let (normal_local, disc) = if cornea {
            let n = (q - geometry.cornea_center()).normalize();
            let disc = match refract_corneal(&q, &local_view, geometry, self.settings.refractive_index) {
                Some(h) => (h.x / geometry.sclera_radius, h.y / geometry.sclera_radius),
                None => (q.x / q.norm(), q.y / q.norm()),
            };
            (n, disc)
        } else {
            let n = q.normalize();
            (n, (n.x, n.y))
        };
        let occlusion = match (&eye.lids, disc_coords(&q)) {
            (Some(lids), Some((u, v))) => self.settings.ao.factor(lids.distance(u, v)),
            (Some(_), None) => self.settings.ao.min,
            (None, _) => 1.0,
        };
        EyeSample {
            albedo: material.sample(disc.0, disc.1),
            occlusion,
            normal: part.orientation * normal_local,
            view,
        }
    }

    /// Renders colour, part mask and depth.
    pub fn render(&self, scene: &Scene, camera: &Camera) -> Result<Raster> {
        let map = scene.reflection.map(|id| self.map(id)).transpose()?;
        let faces = self.prepare_faces(scene, self.settings.subdivide)?;
        let frags = Self::visibility(&faces, scene, camera)?;
        let eyes: Vec<PreparedEye> = scene.eyes.iter().map(PreparedEye::new).collect();
        let light = &scene.lighting;
        let texture = &*scene.face_texture;
        let n = camera.pixel_count();
        let mut color = RgbImage::new(camera.width, camera.height);
        let mut mask = vec![Part::Background; n];
        let mut depth = vec![f64::INFINITY; n];
        let out = color.pixels_mut();
        for (i, frag) in frags.pixels.iter().enumerate() {
            let Some(frag) = frag else { continue };
            depth[i] = frag.depth;
            let part = frag.part as usize;
            let lit = |normal: &Vec3| {
                let d = normal.dot(&light.direction).max(0.0);
                [0, 1, 2].map(|c| light.ambient[c] + light.directional[c] * d)
            };
            let rgb = if part < faces.len() {
                let face = &faces[part];
                mask[i] = face.part;
                let tri = face.triangles[frag.triangle as usize];
                let b = frag.bary;
                let mut uv = [0.0; 2];
                let mut normal = Vec3::zeros();
                for k in 0..3 {
                    let v = tri[k] as usize;
                    uv[0] += b[k] * face.uvs[v][0];
                    uv[1] += b[k] * face.uvs[v][1];
                    normal += face.normals[v] * b[k];
                }
                let normal = normal.try_normalize(0.0).unwrap_or_else(Vec3::z);
                let albedo = texture.sample(uv[0], uv[1]);
                let l = lit(&normal);
                [0, 1, 2].map(|c| albedo[c] * l[c])
            } else {
                let eye = &eyes[part - faces.len()];
                mask[i] = Part::eye(eye.eye.side);
                let s = self.eye_sample(eye, frag);
                let l = lit(&s.normal);
                let spec = map.map(|m| specular(&s, m, self.settings.specular)).unwrap_or([0.0; 3]);
                [0, 1, 2].map(|c| s.albedo[c] * s.occlusion * l[c] + spec[c])
            };
            out[i] = rgb.map(|v| v.clamp(0.0, 1.0));
        }
        Ok(Raster { color, mask, depth })
    }

    /// Specular contribution of reflection map `map_id` at every eyeball
    /// pixel; zero elsewhere.
    pub fn reflection_delta(&self, scene: &Scene, camera: &Camera, map_id: usize) -> Result<RgbImage> {
        let map = self.map(map_id)?;
        let faces = self.prepare_faces(scene, self.settings.subdivide)?;
        let frags = Self::visibility(&faces, scene, camera)?;
        let eyes: Vec<PreparedEye> = scene.eyes.iter().map(PreparedEye::new).collect();
        let mut delta = RgbImage::new(camera.width, camera.height);
        let out = delta.pixels_mut();
        for (i, frag) in frags.pixels.iter().enumerate() {
            if let Some(frag) = frag {
                if let Some(eye) = (frag.part as usize).checked_sub(faces.len()).map(|e| &eyes[e]) {
                    out[i] = specular(&self.eye_sample(eye, frag), map, self.settings.specular);
                }
            }
        }
        Ok(delta)
    }

    /// Interpolates per-vertex 2D attributes of the (unsubdivided) face parts.
    ///
    /// `attributes[k]` belongs to `scene.faces[k]`. Eyeballs take part in
    /// the depth test only. Coverage is the set of pixels won by a face part.
    pub fn render_attributes(&self, scene: &Scene, camera: &Camera, attributes: &[Vec<[f64; 2]>]) -> Result<FlowField> {
        if attributes.len() != scene.faces.len() {
            return Err(Error::MissingAttributes(format!(
                "{} attribute sets for {} face parts",
                attributes.len(),
                scene.faces.len()
            )));
        }
        for (face, attr) in scene.faces.iter().zip(attributes) {
            if attr.len() != face.positions.len() {
                return Err(Error::MissingAttributes(format!(
                    "{:?} face part has {} vertices but {} attributes",
                    face.side,
                    face.positions.len(),
                    attr.len()
                )));
            }
        }
        let faces = self.prepare_faces(scene, false)?;
        let frags = Self::visibility(&faces, scene, camera)?;
        let mut flow = FlowField::zeros(camera.width, camera.height);
        for (i, frag) in frags.pixels.iter().enumerate() {
            let Some(frag) = frag else { continue };
            let part = frag.part as usize;
            if part >= faces.len() {
                continue;
            }
            let tri = faces[part].triangles[frag.triangle as usize];
            let attr = &attributes[part];
            let mut v = [0.0; 2];
            for k in 0..3 {
                let a = attr[tri[k] as usize];
                v[0] += frag.bary[k] * a[0];
                v[1] += frag.bary[k] * a[1];
            }
            flow.vectors[i] = v;
            flow.coverage[i] = true;
        }
        Ok(flow)
    }
}
