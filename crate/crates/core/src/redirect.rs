//! Gaze redirection of a fitted frame.
//!
//! The fitted parameters are re-posed towards a new gaze, the eyelids are
//! moved by warping the observed image along a dense flow field derived
//! from the model, and freshly rendered eyeballs are composited on top with
//! a softened seam.

use std::sync::Arc;

use crate::energy::e_img_where;
use crate::error::{Error, Result};
use crate::image::{RgbImage, Texture};
use crate::model::pose::LID_GUARD;
use crate::model::{EyeRegionModel, ParameterVector, Scene, Side, FACE_VERTICES};
use crate::raster::{Camera, FlowField, Part, Renderer};
use crate::Vec3;

/// New gaze for one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RedirectRequest {
    /// Camera-space point (mm) both eyes should look at.
    Target(Vec3),
    /// Explicit gaze angles in radians.
    Angles { pitch: f64, yaw: f64, vergence: f64 },
}

/// Compositing seam: alpha is blurred with a Gaussian of `sigma` pixels on
/// eyeball pixels within `band` pixels of the eyeball mask boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeamSettings {
    pub sigma: f64,
    pub band: f64,
}

impl Default for SeamSettings {
    fn default() -> Self {
        Self { sigma: 1.5, band: 3.0 }
    }
}

/// Parameters with the new gaze. The eyelid keeps its offset from the
/// pitch, so a request for the current gaze returns `phi` unchanged.
pub fn repose(model: &EyeRegionModel, phi: &ParameterVector, request: &RedirectRequest) -> Result<ParameterVector> {
    let (pitch, yaw, vergence) = match *request {
        RedirectRequest::Target(g) => {
            if !g.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "gaze target",
                    reason: format!("non-finite target {g:?}"),
                });
            }
            let a = model.gaze_from_target(phi, g)?;
            (a.pitch, a.yaw, a.vergence)
        }
        RedirectRequest::Angles { pitch, yaw, vergence } => {
            if ![pitch, yaw, vergence].iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "gaze angles",
                    reason: "non-finite angle".into(),
                });
            }
            (pitch, yaw, vergence)
        }
    };
    let mut out = phi.clone();
    if pitch.to_bits() != phi.pitch.to_bits() {
        let limit = LID_GUARD - 1f64.to_radians();
        out.lid = (phi.lid + (pitch - phi.pitch)).clamp(-limit, limit);
    }
    out.pitch = pitch;
    out.yaw = yaw;
    out.vergence = vergence;
    Ok(out)
}

/// Per-vertex image displacement `o_i = Pi(v'_i) - Pi(v*_i)` for all face
/// vertices of both parts, in global vertex order.
pub fn vertex_flow(model: &EyeRegionModel, from: &ParameterVector, to: &ParameterVector, camera: &Camera) -> Result<Vec<[f64; 2]>> {
    let a = model.face_vertices(from)?;
    let b = model.face_vertices(to)?;
    a.iter()
        .zip(&b)
        .map(|(p, q)| {
            let s = camera.project(p)?;
            let t = camera.project(q)?;
            Ok([t[0] - s[0], t[1] - s[1]])
        })
        .collect()
}

fn placeholder_texture() -> Arc<Texture> {
    Arc::new(Texture::from_texels(1, 1, vec![[0.5; 3]]).expect("1x1 texture"))
}

/// Splits global per-vertex values into the per-part lists of `scene.faces`.
pub fn per_part<T: Copy>(scene: &Scene, values: &[T]) -> Vec<Vec<T>> {
    scene
        .faces
        .iter()
        .map(|f| {
            let offset = if f.side == Side::Left { 0 } else { FACE_VERTICES };
            values[offset..offset + FACE_VERTICES].to_vec()
        })
        .collect()
}

/// Backward warp: `out(p) = image(p - flow(p))` on covered pixels, the
/// input elsewhere.
pub fn warp(image: &RgbImage, flow: &FlowField) -> Result<RgbImage> {
    if image.width() != flow.width() || image.height() != flow.height() {
        return Err(Error::DimensionMismatch(image.width(), image.height(), flow.width(), flow.height()));
    }
    let mut out = image.clone();
    let w = image.width();
    for (i, px) in out.pixels_mut().iter_mut().enumerate() {
        if flow.coverage()[i] {
            let o = flow.vectors()[i];
            if o != [0.0, 0.0] {
                let (x, y) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
                *px = image.sample_bilinear(x - o[0], y - o[1]);
            }
        }
    }
    Ok(out)
}

/// Compositing alpha: 1 on eyeball pixels, 0 elsewhere, Gaussian-blurred on
/// eyeball pixels near the mask boundary. Values outside the mask stay 0.
pub fn seam_alpha(mask: &[bool], width: usize, height: usize, seam: &SeamSettings) -> Vec<f64> {
    let mut alpha: Vec<f64> = mask.iter().map(|m| f64::from(u8::from(*m))).collect();
    if seam.sigma <= 0.0 || seam.band <= 0.0 {
        return alpha;
    }
    let band = seam.band.ceil() as isize;
    let radius = (3.0 * seam.sigma).ceil() as isize;
    let inside = |x: isize, y: isize| x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height;
    let near_boundary = |x: isize, y: isize| {
        for dy in -band..=band {
            for dx in -band..=band {
                let d2 = (dx * dx + dy * dy) as f64;
                if d2 <= seam.band * seam.band {
                    let (sx, sy) = (x + dx, y + dy);
                    if inside(sx, sy) && !mask[sy as usize * width + sx as usize] {
                        return true;
                    }
                }
            }
        }
        false
    };
    for y in 0..height as isize {
        for x in 0..width as isize {
            let i = y as usize * width + x as usize;
            if !mask[i] || !near_boundary(x, y) {
                continue;
            }
            let (mut num, mut den) = (0.0, 0.0);
            for dy in -radius..=radius {
                for dx in -radius..=radius {
                    let (sx, sy) = (x + dx, y + dy);
                    if !inside(sx, sy) {
                        continue;
                    }
                    let k = (-((dx * dx + dy * dy) as f64) / (2.0 * seam.sigma * seam.sigma)).exp();
                    num += k * f64::from(u8::from(mask[sy as usize * width + sx as usize]));
                    den += k;
                }
            }
            alpha[i] = (num / den).clamp(0.0, 1.0);
        }
    }
    alpha
}

/// Output of one redirected frame.
#[derive(Clone, Debug)]
pub struct RedirectOutput {
    pub image: RgbImage,
    pub phi: ParameterVector,
    pub flow: FlowField,
    pub map_id: usize,
}

/// Which stages of redirection to apply; used for ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stages {
    /// Return the input unchanged.
    None,
    /// Composite re-rendered eyeballs over the unwarped input.
    EyeballsOnly,
    /// Warp the eyelids, then composite eyeballs.
    Full,
}

/// Redirection of frames for one model, renderer and camera.
#[derive(Clone, Copy)]
pub struct Redirector<'a> {
    pub model: &'a EyeRegionModel,
    pub renderer: &'a Renderer,
    pub camera: &'a Camera,
    pub seam: SeamSettings,
}

impl<'a> Redirector<'a> {
    pub fn new(model: &'a EyeRegionModel, renderer: &'a Renderer, camera: &'a Camera) -> Self {
        Self {
            model,
            renderer,
            camera,
            seam: SeamSettings::default(),
        }
    }

    /// Dense backward flow rasterized over the destination pose `to`.
    pub fn eyelid_flow(&self, from: &ParameterVector, to: &ParameterVector) -> Result<FlowField> {
        let offsets = vertex_flow(self.model, from, to, self.camera)?;
        let source = self.model.pose_scene(from, placeholder_texture())?;
        let scene = self.model.pose_scene(to, placeholder_texture())?;
        let source_flow = self.renderer.render_attributes(&source, self.camera, &per_part(&source, &vec![[0.0; 2]; offsets.len()]))?;
        if !source_flow.coverage().iter().any(|c| *c) {
            return Err(Error::EmptyForeground);
        }
        let flow = self.renderer.render_attributes(&scene, self.camera, &per_part(&scene, &offsets))?;
        if !flow.coverage().iter().any(|c| *c) {
            return Err(Error::EmptyForeground);
        }
        Ok(flow)
    }

    /// Reflection map whose eyeball rendering best matches `observed`;
    /// 0 when no eyeball pixel is visible.
    pub fn select_reflection_map(&self, observed: &RgbImage, phi: &ParameterVector, threshold: f64) -> Result<usize> {
        let mut scene = self.model.pose_scene(phi, placeholder_texture())?;
        let mut best = (0, f64::INFINITY);
        for id in 0..self.renderer.map_count() {
            scene.reflection = Some(id);
            let raster = self.renderer.render(&scene, self.camera)?;
            let e = match e_img_where(observed, &raster, threshold, Part::is_eye) {
                Ok(e) => e,
                Err(Error::EmptyForeground) => return Ok(0),
                Err(e) => return Err(e),
            };
            if e < best.1 {
                best = (id, e);
            }
        }
        Ok(best.0)
    }

    /// Replaces eyeball pixels of `warped` with a render of `phi` under
    /// reflection map `map_id`, blending across the seam.
    pub fn composite(&self, warped: &RgbImage, phi: &ParameterVector, map_id: usize) -> Result<RgbImage> {
        let mut scene = self.model.pose_scene(phi, placeholder_texture())?;
        scene.reflection = Some(map_id);
        let raster = self.renderer.render(&scene, self.camera)?;
        warped.same_size(&raster.color)?;
        let mask: Vec<bool> = raster.mask.iter().map(|p| p.is_eye()).collect();
        let alpha = seam_alpha(&mask, warped.width(), warped.height(), &self.seam);
        let mut out = warped.clone();
        for ((px, a), r) in out.pixels_mut().iter_mut().zip(&alpha).zip(raster.color.pixels()) {
            if *a >= 1.0 {
                *px = *r;
            } else if *a > 0.0 {
                *px = [0, 1, 2].map(|c| (a * r[c] + (1.0 - a) * px[c]).clamp(0.0, 1.0));
            }
        }
        Ok(out)
    }

    /// Full redirection of one frame.
    pub fn redirect_frame(&self, observed: &RgbImage, phi: &ParameterVector, request: &RedirectRequest, threshold: f64) -> Result<RedirectOutput> {
        self.redirect_stages(observed, phi, request, threshold, Stages::Full)
    }

    pub fn redirect_stages(
        &self,
        observed: &RgbImage,
        phi: &ParameterVector,
        request: &RedirectRequest,
        threshold: f64,
        stages: Stages,
    ) -> Result<RedirectOutput> {
        let target = repose(self.model, phi, request)?;
        let flow = match stages {
            Stages::Full => self.eyelid_flow(phi, &target)?,
            _ => FlowField::zeros(observed.width(), observed.height()),
        };
        if stages == Stages::None {
            return Ok(RedirectOutput {
                image: observed.clone(),
                phi: target,
                flow,
                map_id: 0,
            });
        }
        let warped = warp(observed, &flow)?;
        let map_id = self.select_reflection_map(observed, phi, threshold)?;
        let image = self.composite(&warped, &target, map_id)?;
        Ok(RedirectOutput {
            image,
            phi: target,
            flow,
            map_id,
        })
    }
}
