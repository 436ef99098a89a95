//! Fitting energy and its residual vector.
//!
//! ```text
//! E = E_img + E_ldmks + E_stats + E_pose
//! E_img   = 1/|P| sum_p min(T, |I_syn(p) - I_obs(p)|^2)
//! E_ldmks = lambda_ldmks / |P| sum_i |l_i - l'_i|^2
//! E_stats = lambda_geo |beta_face|^2 + lambda_tex |tau_face|^2
//! E_pose  = lambda_pose (theta_lid - theta_p)^2
//! ```
//!
//! `P` is the set of rendered foreground pixels and `|.|` on colours is the
//! Euclidean RGB norm. The residual vector stacks, in order: three rows per
//! foreground pixel, two rows per landmark, 16 + 8 prior rows and one pose
//! row, scaled so that its squared norm is exactly `E`.

use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::image::{RgbImage, Texture};
use crate::model::{EyeRegionModel, ParameterVector, LANDMARK_COUNT, SHAPE_MODES, TEXTURE_MODES};
use crate::raster::{Camera, Part, Raster, Renderer};
use crate::Vec3;

/// Observed frame: image plus tracked landmarks.
#[derive(Clone, Debug)]
pub struct Observation {
    pub image: RgbImage,
    /// 25 landmarks in pixels, in the documented semantic order.
    pub landmarks: Vec<[f64; 2]>,
    /// Optional 3D landmark estimates in camera space, used for initialization.
    pub landmarks_3d: Option<Vec<Vec3>>,
}

impl Observation {
    pub fn new(image: RgbImage, landmarks: Vec<[f64; 2]>, landmarks_3d: Option<Vec<Vec3>>) -> Result<Self> {
        if landmarks.len() != LANDMARK_COUNT {
            return Err(Error::Count {
                what: "landmarks",
                expected: LANDMARK_COUNT,
                got: landmarks.len(),
            });
        }
        if landmarks.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "landmarks",
                reason: "non-finite coordinate".into(),
            });
        }
        if let Some(l3) = &landmarks_3d {
            if l3.len() != LANDMARK_COUNT {
                return Err(Error::Count {
                    what: "3D landmarks",
                    expected: LANDMARK_COUNT,
                    got: l3.len(),
                });
            }
            if l3.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
                return Err(Error::InvalidParameter {
                    name: "landmarks_3d",
                    reason: "non-finite coordinate".into(),
                });
            }
        }
        Ok(Self {
            image,
            landmarks,
            landmarks_3d,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyWeights {
    /// Robust clamp on the squared per-pixel colour error.
    pub threshold: f64,
    pub landmarks: f64,
    pub geometry: f64,
    pub texture: f64,
    pub pose: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        Self {
            threshold: 0.09,
            landmarks: 20.0,
            geometry: 0.01,
            texture: 0.01,
            pose: 0.1,
        }
    }
}

impl EnergyWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.threshold, self.landmarks, self.geometry, self.texture, self.pose];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || self.threshold <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "energy weights",
                reason: format!("weights must be finite and non-negative, threshold positive: {self:?}"),
            });
        }
        Ok(())
    }
}

/// Which energy terms contribute residual rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Terms {
    pub image: bool,
    pub landmarks: bool,
    pub stats: bool,
    pub pose: bool,
}

impl Terms {
    pub const ALL: Terms = Terms {
        image: true,
        landmarks: true,
        stats: true,
        pose: true,
    };
    pub const PRIORS: Terms = Terms {
        image: false,
        landmarks: false,
        stats: true,
        pose: true,
    };

    fn needs_render(&self) -> bool {
        self.image || self.landmarks
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub e_img: f64,
    pub e_ldmks: f64,
    pub e_stats: f64,
    pub e_pose: f64,
    pub total: f64,
    /// Foreground pixel count `|P|`.
    pub pixels: usize,
}

impl EnergyBreakdown {
    fn new(e_img: f64, e_ldmks: f64, e_stats: f64, e_pose: f64, pixels: usize) -> Self {
        Self {
            e_img,
            e_ldmks,
            e_stats,
            e_pose,
            total: e_img + e_ldmks + e_stats + e_pose,
            pixels,
        }
    }
}

/// `min(sqrt(T), e)`.
pub fn robust(e: f64, threshold: f64) -> f64 {
    e.min(threshold.sqrt())
}

fn rgb_diff(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm3(d: [f64; 3]) -> f64 {
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Robust image error over the pixels where `keep(part)` holds.
pub fn e_img_where(observed: &RgbImage, raster: &Raster, threshold: f64, keep: impl Fn(Part) -> bool) -> Result<f64> {
    observed.same_size(&raster.color)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, part) in raster.mask.iter().enumerate() {
        if part.is_foreground() && keep(*part) {
            let e = norm3(rgb_diff(raster.color.pixels()[i], observed.pixels()[i]));
            sum += robust(e, threshold).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyForeground);
    }
    Ok(sum / count as f64)
}

/// Robust mean squared colour error over the rendered foreground.
pub fn e_img(observed: &RgbImage, raster: &Raster, threshold: f64) -> Result<f64> {
    e_img_where(observed, raster, threshold, |_| true)
}

/// Projected landmarks `sum_j w_ij Pi(v_j)`.
pub fn synth_landmarks(model: &EyeRegionModel, phi: &ParameterVector, camera: &Camera) -> Result<Vec<[f64; 2]>> {
    let verts = model.face_vertices(phi)?;
    project_landmarks(model, &verts, camera)
}

fn project_landmarks(model: &EyeRegionModel, verts: &[Vec3], camera: &Camera) -> Result<Vec<[f64; 2]>> {
    model
        .landmark_map()
        .iter()
        .map(|row| {
            let mut out = [0.0; 2];
            for &(i, w) in row {
                let p = camera.project(&verts[i as usize])?;
                out[0] += w * p[0];
                out[1] += w * p[1];
            }
            Ok(out)
        })
        .collect()
}

pub fn e_ldmks(observed: &[[f64; 2]], synthesized: &[[f64; 2]], pixels: usize, weight: f64) -> Result<f64> {
    if observed.len() != synthesized.len() {
        return Err(Error::Count {
            what: "landmarks",
            expected: observed.len(),
            got: synthesized.len(),
        });
    }
    if pixels == 0 {
        return Err(Error::EmptyForeground);
    }
    let sum: f64 = observed
        .iter()
        .zip(synthesized)
        .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
        .sum();
    Ok(weight * sum / pixels as f64)
}

pub fn e_stats(beta: &[f64], tau: &[f64], weight_geo: f64, weight_tex: f64) -> f64 {
    weight_geo * beta.iter().map(|b| b * b).sum::<f64>() + weight_tex * tau.iter().map(|t| t * t).sum::<f64>()
}

pub fn e_pose(lid: f64, pitch: f64, weight: f64) -> f64 {
    weight * (lid - pitch).powi(2)
}

/// Row ranges of each term in a residual vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualLayout {
    /// Foreground pixel indices, one per group of three image rows.
    pub pixels: Vec<usize>,
    pub image: Range<usize>,
    pub landmarks: Range<usize>,
    pub stats: Range<usize>,
    pub pose: Range<usize>,
}

impl ResidualLayout {
    fn new(pixels: Vec<usize>, terms: Terms) -> Self {
        let image = 0..if terms.image { 3 * pixels.len() } else { 0 };
        let landmarks = image.end..image.end + if terms.landmarks { 2 * LANDMARK_COUNT } else { 0 };
        let stats = landmarks.end..landmarks.end + if terms.stats { SHAPE_MODES + TEXTURE_MODES } else { 0 };
        let pose = stats.end..stats.end + usize::from(terms.pose);
        Self {
            pixels,
            image,
            landmarks,
            stats,
            pose,
        }
    }

    /// Layout with no term structure: every row counts as a prior row.
    pub fn plain(rows: usize) -> Self {
        Self {
            pixels: Vec::new(),
            image: 0..0,
            landmarks: 0..0,
            stats: 0..rows,
            pose: rows..rows,
        }
    }

    pub fn len(&self) -> usize {
        self.pose.end
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Residuals at one parameter vector.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub residuals: Vec<f64>,
    pub layout: ResidualLayout,
    pub breakdown: EnergyBreakdown,
}

/// Everything that stays fixed while the parameters change.
#[derive(Clone, Copy)]
pub struct EnergyContext<'a> {
    pub model: &'a EyeRegionModel,
    pub renderer: &'a Renderer,
    pub camera: &'a Camera,
    pub observation: &'a Observation,
    pub weights: &'a EnergyWeights,
    pub terms: Terms,
}

impl EnergyContext<'_> {
    fn render(&self, phi: &ParameterVector, texture: &Arc<Texture>) -> Result<Raster> {
        let scene = self.model.pose_scene(phi, Arc::clone(texture))?;
        self.renderer.render(&scene, self.camera)
    }

    fn prior_rows(&self, phi: &ParameterVector, layout: &ResidualLayout, out: &mut [f64]) {
        let w = self.weights;
        if !layout.stats.is_empty() {
            let rows = &mut out[layout.stats.clone()];
            let (g, t) = (w.geometry.sqrt(), w.texture.sqrt());
            for (r, b) in rows.iter_mut().zip(&phi.shape) {
                *r = g * b;
            }
            for (r, tau) in rows[SHAPE_MODES..].iter_mut().zip(&phi.texture) {
                *r = t * tau;
            }
        }
        if !layout.pose.is_empty() {
            out[layout.pose.start] = w.pose.sqrt() * (phi.lid - phi.pitch);
        }
    }

    fn image_row(&self, synth: [f64; 3], observed: [f64; 3], scale: f64) -> [f64; 3] {
        let d = rgb_diff(synth, observed);
        let e = norm3(d);
        let k = if e > 0.0 { robust(e, self.weights.threshold) / e } else { 0.0 };
        d.map(|v| v * k * scale)
    }

    fn landmark_rows(&self, phi: &ParameterVector, pixels: usize, out: &mut [f64]) -> Result<()> {
        let synth = synth_landmarks(self.model, phi, self.camera)?;
        let s = (self.weights.landmarks / pixels as f64).sqrt();
        for (i, (l, m)) in self.observation.landmarks.iter().zip(&synth).enumerate() {
            out[2 * i] = s * (l[0] - m[0]);
            out[2 * i + 1] = s * (l[1] - m[1]);
        }
        Ok(())
    }

    /// Renders `phi` and evaluates every enabled term.
    pub fn evaluate(&self, phi: &ParameterVector, texture: &Arc<Texture>) -> Result<Evaluation> {
        let raster = if self.terms.needs_render() {
            let raster = self.render(phi, texture)?;
            self.observation.image.same_size(&raster.color)?;
            Some(raster)
        } else {
            None
        };
        let pixels = raster.as_ref().map(|r| r.foreground()).unwrap_or_default();
        if self.terms.needs_render() && pixels.is_empty() {
            return Err(Error::EmptyForeground);
        }
        let layout = ResidualLayout::new(pixels, self.terms);
        let mut r = vec![0.0; layout.len()];
        let count = layout.pixels.len();
        if let Some(raster) = &raster {
            let scale = 1.0 / (count as f64).sqrt();
            if self.terms.image {
                for (k, &p) in layout.pixels.iter().enumerate() {
                    let row = self.image_row(raster.color.pixels()[p], self.observation.image.pixels()[p], scale);
                    r[3 * k..3 * k + 3].copy_from_slice(&row);
                }
            }
            if self.terms.landmarks {
                self.landmark_rows(phi, count, &mut r[layout.landmarks.clone()])?;
            }
        }
        self.prior_rows(phi, &layout, &mut r);
        let sq = |range: Range<usize>| r[range].iter().map(|v| v * v).sum::<f64>();
        let breakdown = EnergyBreakdown::new(
            sq(layout.image.clone()),
            sq(layout.landmarks.clone()),
            sq(layout.stats.clone()),
            sq(layout.pose.clone()),
            count,
        );
        Ok(Evaluation {
            residuals: r,
            layout,
            breakdown,
        })
    }

    /// Residuals at `phi` laid out like `base`. The foreground set and `|P|`
    /// are those of `base`; a base pixel no longer covered keeps its base
    /// residual, so it contributes nothing to a finite difference.
    pub fn evaluate_aligned(&self, phi: &ParameterVector, texture: &Arc<Texture>, base: &Evaluation, out: &mut [f64]) -> Result<()> {
        let layout = &base.layout;
        debug_assert_eq!(out.len(), layout.len());
        let count = layout.pixels.len();
        if self.terms.needs_render() {
            let raster = self.render(phi, texture)?;
            if self.terms.image {
                let scale = 1.0 / (count as f64).sqrt();
                for (k, &p) in layout.pixels.iter().enumerate() {
                    let rows = 3 * k..3 * k + 3;
                    if raster.mask[p].is_foreground() {
                        let row = self.image_row(raster.color.pixels()[p], self.observation.image.pixels()[p], scale);
                        out[rows].copy_from_slice(&row);
                    } else {
                        out[rows.clone()].copy_from_slice(&base.residuals[rows]);
                    }
                }
            }
            if self.terms.landmarks {
                self.landmark_rows(phi, count, &mut out[layout.landmarks.clone()])?;
            }
        }
        self.prior_rows(phi, layout, out);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raster(w: usize, h: usize, color: [f64; 3], fg: impl Fn(usize) -> bool) -> Raster {
        let mask: Vec<Part> = (0..w * h).map(|i| if fg(i) { Part::FaceLeft } else { Part::Background }).collect();
        let depth = mask.iter().map(|p| if p.is_foreground() { 10.0 } else { f64::INFINITY }).collect();
        let pixels = mask.iter().map(|p| if p.is_foreground() { color } else { [0.0; 3] }).collect();
        Raster {
            color: RgbImage::from_pixels(w, h, pixels).unwrap(),
            mask,
            depth,
        }
    }

    #[test]
    fn image_term_cases() {
        let r = raster(4, 3, [0.5; 3], |i| i % 2 == 0);
        assert_eq!(e_img(&r.color, &r, 0.09).unwrap(), 0.0);
        let d = [0.1, -0.05, 0.02];
        let obs = RgbImage::from_pixels(4, 3, r.color.pixels().iter().map(|p| [p[0] - d[0], p[1] - d[1], p[2] - d[2]]).collect()).unwrap();
        let want = d.iter().map(|v| v * v).sum::<f64>();
        assert!((e_img(&obs, &r, 0.09).unwrap() - want).abs() < 1e-15);
        // Two of six foreground pixels saturate and contribute exactly T.
        let mut sat = r.color.clone();
        sat.set(0, 0, [0.0, 1.0, 0.0]);
        sat.set(2, 1, [1.0, 1.0, 1.0]);
        assert!((e_img(&sat, &r, 0.09).unwrap() - 2.0 * 0.09 / 6.0).abs() < 1e-15);
        // Background content is ignored.
        let mut bg = sat.clone();
        bg.set(1, 0, [1.0, 0.0, 1.0]);
        assert_eq!(e_img(&bg, &r, 0.09).unwrap(), e_img(&sat, &r, 0.09).unwrap());
        let empty = raster(4, 3, [0.5; 3], |_| false);
        assert!(matches!(e_img(&r.color, &empty, 0.09), Err(Error::EmptyForeground)));
    }

    #[test]
    fn robust_error_saturates() {
        let mut prev = 0.0;
        for k in 0..100 {
            let e = robust(k as f64 * 0.01, 0.09);
            assert!(e >= prev);
            prev = e;
        }
        assert_eq!(robust(0.31, 0.09), robust(5.0, 0.09));
    }

    #[test]
    fn landmark_term_arithmetic() {
        let a = vec![[0.0; 2]; 25];
        let mut b = a.clone();
        assert_eq!(e_ldmks(&a, &b, 100, 1.0).unwrap(), 0.0);
        b[7] = [3.0, 4.0];
        assert!((e_ldmks(&a, &b, 100, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((e_ldmks(&a, &b, 200, 1.0).unwrap() - 0.125).abs() < 1e-15);
        assert!(e_ldmks(&a, &b, 0, 1.0).is_err());
    }

    #[test]
    fn prior_terms() {
        assert_eq!(e_stats(&[0.0; 16], &[0.0; 8], 0.01, 0.01), 0.0);
        let mut beta = [0.0; 16];
        beta[0] = 1.0;
        assert_eq!(e_stats(&beta, &[0.0; 8], 2.0, 5.0), 2.0);
        assert_eq!(e_pose(0.3, 0.3, 1.0), 0.0);
        let ten = 10f64.to_radians();
        assert!((e_pose(ten, 0.0, 1.0) - 0.0305).abs() < 1e-4);
        assert_eq!(e_pose(ten, 0.0, 1.0), e_pose(0.0, ten, 1.0));
    }

    #[test]
    fn stats_gradient_matches_finite_differences() {
        let beta: Vec<f64> = (0..16).map(|i| 0.1 * i as f64 - 0.7).collect();
        let tau = [0.3; 8];
        let h = 1e-5;
        for i in 0..16 {
            let mut p = beta.clone();
            p[i] += h;
            let mut m = beta.clone();
            m[i] -= h;
            let fd = (e_stats(&p, &tau, 0.7, 0.2) - e_stats(&m, &tau, 0.7, 0.2)) / (2.0 * h);
            assert!((fd - 2.0 * 0.7 * beta[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn layout_lengths() {
        let l = ResidualLayout::new(vec![1, 2, 3], Terms::ALL);
        assert_eq!(l.len(), 9 + 50 + 24 + 1);
        let p = ResidualLayout::new(vec![], Terms::PRIORS);
        assert_eq!(p.len(), 25);
    }
}
