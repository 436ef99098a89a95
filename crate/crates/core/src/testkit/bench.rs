//! Synthetic redirection benchmark with stage ablations.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::image::RgbImage;
use crate::model::{EyeRegionModel, ParameterVector};
use crate::raster::{Camera, Raster, Renderer};
use crate::redirect::{repose, RedirectRequest, Redirector, Stages};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkSpec {
    pub pairs: usize,
    pub seed: u64,
    /// Largest requested pitch and yaw, radians.
    pub max_pitch: f64,
    pub max_yaw: f64,
    /// Pose of the source frames; gaze fields are overwritten with frontal
    /// gaze and shape/texture with a random identity per pair.
    pub base: ParameterVector,
    /// Robust threshold used for reflection map selection.
    pub threshold: f64,
}

impl BenchmarkSpec {
    pub fn new(pairs: usize, base: ParameterVector) -> Self {
        Self {
            pairs,
            seed: 1,
            max_pitch: 15f64.to_radians(),
            max_yaw: 20f64.to_radians(),
            base,
            threshold: 0.09,
        }
    }
}

/// Mean absolute pixel error (0-255 scale) of each variant for one pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairResult {
    pub index: usize,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub none: f64,
    pub eyeballs: f64,
    pub full: f64,
}

impl PairResult {
    pub fn angle_deg(&self) -> f64 {
        self.pitch_deg.hypot(self.yaw_deg)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<PairResult>,
}

impl AblationTable {
    /// Mean error of the three variants: (none, eyeballs only, full).
    pub fn means(&self) -> (f64, f64, f64) {
        let n = self.rows.len().max(1) as f64;
        let s = self.rows.iter().fold((0.0, 0.0, 0.0), |a, r| (a.0 + r.none, a.1 + r.eyeballs, a.2 + r.full));
        (s.0 / n, s.1 / n, s.2 / n)
    }

    /// Fraction of pairs with error at most each threshold, per variant.
    pub fn cumulative(&self, thresholds: &[f64]) -> Vec<(f64, f64, f64, f64)> {
        let n = self.rows.len().max(1) as f64;
        let frac = |t: f64, f: fn(&PairResult) -> f64| self.rows.iter().filter(|r| f(r) <= t).count() as f64 / n;
        thresholds
            .iter()
            .map(|&t| (t, frac(t, |r| r.none), frac(t, |r| r.eyeballs), frac(t, |r| r.full)))
            .collect()
    }

    pub fn to_delimited(&self, sep: char) -> String {
        let mut s = ["pair", "pitch_deg", "yaw_deg", "none", "eyeballs", "full"].join(&sep.to_string());
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}{sep}{:.3}{sep}{:.3}{sep}{:.6}{sep}{:.6}{sep}{:.6}",
                r.index, r.pitch_deg, r.yaw_deg, r.none, r.eyeballs, r.full
            );
        }
        s
    }
}

/// Mean absolute difference over pixels that are foreground in either raster.
pub fn region_error(a: &RgbImage, b: &RgbImage, ra: &Raster, rb: &Raster) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for i in 0..a.pixels().len() {
        if ra.mask[i].is_foreground() || rb.mask[i].is_foreground() {
            let (p, q) = (a.pixels()[i], b.pixels()[i]);
            sum += (0..3).map(|c| (p[c] - q[c]).abs()).sum::<f64>() / 3.0;
            n += 1;
        }
    }
    255.0 * sum / n.max(1) as f64
}

fn render(model: &EyeRegionModel, renderer: &Renderer, camera: &Camera, phi: &ParameterVector, map: usize) -> Result<Raster> {
    let mut scene = model.pose_scene(phi, Arc::new(model.texture_sample(&phi.texture)?))?;
    scene.reflection = Some(map);
    renderer.render(&scene, camera)
}

/// Renders frontal/target pairs of random identities and measures how close
/// each redirection variant gets to the true target rendering.
pub fn benchmark_redirection(model: &EyeRegionModel, renderer: &Renderer, camera: &Camera, spec: &BenchmarkSpec) -> Result<AblationTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let redirector = Redirector::new(model, renderer, camera);
    let mut rows = Vec::with_capacity(spec.pairs);
    for index in 0..spec.pairs {
        let mut src = spec.base.clone();
        for b in src.shape.iter_mut() {
            *b = rng.random_range(-1.0..1.0);
        }
        for t in src.texture.iter_mut() {
            *t = rng.random_range(-1.0..1.0);
        }
        src.pitch = 0.0;
        src.yaw = 0.0;
        src.vergence = 0.0;
        src.lid = 0.0;
        let map = rng.random_range(0..renderer.map_count());
        let pitch = rng.random_range(-spec.max_pitch..=spec.max_pitch);
        let yaw = rng.random_range(-spec.max_yaw..=spec.max_yaw);
        let request = RedirectRequest::Angles { pitch, yaw, vergence: 0.0 };
        let dst = repose(model, &src, &request)?;
        let source = render(model, renderer, camera, &src, map)?;
        let truth = render(model, renderer, camera, &dst, map)?;
        let err = |stages| -> Result<f64> {
            let out = redirector.redirect_stages(&source.color, &src, &request, spec.threshold, stages)?;
            Ok(region_error(&out.image, &truth.color, &source, &truth))
        };
        rows.push(PairResult {
            index,
            pitch_deg: pitch.to_degrees(),
            yaw_deg: yaw.to_degrees(),
            none: err(Stages::None)?,
            eyeballs: err(Stages::EyeballsOnly)?,
            full: err(Stages::Full)?,
        });
    }
    Ok(AblationTable { rows })
}
