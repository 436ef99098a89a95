//! Run configuration, read from a TOML file. Relative paths are resolved
//! against the directory containing the file.

use std::path::{Path, PathBuf};

use eyeshift::energy::EnergyWeights;
use eyeshift::model::ParamMask;
use eyeshift::solver::{FitConfig, StepSizes};
use eyeshift::Camera;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub asset: PathBuf,
    pub output: PathBuf,
    /// Frame path pattern; a run of `#` is replaced by the zero-padded frame index.
    pub frames: String,
    pub landmarks: PathBuf,
    pub camera: CameraConfig,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub debug: DebugConfig,
    #[serde(default)]
    pub synth: SynthConfig,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsConfig {
    pub threshold: f64,
    pub landmarks: f64,
    pub geometry: f64,
    pub texture: f64,
    pub pose: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        let w = EnergyWeights::default();
        Self {
            threshold: w.threshold,
            landmarks: w.landmarks,
            geometry: w.geometry,
            texture: w.texture,
            pose: w.pose,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Masking {
    /// First frame optimizes everything, later frames only pose, gaze and lid.
    #[default]
    Video,
    /// Every frame optimizes everything.
    All,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub max_iterations: usize,
    pub eta: f64,
    pub eta_decay: f64,
    pub convergence: f64,
    pub damping: f64,
    pub max_halvings: usize,
    pub rigid_iterations: usize,
    pub masking: Masking,
    pub steps: StepConfig,
}

impl Default for FitSection {
    fn default() -> Self {
        let c = FitConfig::default();
        Self {
            max_iterations: c.max_iterations,
            eta: c.eta,
            eta_decay: c.eta_decay,
            convergence: c.convergence,
            damping: c.damping,
            max_halvings: c.max_halvings,
            rigid_iterations: c.rigid_iterations,
            masking: Masking::default(),
            steps: StepConfig::default(),
        }
    }
}

/// Finite-difference steps; angles in degrees.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepConfig {
    pub pca: f64,
    pub iris_scale: f64,
    pub angle_deg: f64,
    pub gaze_deg: f64,
    pub translation: f64,
    pub color: f64,
    pub intensity: f64,
}

impl Default for StepConfig {
    fn default() -> Self {
        let s = StepSizes::default();
        Self {
            pca: s.pca,
            iris_scale: s.iris_scale,
            angle_deg: s.angle.to_degrees(),
            gaze_deg: s.gaze.to_degrees(),
            translation: s.translation,
            color: s.color,
            intensity: s.intensity,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DebugConfig {
    /// Write the fitted rendering of every frame.
    pub dump_renders: bool,
    /// Write the dense eyelid flow of every redirected frame.
    pub dump_flow: bool,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// Head distance from the camera, mm.
    pub distance: f64,
    /// Specular reflection map for the eyeballs; none renders them diffuse,
    /// as the fitting energy does.
    pub reflection_map: Option<usize>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            distance: 420.0,
            reflection_map: None,
        }
    }
}

/// Validated configuration with absolute paths.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub asset: PathBuf,
    pub output: PathBuf,
    pub frames: FramePattern,
    pub landmarks: PathBuf,
    pub camera: Camera,
    pub weights: EnergyWeights,
    pub fit: FitConfig,
    pub masking: Masking,
    pub debug: DebugConfig,
    pub synth: SynthConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::input(format!("invalid config: {e}")))?;
        let c = raw.camera;
        let camera = Camera::new(c.fx, c.fy, c.cx, c.cy, c.width, c.height)?;
        let w = raw.weights;
        let weights = EnergyWeights {
            threshold: w.threshold,
            landmarks: w.landmarks,
            geometry: w.geometry,
            texture: w.texture,
            pose: w.pose,
        };
        weights.validate()?;
        let f = raw.fit;
        let s = f.steps;
        let fit = FitConfig {
            max_iterations: f.max_iterations,
            eta: f.eta,
            eta_decay: f.eta_decay,
            steps: StepSizes {
                pca: s.pca,
                iris_scale: s.iris_scale,
                angle: s.angle_deg.to_radians(),
                gaze: s.gaze_deg.to_radians(),
                translation: s.translation,
                color: s.color,
                intensity: s.intensity,
            },
            mask: ParamMask::all(),
            convergence: f.convergence,
            damping: f.damping,
            max_halvings: f.max_halvings,
            rigid_iterations: f.rigid_iterations,
        };
        fit.validate()?;
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        Ok(Self {
            asset: resolve(&raw.asset),
            output: resolve(&raw.output),
            frames: FramePattern::new(&resolve(Path::new(&raw.frames)).to_string_lossy())?,
            landmarks: resolve(&raw.landmarks),
            camera,
            weights,
            fit,
            masking: f.masking,
            debug: raw.debug,
            synth: raw.synth,
        })
    }

    /// Fit settings for the first fitted frame, or for a warm-started later one.
    pub fn fit_for(&self, first: bool) -> FitConfig {
        let mask = if first || self.masking == Masking::All { ParamMask::all() } else { ParamMask::video() };
        FitConfig { mask, ..self.fit.clone() }
    }
}

/// A file path with one run of `#` standing for a zero-padded frame index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FramePattern {
    prefix: String,
    width: usize,
    suffix: String,
}

impl FramePattern {
    pub fn new(pattern: &str) -> Result<Self, CliError> {
        let start = pattern.find('#').ok_or_else(|| CliError::input(format!("frame pattern `{pattern}` has no `#` placeholder")))?;
        let width = pattern[start..].chars().take_while(|c| *c == '#').count();
        let suffix = &pattern[start + width..];
        if suffix.contains('#') {
            return Err(CliError::input(format!("frame pattern `{pattern}` has more than one `#` run")));
        }
        Ok(Self {
            prefix: pattern[..start].to_string(),
            width,
            suffix: suffix.to_string(),
        })
    }

    pub fn path(&self, frame: usize) -> PathBuf {
        PathBuf::from(format!("{}{:0w$}{}", self.prefix, frame, self.suffix, w = self.width))
    }

    /// File name of frame `frame`, used for outputs.
    pub fn file_name(&self, frame: usize) -> String {
        self.path(frame).file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    }

    /// Indices of consecutive existing frames starting at 0.
    pub fn existing(&self) -> Vec<usize> {
        (0..).take_while(|k| self.path(*k).is_file()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
asset = "asset"
output = "out"
frames = "frames/f_####.ppm"
landmarks = "landmarks.txt"

[camera]
fx = 700.0
fy = 700.0
cx = 128.0
cy = 96.0
width = 256
height = 192
"#;

    #[test]
    fn defaults_and_relative_paths() {
        let c = RunConfig::parse(MINIMAL, Path::new("/data/run")).unwrap();
        assert_eq!(c.asset, Path::new("/data/run/asset"));
        assert_eq!(c.frames.path(7), Path::new("/data/run/frames/f_0007.ppm"));
        assert_eq!(c.fit.max_iterations, 20);
        assert_eq!(c.masking, Masking::Video);
        assert_eq!(c.fit_for(true).mask, ParamMask::all());
        assert_eq!(c.fit_for(false).mask, ParamMask::video());
        assert!((c.fit.steps.gaze - StepSizes::default().gaze).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_values() {
        let bad_camera = MINIMAL.replace("fx = 700.0", "fx = -1.0");
        assert!(RunConfig::parse(&bad_camera, Path::new(".")).is_err());
        let unknown = format!("{MINIMAL}\n[fit]\nmax_iter = 3\n");
        assert!(RunConfig::parse(&unknown, Path::new(".")).is_err());
        let zero = format!("{MINIMAL}\n[fit]\nmax_iterations = 0\n");
        assert!(RunConfig::parse(&zero, Path::new(".")).is_err());
        let all = format!("{MINIMAL}\n[fit]\nmasking = \"all\"\n");
        assert_eq!(RunConfig::parse(&all, Path::new(".")).unwrap().fit_for(false).mask, ParamMask::all());
    }

    #[test]
    fn frame_patterns() {
        let p = FramePattern::new("a/b_##.png").unwrap();
        assert_eq!(p.path(3), Path::new("a/b_03.png"));
        assert_eq!(p.path(123), Path::new("a/b_123.png"));
        assert_eq!(p.file_name(3), "b_03.png");
        assert!(FramePattern::new("a/b.png").is_err());
        assert!(FramePattern::new("a/#/b_#.png").is_err());
    }
}
