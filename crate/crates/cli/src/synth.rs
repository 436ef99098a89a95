//! `synth`: renders frames with exact landmarks and ground-truth records.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use eyeshift::energy::synth_landmarks;
use eyeshift::io::landmarks::format_landmarks;
use eyeshift::io::{format_record, parse_records, LandmarkRecord, PhiRecord};
use eyeshift::redirect::{repose, RedirectRequest};
use eyeshift::{EyeRegionModel, ParameterVector, Renderer};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::files::{read_text, write_bytes, write_frame};
use crate::fit::load_model;

pub const GROUND_TRUTH_FILE: &str = "ground_truth.txt";
pub const LOG_FILE: &str = "synth.txt";

/// Pitch and yaw sweep in degrees, inclusive of both ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub pitch: (f64, f64),
    pub yaw: (f64, f64),
    pub step: f64,
}

impl Grid {
    /// Parses `pitch_min,pitch_max,yaw_min,yaw_max,step`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let values: Vec<f64> = text
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::input(format!("grid `{text}`: {e}")))?;
        let [p0, p1, y0, y1, step] = values[..] else {
            return Err(CliError::input(format!("grid `{text}` needs 5 comma-separated values")));
        };
        if !values.iter().all(|v| v.is_finite()) || step <= 0.0 || p0 > p1 || y0 > y1 {
            return Err(CliError::input(format!("grid `{text}` needs finite values, min <= max and a positive step")));
        }
        Ok(Self {
            pitch: (p0, p1),
            yaw: (y0, y1),
            step,
        })
    }

    fn axis(&self, (lo, hi): (f64, f64)) -> Vec<f64> {
        let n = ((hi - lo) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| lo + i as f64 * self.step).collect()
    }

    /// `(pitch, yaw)` pairs in degrees, pitch-major.
    pub fn angles(&self) -> Vec<(f64, f64)> {
        let yaws = self.axis(self.yaw);
        self.axis(self.pitch).into_iter().flat_map(|p| yaws.iter().map(move |y| (p, *y))).collect()
    }
}

pub enum Source<'a> {
    Grid(Grid),
    Records(&'a Path),
}

fn base_pose(config: &RunConfig) -> ParameterVector {
    ParameterVector {
        translation: [0.0, 0.0, -config.synth.distance],
        ..ParameterVector::default()
    }
}

fn poses(model: &EyeRegionModel, config: &RunConfig, source: &Source) -> Result<Vec<(ParameterVector, String)>, CliError> {
    match source {
        Source::Grid(grid) => {
            let base = base_pose(config);
            grid.angles()
                .into_iter()
                .map(|(p, y)| {
                    let request = RedirectRequest::Angles {
                        pitch: p.to_radians(),
                        yaw: y.to_radians(),
                        vergence: 0.0,
                    };
                    Ok((repose(model, &base, &request)?, format!("{p} {y}")))
                })
                .collect()
        }
        Source::Records(path) => {
            let records = parse_records(&read_text(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            Ok(records
                .into_iter()
                .map(|r| {
                    let label = format!("{} {}", r.phi.pitch.to_degrees(), r.phi.yaw.to_degrees());
                    (r.phi, label)
                })
                .collect())
        }
    }
}

pub fn run(config: &RunConfig, source: &Source) -> Result<(), CliError> {
    let model = load_model(config)?;
    let renderer = Renderer::default();
    if let Some(map) = config.synth.reflection_map.filter(|m| *m >= renderer.map_count()) {
        return Err(CliError::input(format!("reflection map {map} out of range (0..{})", renderer.map_count())));
    }
    let poses = poses(&model, config, source)?;
    let mut truth = String::new();
    let mut landmarks = String::new();
    let mut log = String::from("# frame pitch_deg yaw_deg\n");
    for (k, (phi, label)) in poses.iter().enumerate() {
        phi.validate().map_err(|e| CliError::input(format!("frame {k}: {e}")))?;
        let texture = Arc::new(model.texture_sample(&phi.texture)?);
        let mut scene = model.pose_scene(phi, texture)?;
        scene.reflection = config.synth.reflection_map;
        let raster = renderer.render(&scene, &config.camera)?;
        write_frame(&config.frames.path(k), &raster.color)?;
        let record = LandmarkRecord {
            frame: k,
            points: synth_landmarks(&model, phi, &config.camera)?,
            points_3d: Some(model.landmarks_3d(phi)?),
        };
        landmarks.push_str(&format_landmarks(&record));
        truth.push_str(&format_record(&PhiRecord { frame: k, phi: phi.clone() }));
        let _ = writeln!(log, "{k} {label}");
    }
    write_bytes(&config.landmarks, landmarks.as_bytes())?;
    write_bytes(&config.output.join(GROUND_TRUTH_FILE), truth.as_bytes())?;
    write_bytes(&config.output.join(LOG_FILE), log.as_bytes())?;
    log::info!("rendered {} frames", poses.len());
    Ok(())
}
