//! `fit`: per-frame model fitting with temporal warm start.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use eyeshift::energy::{EnergyContext, Observation, Terms};
use eyeshift::io::{format_record, parse_landmarks, LandmarkRecord, PhiRecord};
use eyeshift::solver::{fit, initialize, FitProblem};
use eyeshift::{EyeRegionModel, ParameterVector, Renderer};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::files::{read_frame, read_text, write_bytes, write_frame};

pub const PHI_FILE: &str = "phi.txt";
pub const TRACE_FILE: &str = "trace.txt";
pub const FIT_TIMINGS_FILE: &str = "timings_fit.txt";

/// Result of one frame.
#[derive(Clone, Debug)]
pub struct FrameRecord {
    pub frame: usize,
    pub phi: ParameterVector,
    pub iterations: usize,
    /// True when the frame had no landmarks and the previous fit was reused.
    pub carried: bool,
    pub fit_ms: f64,
}

pub fn load_model(config: &RunConfig) -> Result<EyeRegionModel, CliError> {
    EyeRegionModel::load(&config.asset).map_err(|e| CliError::input(format!("cannot load asset {}: {e}", config.asset.display())))
}

pub fn load_landmarks(config: &RunConfig) -> Result<BTreeMap<usize, LandmarkRecord>, CliError> {
    let text = read_text(&config.landmarks)?;
    let records = parse_landmarks(&text).map_err(|e| CliError::input(format!("{}: {e}", config.landmarks.display())))?;
    Ok(records.into_iter().map(|r| (r.frame, r)).collect())
}

/// Fits every frame in order and returns the per-frame records.
pub fn fit_frames(config: &RunConfig) -> Result<Vec<FrameRecord>, CliError> {
    let model = load_model(config)?;
    let frames = config.frames.existing();
    if frames.is_empty() {
        return Err(CliError::input(format!("no frames found at {}", config.frames.path(0).display())));
    }
    let landmarks = load_landmarks(config)?;
    let renderer = Renderer::default();
    let mut out: Vec<FrameRecord> = Vec::new();
    let mut traces = String::new();
    let mut previous: Option<ParameterVector> = None;
    for &k in &frames {
        let image = read_frame(&config.frames.path(k))?;
        if (image.width(), image.height()) != (config.camera.width, config.camera.height) {
            return Err(CliError::input(format!(
                "frame {k} is {}x{} but the camera is {}x{}",
                image.width(),
                image.height(),
                config.camera.width,
                config.camera.height
            )));
        }
        let Some(record) = landmarks.get(&k) else {
            match &previous {
                Some(phi) => {
                    log::warn!("frame {k}: no landmarks, carrying the previous fit forward");
                    out.push(FrameRecord {
                        frame: k,
                        phi: phi.clone(),
                        iterations: 0,
                        carried: true,
                        fit_ms: 0.0,
                    });
                }
                None => log::warn!("frame {k}: no landmarks and no earlier fit, skipping"),
            }
            continue;
        };
        let init = match &previous {
            Some(phi) => phi.clone(),
            None => {
                let start = initialize(&model, record.points_3d.as_deref())
                    .map_err(|e| CliError::input(format!("frame {k}: cannot initialize: {e}")))?;
                if start.degenerate {
                    log::warn!("frame {k}: degenerate 3D landmarks");
                }
                start.phi
            }
        };
        let observation = Observation::new(image, record.points.clone(), record.points_3d.clone())?;
        let problem = FitProblem::new(EnergyContext {
            model: &model,
            renderer: &renderer,
            camera: &config.camera,
            observation: &observation,
            weights: &config.weights,
            terms: Terms::ALL,
        });
        let start = Instant::now();
        let (phi, trace) = fit(&problem, &init, &config.fit_for(previous.is_none())).map_err(|e| match e.is_numerical() {
            true => CliError::Numerical(format!("frame {k}: fit failed: {e}")),
            false => CliError::Core(e),
        })?;
        let fit_ms = start.elapsed().as_secs_f64() * 1e3;
        let last = trace.entries.last().expect("trace has a starting entry");
        log::info!(
            "frame {k}: {} iterations, E {:.4e} -> {:.4e}",
            trace.iterations(),
            trace.entries[0].energy.total,
            last.energy.total
        );
        let _ = writeln!(traces, "# frame {k}");
        traces.push_str(&trace.to_text());
        if config.debug.dump_renders {
            let texture = Arc::new(model.texture_sample(&phi.texture)?);
            let raster = renderer.render(&model.pose_scene(&phi, texture)?, &config.camera)?;
            write_frame(&config.output.join("renders").join(config.frames.file_name(k)), &raster.color)?;
        }
        out.push(FrameRecord {
            frame: k,
            phi: phi.clone(),
            iterations: trace.iterations(),
            carried: false,
            fit_ms,
        });
        previous = Some(phi);
    }
    write_bytes(&config.output.join(TRACE_FILE), traces.as_bytes())?;
    Ok(out)
}

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    let records = fit_frames(config)?;
    let mut phi = String::new();
    let mut timings = String::from("# frame fit_ms iterations carried\n");
    for r in &records {
        phi.push_str(&format_record(&PhiRecord {
            frame: r.frame,
            phi: r.phi.clone(),
        }));
        let _ = writeln!(timings, "{} {:.3} {} {}", r.frame, r.fit_ms, r.iterations, u8::from(r.carried));
    }
    write_bytes(&config.output.join(PHI_FILE), phi.as_bytes())?;
    write_bytes(&config.output.join(FIT_TIMINGS_FILE), timings.as_bytes())?;
    log::info!("fitted {} frames into {}", records.len(), config.output.display());
    Ok(())
}
