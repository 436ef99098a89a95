//! `redirect`: re-renders every fitted frame looking at its scripted target.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use eyeshift::io::{encode_flow, format_record, parse_records, parse_targets, PhiRecord};
use eyeshift::redirect::{RedirectRequest, Redirector};
use eyeshift::{ParameterVector, Renderer, Vec3};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::files::{read_frame, read_text, write_bytes, write_frame};
use crate::fit::{load_model, PHI_FILE};

pub const OUTPUT_DIR: &str = "redirected";
pub const PHI_REDIRECTED_FILE: &str = "phi_redirected.txt";
pub const LOG_FILE: &str = "redirect.txt";
pub const REDIRECT_TIMINGS_FILE: &str = "timings_redirect.txt";

enum Outcome {
    Redirected { phi: ParameterVector, map_id: usize },
    PassedThrough(&'static str),
}

struct FrameResult {
    frame: usize,
    outcome: Outcome,
    ms: f64,
}

pub fn run(config: &RunConfig, targets: &Path) -> Result<(), CliError> {
    let model = load_model(config)?;
    let phi_path = config.output.join(PHI_FILE);
    let fitted: BTreeMap<usize, ParameterVector> = parse_records(&read_text(&phi_path)?)
        .map_err(|e| CliError::input(format!("{}: {e}", phi_path.display())))?
        .into_iter()
        .map(|r| (r.frame, r.phi))
        .collect();
    let script: BTreeMap<usize, Vec3> = parse_targets(&read_text(targets)?)
        .map_err(|e| CliError::input(format!("{}: {e}", targets.display())))?
        .into_iter()
        .map(|r| (r.frame, r.target))
        .collect();
    let frames = config.frames.existing();
    if frames.is_empty() {
        return Err(CliError::input(format!("no frames found at {}", config.frames.path(0).display())));
    }
    let renderer = Renderer::default();
    let redirector = Redirector::new(&model, &renderer, &config.camera);
    let results = frames
        .par_iter()
        .map(|&k| -> Result<FrameResult, CliError> {
            let image = read_frame(&config.frames.path(k))?;
            let out_path = config.output.join(OUTPUT_DIR).join(config.frames.file_name(k));
            let (phi, target) = match (fitted.get(&k), script.get(&k)) {
                (Some(phi), Some(target)) => (phi, *target),
                (phi, _) => {
                    let reason = if phi.is_none() { "no fitted parameters" } else { "no gaze target" };
                    log::warn!("frame {k}: {reason}, passing through unmodified");
                    write_frame(&out_path, &image)?;
                    return Ok(FrameResult {
                        frame: k,
                        outcome: Outcome::PassedThrough(reason),
                        ms: 0.0,
                    });
                }
            };
            let start = Instant::now();
            let out = redirector
                .redirect_frame(&image, phi, &RedirectRequest::Target(target), config.weights.threshold)
                .map_err(|e| match e.is_numerical() {
                    true => CliError::Numerical(format!("frame {k}: redirect failed: {e}")),
                    false => CliError::Input(format!("frame {k}: redirect failed: {e}")),
                })?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            write_frame(&out_path, &out.image)?;
            if config.debug.dump_flow {
                let path = config.output.join("flow").join(format!("{k:06}.pflo"));
                write_bytes(&path, &encode_flow(&out.flow))?;
            }
            Ok(FrameResult {
                frame: k,
                outcome: Outcome::Redirected {
                    phi: out.phi,
                    map_id: out.map_id,
                },
                ms,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut records = String::new();
    let mut log = String::from("# frame status map pitch_deg yaw_deg vergence_deg lid_deg\n");
    let mut timings = String::from("# frame redirect_ms\n");
    for r in &results {
        match &r.outcome {
            Outcome::Redirected { phi, map_id } => {
                records.push_str(&format_record(&PhiRecord {
                    frame: r.frame,
                    phi: phi.clone(),
                }));
                let _ = writeln!(
                    log,
                    "{} redirected {map_id} {:.6} {:.6} {:.6} {:.6}",
                    r.frame,
                    phi.pitch.to_degrees(),
                    phi.yaw.to_degrees(),
                    phi.vergence.to_degrees(),
                    phi.lid.to_degrees()
                );
            }
            Outcome::PassedThrough(reason) => {
                let _ = writeln!(log, "{} passed-through # {reason}", r.frame);
            }
        }
        let _ = writeln!(timings, "{} {:.3}", r.frame, r.ms);
    }
    write_bytes(&config.output.join(PHI_REDIRECTED_FILE), records.as_bytes())?;
    write_bytes(&config.output.join(LOG_FILE), log.as_bytes())?;
    write_bytes(&config.output.join(REDIRECT_TIMINGS_FILE), timings.as_bytes())?;
    log::info!("wrote {} frames to {}", results.len(), config.output.join(OUTPUT_DIR).display());
    Ok(())
}
