//! Renders a synthetic eye region and writes it as a binary PPM.
//!
//! ```text
//! cargo run --release -p eyeshift --example preview -- out.ppm [pitch_deg yaw_deg [zoom]]
//! ```

use std::sync::Arc;
use std::time::Instant;

use eyeshift::io::ppm::encode_ppm;
use eyeshift::testkit::generate::{generate_model, SyntheticModelSpec};
use eyeshift::{Camera, ParameterVector, Renderer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = args.first().map(String::as_str).unwrap_or("preview.ppm");
    let pitch: f64 = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(0.0);
    let yaw: f64 = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(0.0);
    let zoom: f64 = args.get(3).map(|s| s.parse()).transpose()?.unwrap_or(1.0);

    let model = generate_model(&SyntheticModelSpec::default())?;
    let camera = Camera::new(700.0 * zoom, 700.0 * zoom, 128.0 * zoom, 96.0 * zoom, (256.0 * zoom) as usize, (192.0 * zoom) as usize)?;
    let phi = ParameterVector {
        translation: [0.0, 0.0, -420.0],
        pitch: pitch.to_radians(),
        yaw: yaw.to_radians(),
        lid: pitch.to_radians(),
        ..ParameterVector::default()
    };
    let mut scene = model.pose_scene(&phi, Arc::new(model.texture_sample(&phi.texture)?))?;
    scene.reflection = Some(0);
    let mut settings = eyeshift::raster::RenderSettings::default();
    if std::env::var("NOAO").is_ok() { settings.ao.min = 1.0; }
    let renderer = Renderer::new(settings);
    let start = Instant::now();
    let raster = renderer.render(&scene, &camera)?;
    eprintln!("rendered in {:?}, {} foreground pixels", start.elapsed(), raster.foreground().len());
    std::fs::write(out, encode_ppm(&raster.color))?;
    Ok(())
}
