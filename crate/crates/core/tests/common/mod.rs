//! Shared fixtures for integration tests.
#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use eyeshift::energy::Observation;
use eyeshift::energy::synth_landmarks;
use eyeshift::model::EyeRegionModel;
use eyeshift::testkit::generate::{generate_model, SyntheticModelSpec};
use eyeshift::{Camera, ParameterVector, Raster, Renderer, RgbImage, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The seeded synthetic asset with default resolution.
pub fn model() -> &'static EyeRegionModel {
    static MODEL: OnceLock<EyeRegionModel> = OnceLock::new();
    MODEL.get_or_init(|| generate_model(&SyntheticModelSpec::default()).expect("synthetic model"))
}

/// A small asset for fast tests.
pub fn small_model() -> &'static EyeRegionModel {
    static MODEL: OnceLock<EyeRegionModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        generate_model(&SyntheticModelSpec {
            texture_size: 64,
            eye_texture_size: 64,
            ..SyntheticModelSpec::default()
        })
        .expect("synthetic model")
    })
}

pub const DISTANCE: f64 = 420.0;

/// Camera framing both eyes at `DISTANCE` mm for a `width x height` frame.
pub fn camera(width: usize, height: usize) -> Camera {
    let s = width as f64 / 256.0;
    Camera::new(700.0 * s, 700.0 * s, width as f64 / 2.0, height as f64 / 2.0, width, height).unwrap()
}

/// Frontal head at the standard distance.
pub fn frontal() -> ParameterVector {
    ParameterVector {
        translation: [0.0, 0.0, -DISTANCE],
        ..ParameterVector::default()
    }
}

/// A random but plausible ground-truth parameter vector.
pub fn random_phi(rng: &mut ChaCha8Rng) -> ParameterVector {
    let mut phi = frontal();
    for b in phi.shape.iter_mut() {
        *b = rng.random_range(-1.0..1.0);
    }
    for t in phi.texture.iter_mut() {
        *t = rng.random_range(-1.0..1.0);
    }
    phi.iris_scale = rng.random_range(0.9..1.1);
    phi.iris_color = [0; 3].map(|_| rng.random_range(0.8..1.0));
    phi.sclera_tint = [0; 3].map(|_| rng.random_range(0.9..1.0));
    phi.rotation = [0; 3].map(|_| rng.random_range(-0.08..0.08));
    phi.translation = [rng.random_range(-10.0..10.0), rng.random_range(-8.0..8.0), -DISTANCE + rng.random_range(-20.0..20.0)];
    phi.pitch = rng.random_range(-15f64..15.0).to_radians();
    phi.yaw = rng.random_range(-20f64..20.0).to_radians();
    phi.vergence = rng.random_range(0f64..3.0).to_radians();
    phi.lid = phi.pitch + rng.random_range(-3f64..3.0).to_radians();
    phi.ambient = [0; 3].map(|_| rng.random_range(0.5..0.7));
    phi.directional = [0; 3].map(|_| rng.random_range(0.3..0.5));
    phi.light_angles = [rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)];
    phi
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn render(model: &EyeRegionModel, renderer: &Renderer, camera: &Camera, phi: &ParameterVector, map: Option<usize>) -> Raster {
    let texture = Arc::new(model.texture_sample(&phi.texture).unwrap());
    let mut scene = model.pose_scene(phi, texture).unwrap();
    scene.reflection = map;
    renderer.render(&scene, camera).unwrap()
}

/// Rendered frame plus exact landmarks for `phi`.
pub fn observe(model: &EyeRegionModel, renderer: &Renderer, camera: &Camera, phi: &ParameterVector) -> Observation {
    let image: RgbImage = render(model, renderer, camera, phi, None).color;
    let landmarks = synth_landmarks(model, phi, camera).unwrap();
    let l3 = model.landmarks_3d(phi).unwrap();
    Observation::new(image, landmarks, Some(l3)).unwrap()
}

/// Mean angle in degrees between the two eyes' optical axes under `a` and `b`.
pub fn gaze_error_deg(model: &EyeRegionModel, a: &ParameterVector, b: &ParameterVector) -> f64 {
    let ga = model.eyeball_orientations(a).map(|r| r * Vec3::z());
    let gb = model.eyeball_orientations(b).map(|r| r * Vec3::z());
    0.5 * (0..2).map(|i| ga[i].angle(&gb[i]).to_degrees()).sum::<f64>()
}

/// Initial guess for a round-trip fit: gaze off by 10 degrees in a random
/// direction, translation off by 5 mm, eyelid off by 5 degrees.
pub fn perturb(rng: &mut ChaCha8Rng, gt: &ParameterVector) -> ParameterVector {
    let mut init = gt.clone();
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    init.pitch += 10f64.to_radians() * theta.cos();
    init.yaw += 10f64.to_radians() * theta.sin();
    let dir = [0; 3].map(|_| rng.random_range(-1.0..1.0f64));
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    for k in 0..3 {
        init.translation[k] += 5.0 * dir[k] / norm;
    }
    init.lid += if rng.random_bool(0.5) { 5f64 } else { -5.0 }.to_radians();
    init
}

