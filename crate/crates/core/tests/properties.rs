//! Invariants checked over random inputs.

mod common;

use eyeshift::energy::{EnergyContext, EnergyWeights, Terms};
use eyeshift::io::{format_record, parse_landmarks, parse_records, LandmarkRecord, PhiRecord};
use eyeshift::io::landmarks::format_landmarks;
use eyeshift::raster::FlowField;
use eyeshift::redirect::{repose, seam_alpha, vertex_flow, warp, RedirectRequest, SeamSettings};
use eyeshift::solver::{FitProblem, LeastSquares};
use eyeshift::testkit::oracles::scalar_energy;
use eyeshift::{Renderer, RgbImage, Vec3};
use proptest::prelude::*;
use rand::Rng;

use common::{camera, frontal, observe, random_phi, rng, small_model};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn records_round_trip_bit_exact(seed in any::<u64>(), frame in 0usize..100_000, scale in -20i32..20) {
        let mut phi = random_phi(&mut rng(seed));
        for b in phi.shape.iter_mut() {
            *b *= 2f64.powi(scale);
        }
        let text = format_record(&PhiRecord { frame, phi: phi.clone() });
        let back = parse_records(&text).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(back[0].frame, frame);
        let (a, b) = (phi.to_array(), back[0].phi.to_array());
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn landmarks_round_trip(seed in any::<u64>(), with_3d: bool) {
        let mut r = rng(seed);
        let record = LandmarkRecord {
            frame: r.random_range(0..1000),
            points: (0..25).map(|_| [r.random_range(-1e3..1e3), r.random_range(-1e3..1e3)]).collect(),
            points_3d: with_3d.then(|| (0..25).map(|_| Vec3::new(r.random(), r.random(), -r.random::<f64>())).collect()),
        };
        let back = parse_landmarks(&format_landmarks(&record)).unwrap();
        prop_assert_eq!(back, vec![record]);
    }

    #[test]
    fn integer_flow_shifts_pixels(seed in any::<u64>(), dx in -3i32..=3, dy in -3i32..=3) {
        let (w, h) = (12usize, 9usize);
        let mut r = rng(seed);
        let image = RgbImage::from_pixels(w, h, (0..w * h).map(|_| [r.random(), r.random(), r.random()]).collect()).unwrap();
        let mut flow = FlowField::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                flow.set(x, y, [dx as f64, dy as f64]);
            }
        }
        let out = warp(&image, &flow).unwrap();
        for y in 3..h - 3 {
            for x in 3..w - 3 {
                let src = image.get((x as i32 - dx) as usize, (y as i32 - dy) as usize);
                let got = out.get(x, y);
                prop_assert!(src.iter().zip(&got).all(|(a, b)| (a - b).abs() < 1e-12), "{src:?} {got:?}");
            }
        }
    }

    #[test]
    fn seam_alpha_stays_in_the_mask(seed in any::<u64>(), sigma in 0.0f64..3.0, band in 0.0f64..4.0) {
        let (w, h) = (20usize, 16usize);
        let mut r = rng(seed);
        let (cx, cy, rad) = (r.random_range(4.0..16.0), r.random_range(4.0..12.0), r.random_range(2.0..7.0));
        let mask: Vec<bool> = (0..w * h)
            .map(|i| ((i % w) as f64 - cx).hypot((i / w) as f64 - cy) < rad)
            .collect();
        let alpha = seam_alpha(&mask, w, h, &SeamSettings { sigma, band });
        for (m, a) in mask.iter().zip(&alpha) {
            prop_assert!((0.0..=1.0).contains(a));
            if !m {
                prop_assert_eq!(*a, 0.0);
            }
        }
    }

    #[test]
    fn repose_only_changes_gaze(seed in any::<u64>(), x in -300.0f64..300.0, y in -200.0f64..200.0, z in 0.0f64..200.0) {
        let model = small_model();
        let phi = random_phi(&mut rng(seed));
        let out = repose(model, &phi, &RedirectRequest::Target(Vec3::new(x, y, z))).unwrap();
        prop_assert!(phi.differs_only_in_gaze(&out));
        let same = RedirectRequest::Angles { pitch: phi.pitch, yaw: phi.yaw, vergence: phi.vergence };
        let again = repose(model, &phi, &same).unwrap();
        prop_assert!(phi.to_array().iter().zip(again.to_array()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn reposed_eyes_look_at_the_target(x in -250.0f64..250.0, y in -150.0f64..150.0, z in -100.0f64..200.0) {
        let model = small_model();
        let phi = frontal();
        let target = Vec3::new(x, y, z);
        let out = repose(model, &phi, &RedirectRequest::Target(target)).unwrap();
        let centers = model.eyeball_centers(&out);
        for (c, r) in centers.iter().zip(model.eyeball_orientations(&out)) {
            let angle = (r * Vec3::z()).angle(&(target - c)).to_degrees();
            prop_assert!(angle < 0.05, "eye misses the target by {angle} degrees");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn identical_poses_have_zero_flow(seed in any::<u64>()) {
        let model = small_model();
        let phi = random_phi(&mut rng(seed));
        let flow = vertex_flow(model, &phi, &phi, &camera(64, 48)).unwrap();
        prop_assert!(flow.iter().all(|o| *o == [0.0, 0.0]));
    }

    #[test]
    fn residuals_square_to_the_energy(seed in any::<u64>()) {
        let model = small_model();
        let renderer = Renderer::default();
        let cam = camera(64, 48);
        let mut r = rng(seed);
        let observation = observe(model, &renderer, &cam, &random_phi(&mut r));
        let weights = EnergyWeights::default();
        let ctx = EnergyContext {
            model,
            renderer: &renderer,
            camera: &cam,
            observation: &observation,
            weights: &weights,
            terms: Terms::ALL,
        };
        let phi = random_phi(&mut r);
        let eval = FitProblem::new(ctx).evaluate(&phi).unwrap();
        let squared: f64 = eval.residuals.iter().map(|v| v * v).sum();
        let energy = scalar_energy(&ctx, &phi).unwrap();
        prop_assert!((squared - energy).abs() <= 1e-9 * energy.max(1.0), "{squared} vs {energy}");
        prop_assert!((eval.breakdown.total - energy).abs() <= 1e-9 * energy.max(1.0));
    }
}
