//! `selftest`: checks the configured asset against the brute-force oracles.

use std::cmp::Ordering;
use std::sync::Arc;

use eyeshift::energy::{synth_landmarks, EnergyContext, Observation, Terms};
use eyeshift::model::params::index;
use eyeshift::model::{ParamMask, Side, SHAPE_MODES};
use eyeshift::redirect::Redirector;
use eyeshift::solver::{jacobian, kabsch, FitProblem, LeastSquares};
use eyeshift::testkit::oracles::{oracle_fd, oracle_flow, oracle_loop, scalar_energy, FlowSample};
use eyeshift::{Camera, EyeRegionModel, ParameterVector, Renderer, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::fit::load_model;

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

struct Bench<'a> {
    model: &'a EyeRegionModel,
    renderer: Renderer,
    camera: Camera,
    small: Camera,
    base: ParameterVector,
}

impl Bench<'_> {
    fn random_phi(&self, rng: &mut ChaCha8Rng) -> ParameterVector {
        let mut phi = self.base.clone();
        for b in phi.shape.iter_mut() {
            *b = rng.random_range(-1.0..1.0);
        }
        for t in phi.texture.iter_mut() {
            *t = rng.random_range(-1.0..1.0);
        }
        phi.rotation = [0; 3].map(|_| rng.random_range(-0.05..0.05));
        phi.pitch = rng.random_range(-15f64..15.0).to_radians();
        phi.yaw = rng.random_range(-20f64..20.0).to_radians();
        phi.lid = phi.pitch + rng.random_range(-3f64..3.0).to_radians();
        phi
    }
}

fn flow_oracle(b: &Bench, rng: &mut ChaCha8Rng) -> eyeshift::Result<Check> {
    let redirector = Redirector::new(b.model, &b.renderer, &b.small);
    let pixels: Vec<(usize, usize)> = (0..b.small.height).flat_map(|y| (0..b.small.width).map(move |x| (x, y))).collect();
    let (mut interior, mut matched) = (0, 0);
    for _ in 0..10 {
        let from = b.random_phi(rng);
        let to = b.random_phi(rng);
        let flow = redirector.eyelid_flow(&from, &to)?;
        for (&(x, y), s) in pixels.iter().zip(oracle_flow(b.model, &from, &to, &b.small, &pixels)?) {
            if let FlowSample::Covered { flow: o, interior: true } = s {
                interior += 1;
                let f = flow.get(x, y);
                matched += usize::from(flow.covered(x, y) && (f[0] - o[0]).hypot(f[1] - o[1]) <= 1e-4);
            }
        }
    }
    Ok(Check {
        name: "dense flow matches exhaustive ray casting",
        pass: interior > 0 && matched == interior,
        detail: format!("{matched}/{interior} interior pixels within 1e-4 px"),
    })
}

fn subdivision(b: &Bench) -> eyeshift::Result<Check> {
    let faces = b.model.face_vertices(&b.base)?;
    let topology = b.model.topology(Side::Left);
    let positions = &faces[..topology.vertex_count()];
    let Some(refinement) = &topology.refinement else {
        return Ok(Check {
            name: "subdivision matches explicit edge rules",
            pass: false,
            detail: "asset topology has no refinement".into(),
        });
    };
    let mut got = refinement.stencils.apply(positions);
    got.sort_by(|a, b| a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal));
    let (want, triangles) = oracle_loop(positions, &topology.triangles);
    let worst = got.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0f64, f64::max);
    let pass = got.len() == want.len() && refinement.stencils.triangles().len() == triangles && worst < 1e-9;
    Ok(Check {
        name: "subdivision matches explicit edge rules",
        pass,
        detail: format!("{} refined vertices, max deviation {worst:.2e} mm", got.len()),
    })
}

fn prior_jacobian(b: &Bench, rng: &mut ChaCha8Rng) -> eyeshift::Result<Check> {
    let gt = b.random_phi(rng);
    let texture = Arc::new(b.model.texture_sample(&gt.texture)?);
    let mut scene = b.model.pose_scene(&gt, texture)?;
    scene.reflection = None;
    let image = b.renderer.render(&scene, &b.small)?.color;
    let observation = Observation::new(image, synth_landmarks(b.model, &gt, &b.small)?, None)?;
    let weights = eyeshift::energy::EnergyWeights::default();
    let ctx = EnergyContext {
        model: b.model,
        renderer: &b.renderer,
        camera: &b.small,
        observation: &observation,
        weights: &weights,
        terms: Terms::PRIORS,
    };
    let problem = FitProblem::new(ctx);
    let phi = b.random_phi(rng);
    let base = problem.evaluate(&phi)?;
    let steps = eyeshift::solver::StepSizes::default();
    let jac = jacobian(&problem, &phi, ParamMask::all(), &steps, &base)?;
    let mut worst = 0f64;
    for (k, col) in jac.params.iter().zip(&jac.columns) {
        for (j, row) in base.layout.stats.clone().enumerate() {
            let expected = match j < SHAPE_MODES {
                true if *k == index::SHAPE.start + j => weights.geometry.sqrt(),
                false if *k == index::TEXTURE.start + j - SHAPE_MODES => weights.texture.sqrt(),
                _ => 0.0,
            };
            worst = worst.max((col[row] - expected).abs());
        }
        let gradient: f64 = 2.0 * base.residuals.iter().zip(col).map(|(r, j)| r * j).sum::<f64>();
        let oracle = oracle_fd(&|p| scalar_energy(&ctx, p), &phi, *k, steps.for_param(*k))?;
        worst = worst.max((gradient - oracle.extrapolated).abs());
    }
    Ok(Check {
        name: "prior jacobian matches analytic slopes",
        pass: worst <= 1e-6,
        detail: format!("max deviation {worst:.2e}"),
    })
}

fn rigid_alignment(b: &Bench, rng: &mut ChaCha8Rng) -> Check {
    let rest = b.model.rest_landmarks();
    let mut worst = 0f64;
    for _ in 0..20 {
        let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let r = eyeshift::Rot3::from_scaled_axis(axis.normalize() * rng.random_range(0.0..3.0));
        let moved: Vec<Vec3> = rest.iter().map(|p| r * p).collect();
        worst = match kabsch(&rest, &moved) {
            Some(found) => worst.max((found.matrix() - r.matrix()).norm()),
            None => f64::INFINITY,
        };
    }
    Check {
        name: "rigid alignment recovers known rotations",
        pass: worst < 1e-9,
        detail: format!("max matrix deviation {worst:.2e}"),
    }
}

fn reflection_maps(b: &Bench, rng: &mut ChaCha8Rng) -> eyeshift::Result<Check> {
    let redirector = Redirector::new(b.model, &b.renderer, &b.camera);
    let mut correct = 0;
    for map in 0..b.renderer.map_count() {
        let phi = b.random_phi(rng);
        let mut scene = b.model.pose_scene(&phi, Arc::new(b.model.texture_sample(&phi.texture)?))?;
        scene.reflection = Some(map);
        let observed = b.renderer.render(&scene, &b.camera)?.color;
        correct += usize::from(redirector.select_reflection_map(&observed, &phi, 0.09)? == map);
    }
    Ok(Check {
        name: "reflection map selection round trip",
        pass: correct == b.renderer.map_count(),
        detail: format!("{correct}/{} maps recovered", b.renderer.map_count()),
    })
}

/// Runs every check, prints one line each and returns whether all passed.
pub fn run(config: &RunConfig) -> Result<bool, CliError> {
    let model = load_model(config)?;
    let c = &config.camera;
    let s = 64.0 / c.width as f64;
    let small = Camera::new(c.fx * s, c.fy * s, c.cx * s, c.cy * s, 64, (c.height as f64 * s).round().max(1.0) as usize)?;
    let bench = Bench {
        model: &model,
        renderer: Renderer::default(),
        camera: config.camera,
        small,
        base: ParameterVector {
            translation: [0.0, 0.0, -config.synth.distance],
            ..ParameterVector::default()
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let checks = [
        flow_oracle(&bench, &mut rng)?,
        subdivision(&bench)?,
        prior_jacobian(&bench, &mut rng)?,
        rigid_alignment(&bench, &mut rng),
        reflection_maps(&bench, &mut rng)?,
    ];
    for check in &checks {
        println!("{}: {}: {}", if check.pass { "PASS" } else { "FAIL" }, check.name, check.detail);
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    println!("{passed}/{} checks passed", checks.len());
    Ok(passed == checks.len())
}
