//! Brute-force reference implementations.
//!
//! Each oracle recomputes a quantity the slow, obvious way: every triangle
//! is tested against every query pixel, derivatives are plain difference
//! quotients of the scalar energy, and subdivision walks an explicit edge
//! table. Only the model's posing and primitive vector math are shared with
//! the code under test.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::energy::{e_img, e_ldmks, e_pose, e_stats, synth_landmarks, EnergyContext};
use crate::error::Result;
use crate::image::Texture;
use crate::model::{EyeRegionModel, ParameterVector, Side, FACE_VERTICES};
use crate::raster::Camera;
use crate::Vec3;

fn pinhole(camera: &Camera, p: &Vec3) -> [f64; 2] {
    let w = -p.z;
    [camera.cx + camera.fx * p.x / w, camera.cy + camera.fy * p.y / w]
}

/// Triangle soup of one scene part for visibility queries.
pub struct OracleMesh {
    pub positions: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Drop triangles whose projected winding is clockwise on screen.
    pub cull_back: bool,
}

/// Nearest covering triangle at a query point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub mesh: usize,
    pub triangle: usize,
    /// Perspective-correct barycentric weights.
    pub weights: [f64; 3],
    /// View depth `-z` of the surface point.
    pub depth: f64,
    /// Distance in pixels from the query point to the nearest edge of the
    /// winning triangle.
    pub edge_distance: f64,
    /// Depth difference to the runner-up covering triangle (infinite if none).
    pub depth_margin: f64,
}

/// Exhaustive visibility: tests every triangle of every mesh at `(x, y)`.
pub fn nearest_hit(meshes: &[OracleMesh], camera: &Camera, x: f64, y: f64) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    let mut runner_up = f64::INFINITY;
    for (m, mesh) in meshes.iter().enumerate() {
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let p = tri.map(|i| mesh.positions[i as usize]);
            if p.iter().any(|v| -v.z < crate::raster::fill::NEAR_PLANE) {
                continue;
            }
            let s = p.map(|v| pinhole(camera, &v));
            let area = (s[1][0] - s[0][0]) * (s[2][1] - s[0][1]) - (s[1][1] - s[0][1]) * (s[2][0] - s[0][0]);
            if area == 0.0 || (mesh.cull_back && area < 0.0) {
                continue;
            }
            // Screen-space barycentrics by sub-triangle areas.
            let sub = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
            let l = [sub(s[1], s[2]) / area, sub(s[2], s[0]) / area, sub(s[0], s[1]) / area];
            if l.iter().any(|v| *v < 0.0) {
                continue;
            }
            let inv: Vec<f64> = (0..3).map(|k| l[k] / -p[k].z).collect();
            let depth = 1.0 / (inv[0] + inv[1] + inv[2]);
            let weights = [inv[0] * depth, inv[1] * depth, inv[2] * depth];
            let edge_distance = (0..3)
                .map(|k| {
                    let (a, b) = (s[(k + 1) % 3], s[(k + 2) % 3]);
                    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                    sub(a, b).abs() / len
                })
                .fold(f64::INFINITY, f64::min);
            let hit = Hit {
                mesh: m,
                triangle: t,
                weights,
                depth,
                edge_distance,
                depth_margin: f64::INFINITY,
            };
            match &best {
                Some(b) if b.depth <= depth => runner_up = runner_up.min(depth),
                _ => {
                    if let Some(b) = &best {
                        runner_up = runner_up.min(b.depth);
                    }
                    best = Some(hit);
                }
            }
        }
    }
    best.map(|mut b| {
        b.depth_margin = runner_up - b.depth;
        b
    })
}

/// Exact flow at one pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FlowSample {
    /// No face part is visible.
    Uncovered,
    /// Covered by a face part; `interior` is false when the pixel centre
    /// lies within `1e-6` px of a triangle edge or two surfaces are within
    /// `1e-9` mm in depth, where rasterization tie rules decide coverage.
    Covered { flow: [f64; 2], interior: bool },
}

/// Backward flow between two poses at the given pixels, interpolated over
/// the destination-pose face geometry with eyeballs as occluders.
pub fn oracle_flow(model: &EyeRegionModel, from: &ParameterVector, to: &ParameterVector, camera: &Camera, pixels: &[(usize, usize)]) -> Result<Vec<FlowSample>> {
    let src = model.face_vertices(from)?;
    let dst = model.face_vertices(to)?;
    let offsets: Vec<[f64; 2]> = src
        .iter()
        .zip(&dst)
        .map(|(a, b)| {
            let (pa, pb) = (pinhole(camera, a), pinhole(camera, b));
            [pb[0] - pa[0], pb[1] - pa[1]]
        })
        .collect();
    let mut meshes = Vec::new();
    for side in Side::BOTH {
        let offset = if side == Side::Left { 0 } else { FACE_VERTICES };
        meshes.push(OracleMesh {
            positions: dst[offset..offset + FACE_VERTICES].to_vec(),
            triangles: model.topology(side).triangles.clone(),
            cull_back: false,
        });
    }
    let blank = Arc::new(Texture::from_texels(1, 1, vec![[0.0; 3]])?);
    let scene = model.pose_scene(to, blank)?;
    for eye in &scene.eyes {
        meshes.push(OracleMesh {
            positions: eye.positions.clone(),
            triangles: eye.triangles.to_vec(),
            cull_back: true,
        });
    }
    Ok(pixels
        .iter()
        .map(|&(px, py)| {
            let Some(hit) = nearest_hit(&meshes, camera, px as f64 + 0.5, py as f64 + 0.5) else {
                return FlowSample::Uncovered;
            };
            if hit.mesh >= 2 {
                return FlowSample::Uncovered;
            }
            let base = if hit.mesh == 0 { 0 } else { FACE_VERTICES };
            let tri = meshes[hit.mesh].triangles[hit.triangle];
            let mut flow = [0.0; 2];
            for k in 0..3 {
                let o = offsets[base + tri[k] as usize];
                flow[0] += hit.weights[k] * o[0];
                flow[1] += hit.weights[k] * o[1];
            }
            FlowSample::Covered {
                flow,
                interior: hit.edge_distance > 1e-6 && hit.depth_margin > 1e-9,
            }
        })
        .collect())
}

/// Energy recomputed from the scalar term definitions, without the
/// residual vector.
pub fn scalar_energy(ctx: &EnergyContext, phi: &ParameterVector) -> Result<f64> {
    let w = ctx.weights;
    let mut e = 0.0;
    if ctx.terms.image || ctx.terms.landmarks {
        let texture = Arc::new(ctx.model.texture_sample(&phi.texture)?);
        let raster = ctx.renderer.render(&ctx.model.pose_scene(phi, texture)?, ctx.camera)?;
        let pixels = raster.mask.iter().filter(|p| p.is_foreground()).count();
        if ctx.terms.image {
            e += e_img(&ctx.observation.image, &raster, w.threshold)?;
        }
        if ctx.terms.landmarks {
            let synth = synth_landmarks(ctx.model, phi, ctx.camera)?;
            e += e_ldmks(&ctx.observation.landmarks, &synth, pixels, w.landmarks)?;
        }
    }
    if ctx.terms.stats {
        e += e_stats(&phi.shape, &phi.texture, w.geometry, w.texture);
    }
    if ctx.terms.pose {
        e += e_pose(phi.lid, phi.pitch, w.pose);
    }
    Ok(e)
}

/// Central differences of a scalar function along one parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdDerivative {
    /// Step `h`.
    pub full: f64,
    /// Step `h / 2`.
    pub half: f64,
    /// Richardson extrapolation `(4 half - full) / 3`.
    pub extrapolated: f64,
}

pub fn oracle_fd(energy: &dyn Fn(&ParameterVector) -> Result<f64>, phi: &ParameterVector, param: usize, h: f64) -> Result<FdDerivative> {
    let at = |delta: f64| {
        let mut a = phi.to_array();
        a[param] += delta;
        energy(&ParameterVector::from_slice(&a)?)
    };
    let full = (at(h)? - at(-h)?) / (2.0 * h);
    let half = (at(0.5 * h)? - at(-0.5 * h)?) / h;
    Ok(FdDerivative {
        full,
        half,
        extrapolated: (4.0 * half - full) / 3.0,
    })
}

/// One Loop subdivision step computed from an explicit edge table.
/// Refined vertices are returned as a list sorted lexicographically so the
/// result can be compared independently of vertex numbering.
pub fn oracle_loop(positions: &[Vec3], triangles: &[[u32; 3]]) -> (Vec<Vec3>, usize) {
    let key = |a: u32, b: u32| (a.min(b), a.max(b));
    let mut faces_of_edge: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();
    for tri in triangles {
        for k in 0..3 {
            let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            faces_of_edge.entry(key(a, b)).or_default().push(c);
        }
    }
    let n = positions.len();
    let mut neighbours: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut boundary: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (&(a, b), opp) in &faces_of_edge {
        neighbours[a as usize].push(b);
        neighbours[b as usize].push(a);
        if opp.len() == 1 {
            boundary[a as usize].push(b);
            boundary[b as usize].push(a);
        }
    }
    let mut out = Vec::new();
    for v in 0..n {
        let p = positions[v];
        let q = if boundary[v].len() == 2 {
            p * 0.75 + (positions[boundary[v][0] as usize] + positions[boundary[v][1] as usize]) * 0.125
        } else if neighbours[v].is_empty() {
            p
        } else {
            let k = neighbours[v].len() as f64;
            let c = 0.375 + 0.25 * (std::f64::consts::TAU / k).cos();
            let beta = (0.625 - c * c) / k;
            let sum: Vec3 = neighbours[v].iter().map(|&u| positions[u as usize]).sum();
            p * (1.0 - k * beta) + sum * beta
        };
        out.push(q);
    }
    for (&(a, b), opp) in &faces_of_edge {
        let (pa, pb) = (positions[a as usize], positions[b as usize]);
        let q = if opp.len() == 2 {
            (pa + pb) * 0.375 + (positions[opp[0] as usize] + positions[opp[1] as usize]) * 0.125
        } else {
            (pa + pb) * 0.5
        };
        out.push(q);
    }
    out.sort_by(|a, b| a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    (out, 4 * triangles.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn camera() -> Camera {
        Camera::new(50.0, 50.0, 32.0, 24.0, 64, 48).unwrap()
    }

    fn quad(z: f64, half: f64) -> OracleMesh {
        OracleMesh {
            positions: vec![
                Vec3::new(-half, -half, z),
                Vec3::new(half, -half, z),
                Vec3::new(half, half, z),
                Vec3::new(-half, half, z),
            ],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            cull_back: false,
        }
    }

    #[test]
    fn nearer_surface_wins() {
        let meshes = [quad(-20.0, 5.0), quad(-10.0, 1.0)];
        let hit = nearest_hit(&meshes, &camera(), 32.3, 24.2).unwrap();
        assert_eq!(hit.mesh, 1);
        assert!((hit.depth - 10.0).abs() < 1e-12);
        assert!((hit.depth_margin - 10.0).abs() < 1e-9);
        let far = nearest_hit(&meshes, &camera(), 22.0, 22.0).unwrap();
        assert_eq!(far.mesh, 0);
        assert!(nearest_hit(&meshes, &camera(), 0.5, 0.5).is_none());
    }

    #[test]
    fn weights_are_perspective_correct() {
        // A slanted segment: the screen midpoint is not the 3D midpoint.
        let mesh = OracleMesh {
            positions: vec![Vec3::new(-4.0, -4.0, -10.0), Vec3::new(4.0, -4.0, -30.0), Vec3::new(0.0, 6.0, -20.0)],
            triangles: vec![[0, 1, 2]],
            cull_back: false,
        };
        let cam = camera();
        let hit = nearest_hit(std::slice::from_ref(&mesh), &cam, 30.0, 20.0).unwrap();
        let p: Vec3 = (0..3).map(|k| mesh.positions[k] * hit.weights[k]).sum();
        let s = pinhole(&cam, &p);
        assert!((s[0] - 30.0).abs() < 1e-9 && (s[1] - 20.0).abs() < 1e-9);
        assert!((hit.depth + p.z).abs() < 1e-9);
    }

    #[test]
    fn derivative_of_quadratic() {
        let f = |phi: &ParameterVector| Ok(phi.pitch.powi(2) + 3.0 * phi.lid);
        let phi = ParameterVector {
            pitch: 0.3,
            ..ParameterVector::default()
        };
        let d = oracle_fd(&f, &phi, crate::model::params::index::PITCH, 0.01).unwrap();
        assert!((d.extrapolated - 0.6).abs() < 1e-12);
        let l = oracle_fd(&f, &phi, crate::model::params::index::LID, 0.01).unwrap();
        assert!((l.full - 3.0).abs() < 1e-12);
    }

    #[test]
    fn loop_matches_stencils() {
        use crate::raster::subdiv::{subdivide_once, TriMesh};
        let positions: Vec<Vec3> = (0..9).map(|i| Vec3::new((i % 3) as f64, (i / 3) as f64, ((i * 7) % 5) as f64 * 0.1)).collect();
        let triangles = vec![[0, 1, 4], [0, 4, 3], [1, 2, 5], [1, 5, 4], [3, 4, 7], [3, 7, 6], [4, 5, 8], [4, 8, 7]];
        let (want, tris) = oracle_loop(&positions, &triangles);
        let got = subdivide_once(&TriMesh { positions, triangles }).unwrap();
        assert_eq!(got.triangles.len(), tris);
        let mut sorted = got.positions.clone();
        sorted.sort_by(|a, b| a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        assert_eq!(sorted.len(), want.len());
        for (a, b) in sorted.iter().zip(&want) {
            assert!((a - b).norm() < 1e-12, "{a:?} vs {b:?}");
        }
    }
}
