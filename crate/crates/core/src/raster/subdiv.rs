//! One-step Loop subdivision with precomputed stencils.
//!
//! Refined vertices are ordered as: the original vertices (repositioned),
//! followed by one vertex per edge in first-encounter order. Each coarse
//! triangle `(a, b, c)` becomes `(a, ab, ca)`, `(ab, b, bc)`, `(ca, bc, c)`
//! and `(ab, bc, ca)`, preserving winding.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::Vec3;

/// Values that can be combined linearly by a stencil.
pub trait Blend: Copy {
    fn zero() -> Self;
    fn add_scaled(self, other: Self, w: f64) -> Self;
}

impl Blend for Vec3 {
    fn zero() -> Self {
        Vec3::zeros()
    }
    #[inline]
    fn add_scaled(self, other: Self, w: f64) -> Self {
        self + other * w
    }
}

impl Blend for [f64; 2] {
    fn zero() -> Self {
        [0.0; 2]
    }
    #[inline]
    fn add_scaled(self, other: Self, w: f64) -> Self {
        [self[0] + other[0] * w, self[1] + other[1] * w]
    }
}

/// Sparse refinement operator plus the refined connectivity.
#[derive(Clone, Debug)]
pub struct LoopStencils {
    coarse_vertices: usize,
    offsets: Vec<u32>,
    taps: Vec<(u32, f64)>,
    triangles: Vec<[u32; 3]>,
}

/// Standard Loop weight for an interior vertex of valence `n`.
pub fn loop_beta(n: usize) -> f64 {
    let n = n as f64;
    let c = 3.0 / 8.0 + 0.25 * (2.0 * PI / n).cos();
    (5.0 / 8.0 - c * c) / n
}

struct EdgeInfo {
    index: u32,
    opposite: Vec<u32>,
}

impl LoopStencils {
    pub fn build(vertex_count: usize, triangles: &[[u32; 3]]) -> Result<Self> {
        let mut edges: HashMap<(u32, u32), EdgeInfo> = HashMap::new();
        let mut order: Vec<(u32, u32)> = Vec::new();
        for tri in triangles {
            for k in 0..3 {
                let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
                if a as usize >= vertex_count || b as usize >= vertex_count {
                    return Err(Error::NonManifold(format!("triangle references vertex beyond {vertex_count}")));
                }
                if a == b {
                    return Err(Error::NonManifold(format!("degenerate triangle {tri:?}")));
                }
                let key = (a.min(b), a.max(b));
                let next = order.len() as u32;
                let e = edges.entry(key).or_insert_with(|| {
                    order.push(key);
                    EdgeInfo {
                        index: next,
                        opposite: Vec::with_capacity(2),
                    }
                });
                e.opposite.push(c);
                if e.opposite.len() > 2 {
                    return Err(Error::NonManifold(format!(
                        "edge ({}, {}) is shared by more than two triangles",
                        key.0, key.1
                    )));
                }
            }
        }

        let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); vertex_count];
        let mut boundary: Vec<Vec<u32>> = vec![Vec::new(); vertex_count];
        for key in &order {
            let e = &edges[key];
            neighbors[key.0 as usize].push(key.1);
            neighbors[key.1 as usize].push(key.0);
            if e.opposite.len() == 1 {
                boundary[key.0 as usize].push(key.1);
                boundary[key.1 as usize].push(key.0);
            }
        }

        let mut offsets = Vec::with_capacity(vertex_count + order.len() + 1);
        let mut taps = Vec::new();
        offsets.push(0u32);
        for v in 0..vertex_count {
            let nb = &mut neighbors[v];
            nb.sort_unstable();
            let bd = &mut boundary[v];
            bd.sort_unstable();
            if nb.is_empty() {
                taps.push((v as u32, 1.0));
            } else if !bd.is_empty() {
                if bd.len() != 2 {
                    return Err(Error::NonManifold(format!(
                        "boundary vertex {v} has {} boundary edges",
                        bd.len()
                    )));
                }
                taps.push((v as u32, 0.75));
                taps.push((bd[0], 0.125));
                taps.push((bd[1], 0.125));
            } else {
                let beta = loop_beta(nb.len());
                taps.push((v as u32, 1.0 - nb.len() as f64 * beta));
                taps.extend(nb.iter().map(|&u| (u, beta)));
            }
            offsets.push(taps.len() as u32);
        }
        for key in &order {
            let e = &edges[key];
            if e.opposite.len() == 2 {
                taps.push((key.0, 0.375));
                taps.push((key.1, 0.375));
                taps.push((e.opposite[0], 0.125));
                taps.push((e.opposite[1], 0.125));
            } else {
                taps.push((key.0, 0.5));
                taps.push((key.1, 0.5));
            }
            offsets.push(taps.len() as u32);
        }

        let base = vertex_count as u32;
        let edge_vertex = |a: u32, b: u32| base + edges[&(a.min(b), a.max(b))].index;
        let mut refined = Vec::with_capacity(triangles.len() * 4);
        for &[a, b, c] in triangles {
            let ab = edge_vertex(a, b);
            let bc = edge_vertex(b, c);
            let ca = edge_vertex(c, a);
            refined.push([a, ab, ca]);
            refined.push([ab, b, bc]);
            refined.push([ca, bc, c]);
            refined.push([ab, bc, ca]);
        }

        Ok(Self {
            coarse_vertices: vertex_count,
            offsets,
            taps,
            triangles: refined,
        })
    }

    pub fn coarse_vertex_count(&self) -> usize {
        self.coarse_vertices
    }

    pub fn refined_vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    /// Stencil row of refined vertex `i` as `(coarse index, weight)` taps.
    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.taps[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn apply<T: Blend>(&self, coarse: &[T]) -> Vec<T> {
        assert_eq!(coarse.len(), self.coarse_vertices, "stencil applied to wrong vertex count");
        let mut out = Vec::with_capacity(self.refined_vertex_count());
        self.apply_into(coarse, &mut out);
        out
    }

    pub fn apply_into<T: Blend>(&self, coarse: &[T], out: &mut Vec<T>) {
        out.clear();
        for w in self.offsets.windows(2) {
            let mut acc = T::zero();
            for &(i, weight) in &self.taps[w[0] as usize..w[1] as usize] {
                acc = acc.add_scaled(coarse[i as usize], weight);
            }
            out.push(acc);
        }
    }
}

/// Plain triangle mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    pub positions: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

/// Applies one step of Loop subdivision to `mesh`.
pub fn subdivide_once(mesh: &TriMesh) -> Result<TriMesh> {
    let stencils = LoopStencils::build(mesh.positions.len(), &mesh.triangles)?;
    Ok(TriMesh {
        positions: stencils.apply(&mesh.positions),
        triangles: stencils.triangles().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_for_regular_valence() {
        assert!((loop_beta(6) - 1.0 / 16.0).abs() < 1e-15);
        assert!((loop_beta(3) - 3.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn regular_interior_vertex_uses_standard_weights() {
        // Hexagonal fan around vertex 0.
        let mut positions = vec![Vec3::new(0.0, 0.0, 1.0)];
        for k in 0..6 {
            let a = k as f64 * PI / 3.0;
            positions.push(Vec3::new(a.cos(), a.sin(), 0.1 * k as f64));
        }
        let triangles: Vec<[u32; 3]> = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();
        let refined = subdivide_once(&TriMesh { positions: positions.clone(), triangles }).unwrap();
        let ring: Vec3 = positions[1..].iter().sum();
        let expected = positions[0] * (1.0 - 6.0 / 16.0) + ring / 16.0;
        assert!((refined.positions[0] - expected).norm() < 1e-14);
    }

    #[test]
    fn boundary_rules() {
        let positions = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let refined = subdivide_once(&TriMesh { positions: positions.clone(), triangles: vec![[0, 1, 2]] }).unwrap();
        assert_eq!(refined.positions.len(), 6);
        assert_eq!(refined.triangles.len(), 4);
        let expected0 = positions[0] * 0.75 + (positions[1] + positions[2]) * 0.125;
        assert!((refined.positions[0] - expected0).norm() < 1e-15);
        // First edge encountered is (0, 1).
        assert!((refined.positions[3] - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn non_manifold_edge_is_rejected() {
        let positions = vec![Vec3::zeros(); 5];
        let triangles = vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]];
        assert!(matches!(
            subdivide_once(&TriMesh { positions, triangles }),
            Err(Error::NonManifold(_))
        ));
    }

    #[test]
    fn bowtie_vertex_is_rejected() {
        // Two triangles sharing only vertex 0: four boundary edges meet there.
        let triangles = vec![[0, 1, 2], [0, 3, 4]];
        assert!(LoopStencils::build(5, &triangles).is_err());
    }

    #[test]
    fn stencil_rows_are_affine() {
        let positions = vec![Vec3::zeros(); 4];
        let triangles = vec![[0, 1, 2], [0, 2, 3]];
        let s = LoopStencils::build(positions.len(), &triangles).unwrap();
        for i in 0..s.refined_vertex_count() {
            let sum: f64 = s.row(i).iter().map(|t| t.1).sum();
            assert!((sum - 1.0).abs() < 1e-15);
        }
    }
}
