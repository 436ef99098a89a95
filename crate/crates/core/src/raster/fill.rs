//! Visibility pass: z-buffered triangle coverage with the top-left fill rule.

use crate::raster::camera::Camera;
use crate::Vec3;

/// Vertices closer than this to the camera plane cull their triangle.
pub const NEAR_PLANE: f64 = 1.0;

/// Geometry of one part for the visibility pass.
pub struct FillInput<'a> {
    pub positions: &'a [Vec3],
    pub triangles: &'a [[u32; 3]],
    /// Drop triangles facing away from the camera.
    pub cull_back: bool,
}

/// Per-pixel winner of the depth test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fragment {
    /// Index into the `FillInput` list.
    pub part: u16,
    pub triangle: u32,
    /// Perspective-correct barycentric weights for the triangle's vertices.
    pub bary: [f64; 3],
    /// Camera-space distance along `-z`, in mm.
    pub depth: f64,
}

pub struct Fragments {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Option<Fragment>>,
}

#[derive(Clone, Copy)]
struct ScreenVertex {
    x: f64,
    y: f64,
    inv_w: f64,
}

/// Edge function evaluated in a canonical vertex order so that the two
/// triangles sharing an edge get exactly opposite values.
#[inline]
fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    if (a.0, a.1) <= (b.0, b.1) {
        (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
    } else {
        -((a.0 - b.0) * (p.1 - b.1) - (a.1 - b.1) * (p.0 - b.0))
    }
}

/// Top or left edge for a positively oriented triangle in y-down coordinates.
#[inline]
fn is_top_left(a: (f64, f64), b: (f64, f64)) -> bool {
    (a.1 == b.1 && b.0 > a.0) || b.1 < a.1
}

#[inline]
fn covers(w: f64, top_left: bool) -> bool {
    w > 0.0 || (w == 0.0 && top_left)
}

pub fn fill(inputs: &[FillInput], camera: &Camera) -> Fragments {
    let (width, height) = (camera.width, camera.height);
    let mut pixels: Vec<Option<Fragment>> = vec![None; width * height];
    let mut screen: Vec<ScreenVertex> = Vec::new();
    for (part, input) in inputs.iter().enumerate() {
        screen.clear();
        screen.extend(input.positions.iter().map(|p| {
            let [x, y] = camera.project_unchecked(p);
            ScreenVertex { x, y, inv_w: 1.0 / -p.z }
        }));
        for (t, tri) in input.triangles.iter().enumerate() {
            if tri.iter().any(|&i| input.positions[i as usize].z > -NEAR_PLANE) {
                continue;
            }
            let mut v = tri.map(|i| screen[i as usize]);
            let mut order = [0usize, 1, 2];
            let pos = |s: &ScreenVertex| (s.x, s.y);
            let area = edge(pos(&v[0]), pos(&v[1]), pos(&v[2]));
            if area == 0.0 || !area.is_finite() {
                continue;
            }
            if area < 0.0 {
                if input.cull_back {
                    continue;
                }
                v.swap(1, 2);
                order.swap(1, 2);
            }
            let area = area.abs();
            let (p0, p1, p2) = (pos(&v[0]), pos(&v[1]), pos(&v[2]));
            let tl = [is_top_left(p1, p2), is_top_left(p2, p0), is_top_left(p0, p1)];
            let min_x = p0.0.min(p1.0).min(p2.0);
            let max_x = p0.0.max(p1.0).max(p2.0);
            let min_y = p0.1.min(p1.1).min(p2.1);
            let max_y = p0.1.max(p1.1).max(p2.1);
            // Pixel centres at i + 0.5 inside [min, max].
            let x0 = (min_x - 0.5).ceil().max(0.0) as usize;
            let y0 = (min_y - 0.5).ceil().max(0.0) as usize;
            let x1 = ((max_x - 0.5).floor()).min(width as f64 - 1.0);
            let y1 = ((max_y - 0.5).floor()).min(height as f64 - 1.0);
            if x1 < 0.0 || y1 < 0.0 {
                continue;
            }
            let (x1, y1) = (x1 as usize, y1 as usize);
            for py in y0..=y1 {
                let cy = py as f64 + 0.5;
                for px in x0..=x1 {
                    let c = (px as f64 + 0.5, cy);
                    let w0 = edge(p1, p2, c);
                    if !covers(w0, tl[0]) {
                        continue;
                    }
                    let w1 = edge(p2, p0, c);
                    if !covers(w1, tl[1]) {
                        continue;
                    }
                    let w2 = edge(p0, p1, c);
                    if !covers(w2, tl[2]) {
                        continue;
                    }
                    let l = [w0 / area, w1 / area, w2 / area];
                    let q = [l[0] * v[0].inv_w, l[1] * v[1].inv_w, l[2] * v[2].inv_w];
                    let inv_depth = q[0] + q[1] + q[2];
                    let depth = 1.0 / inv_depth;
                    let slot = &mut pixels[py * width + px];
                    if slot.is_some_and(|f| f.depth <= depth) {
                        continue;
                    }
                    let mut bary = [0.0; 3];
                    for k in 0..3 {
                        bary[order[k]] = q[k] * depth;
                    }
                    *slot = Some(Fragment {
                        part: part as u16,
                        triangle: t as u32,
                        bary,
                        depth,
                    });
                }
            }
        }
    }
    Fragments {
        width,
        height,
        pixels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam(w: usize, h: usize) -> Camera {
        Camera::new(100.0, 100.0, w as f64 / 2.0, h as f64 / 2.0, w, h).unwrap()
    }

    /// Points at depth `z` whose projections are the given pixel positions.
    fn unproject(c: &Camera, px: &[(f64, f64)], z: f64) -> Vec<Vec3> {
        px.iter()
            .map(|&(u, v)| Vec3::new((u - c.cx) * -z / c.fx, (v - c.cy) * -z / c.fy, z))
            .collect()
    }

    #[test]
    fn shared_edges_cover_each_pixel_once() {
        let c = cam(32, 32);
        // A fan of triangles around an interior point, including edges through pixel centres.
        let pts = unproject(
            &c,
            &[(16.5, 16.5), (2.0, 2.0), (30.5, 2.0), (30.5, 30.5), (2.0, 30.5), (16.5, 0.0)],
            -50.0,
        );
        let tris = [[0, 1, 5], [0, 5, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1]];
        let mut count = vec![0; 32 * 32];
        for t in tris {
            let f = fill(&[FillInput { positions: &pts, triangles: &[t], cull_back: false }], &c);
            for (i, p) in f.pixels.iter().enumerate() {
                if p.is_some() {
                    count[i] += 1;
                }
            }
        }
        assert!(count.iter().all(|&n| n <= 1));
        let whole = fill(&[FillInput { positions: &pts, triangles: &tris, cull_back: false }], &c);
        let covered = whole.pixels.iter().filter(|p| p.is_some()).count();
        assert_eq!(covered, count.iter().sum::<usize>());
    }

    #[test]
    fn barycentrics_reproduce_the_surface_point() {
        let c = cam(40, 30);
        let pts = vec![Vec3::new(-10.0, -8.0, -60.0), Vec3::new(12.0, -5.0, -90.0), Vec3::new(0.0, 9.0, -70.0)];
        let f = fill(&[FillInput { positions: &pts, triangles: &[[0, 1, 2]], cull_back: false }], &c);
        let mut n = 0;
        for (i, frag) in f.pixels.iter().enumerate() {
            let Some(frag) = frag else { continue };
            n += 1;
            let p: Vec3 = (0..3).map(|k| pts[k] * frag.bary[k]).sum();
            let [u, v] = c.project(&p).unwrap();
            assert!((u - ((i % 40) as f64 + 0.5)).abs() < 1e-9);
            assert!((v - ((i / 40) as f64 + 0.5)).abs() < 1e-9);
            assert!((frag.depth + p.z).abs() < 1e-9);
        }
        assert!(n > 50);
    }

    #[test]
    fn back_faces_are_culled_only_on_request() {
        let c = cam(20, 20);
        let pts = unproject(&c, &[(2.0, 2.0), (2.0, 18.0), (18.0, 2.0)], -10.0);
        let count = |cull| {
            fill(&[FillInput { positions: &pts, triangles: &[[0, 1, 2]], cull_back: cull }], &c)
                .pixels
                .iter()
                .filter(|p| p.is_some())
                .count()
        };
        assert!(count(false) > 0);
        assert_eq!(count(true), 0);
    }
}
