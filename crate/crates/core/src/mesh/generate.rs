use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use super::{dist, winding_number, BoundaryTag, Point, TriMesh};
use crate::error::{Error, Result};

/// Closed curve parametrized counterclockwise by an angle in `[0, 2pi)`.
pub trait ClosedCurve {
    fn point(&self, theta: f64) -> Point;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl ClosedCurve for Circle {
    fn point(&self, theta: f64) -> Point {
        [
            self.center[0] + self.radius * theta.cos(),
            self.center[1] + self.radius * theta.sin(),
        ]
    }
}

/// Axis-aligned ellipse `(x/a)^2 + (y/b)^2 = 1` around `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: Point,
    pub semi_x: f64,
    pub semi_y: f64,
}

impl ClosedCurve for Ellipse {
    fn point(&self, theta: f64) -> Point {
        [
            self.center[0] + self.semi_x * theta.cos(),
            self.center[1] + self.semi_y * theta.sin(),
        ]
    }
}

const CURVE_SAMPLES: usize = 4096;
const MIN_OBSTACLE_NODES: usize = 16;
const SMOOTHING_SWEEPS: usize = 6;

/// `n` points equally spaced in arc length along the curve.
fn arc_length_points(curve: &dyn ClosedCurve, n: usize) -> Vec<Point> {
    let samples: Vec<Point> = (0..=CURVE_SAMPLES)
        .map(|i| curve.point(std::f64::consts::TAU * i as f64 / CURVE_SAMPLES as f64))
        .collect();
    let mut cumulative = vec![0.0; CURVE_SAMPLES + 1];
    for i in 1..=CURVE_SAMPLES {
        cumulative[i] = cumulative[i - 1] + dist(samples[i - 1], samples[i]);
    }
    let total = cumulative[CURVE_SAMPLES];
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let s = total * k as f64 / n as f64;
        while cumulative[j + 1] < s {
            j += 1;
        }
        let frac = (s - cumulative[j]) / (cumulative[j + 1] - cumulative[j]);
        let theta = std::f64::consts::TAU * (j as f64 + frac) / CURVE_SAMPLES as f64;
        out.push(curve.point(theta));
    }
    out
}

fn curve_length(curve: &dyn ClosedCurve) -> f64 {
    (0..CURVE_SAMPLES)
        .map(|i| {
            let a = curve.point(std::f64::consts::TAU * i as f64 / CURVE_SAMPLES as f64);
            let b = curve.point(std::f64::consts::TAU * (i + 1) as f64 / CURVE_SAMPLES as f64);
            dist(a, b)
        })
        .sum()
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn polygon_distance(p: Point, polygon: &[Point]) -> f64 {
    let n = polygon.len();
    (0..n)
        .map(|i| segment_distance(p, polygon[i], polygon[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// Triangulates the region between a centered outer circle and an inner
/// closed curve. Boundary nodes are spaced by `target_edge_length` in arc
/// length, interior nodes start on a hexagonal lattice and are relaxed by a
/// few Laplacian sweeps with Delaunay re-triangulation in between.
pub fn generate_annulus_mesh(
    outer_radius: f64,
    inner: &dyn ClosedCurve,
    target_edge_length: f64,
) -> Result<TriMesh> {
    generate_graded_annulus_mesh(outer_radius, inner, target_edge_length, target_edge_length)
}

/// Like [`generate_annulus_mesh`], with the edge length growing from
/// `inner_edge_length` on the inner curve to `outer_edge_length` on the outer
/// circle. Interior nodes of a graded mesh are picked greedily from a fine
/// lattice so that neighbours sit about one local edge length apart.
pub fn generate_graded_annulus_mesh(
    outer_radius: f64,
    inner: &dyn ClosedCurve,
    inner_edge_length: f64,
    outer_edge_length: f64,
) -> Result<TriMesh> {
    let (h_in, h_out) = (inner_edge_length, outer_edge_length);
    if !(h_in > 0.0) || !(h_out > 0.0) || !(outer_radius > 0.0) {
        return Err(Error::Geometry(
            "outer radius and edge lengths must be positive".into(),
        ));
    }
    for i in 0..1024 {
        let p = inner.point(std::f64::consts::TAU * i as f64 / 1024.0);
        if !(p[0].hypot(p[1]) < outer_radius) {
            return Err(Error::Geometry(
                "inner curve is not strictly inside the outer circle".into(),
            ));
        }
    }
    let inner_count = (curve_length(inner) / h_in).ceil() as usize;
    if inner_count < MIN_OBSTACLE_NODES {
        return Err(Error::Geometry(format!(
            "edge length {h_in} resolves the obstacle with only {inner_count} nodes (need {MIN_OBSTACLE_NODES})"
        )));
    }
    let outer_count = ((std::f64::consts::TAU * outer_radius / h_out).ceil() as usize).max(8);

    let inner_pts = arc_length_points(inner, inner_count);
    let outer_pts: Vec<Point> = (0..outer_count)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / outer_count as f64;
            [outer_radius * t.cos(), outer_radius * t.sin()]
        })
        .collect();
    let size = |p: Point| {
        let d_in = polygon_distance(p, &inner_pts);
        let d_out = (outer_radius - p[0].hypot(p[1])).max(0.0);
        if d_in + d_out == 0.0 {
            h_in
        } else {
            h_in + (h_out - h_in) * d_in / (d_in + d_out)
        }
    };
    let admissible = |p: Point, margin: f64| {
        outer_radius - p[0].hypot(p[1]) >= margin
            && winding_number(&inner_pts, p) == 0
            && polygon_distance(p, &inner_pts) >= margin
    };
    let interior = if h_in == h_out {
        hexagonal_points(outer_radius, h_in, |p| admissible(p, 0.7 * h_in))
    } else {
        greedy_points(outer_radius, h_in.min(h_out), &inner_pts, &outer_pts, &size, &admissible)
    };

    let n_inner = inner_pts.len();
    let n_outer = outer_pts.len();
    let mut points: Vec<Point> = inner_pts.clone();
    points.extend(&outer_pts);
    let first_interior = points.len();
    points.extend(interior);

    let mut constraints = Vec::with_capacity(n_inner + n_outer);
    for k in 0..n_inner {
        constraints.push([k, (k + 1) % n_inner]);
    }
    for k in 0..n_outer {
        constraints.push([n_inner + k, n_inner + (k + 1) % n_outer]);
    }

    let inside = |p: Point| {
        p[0].hypot(p[1]) < outer_radius && winding_number(&outer_pts, p) != 0 && winding_number(&inner_pts, p) == 0
    };

    let mut triangles = triangulate(&points, &constraints, &inside)?;
    for _ in 0..SMOOTHING_SWEEPS {
        let mut sum = vec![[0.0, 0.0]; points.len()];
        let mut count = vec![0usize; points.len()];
        for t in &triangles {
            for i in 0..3 {
                let a = t[i];
                for k in 1..3 {
                    let b = t[(i + k) % 3];
                    sum[a][0] += points[b][0];
                    sum[a][1] += points[b][1];
                    count[a] += 1;
                }
            }
        }
        for v in first_interior..points.len() {
            if count[v] == 0 {
                continue;
            }
            let c = count[v] as f64;
            let candidate = [sum[v][0] / c, sum[v][1] / c];
            if inside(candidate) && admissible(candidate, 0.25 * size(candidate)) {
                points[v] = candidate;
            }
        }
        triangles = triangulate(&points, &constraints, &inside)?;
    }

    // drop interior points that ended up in no triangle
    let mut used = vec![false; points.len()];
    for t in &triangles {
        for &v in t {
            used[v] = true;
        }
    }
    let mut remap = vec![usize::MAX; points.len()];
    let mut nodes = Vec::new();
    for (v, p) in points.iter().enumerate() {
        if used[v] || v < first_interior {
            remap[v] = nodes.len();
            nodes.push(*p);
        }
    }
    let triangles = triangles
        .iter()
        .map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]])
        .collect();
    let boundary = constraints
        .iter()
        .map(|&[a, b]| {
            let tag = if a < n_inner {
                BoundaryTag::Obstacle
            } else {
                BoundaryTag::Outer
            };
            ([remap[a], remap[b]], tag)
        })
        .collect();
    TriMesh::new(nodes, triangles, boundary)
}

fn hexagonal_points(radius: f64, h: f64, keep: impl Fn(Point) -> bool) -> Vec<Point> {
    let row = h * 3f64.sqrt() / 2.0;
    let rows = (radius / row).ceil() as i64 + 1;
    let cols = (radius / h).ceil() as i64 + 1;
    let mut out = Vec::new();
    for j in -rows..=rows {
        let shift = if j.rem_euclid(2) == 1 { 0.5 * h } else { 0.0 };
        for i in -cols..=cols {
            let p = [i as f64 * h + shift, j as f64 * row];
            if keep(p) {
                out.push(p);
            }
        }
    }
    out
}

/// Scans a lattice four times finer than `h_min`, nearest to the inner curve
/// first, accepting a point when it keeps `0.9 (h(p) + h(q)) / 2` from every
/// accepted or boundary point `q`.
fn greedy_points(
    radius: f64,
    h_min: f64,
    inner_pts: &[Point],
    outer_pts: &[Point],
    size: &dyn Fn(Point) -> f64,
    admissible: &dyn Fn(Point, f64) -> bool,
) -> Vec<Point> {
    let mut candidates: Vec<(f64, Point)> = hexagonal_points(radius, 0.25 * h_min, |p| admissible(p, 0.7 * size(p)))
        .into_iter()
        .map(|p| (polygon_distance(p, inner_pts), p))
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut placed: Vec<(Point, f64)> = inner_pts.iter().chain(outer_pts).map(|&p| (p, size(p))).collect();
    let boundary = placed.len();
    for (_, p) in candidates {
        let hp = size(p);
        if placed.iter().all(|&(q, hq)| dist(p, q) >= 0.45 * (hp + hq)) {
            placed.push((p, hp));
        }
    }
    placed[boundary..].iter().map(|&(p, _)| p).collect()
}

fn triangulate(
    points: &[Point],
    constraints: &[[usize; 2]],
    inside: &dyn Fn(Point) -> bool,
) -> Result<Vec<[usize; 3]>> {
    let vertices: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(vertices, constraints.to_vec())
        .map_err(|e| Error::Geometry(format!("triangulation failed: {e:?}")))?;
    if cdt.num_vertices() != points.len() {
        return Err(Error::Geometry("duplicate mesh points".into()));
    }
    let mut out = Vec::new();
    for face in cdt.inner_faces() {
        let [a, b, c] = face.vertices().map(|v| v.fix().index());
        let (pa, pb, pc) = (points[a], points[b], points[c]);
        let centroid = [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0];
        if inside(centroid) {
            out.push([a, b, c]);
        }
    }
    Ok(out)
}

/// Structured `[x0,x1] x [y0,y1]` mesh with `nx * ny` cells, each split along
/// its lower-left to upper-right diagonal. The whole boundary is OUTER.
pub fn generate_rectangle_mesh(lower: Point, upper: Point, nx: usize, ny: usize) -> Result<TriMesh> {
    if nx == 0 || ny == 0 || !(upper[0] > lower[0]) || !(upper[1] > lower[1]) {
        return Err(Error::Geometry("empty rectangle".into()));
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([
                lower[0] + (upper[0] - lower[0]) * i as f64 / nx as f64,
                lower[1] + (upper[1] - lower[1]) * j as f64 / ny as f64,
            ]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut boundary = Vec::new();
    for i in 0..nx {
        boundary.push(([id(i, 0), id(i + 1, 0)], BoundaryTag::Outer));
        boundary.push(([id(i, ny), id(i + 1, ny)], BoundaryTag::Outer));
    }
    for j in 0..ny {
        boundary.push(([id(0, j), id(0, j + 1)], BoundaryTag::Outer));
        boundary.push(([id(nx, j), id(nx, j + 1)], BoundaryTag::Outer));
    }
    TriMesh::new(nodes, triangles, boundary)
}
