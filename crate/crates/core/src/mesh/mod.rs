//! Linear triangulations of the fluid region with tagged boundary loops.
//!
//! A [`TriMesh`] stores vertices and counterclockwise triangles only; the
//! quadratic midside nodes used by the finite-element spaces are synthesized
//! from the edge list, so morphing a mesh never needs to touch them.

mod generate;
mod io;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{generate_annulus_mesh, generate_graded_annulus_mesh, generate_rectangle_mesh, Circle, ClosedCurve, Ellipse};
pub use io::{load_mesh, MeshFormat};

pub type Point = [f64; 2];

/// Relative area below which a triangle counts as degenerate.
const DEGENERATE_AREA: f64 = 1e-14;

/// Outer nodes may drift by at most this much under a morph.
pub const OUTER_MOTION_TOLERANCE: f64 = 1e-12;

/// Quality below which a morphed mesh is flagged in the convergence log.
pub const LOW_QUALITY_WARNING: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Obstacle,
    Outer,
}

impl BoundaryTag {
    pub fn keyword(self) -> &'static str {
        match self {
            BoundaryTag::Obstacle => "OBSTACLE",
            BoundaryTag::Outer => "OUTER",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        match word.to_ascii_uppercase().as_str() {
            "OBSTACLE" => Some(BoundaryTag::Obstacle),
            "OUTER" => Some(BoundaryTag::Outer),
            _ => None,
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Boundary edge oriented so that the fluid lies to its left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Closed boundary loop, nodes ordered with the fluid on the left.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryLoop {
    pub tag: BoundaryTag,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[usize; 3]>,
    loops: Vec<BoundaryLoop>,
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Shoelace area of a closed polygon; positive when counterclockwise.
pub fn polygon_area(points: &[Point]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| {
            let p = points[i];
            let q = points[(i + 1) % n];
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        * 0.5
}

/// Winding number of a closed polygon around `p`.
pub fn winding_number(polygon: &[Point], p: Point) -> i32 {
    let n = polygon.len();
    let mut wn = 0;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && cross > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && cross < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// `2 * inradius / circumradius`; 1 for an equilateral triangle.
pub fn triangle_quality(a: Point, b: Point, c: Point) -> f64 {
    let area = signed_area(a, b, c).abs();
    let la = dist(b, c);
    let lb = dist(c, a);
    let lc = dist(a, b);
    let perimeter = la + lb + lc;
    let product = la * lb * lc;
    if product == 0.0 {
        return 0.0;
    }
    16.0 * area * area / (perimeter * product)
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl TriMesh {
    /// Builds and validates a mesh. Clockwise triangles are flipped to
    /// counterclockwise; boundary edge orientation in the input is ignored.
    pub fn new(
        nodes: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        boundary: Vec<([usize; 2], BoundaryTag)>,
    ) -> Result<Self> {
        let n = nodes.len();
        let scale = bounding_box_area(&nodes).max(f64::MIN_POSITIVE);
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::Topology(format!(
                    "triangle {t} references a node beyond {n}"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::DegenerateTriangle(t));
            }
            let area = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if area.abs() <= DEGENERATE_AREA * scale {
                return Err(Error::DegenerateTriangle(t));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }
        Self::with_topology(nodes, triangles, boundary)
    }

    fn with_topology(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<([usize; 2], BoundaryTag)>,
    ) -> Result<Self> {
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut usage: Vec<usize> = Vec::new();
        // oriented (a, b) as it appears in its first counterclockwise triangle
        let mut first_orientation: Vec<[usize; 2]> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for tri in &triangles {
            let mut local = [0usize; 3];
            for (i, slot) in local.iter_mut().enumerate() {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = if a < b { [a, b] } else { [b, a] };
                let idx = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    usage.push(0);
                    first_orientation.push([a, b]);
                    edges.len() - 1
                });
                usage[idx] += 1;
                *slot = idx;
            }
            triangle_edges.push(local);
        }
        for (idx, &count) in usage.iter().enumerate() {
            if count > 2 {
                let [a, b] = edges[idx];
                return Err(Error::NonManifoldEdge(a, b, count));
            }
        }

        let mut tagged: HashMap<usize, BoundaryTag> = HashMap::new();
        for ([a, b], tag) in &boundary {
            let key = if a < b { [*a, *b] } else { [*b, *a] };
            let Some(&idx) = edge_index.get(&key) else {
                return Err(Error::Topology(format!(
                    "boundary edge ({a}, {b}) is not a triangle edge"
                )));
            };
            if usage[idx] != 1 {
                return Err(Error::Topology(format!(
                    "boundary edge ({a}, {b}) is shared by {} triangles",
                    usage[idx]
                )));
            }
            if let Some(prev) = tagged.insert(idx, *tag) {
                if prev != *tag {
                    return Err(Error::Topology(format!(
                        "boundary edge ({a}, {b}) carries two tags"
                    )));
                }
            }
        }
        let mut oriented = Vec::new();
        for (idx, &count) in usage.iter().enumerate() {
            if count == 1 {
                let Some(&tag) = tagged.get(&idx) else {
                    let [a, b] = edges[idx];
                    return Err(Error::Topology(format!("untagged boundary edge ({a}, {b})")));
                };
                oriented.push(BoundaryEdge {
                    nodes: first_orientation[idx],
                    tag,
                });
            }
        }

        let loops = trace_loops(&oriented)?;
        let outer: Vec<&BoundaryLoop> = loops.iter().filter(|l| l.tag == BoundaryTag::Outer).collect();
        if outer.is_empty() {
            return Err(Error::MissingTag(BoundaryTag::Outer));
        }
        if outer.len() > 1 {
            return Err(Error::Topology(format!("{} OUTER loops, expected one", outer.len())));
        }
        let outer_polygon: Vec<Point> = outer[0].nodes.iter().map(|&i| nodes[i]).collect();
        if polygon_area(&outer_polygon) <= 0.0 {
            return Err(Error::Topology("OUTER loop does not enclose the fluid".into()));
        }
        for lp in loops.iter().filter(|l| l.tag == BoundaryTag::Obstacle) {
            let poly: Vec<Point> = lp.nodes.iter().map(|&i| nodes[i]).collect();
            let c = centroid(&poly);
            if winding_number(&outer_polygon, c) == 0 || polygon_area(&poly) >= 0.0 {
                return Err(Error::Topology(
                    "OBSTACLE loop is not strictly inside the OUTER loop".into(),
                ));
            }
        }

        Ok(Self {
            nodes,
            triangles,
            boundary: oriented,
            edges,
            triangle_edges,
            loops,
        })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Unique edges as sorted node pairs.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Edge indices per triangle; local edge `i` is opposite local vertex `i`.
    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn loops(&self) -> &[BoundaryLoop] {
        &self.loops
    }

    pub fn loops_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryLoop> {
        self.loops.iter().filter(move |l| l.tag == tag)
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.loops.iter().any(|l| l.tag == tag)
    }

    /// Obstacle-loop nodes in loop order (all obstacle loops concatenated).
    pub fn obstacle_nodes(&self) -> Vec<usize> {
        self.loops_with_tag(BoundaryTag::Obstacle)
            .flat_map(|l| l.nodes.iter().copied())
            .collect()
    }

    pub fn tagged_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        self.loops_with_tag(tag)
            .flat_map(|l| l.nodes.iter().copied())
            .collect()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    /// Sum of triangle areas.
    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Area enclosed by the boundary polygons (outer minus holes).
    pub fn polygon_area(&self) -> f64 {
        self.loops
            .iter()
            .map(|l| {
                let poly: Vec<Point> = l.nodes.iter().map(|&i| self.nodes[i]).collect();
                polygon_area(&poly)
            })
            .sum()
    }

    pub fn min_quality(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle_points(t);
                triangle_quality(a, b, c)
            })
            .fold(1.0, f64::min)
    }

    pub fn min_signed_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .fold(f64::INFINITY, f64::min)
    }

    /// Triangles touching each node.
    pub fn node_triangles(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                out[v].push(t);
            }
        }
        out
    }

    /// Per-node boolean mask of `tag` membership.
    pub fn tag_mask(&self, tag: BoundaryTag) -> Vec<bool> {
        let mut mask = vec![false; self.nodes.len()];
        for e in self.boundary.iter().filter(|e| e.tag == tag) {
            mask[e.nodes[0]] = true;
            mask[e.nodes[1]] = true;
        }
        mask
    }

    /// Moves vertex `i` to `x_i - scale * displacement_i`; connectivity is
    /// unchanged.
    pub fn morph(&self, displacement: &[Point], scale: f64) -> Result<TriMesh> {
        if displacement.len() != self.nodes.len() {
            return Err(Error::DimensionMismatch(format!(
                "displacement has {} entries for {} nodes",
                displacement.len(),
                self.nodes.len()
            )));
        }
        if !(scale >= 0.0) {
            return Err(Error::Geometry(format!("morph scale must be >= 0, got {scale}")));
        }
        let nodes = self
            .nodes
            .iter()
            .zip(displacement)
            .map(|(x, d)| [x[0] - scale * d[0], x[1] - scale * d[1]])
            .collect();
        self.with_nodes(nodes)
    }

    /// Same topology, new vertex coordinates. Fails on any non-positive
    /// triangle or on outer-boundary motion.
    pub fn with_nodes(&self, nodes: Vec<Point>) -> Result<TriMesh> {
        if nodes.len() != self.nodes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates for {} nodes",
                nodes.len(),
                self.nodes.len()
            )));
        }
        let mut outer_motion: f64 = 0.0;
        for e in self.boundary.iter().filter(|e| e.tag == BoundaryTag::Outer) {
            for &v in &e.nodes {
                outer_motion = outer_motion.max(dist(nodes[v], self.nodes[v]));
            }
        }
        if outer_motion > OUTER_MOTION_TOLERANCE {
            return Err(Error::OuterBoundaryMoved(outer_motion));
        }
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let area = signed_area(nodes[a], nodes[b], nodes[c]);
            if !(area > 0.0) {
                return Err(Error::ReversedTriangle { triangle: t, area });
            }
        }
        Ok(TriMesh {
            nodes,
            ..self.clone()
        })
    }

    /// Applies `x -> x + scale * field(x)` at every vertex.
    pub fn displace_by<F: Fn(Point) -> Point>(&self, field: F, scale: f64) -> Result<TriMesh> {
        let nodes = self
            .nodes
            .iter()
            .map(|&x| {
                let v = field(x);
                [x[0] + scale * v[0], x[1] + scale * v[1]]
            })
            .collect();
        self.with_nodes(nodes)
    }

    /// Splits every triangle into four at its edge midpoints. Midpoints of
    /// boundary edges are passed through `project` with the edge's tag, so
    /// curved boundaries can be followed.
    pub fn refine_uniform(&self, project: impl Fn(BoundaryTag, Point) -> Point) -> Result<TriMesh> {
        let mut tags: HashMap<[usize; 2], BoundaryTag> = HashMap::new();
        for e in &self.boundary {
            let [a, b] = e.nodes;
            tags.insert([a.min(b), a.max(b)], e.tag);
        }
        let mut nodes = self.nodes.clone();
        let mut midpoint: HashMap<[usize; 2], usize> = HashMap::with_capacity(self.edges.len());
        for &[a, b] in &self.edges {
            let key = [a.min(b), a.max(b)];
            let (p, q) = (self.nodes[a], self.nodes[b]);
            let mut m = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            if let Some(&tag) = tags.get(&key) {
                m = project(tag, m);
            }
            midpoint.insert(key, nodes.len());
            nodes.push(m);
        }
        let mid = |a: usize, b: usize| midpoint[&[a.min(b), a.max(b)]];
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        for &[a, b, c] in &self.triangles {
            let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
            triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        let mut boundary = Vec::with_capacity(2 * self.boundary.len());
        for e in &self.boundary {
            let [a, b] = e.nodes;
            let m = mid(a, b);
            boundary.push(([a, m], e.tag));
            boundary.push(([m, b], e.tag));
        }
        TriMesh::new(nodes, triangles, boundary)
    }

    pub fn compute_normals(&self, tag: BoundaryTag) -> Result<BoundaryNormalField> {
        BoundaryNormalField::new(self, tag)
    }
}

fn bounding_box_area(nodes: &[Point]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let mut lo = nodes[0];
    let mut hi = nodes[0];
    for p in nodes {
        lo = [lo[0].min(p[0]), lo[1].min(p[1])];
        hi = [hi[0].max(p[0]), hi[1].max(p[1])];
    }
    (hi[0] - lo[0]) * (hi[1] - lo[1])
}

fn centroid(points: &[Point]) -> Point {
    let n = points.len() as f64;
    let s = points
        .iter()
        .fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
    [s[0] / n, s[1] / n]
}

fn trace_loops(edges: &[BoundaryEdge]) -> Result<Vec<BoundaryLoop>> {
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut incoming: HashMap<usize, usize> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        if next.insert(e.nodes[0], i).is_some() {
            return Err(Error::Topology(format!(
                "boundary node {} starts two boundary edges",
                e.nodes[0]
            )));
        }
        if incoming.insert(e.nodes[1], i).is_some() {
            return Err(Error::Topology(format!(
                "boundary node {} ends two boundary edges",
                e.nodes[1]
            )));
        }
    }
    let mut visited = vec![false; edges.len()];
    let mut loops = Vec::new();
    for start in 0..edges.len() {
        if visited[start] {
            continue;
        }
        let tag = edges[start].tag;
        let mut nodes = Vec::new();
        let mut cur = start;
        loop {
            if visited[cur] {
                break;
            }
            visited[cur] = true;
            let e = edges[cur];
            if e.tag != tag {
                return Err(Error::Topology("boundary loop carries mixed tags".into()));
            }
            nodes.push(e.nodes[0]);
            cur = *next.get(&e.nodes[1]).ok_or_else(|| {
                Error::Topology(format!("boundary loop open at node {}", e.nodes[1]))
            })?;
        }
        if cur != start {
            return Err(Error::Topology("boundary loops intersect".into()));
        }
        loops.push(BoundaryLoop { tag, nodes });
    }
    Ok(loops)
}

/// Outward (out of the fluid) unit normals on the loops carrying one tag.
#[derive(Debug, Clone)]
pub struct BoundaryNormalField {
    pub tag: BoundaryTag,
    /// Loop nodes in order, all loops with the tag concatenated.
    pub nodes: Vec<usize>,
    pub node_normals: Vec<Point>,
    /// Oriented edges `[a, b]` with the fluid on the left.
    pub edges: Vec<[usize; 2]>,
    pub edge_normals: Vec<Point>,
    pub edge_lengths: Vec<f64>,
    slot: HashMap<usize, usize>,
}

impl BoundaryNormalField {
    fn new(mesh: &TriMesh, tag: BoundaryTag) -> Result<Self> {
        if !mesh.has_tag(tag) {
            return Err(Error::MissingTag(tag));
        }
        let mut field = BoundaryNormalField {
            tag,
            nodes: Vec::new(),
            node_normals: Vec::new(),
            edges: Vec::new(),
            edge_normals: Vec::new(),
            edge_lengths: Vec::new(),
            slot: HashMap::new(),
        };
        for lp in mesh.loops_with_tag(tag) {
            let n = lp.nodes.len();
            let first_edge = field.edges.len();
            for i in 0..n {
                let a = lp.nodes[i];
                let b = lp.nodes[(i + 1) % n];
                let pa = mesh.nodes[a];
                let pb = mesh.nodes[b];
                let dx = pb[0] - pa[0];
                let dy = pb[1] - pa[1];
                let len = dx.hypot(dy);
                field.edges.push([a, b]);
                // fluid on the left, so the right-hand normal points out of it
                field.edge_normals.push([dy / len, -dx / len]);
                field.edge_lengths.push(len);
            }
            for i in 0..n {
                let prev = first_edge + (i + n - 1) % n;
                let next = first_edge + i;
                let lp_ = field.edge_lengths[prev];
                let ln = field.edge_lengths[next];
                let np = field.edge_normals[prev];
                let nn = field.edge_normals[next];
                let v = [lp_ * np[0] + ln * nn[0], lp_ * np[1] + ln * nn[1]];
                let norm = v[0].hypot(v[1]);
                field.slot.insert(lp.nodes[i], field.nodes.len());
                field.nodes.push(lp.nodes[i]);
                field.node_normals.push([v[0] / norm, v[1] / norm]);
            }
        }
        Ok(field)
    }

    /// Position of a mesh node within `nodes`, if it lies on these loops.
    pub fn slot(&self, node: usize) -> Option<usize> {
        self.slot.get(&node).copied()
    }

    pub fn normal_at(&self, node: usize) -> Option<Point> {
        self.slot(node).map(|s| self.node_normals[s])
    }

    /// Edges as pairs of slots into `nodes`.
    pub fn edge_slots(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.edges
            .iter()
            .enumerate()
            .map(|(e, [a, b])| (e, self.slot[a], self.slot[b]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square_with_hole() -> TriMesh {
        // 4x4 grid on [0,3]^2 with the middle cell removed
        let mut nodes = Vec::new();
        for j in 0..4 {
            for i in 0..4 {
                nodes.push([i as f64, j as f64]);
            }
        }
        let id = |i: usize, j: usize| j * 4 + i;
        let mut tris = Vec::new();
        for j in 0..3 {
            for i in 0..3 {
                if i == 1 && j == 1 {
                    continue;
                }
                tris.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                tris.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let mut boundary = Vec::new();
        for k in 0..3 {
            boundary.push(([id(k, 0), id(k + 1, 0)], BoundaryTag::Outer));
            boundary.push(([id(3, k), id(3, k + 1)], BoundaryTag::Outer));
            boundary.push(([id(k, 3), id(k + 1, 3)], BoundaryTag::Outer));
            boundary.push(([id(0, k), id(0, k + 1)], BoundaryTag::Outer));
        }
        boundary.push(([id(1, 1), id(2, 1)], BoundaryTag::Obstacle));
        boundary.push(([id(2, 1), id(2, 2)], BoundaryTag::Obstacle));
        boundary.push(([id(2, 2), id(1, 2)], BoundaryTag::Obstacle));
        boundary.push(([id(1, 2), id(1, 1)], BoundaryTag::Obstacle));
        TriMesh::new(nodes, tris, boundary).unwrap()
    }

    #[test]
    fn clockwise_triangle_is_flipped() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let tris = vec![[0, 2, 1]];
        let boundary = vec![
            ([0, 1], BoundaryTag::Outer),
            ([1, 2], BoundaryTag::Outer),
            ([2, 0], BoundaryTag::Outer),
        ];
        let mesh = TriMesh::new(nodes, tris, boundary).unwrap();
        assert_eq!(mesh.triangle_area(0), 0.5);
    }

    #[test]
    fn square_hole_loops_and_normals() {
        let mesh = unit_square_with_hole();
        assert_eq!(mesh.loops().len(), 2);
        assert_eq!(mesh.area(), 8.0);
        assert_eq!(mesh.polygon_area(), 8.0);
        let normals = mesh.compute_normals(BoundaryTag::Obstacle).unwrap();
        // node (2,1.5) does not exist; use mid-edge normal of the right hole edge
        let right = normals
            .edges
            .iter()
            .position(|&[a, b]| {
                let (pa, pb) = (mesh.nodes()[a], mesh.nodes()[b]);
                pa[0] == 2.0 && pb[0] == 2.0
            })
            .unwrap();
        assert_eq!(normals.edge_normals[right], [-1.0, 0.0]);
        for n in &normals.node_normals {
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-12);
        }
        // corner (2,1): out of the fluid means into the hole, i.e. towards (1.5,1.5)
        let corner = normals.normal_at(6).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((corner[0] + r).abs() < 1e-12 && (corner[1] - r).abs() < 1e-12);
    }

    #[test]
    fn edge_shared_by_three_triangles_is_rejected() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.5, -1.0], [0.5, 2.0]];
        let tris = vec![[0, 1, 2], [0, 3, 1], [0, 1, 4]];
        let err = TriMesh::new(nodes, tris, vec![]).unwrap_err();
        assert!(matches!(err, Error::NonManifoldEdge(0, 1, 3)), "{err}");
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let err = TriMesh::new(nodes, vec![[0, 1, 2]], vec![]).unwrap_err();
        assert!(matches!(err, Error::DegenerateTriangle(0)));
    }

    #[test]
    fn quality_values() {
        let h = 3f64.sqrt() / 2.0;
        assert!((triangle_quality([0.0, 0.0], [1.0, 0.0], [0.5, h]) - 1.0).abs() < 1e-14);
        // inradius (2 - sqrt2)/2, circumradius sqrt2/2
        let expected = 2.0 * ((2.0 - 2f64.sqrt()) / 2.0) / (2f64.sqrt() / 2.0);
        let q = triangle_quality([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        assert!((q - expected).abs() < 1e-14);
        assert!((q - 0.828_427_124_746_190_1).abs() < 1e-14);
        assert!(triangle_quality([0.0, 0.0], [1.0, 0.0], [0.5, 0.01]) < 0.05);
    }

    #[test]
    fn morph_zero_scale_is_identity_and_outer_is_checked() {
        let mesh = unit_square_with_hole();
        let mut d = vec![[0.0, 0.0]; mesh.nodes().len()];
        let same = mesh.morph(&d, 0.0).unwrap();
        assert_eq!(same.nodes(), mesh.nodes());
        d[0] = [1.0, 0.0];
        assert!(matches!(mesh.morph(&d, 0.1), Err(Error::OuterBoundaryMoved(_))));
    }

    #[test]
    fn morph_reports_reversed_triangle() {
        let mesh = unit_square_with_hole();
        let mut d = vec![[0.0, 0.0]; mesh.nodes().len()];
        // push hole corner (1,1) far to the right
        d[5] = [-1.0, 0.0];
        let result = mesh.morph(&d, 2.5);
        assert!(matches!(result, Err(Error::ReversedTriangle { .. })));
    }
}
