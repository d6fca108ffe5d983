use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::fem::quadrature::QuadratureRule;
use crate::mesh::{BoundaryTag, Point, TriMesh};

/// Quadratic Lagrange basis on a triangle in barycentric coordinates:
/// three vertex functions followed by the midpoints of local edges
/// (1,2), (2,0), (0,1), i.e. local edge i is opposite vertex i.
#[inline]
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
        4.0 * l[0] * l[1],
    ]
}

/// Per-triangle geometry and global P2 node numbers.
#[derive(Debug, Clone)]
pub struct Element {
    /// Global P2 node ids: three vertices, then three edge midpoints.
    pub nodes: [usize; 6],
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl Element {
    fn new(p: [Point; 3], nodes: [usize; 6]) -> Self {
        let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let mut grad_lambda = [[0.0; 2]; 3];
        for i in 0..3 {
            let a = p[(i + 1) % 3];
            let b = p[(i + 2) % 3];
            grad_lambda[i] = [(a[1] - b[1]) / area2, (b[0] - a[0]) / area2];
        }
        Self {
            nodes,
            area: area2 / 2.0,
            grad_lambda,
        }
    }

    /// Gradients of the six P2 basis functions at barycentric point `l`.
    #[inline]
    pub fn p2_gradients(&self, l: [f64; 3]) -> [[f64; 2]; 6] {
        let g = &self.grad_lambda;
        let mut out = [[0.0; 2]; 6];
        for d in 0..2 {
            out[0][d] = (4.0 * l[0] - 1.0) * g[0][d];
            out[1][d] = (4.0 * l[1] - 1.0) * g[1][d];
            out[2][d] = (4.0 * l[2] - 1.0) * g[2][d];
            out[3][d] = 4.0 * (l[1] * g[2][d] + l[2] * g[1][d]);
            out[4][d] = 4.0 * (l[2] * g[0][d] + l[0] * g[2][d]);
            out[5][d] = 4.0 * (l[0] * g[1][d] + l[1] * g[0][d]);
        }
        out
    }

    pub fn vertices(&self) -> [usize; 3] {
        [self.nodes[0], self.nodes[1], self.nodes[2]]
    }
}

/// Taylor-Hood P2/P1 space on a triangle mesh.
///
/// Velocity coefficients are interleaved: P2 node `a` owns DOFs `2a` (x) and
/// `2a + 1` (y). P2 nodes are numbered vertices first, then edges in the
/// mesh's edge order. Pressure DOFs are the mesh vertices.
#[derive(Debug, Clone)]
pub struct TaylorHoodSpace {
    mesh: TriMesh,
    coords: Vec<Point>,
    elements: Vec<Element>,
    edge_lookup: HashMap<[usize; 2], usize>,
    boundary_nodes: Vec<(BoundaryTag, Vec<usize>)>,
    rule: QuadratureRule,
}

impl TaylorHoodSpace {
    pub fn new(mesh: TriMesh) -> Self {
        let nv = mesh.nodes().len();
        let mut coords = mesh.nodes().to_vec();
        let mut edge_lookup = HashMap::with_capacity(mesh.edges().len());
        for (e, &[a, b]) in mesh.edges().iter().enumerate() {
            let (pa, pb) = (mesh.nodes()[a], mesh.nodes()[b]);
            coords.push([(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0]);
            edge_lookup.insert([a.min(b), a.max(b)], e);
        }
        let elements = mesh
            .triangles()
            .iter()
            .zip(mesh.triangle_edges())
            .map(|(t, te)| {
                let p = [mesh.nodes()[t[0]], mesh.nodes()[t[1]], mesh.nodes()[t[2]]];
                Element::new(p, [t[0], t[1], t[2], nv + te[0], nv + te[1], nv + te[2]])
            })
            .collect();
        let mut boundary_nodes = Vec::new();
        for tag in [BoundaryTag::Obstacle, BoundaryTag::Outer] {
            let mut nodes = Vec::new();
            for be in mesh.boundary_edges().iter().filter(|be| be.tag == tag) {
                let [a, b] = be.nodes;
                nodes.push(a);
                nodes.push(b);
                nodes.push(nv + edge_lookup[&[a.min(b), a.max(b)]]);
            }
            nodes.sort_unstable();
            nodes.dedup();
            if !nodes.is_empty() {
                boundary_nodes.push((tag, nodes));
            }
        }
        // a vertex shared by two tags is owned by the first tag only
        if boundary_nodes.len() == 2 {
            let first: std::collections::HashSet<usize> = boundary_nodes[0].1.iter().copied().collect();
            boundary_nodes[1].1.retain(|n| !first.contains(n));
        }
        Self {
            mesh,
            coords,
            elements,
            edge_lookup,
            boundary_nodes,
            rule: QuadratureRule::degree4(),
        }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn n_vertices(&self) -> usize {
        self.mesh.nodes().len()
    }

    pub fn n_p2_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_velocity(&self) -> usize {
        2 * self.coords.len()
    }

    pub fn n_pressure(&self) -> usize {
        self.mesh.nodes().len()
    }

    /// Velocity + pressure + one mean-pressure multiplier.
    pub fn n_saddle(&self) -> usize {
        self.n_velocity() + self.n_pressure() + 1
    }

    pub fn p2_coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// P2 node id of the midpoint of edge `{a, b}`.
    pub fn edge_node(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup
            .get(&[a.min(b), a.max(b)])
            .map(|e| self.n_vertices() + e)
    }

    /// P2 nodes on boundary edges carrying `tag`.
    pub fn boundary_p2_nodes(&self, tag: BoundaryTag) -> &[usize] {
        self.boundary_nodes
            .iter()
            .find(|(t, _)| *t == tag)
            .map_or(&[], |(_, n)| n.as_slice())
    }

    /// Velocity DOFs constrained by boundary `tag`.
    pub fn constrained_dofs(&self, tag: BoundaryTag) -> Vec<usize> {
        self.boundary_p2_nodes(tag)
            .iter()
            .flat_map(|&n| [2 * n, 2 * n + 1])
            .collect()
    }

    /// Nodal interpolant of a vector field.
    pub fn interpolate(&self, f: impl Fn(Point) -> Point) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_velocity());
        for &x in &self.coords {
            let v = f(x);
            out.push(v[0]);
            out.push(v[1]);
        }
        out
    }

    /// Nodal P1 interpolant of a scalar field.
    pub fn interpolate_pressure(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.mesh.nodes().iter().map(|&x| f(x)).collect()
    }

    pub fn check_velocity(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_velocity() {
            return Err(Error::DimensionMismatch(format!(
                "velocity vector has {} entries, space has {}",
                v.len(),
                self.n_velocity()
            )));
        }
        Ok(())
    }

    /// Velocity value inside element `t` at barycentric `l`.
    pub fn velocity_at(&self, v: &[f64], t: usize, l: [f64; 3]) -> Point {
        let phi = p2_values(l);
        let nodes = &self.elements[t].nodes;
        let mut out = [0.0; 2];
        for (i, &n) in nodes.iter().enumerate() {
            out[0] += phi[i] * v[2 * n];
            out[1] += phi[i] * v[2 * n + 1];
        }
        out
    }

    /// Velocity Jacobian `D[c][d] = d v_c / d x_d` inside element `t`.
    pub fn velocity_gradient_at(&self, v: &[f64], t: usize, l: [f64; 3]) -> [[f64; 2]; 2] {
        let el = &self.elements[t];
        let g = el.p2_gradients(l);
        let mut out = [[0.0; 2]; 2];
        for (i, &n) in el.nodes.iter().enumerate() {
            for c in 0..2 {
                for d in 0..2 {
                    out[c][d] += v[2 * n + c] * g[i][d];
                }
            }
        }
        out
    }

    pub fn pressure_at(&self, p: &[f64], t: usize, l: [f64; 3]) -> f64 {
        let tri = self.mesh.triangles()[t];
        l[0] * p[tri[0]] + l[1] * p[tri[1]] + l[2] * p[tri[2]]
    }

    /// Physical coordinates of barycentric point `l` in element `t`.
    pub fn map_point(&self, t: usize, l: [f64; 3]) -> Point {
        let tri = self.mesh.triangles()[t];
        let n = self.mesh.nodes();
        let mut x = [0.0; 2];
        for k in 0..3 {
            x[0] += l[k] * n[tri[k]][0];
            x[1] += l[k] * n[tri[k]][1];
        }
        x
    }

    /// Barycentric coordinates of `x` with respect to element `t`
    /// (may fall outside the triangle).
    pub fn barycentric(&self, t: usize, x: Point) -> [f64; 3] {
        let el = &self.elements[t];
        let p0 = self.mesh.nodes()[self.mesh.triangles()[t][0]];
        let l1 = el.grad_lambda[1][0] * (x[0] - p0[0]) + el.grad_lambda[1][1] * (x[1] - p0[1]);
        let l2 = el.grad_lambda[2][0] * (x[0] - p0[0]) + el.grad_lambda[2][1] * (x[1] - p0[1]);
        [1.0 - l1 - l2, l1, l2]
    }

    /// `sum_t sum_q w |T| f(t, l)` over all elements with the volume rule.
    pub fn integrate(&self, mut f: impl FnMut(usize, [f64; 3]) -> f64) -> f64 {
        let mut total = 0.0;
        for (t, el) in self.elements.iter().enumerate() {
            let mut local = 0.0;
            for (l, w) in self.rule.points.iter().zip(&self.rule.weights) {
                local += w * f(t, *l);
            }
            total += 2.0 * el.area * local;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rectangle_mesh;

    #[test]
    fn dof_counts_and_tag_lists() {
        let mesh = generate_rectangle_mesh([0.0, 0.0], [1.0, 1.0], 3, 2).unwrap();
        let nv = mesh.nodes().len();
        let ne = mesh.edges().len();
        let space = TaylorHoodSpace::new(mesh);
        assert_eq!(space.n_velocity(), 2 * (nv + ne));
        assert_eq!(space.n_pressure(), nv);
        // boundary of a 3x2 grid: 10 edges, 10 vertices, 10 midpoints
        assert_eq!(space.boundary_p2_nodes(BoundaryTag::Outer).len(), 20);
        assert!(space.boundary_p2_nodes(BoundaryTag::Obstacle).is_empty());
    }

    #[test]
    fn basis_is_nodal_and_partitions_unity() {
        let nodes = [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.5],
            [0.5, 0.5, 0.0],
        ];
        for (i, l) in nodes.iter().enumerate() {
            let v = p2_values(*l);
            for (j, x) in v.iter().enumerate() {
                assert!((x - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let v = p2_values([0.2, 0.3, 0.5]);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn p2_interpolant_reproduces_quadratics() {
        let mesh = generate_rectangle_mesh([0.0, 0.0], [2.0, 1.0], 3, 3).unwrap();
        let space = TaylorHoodSpace::new(mesh);
        let f = |x: Point| [x[0] * x[1] + x[0] * x[0], 1.0 - x[1] * x[1]];
        let v = space.interpolate(f);
        let l = [0.1, 0.6, 0.3];
        for t in 0..space.elements().len() {
            let x = space.map_point(t, l);
            let val = space.velocity_at(&v, t, l);
            let ex = f(x);
            assert!((val[0] - ex[0]).abs() < 1e-13 && (val[1] - ex[1]).abs() < 1e-13);
            let g = space.velocity_gradient_at(&v, t, l);
            assert!((g[0][0] - (x[1] + 2.0 * x[0])).abs() < 1e-12);
            assert!((g[0][1] - x[0]).abs() < 1e-12);
            assert!(g[1][0].abs() < 1e-12);
            assert!((g[1][1] + 2.0 * x[1]).abs() < 1e-12);
            let back = space.barycentric(t, x);
            for k in 0..3 {
                assert!((back[k] - l[k]).abs() < 1e-12);
            }
        }
    }
}
