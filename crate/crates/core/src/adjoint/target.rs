use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{p2_values, TaylorHoodSpace};
use crate::forward::{Discretization, StateTrajectory, VectorField};
use crate::mesh::{winding_number, BoundaryTag, Point, TriMesh};

const INSIDE_TOLERANCE: f64 = 1e-10;

/// Desired velocity `y_d` entering the tracking cost.
#[derive(Clone)]
pub enum TargetField {
    /// Closed-form space-time field.
    Analytic(VectorField),
    /// Velocity history stored on another mesh.
    Donor(Arc<DonorTarget>),
}

impl fmt::Debug for TargetField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetField::Analytic(_) => f.write_str("TargetField::Analytic"),
            TargetField::Donor(d) => f
                .debug_struct("TargetField::Donor")
                .field("levels", &d.velocity.len())
                .field("dt", &d.dt)
                .finish(),
        }
    }
}

/// Velocity trajectory on a donor mesh, evaluated elsewhere by point
/// location and P2 interpolation. Points inside a donor obstacle give zero;
/// points outside the donor's outer boundary use the nearest donor triangle.
pub struct DonorTarget {
    disc: Arc<Discretization>,
    dt: f64,
    velocity: Vec<Vec<f64>>,
    locator: GridLocator,
    holes: Vec<Vec<Point>>,
}

#[derive(Serialize, Deserialize)]
struct DonorFile {
    mesh: String,
    dt: f64,
    velocity: Vec<Vec<f64>>,
}

impl DonorTarget {
    pub fn from_trajectory(traj: &StateTrajectory) -> Self {
        let velocity = (0..=traj.last_level()).map(|k| traj.velocity(k).to_vec()).collect();
        Self::new(Arc::clone(traj.discretization()), traj.dt(), velocity)
    }

    fn new(disc: Arc<Discretization>, dt: f64, velocity: Vec<Vec<f64>>) -> Self {
        let mesh = disc.mesh();
        let locator = GridLocator::new(mesh);
        let holes = mesh
            .loops_with_tag(BoundaryTag::Obstacle)
            .map(|l| l.nodes.iter().map(|&i| mesh.nodes()[i]).collect())
            .collect();
        Self {
            disc,
            dt,
            velocity,
            locator,
            holes,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn levels(&self) -> usize {
        self.velocity.len()
    }

    pub fn mesh(&self) -> &TriMesh {
        self.disc.mesh()
    }

    pub fn velocity(&self, level: usize) -> &[f64] {
        &self.velocity[level]
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DonorFile {
            mesh: self.disc.mesh().to_native_string(),
            dt: self.dt,
            velocity: self.velocity.clone(),
        };
        serde_json::to_string(&file).map_err(|e| Error::InvalidConfig(format!("donor serialization: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DonorFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        let mesh = TriMesh::from_native_str(&file.mesh)?;
        let disc = Discretization::new(mesh);
        if file.velocity.iter().any(|v| v.len() != disc.space().n_velocity()) {
            return Err(Error::DimensionMismatch("donor velocity does not match donor mesh".into()));
        }
        Ok(Self::new(disc, file.dt, file.velocity))
    }

    fn locate(&self, x: Point) -> Location {
        if let Some((t, l)) = self.locator.find(self.disc.mesh(), x) {
            return Location::Inside(t, l);
        }
        if self.holes.iter().any(|h| winding_number(h, x) != 0) {
            return Location::Zero;
        }
        let (t, l) = self.locator.nearest(self.disc.mesh(), x);
        Location::Inside(t, l)
    }
}

#[derive(Debug, Clone, Copy)]
enum Location {
    Inside(usize, [f64; 3]),
    Zero,
}

impl TargetField {
    /// Checks that the target covers every level of a run with `levels`
    /// states spaced `dt` apart.
    pub fn check_levels(&self, levels: usize, dt: f64) -> Result<()> {
        if let TargetField::Donor(d) = self {
            if d.velocity.len() != levels || (d.dt - dt).abs() > 1e-12 * dt {
                return Err(Error::InvalidConfig(format!(
                    "donor target has {} levels at dt = {}, run needs {} at dt = {}",
                    d.velocity.len(),
                    d.dt,
                    levels,
                    dt
                )));
            }
        }
        Ok(())
    }

    /// Prepares repeated evaluation at fixed points.
    pub fn sampler(&self, points: Vec<Point>) -> TargetSampler {
        let located = match self {
            TargetField::Analytic(_) => Vec::new(),
            TargetField::Donor(d) => points.iter().map(|&x| d.locate(x)).collect(),
        };
        TargetSampler {
            target: self.clone(),
            points,
            located,
        }
    }

    /// Sampler at every volume quadrature point of `space`, element-major.
    pub fn quadrature_sampler(&self, space: &TaylorHoodSpace) -> TargetSampler {
        let rule = space.rule();
        let mut points = Vec::with_capacity(space.elements().len() * rule.len());
        for t in 0..space.elements().len() {
            for l in &rule.points {
                points.push(space.map_point(t, *l));
            }
        }
        self.sampler(points)
    }
}

/// Target values at a fixed point set.
pub struct TargetSampler {
    target: TargetField,
    points: Vec<Point>,
    located: Vec<Location>,
}

impl TargetSampler {
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Values at time level `level` (time `t`).
    pub fn values(&self, level: usize, t: f64) -> Vec<Point> {
        match &self.target {
            TargetField::Analytic(f) => self.points.iter().map(|&x| f(x, t)).collect(),
            TargetField::Donor(d) => {
                let v = &d.velocity[level];
                let space = d.disc.space();
                self.located
                    .iter()
                    .map(|loc| match *loc {
                        Location::Zero => [0.0, 0.0],
                        Location::Inside(tri, l) => {
                            let phi = p2_values(l);
                            let mut out = [0.0; 2];
                            for (i, &n) in space.elements()[tri].nodes.iter().enumerate() {
                                out[0] += phi[i] * v[2 * n];
                                out[1] += phi[i] * v[2 * n + 1];
                            }
                            out
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Uniform bucket grid over triangle bounding boxes.
struct GridLocator {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

fn bary(mesh: &TriMesh, t: usize, x: Point) -> [f64; 3] {
    let [a, b, c] = mesh.triangle_points(t);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

impl GridLocator {
    fn new(mesh: &TriMesh) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in mesh.nodes() {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let n = (mesh.triangles().len() as f64).sqrt().ceil().max(1.0) as usize;
        let cell = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / n as f64).max(1e-12);
        let nx = ((hi[0] - lo[0]) / cell).ceil() as usize + 1;
        let ny = ((hi[1] - lo[1]) / cell).ceil() as usize + 1;
        let mut grid = Self {
            origin: lo,
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        };
        for t in 0..mesh.triangles().len() {
            let pts = mesh.triangle_points(t);
            let (i0, j0) = grid.cell_of([pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min), pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min)]);
            let (i1, j1) = grid.cell_of([pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max), pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max)]);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    grid.buckets[j * nx + i].push(t);
                }
            }
        }
        grid
    }

    fn cell_of(&self, x: Point) -> (usize, usize) {
        let i = ((x[0] - self.origin[0]) / self.cell).floor().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((x[1] - self.origin[1]) / self.cell).floor().clamp(0.0, (self.ny - 1) as f64) as usize;
        (i, j)
    }

    fn find(&self, mesh: &TriMesh, x: Point) -> Option<(usize, [f64; 3])> {
        let (i, j) = self.cell_of(x);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[j * self.nx + i] {
            let l = bary(mesh, t, x);
            let worst = l.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= -INSIDE_TOLERANCE && best.is_none_or(|(_, _, w)| worst > w) {
                best = Some((t, l, worst));
            }
        }
        best.map(|(t, l, _)| (t, l))
    }

    /// Closest triangle with barycentric coordinates clamped onto it.
    fn nearest(&self, mesh: &TriMesh, x: Point) -> (usize, [f64; 3]) {
        let mut best = (0, [1.0, 0.0, 0.0], f64::INFINITY);
        for t in 0..mesh.triangles().len() {
            let l = bary(mesh, t, x);
            let mut c = l.map(|v| v.max(0.0));
            let s: f64 = c.iter().sum();
            c.iter_mut().for_each(|v| *v /= s);
            let pts = mesh.triangle_points(t);
            let q = [
                c[0] * pts[0][0] + c[1] * pts[1][0] + c[2] * pts[2][0],
                c[0] * pts[0][1] + c[1] * pts[1][1] + c[2] * pts[2][1],
            ];
            let d = (q[0] - x[0]).hypot(q[1] - x[1]);
            if d < best.2 {
                best = (t, c, d);
            }
        }
        (best.0, best.1)
    }
}
