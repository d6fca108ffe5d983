//! Cost functionals and the time-integrated boundary shape gradient.

use std::fmt::Write as _;
use std::path::Path;

use crate::adjoint::{AdjointTrajectory, CostFunctional, TargetField};
use crate::error::{Error, Result};
use crate::fem::TaylorHoodSpace;
use crate::forward::{ProblemConfig, StateTrajectory};
use crate::mesh::{BoundaryNormalField, BoundaryTag, Point, TriMesh};

/// `½ Σ_{k=1..M} dt ∫ |y_k − y_d(t_k)|²`.
pub fn evaluate_j1(state: &StateTrajectory, target: &TargetField) -> Result<f64> {
    target.check_levels(state.last_level() + 1, state.dt())?;
    let space = state.space();
    let sampler = target.quadrature_sampler(space);
    let rule = space.rule();
    let mut total = 0.0;
    for k in 1..=state.last_level() {
        let yd = sampler.values(k, state.time(k));
        let y = state.velocity(k);
        let mut level = 0.0;
        for (t, el) in space.elements().iter().enumerate() {
            for (q, (l, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let v = space.velocity_at(y, t, *l);
                let d = yd[t * rule.len() + q];
                level += w * 2.0 * el.area * 0.5 * ((v[0] - d[0]).powi(2) + (v[1] - d[1]).powi(2));
            }
        }
        total += state.dt() * level;
    }
    Ok(total)
}

/// `(α/2) Σ_{k=1..M} dt ∫ ω_k²` with `ω = ∂_x y_2 − ∂_y y_1`.
pub fn evaluate_j2(state: &StateTrajectory, alpha: f64) -> f64 {
    let space = state.space();
    let mut total = 0.0;
    for k in 1..=state.last_level() {
        let y = state.velocity(k);
        let level = space.integrate(|t, l| {
            let d = space.velocity_gradient_at(y, t, l);
            (d[1][0] - d[0][1]).powi(2)
        });
        total += state.dt() * 0.5 * alpha * level;
    }
    total
}

pub fn evaluate_cost(
    state: &StateTrajectory,
    target: Option<&TargetField>,
    config: &ProblemConfig,
    cost: CostFunctional,
) -> Result<f64> {
    match cost {
        CostFunctional::Tracking => {
            let target =
                target.ok_or_else(|| Error::InvalidConfig("tracking cost requires a target velocity".into()))?;
            evaluate_j1(state, target)
        }
        CostFunctional::Vorticity => Ok(evaluate_j2(state, config.alpha)),
    }
}

/// Shape gradient density `g` on the obstacle nodes, so that the shape
/// gradient is `g n`.
#[derive(Debug, Clone)]
pub struct BoundaryGradient {
    pub cost: CostFunctional,
    pub normals: BoundaryNormalField,
    /// One value per entry of `normals.nodes`.
    pub values: Vec<f64>,
}

/// Velocity gradients recovered at boundary vertices by the area-weighted
/// average of the adjacent element gradients evaluated at the vertex.
pub(crate) struct NodeGradients {
    stencils: Vec<Vec<(usize, [f64; 3], f64)>>,
}

impl NodeGradients {
    pub(crate) fn new(space: &TaylorHoodSpace, nodes: &[usize]) -> Self {
        let mesh = space.mesh();
        let node_tris = mesh.node_triangles();
        let stencils = nodes
            .iter()
            .map(|&n| {
                let total: f64 = node_tris[n].iter().map(|&t| space.elements()[t].area).sum();
                node_tris[n]
                    .iter()
                    .map(|&t| {
                        let local = mesh.triangles()[t].iter().position(|&v| v == n).unwrap();
                        let mut l = [0.0; 3];
                        l[local] = 1.0;
                        (t, l, space.elements()[t].area / total)
                    })
                    .collect()
            })
            .collect();
        Self { stencils }
    }

    pub(crate) fn at(&self, space: &TaylorHoodSpace, v: &[f64], slot: usize) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for &(t, l, w) in &self.stencils[slot] {
            let d = space.velocity_gradient_at(v, t, l);
            for c in 0..2 {
                for e in 0..2 {
                    out[c][e] += w * d[c][e];
                }
            }
        }
        out
    }
}

fn apply(d: [[f64; 2]; 2], n: Point) -> Point {
    [d[0][0] * n[0] + d[0][1] * n[1], d[1][0] * n[0] + d[1][1] * n[1]]
}

fn dot2(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Time-integrated gradient density on the obstacle:
///
/// * tracking: `Σ dt [½|y − y_d|² + α (Dy n)·(Dv n)]`
/// * vorticity: `Σ dt α [½ω² + (Dy n)·(Dv n − ω n⊥)]`, `n⊥ = (−n₂, n₁)`
///
/// summed over `k = 1..M`, with the adjoint level chosen by its pairing.
pub fn assemble_gradient(
    state: &StateTrajectory,
    adjoint: &AdjointTrajectory,
    target: Option<&TargetField>,
    config: &ProblemConfig,
) -> Result<BoundaryGradient> {
    if !std::sync::Arc::ptr_eq(state.discretization(), adjoint.discretization())
        || state.last_level() != adjoint.last_level()
    {
        return Err(Error::DimensionMismatch("state and adjoint trajectories differ".into()));
    }
    let cost = adjoint.cost();
    let space = state.space();
    let mesh = space.mesh();
    let normals = mesh.compute_normals(BoundaryTag::Obstacle)?;
    let stencil = NodeGradients::new(space, &normals.nodes);
    let positions: Vec<Point> = normals.nodes.iter().map(|&n| mesh.nodes()[n]).collect();
    let sampler = match cost {
        CostFunctional::Tracking => {
            let target =
                target.ok_or_else(|| Error::InvalidConfig("tracking cost requires a target velocity".into()))?;
            target.check_levels(state.last_level() + 1, state.dt())?;
            Some(target.sampler(positions))
        }
        CostFunctional::Vorticity => None,
    };
    let alpha = config.alpha;
    let dt = state.dt();
    let mut values = vec![0.0; normals.nodes.len()];
    for k in 1..=state.last_level() {
        let y = state.velocity(k);
        let v = adjoint.paired_with_state(k);
        let yd = sampler.as_ref().map(|s| s.values(k, state.time(k)));
        for (slot, &node) in normals.nodes.iter().enumerate() {
            let n = normals.node_normals[slot];
            let dy = stencil.at(space, y, slot);
            let dv = stencil.at(space, v, slot);
            let dyn_ = apply(dy, n);
            let dvn = apply(dv, n);
            let g = match cost {
                CostFunctional::Tracking => {
                    let d = yd.as_ref().unwrap()[slot];
                    let diff = [y[2 * node] - d[0], y[2 * node + 1] - d[1]];
                    0.5 * dot2(diff, diff) + alpha * dot2(dyn_, dvn)
                }
                CostFunctional::Vorticity => {
                    let omega = dy[1][0] - dy[0][1];
                    let perp = [-n[1], n[0]];
                    let w = [dvn[0] - omega * perp[0], dvn[1] - omega * perp[1]];
                    alpha * (0.5 * omega * omega + dot2(dyn_, w))
                }
            };
            values[slot] += dt * g;
        }
    }
    if values.iter().any(|g| !g.is_finite()) {
        return Err(Error::SolverBreakdown("non-finite shape gradient".into()));
    }
    Ok(BoundaryGradient { cost, normals, values })
}

impl BoundaryGradient {
    /// Normal component `V · n` at each obstacle node for a field on the mesh.
    pub fn normal_trace(&self, mesh: &TriMesh, field: impl Fn(Point) -> Point) -> Vec<f64> {
        self.normals
            .nodes
            .iter()
            .zip(&self.normals.node_normals)
            .map(|(&i, n)| dot2(field(mesh.nodes()[i]), *n))
            .collect()
    }

    /// `∮ g V_n ds` by the trapezoid rule, for normal traces given per slot.
    pub fn eulerian_derivative_normal(&self, vn: &[f64]) -> f64 {
        self.normals
            .edge_slots()
            .map(|(e, a, b)| 0.5 * self.normals.edge_lengths[e] * (self.values[a] * vn[a] + self.values[b] * vn[b]))
            .sum()
    }

    pub fn csv(&self, mesh: &TriMesh) -> String {
        let mut out = String::from("node_id,x,y,nx,ny,g\n");
        for (slot, &node) in self.normals.nodes.iter().enumerate() {
            let x = mesh.nodes()[node];
            let n = self.normals.node_normals[slot];
            let _ = writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                node, x[0], x[1], n[0], n[1], self.values[slot]
            );
        }
        out
    }

    pub fn write_csv(&self, mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.csv(mesh)).map_err(|e| Error::io(path, e))
    }
}

/// `dJ(Ω; V) = ∮ g (V · n) ds` for a field given at mesh nodes.
pub fn eulerian_derivative(gradient: &BoundaryGradient, mesh: &TriMesh, field: impl Fn(Point) -> Point) -> f64 {
    gradient.eulerian_derivative_normal(&gradient.normal_trace(mesh, field))
}
