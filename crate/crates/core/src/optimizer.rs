//! Gradient descent on the obstacle shape: H1 smoothing of the boundary
//! gradient, adaptive step, and mesh morphing.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adjoint::{solve_adjoint, CostFunctional, TargetField};
use crate::error::{Error, Result};
use crate::fem::{
    apply_dirichlet, assemble_stiffness, norm2, DirectSolver, DirichletConstraints, EdgeRule, SparseMatrix,
    TaylorHoodSpace,
};
use crate::forward::{solve_forward, Discretization, ProblemConfig, StateTrajectory};
use crate::gradient::{assemble_gradient, evaluate_cost, BoundaryGradient};
use crate::mesh::{dist, BoundaryTag, Point, TriMesh};
use crate::vtk::write_vtk;

/// Meshes worse than this are flagged in the log.
pub const QUALITY_WARNING: f64 = 0.05;

/// Vector P2 field on the fluid domain, zero on the outer boundary.
#[derive(Debug, Clone)]
pub struct DescentField {
    pub coefficients: Vec<f64>,
    stiffness: Arc<SparseMatrix>,
}

impl DescentField {
    /// `(a, b)_{H1} = ∫ Da : Db`.
    pub fn inner(&self, other: &DescentField) -> f64 {
        self.stiffness.bilinear(&self.coefficients, &other.coefficients)
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// Values at the mesh vertices, which are the first P2 nodes.
    pub fn vertex_values(&self, space: &TaylorHoodSpace) -> Vec<Point> {
        (0..space.n_vertices())
            .map(|i| [self.coefficients[2 * i], self.coefficients[2 * i + 1]])
            .collect()
    }

    /// Largest displacement of an obstacle vertex.
    pub fn max_obstacle_value(&self, mesh: &TriMesh) -> f64 {
        mesh.obstacle_nodes()
            .iter()
            .map(|&i| self.coefficients[2 * i].hypot(self.coefficients[2 * i + 1]))
            .fold(0.0, f64::max)
    }
}

/// Boundary load `∮ g (φ_i · n) ds` on the obstacle, with `g` linear and
/// `n` constant along each edge.
fn boundary_load(space: &TaylorHoodSpace, gradient: &BoundaryGradient) -> Result<Vec<f64>> {
    let normals = &gradient.normals;
    let nodes = space.mesh().nodes();
    let rule = EdgeRule::gauss3();
    let mut rhs = vec![0.0; space.n_velocity()];
    for (e, sa, sb) in normals.edge_slots() {
        let [a, b] = normals.edges[e];
        let m = space
            .edge_node(a, b)
            .ok_or_else(|| Error::Topology(format!("boundary edge ({a}, {b}) has no midside node")))?;
        let n = normals.edge_normals[e];
        let len = dist(nodes[a], nodes[b]);
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let g = (1.0 - s) * gradient.values[sa] + s * gradient.values[sb];
            let shape = [(1.0 - s) * (1.0 - 2.0 * s), 4.0 * s * (1.0 - s), s * (2.0 * s - 1.0)];
            for (&node, phi) in [a, m, b].iter().zip(shape) {
                for c in 0..2 {
                    rhs[2 * node + c] += w * len * g * phi * n[c];
                }
            }
        }
    }
    Ok(rhs)
}

/// Solves `∫ Dd : DV = ∮ g (V · n) ds` for all `V` vanishing on the outer
/// boundary; `d` is free on the obstacle.
pub fn smooth_gradient(space: &TaylorHoodSpace, gradient: &BoundaryGradient) -> Result<DescentField> {
    smooth_with(space, Arc::new(assemble_stiffness(space)), gradient)
}

fn smooth_with(space: &TaylorHoodSpace, stiffness: Arc<SparseMatrix>, gradient: &BoundaryGradient) -> Result<DescentField> {
    if gradient.values.len() != gradient.normals.nodes.len() {
        return Err(Error::DimensionMismatch("gradient values do not match its normal field".into()));
    }
    for &node in &gradient.normals.nodes {
        if node >= space.n_vertices() {
            return Err(Error::DimensionMismatch("gradient is not on this space's mesh".into()));
        }
    }
    let mut rhs = boundary_load(space, gradient)?;
    let mut constraints = DirichletConstraints::new(space.n_velocity());
    for dof in space.constrained_dofs(BoundaryTag::Outer) {
        constraints.insert(dof, 0.0)?;
    }
    let mut matrix = (*stiffness).clone();
    apply_dirichlet(&mut matrix, &mut rhs, &constraints)?;
    let coefficients = DirectSolver::new().solve(&matrix, &rhs)?;
    Ok(DescentField {
        coefficients,
        stiffness,
    })
}

/// Step size `h_k` with the sign and alignment rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepController {
    /// Unset until the first descent field fixes the scale.
    pub step: Option<f64>,
    pub shrink: f64,
    pub growth: f64,
    /// Cosine similarity above which the step grows.
    pub alignment: f64,
    pub max_retries: usize,
    /// First step moves the obstacle by this fraction of its diameter.
    pub initial_fraction: f64,
}

impl Default for StepController {
    fn default() -> Self {
        Self {
            step: None,
            shrink: 0.5,
            growth: 1.2,
            alignment: 0.95,
            max_retries: 10,
            initial_fraction: 0.05,
        }
    }
}

impl StepController {
    pub fn validate(&self) -> Result<()> {
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidConfig(format!("shrink must lie in (0, 1), got {}", self.shrink)));
        }
        if !(self.growth > 1.0) || !self.growth.is_finite() {
            return Err(Error::InvalidConfig(format!("growth must exceed 1, got {}", self.growth)));
        }
        if !(self.alignment > -1.0 && self.alignment <= 1.0) {
            return Err(Error::InvalidConfig(format!("alignment must lie in (-1, 1], got {}", self.alignment)));
        }
        if !(self.initial_fraction > 0.0) || !self.initial_fraction.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "initial_fraction must be positive, got {}",
                self.initial_fraction
            )));
        }
        if let Some(h) = self.step {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidConfig(format!("step must be positive, got {h}")));
            }
        }
        Ok(())
    }

    pub fn shrink_step(&mut self) {
        if let Some(h) = self.step.as_mut() {
            *h *= self.shrink;
        }
    }

    /// Updates the step from the current and previous descent fields and
    /// returns it. Without a previous field the step is left as is.
    pub fn adapt_step(&mut self, d_now: &DescentField, d_prev: Option<&DescentField>, morph_failed: bool) -> Option<f64> {
        let h = self.step?;
        let next = if morph_failed {
            h * self.shrink
        } else if let Some(prev) = d_prev {
            let ip = d_now.inner(prev);
            let scale = d_now.norm() * prev.norm();
            if ip < 0.0 {
                h * self.shrink
            } else if scale > 0.0 && ip / scale >= self.alignment {
                h * self.growth
            } else {
                h
            }
        } else {
            h
        };
        self.step = Some(next);
        self.step
    }

    /// Sets the first step so that the obstacle moves by
    /// `initial_fraction · diameter`. Leaves the step unset for a zero field.
    pub fn initialize(&mut self, d: &DescentField, mesh: &TriMesh) {
        if self.step.is_some() {
            return;
        }
        let peak = d.max_obstacle_value(mesh);
        if peak > 0.0 && peak.is_finite() {
            self.step = Some(self.initial_fraction * obstacle_diameter(mesh) / peak);
        }
    }
}

/// Largest distance between two obstacle vertices.
pub fn obstacle_diameter(mesh: &TriMesh) -> f64 {
    let pts: Vec<Point> = mesh.obstacle_nodes().iter().map(|&i| mesh.nodes()[i]).collect();
    let mut d: f64 = 0.0;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            d = d.max(dist(*a, *b));
        }
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Cost on the shape the gradient was taken on.
    pub cost: f64,
    pub grad_norm: f64,
    /// Accepted step; 0 when no trial step lowered the cost.
    pub step: f64,
    /// Fluid area after the update.
    pub area: f64,
    pub min_quality: f64,
    pub seconds: f64,
}

impl IterationRecord {
    pub const CSV_HEADER: &'static str = "iter,J,grad_norm,step,area,min_quality,seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.3}",
            self.iter, self.cost, self.grad_norm, self.step, self.area, self.min_quality, self.seconds
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSettings {
    pub iterations: usize,
    pub controller: StepController,
    /// Costs at or below this value count as optimal and the shape is kept.
    pub stationary_cost: f64,
    pub out_dir: Option<PathBuf>,
    /// Write `state_####.vtk` every this many iterations; 0 disables.
    pub snapshot_every: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            iterations: 30,
            controller: StepController::default(),
            stationary_cost: 1e-20,
            out_dir: None,
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub mesh: TriMesh,
    pub history: Vec<IterationRecord>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub controller: StepController,
}

struct Evaluated {
    state: StateTrajectory,
    cost: f64,
}

fn evaluate(mesh: TriMesh, config: &ProblemConfig, target: Option<&TargetField>, cost: CostFunctional) -> Result<Evaluated> {
    let disc = Discretization::new(mesh);
    let state = solve_forward(&disc, config)?;
    let cost = evaluate_cost(&state, target, config, cost)?;
    Ok(Evaluated { state, cost })
}

struct Artifacts {
    dir: PathBuf,
    history: std::fs::File,
}

impl Artifacts {
    fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("history.csv");
        let mut history = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        writeln!(history, "{}", IterationRecord::CSV_HEADER).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            history,
        })
    }

    fn record(&mut self, rec: &IterationRecord, mesh: &TriMesh, state: Option<&StateTrajectory>) -> Result<()> {
        let path = self.dir.join("history.csv");
        writeln!(self.history, "{}", rec.csv_row()).map_err(|e| Error::io(&path, e))?;
        self.history.flush().map_err(|e| Error::io(&path, e))?;
        mesh.save_native(self.dir.join(format!("mesh_{:04}.txt", rec.iter)))?;
        if let Some(state) = state {
            let m = state.last_level();
            write_vtk(
                state.space(),
                state.velocity(m),
                state.pressure(m),
                self.dir.join(format!("state_{:04}.vtk", rec.iter)),
            )?;
        }
        Ok(())
    }
}

fn at_iteration(iteration: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        e @ Error::MorphExhausted { .. } => e,
        e => Error::AtIteration {
            iteration,
            source: Box::new(e),
        },
    }
}

/// Runs `settings.iterations` descent steps from `initial_mesh`.
///
/// Each iteration solves state and adjoint, smooths the boundary gradient
/// into `d`, and tries `Ω − h d`. A trial is rejected, and `h` shrunk, when
/// it reverses a triangle or does not lower the cost. When every trial
/// reverses triangles the run fails with `MorphExhausted`; when valid
/// trials exist but none lowers the cost the shape is kept for that
/// iteration and the record shows step 0.
pub fn run(
    initial_mesh: &TriMesh,
    config: &ProblemConfig,
    target: Option<&TargetField>,
    cost: CostFunctional,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    if settings.iterations == 0 {
        return Err(Error::InvalidConfig("iterations must be at least 1".into()));
    }
    settings.controller.validate()?;
    config.steps()?;
    let start = Instant::now();
    let mut artifacts = match &settings.out_dir {
        Some(dir) => Some(Artifacts::create(dir)?),
        None => None,
    };
    let mut controller = settings.controller.clone();
    let mut current = evaluate(initial_mesh.clone(), config, target, cost).map_err(at_iteration(0))?;
    let initial_cost = current.cost;
    let mut history = Vec::with_capacity(settings.iterations);
    let mut previous: Option<DescentField> = None;

    for iter in 1..=settings.iterations {
        let wrap = at_iteration(iter);
        let space = current.state.space();
        let mesh = space.mesh().clone();
        let adjoint = solve_adjoint(&current.state, target, config, cost).map_err(&wrap)?;
        let gradient = assemble_gradient(&current.state, &adjoint, target, config).map_err(&wrap)?;
        let stiffness = Arc::new(current.state.discretization().stiffness().clone());
        let d = smooth_with(space, stiffness, &gradient).map_err(&wrap)?;
        let grad_norm = d.norm();
        if controller.step.is_none() {
            controller.initialize(&d, &mesh);
        } else {
            controller.adapt_step(&d, previous.as_ref(), false);
        }

        let mut accepted: Option<(Evaluated, f64)> = None;
        let stationary = current.cost <= settings.stationary_cost || norm2(&d.coefficients) == 0.0;
        if !stationary {
            if let Some(mut h) = controller.step {
                let displacement = d.vertex_values(space);
                let mut any_valid = false;
                for attempt in 0..=controller.max_retries {
                    if attempt > 0 {
                        controller.shrink_step();
                        h = controller.step.unwrap();
                    }
                    let candidate = match mesh.morph(&displacement, h) {
                        Ok(m) => m,
                        Err(Error::ReversedTriangle { .. }) => {
                            log::debug!("iteration {iter}: step {h:.3e} reverses a triangle");
                            continue;
                        }
                        Err(e) => return Err(wrap(e)),
                    };
                    any_valid = true;
                    let trial = evaluate(candidate, config, target, cost).map_err(&wrap)?;
                    if trial.cost < current.cost {
                        accepted = Some((trial, h));
                        break;
                    }
                    log::debug!(
                        "iteration {iter}: step {h:.3e} raises the cost {:.6e} -> {:.6e}",
                        current.cost,
                        trial.cost
                    );
                }
                if accepted.is_none() && !any_valid {
                    return Err(Error::MorphExhausted { iteration: iter, step: h });
                }
            }
        }

        let cost_here = current.cost;
        let step = match accepted {
            Some((trial, h)) => {
                current = trial;
                h
            }
            None => 0.0,
        };
        let new_mesh = current.state.space().mesh();
        let record = IterationRecord {
            iter,
            cost: cost_here,
            grad_norm,
            step,
            area: new_mesh.area(),
            min_quality: new_mesh.min_quality(),
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "iteration {iter}: J {:.6e} |d| {:.3e} step {:.3e} quality {:.3}",
            record.cost,
            record.grad_norm,
            record.step,
            record.min_quality
        );
        if record.min_quality < QUALITY_WARNING {
            log::warn!("iteration {iter}: minimum triangle quality {:.3e}", record.min_quality);
        }
        if let Some(a) = artifacts.as_mut() {
            let snapshot = settings.snapshot_every > 0 && iter % settings.snapshot_every == 0;
            a.record(&record, new_mesh, snapshot.then_some(&current.state)).map_err(&wrap)?;
        }
        history.push(record);
        previous = Some(d);
    }

    Ok(OptimizationResult {
        mesh: current.state.space().mesh().clone(),
        history,
        initial_cost,
        final_cost: current.cost,
        controller,
    })
}

/// `history.csv` contents for a list of records.
pub fn history_csv(history: &[IterationRecord]) -> String {
    let mut out = String::from(IterationRecord::CSV_HEADER);
    out.push('\n');
    for r in history {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}
