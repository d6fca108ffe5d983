//! Circle-recovery experiment: annulus `0.2 < r < 0.8` as the target,
//! elliptic obstacle as the initial shape.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adjoint::{CostFunctional, DonorTarget, TargetField};
use crate::error::{Error, Result};
use crate::forward::{solve_forward, vector_field, Discretization, NonlinearSettings, ProblemConfig, VectorField};
use crate::mesh::{generate_graded_annulus_mesh, BoundaryTag, Circle, Ellipse, Point, TriMesh};
use crate::optimizer::{self, IterationRecord, OptimizerSettings};

pub const OUTER_RADIUS: f64 = 0.8;
pub const TARGET_RADIUS: f64 = 0.2;
pub const ELLIPSE_SEMI_X: f64 = 0.6;
pub const ELLIPSE_SEMI_Y: f64 = 0.4;
pub const T_FINAL: f64 = 1.0;
pub const DT: f64 = 0.05;

/// Rigid rotation `(0.15 y, −0.15 x)` prescribed on the outer circle.
pub fn rotating_bc() -> VectorField {
    vector_field(|x, _| [0.15 * x[1], -0.15 * x[0]])
}

/// Body force of the recovery experiment.
pub fn paper_forcing(alpha: f64) -> VectorField {
    vector_field(move |p, t| {
        let (x, y) = (p[0], p[1]);
        let r2 = x * x + y * y;
        let r = r2.sqrt();
        let swirl = alpha * t * (15.0 * x * x + 15.0 * y * y - 1.0) / (5.0 * r2 * r);
        let radial = t * t / 25.0 * (-46.0 - 25.0 * x * x - 25.0 * y * y - 1.0 / r2 + 12.0 / r + 60.0 * r);
        [
            -45.0 * x / (31.0 * r) + swirl * y + radial * x,
            -45.0 * y / (31.0 * r) - swirl * x + radial * y,
        ]
    })
}

/// Forward problem of the experiment at viscosity `alpha`, starting from rest.
pub fn benchmark_problem(alpha: f64) -> ProblemConfig {
    ProblemConfig {
        alpha,
        t_final: T_FINAL,
        dt: DT,
        body_force: paper_forcing(alpha),
        outer_bc: rotating_bc(),
        initial_velocity: Arc::new(|_| [0.0, 0.0]),
        nonlinear: NonlinearSettings::default(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialDeviation {
    pub mean: f64,
    pub max: f64,
}

/// Statistics of `| |x| − r |` over the obstacle nodes.
pub fn radial_deviation_from(mesh: &TriMesh, radius: f64) -> RadialDeviation {
    let nodes: Vec<Point> = mesh
        .tagged_nodes(BoundaryTag::Obstacle)
        .iter()
        .map(|&i| mesh.nodes()[i])
        .collect();
    if nodes.is_empty() {
        return RadialDeviation { mean: 0.0, max: 0.0 };
    }
    let devs: Vec<f64> = nodes.iter().map(|p| (p[0].hypot(p[1]) - radius).abs()).collect();
    RadialDeviation {
        mean: devs.iter().sum::<f64>() / devs.len() as f64,
        max: devs.iter().copied().fold(0.0, f64::max),
    }
}

/// Deviation of the obstacle from the target circle `r = 0.2`.
pub fn radial_deviation(mesh: &TriMesh) -> RadialDeviation {
    radial_deviation_from(mesh, TARGET_RADIUS)
}

/// Geometry and data of the experiment at one viscosity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub outer_radius: f64,
    pub target_radius: f64,
    pub semi_x: f64,
    pub semi_y: f64,
    pub t_final: f64,
    pub dt: f64,
    pub alpha: f64,
}

impl BenchmarkSpec {
    pub fn new(alpha: f64) -> Self {
        Self {
            outer_radius: OUTER_RADIUS,
            target_radius: TARGET_RADIUS,
            semi_x: ELLIPSE_SEMI_X,
            semi_y: ELLIPSE_SEMI_Y,
            t_final: T_FINAL,
            dt: DT,
            alpha,
        }
    }

    /// Checks `target < semi_y <= semi_x < outer` and positive data.
    pub fn validate(&self) -> Result<()> {
        let chain = 0.0 < self.target_radius
            && self.target_radius < self.semi_y
            && self.semi_y <= self.semi_x
            && self.semi_x < self.outer_radius;
        if !chain {
            return Err(Error::InvalidConfig(format!(
                "radii must satisfy 0 < {} < {} <= {} < {}",
                self.target_radius, self.semi_y, self.semi_x, self.outer_radius
            )));
        }
        self.problem().steps().map(|_| ())
    }

    pub fn problem(&self) -> ProblemConfig {
        ProblemConfig {
            t_final: self.t_final,
            dt: self.dt,
            ..benchmark_problem(self.alpha)
        }
    }

    pub fn target_curve(&self) -> Circle {
        Circle {
            center: [0.0, 0.0],
            radius: self.target_radius,
        }
    }

    pub fn initial_curve(&self) -> Ellipse {
        Ellipse {
            center: [0.0, 0.0],
            semi_x: self.semi_x,
            semi_y: self.semi_y,
        }
    }

    /// Whether circle recovery is expected at this viscosity.
    pub fn recovery_expected(&self) -> bool {
        self.alpha > 0.001 * (1.0 + 1e-9)
    }
}

/// Edge lengths (obstacle, outer circle) of the generated meshes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshResolution {
    pub initial: (f64, f64),
    pub donor: (f64, f64),
}

impl Default for MeshResolution {
    /// About 125 nodes for the elliptic start, ~500 for the donor.
    fn default() -> Self {
        Self {
            initial: (0.08, 0.16),
            donor: (0.07, 0.07),
        }
    }
}

/// Recovery and descent thresholds of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Required relative drop of the mean radial deviation.
    pub deviation_reduction: f64,
    pub max_deviation: f64,
    /// Required `J_final / J_initial` upper bound.
    pub cost_ratio: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            deviation_reduction: 0.8,
            max_deviation: 0.05,
            cost_ratio: 0.05,
        }
    }
}

/// Outcome of each check; recovery checks are `None` when waived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkChecks {
    pub mean_deviation: Option<bool>,
    pub max_deviation: Option<bool>,
    pub cost_decrease: bool,
    pub monotone: bool,
}

impl BenchmarkChecks {
    pub fn passed(&self) -> bool {
        self.mean_deviation.unwrap_or(true) && self.max_deviation.unwrap_or(true) && self.cost_decrease && self.monotone
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub spec: BenchmarkSpec,
    pub resolution: MeshResolution,
    pub initial_nodes: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub initial_deviation: RadialDeviation,
    pub final_deviation: RadialDeviation,
    pub history: Vec<IterationRecord>,
    pub seconds: f64,
    pub checks: BenchmarkChecks,
    pub passed: bool,
}

impl BenchmarkReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidConfig(format!("report serialization: {e}")))
    }
}

/// True when no two successive records both raise `J`.
pub fn no_consecutive_increases(costs: &[f64]) -> bool {
    let rises: Vec<bool> = costs.windows(2).map(|w| w[1] > w[0]).collect();
    !rises.windows(2).any(|r| r[0] && r[1])
}

/// Costs in the order logged: the cost before each iteration, then the
/// cost after the last one.
fn cost_sequence(history: &[IterationRecord], final_cost: f64) -> Vec<f64> {
    history.iter().map(|r| r.cost).chain(std::iter::once(final_cost)).collect()
}

pub fn evaluate_checks(
    spec: &BenchmarkSpec,
    thresholds: &Thresholds,
    initial: (f64, RadialDeviation),
    outcome: (f64, RadialDeviation),
    history: &[IterationRecord],
) -> BenchmarkChecks {
    let (j0, d0) = initial;
    let (j1, d1) = outcome;
    let recovery = spec.recovery_expected();
    BenchmarkChecks {
        mean_deviation: recovery.then(|| d1.mean <= (1.0 - thresholds.deviation_reduction) * d0.mean),
        max_deviation: recovery.then(|| d1.max <= thresholds.max_deviation),
        cost_decrease: j1 <= thresholds.cost_ratio * j0,
        monotone: no_consecutive_increases(&cost_sequence(history, j1)),
    }
}

/// Donor run on the target annulus, then `iterations` descent steps from
/// the ellipse.
pub fn run_benchmark(
    spec: &BenchmarkSpec,
    iterations: usize,
    resolution: &MeshResolution,
    out_dir: Option<&Path>,
) -> Result<BenchmarkReport> {
    spec.validate()?;
    let start = Instant::now();
    let config = spec.problem();
    let donor_mesh = generate_graded_annulus_mesh(
        spec.outer_radius,
        &spec.target_curve(),
        resolution.donor.0,
        resolution.donor.1,
    )?;
    let donor = solve_forward(&Discretization::new(donor_mesh), &config)?;
    let target = TargetField::Donor(Arc::new(DonorTarget::from_trajectory(&donor)));
    let mesh = generate_graded_annulus_mesh(
        spec.outer_radius,
        &spec.initial_curve(),
        resolution.initial.0,
        resolution.initial.1,
    )?;
    let settings = OptimizerSettings {
        iterations,
        out_dir: out_dir.map(Path::to_path_buf),
        ..OptimizerSettings::default()
    };
    let result = optimizer::run(&mesh, &config, Some(&target), CostFunctional::Tracking, &settings)?;
    let initial_deviation = radial_deviation_from(&mesh, spec.target_radius);
    let final_deviation = radial_deviation_from(&result.mesh, spec.target_radius);
    let checks = evaluate_checks(
        spec,
        &Thresholds::default(),
        (result.initial_cost, initial_deviation),
        (result.final_cost, final_deviation),
        &result.history,
    );
    Ok(BenchmarkReport {
        spec: *spec,
        resolution: *resolution,
        initial_nodes: mesh.nodes().len(),
        initial_cost: result.initial_cost,
        final_cost: result.final_cost,
        initial_deviation,
        final_deviation,
        history: result.history,
        seconds: start.elapsed().as_secs_f64(),
        passed: checks.passed(),
        checks,
    })
}
