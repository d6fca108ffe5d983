//! Subcommand drivers.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use nsshape_core::adjoint::{CostFunctional, DonorTarget, TargetField};
use nsshape_core::benchmark::{radial_deviation, RadialDeviation};
use nsshape_core::forward::{kinetic_energy, solve_forward, Discretization};
use nsshape_core::mesh::{generate_graded_annulus_mesh, load_mesh, Circle, Ellipse, TriMesh};
use nsshape_core::optimizer::{self, OptimizerSettings};
use nsshape_core::verification::{
    compare_battery, manufactured_convergence, GradientComparison, ManufacturedSolution, PerturbationField,
};
use nsshape_core::vtk::write_vtk;
use nsshape_core::{Error, Result};

use crate::config::{MeshSource, Obstacle, RunConfig, TargetSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subcommand {
    Solve,
    Optimize,
    Verify,
    Mms,
}

/// Failure of a subcommand, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Verification(String),
}

impl RunError {
    /// 1 configuration or input, 2 solver, 3 mesh morph, 4 verification.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Verification(_) => 4,
            RunError::Core(e) => match e.root() {
                Error::MorphExhausted { .. } | Error::ReversedTriangle { .. } => 3,
                Error::SolverBreakdown(_)
                | Error::NonlinearDivergence { .. }
                | Error::LevelOutOfRange { .. }
                | Error::DimensionMismatch(_)
                | Error::ConflictingConstraint { .. } => 2,
                _ => 1,
            },
        }
    }
}

/// Outcome of a successful run, for the caller to report.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub summary: String,
}

pub fn build_mesh(source: &MeshSource) -> Result<TriMesh> {
    match source {
        MeshSource::File { path, format } => load_mesh(path, *format),
        MeshSource::Generated {
            outer_radius,
            obstacle,
            h,
            h_outer,
        } => match *obstacle {
            Obstacle::Circle { radius } => generate_graded_annulus_mesh(
                *outer_radius,
                &Circle {
                    center: [0.0, 0.0],
                    radius,
                },
                *h,
                *h_outer,
            ),
            Obstacle::Ellipse { semi_x, semi_y } => generate_graded_annulus_mesh(
                *outer_radius,
                &Ellipse {
                    center: [0.0, 0.0],
                    semi_x,
                    semi_y,
                },
                *h,
                *h_outer,
            ),
        },
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Builds `y_d`, writing `donor.json` into `out` when a donor run was made.
pub fn build_target(config: &RunConfig, out: &Path) -> Result<Option<TargetField>> {
    match &config.problem.target {
        TargetSpec::None => Ok(None),
        TargetSpec::Analytic(name) => Ok(Some(TargetField::Analytic(name.field(config.problem.alpha)))),
        TargetSpec::Donor { cache: Some(path), .. } => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            Ok(Some(TargetField::Donor(Arc::new(DonorTarget::from_json(&text)?))))
        }
        TargetSpec::Donor { mesh, cache: None } => {
            let donor_mesh = build_mesh(mesh)?;
            log::info!("donor run on {} nodes", donor_mesh.nodes().len());
            let state = solve_forward(&Discretization::new(donor_mesh), &config.problem.problem_config())?;
            let donor = DonorTarget::from_trajectory(&state);
            write_file(&out.join("donor.json"), &donor.to_json()?)?;
            Ok(Some(TargetField::Donor(Arc::new(donor))))
        }
    }
}

fn solve(config: &RunConfig) -> Result<Report> {
    let out = &config.output.dir;
    create_dir(out)?;
    let mesh = build_mesh(&config.mesh)?;
    mesh.save_native(out.join("mesh.txt"))?;
    let problem = config.problem.problem_config();
    let state = solve_forward(&Discretization::new(mesh), &problem)?;
    let m = state.last_level();
    let mut csv = String::from("level,t,kinetic_energy,nonlinear_iterations,residual\n");
    for k in 0..=m {
        let _ = writeln!(
            csv,
            "{k},{:.6e},{:.12e},{},{:.3e}",
            state.time(k),
            kinetic_energy(&state, k)?,
            state.iterations()[k],
            state.residuals()[k]
        );
        let every = config.output.snapshots;
        if k == m || (every > 0 && k % every == 0) {
            write_vtk(
                state.space(),
                state.velocity(k),
                state.pressure(k),
                out.join(format!("state_{k:04}.vtk")),
            )?;
        }
    }
    write_file(&out.join("solve.csv"), &csv)?;
    Ok(Report {
        summary: format!(
            "solved {} levels on {} nodes; final kinetic energy {:.6e}",
            m,
            state.space().mesh().nodes().len(),
            kinetic_energy(&state, m)?
        ),
    })
}

#[derive(Debug, Serialize)]
struct OptimizeSummary {
    cost: &'static str,
    iterations: usize,
    initial_cost: f64,
    final_cost: f64,
    initial_deviation: RadialDeviation,
    final_deviation: RadialDeviation,
    final_step: Option<f64>,
}

fn optimize(config: &RunConfig) -> Result<Report> {
    let out = &config.output.dir;
    create_dir(out)?;
    let mesh = build_mesh(&config.mesh)?;
    let target = build_target(config, out)?;
    let settings = OptimizerSettings {
        iterations: config.optimizer.iterations,
        controller: config.optimizer.controller.clone(),
        out_dir: Some(out.clone()),
        snapshot_every: config.output.snapshots,
        ..OptimizerSettings::default()
    };
    let problem = config.problem.problem_config();
    let result = optimizer::run(&mesh, &problem, target.as_ref(), config.problem.cost, &settings)?;
    result.mesh.save_native(out.join("mesh_final.txt"))?;
    let summary = OptimizeSummary {
        cost: config.problem.cost.keyword(),
        iterations: result.history.len(),
        initial_cost: result.initial_cost,
        final_cost: result.final_cost,
        initial_deviation: radial_deviation(&mesh),
        final_deviation: radial_deviation(&result.mesh),
        final_step: result.controller.step,
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::InvalidConfig(format!("summary serialization: {e}")))?;
    write_file(&out.join("summary.json"), &json)?;
    Ok(Report {
        summary: format!(
            "J {:.6e} -> {:.6e} over {} iterations; mean radial deviation {:.4} -> {:.4}",
            summary.initial_cost,
            summary.final_cost,
            summary.iterations,
            summary.initial_deviation.mean,
            summary.final_deviation.mean
        ),
    })
}

/// Every probe of the battery against both costs, one CSV row each.
pub fn verification_rows(config: &RunConfig, out: &Path) -> Result<Vec<(CostFunctional, GradientComparison)>> {
    let mesh = build_mesh(&config.mesh)?;
    let target = build_target(config, out)?;
    compare_battery(
        &mesh,
        &config.problem.problem_config(),
        target.as_ref(),
        &[CostFunctional::Tracking, CostFunctional::Vorticity],
        &PerturbationField::battery(config.verify.probe_radius),
        config.verify.eps,
    )
}

fn verify(config: &RunConfig) -> Result<Report, RunError> {
    let out = &config.output.dir;
    create_dir(out)?;
    let rows = verification_rows(config, out)?;
    let mut csv = format!("{}\n", GradientComparison::CSV_HEADER);
    let mut failures = Vec::new();
    for (cost, row) in &rows {
        let labelled = GradientComparison {
            probe: format!("{}:{}", cost.keyword(), row.probe),
            ..row.clone()
        };
        let _ = writeln!(csv, "{}", labelled.csv_row());
        let tolerance = match cost {
            CostFunctional::Tracking => config.verify.tracking_tolerance,
            CostFunctional::Vorticity => config.verify.vorticity_tolerance,
        };
        if !(row.rel_err <= tolerance) {
            failures.push(format!("{} rel_err {:.3e} > {tolerance}", labelled.probe, row.rel_err));
        }
    }
    write_file(&out.join("verify.csv"), &csv)?;
    print!("{csv}");
    if !failures.is_empty() {
        return Err(RunError::Verification(format!("gradient check failed: {}", failures.join("; "))));
    }
    Ok(Report {
        summary: format!("{} gradient comparisons within tolerance", rows.len()),
    })
}

fn mms(config: &RunConfig) -> Result<Report, RunError> {
    let out = &config.output.dir;
    create_dir(out)?;
    let solution = ManufacturedSolution {
        alpha: config.problem.alpha,
        ..ManufacturedSolution::default()
    };
    let study = manufactured_convergence(config.verify.mms_levels, &solution, config.problem.nonlinear)?;
    let csv = study.csv();
    write_file(&out.join("mms.csv"), &csv)?;
    print!("{csv}");
    let vel = study.velocity_orders();
    let pre = study.pressure_orders();
    let worst_v = vel.iter().copied().fold(f64::INFINITY, f64::min);
    let worst_p = pre.iter().copied().fold(f64::INFINITY, f64::min);
    let summary = format!("observed orders: velocity {vel:.3?}, pressure {pre:.3?}");
    if !(worst_v >= config.verify.velocity_order) || !(worst_p >= config.verify.pressure_order) {
        return Err(RunError::Verification(format!(
            "{summary} below floors {} / {}",
            config.verify.velocity_order, config.verify.pressure_order
        )));
    }
    Ok(Report { summary })
}

pub fn run_subcommand(command: Subcommand, config: &RunConfig) -> Result<Report, RunError> {
    match command {
        Subcommand::Solve => Ok(solve(config)?),
        Subcommand::Optimize => Ok(optimize(config)?),
        Subcommand::Verify => verify(config),
        Subcommand::Mms => mms(config),
    }
}
