//! Fixtures shared by the benches.

use nsshape_core::benchmark::{benchmark_problem, ELLIPSE_SEMI_X, ELLIPSE_SEMI_Y, OUTER_RADIUS, TARGET_RADIUS};
use nsshape_core::forward::ProblemConfig;
use nsshape_core::mesh::{generate_graded_annulus_mesh, Circle, Ellipse};
use nsshape_core::TriMesh;

/// Target annulus at the coarse (~125 node) resolution.
pub fn target_mesh() -> TriMesh {
    let circle = Circle {
        center: [0.0, 0.0],
        radius: TARGET_RADIUS,
    };
    generate_graded_annulus_mesh(OUTER_RADIUS, &circle, 0.078, 0.19).expect("target mesh")
}

/// Elliptic start at the coarse resolution.
pub fn ellipse_mesh() -> TriMesh {
    let ellipse = Ellipse {
        center: [0.0, 0.0],
        semi_x: ELLIPSE_SEMI_X,
        semi_y: ELLIPSE_SEMI_Y,
    };
    generate_graded_annulus_mesh(OUTER_RADIUS, &ellipse, 0.08, 0.16).expect("ellipse mesh")
}

/// The recovery problem shortened to `steps` time steps.
pub fn short_problem(alpha: f64, steps: usize) -> ProblemConfig {
    let mut config = benchmark_problem(alpha);
    config.t_final = steps as f64 * config.dt;
    config
}
