use std::sync::Arc;

use approx::assert_relative_eq;
use nsshape_core::fem::{assemble_mass, assemble_scalar_mass, assemble_scalar_stiffness, assemble_stiffness};
use nsshape_core::forward::{solve_forward, vector_field, Discretization, ProblemConfig};
use nsshape_core::mesh::{generate_graded_annulus_mesh, generate_rectangle_mesh, Circle};
use nsshape_core::{TaylorHoodSpace, TriMesh};

fn annulus(h_in: f64, h_out: f64) -> TriMesh {
    generate_graded_annulus_mesh(
        0.8,
        &Circle {
            center: [0.0, 0.0],
            radius: 0.2,
        },
        h_in,
        h_out,
    )
    .unwrap()
}

/// `∫ x²` over the polygonal mesh, triangle by triangle.
fn second_moment(mesh: &TriMesh) -> f64 {
    (0..mesh.triangles().len())
        .map(|t| {
            let [a, b, c] = mesh.triangle_points(t);
            let (x1, x2, x3) = (a[0], b[0], c[0]);
            mesh.triangle_area(t) / 6.0 * (x1 * x1 + x2 * x2 + x3 * x3 + x1 * x2 + x2 * x3 + x3 * x1)
        })
        .sum()
}

#[test]
fn scalar_mass_reproduces_area_and_moments() {
    let mesh = annulus(0.07, 0.15);
    let space = TaylorHoodSpace::new(mesh.clone());
    let m = assemble_scalar_mass(&space);
    let ones = vec![1.0; space.n_p2_nodes()];
    let x: Vec<f64> = space.p2_coords().iter().map(|p| p[0]).collect();
    assert_relative_eq!(m.bilinear(&ones, &ones), mesh.area(), max_relative = 1e-12);
    assert_relative_eq!(m.bilinear(&x, &x), second_moment(&mesh), max_relative = 1e-12);
    assert!(m.is_symmetric(1e-14));
}

#[test]
fn vector_mass_acts_componentwise() {
    let mesh = annulus(0.07, 0.15);
    let space = TaylorHoodSpace::new(mesh.clone());
    let m = assemble_mass(&space);
    let ex = space.interpolate(|_| [1.0, 0.0]);
    let ey = space.interpolate(|_| [0.0, 1.0]);
    assert_relative_eq!(m.bilinear(&ex, &ex), mesh.area(), max_relative = 1e-12);
    assert!(m.bilinear(&ex, &ey).abs() < 1e-14);
}

#[test]
fn stiffness_of_linear_fields() {
    let mesh = generate_rectangle_mesh([0.0, 0.0], [2.0, 1.0], 6, 4).unwrap();
    let space = TaylorHoodSpace::new(mesh);
    let k = assemble_scalar_stiffness(&space);
    let x: Vec<f64> = space.p2_coords().iter().map(|p| p[0]).collect();
    let y: Vec<f64> = space.p2_coords().iter().map(|p| p[1]).collect();
    assert_relative_eq!(k.bilinear(&x, &x), 2.0, max_relative = 1e-12);
    assert!(k.bilinear(&x, &y).abs() < 1e-12);
    let ones = vec![1.0; space.n_p2_nodes()];
    assert!(k.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
    let kv = assemble_stiffness(&space);
    let rot = space.interpolate(|p| [-p[1], p[0]]);
    assert_relative_eq!(kv.bilinear(&rot, &rot), 4.0, max_relative = 1e-12);
}

/// Circular Couette flow between a fixed inner cylinder and an outer one
/// rotating at angular speed `w`.
fn couette(p: [f64; 2], w: f64) -> [f64; 2] {
    let (r1, r2) = (0.2f64, 0.8f64);
    let a = w * r2 * r2 / (r2 * r2 - r1 * r1);
    let b = -w * r1 * r1 * r2 * r2 / (r2 * r2 - r1 * r1);
    let r = p[0].hypot(p[1]);
    let ut = a + b / (r * r);
    [-ut * p[1], ut * p[0]]
}

#[test]
fn steady_couette_flow() {
    let w = 0.5;
    let mut errors = Vec::new();
    for h in [0.06, 0.03] {
        let disc = Discretization::new(annulus(h, 2.0 * h));
        let config = ProblemConfig {
            outer_bc: vector_field(move |x, _| [-w * x[1], w * x[0]]),
            initial_velocity: Arc::new(move |x| couette(x, w)),
            ..ProblemConfig::quiescent(0.1, 20.0, 5.0)
        };
        let state = solve_forward(&disc, &config).unwrap();
        let y = state.velocity(state.last_level());
        let space = disc.space();
        let err = space
            .integrate(|t, l| {
                let v = space.velocity_at(y, t, l);
                let e = couette(space.map_point(t, l), w);
                (v[0] - e[0]).powi(2) + (v[1] - e[1]).powi(2)
            })
            .sqrt();
        let norm = space
            .integrate(|t, l| {
                let e = couette(space.map_point(t, l), w);
                e[0] * e[0] + e[1] * e[1]
            })
            .sqrt();
        errors.push(err / norm);
    }
    assert!(errors[0] < 5e-3, "{errors:?}");
    assert!(errors[1] < errors[0] / 2.0, "{errors:?}");
}
