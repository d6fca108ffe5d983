use std::sync::OnceLock;

use proptest::prelude::*;

use nsshape_core::adjoint::{solve_adjoint, CostFunctional, TargetField};
use nsshape_core::benchmark::benchmark_problem;
use nsshape_core::fem::{apply_dirichlet, assemble_load, solve_saddle};
use nsshape_core::forward::{solve_forward, vector_field, Discretization, NonlinearMethod, ProblemConfig};
use nsshape_core::gradient::{assemble_gradient, eulerian_derivative, evaluate_j1, evaluate_j2, BoundaryGradient};
use nsshape_core::mesh::{generate_graded_annulus_mesh, generate_rectangle_mesh, BoundaryTag, Circle, Ellipse};
use nsshape_core::optimizer::{self, OptimizerSettings, StepController};
use nsshape_core::verification::PerturbationField;
use nsshape_core::{Error, TriMesh};

fn circle_mesh() -> &'static TriMesh {
    static MESH: OnceLock<TriMesh> = OnceLock::new();
    MESH.get_or_init(|| {
        generate_graded_annulus_mesh(
            0.8,
            &Circle {
                center: [0.0, 0.0],
                radius: 0.2,
            },
            0.078,
            0.19,
        )
        .unwrap()
    })
}

fn circle_gradient() -> &'static BoundaryGradient {
    static G: OnceLock<BoundaryGradient> = OnceLock::new();
    G.get_or_init(|| {
        let config = benchmark_problem(0.1);
        let state = solve_forward(&Discretization::new(circle_mesh().clone()), &config).unwrap();
        let adjoint = solve_adjoint(&state, None, &config, CostFunctional::Vorticity).unwrap();
        assemble_gradient(&state, &adjoint, None, &config).unwrap()
    })
}

fn closure_defect(mesh: &TriMesh) -> f64 {
    let n = mesh.compute_normals(BoundaryTag::Obstacle).unwrap();
    let s = n
        .edge_normals
        .iter()
        .zip(&n.edge_lengths)
        .fold([0.0, 0.0], |acc, (nv, l)| [acc[0] + l * nv[0], acc[1] + l * nv[1]]);
    s[0].hypot(s[1])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn morphs_keep_orientation(scale in -0.3f64..0.3, cx in -0.1f64..0.1, cy in -0.1f64..0.1) {
        let mesh = circle_mesh();
        let v = PerturbationField::offset_dilation([cx, cy], 0.6);
        match mesh.displace_by(|x| v.eval(x), scale) {
            Ok(m) => prop_assert!(m.min_signed_area() > 0.0),
            Err(e) => prop_assert!(matches!(e, Error::ReversedTriangle { .. }), "{e:?}"),
        }
    }

    #[test]
    fn native_text_round_trip_is_exact(scale in -0.05f64..0.05) {
        let v = PerturbationField::mode2(0.7);
        let mesh = circle_mesh().displace_by(|x| v.eval(x), scale).unwrap();
        let back = TriMesh::from_native_str(&mesh.to_native_string()).unwrap();
        prop_assert_eq!(back.nodes(), mesh.nodes());
        prop_assert_eq!(back.triangles(), mesh.triangles());
        prop_assert_eq!(back.boundary_edges(), mesh.boundary_edges());
    }

    #[test]
    fn constant_interior_shift_composes_exactly(a in 0i32..16, b in 0i32..16) {
        let mesh = generate_rectangle_mesh([0.0, 0.0], [1.0, 1.0], 4, 4).unwrap();
        let outer = mesh.tag_mask(BoundaryTag::Outer);
        let d: Vec<[f64; 2]> = outer.iter().map(|&o| if o { [0.0, 0.0] } else { [0.0625, -0.03125] }).collect();
        let (a, b) = (a as f64 / 256.0, b as f64 / 256.0);
        let once = mesh.morph(&d, a + b).unwrap();
        let twice = mesh.morph(&d, a).unwrap().morph(&d, b).unwrap();
        prop_assert_eq!(once.nodes(), twice.nodes());
    }

    #[test]
    fn eulerian_derivative_is_linear_in_the_field(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = circle_gradient();
        let mesh = circle_mesh();
        let (v1, v2) = (PerturbationField::radial(0.7), PerturbationField::stretch(0.7));
        let d1 = eulerian_derivative(g, mesh, |x| v1.eval(x));
        let d2 = eulerian_derivative(g, mesh, |x| v2.eval(x));
        let d = eulerian_derivative(g, mesh, |x| {
            let (p, q) = (v1.eval(x), v2.eval(x));
            [a * p[0] + b * q[0], a * p[1] + b * q[1]]
        });
        prop_assert!((d - (a * d1 + b * d2)).abs() <= 1e-13 * (d1.abs() + d2.abs()) * (a.abs() + b.abs() + 1.0));
    }

    #[test]
    fn costs_are_nonnegative(u in -1.0f64..1.0, w in -1.0f64..1.0, alpha in 0.01f64..1.0) {
        let mesh = generate_rectangle_mesh([-1.0, -1.0], [1.0, 1.0], 3, 3).unwrap();
        let mut config = ProblemConfig {
            outer_bc: vector_field(move |x, _| [-w * x[1] + u, w * x[0]]),
            ..ProblemConfig::quiescent(alpha, 0.2, 0.1)
        };
        config.nonlinear.method = NonlinearMethod::Stokes;
        let state = solve_forward(&Discretization::new(mesh), &config).unwrap();
        let target = TargetField::Analytic(vector_field(move |x, t| [u * t, w * x[1]]));
        prop_assert!(evaluate_j1(&state, &target).unwrap() >= 0.0);
        prop_assert!(evaluate_j2(&state, alpha) >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn obstacle_normals_close_up(sx in 0.3f64..0.6, sy in 0.25f64..0.3) {
        let mesh = generate_graded_annulus_mesh(0.8, &Ellipse { center: [0.0, 0.0], semi_x: sx, semi_y: sy }, 0.06, 0.2)
            .unwrap();
        prop_assert!(closure_defect(&mesh) <= 1e-10);
    }

    #[test]
    fn retries_never_accept_an_increase(step in 1e-2f64..1e6) {
        let mesh = circle_mesh();
        let settings = OptimizerSettings {
            iterations: 1,
            controller: StepController { step: Some(step), max_retries: 4, ..StepController::default() },
            ..OptimizerSettings::default()
        };
        match optimizer::run(mesh, &benchmark_problem(0.1), None, CostFunctional::Vorticity, &settings) {
            Ok(r) => {
                prop_assert!(r.final_cost <= r.initial_cost);
                prop_assert_eq!(r.history[0].step == 0.0, r.final_cost == r.initial_cost);
            }
            Err(e) => prop_assert!(matches!(e, Error::MorphExhausted { .. }), "{e:?}"),
        }
    }
}

#[test]
fn stiffness_couples_only_neighbouring_dofs() {
    let disc = Discretization::new(circle_mesh().clone());
    let space = disc.space();
    let mut share = std::collections::HashSet::new();
    for el in space.elements() {
        for &a in &el.nodes {
            for &b in &el.nodes {
                share.insert((a, b));
            }
        }
    }
    for m in [disc.stiffness(), disc.mass()] {
        for (i, j, v) in m.iter() {
            if v != 0.0 {
                assert!(share.contains(&(i / 2, j / 2)), "entry ({i}, {j})");
            }
        }
    }
}

#[test]
fn forward_and_adjoint_runs_are_bit_identical() {
    let config = benchmark_problem(0.1);
    let run = || {
        let state = solve_forward(&Discretization::new(circle_mesh().clone()), &config).unwrap();
        let adjoint = solve_adjoint(&state, None, &config, CostFunctional::Vorticity).unwrap();
        (state, adjoint)
    };
    let (s1, a1) = run();
    let (s2, a2) = run();
    for k in 0..=s1.last_level() {
        assert_eq!(s1.velocity(k), s2.velocity(k));
        assert_eq!(s1.pressure(k), s2.pressure(k));
        assert_eq!(a1.velocity(k), a2.velocity(k));
    }
}

#[test]
fn adjoint_vanishes_on_the_boundary() {
    let config = benchmark_problem(0.1);
    let disc = Discretization::new(circle_mesh().clone());
    let state = solve_forward(&disc, &config).unwrap();
    let adjoint = solve_adjoint(&state, None, &config, CostFunctional::Vorticity).unwrap();
    let space = disc.space();
    let dofs: Vec<usize> = [BoundaryTag::Obstacle, BoundaryTag::Outer]
        .iter()
        .flat_map(|&t| space.constrained_dofs(t))
        .collect();
    for k in 0..=adjoint.last_level() {
        assert!(dofs.iter().all(|&d| adjoint.velocity(k)[d] == 0.0), "level {k}");
    }
}

#[test]
fn adjoint_of_a_resting_state_is_a_backward_stokes_solve() {
    let config = ProblemConfig::quiescent(0.1, 0.5, 0.1);
    let disc = Discretization::new(circle_mesh().clone());
    let state = solve_forward(&disc, &config).unwrap();
    assert!((0..=state.last_level()).all(|k| state.velocity(k).iter().all(|&x| x == 0.0)));
    let yd = |x: [f64; 2], t: f64| [0.3 * x[1] + t, -0.2 * x[0]];
    let target = TargetField::Analytic(vector_field(yd));
    let adjoint = solve_adjoint(&state, Some(&target), &config, CostFunctional::Tracking).unwrap();

    let layout = disc.layout();
    let homogeneous = disc.velocity_constraints(None).unwrap();
    let m = state.last_level();
    let mut v = vec![0.0; disc.space().n_velocity()];
    for k in (0..m).rev() {
        let t = config.time(k + 1);
        let load = assemble_load(disc.space(), |x| yd(x, t));
        let mut b = disc.mass().mul_vec(&v);
        b.iter_mut().zip(&load).for_each(|(bi, li)| *bi = *bi / config.dt - li);
        let mut a = layout.matrix(&[(disc.mass(), 1.0 / config.dt), (disc.stiffness(), config.alpha)]).unwrap();
        let mut rhs = layout.rhs(&b, None);
        apply_dirichlet(&mut a, &mut rhs, &homogeneous).unwrap();
        let x = solve_saddle(&a, &rhs).unwrap();
        v = layout.split(&x).0;
        let diff = v
            .iter()
            .zip(adjoint.velocity(k))
            .fold(0.0f64, |d, (p, q)| d.max((p - q).abs()));
        assert!(diff <= 1e-10, "level {k}: {diff:e}");
    }
}
