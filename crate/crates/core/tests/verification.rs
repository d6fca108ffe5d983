use nsshape_core::adjoint::{CostFunctional, TargetField};
use nsshape_core::benchmark::{benchmark_problem, rotating_bc};
use nsshape_core::mesh::{generate_graded_annulus_mesh, Circle};
use nsshape_core::verification::{
    bump, cost_on_mesh, fd_eulerian_derivative, fd_eulerian_derivatives, relative_error, PerturbationField,
};
use nsshape_core::{Error, TriMesh};

fn circle_mesh() -> TriMesh {
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
}

#[test]
fn zero_field_and_reversed_field() {
    let mesh = circle_mesh();
    let config = benchmark_problem(0.1);
    let zero = fd_eulerian_derivative(&mesh, &config, None, CostFunctional::Vorticity, &PerturbationField::zero(), 1e-3)
        .unwrap();
    assert_eq!(zero, 0.0);
    let v = PerturbationField::radial(0.7);
    let plus = fd_eulerian_derivative(&mesh, &config, None, CostFunctional::Vorticity, &v, 1e-3).unwrap();
    let minus = fd_eulerian_derivative(&mesh, &config, None, CostFunctional::Vorticity, &v.scaled(-1.0), 1e-3).unwrap();
    assert_eq!(plus, -minus);
    assert!(plus != 0.0);
}

#[test]
fn rotation_leaves_a_symmetric_cost_unchanged() {
    let mesh = circle_mesh();
    let config = benchmark_problem(0.1);
    let eps = 1e-4;
    let j = cost_on_mesh(mesh.clone(), &config, None, CostFunctional::Vorticity).unwrap();
    let fd = fd_eulerian_derivative(&mesh, &config, None, CostFunctional::Vorticity, &PerturbationField::tangential(0.7), eps)
        .unwrap();
    let radial =
        fd_eulerian_derivative(&mesh, &config, None, CostFunctional::Vorticity, &PerturbationField::radial(0.7), eps)
            .unwrap();
    assert!(fd.abs() <= 1e-6 * j / eps, "fd {fd:e} J {j:e}");
    assert!(fd.abs() < 1e-3 * radial.abs());
}

#[test]
fn central_differences_converge_quadratically_in_eps() {
    let mesh = circle_mesh();
    let config = benchmark_problem(0.1);
    let target = TargetField::Analytic(rotating_bc());
    let v = PerturbationField::radial(0.7);
    let fd: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&e| fd_eulerian_derivative(&mesh, &config, Some(&target), CostFunctional::Tracking, &v, e).unwrap())
        .collect();
    let ratio = (fd[0] - fd[1]).abs() / (fd[1] - fd[2]).abs();
    let order = ratio.log10();
    assert!(order > 1.5, "observed order {order:.2} from {fd:?}");
}

#[test]
fn shared_solves_match_single_cost_differences() {
    let mesh = circle_mesh();
    let config = benchmark_problem(0.1);
    let target = TargetField::Analytic(rotating_bc());
    let v = PerturbationField::stretch(0.7);
    let costs = [CostFunctional::Tracking, CostFunctional::Vorticity];
    let both = fd_eulerian_derivatives(&mesh, &config, Some(&target), &costs, &v, 1e-4).unwrap();
    for (c, value) in costs.iter().zip(&both) {
        let single = fd_eulerian_derivative(&mesh, &config, Some(&target), *c, &v, 1e-4).unwrap();
        assert_eq!(single, *value);
    }
}

#[test]
fn invalid_steps_are_rejected() {
    let mesh = circle_mesh();
    let config = benchmark_problem(0.1);
    let v = PerturbationField::radial(0.7);
    let err = fd_eulerian_derivative(&mesh, &config, None, CostFunctional::Vorticity, &v, 0.0).unwrap_err();
    assert!(matches!(err, Error::InvalidConfig(_)));
    let err = fd_eulerian_derivative(&mesh, &config, None, CostFunctional::Vorticity, &v, 10.0).unwrap_err();
    assert!(matches!(err, Error::ReversedTriangle { .. }), "{err:?}");
}

#[test]
fn bump_and_relative_error() {
    assert_eq!(bump([0.0, 0.0], 0.7), 1.0);
    assert_eq!(bump([0.7, 0.0], 0.7), 0.0);
    assert!((bump([0.35, 0.0], 0.7) - 0.5625).abs() < 1e-15);
    assert_eq!(relative_error(1.1, 1.0), 0.10000000000000009);
    assert!(relative_error(1.0, 0.0) > 1e11);
}
