use criterion::{criterion_group, criterion_main, Criterion};

use nsshape_bench::{ellipse_mesh, short_problem, target_mesh};
use nsshape_core::adjoint::{solve_adjoint, CostFunctional, TargetField};
use nsshape_core::benchmark::rotating_bc;
use nsshape_core::fem::{assemble_mass, assemble_stiffness, TaylorHoodSpace};
use nsshape_core::forward::{solve_forward, Discretization};
use nsshape_core::gradient::assemble_gradient;
use nsshape_core::mesh::{generate_graded_annulus_mesh, Circle};
use nsshape_core::optimizer::smooth_gradient;

fn mesh_generation(c: &mut Criterion) {
    let circle = Circle {
        center: [0.0, 0.0],
        radius: 0.2,
    };
    c.bench_function("generate_graded_annulus", |b| {
        b.iter(|| generate_graded_annulus_mesh(0.8, &circle, 0.039, 0.095).unwrap())
    });
}

fn assembly(c: &mut Criterion) {
    let mesh = target_mesh().refine_uniform(|_, p| p).unwrap();
    let space = TaylorHoodSpace::new(mesh);
    c.bench_function("assemble_stiffness", |b| b.iter(|| assemble_stiffness(&space)));
    c.bench_function("assemble_mass", |b| b.iter(|| assemble_mass(&space)));
}

fn forward_and_adjoint(c: &mut Criterion) {
    let config = short_problem(0.1, 4);
    let disc = Discretization::new(ellipse_mesh());
    let target = TargetField::Analytic(rotating_bc());
    c.bench_function("solve_forward_4_steps", |b| b.iter(|| solve_forward(&disc, &config).unwrap()));
    let state = solve_forward(&disc, &config).unwrap();
    c.bench_function("solve_adjoint_4_steps", |b| {
        b.iter(|| solve_adjoint(&state, Some(&target), &config, CostFunctional::Tracking).unwrap())
    });
    let adjoint = solve_adjoint(&state, Some(&target), &config, CostFunctional::Tracking).unwrap();
    let gradient = assemble_gradient(&state, &adjoint, Some(&target), &config).unwrap();
    c.bench_function("smooth_gradient", |b| {
        b.iter(|| smooth_gradient(disc.space(), &gradient).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = mesh_generation, assembly, forward_and_adjoint
}
criterion_main!(benches);
