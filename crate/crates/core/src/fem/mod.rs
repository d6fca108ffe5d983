//! Taylor-Hood P2/P1 discretization: quadrature, spaces, assembly and the
//! sparse saddle-point solve.

mod assembly;
mod quadrature;
mod solve;
mod space;
mod sparse;

pub use assembly::{
    assemble_convection, assemble_convection_kind, assemble_convection_transposed, assemble_divergence,
    assemble_load, assemble_mass, assemble_pressure_mass, assemble_scalar_mass, assemble_scalar_stiffness,
    assemble_stiffness, pressure_mean_vector, velocity_pattern, ConvectionKind,
};
pub use quadrature::{EdgeRule, QuadratureRule};
pub use solve::{apply_dirichlet, solve_saddle, DirectSolver, DirichletConstraints, LuFactors, SaddleLayout};
pub use space::{p2_values, Element, TaylorHoodSpace};
pub use sparse::{dot, norm2, SparseMatrix, TripletBuilder};
