//! Shape optimization of an obstacle in unsteady incompressible
//! Navier-Stokes flow.

pub mod adjoint;
pub mod benchmark;
pub mod error;
pub mod fem;
pub mod forward;
pub mod gradient;
pub mod mesh;
pub mod optimizer;
mod mms;
pub mod verification;
pub mod vtk;

pub use error::{Error, Result};
pub use fem::{SparseMatrix, TaylorHoodSpace};
pub use mesh::{BoundaryTag, Point, TriMesh};
