use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuRef, LuSymbolicParams, NumericLu, SymbolicLu};
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par};

use crate::error::{Error, Result};
use crate::fem::assembly::{assemble_divergence, pressure_mean_vector, velocity_pattern};
use crate::fem::space::TaylorHoodSpace;
use crate::fem::sparse::{norm2, SparseMatrix, TripletBuilder};

const RESIDUAL_TOLERANCE: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 3;

/// Prescribed values for a set of DOFs.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletConstraints {
    values: Vec<Option<f64>>,
}

impl DirichletConstraints {
    pub fn new(n: usize) -> Self {
        Self {
            values: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(Option::is_none)
    }

    /// Records `dof = value`. Re-inserting the same value is accepted; a
    /// different value is an error.
    pub fn insert(&mut self, dof: usize, value: f64) -> Result<()> {
        let slot = self
            .values
            .get_mut(dof)
            .ok_or_else(|| Error::DimensionMismatch(format!("constraint on DOF {dof} out of range")))?;
        match *slot {
            Some(old) if old != value => Err(Error::ConflictingConstraint {
                dof,
                first: old,
                second: value,
            }),
            _ => {
                *slot = Some(value);
                Ok(())
            }
        }
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut c = Self::new(n);
        for (dof, v) in pairs {
            c.insert(dof, v)?;
        }
        Ok(c)
    }

    pub fn get(&self, dof: usize) -> Option<f64> {
        self.values.get(dof).copied().flatten()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i, v)))
    }

    /// Same DOFs, all values zero.
    pub fn homogeneous(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| v.map(|_| 0.0)).collect(),
        }
    }
}

/// Symmetric elimination: constrained rows and columns are zeroed, the
/// diagonal set to 1, and the right-hand side updated. The sparsity pattern is
/// left unchanged.
pub fn apply_dirichlet(
    matrix: &mut SparseMatrix,
    rhs: &mut [f64],
    constraints: &DirichletConstraints,
) -> Result<()> {
    let n = matrix.nrows();
    if matrix.ncols() != n || rhs.len() != n || constraints.len() > n {
        return Err(Error::DimensionMismatch(format!(
            "system {}x{}, rhs {}, constraints {}",
            n,
            matrix.ncols(),
            rhs.len(),
            constraints.len()
        )));
    }
    let value = |j: usize| constraints.get(j);
    let row_ptr = matrix.row_ptr().to_vec();
    let col_idx = matrix.col_idx().to_vec();
    let vals = matrix.values_mut();
    for i in 0..n {
        let range = row_ptr[i]..row_ptr[i + 1];
        if let Some(g) = value(i) {
            let mut has_diag = false;
            for k in range {
                if col_idx[k] == i {
                    vals[k] = 1.0;
                    has_diag = true;
                } else {
                    vals[k] = 0.0;
                }
            }
            if !has_diag {
                return Err(Error::DimensionMismatch(format!(
                    "constrained DOF {i} has no diagonal entry in the pattern"
                )));
            }
            rhs[i] = g;
        } else {
            for k in range {
                if let Some(g) = value(col_idx[k]) {
                    rhs[i] -= vals[k] * g;
                    vals[k] = 0.0;
                }
            }
        }
    }
    Ok(())
}

/// Sparse direct solver that caches the symbolic factorization for a
/// fixed sparsity pattern.
#[derive(Default)]
pub struct DirectSolver {
    cached: Option<(Vec<usize>, Vec<usize>, Arc<SymbolicLu<usize>>)>,
}

impl std::fmt::Debug for DirectSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirectSolver")
            .field("cached_pattern", &self.cached.is_some())
            .finish()
    }
}

/// Numeric LU factors of one matrix.
pub struct LuFactors {
    symbolic: Arc<SymbolicLu<usize>>,
    numeric: NumericLu<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for LuFactors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuFactors").field("n", &self.n).finish()
    }
}

impl LuFactors {
    /// Plain forward/backward substitution.
    pub fn apply(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        let mut buf = MemBuffer::new(self.symbolic.solve_transpose_in_place_scratch::<f64>(1, Par::Seq));
        LuRef::new_unchecked(&self.symbolic, &self.numeric).solve_transpose_in_place_with_conj(
            Conj::No,
            MatMut::from_column_major_slice_mut(&mut x, self.n, 1),
            Par::Seq,
            MemStack::new(&mut buf),
        );
        x
    }

    /// Solves `A x = b` for the factored `A`, checking
    /// `‖Ax - b‖ ≤ 1e-10 ‖b‖` after up to a few rounds of iterative
    /// refinement.
    pub fn solve(&self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        if a.nrows() != self.n || b.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "factors of size {}, matrix {}x{}, rhs {}",
                self.n,
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; self.n]);
        }
        let mut x = self.apply(b);
        let mut rnorm = f64::INFINITY;
        for _ in 0..=REFINEMENT_STEPS {
            let ax = a.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            rnorm = norm2(&r);
            if !rnorm.is_finite() {
                break;
            }
            if rnorm <= RESIDUAL_TOLERANCE * bnorm {
                return Ok(x);
            }
            let dx = self.apply(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        }
        Err(Error::SolverBreakdown(format!(
            "residual {:.3e} exceeds {:.1e} relative to rhs norm {:.3e}",
            rnorm, RESIDUAL_TOLERANCE, bnorm
        )))
    }
}

impl DirectSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factorize(&mut self, a: &SparseMatrix) -> Result<LuFactors> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!("factorize: matrix {}x{}", n, a.ncols())));
        }
        // CSR arrays of A read as CSC are A^T.
        let symbolic_view = SymbolicSparseColMatRef::new_checked(n, n, a.row_ptr(), None, a.col_idx());
        let reuse = matches!(&self.cached, Some((rp, ci, _)) if rp == a.row_ptr() && ci == a.col_idx());
        if !reuse {
            let params = LuSymbolicParams {
                supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
                ..Default::default()
            };
            let sym = factorize_symbolic_lu(symbolic_view, params)
                .map_err(|e| Error::SolverBreakdown(format!("symbolic factorization: {e:?}")))?;
            self.cached = Some((a.row_ptr().to_vec(), a.col_idx().to_vec(), Arc::new(sym)));
        }
        let symbolic = Arc::clone(&self.cached.as_ref().unwrap().2);
        let at = SparseColMatRef::new(symbolic_view, a.values());
        let mut numeric = NumericLu::<usize, f64>::new();
        let mut buf = MemBuffer::new(symbolic.factorize_numeric_lu_scratch::<f64>(Par::Seq, Default::default()));
        symbolic
            .factorize_numeric_lu(&mut numeric, at, Par::Seq, MemStack::new(&mut buf), Default::default())
            .map_err(|e| Error::SolverBreakdown(format!("numeric factorization: {e:?}")))?;
        Ok(LuFactors { symbolic, numeric, n })
    }

    /// Factors `A` and solves `A x = b` with the residual check of
    /// [`LuFactors::solve`].
    pub fn solve(&mut self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "solve: matrix {}x{}, rhs {}",
                n,
                a.ncols(),
                b.len()
            )));
        }
        if norm2(b) == 0.0 {
            return Ok(vec![0.0; n]);
        }
        self.factorize(a)?.solve(a, b)
    }
}

/// One-shot direct solve.
pub fn solve_saddle(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    DirectSolver::new().solve(a, b)
}

/// Block layout of the velocity-pressure-multiplier system
///
/// ```text
/// [ A   B^T  0 ] [u]   [f]
/// [ B   0    m ] [p] = [g]
/// [ 0   m^T  0 ] [λ]   [0]
/// ```
///
/// with `m` the pressure-mean functional. Every assembled system shares a
/// single sparsity pattern.
#[derive(Debug, Clone)]
pub struct SaddleLayout {
    template: SparseMatrix,
    n_velocity: usize,
    n_pressure: usize,
    divergence: SparseMatrix,
    mean: Vec<f64>,
}

impl SaddleLayout {
    pub fn new(space: &TaylorHoodSpace) -> Self {
        let nvel = space.n_velocity();
        let np = space.n_pressure();
        let n = nvel + np + 1;
        let divergence = assemble_divergence(space);
        let mean = pressure_mean_vector(space);
        let vel = velocity_pattern(space);
        let mut b = TripletBuilder::with_capacity(n, n, vel.nnz() + 2 * divergence.nnz() + 2 * np);
        b.push_block(&vel, 0, 0, 1.0);
        b.push_block(&divergence, nvel, 0, 1.0);
        for (i, j, v) in divergence.iter() {
            b.push(j, nvel + i, v);
        }
        for (i, &m) in mean.iter().enumerate() {
            b.push(nvel + i, n - 1, m);
            b.push(n - 1, nvel + i, m);
        }
        Self {
            template: b.build(),
            n_velocity: nvel,
            n_pressure: np,
            divergence,
            mean,
        }
    }

    pub fn n_velocity(&self) -> usize {
        self.n_velocity
    }

    pub fn n_pressure(&self) -> usize {
        self.n_pressure
    }

    pub fn size(&self) -> usize {
        self.n_velocity + self.n_pressure + 1
    }

    pub fn divergence(&self) -> &SparseMatrix {
        &self.divergence
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Saddle matrix with velocity block `Σ s_k A_k`.
    pub fn matrix(&self, velocity_block: &[(&SparseMatrix, f64)]) -> Result<SparseMatrix> {
        let mut m = self.template.clone();
        for (a, s) in velocity_block {
            if a.nrows() != self.n_velocity || a.ncols() != self.n_velocity {
                return Err(Error::DimensionMismatch(format!(
                    "velocity block {}x{}, expected {}",
                    a.nrows(),
                    a.ncols(),
                    self.n_velocity
                )));
            }
            m.add_scaled(a, *s)?;
        }
        Ok(m)
    }

    /// Stacks a velocity rhs and pressure rhs into a saddle vector.
    pub fn rhs(&self, velocity: &[f64], pressure: Option<&[f64]>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.size());
        out.extend_from_slice(velocity);
        match pressure {
            Some(p) => out.extend_from_slice(p),
            None => out.extend(std::iter::repeat_n(0.0, self.n_pressure)),
        }
        out.push(0.0);
        out
    }

    /// Splits a saddle vector into velocity and pressure parts.
    pub fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (
            x[..self.n_velocity].to_vec(),
            x[self.n_velocity..self.n_velocity + self.n_pressure].to_vec(),
        )
    }
}
