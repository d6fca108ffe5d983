use crate::error::Result;
use crate::fem::space::{p2_values, TaylorHoodSpace};
use crate::fem::sparse::{SparseMatrix, TripletBuilder};
use crate::mesh::Point;

/// Loops over elements and quadrature points, handing the kernel the
/// element index, basis values and gradients and the scaled weight
/// `w * 2|T|`.
fn for_each_qp(
    space: &TaylorHoodSpace,
    mut kernel: impl FnMut(usize, [f64; 3], &[f64; 6], &[[f64; 2]; 6], f64),
) {
    let rule = space.rule();
    let phis: Vec<[f64; 6]> = rule.points.iter().map(|l| p2_values(*l)).collect();
    for (t, el) in space.elements().iter().enumerate() {
        for (q, (l, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let grads = el.p2_gradients(*l);
            kernel(t, *l, &phis[q], &grads, w * 2.0 * el.area);
        }
    }
}

fn local_pattern_capacity(space: &TaylorHoodSpace, per_element: usize) -> usize {
    space.elements().len() * per_element
}

/// Scalar P2 mass matrix on P2 nodes.
pub fn assemble_scalar_mass(space: &TaylorHoodSpace) -> SparseMatrix {
    let n = space.n_p2_nodes();
    let mut b = TripletBuilder::with_capacity(n, n, local_pattern_capacity(space, 36));
    for el in space.elements() {
        let mut local = [[0.0; 6]; 6];
        for (l, w) in space.rule().points.iter().zip(&space.rule().weights) {
            let phi = p2_values(*l);
            for i in 0..6 {
                for j in 0..6 {
                    local[i][j] += w * 2.0 * el.area * phi[i] * phi[j];
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                b.push(el.nodes[i], el.nodes[j], local[i][j]);
            }
        }
    }
    b.build()
}

/// Expands a scalar P2 operator to both velocity components.
fn expand_components(scalar: &SparseMatrix) -> SparseMatrix {
    let n = scalar.nrows();
    let mut b = TripletBuilder::with_capacity(2 * n, 2 * n, 2 * scalar.nnz());
    for (i, j, v) in scalar.iter() {
        b.push(2 * i, 2 * j, v);
        b.push(2 * i + 1, 2 * j + 1, v);
    }
    b.build()
}

/// Vector mass matrix `∫ φ_j · φ_i` on velocity DOFs.
pub fn assemble_mass(space: &TaylorHoodSpace) -> SparseMatrix {
    expand_components(&assemble_scalar_mass(space))
}

/// Scalar P2 stiffness `∫ ∇ψ_j · ∇ψ_i`.
pub fn assemble_scalar_stiffness(space: &TaylorHoodSpace) -> SparseMatrix {
    let n = space.n_p2_nodes();
    let mut b = TripletBuilder::with_capacity(n, n, local_pattern_capacity(space, 36));
    let mut local = vec![[[0.0; 6]; 6]; space.elements().len()];
    for_each_qp(space, |t, _, _, g, w| {
        for i in 0..6 {
            for j in 0..6 {
                local[t][i][j] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    });
    for (el, m) in space.elements().iter().zip(&local) {
        for i in 0..6 {
            for j in 0..6 {
                b.push(el.nodes[i], el.nodes[j], m[i][j]);
            }
        }
    }
    b.build()
}

/// Vector stiffness `∫ Dφ_j : Dφ_i` on velocity DOFs.
pub fn assemble_stiffness(space: &TaylorHoodSpace) -> SparseMatrix {
    expand_components(&assemble_scalar_stiffness(space))
}

/// Which trilinear convection operator to assemble for a given wind `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvectionKind {
    /// `∫ (Dφ_j w) · φ_i`.
    Transport,
    /// `∫ (Dw φ_j) · φ_i`, the Newton linearization of `Dy y` in its second slot.
    Reaction,
    /// `∫ ((Dw)^T φ_j) · φ_i`, the transpose of `Reaction`.
    TransposedGradient,
}

/// Assembles the convection operator of `kind` for wind coefficients `wind`.
pub fn assemble_convection_kind(
    space: &TaylorHoodSpace,
    wind: &[f64],
    kind: ConvectionKind,
) -> Result<SparseMatrix> {
    space.check_velocity(wind)?;
    let nvel = space.n_velocity();
    let ne = space.elements().len();
    let mut b = TripletBuilder::with_capacity(nvel, nvel, ne * 144);
    let mut local = [[[[0.0; 2]; 2]; 6]; 6];
    let mut current = usize::MAX;
    let flush = |b: &mut TripletBuilder, t: usize, local: &mut [[[[f64; 2]; 2]; 6]; 6]| {
        let nodes = space.elements()[t].nodes;
        for i in 0..6 {
            for j in 0..6 {
                for c in 0..2 {
                    for d in 0..2 {
                        let v = local[i][j][c][d];
                        if kind != ConvectionKind::Transport || c == d {
                            b.push(2 * nodes[i] + c, 2 * nodes[j] + d, v);
                        }
                    }
                }
            }
        }
        *local = [[[[0.0; 2]; 2]; 6]; 6];
    };
    for_each_qp(space, |t, _, phi, g, w| {
        if t != current {
            if current != usize::MAX {
                flush(&mut b, current, &mut local);
            }
            current = t;
        }
        let nodes = &space.elements()[t].nodes;
        let mut wv = [0.0; 2];
        let mut dw = [[0.0; 2]; 2];
        for k in 0..6 {
            for c in 0..2 {
                let coeff = wind[2 * nodes[k] + c];
                wv[c] += coeff * phi[k];
                dw[c][0] += coeff * g[k][0];
                dw[c][1] += coeff * g[k][1];
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                match kind {
                    ConvectionKind::Transport => {
                        let adv = w * phi[i] * (wv[0] * g[j][0] + wv[1] * g[j][1]);
                        local[i][j][0][0] += adv;
                        local[i][j][1][1] += adv;
                    }
                    ConvectionKind::Reaction => {
                        let s = w * phi[i] * phi[j];
                        for c in 0..2 {
                            for d in 0..2 {
                                local[i][j][c][d] += s * dw[c][d];
                            }
                        }
                    }
                    ConvectionKind::TransposedGradient => {
                        let s = w * phi[i] * phi[j];
                        for c in 0..2 {
                            for d in 0..2 {
                                local[i][j][c][d] += s * dw[d][c];
                            }
                        }
                    }
                }
            }
        }
    });
    if current != usize::MAX {
        flush(&mut b, current, &mut local);
    }
    Ok(b.build())
}

/// `N(w)` with entries `∫ (Dφ_j w) · φ_i`.
pub fn assemble_convection(space: &TaylorHoodSpace, wind: &[f64]) -> Result<SparseMatrix> {
    assemble_convection_kind(space, wind, ConvectionKind::Transport)
}

/// `T(w)` with entries `∫ ((Dw)^T φ_j) · φ_i`.
pub fn assemble_convection_transposed(space: &TaylorHoodSpace, wind: &[f64]) -> Result<SparseMatrix> {
    assemble_convection_kind(space, wind, ConvectionKind::TransposedGradient)
}

/// Divergence operator `B_ij = -∫ q_i div φ_j` (pressure rows, velocity columns).
pub fn assemble_divergence(space: &TaylorHoodSpace) -> SparseMatrix {
    let np = space.n_pressure();
    let nvel = space.n_velocity();
    let mut b = TripletBuilder::with_capacity(np, nvel, local_pattern_capacity(space, 36));
    for_each_qp(space, |t, l, _, g, w| {
        let el = &space.elements()[t];
        let verts = el.vertices();
        for (a, &pv) in verts.iter().enumerate() {
            for j in 0..6 {
                for d in 0..2 {
                    b.push(pv, 2 * el.nodes[j] + d, -w * l[a] * g[j][d]);
                }
            }
        }
    });
    b.build()
}

/// P1 load of the constant 1, `∫ q_i`; its dot with pressure coefficients is `∫ p`.
pub fn pressure_mean_vector(space: &TaylorHoodSpace) -> Vec<f64> {
    let mut out = vec![0.0; space.n_pressure()];
    for (tri, el) in space.mesh().triangles().iter().zip(space.elements()) {
        for &v in tri {
            out[v] += el.area / 3.0;
        }
    }
    out
}

/// P1 mass matrix on pressure DOFs.
pub fn assemble_pressure_mass(space: &TaylorHoodSpace) -> SparseMatrix {
    let np = space.n_pressure();
    let mut b = TripletBuilder::with_capacity(np, np, local_pattern_capacity(space, 9));
    for (tri, el) in space.mesh().triangles().iter().zip(space.elements()) {
        for i in 0..3 {
            for j in 0..3 {
                let v = if i == j { el.area / 6.0 } else { el.area / 12.0 };
                b.push(tri[i], tri[j], v);
            }
        }
    }
    b.build()
}

/// Load vector `∫ f · φ_i` of a vector field.
pub fn assemble_load(space: &TaylorHoodSpace, f: impl Fn(Point) -> Point) -> Vec<f64> {
    let mut out = vec![0.0; space.n_velocity()];
    for_each_qp(space, |t, l, phi, _, w| {
        let fx = f(space.map_point(t, l));
        for (i, &n) in space.elements()[t].nodes.iter().enumerate() {
            out[2 * n] += w * phi[i] * fx[0];
            out[2 * n + 1] += w * phi[i] * fx[1];
        }
    });
    out
}

/// Pattern covering every velocity-velocity coupling (both components of
/// every pair of P2 nodes sharing a triangle), with zero values.
pub fn velocity_pattern(space: &TaylorHoodSpace) -> SparseMatrix {
    let nvel = space.n_velocity();
    let mut b = TripletBuilder::with_capacity(nvel, nvel, space.elements().len() * 144);
    for el in space.elements() {
        for &a in &el.nodes {
            for &c in &el.nodes {
                for i in 0..2 {
                    for j in 0..2 {
                        b.push(2 * a + i, 2 * c + j, 0.0);
                    }
                }
            }
        }
    }
    b.build()
}
