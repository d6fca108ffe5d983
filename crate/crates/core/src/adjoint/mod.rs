//! Backward-in-time linear adjoint equations for the tracking and vorticity
//! costs, with the forward trajectory as frozen coefficients.

mod target;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use target::{DonorTarget, TargetField, TargetSampler};

use crate::error::{Error, Result};
use crate::fem::{
    apply_dirichlet, assemble_convection, assemble_convection_transposed, p2_values, DirectSolver,
    TaylorHoodSpace,
};
use crate::forward::{Discretization, ProblemConfig, StateTrajectory};
use crate::mesh::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CostFunctional {
    /// `½ ∫∫ |y − y_d|²`.
    Tracking,
    /// `(α/2) ∫∫ |curl y|²`.
    Vorticity,
}

impl CostFunctional {
    pub fn keyword(self) -> &'static str {
        match self {
            CostFunctional::Tracking => "tracking",
            CostFunctional::Vorticity => "vorticity",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        match word.to_ascii_lowercase().as_str() {
            "tracking" | "j1" => Some(CostFunctional::Tracking),
            "vorticity" | "j2" => Some(CostFunctional::Vorticity),
            _ => None,
        }
    }
}

/// How adjoint levels line up with forward levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AdjointPairing {
    /// The step producing `v_k` uses `y_k` and the source at `t_k`; the
    /// gradient pairs `y_k` with `v_k`.
    SameLevel,
    /// The step producing `v_k` uses `y_{k+1}` and the source at `t_{k+1}`;
    /// the gradient pairs `y_k` with `v_{k−1}`. This is the exact dual of
    /// the backward-Euler forward scheme.
    #[default]
    Shifted,
}

/// Adjoint velocity and pressure at levels `0..=M`, with `v_M = 0`.
#[derive(Debug, Clone)]
pub struct AdjointTrajectory {
    disc: Arc<Discretization>,
    cost: CostFunctional,
    pairing: AdjointPairing,
    velocity: Vec<Vec<f64>>,
    pressure: Vec<Vec<f64>>,
}

impl AdjointTrajectory {
    pub fn cost(&self) -> CostFunctional {
        self.cost
    }

    pub fn pairing(&self) -> AdjointPairing {
        self.pairing
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn last_level(&self) -> usize {
        self.velocity.len() - 1
    }

    pub fn velocity(&self, level: usize) -> &[f64] {
        &self.velocity[level]
    }

    pub fn pressure(&self, level: usize) -> &[f64] {
        &self.pressure[level]
    }

    /// Adjoint velocity that pairs with forward level `k` (`1 ≤ k ≤ M`) in
    /// the time-integrated shape gradient.
    pub fn paired_with_state(&self, k: usize) -> &[f64] {
        match self.pairing {
            AdjointPairing::SameLevel => &self.velocity[k],
            AdjointPairing::Shifted => &self.velocity[k - 1],
        }
    }

    /// Multiplies every level by `c` (used to probe linearity).
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for v in out.velocity.iter_mut().chain(out.pressure.iter_mut()) {
            v.iter_mut().for_each(|x| *x *= c);
        }
        out
    }
}

/// Stored adjoint coefficients at `level`.
pub fn evaluate_adjoint(traj: &AdjointTrajectory, level: usize) -> Result<(&[f64], &[f64])> {
    if level > traj.last_level() {
        return Err(Error::LevelOutOfRange {
            level,
            last: traj.last_level(),
        });
    }
    Ok((&traj.velocity[level], &traj.pressure[level]))
}

/// `∫ (y − y_d) · φ_i`, with `y_d` given at the volume quadrature points.
pub(crate) fn tracking_load(space: &TaylorHoodSpace, y: &[f64], target: &[Point]) -> Vec<f64> {
    let rule = space.rule();
    let mut out = vec![0.0; space.n_velocity()];
    for (t, el) in space.elements().iter().enumerate() {
        for (q, (l, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let phi = p2_values(*l);
            let yv = space.velocity_at(y, t, *l);
            let yd = target[t * rule.len() + q];
            let diff = [yv[0] - yd[0], yv[1] - yd[1]];
            let scale = w * 2.0 * el.area;
            for (i, &n) in el.nodes.iter().enumerate() {
                out[2 * n] += scale * phi[i] * diff[0];
                out[2 * n + 1] += scale * phi[i] * diff[1];
            }
        }
    }
    out
}

/// `α ∫ ω(y) curl φ_i`, the derivative of `(α/2) ∫ ω²`.
pub(crate) fn vorticity_load(space: &TaylorHoodSpace, y: &[f64], alpha: f64) -> Vec<f64> {
    let rule = space.rule();
    let mut out = vec![0.0; space.n_velocity()];
    for (t, el) in space.elements().iter().enumerate() {
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let g = el.p2_gradients(*l);
            let d = space.velocity_gradient_at(y, t, *l);
            let omega = d[1][0] - d[0][1];
            let scale = alpha * w * 2.0 * el.area * omega;
            for (i, &n) in el.nodes.iter().enumerate() {
                // curl(ψ e_x) = −∂_y ψ, curl(ψ e_y) = ∂_x ψ
                out[2 * n] -= scale * g[i][1];
                out[2 * n + 1] += scale * g[i][0];
            }
        }
    }
    out
}

/// Source term of the adjoint equation at forward level `k`.
pub(crate) struct AdjointSource<'a> {
    state: &'a StateTrajectory,
    cost: CostFunctional,
    alpha: f64,
    sampler: Option<TargetSampler>,
}

impl<'a> AdjointSource<'a> {
    pub(crate) fn new(
        state: &'a StateTrajectory,
        target: Option<&TargetField>,
        alpha: f64,
        cost: CostFunctional,
    ) -> Result<Self> {
        let sampler = match cost {
            CostFunctional::Tracking => {
                let target = target.ok_or_else(|| {
                    Error::InvalidConfig("tracking cost requires a target velocity".into())
                })?;
                target.check_levels(state.last_level() + 1, state.dt())?;
                Some(target.quadrature_sampler(state.space()))
            }
            CostFunctional::Vorticity => None,
        };
        Ok(Self {
            state,
            cost,
            alpha,
            sampler,
        })
    }

    pub(crate) fn load(&self, k: usize) -> Vec<f64> {
        let space = self.state.space();
        let y = self.state.velocity(k);
        match (&self.sampler, self.cost) {
            (Some(s), CostFunctional::Tracking) => tracking_load(space, y, &s.values(k, self.state.time(k))),
            _ => vorticity_load(space, y, self.alpha),
        }
    }
}

/// Solves the adjoint system backward from `v_M = 0` with the default pairing.
pub fn solve_adjoint(
    state: &StateTrajectory,
    target: Option<&TargetField>,
    config: &ProblemConfig,
    cost: CostFunctional,
) -> Result<AdjointTrajectory> {
    solve_adjoint_with(state, target, config, cost, AdjointPairing::default())
}

/// Solves `(v_k − v_{k+1})/dt − αΔv_k − Dv_k y + (Dy)ᵀ v_k + ∇q_k = source`
/// for `k = M−1, …, 0` with homogeneous Dirichlet data, where the frozen
/// state `y` and the source level follow `pairing`.
pub fn solve_adjoint_with(
    state: &StateTrajectory,
    target: Option<&TargetField>,
    config: &ProblemConfig,
    cost: CostFunctional,
    pairing: AdjointPairing,
) -> Result<AdjointTrajectory> {
    if (config.dt - state.dt()).abs() > 1e-12 * state.dt() {
        return Err(Error::DimensionMismatch(format!(
            "adjoint dt {} differs from state dt {}",
            config.dt,
            state.dt()
        )));
    }
    let disc = state.discretization();
    let space = disc.space();
    let layout = disc.layout();
    let m = state.last_level();
    let nvel = space.n_velocity();
    let source = AdjointSource::new(state, target, config.alpha, cost)?;
    let constraints = disc.velocity_constraints(None)?;

    let mut velocity = vec![vec![0.0; nvel]; m + 1];
    let mut pressure = vec![vec![0.0; space.n_pressure()]; m + 1];
    let mut solver = DirectSolver::new();
    for k in (0..m).rev() {
        let frozen = match pairing {
            AdjointPairing::SameLevel => k,
            AdjointPairing::Shifted => k + 1,
        };
        let y = state.velocity(frozen);
        let transport = assemble_convection(space, y)?;
        let reaction = assemble_convection_transposed(space, y)?;
        let mut matrix = layout.matrix(&[
            (disc.mass(), 1.0 / config.dt),
            (disc.stiffness(), config.alpha),
            (&transport, -1.0),
            (&reaction, 1.0),
        ])?;
        let mut b = disc.mass().mul_vec(&velocity[k + 1]);
        let f = source.load(frozen);
        b.iter_mut().zip(&f).for_each(|(bi, fi)| *bi = *bi / config.dt + fi);
        let mut rhs = layout.rhs(&b, None);
        apply_dirichlet(&mut matrix, &mut rhs, &constraints)?;
        let x = solver.solve(&matrix, &rhs)?;
        let (v, q) = layout.split(&x);
        velocity[k] = v;
        pressure[k] = q;
    }
    Ok(AdjointTrajectory {
        disc: Arc::clone(disc),
        cost,
        pairing,
        velocity,
        pressure,
    })
}
