//! Backward-Euler time stepping of the incompressible Navier-Stokes system.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{
    apply_dirichlet, assemble_convection, assemble_convection_kind, assemble_load, assemble_mass,
    assemble_stiffness, dot, norm2, ConvectionKind, DirectSolver, DirichletConstraints, EdgeRule,
    LuFactors, SaddleLayout, SparseMatrix, TaylorHoodSpace,
};
use crate::mesh::{BoundaryTag, Point, TriMesh};

/// A kept Jacobian factorization is refreshed once a nonlinear step fails to
/// reduce the residual by this factor.
const JACOBIAN_REUSE_CONTRACTION: f64 = 0.1;

/// Space-time vector field `f(x, t)`.
pub type VectorField = Arc<dyn Fn(Point, f64) -> Point + Send + Sync>;

/// Space-only vector field.
pub type InitialField = Arc<dyn Fn(Point) -> Point + Send + Sync>;

pub fn vector_field(f: impl Fn(Point, f64) -> Point + Send + Sync + 'static) -> VectorField {
    Arc::new(f)
}

pub fn zero_field() -> VectorField {
    Arc::new(|_, _| [0.0, 0.0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearMethod {
    /// Full Newton linearization of the convective term.
    Newton,
    /// Fixed-point iteration with lagged convecting velocity.
    Picard,
    /// Convective term dropped: one linear unsteady Stokes solve per step.
    Stokes,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearSettings {
    pub method: NonlinearMethod,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for NonlinearSettings {
    fn default() -> Self {
        Self {
            method: NonlinearMethod::Newton,
            max_iterations: 25,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone)]
pub struct ProblemConfig {
    /// Inverse Reynolds number.
    pub alpha: f64,
    pub t_final: f64,
    pub dt: f64,
    pub body_force: VectorField,
    /// Velocity prescribed on the outer boundary.
    pub outer_bc: VectorField,
    pub initial_velocity: InitialField,
    pub nonlinear: NonlinearSettings,
}

impl fmt::Debug for ProblemConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemConfig")
            .field("alpha", &self.alpha)
            .field("t_final", &self.t_final)
            .field("dt", &self.dt)
            .field("nonlinear", &self.nonlinear)
            .finish_non_exhaustive()
    }
}

impl ProblemConfig {
    /// Zero forcing, zero boundary data, zero initial velocity.
    pub fn quiescent(alpha: f64, t_final: f64, dt: f64) -> Self {
        Self {
            alpha,
            t_final,
            dt,
            body_force: zero_field(),
            outer_bc: zero_field(),
            initial_velocity: Arc::new(|_| [0.0, 0.0]),
            nonlinear: NonlinearSettings::default(),
        }
    }

    /// Number of time steps `M = T / dt`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::InvalidConfig(format!("t_final must be positive, got {}", self.t_final)));
        }
        let ratio = self.t_final / self.dt;
        let m = ratio.round();
        if (ratio - m).abs() > 1e-9 * ratio.max(1.0) || m < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "t_final / dt = {ratio} is not a positive integer"
            )));
        }
        if self.nonlinear.max_iterations == 0 || !(self.nonlinear.tolerance > 0.0) {
            return Err(Error::InvalidConfig("nonlinear iteration settings must be positive".into()));
        }
        Ok(m as usize)
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt
    }
}

/// Matrices that depend only on the mesh, shared by forward and adjoint solves.
#[derive(Debug)]
pub struct Discretization {
    space: TaylorHoodSpace,
    layout: SaddleLayout,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
}

impl Discretization {
    pub fn new(mesh: TriMesh) -> Arc<Self> {
        let space = TaylorHoodSpace::new(mesh);
        let layout = SaddleLayout::new(&space);
        let mass = assemble_mass(&space);
        let stiffness = assemble_stiffness(&space);
        Arc::new(Self {
            space,
            layout,
            mass,
            stiffness,
        })
    }

    pub fn space(&self) -> &TaylorHoodSpace {
        &self.space
    }

    pub fn mesh(&self) -> &TriMesh {
        self.space.mesh()
    }

    pub fn layout(&self) -> &SaddleLayout {
        &self.layout
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    /// Dirichlet data on the saddle system at time `t`: `outer` on the outer
    /// boundary, zero on the obstacle.
    pub fn velocity_constraints(&self, outer: Option<(&VectorField, f64)>) -> Result<DirichletConstraints> {
        let mut c = DirichletConstraints::new(self.layout.size());
        let coords = self.space.p2_coords();
        for &n in self.space.boundary_p2_nodes(BoundaryTag::Obstacle) {
            c.insert(2 * n, 0.0)?;
            c.insert(2 * n + 1, 0.0)?;
        }
        for &n in self.space.boundary_p2_nodes(BoundaryTag::Outer) {
            let v = match outer {
                Some((f, t)) => f(coords[n], t),
                None => [0.0, 0.0],
            };
            c.insert(2 * n, v[0])?;
            c.insert(2 * n + 1, v[1])?;
        }
        Ok(c)
    }

    /// Net flux `∮ g · n ds` of a field through the outer boundary, with the
    /// absolute flux `∮ |g · n| ds` for scale.
    pub fn outer_flux(&self, g: &VectorField, t: f64) -> (f64, f64) {
        let rule = EdgeRule::gauss3();
        let nodes = self.mesh().nodes();
        let (mut net, mut abs) = (0.0, 0.0);
        for be in self.mesh().boundary_edges().iter().filter(|e| e.tag == BoundaryTag::Outer) {
            let (a, b) = (nodes[be.nodes[0]], nodes[be.nodes[1]]);
            // fluid on the left, so the outward normal is the right-hand normal
            let n = [b[1] - a[1], a[0] - b[0]];
            for (s, w) in rule.points.iter().zip(&rule.weights) {
                let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                let v = g(x, t);
                let flux = w * (v[0] * n[0] + v[1] * n[1]);
                net += flux;
                abs += flux.abs();
            }
        }
        (net, abs)
    }
}

/// Forward solution at every time level `t_k = k dt`, `k = 0..=M`.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    disc: Arc<Discretization>,
    dt: f64,
    velocity: Vec<Vec<f64>>,
    pressure: Vec<Vec<f64>>,
    iterations: Vec<usize>,
    residuals: Vec<f64>,
}

impl StateTrajectory {
    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn space(&self) -> &TaylorHoodSpace {
        self.disc.space()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Index of the final level, `M`.
    pub fn last_level(&self) -> usize {
        self.velocity.len() - 1
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt
    }

    pub fn velocity(&self, level: usize) -> &[f64] {
        &self.velocity[level]
    }

    pub fn pressure(&self, level: usize) -> &[f64] {
        &self.pressure[level]
    }

    /// Nonlinear iterations used per level (0 for the initial level).
    pub fn iterations(&self) -> &[usize] {
        &self.iterations
    }

    /// Final relative nonlinear residual per level.
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }
}

/// Stored velocity and pressure coefficients at `level`.
pub fn evaluate_state(traj: &StateTrajectory, level: usize) -> Result<(&[f64], &[f64])> {
    if level > traj.last_level() {
        return Err(Error::LevelOutOfRange {
            level,
            last: traj.last_level(),
        });
    }
    Ok((&traj.velocity[level], &traj.pressure[level]))
}

/// `½ yᵀ M y` at `level`.
pub fn kinetic_energy(traj: &StateTrajectory, level: usize) -> Result<f64> {
    let (y, _) = evaluate_state(traj, level)?;
    Ok(0.5 * traj.disc.mass().bilinear(y, y))
}

fn check_outer_flux(disc: &Discretization, config: &ProblemConfig, t: f64) -> Result<()> {
    let (net, abs) = disc.outer_flux(&config.outer_bc, t);
    if net.abs() > 1e-8 * abs.max(1e-300) && net.abs() > 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "outer boundary data has net flux {net:e} at t = {t} (must vanish)"
        )));
    }
    Ok(())
}

/// Integrates from `t = 0` to `T` with backward Euler, storing every level.
pub fn solve_forward(disc: &Arc<Discretization>, config: &ProblemConfig) -> Result<StateTrajectory> {
    let m = config.steps()?;
    let space = disc.space();
    let layout = disc.layout();
    let nvel = space.n_velocity();

    let mut y0 = space.interpolate(|x| (config.initial_velocity)(x));
    for (dof, v) in disc.velocity_constraints(Some((&config.outer_bc, 0.0)))?.iter() {
        y0[dof] = v;
    }
    let mut velocity = vec![y0];
    let mut pressure = vec![vec![0.0; space.n_pressure()]];
    let mut iterations = vec![0];
    let mut residuals = vec![0.0];
    let mut solver = DirectSolver::new();

    let base = layout.matrix(&[(disc.mass(), 1.0 / config.dt), (disc.stiffness(), config.alpha)])?;

    for k in 1..=m {
        let t = config.time(k);
        check_outer_flux(disc, config, t)?;
        let constraints = disc.velocity_constraints(Some((&config.outer_bc, t)))?;
        let homogeneous = constraints.homogeneous();
        let y_prev = &velocity[k - 1];
        let force = assemble_load(space, |x| (config.body_force)(x, t));
        let mut b_vel = disc.mass().mul_vec(y_prev);
        b_vel.iter_mut().zip(&force).for_each(|(b, f)| *b = *b / config.dt + f);

        // iterate on the full saddle vector (y, p, λ)
        let mut x = vec![0.0; layout.size()];
        x[..nvel].copy_from_slice(y_prev);
        x[nvel..nvel + space.n_pressure()].copy_from_slice(&pressure[k - 1]);
        for (dof, v) in constraints.iter() {
            x[dof] = v;
        }

        let mut reference = norm2(&b_vel);
        let mut converged = None;
        let mut last_residual = f64::INFINITY;
        // factored Jacobian, kept while each step cuts the residual tenfold
        let mut factored: Option<(SparseMatrix, LuFactors)> = None;
        let mut previous_rnorm = f64::INFINITY;
        for it in 0..=config.nonlinear.max_iterations {
            let y = &x[..nvel];
            let conv = match config.nonlinear.method {
                NonlinearMethod::Stokes => None,
                _ => Some(assemble_convection(space, y)?),
            };
            let operator = match &conv {
                Some(n) => {
                    let mut a = base.clone();
                    a.add_scaled(n, 1.0)?;
                    a
                }
                None => base.clone(),
            };
            let mut residual = operator.mul_vec(&x);
            residual[..nvel].iter_mut().zip(&b_vel).for_each(|(r, b)| *r -= b);
            for (dof, _) in constraints.iter() {
                residual[dof] = 0.0;
            }
            let rnorm = norm2(&residual);
            if it == 0 {
                reference = reference.max(rnorm);
            }
            last_residual = if reference > 0.0 { rnorm / reference } else { 0.0 };
            if rnorm <= config.nonlinear.tolerance * reference {
                converged = Some(it);
                break;
            }
            if it == config.nonlinear.max_iterations {
                break;
            }
            let stale = match config.nonlinear.method {
                NonlinearMethod::Stokes => false,
                _ => rnorm > JACOBIAN_REUSE_CONTRACTION * previous_rnorm,
            };
            if factored.is_none() || stale {
                let mut jacobian = operator;
                if config.nonlinear.method == NonlinearMethod::Newton {
                    let reaction = assemble_convection_kind(space, y, ConvectionKind::Reaction)?;
                    jacobian.add_scaled(&reaction, 1.0)?;
                }
                let mut scratch = vec![0.0; jacobian.nrows()];
                apply_dirichlet(&mut jacobian, &mut scratch, &homogeneous)?;
                let lu = solver.factorize(&jacobian)?;
                factored = Some((jacobian, lu));
            }
            previous_rnorm = rnorm;
            let (jacobian, lu) = factored.as_ref().unwrap();
            let rhs: Vec<f64> = residual.iter().map(|r| -r).collect();
            let delta = lu.solve(jacobian, &rhs)?;
            x.iter_mut().zip(&delta).for_each(|(xi, di)| *xi += di);
        }
        let Some(its) = converged else {
            return Err(Error::NonlinearDivergence {
                level: k,
                residual: last_residual,
                iterations: config.nonlinear.max_iterations,
            });
        };
        log::debug!("level {k}: {its} nonlinear iterations, residual {last_residual:.2e}");
        let (y, p) = layout.split(&x);
        velocity.push(y);
        pressure.push(p);
        iterations.push(its);
        residuals.push(last_residual);
    }
    Ok(StateTrajectory {
        disc: Arc::clone(disc),
        dt: config.dt,
        velocity,
        pressure,
        iterations,
        residuals,
    })
}

/// `∫ p` for P1 pressure coefficients.
pub fn pressure_mean(disc: &Discretization, p: &[f64]) -> f64 {
    dot(disc.layout().mean(), p)
}

/// Discrete weak divergence `B y`.
pub fn divergence_residual(disc: &Discretization, y: &[f64]) -> Vec<f64> {
    disc.layout().divergence().mul_vec(y)
}
