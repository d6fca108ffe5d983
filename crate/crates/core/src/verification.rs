//! Finite-difference checks of the adjoint shape gradient.

use std::fmt;
use std::sync::Arc;

use crate::adjoint::{solve_adjoint_with, AdjointPairing, CostFunctional, TargetField};
use crate::error::Result;
use crate::forward::{solve_forward, Discretization, ProblemConfig};
use crate::gradient::{assemble_gradient, eulerian_derivative, evaluate_cost, BoundaryGradient};
use crate::mesh::{Point, TriMesh};

pub use crate::mms::{manufactured_convergence, ConvergenceRow, ConvergenceStudy, ManufacturedSolution};

/// Relative errors are taken against `max(|fd|, REL_ERR_FLOOR)`.
pub const REL_ERR_FLOOR: f64 = 1e-12;

const BATTERY_OFFSET: Point = [0.1, 0.05];

/// Autonomous domain velocity used to perturb the mesh.
#[derive(Clone)]
pub struct PerturbationField {
    pub name: String,
    field: Arc<dyn Fn(Point) -> Point + Send + Sync>,
}

impl fmt::Debug for PerturbationField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PerturbationField({})", self.name)
    }
}

/// `max(0, 1 − r²/R²)²`, exactly zero for `r² ≥ R²(1 − 1e-9)`.
pub fn bump(x: Point, radius: f64) -> f64 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let cut = radius * radius;
    if r2 >= cut * (1.0 - 1e-9) {
        0.0
    } else {
        let s = 1.0 - r2 / cut;
        s * s
    }
}

impl PerturbationField {
    pub fn new(name: impl Into<String>, f: impl Fn(Point) -> Point + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            field: Arc::new(f),
        }
    }

    pub fn eval(&self, x: Point) -> Point {
        (self.field)(x)
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| [0.0, 0.0])
    }

    /// `φ(r) (x, y)`.
    pub fn radial(radius: f64) -> Self {
        Self::new("radial", move |x| {
            let b = bump(x, radius);
            [b * x[0], b * x[1]]
        })
    }

    /// `φ(r) (1, 0)`.
    pub fn translation(radius: f64) -> Self {
        Self::new("translation", move |x| [bump(x, radius), 0.0])
    }

    /// `φ(r) (x, −y)`.
    pub fn mode2(radius: f64) -> Self {
        Self::new("mode2", move |x| {
            let b = bump(x, radius);
            [b * x[0], -b * x[1]]
        })
    }

    /// `φ(r) (−y, x)`.
    pub fn tangential(radius: f64) -> Self {
        Self::new("tangential", move |x| {
            let b = bump(x, radius);
            [-b * x[1], b * x[0]]
        })
    }

    /// `φ(r) (x, 0)`.
    pub fn stretch(radius: f64) -> Self {
        Self::new("stretch", move |x| [bump(x, radius) * x[0], 0.0])
    }

    /// `φ(|x − c|) (x − c)` with bump radius `radius`.
    pub fn offset_dilation(center: Point, radius: f64) -> Self {
        Self::new("offset_dilation", move |x| {
            let d = [x[0] - center[0], x[1] - center[1]];
            let b = bump(d, radius);
            [b * d[0], b * d[1]]
        })
    }

    /// Scaled copy `c V`.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = Arc::clone(&self.field);
        Self::new(format!("{}*{}", c, self.name), move |x| {
            let v = inner(x);
            [c * v[0], c * v[1]]
        })
    }

    /// The three probes used to check the gradient around an obstacle
    /// centred at the origin. Each moves the obstacle with nonzero net
    /// flux; the offset probe uses a support of radius `0.85 radius`.
    pub fn battery(radius: f64) -> Vec<Self> {
        vec![
            Self::radial(radius),
            Self::stretch(radius),
            Self::offset_dilation(BATTERY_OFFSET, 0.85 * radius),
        ]
    }
}

/// Cost of the full pipeline on `mesh`.
pub fn cost_on_mesh(
    mesh: TriMesh,
    config: &ProblemConfig,
    target: Option<&TargetField>,
    cost: CostFunctional,
) -> Result<f64> {
    let disc = Discretization::new(mesh);
    let state = solve_forward(&disc, config)?;
    evaluate_cost(&state, target, config, cost)
}

fn costs_on_mesh(
    mesh: TriMesh,
    config: &ProblemConfig,
    target: Option<&TargetField>,
    costs: &[CostFunctional],
) -> Result<Vec<f64>> {
    let disc = Discretization::new(mesh);
    let state = solve_forward(&disc, config)?;
    costs.iter().map(|&c| evaluate_cost(&state, target, config, c)).collect()
}

/// Central difference `[J(x + εV) − J(x − εV)] / 2ε` with nodes moved along
/// `V` and the topology fixed.
pub fn fd_eulerian_derivative(
    mesh: &TriMesh,
    config: &ProblemConfig,
    target: Option<&TargetField>,
    cost: CostFunctional,
    v: &PerturbationField,
    eps: f64,
) -> Result<f64> {
    Ok(fd_eulerian_derivatives(mesh, config, target, &[cost], v, eps)?[0])
}

/// [`fd_eulerian_derivative`] for several costs from the same two forward
/// solves.
pub fn fd_eulerian_derivatives(
    mesh: &TriMesh,
    config: &ProblemConfig,
    target: Option<&TargetField>,
    costs: &[CostFunctional],
    v: &PerturbationField,
    eps: f64,
) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return Err(crate::Error::InvalidConfig(format!("finite-difference step must be positive, got {eps}")));
    }
    let plus = mesh.displace_by(|x| v.eval(x), eps)?;
    let minus = mesh.displace_by(|x| v.eval(x), -eps)?;
    let jp = costs_on_mesh(plus, config, target, costs)?;
    let jm = costs_on_mesh(minus, config, target, costs)?;
    Ok(jp.iter().zip(&jm).map(|(p, m)| (p - m) / (2.0 * eps)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientComparison {
    pub probe: String,
    pub eps: f64,
    pub adjoint: f64,
    pub fd: f64,
    pub rel_err: f64,
}

impl GradientComparison {
    pub const CSV_HEADER: &'static str = "probe,eps,adjoint,fd,rel_err";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:.12e},{:.12e},{:.6e}",
            self.probe, self.eps, self.adjoint, self.fd, self.rel_err
        )
    }
}

pub fn relative_error(adjoint: f64, fd: f64) -> f64 {
    (adjoint - fd).abs() / fd.abs().max(REL_ERR_FLOOR)
}

/// Adjoint gradient on a fixed mesh, reusable across probes.
#[derive(Debug, Clone)]
pub struct GradientCheck {
    mesh: TriMesh,
    config: ProblemConfig,
    target: Option<TargetField>,
    cost: CostFunctional,
    gradient: BoundaryGradient,
    value: f64,
}

impl GradientCheck {
    pub fn new(
        mesh: &TriMesh,
        config: &ProblemConfig,
        target: Option<&TargetField>,
        cost: CostFunctional,
        pairing: AdjointPairing,
    ) -> Result<Self> {
        let disc = Discretization::new(mesh.clone());
        let state = solve_forward(&disc, config)?;
        let value = evaluate_cost(&state, target, config, cost)?;
        let adjoint = solve_adjoint_with(&state, target, config, cost, pairing)?;
        let gradient = assemble_gradient(&state, &adjoint, target, config)?;
        Ok(Self {
            mesh: mesh.clone(),
            config: config.clone(),
            target: target.cloned(),
            cost,
            gradient,
            value,
        })
    }

    pub fn gradient(&self) -> &BoundaryGradient {
        &self.gradient
    }

    /// Cost on the unperturbed mesh.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn adjoint_derivative(&self, v: &PerturbationField) -> f64 {
        eulerian_derivative(&self.gradient, &self.mesh, |x| v.eval(x))
    }

    pub fn compare(&self, v: &PerturbationField, eps: f64) -> Result<GradientComparison> {
        let adjoint = self.adjoint_derivative(v);
        let fd = fd_eulerian_derivative(&self.mesh, &self.config, self.target.as_ref(), self.cost, v, eps)?;
        Ok(GradientComparison {
            probe: v.name.clone(),
            eps,
            adjoint,
            fd,
            rel_err: relative_error(adjoint, fd),
        })
    }
}

/// Every probe against every cost, sharing the forward solves between costs.
/// Rows come out probe-major, costs in the given order.
pub fn compare_battery(
    mesh: &TriMesh,
    config: &ProblemConfig,
    target: Option<&TargetField>,
    costs: &[CostFunctional],
    probes: &[PerturbationField],
    eps: f64,
) -> Result<Vec<(CostFunctional, GradientComparison)>> {
    let disc = Discretization::new(mesh.clone());
    let state = solve_forward(&disc, config)?;
    let gradients = costs
        .iter()
        .map(|&c| {
            let adjoint = solve_adjoint_with(&state, target, config, c, AdjointPairing::default())?;
            assemble_gradient(&state, &adjoint, target, config)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(costs.len() * probes.len());
    for v in probes {
        let fd = fd_eulerian_derivatives(mesh, config, target, costs, v, eps)?;
        for ((&c, g), fd) in costs.iter().zip(&gradients).zip(fd) {
            let adjoint = eulerian_derivative(g, mesh, |x| v.eval(x));
            rows.push((
                c,
                GradientComparison {
                    probe: v.name.clone(),
                    eps,
                    adjoint,
                    fd,
                    rel_err: relative_error(adjoint, fd),
                },
            ));
        }
    }
    Ok(rows)
}

/// Adjoint versus finite-difference Eulerian derivative for one probe.
pub fn compare_gradient(
    mesh: &TriMesh,
    config: &ProblemConfig,
    target: Option<&TargetField>,
    cost: CostFunctional,
    v: &PerturbationField,
    eps: f64,
) -> Result<GradientComparison> {
    GradientCheck::new(mesh, config, target, cost, AdjointPairing::default())?.compare(v, eps)
}
