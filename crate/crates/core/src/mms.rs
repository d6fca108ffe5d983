//! Manufactured-solution convergence study on the unit square.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{solve_forward, vector_field, Discretization, NonlinearSettings, ProblemConfig};
use crate::mesh::{generate_rectangle_mesh, Point};

/// Divergence-free velocity `y = A t² (∂ψ/∂y, −∂ψ/∂x)` for the stream
/// function `ψ = X(x) X(y)`, `X(s) = s²(1 − s)²`, with pressure
/// `p = t² cos(πx) cos(πy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSolution {
    pub amplitude: f64,
    pub alpha: f64,
}

fn x0(s: f64) -> f64 {
    s * s * (1.0 - s) * (1.0 - s)
}
fn x1(s: f64) -> f64 {
    2.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
}
fn x2(s: f64) -> f64 {
    2.0 * (1.0 - 6.0 * s + 6.0 * s * s)
}
fn x3(s: f64) -> f64 {
    24.0 * s - 12.0
}

impl Default for ManufacturedSolution {
    fn default() -> Self {
        Self {
            amplitude: 16.0,
            alpha: 0.1,
        }
    }
}

impl ManufacturedSolution {
    pub fn velocity(&self, p: Point, t: f64) -> Point {
        let (x, y) = (p[0], p[1]);
        let b = self.amplitude * t * t;
        [b * x0(x) * x1(y), -b * x1(x) * x0(y)]
    }

    pub fn pressure(&self, p: Point, t: f64) -> f64 {
        t * t * (PI * p[0]).cos() * (PI * p[1]).cos()
    }

    /// `f = ∂_t y − αΔy + (Dy) y + ∇p`.
    pub fn forcing(&self, p: Point, t: f64) -> Point {
        let (x, y) = (p[0], p[1]);
        let a = self.amplitude;
        let b = a * t * t;
        let db = 2.0 * a * t;
        let u = b * x0(x) * x1(y);
        let w = -b * x1(x) * x0(y);
        let ux = b * x1(x) * x1(y);
        let uy = b * x0(x) * x2(y);
        let wx = -b * x2(x) * x0(y);
        let wy = -b * x1(x) * x1(y);
        let lap_u = b * (x2(x) * x1(y) + x0(x) * x3(y));
        let lap_w = -b * (x3(x) * x0(y) + x1(x) * x2(y));
        let px = -t * t * PI * (PI * x).sin() * (PI * y).cos();
        let py = -t * t * PI * (PI * x).cos() * (PI * y).sin();
        [
            db * x0(x) * x1(y) - self.alpha * lap_u + u * ux + w * uy + px,
            -db * x1(x) * x0(y) - self.alpha * lap_w + u * wx + w * wy + py,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub dt: f64,
    pub velocity_error: f64,
    pub pressure_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
}

fn orders(rows: &[ConvergenceRow], pick: impl Fn(&ConvergenceRow) -> f64) -> Vec<f64> {
    rows.windows(2)
        .map(|w| (pick(&w[0]) / pick(&w[1])).ln() / (w[0].h / w[1].h).ln())
        .collect()
}

impl ConvergenceStudy {
    /// Observed velocity orders between successive levels.
    pub fn velocity_orders(&self) -> Vec<f64> {
        orders(&self.rows, |r| r.velocity_error)
    }

    pub fn pressure_orders(&self) -> Vec<f64> {
        orders(&self.rows, |r| r.pressure_error)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("h,dt,velocity_l2,pressure_l2\n");
        for r in &self.rows {
            out.push_str(&format!("{:e},{:e},{:.12e},{:.12e}\n", r.h, r.dt, r.velocity_error, r.pressure_error));
        }
        out
    }
}

/// Solves on `levels` nested `n × n` meshes of the unit square, `n = 4·2^i`,
/// with `Δt = 2h²` up to `T = 1/4`, and reports L2 errors at `T`.
pub fn manufactured_convergence(
    levels: usize,
    solution: &ManufacturedSolution,
    nonlinear: NonlinearSettings,
) -> Result<ConvergenceStudy> {
    if levels < 3 {
        return Err(Error::InvalidConfig(format!("convergence study needs at least 3 levels, got {levels}")));
    }
    let t_final = 0.25;
    let sol = Arc::new(*solution);
    let mut rows = Vec::with_capacity(levels);
    for i in 0..levels {
        let n = 4usize << i;
        let h = 1.0 / n as f64;
        let dt = 2.0 * h * h;
        let mesh = generate_rectangle_mesh([0.0, 0.0], [1.0, 1.0], n, n)?;
        let disc = Discretization::new(mesh);
        let forcing = Arc::clone(&sol);
        let config = ProblemConfig {
            alpha: solution.alpha,
            t_final,
            dt,
            body_force: vector_field(move |x, t| forcing.forcing(x, t)),
            outer_bc: vector_field(|_, _| [0.0, 0.0]),
            initial_velocity: Arc::new(|_| [0.0, 0.0]),
            nonlinear,
        };
        let state = solve_forward(&disc, &config)?;
        let m = state.last_level();
        let t = state.time(m);
        let (y, p) = (state.velocity(m), state.pressure(m));
        let space = disc.space();
        let ve = space
            .integrate(|e, l| {
                let v = space.velocity_at(y, e, l);
                let ex = sol.velocity(space.map_point(e, l), t);
                (v[0] - ex[0]).powi(2) + (v[1] - ex[1]).powi(2)
            })
            .sqrt();
        let pe = space
            .integrate(|e, l| (space.pressure_at(p, e, l) - sol.pressure(space.map_point(e, l), t)).powi(2))
            .sqrt();
        log::info!("mms n={n}: velocity {ve:.3e}, pressure {pe:.3e}");
        rows.push(ConvergenceRow {
            h,
            dt,
            velocity_error: ve,
            pressure_error: pe,
        });
    }
    Ok(ConvergenceStudy { rows })
}
