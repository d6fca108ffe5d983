//! INI run configuration.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use nsshape_core::adjoint::CostFunctional;
use nsshape_core::benchmark;
use nsshape_core::forward::{zero_field, NonlinearMethod, NonlinearSettings, ProblemConfig, VectorField};
use nsshape_core::mesh::MeshFormat;
use nsshape_core::optimizer::StepController;
use nsshape_core::{Error, Result};

/// Named analytic fields selectable by key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldName {
    Zero,
    PaperForce,
    RotatingBc,
}

impl FieldName {
    fn parse(key: &str, word: &str) -> Result<Self> {
        match word {
            "zero" => Ok(FieldName::Zero),
            "paper_f" => Ok(FieldName::PaperForce),
            "rotating_bc" => Ok(FieldName::RotatingBc),
            _ => Err(Error::InvalidConfig(format!(
                "{key}: unknown field `{word}` (expected zero, paper_f or rotating_bc)"
            ))),
        }
    }

    pub fn field(self, alpha: f64) -> VectorField {
        match self {
            FieldName::Zero => zero_field(),
            FieldName::PaperForce => benchmark::paper_forcing(alpha),
            FieldName::RotatingBc => benchmark::rotating_bc(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obstacle {
    Circle { radius: f64 },
    Ellipse { semi_x: f64, semi_y: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    File { path: PathBuf, format: MeshFormat },
    Generated {
        outer_radius: f64,
        obstacle: Obstacle,
        /// Edge length on the obstacle.
        h: f64,
        /// Edge length on the outer circle.
        h_outer: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    None,
    Analytic(FieldName),
    /// Forward run on `mesh`, or a stored donor trajectory.
    Donor { mesh: MeshSource, cache: Option<PathBuf> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSection {
    pub alpha: f64,
    pub t_final: f64,
    pub dt: f64,
    pub body_force: FieldName,
    pub outer_bc: FieldName,
    pub nonlinear: NonlinearSettings,
    pub cost: CostFunctional,
    pub target: TargetSpec,
}

impl ProblemSection {
    pub fn problem_config(&self) -> ProblemConfig {
        ProblemConfig {
            alpha: self.alpha,
            t_final: self.t_final,
            dt: self.dt,
            body_force: self.body_force.field(self.alpha),
            outer_bc: self.outer_bc.field(self.alpha),
            initial_velocity: std::sync::Arc::new(|_| [0.0, 0.0]),
            nonlinear: self.nonlinear,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSection {
    pub iterations: usize,
    pub controller: StepController,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Snapshot cadence; 0 writes only the final state.
    pub snapshots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySection {
    pub eps: f64,
    pub probe_radius: f64,
    pub tracking_tolerance: f64,
    pub vorticity_tolerance: f64,
    pub mms_levels: usize,
    pub velocity_order: f64,
    pub pressure_order: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub mesh: MeshSource,
    pub optimizer: OptimizerSection,
    pub output: OutputSection,
    pub verify: VerifySection,
}

const KEYS: &[(&str, &[&str])] = &[
    (
        "problem",
        &[
            "alpha",
            "t_final",
            "dt",
            "body_force",
            "outer_bc",
            "nonlinear",
            "nonlinear_tolerance",
            "nonlinear_max_iterations",
            "cost",
            "target",
        ],
    ),
    (
        "mesh",
        &[
            "path",
            "format",
            "outer_radius",
            "obstacle",
            "radius",
            "semi_x",
            "semi_y",
            "h",
            "h_outer",
            "donor_path",
            "donor_format",
            "donor_h",
            "donor_h_outer",
            "donor_cache",
        ],
    ),
    (
        "optimizer",
        &[
            "iterations",
            "shrink",
            "growth",
            "alignment",
            "max_retries",
            "initial_fraction",
            "initial_step",
        ],
    ),
    ("output", &["dir", "snapshots"]),
    (
        "verify",
        &[
            "eps",
            "probe_radius",
            "tracking_tolerance",
            "vorticity_tolerance",
            "mms_levels",
            "velocity_order",
            "pressure_order",
        ],
    ),
];

struct Table {
    values: HashMap<(String, String), String>,
    base: PathBuf,
}

impl Table {
    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.values.get(&(section.to_string(), key.to_string())).map(String::as_str)
    }

    fn string_or(&self, section: &str, key: &str, default: &str) -> String {
        self.get(section, key).unwrap_or(default).to_string()
    }

    fn number<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::InvalidConfig(format!("{section}.{key}: cannot parse `{v}` as a number"))),
        }
    }

    fn number_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.number(section, key)?.unwrap_or(default))
    }

    fn required<T: FromStr>(&self, section: &str, key: &str) -> Result<T> {
        self.number(section, key)?
            .ok_or_else(|| Error::InvalidConfig(format!("{section}.{key} is required")))
    }

    fn positive(&self, section: &str, key: &str, default: Option<f64>) -> Result<f64> {
        let v = match default {
            Some(d) => self.number_or(section, key, d)?,
            None => self.required(section, key)?,
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidConfig(format!("{section}.{key} must be positive, got {v}")));
        }
        Ok(v)
    }

    /// Path relative to the config file, required to exist.
    fn existing_path(&self, section: &str, key: &str) -> Result<Option<PathBuf>> {
        let Some(raw) = self.get(section, key) else {
            return Ok(None);
        };
        let p = Path::new(raw);
        let path = if p.is_absolute() { p.to_path_buf() } else { self.base.join(p) };
        if !path.exists() {
            return Err(Error::InvalidConfig(format!("{section}.{key}: {} does not exist", path.display())));
        }
        Ok(Some(path))
    }
}

fn table_from_ini(ini: &Ini, base: PathBuf) -> Result<Table> {
    let known: HashMap<&str, HashSet<&str>> = KEYS.iter().map(|(s, k)| (*s, k.iter().copied().collect())).collect();
    let mut values = HashMap::new();
    for (section, props) in ini.iter() {
        let name = section.unwrap_or("");
        if props.is_empty() && section.is_none() {
            continue;
        }
        let keys = known
            .get(name)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown section [{name}]")))?;
        for (key, value) in props.iter() {
            if !keys.contains(key) {
                return Err(Error::InvalidConfig(format!("unknown key {name}.{key}")));
            }
            if values.insert((name.to_string(), key.to_string()), value.trim().to_string()).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate key {name}.{key}")));
            }
        }
    }
    Ok(Table { values, base })
}

fn nonlinear(t: &Table) -> Result<NonlinearSettings> {
    let defaults = NonlinearSettings::default();
    let method = match t.string_or("problem", "nonlinear", "newton").as_str() {
        "newton" => NonlinearMethod::Newton,
        "picard" => NonlinearMethod::Picard,
        "stokes" => NonlinearMethod::Stokes,
        other => {
            return Err(Error::InvalidConfig(format!(
                "problem.nonlinear: unknown method `{other}` (expected newton, picard or stokes)"
            )))
        }
    };
    let max_iterations = t.number_or("problem", "nonlinear_max_iterations", defaults.max_iterations)?;
    if max_iterations == 0 {
        return Err(Error::InvalidConfig("problem.nonlinear_max_iterations must be at least 1".into()));
    }
    Ok(NonlinearSettings {
        method,
        max_iterations,
        tolerance: t.positive("problem", "nonlinear_tolerance", Some(defaults.tolerance))?,
    })
}

fn obstacle(t: &Table) -> Result<Obstacle> {
    match t.string_or("mesh", "obstacle", "ellipse").as_str() {
        "circle" => Ok(Obstacle::Circle {
            radius: t.positive("mesh", "radius", Some(benchmark::TARGET_RADIUS))?,
        }),
        "ellipse" => Ok(Obstacle::Ellipse {
            semi_x: t.positive("mesh", "semi_x", Some(benchmark::ELLIPSE_SEMI_X))?,
            semi_y: t.positive("mesh", "semi_y", Some(benchmark::ELLIPSE_SEMI_Y))?,
        }),
        other => Err(Error::InvalidConfig(format!(
            "mesh.obstacle: unknown shape `{other}` (expected circle or ellipse)"
        ))),
    }
}

fn format_key(t: &Table, key: &str) -> Result<MeshFormat> {
    t.string_or("mesh", key, "native")
        .parse()
        .map_err(|e: Error| Error::InvalidConfig(format!("mesh.{key}: {e}")))
}

fn generated(t: &Table, obstacle: Obstacle, h_key: &str, h_outer_key: &str, default_h: f64) -> Result<MeshSource> {
    let outer_radius = t.positive("mesh", "outer_radius", Some(benchmark::OUTER_RADIUS))?;
    let h = t.positive("mesh", h_key, Some(default_h))?;
    let h_outer = t.positive("mesh", h_outer_key, Some(h))?;
    if h_outer < h {
        return Err(Error::InvalidConfig(format!("mesh.{h_outer_key} must be at least mesh.{h_key}")));
    }
    let extent = match obstacle {
        Obstacle::Circle { radius } => radius,
        Obstacle::Ellipse { semi_x, semi_y } => semi_x.max(semi_y),
    };
    if extent >= outer_radius {
        return Err(Error::InvalidConfig(format!(
            "mesh: obstacle extent {extent} must be below mesh.outer_radius {outer_radius}"
        )));
    }
    Ok(MeshSource::Generated {
        outer_radius,
        obstacle,
        h,
        h_outer,
    })
}

fn mesh_source(t: &Table) -> Result<MeshSource> {
    if let Some(path) = t.existing_path("mesh", "path")? {
        return Ok(MeshSource::File {
            path,
            format: format_key(t, "format")?,
        });
    }
    generated(t, obstacle(t)?, "h", "h_outer", 0.12)
}

fn target(t: &Table) -> Result<TargetSpec> {
    let word = t.string_or("problem", "target", "donor");
    match word.as_str() {
        "none" => Ok(TargetSpec::None),
        "donor" => {
            let cache = t.existing_path("mesh", "donor_cache")?;
            let mesh = match t.existing_path("mesh", "donor_path")? {
                Some(path) => MeshSource::File {
                    path,
                    format: format_key(t, "donor_format")?,
                },
                None => generated(
                    t,
                    Obstacle::Circle {
                        radius: benchmark::TARGET_RADIUS,
                    },
                    "donor_h",
                    "donor_h_outer",
                    0.07,
                )?,
            };
            Ok(TargetSpec::Donor { mesh, cache })
        }
        other => Ok(TargetSpec::Analytic(FieldName::parse("problem.target", other)?)),
    }
}

fn controller(t: &Table) -> Result<StepController> {
    let d = StepController::default();
    let c = StepController {
        step: t.number("optimizer", "initial_step")?,
        shrink: t.number_or("optimizer", "shrink", d.shrink)?,
        growth: t.number_or("optimizer", "growth", d.growth)?,
        alignment: t.number_or("optimizer", "alignment", d.alignment)?,
        max_retries: t.number_or("optimizer", "max_retries", d.max_retries)?,
        initial_fraction: t.number_or("optimizer", "initial_fraction", d.initial_fraction)?,
    };
    c.validate()
        .map_err(|e| Error::InvalidConfig(format!("[optimizer] {}", e.to_string().trim_start_matches("invalid configuration: "))))?;
    Ok(c)
}

fn build(t: &Table) -> Result<RunConfig> {
    let alpha = t.positive("problem", "alpha", None)?;
    let problem = ProblemSection {
        alpha,
        t_final: t.positive("problem", "t_final", Some(benchmark::T_FINAL))?,
        dt: t.positive("problem", "dt", Some(benchmark::DT))?,
        body_force: FieldName::parse("problem.body_force", &t.string_or("problem", "body_force", "paper_f"))?,
        outer_bc: FieldName::parse("problem.outer_bc", &t.string_or("problem", "outer_bc", "rotating_bc"))?,
        nonlinear: nonlinear(t)?,
        cost: {
            let word = t.string_or("problem", "cost", "tracking");
            CostFunctional::from_keyword(&word).ok_or_else(|| {
                Error::InvalidConfig(format!("problem.cost: unknown cost `{word}` (expected tracking or vorticity)"))
            })?
        },
        target: target(t)?,
    };
    problem
        .problem_config()
        .steps()
        .map_err(|e| Error::InvalidConfig(format!("[problem] {}", e.to_string().trim_start_matches("invalid configuration: "))))?;

    let iterations: usize = t.number_or("optimizer", "iterations", 30)?;
    if iterations == 0 {
        return Err(Error::InvalidConfig("optimizer.iterations must be at least 1".into()));
    }
    let mms_levels: usize = t.number_or("verify", "mms_levels", 3)?;
    if mms_levels < 3 {
        return Err(Error::InvalidConfig(format!("verify.mms_levels must be at least 3, got {mms_levels}")));
    }
    let dir = PathBuf::from(t.string_or("output", "dir", "out"));
    Ok(RunConfig {
        problem,
        mesh: mesh_source(t)?,
        optimizer: OptimizerSection {
            iterations,
            controller: controller(t)?,
        },
        output: OutputSection {
            dir: if dir.is_absolute() { dir } else { t.base.join(dir) },
            snapshots: t.number_or("output", "snapshots", 0)?,
        },
        verify: VerifySection {
            eps: t.positive("verify", "eps", Some(1e-4))?,
            probe_radius: t.positive("verify", "probe_radius", Some(0.7))?,
            tracking_tolerance: t.positive("verify", "tracking_tolerance", Some(0.10))?,
            vorticity_tolerance: t.positive("verify", "vorticity_tolerance", Some(0.15))?,
            mms_levels,
            velocity_order: t.positive("verify", "velocity_order", Some(1.8))?,
            pressure_order: t.positive("verify", "pressure_order", Some(0.9))?,
        },
    })
}

/// Parses configuration text; relative paths resolve against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<RunConfig> {
    let ini = Ini::load_from_str(text).map_err(|e| Error::Parse {
        line: e.line,
        message: e.msg.to_string(),
    })?;
    build(&table_from_ini(&ini, base.to_path_buf())?)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &base)
}
