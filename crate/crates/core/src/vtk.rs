//! Legacy ASCII VTK snapshots.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::TaylorHoodSpace;

fn g9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let s = format!("{:.8e}", x);
    let (mantissa, exponent) = s.split_once('e').unwrap();
    let exponent: i32 = exponent.parse().unwrap();
    if (-5..9).contains(&exponent) {
        let decimals = (8 - exponent).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{exponent}")
    }
}

/// Vertex values of a P2 velocity and P1 pressure as an unstructured grid.
pub fn vtk_string(space: &TaylorHoodSpace, velocity: &[f64], pressure: &[f64]) -> Result<String> {
    space.check_velocity(velocity)?;
    if pressure.len() != space.n_pressure() {
        return Err(Error::DimensionMismatch(format!(
            "pressure has {} entries, space has {}",
            pressure.len(),
            space.n_pressure()
        )));
    }
    let mesh = space.mesh();
    let nv = mesh.nodes().len();
    let nt = mesh.triangles().len();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\nnsshape snapshot\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {nv} double");
    for p in mesh.nodes() {
        let _ = writeln!(out, "{} {} 0", g9(p[0]), g9(p[1]));
    }
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "POINT_DATA {nv}");
    out.push_str("VECTORS velocity double\n");
    for i in 0..nv {
        let _ = writeln!(out, "{} {} 0", g9(velocity[2 * i]), g9(velocity[2 * i + 1]));
    }
    out.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    for p in pressure {
        let _ = writeln!(out, "{}", g9(*p));
    }
    Ok(out)
}

pub fn write_vtk(space: &TaylorHoodSpace, velocity: &[f64], pressure: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = vtk_string(space, velocity, pressure)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
