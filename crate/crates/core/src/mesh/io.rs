//! Native text and Gmsh MSH 2.2 (ASCII, read-only) mesh files.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::{BoundaryTag, Point, TriMesh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Native,
    GmshMsh2,
}

impl FromStr for MeshFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "native" | "native-text" | "txt" => Ok(MeshFormat::Native),
            "gmsh" | "msh" | "msh2" | "gmsh-msh2-ascii" => Ok(MeshFormat::GmshMsh2),
            other => Err(Error::InvalidConfig(format!("unknown mesh format `{other}`"))),
        }
    }
}

/// Loads a mesh that must carry both an OBSTACLE and an OUTER boundary.
pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mesh = match format {
        MeshFormat::Native => TriMesh::from_native_str(&text)?,
        MeshFormat::GmshMsh2 => TriMesh::from_gmsh_str(&text)?,
    };
    if !mesh.has_tag(BoundaryTag::Obstacle) {
        return Err(Error::MissingTag(BoundaryTag::Obstacle));
    }
    Ok(mesh)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    /// Next non-blank line.
    fn next_line(&mut self) -> Result<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            if !l.trim().is_empty() {
                return Ok(l.trim());
            }
        }
        Err(Error::Parse {
            line: self.line + 1,
            message: "unexpected end of file".into(),
        })
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn header(&mut self, keyword: &str) -> Result<usize> {
        let l = self.next_line()?;
        let mut it = l.split_whitespace();
        if it.next() != Some(keyword) {
            return Err(self.err(format!("expected `{keyword} <count>`")));
        }
        let count = it
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| self.err(format!("bad {keyword} count")))?;
        Ok(count)
    }

    fn fields<T: FromStr>(&mut self, n: usize) -> Result<Vec<T>> {
        let l = self.next_line()?;
        let parsed: Vec<T> = l
            .split_whitespace()
            .map(|w| w.parse::<T>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| self.err(format!("cannot parse `{l}`")))?;
        if parsed.len() != n {
            return Err(self.err(format!("expected {n} fields, found {}", parsed.len())));
        }
        Ok(parsed)
    }
}

impl TriMesh {
    pub fn from_native_str(text: &str) -> Result<TriMesh> {
        let mut lines = Lines::new(text);
        let n = lines.header("NODES")?;
        let mut nodes = Vec::with_capacity(n);
        for _ in 0..n {
            let v: Vec<f64> = lines.fields(2)?;
            nodes.push([v[0], v[1]]);
        }
        let m = lines.header("TRIANGLES")?;
        let mut triangles = Vec::with_capacity(m);
        for _ in 0..m {
            let v: Vec<usize> = lines.fields(3)?;
            triangles.push([v[0], v[1], v[2]]);
        }
        let b = lines.header("BOUNDARY")?;
        let mut boundary = Vec::with_capacity(b);
        for _ in 0..b {
            let l = lines.next_line()?;
            let words: Vec<&str> = l.split_whitespace().collect();
            if words.len() != 3 {
                return Err(lines.err("expected `i j TAG`"));
            }
            let i: usize = words[0].parse().map_err(|_| lines.err("bad node index"))?;
            let j: usize = words[1].parse().map_err(|_| lines.err("bad node index"))?;
            let tag = BoundaryTag::from_keyword(words[2])
                .ok_or_else(|| lines.err(format!("unknown boundary tag `{}`", words[2])))?;
            if i >= n || j >= n {
                return Err(lines.err("boundary node index out of range"));
            }
            boundary.push(([i, j], tag));
        }
        TriMesh::new(nodes, triangles, boundary)
    }

    /// Native text form; coordinates carry 17 significant digits so a reload
    /// reproduces them bit for bit.
    pub fn to_native_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "NODES {}", self.nodes.len());
        for p in &self.nodes {
            let _ = writeln!(s, "{:.16e} {:.16e}", p[0], p[1]);
        }
        let _ = writeln!(s, "TRIANGLES {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "BOUNDARY {}", self.boundary.len());
        for e in &self.boundary {
            let _ = writeln!(s, "{} {} {}", e.nodes[0], e.nodes[1], e.tag.keyword());
        }
        s
    }

    pub fn save_native(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_native_string()).map_err(|e| Error::io(path, e))
    }

    /// Reads Gmsh 2.2 ASCII. Lines (type 1) tagged with physical group
    /// `OBSTACLE`/`OUTER` become boundary edges; without `$PhysicalNames`,
    /// physical id 1 is the obstacle and 2 the outer boundary.
    pub fn from_gmsh_str(text: &str) -> Result<TriMesh> {
        let mut lines = Lines::new(text);
        let mut names: HashMap<i64, BoundaryTag> = HashMap::new();
        let mut node_ids: HashMap<i64, usize> = HashMap::new();
        let mut nodes: Vec<Point> = Vec::new();
        let mut triangles = Vec::new();
        let mut lines_with_tag: Vec<([i64; 2], i64)> = Vec::new();
        let mut seen_nodes = false;
        while let Ok(l) = lines.next_line() {
            match l {
                "$MeshFormat" => {
                    let v = lines.next_line()?;
                    let version = v.split_whitespace().next().unwrap_or("");
                    if !version.starts_with('2') {
                        return Err(lines.err(format!("unsupported MSH version {version}")));
                    }
                    if v.split_whitespace().nth(1) != Some("0") {
                        return Err(lines.err("binary MSH files are not supported"));
                    }
                    expect_end(&mut lines, "$EndMeshFormat")?;
                }
                "$PhysicalNames" => {
                    let count: usize = parse_one(&mut lines)?;
                    for _ in 0..count {
                        let l = lines.next_line()?;
                        let words: Vec<&str> = l.split_whitespace().collect();
                        if words.len() < 3 {
                            return Err(lines.err("bad physical name entry"));
                        }
                        let id: i64 = words[1].parse().map_err(|_| lines.err("bad physical id"))?;
                        let name = words[2].trim_matches('"');
                        if let Some(tag) = BoundaryTag::from_keyword(name) {
                            names.insert(id, tag);
                        }
                    }
                    expect_end(&mut lines, "$EndPhysicalNames")?;
                }
                "$Nodes" => {
                    let count: usize = parse_one(&mut lines)?;
                    for _ in 0..count {
                        let l = lines.next_line()?;
                        let w: Vec<&str> = l.split_whitespace().collect();
                        if w.len() < 3 {
                            return Err(lines.err("bad node line"));
                        }
                        let id: i64 = w[0].parse().map_err(|_| lines.err("bad node id"))?;
                        let x: f64 = w[1].parse().map_err(|_| lines.err("bad coordinate"))?;
                        let y: f64 = w[2].parse().map_err(|_| lines.err("bad coordinate"))?;
                        node_ids.insert(id, nodes.len());
                        nodes.push([x, y]);
                    }
                    seen_nodes = true;
                    expect_end(&mut lines, "$EndNodes")?;
                }
                "$Elements" => {
                    let count: usize = parse_one(&mut lines)?;
                    for _ in 0..count {
                        let l = lines.next_line()?;
                        let w: Vec<i64> = l
                            .split_whitespace()
                            .map(|s| s.parse::<i64>())
                            .collect::<std::result::Result<_, _>>()
                            .map_err(|_| lines.err("bad element line"))?;
                        if w.len() < 3 {
                            return Err(lines.err("bad element line"));
                        }
                        let kind = w[1];
                        let ntags = w[2] as usize;
                        let physical = if ntags > 0 { w.get(3).copied().unwrap_or(0) } else { 0 };
                        let conn = &w[3 + ntags..];
                        match kind {
                            1 if conn.len() == 2 => lines_with_tag.push(([conn[0], conn[1]], physical)),
                            2 if conn.len() == 3 => triangles.push([conn[0], conn[1], conn[2]]),
                            1 | 2 => return Err(lines.err("wrong node count for element")),
                            _ => {}
                        }
                    }
                    expect_end(&mut lines, "$EndElements")?;
                }
                _ => {}
            }
        }
        if !seen_nodes {
            return Err(Error::Parse {
                line: lines.line,
                message: "no $Nodes section".into(),
            });
        }
        let map = |id: i64| {
            node_ids.get(&id).copied().ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("element references unknown node {id}"),
            })
        };
        let tag_of = |physical: i64| -> Option<BoundaryTag> {
            if names.is_empty() {
                match physical {
                    1 => Some(BoundaryTag::Obstacle),
                    2 => Some(BoundaryTag::Outer),
                    _ => None,
                }
            } else {
                names.get(&physical).copied()
            }
        };
        let tris = triangles
            .iter()
            .map(|t| Ok([map(t[0])?, map(t[1])?, map(t[2])?]))
            .collect::<Result<Vec<_>>>()?;
        let mut boundary = Vec::new();
        for (conn, physical) in lines_with_tag {
            if let Some(tag) = tag_of(physical) {
                boundary.push(([map(conn[0])?, map(conn[1])?], tag));
            }
        }
        // Gmsh files often carry unused geometry points; keep only referenced nodes.
        compact(nodes, tris, boundary)
    }
}

fn compact(
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<([usize; 2], BoundaryTag)>,
) -> Result<TriMesh> {
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut kept = Vec::new();
    for t in &triangles {
        for &v in t {
            if remap[v] == usize::MAX {
                remap[v] = kept.len();
                kept.push(nodes[v]);
            }
        }
    }
    let triangles = triangles
        .iter()
        .map(|t| [remap[t[0]], remap[t[1]], remap[t[2]]])
        .collect();
    let boundary = boundary
        .into_iter()
        .map(|([a, b], tag)| {
            if remap[a] == usize::MAX || remap[b] == usize::MAX {
                Err(Error::Topology("boundary line off the triangulation".into()))
            } else {
                Ok(([remap[a], remap[b]], tag))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    TriMesh::new(kept, triangles, boundary)
}

fn parse_one<T: FromStr>(lines: &mut Lines<'_>) -> Result<T> {
    let l = lines.next_line()?;
    l.parse().map_err(|_| lines.err(format!("expected a count, found `{l}`")))
}

fn expect_end(lines: &mut Lines<'_>, marker: &str) -> Result<()> {
    let l = lines.next_line()?;
    if l != marker {
        return Err(lines.err(format!("expected {marker}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE_WITH_HOLE: &str = "\
$MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
2
1 7 \"OBSTACLE\"
1 8 \"OUTER\"
$EndPhysicalNames
$Nodes
9
1 -1 -1 0
2 1 -1 0
3 1 1 0
4 -1 1 0
5 -0.2 -0.2 0
6 0.2 -0.2 0
7 0.2 0.2 0
8 -0.2 0.2 0
99 5 5 0
$EndNodes
$Elements
17
1 15 2 0 1 99
2 1 2 8 1 1 2
3 1 2 8 1 2 3
4 1 2 8 1 3 4
5 1 2 8 1 4 1
6 1 2 7 2 5 6
7 1 2 7 2 6 7
8 1 2 7 2 7 8
9 1 2 7 2 8 5
10 2 2 9 1 1 2 6
11 2 2 9 1 1 6 5
12 2 2 9 1 2 3 7
13 2 2 9 1 2 7 6
14 2 2 9 1 3 4 8
15 2 2 9 1 3 8 7
16 2 2 9 1 4 1 5
17 2 2 9 1 4 5 8
$EndElements
";

    #[test]
    fn gmsh_square_with_hole() {
        let mesh = TriMesh::from_gmsh_str(SQUARE_WITH_HOLE).unwrap();
        assert_eq!(mesh.nodes().len(), 8);
        assert_eq!(mesh.triangles().len(), 8);
        assert_eq!(mesh.loops().len(), 2);
        assert!((mesh.area() - (4.0 - 0.16)).abs() < 1e-14);
    }

    #[test]
    fn native_round_trip_is_exact() {
        let mesh = TriMesh::from_gmsh_str(SQUARE_WITH_HOLE).unwrap();
        let moved = mesh
            .displace_by(|p| if p[0].abs() < 0.5 { [0.1 / 3.0, 0.0] } else { [0.0, 0.0] }, 1.0)
            .unwrap();
        let text = moved.to_native_string();
        let back = TriMesh::from_native_str(&text).unwrap();
        assert_eq!(back.nodes(), moved.nodes());
        assert_eq!(back.triangles(), moved.triangles());
        assert_eq!(back.boundary_edges(), moved.boundary_edges());
    }

    #[test]
    fn native_errors_carry_line_numbers() {
        let err = TriMesh::from_native_str("NODES 2\n0 0\nzero 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = TriMesh::from_native_str("").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        let text = "NODES 3\n0 0\n1 0\n0 1\nTRIANGLES 1\n0 1 2\nBOUNDARY 3\n0 1 OUTER\n1 2 OUTER\n2 0 WALL\n";
        assert!(matches!(TriMesh::from_native_str(text), Err(Error::Parse { line: 10, .. })));
    }

    #[test]
    fn load_requires_obstacle() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tri.txt");
        let text = "NODES 3\n0 0\n0 1\n1 0\nTRIANGLES 1\n0 1 2\nBOUNDARY 3\n0 1 OUTER\n1 2 OUTER\n2 0 OUTER\n";
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            load_mesh(&path, MeshFormat::Native),
            Err(Error::MissingTag(BoundaryTag::Obstacle))
        ));
        let mesh = TriMesh::from_native_str(text).unwrap();
        assert_eq!(mesh.triangle_area(0), 0.5);
    }
}
