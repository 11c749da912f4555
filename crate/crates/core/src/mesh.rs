//! Conforming triangular meshes with full edge topology.
//!
//! Triangles are stored counter-clockwise. Edges are numbered in sorted
//! order of their (min, max) endpoint pair; an interior edge lists its two
//! neighbours with the smaller triangle index first, and its unit normal
//! points out of that first triangle.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("uniform mesh needs at least one subdivision")]
    EmptyGrid,
    #[error("malformed MSH header: {0}")]
    Header(String),
    #[error("malformed MSH body at line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("node tag {0} appears more than once")]
    DuplicateNode(usize),
    #[error("element {element} references node {node}, which is not defined")]
    DanglingVertex { element: usize, node: usize },
    #[error("triangle {0} has zero area")]
    DegenerateTriangle(usize),
    #[error("edge ({0}, {1}) is shared by more than two triangles or by overlapping ones")]
    NonManifold(usize, usize),
    #[error("line element ({0}, {1}) does not lie on the mesh boundary")]
    BoundaryMismatch(usize, usize),
    #[error("mesh contains no triangles")]
    NoTriangles,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub endpoints: [usize; 2],
    pub length: f64,
    /// Points from `adjacent[0]` towards `adjacent[1]`; outward on the boundary.
    pub unit_normal: [f64; 2],
    pub adjacent: Vec<usize>,
    pub is_boundary: bool,
}

impl Edge {
    pub fn midpoint(&self, mesh: &Mesh) -> Point {
        let a = mesh.vertices[self.endpoints[0]];
        let b = mesh.vertices[self.endpoints[1]];
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Which side of the edge `tri` owns (0 for `adjacent[0]`, 1 for `adjacent[1]`).
    pub fn side_of(&self, tri: usize) -> Option<usize> {
        self.adjacent.iter().position(|&t| t == tri)
    }
}

/// Local edge `i` of a triangle runs from vertex `i` to vertex `(i + 1) % 3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalEdge {
    pub edge: usize,
    /// +1 when the global normal is outward for this triangle, -1 otherwise.
    pub sign: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    pub triangle_edges: Vec<[LocalEdge; 3]>,
    pub h_max: f64,
}

fn signed_area(p: Point, q: Point, r: Point) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

fn dist(p: Point, q: Point) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

impl Mesh {
    /// Builds the topology from raw vertices and triangles. Clockwise
    /// triangles are flipped; zero-area triangles are rejected.
    pub fn from_parts(vertices: Vec<Point>, mut triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::NoTriangles);
        }
        for (t, tri) in triangles.iter_mut().enumerate() {
            for &v in tri.iter() {
                if v >= vertices.len() {
                    return Err(MeshError::DanglingVertex { element: t, node: v });
                }
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            let scale = dist(vertices[tri[0]], vertices[tri[1]])
                .max(dist(vertices[tri[1]], vertices[tri[2]]))
                .powi(2);
            if area.abs() <= 1e-14 * scale {
                return Err(MeshError::DegenerateTriangle(t));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }
        let (edges, triangle_edges) = build_edges(&triangles, &vertices)?;
        let h_max = triangles
            .iter()
            .map(|tri| diameter(&vertices, tri))
            .fold(0.0, f64::max);
        Ok(Mesh { vertices, triangles, edges, triangle_edges, h_max })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary).count()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        signed_area(a, b, c)
    }

    pub fn diameter(&self, t: usize) -> f64 {
        diameter(&self.vertices, &self.triangles[t])
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.corners(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Largest ratio of diameter to inscribed-circle diameter. Diagnostic only.
    pub fn max_aspect_ratio(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                let perimeter = dist(a, b) + dist(b, c) + dist(c, a);
                let inradius = 2.0 * self.area(t) / perimeter;
                self.diameter(t) / (2.0 * inradius)
            })
            .fold(0.0, f64::max)
    }

    /// Serialises the mesh as MSH 2.2 ASCII (nodes, boundary lines, triangles).
    pub fn to_gmsh(&self) -> String {
        let mut out = String::new();
        out.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n");
        let _ = writeln!(out, "{}", self.vertices.len());
        for (i, p) in self.vertices.iter().enumerate() {
            let _ = writeln!(out, "{} {:.17e} {:.17e} 0", i + 1, p[0], p[1]);
        }
        out.push_str("$EndNodes\n$Elements\n");
        let boundary: Vec<&Edge> = self.edges.iter().filter(|e| e.is_boundary).collect();
        let _ = writeln!(out, "{}", boundary.len() + self.triangles.len());
        let mut tag = 1;
        for e in boundary {
            let _ = writeln!(out, "{} 1 2 1 1 {} {}", tag, e.endpoints[0] + 1, e.endpoints[1] + 1);
            tag += 1;
        }
        for tri in &self.triangles {
            let _ = writeln!(out, "{} 2 2 2 1 {} {} {}", tag, tri[0] + 1, tri[1] + 1, tri[2] + 1);
            tag += 1;
        }
        out.push_str("$EndElements\n");
        out
    }
}

fn diameter(vertices: &[Point], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = tri.map(|v| vertices[v]);
    dist(a, b).max(dist(b, c)).max(dist(c, a))
}

/// Unit square split into `n x n` cells, each cut along its lower-left to
/// upper-right diagonal.
pub fn generate_uniform(n: usize) -> Result<Mesh, MeshError> {
    if n == 0 {
        return Err(MeshError::EmptyGrid);
    }
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::from_parts(vertices, triangles)
}

/// Rebuilds edges from CCW triangles.
pub fn build_edges(
    triangles: &[[usize; 3]],
    vertices: &[Point],
) -> Result<(Vec<Edge>, Vec<[LocalEdge; 3]>), MeshError> {
    let mut owners: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for i in 0..3 {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let list = owners.entry(key).or_default();
            list.push((t, i));
            if list.len() > 2 {
                return Err(MeshError::NonManifold(key.0, key.1));
            }
        }
    }

    let mut edges = Vec::with_capacity(owners.len());
    let mut triangle_edges = vec![[LocalEdge { edge: usize::MAX, sign: 0.0 }; 3]; triangles.len()];
    for (index, ((a, b), mut list)) in owners.into_iter().enumerate() {
        list.sort_unstable();
        // Two CCW neighbours traverse a shared edge in opposite directions;
        // equal directions mean overlapping (e.g. duplicated) triangles.
        if list.len() == 2 && triangles[list[0].0][list[0].1] == triangles[list[1].0][list[1].1] {
            return Err(MeshError::NonManifold(a, b));
        }
        let (pa, pb) = (vertices[a], vertices[b]);
        let length = dist(pa, pb);
        // Outward normal of the first triangle: its local edge runs CCW, so
        // the outward normal is the tangent rotated clockwise.
        let (t0, i0) = list[0];
        let from = vertices[triangles[t0][i0]];
        let to = vertices[triangles[t0][(i0 + 1) % 3]];
        let unit_normal = [(to[1] - from[1]) / length, -(to[0] - from[0]) / length];
        for (side, &(t, i)) in list.iter().enumerate() {
            triangle_edges[t][i] = LocalEdge { edge: index, sign: if side == 0 { 1.0 } else { -1.0 } };
        }
        edges.push(Edge {
            endpoints: [a, b],
            length,
            unit_normal,
            adjacent: list.iter().map(|&(t, _)| t).collect(),
            is_boundary: list.len() == 1,
        });
    }
    Ok((edges, triangle_edges))
}

/// Parses MSH 2.2 ASCII. Only line (type 1) and triangle (type 2) elements
/// are used; line elements must lie on the boundary of the triangulation.
pub fn read_gmsh(text: &str) -> Result<Mesh, MeshError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let find = |marker: &str| lines.iter().position(|(_, l)| *l == marker);

    let fmt = find("$MeshFormat").ok_or_else(|| MeshError::Header("missing $MeshFormat".into()))?;
    let version = lines
        .get(fmt + 1)
        .ok_or_else(|| MeshError::Header("missing version line".into()))?
        .1;
    let fields: Vec<&str> = version.split_whitespace().collect();
    if fields.len() != 3 || !fields[0].starts_with("2.") || fields[1] != "0" {
        return Err(MeshError::Header(format!("unsupported format line '{version}'")));
    }

    let syntax = |line: usize, msg: &str| MeshError::Syntax { line, msg: msg.to_string() };

    let nodes_at = find("$Nodes").ok_or_else(|| MeshError::Header("missing $Nodes".into()))?;
    let (count_line, count_text) = *lines.get(nodes_at + 1).ok_or_else(|| syntax(0, "missing node count"))?;
    let n_nodes: usize = count_text.parse().map_err(|_| syntax(count_line, "bad node count"))?;
    let mut remap: HashMap<usize, usize> = HashMap::with_capacity(n_nodes);
    let mut vertices = Vec::with_capacity(n_nodes);
    for k in 0..n_nodes {
        let (line, text) = *lines.get(nodes_at + 2 + k).ok_or_else(|| syntax(count_line, "truncated $Nodes"))?;
        let f: Vec<&str> = text.split_whitespace().collect();
        if f.len() < 3 {
            return Err(syntax(line, "node needs a tag and coordinates"));
        }
        let tag: usize = f[0].parse().map_err(|_| syntax(line, "bad node tag"))?;
        let x: f64 = f[1].parse().map_err(|_| syntax(line, "bad x coordinate"))?;
        let y: f64 = f[2].parse().map_err(|_| syntax(line, "bad y coordinate"))?;
        if remap.insert(tag, vertices.len()).is_some() {
            return Err(MeshError::DuplicateNode(tag));
        }
        vertices.push([x, y]);
    }

    let elems_at = find("$Elements").ok_or_else(|| MeshError::Header("missing $Elements".into()))?;
    let (count_line, count_text) = *lines.get(elems_at + 1).ok_or_else(|| syntax(0, "missing element count"))?;
    let n_elems: usize = count_text.parse().map_err(|_| syntax(count_line, "bad element count"))?;
    let mut triangles = Vec::new();
    let mut segments = Vec::new();
    for k in 0..n_elems {
        let (line, text) = *lines.get(elems_at + 2 + k).ok_or_else(|| syntax(count_line, "truncated $Elements"))?;
        let f: Vec<usize> = text
            .split_whitespace()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()
            .map_err(|_| syntax(line, "non-integer field"))?;
        if f.len() < 3 {
            return Err(syntax(line, "element line too short"));
        }
        let (tag, kind, n_tags) = (f[0], f[1], f[2]);
        let nodes = &f[(3 + n_tags).min(f.len())..];
        let want = match kind {
            1 => 2,
            2 => 3,
            _ => continue,
        };
        if nodes.len() != want {
            return Err(syntax(line, "wrong node count for element type"));
        }
        let mut mapped = [0usize; 3];
        for (slot, &node) in mapped.iter_mut().zip(nodes) {
            *slot = *remap
                .get(&node)
                .ok_or(MeshError::DanglingVertex { element: tag, node })?;
        }
        if kind == 2 {
            triangles.push(mapped);
        } else {
            segments.push((mapped[0].min(mapped[1]), mapped[0].max(mapped[1])));
        }
    }

    let mesh = Mesh::from_parts(vertices, triangles)?;
    let boundary: std::collections::HashSet<(usize, usize)> = mesh
        .edges
        .iter()
        .filter(|e| e.is_boundary)
        .map(|e| (e.endpoints[0], e.endpoints[1]))
        .collect();
    for (a, b) in segments {
        if !boundary.contains(&(a, b)) {
            return Err(MeshError::BoundaryMismatch(a, b));
        }
    }
    Ok(mesh)
}
