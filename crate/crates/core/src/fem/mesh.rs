//! Triangle meshes of the unit square, the unit disk and an annulus.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Inner radius of the generated annulus (outer radius is 1).
pub const ANNULUS_INNER_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshShape {
    Disk,
    Square,
    Annulus,
}

impl FromStr for MeshShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disk" => Ok(Self::Disk),
            "square" => Ok(Self::Square),
            "annulus" => Ok(Self::Annulus),
            other => Err(Error::Parse(format!("unknown mesh shape '{other}'"))),
        }
    }
}

impl std::fmt::Display for MeshShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Disk => "disk",
            Self::Square => "square",
            Self::Annulus => "annulus",
        })
    }
}

/// Conforming triangulation with counter-clockwise triangles.
///
/// Boundary edges are oriented with the domain on their left, so outer
/// loops run counter-clockwise and hole loops clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<[usize; 2]>,
}

impl Mesh {
    /// Builds a mesh from vertices and triangles, deriving the boundary.
    pub fn from_triangles(vertices: Vec<[f64; 2]>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        for t in &mut triangles {
            if t.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::Mesh(format!("triangle {t:?} references a missing vertex")));
            }
            if signed_area(&vertices, t) < 0.0 {
                t.swap(1, 2);
            }
        }
        let boundary_edges = boundary_of(&triangles);
        let mesh = Self {
            vertices,
            triangles,
            boundary_edges,
        };
        mesh.audit()?;
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    pub fn edge_length(&self, e: &[usize; 2]) -> f64 {
        let a = self.vertices[e[0]];
        let b = self.vertices[e[1]];
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges.iter().map(|e| self.edge_length(e)).sum()
    }

    /// `true` for every vertex on a boundary edge.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.vertices.len()];
        for e in &self.boundary_edges {
            m[e[0]] = true;
            m[e[1]] = true;
        }
        m
    }

    /// Gradients of the three hat functions on triangle `t` and its area.
    pub fn hat_gradients(&self, t: usize) -> ([[f64; 2]; 3], f64) {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let g = [
            [(b[1] - c[1]) / area2, (c[0] - b[0]) / area2],
            [(c[1] - a[1]) / area2, (a[0] - c[0]) / area2],
            [(a[1] - b[1]) / area2, (b[0] - a[0]) / area2],
        ];
        (g, 0.5 * area2)
    }

    /// Checks positivity, conformity and closed, consistently oriented boundary loops.
    pub fn audit(&self) -> Result<()> {
        if self.triangles.is_empty() {
            return Err(Error::Mesh("mesh has no triangles".into()));
        }
        let mut used = vec![false; self.vertices.len()];
        for (k, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&i| i >= self.vertices.len()) {
                return Err(Error::Mesh(format!("triangle {k} references a missing vertex")));
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Mesh(format!("triangle {k} is degenerate")));
            }
            let a = self.area(k);
            if !(a > 0.0) {
                return Err(Error::Mesh(format!("triangle {k} has non-positive area {a}")));
            }
            for &i in t {
                used[i] = true;
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::Mesh(format!("vertex {i} belongs to no triangle")));
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        if let Some((e, _)) = directed.iter().find(|(_, &c)| c > 1) {
            return Err(Error::Mesh(format!("edge {e:?} used twice with the same orientation")));
        }
        let mut expected = boundary_of(&self.triangles);
        let mut given = self.boundary_edges.clone();
        expected.sort_unstable();
        given.sort_unstable();
        if expected != given {
            return Err(Error::Mesh(
                "boundary edges do not match the edges used by exactly one triangle".into(),
            ));
        }
        let mut out_deg: HashMap<usize, usize> = HashMap::new();
        let mut in_deg: HashMap<usize, usize> = HashMap::new();
        for e in &self.boundary_edges {
            *out_deg.entry(e[0]).or_default() += 1;
            *in_deg.entry(e[1]).or_default() += 1;
        }
        for (v, &d) in &out_deg {
            if d != 1 || in_deg.get(v) != Some(&1) {
                return Err(Error::Mesh(format!("boundary is not a set of closed loops at vertex {v}")));
            }
        }
        if in_deg.len() != out_deg.len() {
            return Err(Error::Mesh("boundary loops are not closed".into()));
        }
        // Conformity: a hanging vertex lies in the interior of some edge.
        let mut edges: Vec<(usize, usize)> = directed.keys().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        edges.sort_unstable();
        edges.dedup();
        let cell = edges
            .iter()
            .map(|&(a, b)| {
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                (pb[0] - pa[0]).hypot(pb[1] - pa[1])
            })
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let key = |p: [f64; 2]| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (v, &p) in self.vertices.iter().enumerate() {
            buckets.entry(key(p)).or_default().push(v);
        }
        for &(a, b) in &edges {
            let pa = self.vertices[a];
            let pb = self.vertices[b];
            let len2 = (pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2);
            let (ka, kb) = (key(pa), key(pb));
            for cx in ka.0.min(kb.0)..=ka.0.max(kb.0) {
                for cy in ka.1.min(kb.1)..=ka.1.max(kb.1) {
                    for &v in buckets.get(&(cx, cy)).map_or(&[][..], |b| &b[..]) {
                        if v == a || v == b {
                            continue;
                        }
                        let pv = self.vertices[v];
                        let tx = ((pv[0] - pa[0]) * (pb[0] - pa[0]) + (pv[1] - pa[1]) * (pb[1] - pa[1])) / len2;
                        if tx <= 1e-9 || tx >= 1.0 - 1e-9 {
                            continue;
                        }
                        let cross = (pb[0] - pa[0]) * (pv[1] - pa[1]) - (pb[1] - pa[1]) * (pv[0] - pa[0]);
                        if cross.abs() <= 1e-12 * len2 {
                            return Err(Error::Mesh(format!("hanging vertex {v} on edge ({a}, {b})")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Text format: counts line, then vertices, triangles and boundary edges.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} {}",
            self.vertices.len(),
            self.triangles.len(),
            self.boundary_edges.len()
        );
        for v in &self.vertices {
            let _ = writeln!(s, "{:?} {:?}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for e in &self.boundary_edges {
            let _ = writeln!(s, "{} {}", e[0], e[1]);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty mesh file".into()))?;
        let counts = parse_fields::<usize>(header, 3)?;
        let (nv, nt, nb) = (counts[0], counts[1], counts[2]);
        let mut take = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Parse(format!("mesh file ends before all {what} were read")))
        };
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let f = parse_fields::<f64>(take("vertices")?, 2)?;
            vertices.push([f[0], f[1]]);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let f = parse_fields::<usize>(take("triangles")?, 3)?;
            triangles.push([f[0], f[1], f[2]]);
        }
        let mut boundary_edges = Vec::with_capacity(nb);
        for _ in 0..nb {
            let f = parse_fields::<usize>(take("boundary edges")?, 2)?;
            boundary_edges.push([f[0], f[1]]);
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing data after mesh".into()));
        }
        let mesh = Self {
            vertices,
            triangles,
            boundary_edges,
        };
        mesh.audit()?;
        Ok(mesh)
    }
}

fn parse_fields<T: FromStr>(line: &str, count: usize) -> Result<Vec<T>> {
    let v: Vec<T> = line
        .split_whitespace()
        .map(|f| f.parse::<T>().map_err(|_| Error::Parse(format!("bad field '{f}' in line '{line}'"))))
        .collect::<Result<_>>()?;
    if v.len() != count {
        return Err(Error::Parse(format!("expected {count} fields in line '{line}'")));
    }
    Ok(v)
}

fn signed_area(v: &[[f64; 2]], t: &[usize; 3]) -> f64 {
    let [a, b, c] = t.map(|i| v[i]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

// Directed edges used by exactly one triangle, in triangle order.
fn boundary_of(triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut out = Vec::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if count[&(a.min(b), a.max(b))] == 1 {
                out.push([a, b]);
            }
        }
    }
    out
}

/// Generates a mesh; `resolution` counts refinement levels starting at 1.
///
/// Square meshes are nested across resolutions. Disk and annulus meshes
/// follow the circle more closely at each level, so their domains change
/// slightly with resolution.
pub fn generate_mesh(shape: MeshShape, resolution: usize) -> Result<Mesh> {
    if resolution < 1 {
        return Err(Error::InvalidParams("mesh resolution must be >= 1".into()));
    }
    if resolution > 12 {
        return Err(Error::InvalidParams(format!("mesh resolution {resolution} is too large")));
    }
    match shape {
        MeshShape::Square => square(1usize << (resolution - 1)),
        MeshShape::Disk => disk(resolution - 1),
        MeshShape::Annulus => annulus(resolution),
    }
}

fn square(cells: usize) -> Result<Mesh> {
    let n = cells + 1;
    let h = 1.0 / cells as f64;
    let idx = |i: usize, j: usize| j * n + i;
    let mut vertices = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * cells * cells);
    for j in 0..cells {
        for i in 0..cells {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    Mesh::from_triangles(vertices, triangles)
}

fn disk(refinements: usize) -> Result<Mesh> {
    use std::f64::consts::PI;
    let mut vertices = vec![[0.0, 0.0]];
    for k in 0..6 {
        let a = PI / 3.0 * k as f64;
        vertices.push([a.cos(), a.sin()]);
    }
    let mut triangles: Vec<[usize; 3]> = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();
    for _ in 0..refinements {
        red_refine(&mut vertices, &mut triangles);
    }
    // Map the hexagon radially onto the unit disk.
    for v in vertices.iter_mut() {
        let r = v[0].hypot(v[1]);
        if r == 0.0 {
            continue;
        }
        let theta = v[1].atan2(v[0]);
        let sector = (theta / (PI / 3.0)).floor();
        let local = theta - (sector + 0.5) * PI / 3.0;
        let apothem = (PI / 6.0).cos() / local.cos();
        let scale = 1.0 / apothem;
        v[0] *= scale;
        v[1] *= scale;
    }
    Mesh::from_triangles(vertices, triangles)
}

fn red_refine(vertices: &mut Vec<[f64; 2]>, triangles: &mut Vec<[usize; 3]>) {
    let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>| {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let (pa, pb) = (vertices[a], vertices[b]);
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            vertices.len() - 1
        })
    };
    let mut next = Vec::with_capacity(4 * triangles.len());
    for &[a, b, c] in triangles.iter() {
        let ab = mid(a, b, vertices);
        let bc = mid(b, c, vertices);
        let ca = mid(c, a, vertices);
        next.push([a, ab, ca]);
        next.push([ab, b, bc]);
        next.push([ca, bc, c]);
        next.push([ab, bc, ca]);
    }
    *triangles = next;
}

fn annulus(resolution: usize) -> Result<Mesh> {
    use std::f64::consts::PI;
    let layers = 1usize << (resolution - 1);
    let sectors = 6 * (1usize << resolution);
    let idx = |l: usize, s: usize| l * sectors + s % sectors;
    let mut vertices = Vec::with_capacity((layers + 1) * sectors);
    for l in 0..=layers {
        let r = ANNULUS_INNER_RADIUS + (1.0 - ANNULUS_INNER_RADIUS) * l as f64 / layers as f64;
        for s in 0..sectors {
            let a = 2.0 * PI * s as f64 / sectors as f64;
            vertices.push([r * a.cos(), r * a.sin()]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * layers * sectors);
    for l in 0..layers {
        for s in 0..sectors {
            let (a, b, c, d) = (idx(l, s), idx(l, s + 1), idx(l + 1, s + 1), idx(l + 1, s));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    Mesh::from_triangles(vertices, triangles)
}
