//! Structured 2D meshes of three-node triangles and four-node
//! quadrilaterals with tagged boundary edges.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Tri3,
    Quad4,
}

impl ElementKind {
    pub fn nodes_per_element(self) -> usize {
        match self {
            ElementKind::Tri3 => 3,
            ElementKind::Quad4 => 4,
        }
    }
}

impl std::str::FromStr for ElementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tri3" | "t3" | "triangle" => Ok(ElementKind::Tri3),
            "quad4" | "q4" | "quad" => Ok(ElementKind::Quad4),
            other => Err(Error::Config(format!("unknown element kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for ElementKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ElementKind::Tri3 => "tri3",
            ElementKind::Quad4 => "quad4",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcRole {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub marker: String,
}

/// Lattice parameters of a mesh built by [`generate_structured`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuredGrid {
    pub origin: Point,
    pub lengths: [f64; 2],
    pub seeds: [usize; 2],
}

impl StructuredGrid {
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.seeds[0] + i
    }

    pub fn spacing(&self) -> [f64; 2] {
        [
            self.lengths[0] / (self.seeds[0] - 1) as f64,
            self.lengths[1] / (self.seeds[1] - 1) as f64,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub elements: Vec<Vec<usize>>,
    pub kind: ElementKind,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub roles: BTreeMap<String, BcRole>,
    pub grid: Option<StructuredGrid>,
}

pub const LEFT: &str = "left";
pub const RIGHT: &str = "right";
pub const BOTTOM: &str = "bottom";
pub const TOP: &str = "top";

/// Uniform `nx × ny` lattice on `[origin, origin + lengths]`, nodes in
/// row-major order from the origin. Triangles split every cell along the
/// lower-left to upper-right diagonal. All four sides start out Dirichlet.
pub fn generate_structured(origin: Point, lengths: [f64; 2], seeds: [usize; 2], kind: ElementKind) -> Result<Mesh> {
    let [nx, ny] = seeds;
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidMesh(format!("seeds must be >= 2, got ({nx}, {ny})")));
    }
    if !(lengths[0] > 0.0 && lengths[1] > 0.0) || !lengths.iter().all(|l| l.is_finite()) {
        return Err(Error::InvalidMesh(format!("lengths must be positive, got {lengths:?}")));
    }
    let grid = StructuredGrid { origin, lengths, seeds };
    let [hx, hy] = grid.spacing();
    let mut nodes = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            // Pin the last row/column to the exact far edge.
            let x = if i + 1 == nx { origin[0] + lengths[0] } else { origin[0] + i as f64 * hx };
            let y = if j + 1 == ny { origin[1] + lengths[1] } else { origin[1] + j as f64 * hy };
            nodes.push([x, y]);
        }
    }

    let mut elements = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let n00 = grid.node(i, j);
            let n10 = grid.node(i + 1, j);
            let n11 = grid.node(i + 1, j + 1);
            let n01 = grid.node(i, j + 1);
            match kind {
                ElementKind::Quad4 => elements.push(vec![n00, n10, n11, n01]),
                ElementKind::Tri3 => {
                    elements.push(vec![n00, n10, n11]);
                    elements.push(vec![n00, n11, n01]);
                }
            }
        }
    }

    let mut boundary_edges = Vec::with_capacity(2 * (nx - 1) + 2 * (ny - 1));
    for i in 0..nx - 1 {
        boundary_edges.push(BoundaryEdge { nodes: [grid.node(i, 0), grid.node(i + 1, 0)], marker: BOTTOM.into() });
    }
    for j in 0..ny - 1 {
        boundary_edges.push(BoundaryEdge {
            nodes: [grid.node(nx - 1, j), grid.node(nx - 1, j + 1)],
            marker: RIGHT.into(),
        });
    }
    for i in (0..nx - 1).rev() {
        boundary_edges.push(BoundaryEdge {
            nodes: [grid.node(i + 1, ny - 1), grid.node(i, ny - 1)],
            marker: TOP.into(),
        });
    }
    for j in (0..ny - 1).rev() {
        boundary_edges.push(BoundaryEdge { nodes: [grid.node(0, j + 1), grid.node(0, j)], marker: LEFT.into() });
    }

    let roles = [LEFT, RIGHT, BOTTOM, TOP].iter().map(|m| (m.to_string(), BcRole::Dirichlet)).collect();
    let mesh = Mesh { nodes, elements, kind, boundary_edges, roles, grid: Some(grid) };
    mesh.validate()?;
    Ok(mesh)
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_coords(&self, e: usize) -> Vec<Point> {
        self.elements[e].iter().map(|&n| self.nodes[n]).collect()
    }

    /// Signed area by the shoelace formula.
    pub fn element_area(&self, e: usize) -> f64 {
        polygon_area(&self.element_coords(e))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_elements()).map(|e| self.element_area(e)).sum()
    }

    pub fn set_role(&mut self, marker: &str, role: BcRole) {
        self.roles.insert(marker.to_string(), role);
    }

    /// Re-tags boundary edges. `f` receives the edge midpoint and current
    /// marker and returns the new marker, or `None` to keep it.
    pub fn remark_edges(&mut self, mut f: impl FnMut(Point, &str) -> Option<String>) {
        for k in 0..self.boundary_edges.len() {
            let [a, b] = self.boundary_edges[k].nodes;
            let mid = [(self.nodes[a][0] + self.nodes[b][0]) / 2.0, (self.nodes[a][1] + self.nodes[b][1]) / 2.0];
            if let Some(m) = f(mid, &self.boundary_edges[k].marker) {
                self.boundary_edges[k].marker = m;
            }
        }
    }

    pub fn markers(&self) -> Vec<String> {
        let mut m: Vec<String> = self.boundary_edges.iter().map(|e| e.marker.clone()).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn role_of(&self, marker: &str) -> Result<BcRole> {
        self.roles.get(marker).copied().ok_or_else(|| Error::MissingBcRole(marker.to_string()))
    }

    /// For every node on a Dirichlet edge, the marker of the first such edge
    /// in edge order; `None` elsewhere.
    pub fn dirichlet_markers(&self) -> Result<Vec<Option<String>>> {
        let mut out: Vec<Option<String>> = vec![None; self.num_nodes()];
        for edge in &self.boundary_edges {
            if self.role_of(&edge.marker)? == BcRole::Dirichlet {
                for &n in &edge.nodes {
                    if out[n].is_none() {
                        out[n] = Some(edge.marker.clone());
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn edge_length(&self, edge: &BoundaryEdge) -> f64 {
        let [a, b] = edge.nodes;
        let d = [self.nodes[b][0] - self.nodes[a][0], self.nodes[b][1] - self.nodes[a][1]];
        d[0].hypot(d[1])
    }

    /// Largest element edge length.
    pub fn max_edge_length(&self) -> f64 {
        let mut h: f64 = 0.0;
        for el in &self.elements {
            for k in 0..el.len() {
                let a = self.nodes[el[k]];
                let b = self.nodes[el[(k + 1) % el.len()]];
                h = h.max((b[0] - a[0]).hypot(b[1] - a[1]));
            }
        }
        h
    }

    /// Number of elements sharing each node.
    pub fn node_valence(&self) -> Vec<usize> {
        let mut v = vec![0; self.num_nodes()];
        for el in &self.elements {
            for &n in el {
                v[n] += 1;
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let npe = self.kind.nodes_per_element();
        for (e, el) in self.elements.iter().enumerate() {
            if el.len() != npe {
                return Err(Error::InvalidMesh(format!("element {e} has {} nodes, expected {npe}", el.len())));
            }
            if let Some(&bad) = el.iter().find(|&&n| n >= self.num_nodes()) {
                return Err(Error::InvalidMesh(format!("element {e} references missing node {bad}")));
            }
            let area = self.element_area(e);
            if area.is_nan() || area <= 0.0 {
                return Err(Error::ElementInversion { element: e, jacobian: area });
            }
        }

        // Edges used by exactly one element form the domain boundary.
        let mut edge_use: HashMap<(usize, usize), usize> = HashMap::new();
        for el in &self.elements {
            for k in 0..el.len() {
                let (a, b) = (el[k], el[(k + 1) % el.len()]);
                *edge_use.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut boundary: Vec<(usize, usize)> =
            edge_use.iter().filter(|(_, &c)| c == 1).map(|(&k, _)| k).collect();
        boundary.sort_unstable();
        let mut tagged: Vec<(usize, usize)> =
            self.boundary_edges.iter().map(|e| (e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1]))).collect();
        tagged.sort_unstable();
        if tagged.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidMesh("boundary edge tagged twice".into()));
        }
        if tagged != boundary {
            return Err(Error::InvalidMesh(format!(
                "tagged boundary edges ({}) do not match the domain boundary ({})",
                tagged.len(),
                boundary.len()
            )));
        }
        for m in self.markers() {
            self.role_of(&m)?;
        }
        Ok(())
    }

    /// Steady problems need a non-empty Dirichlet boundary.
    pub fn has_dirichlet(&self) -> Result<bool> {
        Ok(self.dirichlet_markers()?.iter().any(Option::is_some))
    }
}

pub fn polygon_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    let mut s = 0.0;
    for k in 0..n {
        let a = pts[k];
        let b = pts[(k + 1) % n];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}
