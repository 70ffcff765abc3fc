//! Global stiffness and capacity matrices, load vectors and Dirichlet data.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{element_quadrature, gauss_1d};
use crate::fields::{ScalarField, TensorField};
use crate::mesh::{BcRole, ElementKind, Mesh, Point};
use crate::sparse::CsrMatrix;

/// Quadrature degree used for element matrices: 2×2 Gauss on quads and the
/// 3-point rule on triangles.
pub const ASSEMBLY_DEGREE: usize = 2;

/// Dense element matrix of size 3 or 4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMatrix {
    pub size: usize,
    pub entries: [[f64; 4]; 4],
}

impl ElementMatrix {
    fn zeros(size: usize) -> Self {
        Self { size, entries: [[0.0; 4]; 4] }
    }

    fn mirror_upper(&mut self) {
        for b in 0..self.size {
            for a in b + 1..self.size {
                self.entries[a][b] = self.entries[b][a];
            }
        }
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[a][b]
    }

    pub fn row_sum(&self, a: usize) -> f64 {
        self.entries[a][..self.size].iter().sum()
    }

    pub fn total(&self) -> f64 {
        (0..self.size).map(|a| self.row_sum(a)).sum()
    }
}

/// `∫ grad Nₐ · D grad N_b` over one element. With `require_spd` the tensor
/// is checked at every quadrature point.
pub fn element_stiffness(
    coords: &[Point],
    kind: ElementKind,
    tensor: &TensorField,
    degree: usize,
    require_spd: bool,
) -> Result<ElementMatrix> {
    let nn = kind.nodes_per_element();
    let mut ke = ElementMatrix::zeros(nn);
    for qp in element_quadrature(coords, kind, degree, 0)? {
        let d = tensor.eval(qp.x);
        if require_spd && !d.is_positive_definite() {
            return Err(Error::TensorNotSpd { x: qp.x[0], y: qp.x[1] });
        }
        for b in 0..nn {
            let dg = d.apply(qp.grad[b]);
            for a in 0..=b {
                ke.entries[a][b] += qp.weight * (qp.grad[a][0] * dg[0] + qp.grad[a][1] * dg[1]);
            }
        }
    }
    ke.mirror_upper();
    Ok(ke)
}

/// Consistent capacity matrix `∫ Nₐ N_b`.
pub fn element_capacity(coords: &[Point], kind: ElementKind, degree: usize) -> Result<ElementMatrix> {
    let nn = kind.nodes_per_element();
    let mut me = ElementMatrix::zeros(nn);
    for qp in element_quadrature(coords, kind, degree, 0)? {
        for b in 0..nn {
            for a in 0..=b {
                me.entries[a][b] += qp.weight * qp.shape[a] * qp.shape[b];
            }
        }
    }
    me.mirror_upper();
    Ok(me)
}

/// Row-sum lumping of the capacity matrix. Test-only comparison option.
pub fn lump(me: &ElementMatrix) -> ElementMatrix {
    let mut out = ElementMatrix::zeros(me.size);
    for a in 0..me.size {
        out.entries[a][a] = me.row_sum(a);
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct AssemblyOptions {
    pub degree: usize,
    pub lumped_capacity: bool,
    pub require_spd: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { degree: ASSEMBLY_DEGREE, lumped_capacity: false, require_spd: true }
    }
}

/// Global operators plus the Dirichlet partition of the dofs.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub k: CsrMatrix,
    pub m: CsrMatrix,
    /// Dirichlet dofs with their prescribed values, ascending by dof.
    pub dirichlet: Vec<(usize, f64)>,
    pub free_dofs: Vec<usize>,
}

impl AssembledSystem {
    pub fn ndofs(&self) -> usize {
        self.k.nrows()
    }

    pub fn dirichlet_dofs(&self) -> Vec<usize> {
        self.dirichlet.iter().map(|&(d, _)| d).collect()
    }

    /// Replaces the prescribed values, keeping the partition.
    pub fn set_dirichlet_values(&mut self, values: &[(usize, f64)]) -> Result<()> {
        if values.len() != self.dirichlet.len() || values.iter().zip(&self.dirichlet).any(|(a, b)| a.0 != b.0) {
            return Err(Error::InvalidInput("Dirichlet dof set changed".into()));
        }
        self.dirichlet.copy_from_slice(values);
        Ok(())
    }
}

/// A nodal load at the mesh node nearest to `position`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSource {
    pub position: Point,
    pub rate: f64,
}

/// Volumetric source density plus concentrated sources.
#[derive(Debug, Clone, Default)]
pub struct Source {
    pub volumetric: Option<ScalarField>,
    pub points: Vec<PointSource>,
}

impl Source {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn volumetric(f: ScalarField) -> Self {
        Self { volumetric: Some(f), points: Vec::new() }
    }

    pub fn points(points: Vec<PointSource>) -> Self {
        Self { volumetric: None, points }
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: f64, other: &Source, b: f64) -> Source {
        let volumetric = match (&self.volumetric, &other.volumetric) {
            (None, None) => None,
            (Some(u), None) => Some(u.combine(a, &ScalarField::zero(), 0.0)),
            (None, Some(v)) => Some(v.combine(b, &ScalarField::zero(), 0.0)),
            (Some(u), Some(v)) => Some(u.combine(a, v, b)),
        };
        let mut points: Vec<PointSource> =
            self.points.iter().map(|p| PointSource { position: p.position, rate: a * p.rate }).collect();
        points.extend(other.points.iter().map(|p| PointSource { position: p.position, rate: b * p.rate }));
        points.retain(|p| p.rate != 0.0);
        Source { volumetric, points }
    }
}

/// Per-marker boundary data. Missing markers are homogeneous.
pub type BoundaryData = BTreeMap<String, ScalarField>;

/// Builds `K` and `M` and the Dirichlet partition (values zero).
pub fn assemble_operators(mesh: &Mesh, tensor: &TensorField, opts: AssemblyOptions) -> Result<AssembledSystem> {
    mesh.validate()?;
    let n = mesh.num_nodes();
    let locals: Vec<Result<(ElementMatrix, ElementMatrix)>> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let coords = mesh.element_coords(e);
            let remap = |err: Error| match err {
                Error::ElementInversion { jacobian, .. } => Error::ElementInversion { element: e, jacobian },
                other => other,
            };
            let ke = element_stiffness(&coords, mesh.kind, tensor, opts.degree, opts.require_spd).map_err(remap)?;
            let me = element_capacity(&coords, mesh.kind, opts.degree.max(2)).map_err(remap)?;
            let me = if opts.lumped_capacity { lump(&me) } else { me };
            Ok((ke, me))
        })
        .collect();

    let npe = mesh.kind.nodes_per_element();
    let mut kt = Vec::with_capacity(mesh.num_elements() * npe * npe);
    let mut mt = Vec::with_capacity(mesh.num_elements() * npe * npe);
    for (e, local) in locals.into_iter().enumerate() {
        let (ke, me) = local?;
        let el = &mesh.elements[e];
        for a in 0..npe {
            for b in 0..npe {
                kt.push((el[a], el[b], ke.entries[a][b]));
                if me.entries[a][b] != 0.0 {
                    mt.push((el[a], el[b], me.entries[a][b]));
                }
            }
        }
    }
    let k = CsrMatrix::from_triplets(n, n, &kt)?;
    let m = CsrMatrix::from_triplets(n, n, &mt)?;

    let markers = mesh.dirichlet_markers()?;
    let dirichlet: Vec<(usize, f64)> =
        markers.iter().enumerate().filter(|(_, m)| m.is_some()).map(|(i, _)| (i, 0.0)).collect();
    let free_dofs = markers.iter().enumerate().filter(|(_, m)| m.is_none()).map(|(i, _)| i).collect();
    Ok(AssembledSystem { k, m, dirichlet, free_dofs })
}

/// Prescribed values on the Dirichlet dofs at time `t`.
pub fn dirichlet_values(mesh: &Mesh, data: &BoundaryData, t: f64) -> Result<Vec<(usize, f64)>> {
    let markers = mesh.dirichlet_markers()?;
    Ok(markers
        .iter()
        .enumerate()
        .filter_map(|(i, m)| {
            m.as_ref().map(|m| (i, data.get(m).map_or(0.0, |f| f.eval(mesh.nodes[i], t))))
        })
        .collect())
}

pub fn nearest_node(mesh: &Mesh, p: Point) -> usize {
    let d2 = |q: &Point| (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
    (0..mesh.num_nodes())
        .min_by(|&a, &b| d2(&mesh.nodes[a]).total_cmp(&d2(&mesh.nodes[b])))
        .expect("mesh has nodes")
}

/// Volumetric, point and Neumann contributions to the load at time `t`.
pub fn load_vector(mesh: &Mesh, source: &Source, neumann: &BoundaryData, t: f64, degree: usize) -> Result<Vec<f64>> {
    let mut f = vec![0.0; mesh.num_nodes()];
    if let Some(vol) = &source.volumetric {
        let npe = mesh.kind.nodes_per_element();
        let locals: Vec<Result<[f64; 4]>> = (0..mesh.num_elements())
            .into_par_iter()
            .map(|e| {
                let mut fe = [0.0; 4];
                for qp in element_quadrature(&mesh.element_coords(e), mesh.kind, degree, e)? {
                    let s = vol.eval(qp.x, t);
                    for a in 0..npe {
                        fe[a] += qp.weight * s * qp.shape[a];
                    }
                }
                Ok(fe)
            })
            .collect();
        for (e, fe) in locals.into_iter().enumerate() {
            let fe = fe?;
            for (a, &node) in mesh.elements[e].iter().enumerate() {
                f[node] += fe[a];
            }
        }
    }
    for ps in &source.points {
        f[nearest_node(mesh, ps.position)] += ps.rate;
    }
    if !neumann.is_empty() {
        let (gp, gw) = gauss_1d(3);
        for edge in &mesh.boundary_edges {
            if mesh.role_of(&edge.marker)? != BcRole::Neumann {
                continue;
            }
            let Some(h) = neumann.get(&edge.marker) else { continue };
            let [a, b] = edge.nodes;
            let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
            let half = 0.5 * mesh.edge_length(edge);
            for (&s, &w) in gp.iter().zip(gw) {
                let (na, nb) = (0.5 * (1.0 - s), 0.5 * (1.0 + s));
                let x = [na * pa[0] + nb * pb[0], na * pa[1] + nb * pb[1]];
                let hv = h.eval(x, t) * w * half;
                f[a] += na * hv;
                f[b] += nb * hv;
            }
        }
    }
    Ok(f)
}

/// Operators, load vector and Dirichlet values for a steady problem.
pub fn assemble(
    mesh: &Mesh,
    tensor: &TensorField,
    source: &Source,
    neumann: &BoundaryData,
    dirichlet: &BoundaryData,
) -> Result<(AssembledSystem, Vec<f64>)> {
    let mut system = assemble_operators(mesh, tensor, AssemblyOptions::default())?;
    let values = dirichlet_values(mesh, dirichlet, 0.0)?;
    system.set_dirichlet_values(&values)?;
    let f = load_vector(mesh, source, neumann, 0.0, ASSEMBLY_DEGREE)?;
    Ok((system, f))
}
