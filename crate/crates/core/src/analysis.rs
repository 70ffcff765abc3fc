//! Error norms, cross-section integrals, bound-violation statistics and
//! convergence-rate fits.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::element_quadrature;
use crate::fields::ScalarField;
use crate::mesh::{Mesh, Point};
use crate::solvers::Bounds;

/// One degree above the assembly rule: 3×3 Gauss on quads, 6 points on
/// triangles.
pub const ANALYSIS_DEGREE: usize = 4;

fn check_len(mesh: &Mesh, values: &[f64]) -> Result<()> {
    if values.len() != mesh.num_nodes() {
        return Err(Error::InvalidInput(format!(
            "field has {} values, mesh has {} nodes",
            values.len(),
            mesh.num_nodes()
        )));
    }
    Ok(())
}

/// Sum over elements of a per-quadrature-point integrand; reduced in
/// element order so results are bitwise reproducible.
fn integrate(mesh: &Mesh, integrand: impl Fn(&crate::fem::QuadPoint, &[usize]) -> f64 + Sync) -> Result<f64> {
    let parts: Vec<Result<f64>> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let el = &mesh.elements[e];
            Ok(element_quadrature(&mesh.element_coords(e), mesh.kind, ANALYSIS_DEGREE, e)?
                .iter()
                .map(|qp| qp.weight * integrand(qp, el))
                .sum())
        })
        .collect();
    parts.into_iter().sum()
}

/// `‖c_h − c‖_{L²}` with `c_h` the finite element interpolant of `values`.
pub fn l2_error(values: &[f64], exact: &ScalarField, mesh: &Mesh) -> Result<f64> {
    check_len(mesh, values)?;
    let sq = integrate(mesh, |qp, el| {
        let ch: f64 = el.iter().enumerate().map(|(a, &n)| qp.shape[a] * values[n]).sum();
        (ch - exact.eval(qp.x, 0.0)).powi(2)
    })?;
    Ok(sq.sqrt())
}

pub fn l2_norm(values: &[f64], mesh: &Mesh) -> Result<f64> {
    l2_error(values, &ScalarField::zero(), mesh)
}

/// `‖grad c_h − grad c‖_{L²}`
pub fn h1_seminorm_error(
    values: &[f64],
    exact_gradient: &(dyn Fn(Point) -> [f64; 2] + Sync),
    mesh: &Mesh,
) -> Result<f64> {
    check_len(mesh, values)?;
    let sq = integrate(mesh, |qp, el| {
        let mut g = [0.0; 2];
        for (a, &n) in el.iter().enumerate() {
            g[0] += qp.grad[a][0] * values[n];
            g[1] += qp.grad[a][1] * values[n];
        }
        let e = exact_gradient(qp.x);
        (g[0] - e[0]).powi(2) + (g[1] - e[1]).powi(2)
    })?;
    Ok(sq.sqrt())
}

/// `∫ c(x, y) dy` at each requested `x`: trapezoid rule down every grid
/// column, linearly interpolated between columns. Needs a structured mesh.
pub fn integrated_concentration_over_y(values: &[f64], mesh: &Mesh, x_samples: &[f64]) -> Result<Vec<f64>> {
    check_len(mesh, values)?;
    let grid = mesh
        .grid
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("cross-section integrals need a structured mesh".into()))?;
    let [nx, ny] = grid.seeds;
    let columns: Vec<f64> = (0..nx)
        .map(|i| {
            (0..ny - 1)
                .map(|j| {
                    let (lo, hi) = (grid.node(i, j), grid.node(i, j + 1));
                    0.5 * (values[lo] + values[hi]) * (mesh.nodes[hi][1] - mesh.nodes[lo][1])
                })
                .sum()
        })
        .collect();
    let x0 = grid.origin[0];
    let hx = grid.spacing()[0];
    x_samples
        .iter()
        .map(|&x| {
            let s = (x - x0) / hx;
            if !(-1e-9..=(nx - 1) as f64 + 1e-9).contains(&s) {
                return Err(Error::InvalidInput(format!("x = {x} lies outside the mesh")));
            }
            let i = (s.floor().max(0.0) as usize).min(nx - 2);
            let w = (s - i as f64).clamp(0.0, 1.0);
            Ok((1.0 - w) * columns[i] + w * columns[i + 1])
        })
        .collect()
}

/// Mesh column abscissae, the natural sample points for the curve above.
pub fn column_positions(mesh: &Mesh) -> Option<Vec<f64>> {
    let grid = mesh.grid.as_ref()?;
    Some((0..grid.seeds[0]).map(|i| mesh.nodes[grid.node(i, 0)][0]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViolationStats {
    pub min: f64,
    pub max: f64,
    /// `100·min/max`; zero for an identically zero field.
    pub min_over_max_percent: f64,
    /// Share of nodes strictly below the lower bound, in percent.
    pub percent_nodes_violating: f64,
}

pub fn violation_stats(values: &[f64], bounds: Bounds) -> ViolationStats {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ratio = if max != 0.0 { 100.0 * min / max } else { 0.0 };
    let below = values.iter().filter(|&&v| v < bounds.min).count();
    let percent = if values.is_empty() { 0.0 } else { 100.0 * below as f64 / values.len() as f64 };
    ViolationStats { min, max, min_over_max_percent: ratio, percent_nodes_violating: percent }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceFit {
    /// Least-squares slope of `log e` against `log h`.
    pub slope: f64,
    /// Slopes between consecutive refinements.
    pub pairwise: Vec<f64>,
}

pub fn convergence_rates(data: &[(f64, f64)]) -> Result<ConvergenceFit> {
    if data.len() < 2 {
        return Err(Error::InvalidInput("need at least two (h, error) pairs".into()));
    }
    if data.iter().any(|&(h, e)| !(h > 0.0 && e > 0.0)) {
        return Err(Error::InvalidInput("mesh sizes and errors must be positive".into()));
    }
    let logs: Vec<(f64, f64)> = data.iter().map(|&(h, e)| (h.ln(), e.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("all mesh sizes are equal".into()));
    }
    let pairwise = logs.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    Ok(ConvergenceFit { slope: sxy / sxx, pairwise })
}

/// Header and row for the per-field violation report.
pub const VIOLATION_HEADER: &str = "mesh,quantity,formulation,min,max,ratio_percent,violated_percent";

pub fn violation_row(mesh: &str, quantity: &str, formulation: &str, s: &ViolationStats) -> String {
    format!(
        "{mesh},{quantity},{formulation},{:.6e},{:.6e},{:.4},{:.4}",
        s.min, s.max, s.min_over_max_percent, s.percent_nodes_violating
    )
}

pub const ERROR_HEADER: &str = "mesh,quantity,formulation,h,l2,h1";

pub fn error_row(mesh: &str, quantity: &str, formulation: &str, h: f64, l2: f64, h1: Option<f64>) -> String {
    let h1 = h1.map_or(String::new(), |v| format!("{v:.6e}"));
    format!("{mesh},{quantity},{formulation},{h:.6e},{l2:.6e},{h1}")
}
