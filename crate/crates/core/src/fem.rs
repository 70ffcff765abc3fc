//! Quadrature rules and low-order shape functions.

use crate::error::{Error, Result};
use crate::mesh::{ElementKind, Point};

/// Shape-function data at one quadrature point of a physical element.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub x: Point,
    /// Quadrature weight times the Jacobian determinant.
    pub weight: f64,
    pub shape: [f64; 4],
    pub grad: [[f64; 2]; 4],
}

fn gauss_legendre(n: usize) -> (&'static [f64], &'static [f64]) {
    const P1: [f64; 1] = [0.0];
    const W1: [f64; 1] = [2.0];
    const P2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];
    const W2: [f64; 2] = [1.0, 1.0];
    const P3: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const W3: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    const P4: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];
    const W4: [f64; 4] = [
        0.347_854_845_137_453_9,
        0.652_145_154_862_546_1,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
    ];
    match n {
        1 => (&P1, &W1),
        2 => (&P2, &W2),
        3 => (&P3, &W3),
        _ => (&P4, &W4),
    }
}

/// Points on `[-1, 1]` and weights of the Gauss rule exact to `degree`.
pub fn gauss_1d(degree: usize) -> (&'static [f64], &'static [f64]) {
    gauss_legendre((degree + 2) / 2)
}

/// Reference-element rule `(xi, eta, weight)` exact for polynomials of
/// total degree `degree` (triangles) or per-direction degree (quads).
pub fn reference_rule(kind: ElementKind, degree: usize) -> Vec<(f64, f64, f64)> {
    match kind {
        ElementKind::Quad4 => {
            let (p, w) = gauss_1d(degree);
            let mut out = Vec::with_capacity(p.len() * p.len());
            for (j, &eta) in p.iter().enumerate() {
                for (i, &xi) in p.iter().enumerate() {
                    out.push((xi, eta, w[i] * w[j]));
                }
            }
            out
        }
        ElementKind::Tri3 => triangle_rule(degree),
    }
}

fn triangle_rule(degree: usize) -> Vec<(f64, f64, f64)> {
    let sym3 = |a: f64, w: f64| vec![(a, a, w), (1.0 - 2.0 * a, a, w), (a, 1.0 - 2.0 * a, w)];
    match degree {
        0 | 1 => vec![(1.0 / 3.0, 1.0 / 3.0, 0.5)],
        2 => sym3(1.0 / 6.0, 1.0 / 6.0),
        3 | 4 => {
            let mut r = sym3(0.445_948_490_915_965, 0.223_381_589_678_011 / 2.0);
            r.extend(sym3(0.091_576_213_509_771, 0.109_951_743_655_322 / 2.0));
            r
        }
        _ => {
            let mut r = vec![(1.0 / 3.0, 1.0 / 3.0, 0.225 / 2.0)];
            r.extend(sym3(0.470_142_064_105_115, 0.132_394_152_788_506 / 2.0));
            r.extend(sym3(0.101_286_507_323_456, 0.125_939_180_544_827 / 2.0));
            r
        }
    }
}

/// Shape values and reference derivatives at `(xi, eta)`.
pub fn reference_shape(kind: ElementKind, xi: f64, eta: f64) -> ([f64; 4], [[f64; 2]; 4]) {
    match kind {
        ElementKind::Tri3 => (
            [1.0 - xi - eta, xi, eta, 0.0],
            [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]],
        ),
        ElementKind::Quad4 => {
            const S: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
            let mut n = [0.0; 4];
            let mut dn = [[0.0; 2]; 4];
            for a in 0..4 {
                let (sx, sy) = (S[a][0], S[a][1]);
                n[a] = 0.25 * (1.0 + sx * xi) * (1.0 + sy * eta);
                dn[a] = [0.25 * sx * (1.0 + sy * eta), 0.25 * sy * (1.0 + sx * xi)];
            }
            (n, dn)
        }
    }
}

/// Maps a reference point into the element and returns physical shape data.
pub fn map_point(coords: &[Point], kind: ElementKind, xi: f64, eta: f64) -> std::result::Result<QuadPoint, f64> {
    let (shape, dref) = reference_shape(kind, xi, eta);
    let nn = kind.nodes_per_element();
    let mut x = [0.0; 2];
    let mut jac = [[0.0; 2]; 2];
    for a in 0..nn {
        for d in 0..2 {
            x[d] += shape[a] * coords[a][d];
            jac[d][0] += coords[a][d] * dref[a][0];
            jac[d][1] += coords[a][d] * dref[a][1];
        }
    }
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    if det.is_nan() || det <= 0.0 {
        return Err(det);
    }
    // grad N = J^{-T} dN/dxi
    let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
    let mut grad = [[0.0; 2]; 4];
    for a in 0..nn {
        grad[a] = [
            inv[0][0] * dref[a][0] + inv[1][0] * dref[a][1],
            inv[0][1] * dref[a][0] + inv[1][1] * dref[a][1],
        ];
    }
    Ok(QuadPoint { x, weight: det, shape, grad })
}

/// All quadrature points of one element.
pub fn element_quadrature(coords: &[Point], kind: ElementKind, degree: usize, element: usize) -> Result<Vec<QuadPoint>> {
    reference_rule(kind, degree)
        .into_iter()
        .map(|(xi, eta, w)| {
            map_point(coords, kind, xi, eta)
                .map(|mut qp| {
                    qp.weight *= w;
                    qp
                })
                .map_err(|jacobian| Error::ElementInversion { element, jacobian })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_monomials() {
        // ∫_T x^2 y^2 over the reference triangle = 2!2!/6! = 1/180.
        let r = reference_rule(ElementKind::Tri3, 4);
        let s: f64 = r.iter().map(|&(x, y, w)| w * x * x * y * y).sum();
        assert!((s - 1.0 / 180.0).abs() < 1e-12);
        // x^2 over the triangle = 1/12, degree 2 rule.
        let r = reference_rule(ElementKind::Tri3, 2);
        let s: f64 = r.iter().map(|&(x, _, w)| w * x * x).sum();
        assert!((s - 1.0 / 12.0).abs() < 1e-14);
        // x^3 y^3 on the square integrates to 0, x^2 y^2 to 4/9.
        let r = reference_rule(ElementKind::Quad4, 3);
        let s: f64 = r.iter().map(|&(x, y, w)| w * x * x * y * y).sum();
        assert!((s - 4.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn partition_of_unity() {
        for kind in [ElementKind::Tri3, ElementKind::Quad4] {
            let (n, dn) = reference_shape(kind, 0.21, 0.33);
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert!(dn.iter().map(|d| d[0]).sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn inverted_element_reports_jacobian() {
        let coords = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        assert!(matches!(
            element_quadrature(&coords, ElementKind::Tri3, 2, 7),
            Err(Error::ElementInversion { element: 7, .. })
        ));
    }
}
