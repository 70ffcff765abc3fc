//! Scalar and tensor fields evaluated at points of the domain.

use std::fmt;
use std::sync::Arc;

use crate::mesh::Point;

/// Symmetric 2×2 tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Tensor2 {
    pub const ZERO: Tensor2 = Tensor2 { xx: 0.0, xy: 0.0, yy: 0.0 };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Self::new(a, 0.0, b)
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(s * self.xx, s * self.xy, s * self.yy)
    }

    pub fn add(self, o: Tensor2) -> Self {
        Self::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    /// `v ⊗ v`
    pub fn outer(v: [f64; 2]) -> Self {
        Self::new(v[0] * v[0], v[0] * v[1], v[1] * v[1])
    }

    /// `R T Rᵀ` with `R` the counterclockwise rotation by `theta`.
    pub fn rotated(self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let xx = c * c * self.xx - 2.0 * s * c * self.xy + s * s * self.yy;
        let yy = s * s * self.xx + 2.0 * s * c * self.xy + c * c * self.yy;
        let xy = s * c * (self.xx - self.yy) + (c * c - s * s) * self.xy;
        Self::new(xx, xy, yy)
    }

    pub fn apply(self, v: [f64; 2]) -> [f64; 2] {
        [self.xx * v[0] + self.xy * v[1], self.xy * v[0] + self.yy * v[1]]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(self) -> [f64; 2] {
        let mean = 0.5 * (self.xx + self.yy);
        let r = (0.5 * (self.xx - self.yy)).hypot(self.xy);
        [mean - r, mean + r]
    }

    pub fn is_positive_definite(self) -> bool {
        self.xx > 0.0 && self.xx * self.yy - self.xy * self.xy > 0.0 && self.eigenvalues()[0] > 0.0
    }
}

type TensorFn = dyn Fn(Point) -> Tensor2 + Send + Sync;
type ScalarFn = dyn Fn(Point, f64) -> f64 + Send + Sync;

/// Position-dependent diffusivity.
#[derive(Clone)]
pub struct TensorField(Arc<TensorFn>);

impl TensorField {
    pub fn new(f: impl Fn(Point) -> Tensor2 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn constant(t: Tensor2) -> Self {
        Self::new(move |_| t)
    }

    pub fn eval(&self, p: Point) -> Tensor2 {
        (self.0)(p)
    }

    pub fn rotated(&self, theta: f64) -> Self {
        let inner = self.clone();
        Self::new(move |p| inner.eval(p).rotated(theta))
    }
}

impl fmt::Debug for TensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TensorField(..)")
    }
}

/// Scalar field in space and time. Steady data ignores `t`.
#[derive(Clone)]
pub struct ScalarField(Arc<ScalarFn>);

impl ScalarField {
    pub fn new(f: impl Fn(Point, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn steady(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(move |p, _| f(p))
    }

    pub fn constant(v: f64) -> Self {
        Self::new(move |_, _| v)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn eval(&self, p: Point, t: f64) -> f64 {
        (self.0)(p, t)
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> ScalarField {
        let (u, v) = (self.clone(), other.clone());
        ScalarField::new(move |p, t| a * u.eval(p, t) + b * v.eval(p, t))
    }
}

impl Default for ScalarField {
    fn default() -> Self {
        Self::zero()
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarField(..)")
    }
}
