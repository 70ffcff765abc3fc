//! Steady and backward-Euler solves of one diffusion(-decay) equation under
//! the three formulations.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::assembly::AssembledSystem;
use crate::boxqp::{self, BoxQp, QpOptions, QpSolution};
use crate::cholesky::Cholesky;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    /// Unconstrained single-field solve.
    Galerkin,
    /// Galerkin followed by projection onto the bounds.
    Clipped,
    /// Bound-constrained QP.
    Constrained,
}

impl Formulation {
    pub const ALL: [Formulation; 3] = [Formulation::Galerkin, Formulation::Clipped, Formulation::Constrained];
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::Galerkin => "galerkin",
            Formulation::Clipped => "clipped",
            Formulation::Constrained => "constrained",
        })
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "galerkin" => Ok(Formulation::Galerkin),
            "clipped" | "clipping" => Ok(Formulation::Clipped),
            "constrained" | "nonnegative" | "qp" => Ok(Formulation::Constrained),
            other => Err(Error::Config(format!("unknown formulation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quantity {
    F,
    G,
    A,
    B,
    C,
    LambdaMinF,
    LambdaMaxF,
    LambdaMinG,
    LambdaMaxG,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::F => "F",
            Quantity::G => "G",
            Quantity::A => "A",
            Quantity::B => "B",
            Quantity::C => "C",
            Quantity::LambdaMinF => "lambda_min_F",
            Quantity::LambdaMaxF => "lambda_max_F",
            Quantity::LambdaMinG => "lambda_min_G",
            Quantity::LambdaMaxG => "lambda_max_G",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-node values of one quantity. `time` is `None` for steady fields.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
    pub quantity: Quantity,
    pub formulation: Formulation,
    pub time: Option<f64>,
}

impl NodalField {
    pub fn new(values: Vec<f64>, quantity: Quantity, formulation: Formulation, time: Option<f64>) -> Self {
        Self { values, quantity, formulation, time }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if min.is_nan() || max.is_nan() || min > max || min == f64::INFINITY || max == f64::NEG_INFINITY {
            return Err(Error::InvalidInput(format!("invalid bounds [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    pub fn non_negative() -> Self {
        Self { min: 0.0, max: f64::INFINITY }
    }

    pub fn unbounded() -> Self {
        Self { min: f64::NEG_INFINITY, max: f64::INFINITY }
    }

    pub fn contains(&self, v: f64, slack: f64) -> bool {
        v >= self.min - slack && v <= self.max + slack
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Self::non_negative()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolverOptions {
    pub qp: QpOptions,
}

/// One solved field over all nodes. `qp` lives on the free dofs.
#[derive(Debug, Clone)]
pub struct Solve {
    pub values: Vec<f64>,
    pub qp: Option<QpSolution>,
}

impl Solve {
    /// Lower/upper multipliers scattered to nodes (zero on Dirichlet nodes).
    pub fn multiplier_fields(&self, free_dofs: &[usize], ndofs: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![0.0; ndofs];
        let mut hi = vec![0.0; ndofs];
        if let Some(qp) = &self.qp {
            for (k, &i) in free_dofs.iter().enumerate() {
                lo[i] = qp.lambda_min[k];
                hi[i] = qp.lambda_max[k];
            }
        }
        (lo, hi)
    }
}

/// Operator `H` split into free/Dirichlet blocks, with the free block's
/// factorization computed on first use. Shared between invariants and
/// across time levels.
pub struct ReducedOperator {
    ndofs: usize,
    free: Vec<usize>,
    dirichlet: Vec<usize>,
    h_ff: CsrMatrix,
    h_fd: CsrMatrix,
    chol: OnceLock<Cholesky>,
}

impl ReducedOperator {
    pub fn new(h: &CsrMatrix, system: &AssembledSystem) -> Self {
        let free = system.free_dofs.clone();
        let dirichlet = system.dirichlet_dofs();
        Self {
            ndofs: h.nrows(),
            h_ff: h.submatrix(&free, &free),
            h_fd: h.submatrix(&free, &dirichlet),
            free,
            dirichlet,
            chol: OnceLock::new(),
        }
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn free_block(&self) -> &CsrMatrix {
        &self.h_ff
    }

    fn factor(&self) -> Result<&Cholesky> {
        if let Some(c) = self.chol.get() {
            return Ok(c);
        }
        let c = Cholesky::factor(&self.h_ff)?;
        Ok(self.chol.get_or_init(|| c))
    }

    /// `rhs_F − H_FD c_D`
    fn reduced_rhs(&self, rhs: &[f64], dirichlet: &[(usize, f64)]) -> Result<Vec<f64>> {
        if dirichlet.len() != self.dirichlet.len() {
            return Err(Error::InvalidInput("Dirichlet values do not match the partition".into()));
        }
        let cd: Vec<f64> = dirichlet.iter().map(|&(_, v)| v).collect();
        let lift = self.h_fd.mul_vec(&cd);
        Ok(self.free.iter().zip(&lift).map(|(&i, l)| rhs[i] - l).collect())
    }

    fn expand(&self, free_values: &[f64], dirichlet: &[(usize, f64)]) -> Vec<f64> {
        let mut out = vec![0.0; self.ndofs];
        for (k, &i) in self.free.iter().enumerate() {
            out[i] = free_values[k];
        }
        for &(i, v) in dirichlet {
            out[i] = v;
        }
        out
    }

    /// Solves `H c = rhs` on the free dofs with `c = c_D` on Dirichlet dofs.
    pub fn solve(
        &self,
        rhs: &[f64],
        dirichlet: &[(usize, f64)],
        bounds: Bounds,
        formulation: Formulation,
        warm_start: Option<&[f64]>,
        opts: &SolverOptions,
    ) -> Result<Solve> {
        let g = self.reduced_rhs(rhs, dirichlet)?;
        match formulation {
            Formulation::Galerkin | Formulation::Clipped => {
                let mut c = if g.is_empty() { Vec::new() } else { self.factor()?.solve_refined(&self.h_ff, &g, 2) };
                if formulation == Formulation::Clipped {
                    c.iter_mut().for_each(|v| *v = bounds.clamp(*v));
                }
                let mut values = self.expand(&c, dirichlet);
                if formulation == Formulation::Clipped {
                    values.iter_mut().for_each(|v| *v = bounds.clamp(*v));
                }
                Ok(Solve { values, qp: None })
            }
            Formulation::Constrained => {
                let problem = BoxQp::uniform(self.h_ff.clone(), g, bounds.min, bounds.max)?;
                let warm: Option<Vec<f64>> = warm_start.map(|w| self.free.iter().map(|&i| w[i]).collect());
                let qp = boxqp::solve(&problem, warm.as_deref(), &opts.qp)?;
                let values = self.expand(&qp.c, dirichlet);
                Ok(Solve { values, qp: Some(qp) })
            }
        }
    }
}

/// Steady solve of `K c = f` with the system's Dirichlet values.
pub fn solve_steady(
    system: &AssembledSystem,
    f: &[f64],
    bounds: Bounds,
    formulation: Formulation,
    opts: &SolverOptions,
) -> Result<Solve> {
    if system.dirichlet.is_empty() {
        return Err(Error::InvalidProblem("steady problem needs a non-empty Dirichlet boundary".into()));
    }
    let op = ReducedOperator::new(&system.k, system);
    op.solve(f, &system.dirichlet, bounds, formulation, None, opts)
}

/// Load vector and Dirichlet values at a given time.
pub type TimeData<'a> = dyn Fn(f64) -> Result<(Vec<f64>, Vec<(usize, f64)>)> + Sync + 'a;

/// Capacity-plus-stiffness operator `M/Δt + K`.
pub fn transient_operator(system: &AssembledSystem, dt: f64) -> Result<CsrMatrix> {
    system.m.linear_combination(1.0 / dt, &system.k, 1.0)
}

/// Backward-Euler levels `t₁ … t_N`. Each level solves with Hessian
/// `M/Δt + K` and linear term `f(tₙ₊₁) + M cⁿ / Δt`; Dirichlet data is taken
/// at `tₙ₊₁`. Constrained levels warm-start from the previous level.
#[allow(clippy::too_many_arguments)]
pub fn solve_transient(
    system: &AssembledSystem,
    data: &TimeData<'_>,
    initial: &[f64],
    bounds: Bounds,
    formulation: Formulation,
    dt: f64,
    n_steps: usize,
    opts: &SolverOptions,
) -> Result<Vec<Solve>> {
    check_transient_inputs(system, initial, bounds, formulation, dt, n_steps)?;
    let h = transient_operator(system, dt)?;
    let op = ReducedOperator::new(&h, system);
    let mut state = initial.to_vec();
    let mut out = Vec::with_capacity(n_steps);
    for step in 1..=n_steps {
        let t = step as f64 * dt;
        let solve = transient_step(&op, system, data, &state, t, dt, bounds, formulation, opts)?;
        state.clone_from(&solve.values);
        out.push(solve);
    }
    Ok(out)
}

pub(crate) fn check_transient_inputs(
    system: &AssembledSystem,
    initial: &[f64],
    bounds: Bounds,
    formulation: Formulation,
    dt: f64,
    n_steps: usize,
) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    if n_steps == 0 {
        return Err(Error::InvalidInput("number of time steps must be positive".into()));
    }
    if initial.len() != system.ndofs() {
        return Err(Error::InvalidInput("initial field has the wrong length".into()));
    }
    if formulation == Formulation::Constrained && !initial.iter().all(|&v| bounds.contains(v, 0.0)) {
        return Err(Error::InvalidInput("initial field violates the bounds".into()));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn transient_step(
    op: &ReducedOperator,
    system: &AssembledSystem,
    data: &TimeData<'_>,
    state: &[f64],
    t: f64,
    dt: f64,
    bounds: Bounds,
    formulation: Formulation,
    opts: &SolverOptions,
) -> Result<Solve> {
    let (load, dirichlet) = data(t)?;
    let mc = system.m.mul_vec(state);
    let rhs: Vec<f64> = load.iter().zip(&mc).map(|(f, m)| f + m / dt).collect();
    op.solve(&rhs, &dirichlet, bounds, formulation, Some(state), opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble, assemble_operators, load_vector, AssemblyOptions, BoundaryData, Source};
    use crate::fields::{ScalarField, Tensor2, TensorField};
    use crate::mesh::{generate_structured, ElementKind};

    fn anisotropic() -> TensorField {
        TensorField::constant(Tensor2::diag(1000.0, 1.0).rotated(std::f64::consts::FRAC_PI_3))
    }

    #[test]
    fn zero_data_gives_zero_everywhere() {
        let mesh = generate_structured([0.0, 0.0], [2.0, 1.0], [9, 9], ElementKind::Quad4).unwrap();
        let (sys, f) =
            assemble(&mesh, &anisotropic(), &Source::none(), &BoundaryData::new(), &BoundaryData::new()).unwrap();
        for form in Formulation::ALL {
            let s = solve_steady(&sys, &f, Bounds::non_negative(), form, &SolverOptions::default()).unwrap();
            assert!(s.values.iter().all(|&v| v == 0.0), "{form}");
        }
    }

    #[test]
    fn clipping_is_exact_projection() {
        let mesh = generate_structured([0.0, 0.0], [2.0, 1.0], [11, 11], ElementKind::Quad4).unwrap();
        let src = Source::points(vec![crate::assembly::PointSource { position: [1.0, 0.5], rate: 1.0 }]);
        let (sys, f) = assemble(&mesh, &anisotropic(), &src, &BoundaryData::new(), &BoundaryData::new()).unwrap();
        let opts = SolverOptions::default();
        let gal = solve_steady(&sys, &f, Bounds::non_negative(), Formulation::Galerkin, &opts).unwrap();
        assert!(gal.values.iter().any(|&v| v < 0.0), "anisotropy should produce undershoots");
        let clip = solve_steady(&sys, &f, Bounds::non_negative(), Formulation::Clipped, &opts).unwrap();
        for (c, g) in clip.values.iter().zip(&gal.values) {
            assert_eq!(*c, g.max(0.0));
        }
        let con = solve_steady(&sys, &f, Bounds::non_negative(), Formulation::Constrained, &opts).unwrap();
        assert!(con.values.iter().all(|&v| v >= 0.0));
        assert!(con.qp.unwrap().active_lower() > 0);
    }

    #[test]
    fn constrained_equals_galerkin_when_interior() {
        let mesh = generate_structured([0.0, 0.0], [1.0, 1.0], [9, 9], ElementKind::Tri3).unwrap();
        let mut dir = BoundaryData::new();
        for m in ["left", "right", "top", "bottom"] {
            dir.insert(m.into(), ScalarField::constant(1.0));
        }
        let (sys, f) = assemble(
            &mesh,
            &TensorField::constant(Tensor2::identity()),
            &Source::volumetric(ScalarField::constant(1.0)),
            &BoundaryData::new(),
            &dir,
        )
        .unwrap();
        let opts = SolverOptions::default();
        let gal = solve_steady(&sys, &f, Bounds::non_negative(), Formulation::Galerkin, &opts).unwrap();
        let con = solve_steady(&sys, &f, Bounds::non_negative(), Formulation::Constrained, &opts).unwrap();
        for (a, b) in gal.values.iter().zip(&con.values) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn transient_rejects_bad_controls() {
        let mesh = generate_structured([0.0, 0.0], [1.0, 1.0], [3, 3], ElementKind::Quad4).unwrap();
        let sys = assemble_operators(&mesh, &TensorField::constant(Tensor2::identity()), AssemblyOptions::default())
            .unwrap();
        let dir = sys.dirichlet.clone();
        let data = move |_t: f64| Ok((vec![0.0; 9], dir.clone()));
        let init = vec![0.0; 9];
        let opts = SolverOptions::default();
        let b = Bounds::non_negative();
        assert!(solve_transient(&sys, &data, &init, b, Formulation::Galerkin, 0.1, 0, &opts).is_err());
        assert!(solve_transient(&sys, &data, &init, b, Formulation::Galerkin, -0.1, 3, &opts).is_err());
        let neg = vec![-1.0; 9];
        assert!(solve_transient(&sys, &data, &neg, b, Formulation::Constrained, 0.1, 3, &opts).is_err());
        let levels = solve_transient(&sys, &data, &init, b, Formulation::Constrained, 0.1, 3, &opts).unwrap();
        assert_eq!(levels.len(), 3);
        assert!(levels.iter().all(|l| l.values.iter().all(|&v| v == 0.0)));
    }

    /// Decay of the lowest mode on a Neumann-free 1D-like strip: the
    /// backward-Euler error against the semi-discrete exact solution halves
    /// with the step.
    #[test]
    fn backward_euler_is_first_order() {
        let mesh = generate_structured([0.0, 0.0], [1.0, 0.1], [11, 2], ElementKind::Quad4).unwrap();
        let mut mesh = mesh;
        mesh.set_role("top", crate::mesh::BcRole::Neumann);
        mesh.set_role("bottom", crate::mesh::BcRole::Neumann);
        let sys = assemble_operators(&mesh, &TensorField::constant(Tensor2::identity()), AssemblyOptions::default())
            .unwrap();
        let dir = sys.dirichlet.clone();
        let nn = mesh.num_nodes();
        let data = move |_t: f64| Ok((vec![0.0; nn], dir.clone()));
        let init: Vec<f64> = mesh.nodes.iter().map(|p| (std::f64::consts::PI * p[0]).sin()).collect();
        let opts = SolverOptions::default();
        let run = |dt: f64| {
            let n = (0.5 / dt).round() as usize;
            let levels = solve_transient(&sys, &data, &init, Bounds::unbounded(), Formulation::Galerkin, dt, n, &opts)
                .unwrap();
            levels.last().unwrap().values.clone()
        };
        let reference = run(0.5 / 4096.0);
        let err = |dt: f64| {
            run(dt).iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let dts = [0.05, 0.025, 0.0125];
        let errs: Vec<f64> = dts.iter().map(|&dt| err(dt)).collect();
        for k in 0..2 {
            let order = (errs[k] / errs[k + 1]).ln() / 2f64.ln();
            assert!(order >= 0.9, "observed order {order}");
        }
        let _ = load_vector;
    }
}
