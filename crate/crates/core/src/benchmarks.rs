//! Ready-to-run problem definitions: a manufactured solution, a reaction
//! tank fed through the left face, continuous point sources, a decaying
//! slug, and a 1D family showing that the comparison principle fails.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::assembly::{AssembledSystem, BoundaryData, PointSource, Source};
use crate::error::{Error, Result};
use crate::fields::{ScalarField, Tensor2, TensorField};
use crate::mesh::{generate_structured, BcRole, ElementKind, Mesh, Point, BOTTOM, LEFT, RIGHT, TOP};
use crate::reaction::{recover_point, ProblemSpec, SpeciesData, Stoichiometry, TimeControl};
use crate::solvers::{Bounds, Formulation, Quantity, ReducedOperator, SolverOptions};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchmarkId {
    Manufactured,
    Tank,
    PointSources,
    Slug,
    ComparisonCounterexample,
}

impl BenchmarkId {
    pub const ALL: [BenchmarkId; 5] = [
        BenchmarkId::Manufactured,
        BenchmarkId::Tank,
        BenchmarkId::PointSources,
        BenchmarkId::Slug,
        BenchmarkId::ComparisonCounterexample,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkId::Manufactured => "manufactured",
            BenchmarkId::Tank => "tank",
            BenchmarkId::PointSources => "point_sources",
            BenchmarkId::Slug => "slug",
            BenchmarkId::ComparisonCounterexample => "comparison_counterexample",
        }
    }

    /// Nodes per side used when none are requested.
    pub fn default_seeds(self) -> usize {
        match self {
            BenchmarkId::Manufactured => 21,
            BenchmarkId::Tank => 97,
            BenchmarkId::PointSources => 21,
            BenchmarkId::Slug => 101,
            BenchmarkId::ComparisonCounterexample => 7,
        }
    }
}

impl serde::Serialize for BenchmarkId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchmarkId::ALL
            .into_iter()
            .find(|b| b.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown benchmark `{s}`")))
    }
}

const SIDES: [&str; 4] = [LEFT, RIGHT, BOTTOM, TOP];

fn all_sides(field: &ScalarField) -> BoundaryData {
    SIDES.iter().map(|s| (s.to_string(), field.clone())).collect()
}

// ---------------------------------------------------------------------------
// Manufactured solution

pub const MANUFACTURED_LENGTHS: [f64; 2] = [2.0, 1.0];

/// Parameters of the manufactured problem.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedParams {
    pub lx: f64,
    pub ly: f64,
    pub theta: f64,
    pub d1: f64,
    pub d2: f64,
    pub stoichiometry: Stoichiometry,
}

impl Default for ManufacturedParams {
    fn default() -> Self {
        Self {
            lx: MANUFACTURED_LENGTHS[0],
            ly: MANUFACTURED_LENGTHS[1],
            theta: PI / 3.0,
            d1: 1000.0,
            d2: 1.0,
            stoichiometry: Stoichiometry { n_a: 2.0, n_b: 3.0, n_c: 1.0 },
        }
    }
}

impl ManufacturedParams {
    fn waves(&self) -> (f64, f64) {
        (PI / (2.0 * self.lx), PI / (2.0 * self.ly))
    }

    pub fn tensor(&self) -> Tensor2 {
        Tensor2::diag(self.d1, self.d2).rotated(self.theta)
    }

    pub fn exact_f(&self, p: Point) -> f64 {
        let (a, b) = self.waves();
        (a * p[0]).sin() * (b * p[1]).sin()
    }

    pub fn exact_g(&self, p: Point) -> f64 {
        let (a, b) = self.waves();
        (a * p[0]).cos() * (b * p[1]).cos()
    }

    pub fn grad_f(&self, p: Point) -> [f64; 2] {
        let (a, b) = self.waves();
        [a * (a * p[0]).cos() * (b * p[1]).sin(), b * (a * p[0]).sin() * (b * p[1]).cos()]
    }

    pub fn grad_g(&self, p: Point) -> [f64; 2] {
        let (a, b) = self.waves();
        [-a * (a * p[0]).sin() * (b * p[1]).cos(), -b * (a * p[0]).cos() * (b * p[1]).sin()]
    }

    /// Common factor of the principal term of both sources.
    fn principal(&self) -> f64 {
        let (s, c) = self.theta.sin_cos();
        let (lx2, ly2) = (self.lx * self.lx, self.ly * self.ly);
        PI * PI / 4.0 * (self.d1 * (c * c / lx2 + s * s / ly2) + self.d2 * (s * s / lx2 + c * c / ly2))
    }

    fn cross(&self) -> f64 {
        let (s, c) = self.theta.sin_cos();
        PI * PI / (2.0 * self.lx * self.ly) * (self.d1 - self.d2) * s * c
    }

    pub fn source_f(&self, p: Point) -> f64 {
        let (a, b) = self.waves();
        self.principal() * (a * p[0]).sin() * (b * p[1]).sin()
            - self.cross() * (a * p[0]).cos() * (b * p[1]).cos()
    }

    pub fn source_g(&self, p: Point) -> f64 {
        let (a, b) = self.waves();
        self.principal() * (a * p[0]).cos() * (b * p[1]).cos()
            - self.cross() * (a * p[0]).sin() * (b * p[1]).sin()
    }

    /// Exact species from the exact invariants.
    pub fn exact_species(&self, p: Point) -> (f64, f64, f64) {
        recover_point(self.exact_f(p), self.exact_g(p), &self.stoichiometry, 0.0)
    }

    pub fn exact(&self, q: Quantity) -> ScalarField {
        let me = *self;
        match q {
            Quantity::F => ScalarField::steady(move |p| me.exact_f(p)),
            Quantity::G => ScalarField::steady(move |p| me.exact_g(p)),
            Quantity::A => ScalarField::steady(move |p| me.exact_species(p).0),
            Quantity::B => ScalarField::steady(move |p| me.exact_species(p).1),
            Quantity::C => ScalarField::steady(move |p| me.exact_species(p).2),
            _ => ScalarField::zero(),
        }
    }
}

/// Steady problem with the exact invariants as Dirichlet data on every
/// side. Species data: `A` carries the `F` data, `B` the `G` data, `C` none,
/// so the invariants see exactly the manufactured sources. The sources are
/// sign-indefinite, hence the non-negativity check is waived.
pub fn manufactured(seeds: [usize; 2], kind: ElementKind) -> Result<ProblemSpec> {
    manufactured_with(ManufacturedParams::default(), seeds, kind)
}

pub fn manufactured_with(params: ManufacturedParams, seeds: [usize; 2], kind: ElementKind) -> Result<ProblemSpec> {
    let mesh = generate_structured([0.0, 0.0], [params.lx, params.ly], seeds, kind)?;
    let p = params;
    let species_a = SpeciesData {
        source: Source::volumetric(ScalarField::steady(move |x| p.source_f(x))),
        dirichlet: all_sides(&p.exact(Quantity::F)),
        ..Default::default()
    };
    let species_b = SpeciesData {
        source: Source::volumetric(ScalarField::steady(move |x| p.source_g(x))),
        dirichlet: all_sides(&p.exact(Quantity::G)),
        ..Default::default()
    };
    Ok(ProblemSpec {
        name: BenchmarkId::Manufactured.to_string(),
        mesh: Arc::new(mesh),
        tensor: TensorField::constant(params.tensor()),
        stoichiometry: params.stoichiometry,
        species: [species_a, species_b, SpeciesData::default()],
        time: TimeControl::Steady,
        bounds_f: Bounds::new(0.0, 1.0)?,
        bounds_g: Bounds::new(0.0, 1.0)?,
        require_nonnegative_data: false,
    })
}

// ---------------------------------------------------------------------------
// Velocity-based dispersion tensor

/// Multi-mode stream function `ψ = −y − Σ A_k cos(p_k π x/L_x − π/2) sin(q_k π y/L_y)`.
#[derive(Debug, Clone, Copy)]
pub struct StreamFunction {
    pub lx: f64,
    pub ly: f64,
    pub p: [f64; 3],
    pub q: [f64; 3],
    pub amplitude: [f64; 3],
}

impl StreamFunction {
    pub fn new(lx: f64, ly: f64) -> Self {
        Self { lx, ly, p: [4.0, 5.0, 10.0], q: [1.0, 5.0, 10.0], amplitude: [0.08, 0.02, 0.01] }
    }

    pub fn psi(&self, x: Point) -> f64 {
        -x[1]
            - (0..3)
                .map(|k| {
                    self.amplitude[k]
                        * (self.p[k] * PI * x[0] / self.lx - PI / 2.0).cos()
                        * (self.q[k] * PI * x[1] / self.ly).sin()
                })
                .sum::<f64>()
    }

    /// `v = (−∂ψ/∂y, ∂ψ/∂x)`
    pub fn velocity(&self, x: Point) -> [f64; 2] {
        let mut v = [1.0, 0.0];
        for k in 0..3 {
            let (kx, ky) = (self.p[k] * PI / self.lx, self.q[k] * PI / self.ly);
            let phase = kx * x[0] - PI / 2.0;
            v[0] += self.amplitude[k] * ky * phase.cos() * (ky * x[1]).cos();
            v[1] += self.amplitude[k] * kx * phase.sin() * (ky * x[1]).sin();
        }
        v
    }
}

/// `α_T |v| I + (α_L − α_T)/|v| v⊗v`, with an isotropic `α_T I` fallback
/// where the velocity vanishes.
pub fn dispersion_tensor(v: [f64; 2], alpha_l: f64, alpha_t: f64) -> Tensor2 {
    let speed = v[0].hypot(v[1]);
    if speed < 1e-12 {
        return Tensor2::identity().scale(alpha_t);
    }
    Tensor2::identity().scale(alpha_t * speed).add(Tensor2::outer(v).scale((alpha_l - alpha_t) / speed))
}

pub const ALPHA_L: f64 = 1.0;
pub const ALPHA_T: f64 = 1e-4;

pub fn subsurface_tensor(stream: StreamFunction) -> TensorField {
    TensorField::new(move |x| dispersion_tensor(stream.velocity(x), ALPHA_L, ALPHA_T))
}

// ---------------------------------------------------------------------------
// Reaction tank

pub const TANK_LENGTHS: [f64; 2] = [2.0, 1.0];
pub const INLET_A: &str = "inlet_a";
pub const INLET_B: &str = "inlet_b";

/// Left-face inlets: `A` enters through the bottom sixth, `B` through the
/// top sixth; every other boundary is impermeable.
pub fn tank(seeds: [usize; 2], kind: ElementKind) -> Result<ProblemSpec> {
    let [lx, ly] = TANK_LENGTHS;
    let mut mesh = generate_structured([0.0, 0.0], [lx, ly], seeds, kind)?;
    let tol = 1e-12 * ly;
    mesh.remark_edges(|mid, marker| {
        if marker != LEFT {
            None
        } else if mid[1] <= ly / 6.0 + tol {
            Some(INLET_A.into())
        } else if mid[1] >= 5.0 * ly / 6.0 - tol {
            Some(INLET_B.into())
        } else {
            None
        }
    });
    for side in SIDES {
        mesh.set_role(side, BcRole::Neumann);
    }
    mesh.set_role(INLET_A, BcRole::Dirichlet);
    mesh.set_role(INLET_B, BcRole::Dirichlet);

    let mut species: [SpeciesData; 3] = Default::default();
    species[0].dirichlet.insert(INLET_A.into(), ScalarField::constant(1.0));
    species[1].dirichlet.insert(INLET_B.into(), ScalarField::constant(10.0));
    Ok(ProblemSpec {
        name: BenchmarkId::Tank.to_string(),
        mesh: Arc::new(mesh),
        tensor: subsurface_tensor(StreamFunction::new(lx, ly)),
        stoichiometry: Stoichiometry::new(1.0, 1.0, 2.0)?,
        species,
        time: TimeControl::Steady,
        bounds_f: Bounds::new(0.0, 1.0)?,
        bounds_g: Bounds::new(0.0, 10.0)?,
        require_nonnegative_data: true,
    })
}

// ---------------------------------------------------------------------------
// Point sources

pub const POINT_SOURCE_LENGTHS: [f64; 2] = [2.0, 1.0];
pub const POINT_SOURCE_EPS: f64 = 0.001;

/// Heterogeneous tensor whose principal direction is tangent to circles
/// about the origin, before rotation.
pub fn point_source_d0(x: Point, eps: f64) -> Tensor2 {
    let (x, y) = (x[0], x[1]);
    Tensor2::new(y * y + eps * x * x, -(1.0 - eps) * x * y, eps * y * y + x * x)
}

/// The two species are released from opposite corners of the source
/// rectangle: `A` at the lower-left and upper-right points, `B` at the
/// other two. This is the placement that reproduces the reference
/// undershoot statistics.
pub fn point_source_a_locations() -> [PointSource; 2] {
    [PointSource { position: [0.2, 0.3], rate: 0.1 }, PointSource { position: [1.6, 0.7], rate: 0.05 }]
}

pub fn point_source_b_locations() -> [PointSource; 2] {
    [PointSource { position: [1.6, 0.3], rate: 0.1 }, PointSource { position: [0.2, 0.7], rate: 0.1 }]
}

pub fn point_sources(seeds: [usize; 2], kind: ElementKind) -> Result<ProblemSpec> {
    let mesh = generate_structured([0.0, 0.0], POINT_SOURCE_LENGTHS, seeds, kind)?;
    let mut species: [SpeciesData; 3] = Default::default();
    species[0].source = Source::points(point_source_a_locations().to_vec());
    species[1].source = Source::points(point_source_b_locations().to_vec());
    Ok(ProblemSpec {
        name: BenchmarkId::PointSources.to_string(),
        mesh: Arc::new(mesh),
        tensor: TensorField::new(|x| point_source_d0(x, POINT_SOURCE_EPS)).rotated(PI / 3.0),
        stoichiometry: Stoichiometry::new(1.0, 1.0, 2.0)?,
        species,
        time: TimeControl::Steady,
        bounds_f: Bounds::non_negative(),
        bounds_g: Bounds::non_negative(),
        require_nonnegative_data: true,
    })
}

// ---------------------------------------------------------------------------
// Slug

pub const SLUG_LENGTHS: [f64; 2] = [10.0, 5.0];
pub const SLUG_BOX: [[f64; 2]; 2] = [[4.0, 6.0], [2.0, 3.0]];
pub const SLUG_HORIZON: f64 = 1.0;

pub fn in_slug(x: Point) -> bool {
    let tol = 1e-12;
    (SLUG_BOX[0][0] - tol..=SLUG_BOX[0][1] + tol).contains(&x[0])
        && (SLUG_BOX[1][0] - tol..=SLUG_BOX[1][1] + tol).contains(&x[1])
}

/// `A` initially fills a rectangular slug; `B` enters through every side
/// with `1 − e^{−t}`.
pub fn slug(seeds: [usize; 2], kind: ElementKind, dt: f64, horizon: f64) -> Result<ProblemSpec> {
    let [lx, ly] = SLUG_LENGTHS;
    let mesh = generate_structured([0.0, 0.0], [lx, ly], seeds, kind)?;
    let mut species: [SpeciesData; 3] = Default::default();
    species[0].initial = ScalarField::steady(|x| if in_slug(x) { 10.0 } else { 0.0 });
    species[0].dirichlet = all_sides(&ScalarField::zero());
    species[1].dirichlet = all_sides(&ScalarField::new(|_, t| 1.0 - (-t).exp()));
    species[2].dirichlet = all_sides(&ScalarField::zero());
    Ok(ProblemSpec {
        name: BenchmarkId::Slug.to_string(),
        mesh: Arc::new(mesh),
        tensor: subsurface_tensor(StreamFunction::new(lx, ly)).rotated(PI / 6.0),
        stoichiometry: Stoichiometry::new(2.0, 2.0, 1.0)?,
        species,
        time: TimeControl::Transient { dt, horizon },
        bounds_f: Bounds::non_negative(),
        bounds_g: Bounds::non_negative(),
        require_nonnegative_data: true,
    })
}

/// Builds one of the 2D benchmarks. `dt`/`horizon` only matter for the slug.
pub fn build(id: BenchmarkId, seeds: [usize; 2], kind: ElementKind, dt: Option<f64>, horizon: Option<f64>) -> Result<ProblemSpec> {
    match id {
        BenchmarkId::Manufactured => manufactured(seeds, kind),
        BenchmarkId::Tank => tank(seeds, kind),
        BenchmarkId::PointSources => point_sources(seeds, kind),
        BenchmarkId::Slug => slug(seeds, kind, dt.unwrap_or(0.05), horizon.unwrap_or(SLUG_HORIZON)),
        BenchmarkId::ComparisonCounterexample => {
            Err(Error::Config("the comparison counterexample is a 1D family, not a 2D problem".into()))
        }
    }
}

// ---------------------------------------------------------------------------
// Comparison principle

pub const COUNTEREXAMPLE_ELEMENTS: usize = 6;
pub const COUNTEREXAMPLE_DECAY: f64 = 2e4;

/// Three ordered loads `f₁ ⪯ f₂ ⪯ f₃` for `−c'' + α c = f` on `[0, 1]` with
/// homogeneous Dirichlet ends, and their solutions under both formulations.
#[derive(Debug, Clone)]
pub struct ComparisonFamily {
    pub decay: f64,
    pub operator: CsrMatrix,
    pub loads: [Vec<f64>; 3],
    pub galerkin: [Vec<f64>; 3],
    pub constrained: [Vec<f64>; 3],
    /// Node that received the extra load in `f₃`.
    pub bump_node: usize,
}

impl ComparisonFamily {
    pub fn loads_ordered(&self) -> bool {
        let le = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x <= y);
        le(&self.loads[0], &self.loads[1]) && le(&self.loads[1], &self.loads[2])
    }

    /// Nodes where `c₃ < c₂` although `f₃ ⪰ f₂`.
    pub fn violations(solutions: &[Vec<f64>; 3]) -> Vec<usize> {
        (0..solutions[1].len()).filter(|&i| solutions[2][i] < solutions[1][i]).collect()
    }
}

/// Linear-element stiffness and consistent capacity on a uniform 1D mesh.
pub fn operators_1d(elements: usize, length: f64) -> (CsrMatrix, CsrMatrix) {
    let h = length / elements as f64;
    let (mut k, mut m) = (Vec::new(), Vec::new());
    for e in 0..elements {
        for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let same = a == b;
            k.push((e + a, e + b, if same { 1.0 / h } else { -1.0 / h }));
            m.push((e + a, e + b, if same { h / 3.0 } else { h / 6.0 }));
        }
    }
    let n = elements + 1;
    (
        CsrMatrix::from_triplets(n, n, &k).expect("valid 1D stiffness"),
        CsrMatrix::from_triplets(n, n, &m).expect("valid 1D capacity"),
    )
}

/// Deterministic construction: `f₁ = f₂` is the load of the constant
/// source `α` (solution close to one away from the ends); `f₃` adds a
/// nodal increment at the first node, scanning node-by-node and over a
/// few magnitudes, for which both formulations break the ordering.
pub fn comparison_counterexample() -> Result<ComparisonFamily> {
    let alpha = COUNTEREXAMPLE_DECAY;
    let n_el = COUNTEREXAMPLE_ELEMENTS;
    let (k, m) = operators_1d(n_el, 1.0);
    let h_op = m.linear_combination(alpha, &k, 1.0)?;
    let n = n_el + 1;
    let system = AssembledSystem {
        k: k.clone(),
        m: m.clone(),
        dirichlet: vec![(0, 0.0), (n - 1, 0.0)],
        free_dofs: (1..n - 1).collect(),
    };
    let op = ReducedOperator::new(&h_op, &system);
    let opts = SolverOptions::default();
    let bounds = Bounds::non_negative();
    let solve = |f: &[f64], form| op.solve(f, &system.dirichlet, bounds, form, None, &opts).map(|s| s.values);

    let base = m.mul_vec(&vec![alpha; n]);
    let g1 = solve(&base, Formulation::Galerkin)?;
    let c1 = solve(&base, Formulation::Constrained)?;
    let h = 1.0 / n_el as f64;
    for node in 1..n - 1 {
        for scale in [0.1, 0.25, 0.5, 1.0, 2.0, 5.0] {
            let mut f3 = base.clone();
            f3[node] += scale * alpha * h;
            let g3 = solve(&f3, Formulation::Galerkin)?;
            let c3 = solve(&f3, Formulation::Constrained)?;
            let galerkin = [g1.clone(), g1.clone(), g3];
            let constrained = [c1.clone(), c1.clone(), c3];
            if !ComparisonFamily::violations(&galerkin).is_empty()
                && !ComparisonFamily::violations(&constrained).is_empty()
            {
                return Ok(ComparisonFamily {
                    decay: alpha,
                    operator: h_op,
                    loads: [base.clone(), base.clone(), f3],
                    galerkin,
                    constrained,
                    bump_node: node,
                });
            }
        }
    }
    Err(Error::InvalidProblem("no comparison-principle violation found".into()))
}

/// Mesh helper used by callers that want the benchmark's default grid.
pub fn default_mesh(id: BenchmarkId, kind: ElementKind) -> Result<Mesh> {
    let s = id.default_seeds();
    Ok((*build(id, [s, s], kind, None, None)?.mesh).clone())
}
