//! Fast irreversible bimolecular reaction `n_A A + n_B B → n_C C`.
//!
//! The species balance is rewritten in terms of the two reaction
//! invariants
//!
//! ```text
//! c_F = c_A + (n_A/n_C) c_C        c_G = c_B + (n_B/n_C) c_C
//! ```
//!
//! which obey uncoupled linear diffusion equations. Once they are solved,
//! the species follow pointwise from the fact that `A` and `B` cannot
//! co-exist when the reaction is fast.

use std::sync::Arc;

use rayon::join;

use crate::assembly::{
    assemble_operators, dirichlet_values, load_vector, AssembledSystem, AssemblyOptions, BoundaryData, Source,
    ASSEMBLY_DEGREE,
};
use crate::boxqp::QpSolution;
use crate::error::{Error, Result};
use crate::fields::{ScalarField, TensorField};
use crate::mesh::{BcRole, Mesh};
use crate::solvers::{
    check_transient_inputs, transient_operator, transient_step, Bounds, Formulation, NodalField, Quantity,
    ReducedOperator, SolverOptions,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stoichiometry {
    pub n_a: f64,
    pub n_b: f64,
    pub n_c: f64,
}

impl Stoichiometry {
    pub fn new(n_a: f64, n_b: f64, n_c: f64) -> Result<Self> {
        if [n_a, n_b, n_c].iter().all(|n| *n > 0.0 && n.is_finite()) {
            Ok(Self { n_a, n_b, n_c })
        } else {
            Err(Error::InvalidProblem(format!("stoichiometric coefficients must be positive: ({n_a}, {n_b}, {n_c})")))
        }
    }
}

/// Data of one species. Dirichlet/Neumann maps are keyed by boundary marker.
#[derive(Debug, Clone, Default)]
pub struct SpeciesData {
    pub source: Source,
    pub dirichlet: BoundaryData,
    pub neumann: BoundaryData,
    pub initial: ScalarField,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeControl {
    Steady,
    Transient { dt: f64, horizon: f64 },
}

impl TimeControl {
    pub fn steps(&self) -> usize {
        match *self {
            TimeControl::Steady => 0,
            TimeControl::Transient { dt, horizon } => (horizon / dt).round().max(1.0) as usize,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub mesh: Arc<Mesh>,
    pub tensor: TensorField,
    pub stoichiometry: Stoichiometry,
    /// Species `A`, `B`, `C` in that order.
    pub species: [SpeciesData; 3],
    pub time: TimeControl,
    pub bounds_f: Bounds,
    pub bounds_g: Bounds,
    /// Physical problems carry non-negative data; manufactured verification
    /// problems may not.
    pub require_nonnegative_data: bool,
}

/// One of the two uncoupled diffusion problems.
#[derive(Debug, Clone)]
pub struct InvariantProblem {
    pub source: Source,
    pub dirichlet: BoundaryData,
    pub neumann: BoundaryData,
    pub initial: ScalarField,
    pub bounds: Bounds,
}

impl InvariantProblem {
    pub fn load(&self, mesh: &Mesh, t: f64) -> Result<Vec<f64>> {
        load_vector(mesh, &self.source, &self.neumann, t, ASSEMBLY_DEGREE)
    }

    pub fn dirichlet_values(&self, mesh: &Mesh, t: f64) -> Result<Vec<(usize, f64)>> {
        dirichlet_values(mesh, &self.dirichlet, t)
    }

    pub fn initial_values(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.nodes.iter().map(|&p| self.initial.eval(p, 0.0)).collect()
    }
}

fn combine_boundary(a: &BoundaryData, wa: f64, b: &BoundaryData, wb: f64) -> BoundaryData {
    let zero = ScalarField::zero();
    a.keys()
        .chain(b.keys())
        .map(|k| {
            let fa = a.get(k).unwrap_or(&zero);
            let fb = b.get(k).unwrap_or(&zero);
            (k.clone(), fa.combine(wa, fb, wb))
        })
        .collect()
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        Stoichiometry::new(self.stoichiometry.n_a, self.stoichiometry.n_b, self.stoichiometry.n_c)?;
        if let TimeControl::Transient { dt, horizon } = self.time {
            if !(dt > 0.0 && horizon > 0.0) {
                return Err(Error::InvalidProblem(format!("invalid time controls dt={dt}, horizon={horizon}")));
            }
        } else if !self.mesh.has_dirichlet()? {
            return Err(Error::InvalidProblem("steady problem needs a Dirichlet boundary".into()));
        }
        for (label, sp) in ["A", "B", "C"].iter().zip(&self.species) {
            for (marker, role) in sp.dirichlet.keys().map(|m| (m, BcRole::Dirichlet)).chain(
                sp.neumann.keys().map(|m| (m, BcRole::Neumann)),
            ) {
                if self.mesh.role_of(marker)? != role {
                    return Err(Error::InvalidProblem(format!(
                        "species {label}: marker `{marker}` is not a {role:?} boundary"
                    )));
                }
            }
        }
        if self.require_nonnegative_data {
            self.check_nonnegative()?;
        }
        Ok(())
    }

    fn sample_times(&self) -> Vec<f64> {
        match self.time {
            TimeControl::Steady => vec![0.0],
            TimeControl::Transient { dt, .. } => (0..=self.time.steps()).map(|k| k as f64 * dt).collect(),
        }
    }

    fn check_nonnegative(&self) -> Result<()> {
        let mesh = &self.mesh;
        let dir_nodes = mesh.dirichlet_markers()?;
        let times = self.sample_times();
        for (label, sp) in ["A", "B", "C"].iter().zip(&self.species) {
            let bad = |what: &str| Error::InvalidProblem(format!("species {label}: negative {what}"));
            if sp.source.points.iter().any(|p| p.rate < 0.0) {
                return Err(bad("point source"));
            }
            if mesh.nodes.iter().any(|&p| sp.initial.eval(p, 0.0) < 0.0) {
                return Err(bad("initial data"));
            }
            for &t in &times {
                if let Some(vol) = &sp.source.volumetric {
                    if mesh.nodes.iter().any(|&p| vol.eval(p, t) < 0.0) {
                        return Err(bad("volumetric source"));
                    }
                }
                for (i, m) in dir_nodes.iter().enumerate() {
                    if let Some(f) = m.as_ref().and_then(|m| sp.dirichlet.get(m)) {
                        if f.eval(mesh.nodes[i], t) < 0.0 {
                            return Err(bad("Dirichlet data"));
                        }
                    }
                }
                for edge in &mesh.boundary_edges {
                    if let Some(h) = sp.neumann.get(&edge.marker) {
                        for &n in &edge.nodes {
                            if h.eval(mesh.nodes[n], t) < 0.0 {
                                return Err(bad("Neumann data"));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Builds the invariant problems for `F` and `G`.
    pub fn to_invariants(&self) -> Result<(InvariantProblem, InvariantProblem)> {
        self.validate()?;
        let st = self.stoichiometry;
        let [a, b, c] = &self.species;
        let build = |s: &SpeciesData, w: f64, bounds: Bounds| InvariantProblem {
            source: s.source.combine(1.0, &c.source, w),
            dirichlet: combine_boundary(&s.dirichlet, 1.0, &c.dirichlet, w),
            neumann: combine_boundary(&s.neumann, 1.0, &c.neumann, w),
            initial: s.initial.combine(1.0, &c.initial, w),
            bounds,
        };
        Ok((build(a, st.n_a / st.n_c, self.bounds_f), build(b, st.n_b / st.n_c, self.bounds_g)))
    }
}

/// Species at one node from the invariants. `eps` is the band in which
/// `c_F − (n_A/n_B) c_G` counts as zero.
pub fn recover_point(cf: f64, cg: f64, st: &Stoichiometry, eps: f64) -> (f64, f64, f64) {
    let d = cf - (st.n_a / st.n_b) * cg;
    if d.abs() <= eps {
        (0.0, 0.0, (st.n_c / st.n_a) * cf)
    } else if d < 0.0 {
        (0.0, -(st.n_b / st.n_a) * cf + cg, (st.n_c / st.n_a) * cf)
    } else {
        (d, 0.0, (st.n_c / st.n_b) * cg)
    }
}

/// Species fields `A`, `B`, `C` from the invariant fields.
pub fn recover_species(cf: &NodalField, cg: &NodalField, st: &Stoichiometry, eps: f64) -> [NodalField; 3] {
    assert_eq!(cf.values.len(), cg.values.len(), "invariant fields live on different meshes");
    let n = cf.values.len();
    let (mut a, mut b, mut c) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (&f, &g) in cf.values.iter().zip(&cg.values) {
        let (x, y, z) = recover_point(f, g, st, eps);
        a.push(x);
        b.push(y);
        c.push(z);
    }
    let wrap = |v, q| NodalField::new(v, q, cf.formulation, cf.time);
    [wrap(a, Quantity::A), wrap(b, Quantity::B), wrap(c, Quantity::C)]
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub formulation: Formulation,
    /// Recovery band; machine epsilon by default, zero for raw fields.
    pub eps: f64,
    pub solver: SolverOptions,
}

impl RunOptions {
    pub fn new(formulation: Formulation) -> Self {
        Self { formulation, eps: f64::EPSILON, solver: SolverOptions::default() }
    }
}

/// Invariants, species and multipliers at one time (or steady state).
#[derive(Debug, Clone)]
pub struct Level {
    pub time: Option<f64>,
    pub f: NodalField,
    pub g: NodalField,
    pub a: NodalField,
    pub b: NodalField,
    pub c: NodalField,
    /// `λ_min F`, `λ_max F`, `λ_min G`, `λ_max G` on nodes.
    pub multipliers: [NodalField; 4],
    pub qp_f: Option<QpSolution>,
    pub qp_g: Option<QpSolution>,
}

impl Level {
    pub fn fields(&self) -> Vec<&NodalField> {
        let mut v = vec![&self.f, &self.g, &self.a, &self.b, &self.c];
        if self.qp_f.is_some() {
            v.extend(self.multipliers.iter());
        }
        v
    }

    pub fn field(&self, q: Quantity) -> &NodalField {
        match q {
            Quantity::F => &self.f,
            Quantity::G => &self.g,
            Quantity::A => &self.a,
            Quantity::B => &self.b,
            Quantity::C => &self.c,
            Quantity::LambdaMinF => &self.multipliers[0],
            Quantity::LambdaMaxF => &self.multipliers[1],
            Quantity::LambdaMinG => &self.multipliers[2],
            Quantity::LambdaMaxG => &self.multipliers[3],
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransientOutcome {
    pub initial: Level,
    pub levels: Vec<Level>,
}

#[allow(clippy::too_many_arguments)]
fn make_level(
    time: Option<f64>,
    formulation: Formulation,
    f_values: Vec<f64>,
    g_values: Vec<f64>,
    qp_f: Option<QpSolution>,
    qp_g: Option<QpSolution>,
    system: &AssembledSystem,
    st: &Stoichiometry,
    eps: f64,
) -> Level {
    let n = system.ndofs();
    let scatter = |qp: &Option<QpSolution>| {
        crate::solvers::Solve { values: Vec::new(), qp: qp.clone() }.multiplier_fields(&system.free_dofs, n)
    };
    let (lf_min, lf_max) = scatter(&qp_f);
    let (lg_min, lg_max) = scatter(&qp_g);
    let f = NodalField::new(f_values, Quantity::F, formulation, time);
    let g = NodalField::new(g_values, Quantity::G, formulation, time);
    let [a, b, c] = recover_species(&f, &g, st, eps);
    let mk = |v, q| NodalField::new(v, q, formulation, time);
    Level {
        time,
        multipliers: [
            mk(lf_min, Quantity::LambdaMinF),
            mk(lf_max, Quantity::LambdaMaxF),
            mk(lg_min, Quantity::LambdaMinG),
            mk(lg_max, Quantity::LambdaMaxG),
        ],
        f,
        g,
        a,
        b,
        c,
        qp_f,
        qp_g,
    }
}

/// Steady pipeline: invariants, assembly, two solves sharing `K`, recovery.
pub fn run_steady(spec: &ProblemSpec, opts: &RunOptions) -> Result<Level> {
    let (pf, pg) = spec.to_invariants()?;
    let mesh = &spec.mesh;
    let mut system = assemble_operators(mesh, &spec.tensor, AssemblyOptions::default())?;
    let (load_f, load_g) = (pf.load(mesh, 0.0)?, pg.load(mesh, 0.0)?);
    let (dir_f, dir_g) = (pf.dirichlet_values(mesh, 0.0)?, pg.dirichlet_values(mesh, 0.0)?);
    system.set_dirichlet_values(&dir_f)?;
    if system.dirichlet.is_empty() {
        return Err(Error::InvalidProblem("steady problem needs a Dirichlet boundary".into()));
    }
    let op = ReducedOperator::new(&system.k, &system);
    let form = opts.formulation;
    let (sf, sg) = join(
        || op.solve(&load_f, &dir_f, pf.bounds, form, None, &opts.solver),
        || op.solve(&load_g, &dir_g, pg.bounds, form, None, &opts.solver),
    );
    let (sf, sg) = (sf?, sg?);
    Ok(make_level(None, form, sf.values, sg.values, sf.qp, sg.qp, &system, &spec.stoichiometry, opts.eps))
}

/// Transient pipeline: both invariants stepped with one shared
/// `M/Δt + K` operator, species recovered at every level.
pub fn run_transient(spec: &ProblemSpec, opts: &RunOptions) -> Result<TransientOutcome> {
    let TimeControl::Transient { dt, .. } = spec.time else {
        return Err(Error::InvalidProblem(format!("`{}` is a steady problem", spec.name)));
    };
    let n_steps = spec.time.steps();
    let (pf, pg) = spec.to_invariants()?;
    let mesh = spec.mesh.clone();
    let system = assemble_operators(&mesh, &spec.tensor, AssemblyOptions::default())?;
    let form = opts.formulation;
    let f0 = pf.initial_values(&mesh);
    let g0 = pg.initial_values(&mesh);
    check_transient_inputs(&system, &f0, pf.bounds, form, dt, n_steps)?;
    check_transient_inputs(&system, &g0, pg.bounds, form, dt, n_steps)?;

    let h = transient_operator(&system, dt)?;
    let op = ReducedOperator::new(&h, &system);
    let data_f = |t: f64| Ok((pf.load(&mesh, t)?, pf.dirichlet_values(&mesh, t)?));
    let data_g = |t: f64| Ok((pg.load(&mesh, t)?, pg.dirichlet_values(&mesh, t)?));

    let st = &spec.stoichiometry;
    let initial = make_level(Some(0.0), form, f0.clone(), g0.clone(), None, None, &system, st, opts.eps);
    let mut levels = Vec::with_capacity(n_steps);
    let (mut cf, mut cg) = (f0, g0);
    for step in 1..=n_steps {
        let t = step as f64 * dt;
        let (sf, sg) = join(
            || transient_step(&op, &system, &data_f, &cf, t, dt, pf.bounds, form, &opts.solver),
            || transient_step(&op, &system, &data_g, &cg, t, dt, pg.bounds, form, &opts.solver),
        );
        let (sf, sg) = (sf?, sg?);
        cf.clone_from(&sf.values);
        cg.clone_from(&sg.values);
        levels.push(make_level(Some(t), form, sf.values, sg.values, sf.qp, sg.qp, &system, st, opts.eps));
    }
    Ok(TransientOutcome { initial, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Tensor2;
    use crate::mesh::{generate_structured, ElementKind};

    fn st(a: f64, b: f64, c: f64) -> Stoichiometry {
        Stoichiometry::new(a, b, c).unwrap()
    }

    /// Independent route through the max-form relations.
    fn recover_by_max(cf: f64, cg: f64, s: &Stoichiometry) -> (f64, f64, f64) {
        let a = (cf - s.n_a / s.n_b * cg).max(0.0);
        let b = s.n_b / s.n_a * (-cf + s.n_a / s.n_b * cg).max(0.0);
        (a, b, s.n_c / s.n_a * (cf - a))
    }

    #[test]
    fn recovery_examples() {
        let (a, b, c) = recover_point(1.0, 0.4, &st(1.0, 1.0, 2.0), f64::EPSILON);
        assert!((a - 0.6).abs() < 1e-15 && b == 0.0 && (c - 0.8).abs() < 1e-15);

        let (a, b, c) = recover_point(0.7, 0.7, &st(1.5, 1.5, 1.0), f64::EPSILON);
        assert_eq!((a, b), (0.0, 0.0));
        assert!((c - 0.7 / 1.5).abs() < 1e-15);

        let s = st(2.0, 3.0, 1.0);
        let (a, b, c) = recover_point(0.2, 1.0, &s, f64::EPSILON);
        assert_eq!(a, 0.0);
        assert!((b - 0.7).abs() < 1e-15);
        assert!((c - 0.1).abs() < 1e-15);
        let (ma, mb, mc) = recover_by_max(0.2, 1.0, &s);
        assert!((a - ma).abs() < 1e-15 && (b - mb).abs() < 1e-15 && (c - mc).abs() < 1e-15);
    }

    #[test]
    fn noise_band_gates_coexistence() {
        let s = st(2.0, 3.0, 1.0);
        let cg = 0.9;
        let cf = s.n_a / s.n_b * cg;
        for cf in [cf + f64::EPSILON / 2.0, cf - f64::EPSILON / 2.0] {
            let (a, b, _) = recover_point(cf, cg, &s, f64::EPSILON);
            assert_eq!((a, b), (0.0, 0.0));
        }
    }

    #[test]
    fn invalid_stoichiometry() {
        assert!(Stoichiometry::new(0.0, 1.0, 1.0).is_err());
        assert!(Stoichiometry::new(1.0, -1.0, 1.0).is_err());
    }

    fn square_spec(species: [SpeciesData; 3], time: TimeControl) -> ProblemSpec {
        let mesh = generate_structured([0.0, 0.0], [1.0, 1.0], [9, 9], ElementKind::Quad4).unwrap();
        ProblemSpec {
            name: "test".into(),
            mesh: Arc::new(mesh),
            tensor: TensorField::constant(Tensor2::diag(10.0, 0.1).rotated(0.4)),
            stoichiometry: st(2.0, 1.0, 1.0),
            species,
            time,
            bounds_f: Bounds::non_negative(),
            bounds_g: Bounds::non_negative(),
            require_nonnegative_data: true,
        }
    }

    #[test]
    fn zero_data_gives_zero_species() {
        let spec = square_spec(Default::default(), TimeControl::Steady);
        let out = run_steady(&spec, &RunOptions::new(Formulation::Constrained)).unwrap();
        for f in out.fields() {
            assert!(f.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn invariant_data_is_combined() {
        let mut species: [SpeciesData; 3] = Default::default();
        species[0].initial = ScalarField::constant(1.0);
        species[2].initial = ScalarField::constant(3.0);
        species[1].dirichlet.insert("left".into(), ScalarField::constant(2.0));
        species[2].dirichlet.insert("left".into(), ScalarField::constant(0.5));
        let spec = square_spec(species, TimeControl::Transient { dt: 0.1, horizon: 0.3 });
        let (f, g) = spec.to_invariants().unwrap();
        // n_A/n_C = 2, n_B/n_C = 1
        assert_eq!(f.initial.eval([0.3, 0.3], 0.0), 1.0 + 2.0 * 3.0);
        assert_eq!(g.initial.eval([0.3, 0.3], 0.0), 3.0);
        assert_eq!(g.dirichlet["left"].eval([0.0, 0.5], 0.0), 2.5);
        assert_eq!(f.dirichlet["left"].eval([0.0, 0.5], 0.0), 1.0);
    }

    #[test]
    fn negative_data_is_rejected() {
        let mut species: [SpeciesData; 3] = Default::default();
        species[1].initial = ScalarField::constant(-1.0);
        let spec = square_spec(species, TimeControl::Transient { dt: 0.1, horizon: 0.3 });
        assert!(matches!(spec.validate(), Err(Error::InvalidProblem(_))));
    }

    #[test]
    fn wrong_role_marker_is_rejected() {
        let mut species: [SpeciesData; 3] = Default::default();
        species[0].neumann.insert("left".into(), ScalarField::constant(1.0));
        let spec = square_spec(species, TimeControl::Steady);
        assert!(spec.validate().is_err());
    }

    /// Initial data only, zero sources and zero Dirichlet data: the total
    /// amount of the invariant `∫ c_F` decreases at every level.
    #[test]
    fn total_invariant_decays_monotonically() {
        let mut species: [SpeciesData; 3] = Default::default();
        species[0].initial = ScalarField::steady(|p| if (p[0] - 0.5).abs() < 0.2 && (p[1] - 0.5).abs() < 0.2 { 5.0 } else { 0.0 });
        species[2].initial = ScalarField::steady(|p| if p[0] > 0.6 && p[0] < 0.8 { 1.0 } else { 0.0 });
        let spec = square_spec(species, TimeControl::Transient { dt: 0.02, horizon: 0.4 });
        for form in [Formulation::Galerkin, Formulation::Constrained] {
            let out = run_transient(&spec, &RunOptions::new(form)).unwrap();
            let system =
                assemble_operators(&spec.mesh, &spec.tensor, AssemblyOptions::default()).unwrap();
            let total = |v: &[f64]| system.m.mul_vec(v).iter().sum::<f64>();
            let mut prev = total(&out.initial.f.values);
            for level in &out.levels {
                let now = total(&level.f.values);
                assert!(now < prev, "{form}: {now} >= {prev}");
                prev = now;
            }
        }
    }
}
