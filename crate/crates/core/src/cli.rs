//! Command-line front end: `run` and `compare`.
//!
//! Settings come from an optional flat TOML file (`--config`) with flags
//! taking precedence. Recognized keys: `benchmark`, `seeds`, `kind`,
//! `formulation`, `dt`, `horizon`, `tol`, `max_iterations`, `eps`,
//! `out_dir`, `dump_system`, `write_fields`.
//!
//! Exit status is 0 on success, 2 when the configuration cannot be turned
//! into a problem, and 3 when a solve or an output write fails. After a
//! failure the manifest is still written, with `status = "failed"` and the
//! artifacts produced so far listed.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    column_positions, convergence_rates, error_row, h1_seminorm_error, integrated_concentration_over_y, l2_error,
    l2_norm, violation_row, violation_stats, ERROR_HEADER, VIOLATION_HEADER,
};
use crate::assembly::{assemble_operators, AssemblyOptions};
use crate::benchmarks::{self, BenchmarkId, ComparisonFamily, ManufacturedParams};
use crate::boxqp::{KktResiduals, QpOptions, QpSolution, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::io::{write_matrix_market, write_matrix_market_vector, write_vtk_file};
use crate::mesh::ElementKind;
use crate::reaction::{run_steady, run_transient, Level, ProblemSpec, RunOptions, TimeControl};
use crate::solvers::{Formulation, Quantity, SolverOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

const REPORTED: [Quantity; 5] = [Quantity::F, Quantity::G, Quantity::A, Quantity::B, Quantity::C];

#[derive(Debug, Parser)]
#[command(name = "reactfem", version, about = "Non-negative FEM solver for fast bimolecular diffusion-reaction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a benchmark with the requested formulations.
    Run(Overrides),
    /// Solve a benchmark with all three formulations and compare them.
    Compare(Overrides),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Flat TOML file with any of the keys below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub benchmark: Option<String>,
    /// Nodes per side, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<usize>>,
    /// tri3 or quad4.
    #[arg(long)]
    pub kind: Option<String>,
    /// galerkin, clipped, constrained; comma separated.
    #[arg(long, value_delimiter = ',')]
    pub formulation: Option<Vec<String>>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Relative QP tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Species recovery band.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Write K, M and the invariant loads in Matrix Market format.
    #[arg(long)]
    pub dump_system: bool,
    /// Skip the VTK field files.
    #[arg(long)]
    pub no_fields: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    benchmark: Option<String>,
    seeds: Option<OneOrMany<usize>>,
    kind: Option<String>,
    formulation: Option<OneOrMany<String>>,
    dt: Option<f64>,
    horizon: Option<f64>,
    tol: Option<f64>,
    max_iterations: Option<usize>,
    eps: Option<f64>,
    out_dir: Option<PathBuf>,
    dump_system: Option<bool>,
    write_fields: Option<bool>,
}

/// Fully resolved settings, echoed into the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub benchmark: BenchmarkId,
    pub seeds: Vec<usize>,
    pub kind: ElementKind,
    pub formulations: Vec<Formulation>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub tol: f64,
    pub max_iterations: usize,
    /// `None` means raw recovery for Galerkin fields and machine epsilon
    /// otherwise.
    pub eps: Option<f64>,
    pub out_dir: PathBuf,
    pub dump_system: bool,
    pub write_fields: bool,
}

impl RunConfig {
    pub fn resolve(flags: &Overrides, compare: bool) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                toml::from_str::<ConfigFile>(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };

        let benchmark: BenchmarkId = flags
            .benchmark
            .clone()
            .or(file.benchmark)
            .ok_or_else(|| Error::Config("no benchmark given".into()))?
            .parse()?;
        let seeds = flags.seeds.clone().or(file.seeds.map(OneOrMany::into_vec)).unwrap_or_else(|| vec![benchmark.default_seeds()]);
        if seeds.is_empty() || seeds.iter().any(|&s| s < 2) {
            return Err(Error::Config(format!("seeds must be at least 2 nodes per side, got {seeds:?}")));
        }
        let kind: ElementKind = flags.kind.clone().or(file.kind).map_or(Ok(ElementKind::Quad4), |k| k.parse())?;
        let formulations: Vec<Formulation> = if compare {
            Formulation::ALL.to_vec()
        } else {
            let names = flags.formulation.clone().or(file.formulation.map(OneOrMany::into_vec));
            match names {
                Some(names) => names.iter().map(|n| n.parse()).collect::<Result<_>>()?,
                None => vec![Formulation::Constrained],
            }
        };
        if formulations.is_empty() {
            return Err(Error::Config("no formulation given".into()));
        }
        let dt = flags.dt.or(file.dt);
        let horizon = flags.horizon.or(file.horizon);
        for (name, v) in [("dt", dt), ("horizon", horizon)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        let tol = flags.tol.or(file.tol).unwrap_or(DEFAULT_TOL);
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {tol}")));
        }
        let eps = flags.eps.or(file.eps);
        if let Some(e) = eps {
            if !(e.is_finite() && e >= 0.0) {
                return Err(Error::Config(format!("eps must be non-negative, got {e}")));
            }
        }
        Ok(RunConfig {
            benchmark,
            seeds,
            kind,
            formulations,
            dt,
            horizon,
            tol,
            max_iterations: flags.max_iterations.or(file.max_iterations).unwrap_or(QpOptions::default().max_iterations),
            eps,
            out_dir: flags.out_dir.clone().or(file.out_dir).unwrap_or_else(|| PathBuf::from("out")),
            dump_system: flags.dump_system || file.dump_system.unwrap_or(false),
            write_fields: !flags.no_fields && file.write_fields.unwrap_or(true),
        })
    }

    pub fn run_options(&self, formulation: Formulation) -> RunOptions {
        let eps = self.eps.unwrap_or(if formulation == Formulation::Galerkin { 0.0 } else { f64::EPSILON });
        RunOptions {
            formulation,
            eps,
            solver: SolverOptions { qp: QpOptions { tol: self.tol, max_iterations: self.max_iterations } },
        }
    }

    /// Problem for one mesh size. A time step on a steady benchmark turns it
    /// into a transient run from zero initial data.
    pub fn problem(&self, seeds: usize) -> Result<ProblemSpec> {
        let mut spec = benchmarks::build(self.benchmark, [seeds, seeds], self.kind, self.dt, self.horizon)?;
        if matches!(spec.time, TimeControl::Steady) {
            match (self.dt, self.horizon) {
                (None, None) => {}
                (Some(dt), Some(horizon)) => spec.time = TimeControl::Transient { dt, horizon },
                _ => {
                    return Err(Error::Config(format!(
                        "`{}` is steady; a transient run needs both dt and horizon",
                        self.benchmark
                    )))
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QpRecord {
    pub time: Option<f64>,
    pub invariant: &'static str,
    pub iterations: usize,
    pub active_lower: usize,
    pub active_upper: usize,
    pub kkt: KktResiduals,
    pub max_relative_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveRecord {
    pub seeds: usize,
    pub formulation: Formulation,
    pub levels: usize,
    pub seconds: f64,
    pub qp: Vec<QpRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldDifference {
    pub seeds: usize,
    pub quantity: String,
    pub pair: String,
    pub l2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderingReport {
    pub loads_ordered: bool,
    pub bump_node: usize,
    pub galerkin_violation: bool,
    pub constrained_violation: bool,
    pub galerkin_nodes: Vec<usize>,
    pub constrained_nodes: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRecord {
    pub formulation: Formulation,
    pub quantity: String,
    pub norm: &'static str,
    pub slope: f64,
    pub pairwise: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub status: &'static str,
    pub error: Option<String>,
    pub config: RunConfig,
    pub solves: Vec<SolveRecord>,
    pub convergence: Vec<ConvergenceRecord>,
    pub differences: Vec<FieldDifference>,
    pub ordering: Option<OrderingReport>,
    pub artifacts: Vec<String>,
    pub total_seconds: f64,
}

/// `(h, error)` pairs for one formulation, quantity and norm.
type ErrorSeries = (Formulation, String, &'static str, Vec<(f64, f64)>);

/// One benchmark run: CSV rows and manifest entries accumulate here and are
/// flushed even when a later solve fails.
struct Session {
    cfg: RunConfig,
    compare: bool,
    violations: Vec<String>,
    history: Vec<String>,
    errors: Vec<String>,
    integrated: Vec<String>,
    differences: Vec<String>,
    manifest: Manifest,
}

impl Session {
    fn new(cfg: RunConfig, compare: bool) -> Self {
        let manifest = Manifest {
            command: if compare { "compare" } else { "run" },
            status: "ok",
            error: None,
            config: cfg.clone(),
            solves: Vec::new(),
            convergence: Vec::new(),
            differences: Vec::new(),
            ordering: None,
            artifacts: Vec::new(),
            total_seconds: 0.0,
        };
        Self {
            cfg,
            compare,
            violations: Vec::new(),
            history: Vec::new(),
            errors: Vec::new(),
            integrated: Vec::new(),
            differences: Vec::new(),
            manifest,
        }
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.artifacts.push(name.to_string());
        self.cfg.out_dir.join(name)
    }

    fn execute(&mut self) -> Result<()> {
        if self.cfg.benchmark == BenchmarkId::ComparisonCounterexample {
            return self.counterexample();
        }
        let specs: Vec<ProblemSpec> = self.cfg.seeds.iter().map(|&s| self.cfg.problem(s)).collect::<Result<_>>()?;
        let mut convergence: Vec<ErrorSeries> = Vec::new();
        for (spec, &seeds) in specs.iter().zip(&self.cfg.seeds.clone()) {
            if self.cfg.dump_system {
                self.dump_system(spec, seeds)?;
            }
            let mut finals: Vec<(Formulation, Level)> = Vec::new();
            for &form in &self.cfg.formulations.clone() {
                let start = Instant::now();
                let opts = self.cfg.run_options(form);
                let levels = match spec.time {
                    TimeControl::Steady => vec![run_steady(spec, &opts)?],
                    TimeControl::Transient { .. } => run_transient(spec, &opts)?.levels,
                };
                let seconds = start.elapsed().as_secs_f64();
                self.record(spec, seeds, form, &levels, seconds)?;
                if self.cfg.benchmark == BenchmarkId::Manufactured {
                    self.manufactured_errors(spec, seeds, form, levels.last().expect("one level"), &mut convergence)?;
                }
                finals.push((form, levels.into_iter().last().expect("at least one level")));
            }
            if self.compare {
                self.compare_levels(spec, seeds, &finals)?;
            }
        }
        for (form, quantity, norm, data) in convergence {
            if data.len() >= 2 {
                let fit = convergence_rates(&data)?;
                self.manifest.convergence.push(ConvergenceRecord {
                    formulation: form,
                    quantity,
                    norm,
                    slope: fit.slope,
                    pairwise: fit.pairwise,
                });
            }
        }
        Ok(())
    }

    fn record(&mut self, spec: &ProblemSpec, seeds: usize, form: Formulation, levels: &[Level], seconds: f64) -> Result<()> {
        let label = format!("{seeds}x{seeds}");
        let last = levels.last().expect("at least one level");
        for q in REPORTED {
            let s = violation_stats(&last.field(q).values, crate::solvers::Bounds::non_negative());
            self.violations.push(violation_row(&label, q.name(), &form.to_string(), &s));
        }
        let transient = levels.len() > 1 || last.time.is_some();
        let mut qp = Vec::new();
        for (step, level) in levels.iter().enumerate() {
            if transient {
                let t = level.time.unwrap_or(0.0);
                for q in REPORTED {
                    let s = violation_stats(&level.field(q).values, crate::solvers::Bounds::non_negative());
                    self.history.push(format!("{t:.6e},{}", violation_row(&label, q.name(), &form.to_string(), &s)));
                }
            }
            for (name, sol) in [("F", &level.qp_f), ("G", &level.qp_g)] {
                if let Some(sol) = sol {
                    qp.push(qp_record(level.time, name, sol));
                }
            }
            if self.cfg.write_fields {
                for field in level.fields() {
                    let q = field.quantity.name();
                    let stem = format!("{}_{label}_{form}_{q}", self.cfg.benchmark);
                    let name = if transient { format!("{stem}_{:04}.vtk", step + 1) } else { format!("{stem}.vtk") };
                    let path = self.path(&format!("fields/{name}"));
                    let title = match level.time {
                        Some(t) => format!("{} {form} {q} t={t}", self.cfg.benchmark),
                        None => format!("{} {form} {q} steady", self.cfg.benchmark),
                    };
                    write_vtk_file(&path, &spec.mesh, &title, q, &field.values)?;
                }
            }
        }
        if let Some(xs) = column_positions(&spec.mesh) {
            if self.cfg.benchmark != BenchmarkId::Manufactured {
                for q in [Quantity::A, Quantity::B, Quantity::C] {
                    let curve = integrated_concentration_over_y(&last.field(q).values, &spec.mesh, &xs)?;
                    for (x, v) in xs.iter().zip(curve) {
                        self.integrated.push(format!("{label},{form},{},{x:.6e},{v:.6e}", q.name()));
                    }
                }
            }
        }
        self.manifest.solves.push(SolveRecord { seeds, formulation: form, levels: levels.len(), seconds, qp });
        Ok(())
    }

    fn manufactured_errors(
        &mut self,
        spec: &ProblemSpec,
        seeds: usize,
        form: Formulation,
        level: &Level,
        convergence: &mut Vec<ErrorSeries>,
    ) -> Result<()> {
        let params = ManufacturedParams::default();
        let mesh = &spec.mesh;
        let h = mesh.max_edge_length();
        let label = format!("{seeds}x{seeds}");
        let mut push = |q: &str, norm: &'static str, e: f64| {
            match convergence.iter_mut().find(|c| c.0 == form && c.1 == q && c.2 == norm) {
                Some(c) => c.3.push((h, e)),
                None => convergence.push((form, q.to_string(), norm, vec![(h, e)])),
            }
        };
        for q in REPORTED {
            let l2 = l2_error(&level.field(q).values, &params.exact(q), mesh)?;
            let h1 = match q {
                Quantity::F => Some(h1_seminorm_error(&level.f.values, &|p| params.grad_f(p), mesh)?),
                Quantity::G => Some(h1_seminorm_error(&level.g.values, &|p| params.grad_g(p), mesh)?),
                _ => None,
            };
            push(q.name(), "l2", l2);
            if let Some(h1) = h1 {
                push(q.name(), "h1", h1);
            }
            self.errors.push(error_row(&label, q.name(), &form.to_string(), h, l2, h1));
        }
        Ok(())
    }

    fn compare_levels(&mut self, spec: &ProblemSpec, seeds: usize, finals: &[(Formulation, Level)]) -> Result<()> {
        let label = format!("{seeds}x{seeds}");
        for d in field_differences(spec, finals)? {
            self.differences.push(format!("{label},{},{},{:.6e}", d.quantity, d.pair, d.l2));
            self.manifest.differences.push(FieldDifference { seeds, ..d });
        }
        Ok(())
    }

    fn dump_system(&mut self, spec: &ProblemSpec, seeds: usize) -> Result<()> {
        let system = assemble_operators(&spec.mesh, &spec.tensor, AssemblyOptions::default())?;
        let (pf, pg) = spec.to_invariants()?;
        let stem = format!("{}_{seeds}x{seeds}", self.cfg.benchmark);
        let path = self.path(&format!("system/{stem}_K.mtx"));
        write_matrix_market(fs::File::create(path)?, &system.k)?;
        let path = self.path(&format!("system/{stem}_M.mtx"));
        write_matrix_market(fs::File::create(path)?, &system.m)?;
        for (name, p) in [("F", &pf), ("G", &pg)] {
            let path = self.path(&format!("system/{stem}_f{name}.mtx"));
            write_matrix_market_vector(fs::File::create(path)?, &p.load(&spec.mesh, 0.0)?)?;
        }
        Ok(())
    }

    fn counterexample(&mut self) -> Result<()> {
        let fam = benchmarks::comparison_counterexample()?;
        let report = ordering_report(&fam);
        let mut csv = String::from("node,f1,f2,f3,galerkin_c1,galerkin_c2,galerkin_c3,constrained_c1,constrained_c2,constrained_c3\n");
        for i in 0..fam.loads[0].len() {
            write!(csv, "{i}").expect("string write");
            for v in fam.loads.iter().chain(&fam.galerkin).chain(&fam.constrained) {
                write!(csv, ",{:e}", v[i]).expect("string write");
            }
            csv.push('\n');
        }
        let path = self.path("counterexample.csv");
        fs::write(path, csv)?;
        self.manifest.ordering = Some(report);
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        let tables: [(&str, String, &Vec<String>); 5] = [
            ("violations.csv", VIOLATION_HEADER.to_string(), &self.violations),
            ("violations_history.csv", format!("time,{VIOLATION_HEADER}"), &self.history),
            ("convergence.csv", ERROR_HEADER.to_string(), &self.errors),
            ("integrated.csv", "mesh,formulation,quantity,x,integral".to_string(), &self.integrated),
            ("differences.csv", "mesh,quantity,pair,l2_difference".to_string(), &self.differences),
        ];
        let mut written = Vec::new();
        for (name, header, rows) in tables {
            if rows.is_empty() {
                continue;
            }
            let mut text = header;
            text.push('\n');
            for r in rows {
                text.push_str(r);
                text.push('\n');
            }
            fs::write(self.cfg.out_dir.join(name), text)?;
            written.push(name.to_string());
        }
        self.manifest.artifacts.extend(written);
        Ok(())
    }

    fn write_manifest(&self) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.manifest).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(self.cfg.out_dir.join("manifest.json"), json + "\n")?;
        Ok(())
    }

    fn summary(&self) -> String {
        let mut s = String::new();
        if !self.violations.is_empty() {
            writeln!(s, "{VIOLATION_HEADER}").expect("string write");
            for r in &self.violations {
                writeln!(s, "{r}").expect("string write");
            }
        }
        for d in &self.manifest.differences {
            writeln!(s, "{}x{} {} {}: L2 difference {:.6e}", d.seeds, d.seeds, d.quantity, d.pair, d.l2)
                .expect("string write");
        }
        for c in &self.manifest.convergence {
            writeln!(s, "{} {} {} rate {:.3}", c.formulation, c.quantity, c.norm, c.slope).expect("string write");
        }
        if let Some(o) = &self.manifest.ordering {
            writeln!(
                s,
                "ordering violation: galerkin {} {:?}, constrained {} {:?}",
                o.galerkin_violation, o.galerkin_nodes, o.constrained_violation, o.constrained_nodes
            )
            .expect("string write");
        }
        s
    }
}

fn qp_record(time: Option<f64>, invariant: &'static str, sol: &QpSolution) -> QpRecord {
    QpRecord {
        time,
        invariant,
        iterations: sol.iterations,
        active_lower: sol.active_lower(),
        active_upper: sol.active_upper(),
        kkt: sol.kkt,
        max_relative_residual: sol.kkt.max_relative(),
    }
}

pub fn ordering_report(fam: &ComparisonFamily) -> OrderingReport {
    let galerkin_nodes = ComparisonFamily::violations(&fam.galerkin);
    let constrained_nodes = ComparisonFamily::violations(&fam.constrained);
    OrderingReport {
        loads_ordered: fam.loads_ordered(),
        bump_node: fam.bump_node,
        galerkin_violation: !galerkin_nodes.is_empty(),
        constrained_violation: !constrained_nodes.is_empty(),
        galerkin_nodes,
        constrained_nodes,
    }
}

/// Pairwise `L²` differences of the reported fields between formulations.
pub fn field_differences(spec: &ProblemSpec, levels: &[(Formulation, Level)]) -> Result<Vec<FieldDifference>> {
    let seeds = spec.mesh.grid.as_ref().map_or(0, |g| g.seeds[0]);
    let mut out = Vec::new();
    for i in 0..levels.len() {
        for j in i + 1..levels.len() {
            let (fa, la) = &levels[i];
            let (fb, lb) = &levels[j];
            for q in REPORTED {
                let diff: Vec<f64> =
                    la.field(q).values.iter().zip(&lb.field(q).values).map(|(a, b)| a - b).collect();
                out.push(FieldDifference {
                    seeds,
                    quantity: q.name().to_string(),
                    pair: format!("{fa}-{fb}"),
                    l2: l2_norm(&diff, &spec.mesh)?,
                });
            }
        }
    }
    Ok(out)
}

/// Runs one subcommand; returns the process exit status.
pub fn execute(command: &Command) -> i32 {
    let (flags, compare) = match command {
        Command::Run(f) => (f, false),
        Command::Compare(f) => (f, true),
    };
    let started = Instant::now();
    let cfg = match RunConfig::resolve(flags, compare).and_then(|cfg| {
        // Problems are built up front so that bad parameters surface as
        // configuration errors rather than mid-run failures.
        if cfg.benchmark != BenchmarkId::ComparisonCounterexample {
            for &s in &cfg.seeds {
                cfg.problem(s)?;
            }
        }
        prepare_dir(&cfg.out_dir, cfg.write_fields, cfg.dump_system)?;
        Ok(cfg)
    }) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("reactfem: {e}");
            return EXIT_CONFIG;
        }
    };

    let mut session = Session::new(cfg, compare);
    let result = session.execute();
    let flushed = session.flush();
    if let Err(e) = result.as_ref().and(flushed.as_ref()) {
        session.manifest.status = "failed";
        session.manifest.error = Some(e.to_string());
    }
    session.manifest.total_seconds = started.elapsed().as_secs_f64();
    let manifest = session.write_manifest();
    print!("{}", session.summary());
    match (result, flushed, manifest) {
        (Ok(()), Ok(()), Ok(())) => EXIT_OK,
        (r, f, m) => {
            if let Some(e) = r.err().or(f.err()).or(m.err()) {
                eprintln!("reactfem: {e}");
            }
            EXIT_SOLVER
        }
    }
}

fn prepare_dir(out: &Path, fields: bool, system: bool) -> Result<()> {
    let mk = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::Config(format!("cannot create {}: {e}", p.display())));
    mk(out)?;
    if fields {
        mk(&out.join("fields"))?;
    }
    if system {
        mk(&out.join("system"))?;
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs; clap usage errors
/// map to the configuration status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli.command),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_OK
            }
        }
    }
}
