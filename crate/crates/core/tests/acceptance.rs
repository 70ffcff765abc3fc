//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::sync::Mutex;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use reactfem::analysis::{convergence_rates, h1_seminorm_error, l2_error, violation_stats};
use reactfem::assembly::{assemble_operators, AssemblyOptions};
use reactfem::benchmarks::{
    comparison_counterexample, manufactured, point_sources, slug, tank, ComparisonFamily, ManufacturedParams,
};
use reactfem::boxqp::{self, BoxQp, QpOptions, QpSolution, DEFAULT_TOL};
use reactfem::reaction::{recover_point, run_steady, run_transient, Level, RunOptions, TimeControl};
use reactfem::{Bounds, CsrMatrix, ElementKind, Formulation, Quantity, Stoichiometry};

static REPORTED: Mutex<Vec<u32>> = Mutex::new(Vec::new());

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {id} [{name}]: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    REPORTED.lock().unwrap().push(id);
}

/// Runs every criterion even when an earlier one fails; a criterion that
/// aborts before reporting gets a FAIL line of its own.
fn main() {
    let criteria: [(&[u32], &str, fn()); 8] = [
        (&[1], "manufactured convergence", criterion_1_manufactured_convergence),
        (&[2], "point-source violation statistics", criterion_2_point_source_statistics),
        (&[3, 4], "non-negativity / KKT certification", criterion_3_and_4_nonnegativity_and_kkt),
        (&[5], "QP oracle equivalence", criterion_5_qp_oracle),
        (&[6], "scaling", criterion_6_scaling),
        (&[7], "comparison-principle counterexample", criterion_7_comparison_principle),
        (&[8], "recovery algebra", criterion_8_recovery_algebra),
        (&[9], "transient-steady consistency", criterion_9_transient_reaches_steady),
    ];
    let mut failures = 0;
    for (ids, name, run) in criteria {
        if std::panic::catch_unwind(run).is_err() {
            failures += 1;
            let reported = REPORTED.lock().unwrap_or_else(|e| e.into_inner()).clone();
            for id in ids.iter().filter(|id| !reported.contains(id)) {
                println!("criterion {id} [{name}]: FAIL (aborted)");
            }
        }
    }
    if failures > 0 {
        println!("acceptance: {failures} criterion group(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}

fn constrained() -> RunOptions {
    RunOptions::new(Formulation::Constrained)
}

fn galerkin_raw() -> RunOptions {
    RunOptions { eps: 0.0, ..RunOptions::new(Formulation::Galerkin) }
}

fn criterion_1_manufactured_convergence() {
    let start = Instant::now();
    let params = ManufacturedParams::default();
    let mut ok = true;
    let mut detail = Vec::new();
    for kind in [ElementKind::Quad4, ElementKind::Tri3] {
        let mut l2: [Vec<(f64, f64)>; 5] = Default::default();
        let mut h1: [Vec<(f64, f64)>; 2] = Default::default();
        let mut compared = 0;
        for s in [11, 21, 41, 81] {
            let spec = manufactured([s, s], kind).unwrap();
            let mesh = &spec.mesh;
            let h = mesh.max_edge_length();
            let con = run_steady(&spec, &constrained()).unwrap();
            let gal = run_steady(&spec, &RunOptions::new(Formulation::Galerkin)).unwrap();
            for (k, q) in [Quantity::F, Quantity::G, Quantity::A, Quantity::B, Quantity::C].into_iter().enumerate() {
                let exact = params.exact(q);
                let e = l2_error(&con.field(q).values, &exact, mesh).unwrap();
                l2[k].push((h, e));
                let no_active = [&con.qp_f, &con.qp_g]
                    .iter()
                    .all(|qp| qp.as_ref().is_some_and(|s| s.active_lower() + s.active_upper() == 0));
                if no_active {
                    let eg = l2_error(&gal.field(q).values, &exact, mesh).unwrap();
                    compared += 1;
                    if (e - eg).abs() > 0.05 * eg {
                        ok = false;
                        detail.push(format!("{kind} {s}: {q} constrained {e:.3e} vs galerkin {eg:.3e}"));
                    }
                }
            }
            h1[0].push((h, h1_seminorm_error(&con.f.values, &|p| params.grad_f(p), mesh).unwrap()));
            h1[1].push((h, h1_seminorm_error(&con.g.values, &|p| params.grad_g(p), mesh).unwrap()));
        }
        let rates: Vec<f64> = l2.iter().map(|d| convergence_rates(d).unwrap().slope).collect();
        let h1_rates: Vec<f64> = h1.iter().map(|d| convergence_rates(d).unwrap().slope).collect();
        ok &= rates[0] >= 1.8 && rates[1] >= 1.8;
        ok &= h1_rates.iter().all(|&r| r >= 0.85);
        ok &= rates[2..].iter().all(|&r| r >= 1.0);
        detail.push(format!(
            "{kind}: L2 F {:.2} G {:.2} A {:.2} B {:.2} C {:.2}; H1 F {:.2} G {:.2}; {compared} unconstrained comparisons",
            rates[0], rates[1], rates[2], rates[3], rates[4], h1_rates[0], h1_rates[1]
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 120.0;
    report(1, "manufactured convergence", ok, &format!("{}; {secs:.1}s", detail.join("; ")));
    assert!(ok);
}

fn criterion_2_point_source_statistics() {
    let start = Instant::now();
    // (seeds, quantity, ratio %, nodes violated %)
    let table = [
        (21, Quantity::F, -0.11, 8.62),
        (21, Quantity::G, -0.69, 23.36),
        (21, Quantity::C, -3.38, 31.29),
        (51, Quantity::F, -0.58, 24.14),
        (51, Quantity::G, -1.71, 43.71),
        (51, Quantity::C, -15.05, 53.94),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for s in [21, 51] {
        let spec = point_sources([s, s], ElementKind::Quad4).unwrap();
        let out = run_steady(&spec, &galerkin_raw()).unwrap();
        for &(_, q, ratio, nodes) in table.iter().filter(|r| r.0 == s) {
            let st = violation_stats(&out.field(q).values, Bounds::non_negative());
            let pass = (st.min_over_max_percent - ratio).abs() <= 0.5 && (st.percent_nodes_violating - nodes).abs() <= 3.0;
            ok &= pass;
            detail.push(format!(
                "{s}x{s} {q}: {:.2}% / {:.2}% (target {ratio}% / {nodes}%){}",
                st.min_over_max_percent,
                st.percent_nodes_violating,
                if pass { "" } else { " MISS" }
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 60.0;
    report(2, "point-source violation statistics", ok, &format!("{}; {secs:.1}s", detail.join("; ")));
    assert!(ok);
}

/// All constrained solutions gathered for criteria 3 and 4.
fn constrained_levels() -> Vec<(String, Level)> {
    let mut out = Vec::new();
    for kind in [ElementKind::Quad4, ElementKind::Tri3] {
        let m = manufactured([41, 41], kind).unwrap();
        out.push((format!("manufactured {kind}"), run_steady(&m, &constrained()).unwrap()));
    }
    let t = tank([97, 97], ElementKind::Quad4).unwrap();
    out.push(("tank 97".into(), run_steady(&t, &constrained()).unwrap()));
    let p = point_sources([101, 101], ElementKind::Quad4).unwrap();
    out.push(("point_sources 101".into(), run_steady(&p, &constrained()).unwrap()));
    for dt in [0.05, 1.0] {
        let s = slug([101, 101], ElementKind::Quad4, dt, 1.0).unwrap();
        let run = run_transient(&s, &constrained()).unwrap();
        for level in run.levels {
            out.push((format!("slug dt={dt} t={:.2}", level.time.unwrap()), level));
        }
    }
    out
}

fn criterion_3_and_4_nonnegativity_and_kkt() {
    let levels = constrained_levels();
    let floor = -10.0 * DEFAULT_TOL;
    let mut nonneg = true;
    let mut kkt_ok = true;
    let mut worst: f64 = 0.0;
    let mut solves = 0;
    for (name, level) in &levels {
        let inv_ok = level.f.values.iter().chain(&level.g.values).all(|&v| v >= floor);
        let species_ok = [&level.a, &level.b, &level.c].iter().all(|f| f.values.iter().all(|&v| v >= 0.0));
        if !(inv_ok && species_ok) {
            nonneg = false;
            println!("  negative values in {name}");
        }
        for qp in [&level.qp_f, &level.qp_g] {
            let qp: &QpSolution = qp.as_ref().expect("constrained solve carries KKT data");
            solves += 1;
            let k = qp.kkt;
            let limit = 1e3 * f64::EPSILON * k.scale;
            let rel = k.stationarity.max(k.dual_feasibility).max(k.complementarity) / k.scale;
            worst = worst.max(rel);
            let lam_ok = qp.lambda_min.iter().chain(&qp.lambda_max).all(|&l| l >= 0.0);
            if k.stationarity > limit || k.dual_feasibility > limit || k.complementarity > limit || !lam_ok {
                kkt_ok = false;
                println!("  KKT residuals too large in {name}: {k:?}");
            }
        }
    }

    // Contrast on the finest desk-scale point-source mesh.
    let p = point_sources([101, 101], ElementKind::Quad4).unwrap();
    let gal = run_steady(&p, &galerkin_raw()).unwrap();
    let gal_c = violation_stats(&gal.c.values, Bounds::non_negative()).percent_nodes_violating;
    let con = &levels.iter().find(|(n, _)| n == "point_sources 101").unwrap().1;
    let con_c = violation_stats(&con.c.values, Bounds::non_negative()).percent_nodes_violating;
    let contrast = gal_c > 40.0 && con_c == 0.0;

    // Galerkin slug undershoots at the first level, constrained does not.
    let s = slug([101, 101], ElementKind::Quad4, 0.05, 1.0).unwrap();
    let mut s1 = s.clone();
    s1.time = TimeControl::Transient { dt: 0.05, horizon: 0.05 };
    let slug_gal = run_transient(&s1, &galerkin_raw()).unwrap();
    let slug_neg = slug_gal.levels[0].c.min() < 0.0 || slug_gal.levels[0].f.min() < 0.0;

    let pass3 = nonneg && contrast && slug_neg;
    report(
        3,
        "non-negativity",
        pass3,
        &format!(
            "{} constrained levels checked; point_sources 101 product C violated: galerkin {gal_c:.2}%, constrained {con_c:.2}%; slug galerkin min C at t=0.05 {:.3e}",
            levels.len(),
            slug_gal.levels[0].c.min()
        ),
    );
    report(4, "KKT certification", kkt_ok, &format!("{solves} solves, worst relative residual {worst:.2e}"));
    assert!(pass3 && kkt_ok);
}

/// Brute-force oracle: try every free/lower/upper assignment and keep the
/// one satisfying the KKT conditions.
fn enumerate_box_qp(h: &DMatrix<f64>, g: &DVector<f64>, lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = g.len();
    let total = 3usize.pow(n as u32);
    let tol = 1e-10;
    for code in 0..total {
        let mut state = vec![0u8; n];
        let mut c = code;
        let mut feasible = true;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        for i in 0..n {
            if (state[i] == 1 && !lo[i].is_finite()) || (state[i] == 2 && !hi[i].is_finite()) {
                feasible = false;
            }
        }
        if !feasible {
            continue;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 0).collect();
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[i] = match state[i] {
                1 => lo[i],
                2 => hi[i],
                _ => 0.0,
            };
        }
        if !free.is_empty() {
            let hff = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
            let rhs = DVector::from_fn(free.len(), |a, _| {
                g[free[a]] - (0..n).filter(|&j| state[j] != 0).map(|j| h[(free[a], j)] * x[j]).sum::<f64>()
            });
            let sol = hff.cholesky().expect("SPD").solve(&rhs);
            for (a, &i) in free.iter().enumerate() {
                x[i] = sol[a];
            }
        }
        if free.iter().any(|&i| x[i] < lo[i] - tol || x[i] > hi[i] + tol) {
            continue;
        }
        let r = h * DVector::from_vec(x.clone()) - g;
        let mut lmin = vec![0.0; n];
        let mut lmax = vec![0.0; n];
        let mut ok = true;
        for i in 0..n {
            match state[i] {
                1 => {
                    lmin[i] = r[i];
                    ok &= r[i] >= -tol;
                }
                2 => {
                    lmax[i] = -r[i];
                    ok &= r[i] <= tol;
                }
                _ => {}
            }
        }
        if ok {
            return (x, lmin, lmax);
        }
    }
    panic!("enumeration found no KKT point");
}

fn criterion_5_qp_oracle() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(20240611);
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut sizes = Vec::new();
    for _ in 0..50 {
        let n = rng.random_range(1..=12);
        sizes.push(n);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let h = a.transpose() * &a + DMatrix::identity(n, n) * 0.1;
        let g = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
        let lo: Vec<f64> =
            (0..n).map(|_| if rng.random_bool(0.15) { f64::NEG_INFINITY } else { rng.random_range(-1.0..0.0) }).collect();
        let hi: Vec<f64> = lo
            .iter()
            .map(|&l| {
                if rng.random_bool(0.15) {
                    f64::INFINITY
                } else {
                    (if l.is_finite() { l } else { -1.0 }) + rng.random_range(0.2..2.0)
                }
            })
            .collect();
        let dense: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| h[(i, j)]).collect()).collect();
        let problem = BoxQp::new(CsrMatrix::from_dense(&dense), g.iter().copied().collect(), lo.clone(), hi.clone()).unwrap();
        let sol = boxqp::solve(&problem, None, &QpOptions::default()).unwrap();
        let (x, lmin, lmax) = enumerate_box_qp(&h, &g, &lo, &hi);
        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        let err = diff(&sol.c, &x).max(diff(&sol.lambda_min, &lmin)).max(diff(&sol.lambda_max, &lmax));
        worst = worst.max(err);
        if err > 1e-9 {
            ok = false;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 60.0;
    report(
        5,
        "QP oracle equivalence",
        ok,
        &format!("50 instances, n up to {}, worst deviation {worst:.2e}; {secs:.1}s", sizes.iter().max().unwrap()),
    );
    assert!(ok);
}

fn criterion_6_scaling() {
    let spec = point_sources([21, 21], ElementKind::Quad4).unwrap();
    let (pf, _) = spec.to_invariants().unwrap();
    let system = assemble_operators(&spec.mesh, &spec.tensor, AssemblyOptions::default()).unwrap();
    let load = pf.load(&spec.mesh, 0.0).unwrap();
    let free = &system.free_dofs;
    let h = system.k.submatrix(free, free);
    let g: Vec<f64> = free.iter().map(|&i| load[i]).collect();
    let solve = |eta: f64| {
        let scaled: Vec<f64> = g.iter().map(|v| eta * v).collect();
        let p = BoxQp::uniform(h.clone(), scaled, 0.0, f64::INFINITY).unwrap();
        boxqp::solve(&p, None, &QpOptions::default()).unwrap()
    };
    let base = solve(1.0);
    let norm = base.c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut ok = base.active_lower() > 0;
    let mut worst: f64 = 0.0;
    for eta in [0.0, 0.5, 2.0, 10.0] {
        let s = solve(eta);
        let err = s.c.iter().zip(&base.c).fold(0.0f64, |m, (a, b)| m.max((a - eta * b).abs()));
        let rel = if eta == 0.0 { err } else { err / (eta * norm) };
        worst = worst.max(rel);
        ok &= rel <= 1e-10;
    }
    report(6, "scaling", ok, &format!("{} active bounds at eta=1, worst relative deviation {worst:.2e}", base.active_lower()));
    assert!(ok);
}

fn criterion_7_comparison_principle() {
    let fam = comparison_counterexample().unwrap();
    let gal = ComparisonFamily::violations(&fam.galerkin);
    let con = ComparisonFamily::violations(&fam.constrained);
    let ok = fam.loads_ordered() && !gal.is_empty() && !con.is_empty();
    report(
        7,
        "comparison-principle counterexample",
        ok,
        &format!("extra load at node {}; ordering broken at galerkin nodes {gal:?}, constrained nodes {con:?}", fam.bump_node),
    );
    assert!(ok);
}

fn criterion_8_recovery_algebra() {
    let mut rng = StdRng::seed_from_u64(8);
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for k in 0..100_000 {
        let st = Stoichiometry::new(rng.random_range(0.1..5.0), rng.random_range(0.1..5.0), rng.random_range(0.1..5.0))
            .unwrap();
        let cg: f64 = rng.random_range(0.0..10.0);
        // A tenth of the samples sit exactly on the coexistence line.
        let cf = if k % 10 == 0 { st.n_a / st.n_b * cg } else { rng.random_range(0.0..10.0) };
        let (a, b, c) = recover_point(cf, cg, &st, f64::EPSILON);
        let scale = cf.max(cg).max(f64::MIN_POSITIVE);
        let ef = (a + st.n_a / st.n_c * c - cf).abs() / scale;
        let eg = (b + st.n_b / st.n_c * c - cg).abs() / scale;
        worst = worst.max(ef).max(eg);
        if a * b != 0.0 || a < 0.0 || b < 0.0 || c < 0.0 || ef > 1e-12 || eg > 1e-12 {
            ok = false;
        }
    }
    report(8, "recovery algebra", ok, &format!("1e5 triples, worst relative reconstruction error {worst:.2e}"));
    assert!(ok);
}

fn criterion_9_transient_reaches_steady() {
    let mut spec = point_sources([21, 21], ElementKind::Quad4).unwrap();
    let steady = run_steady(&spec, &constrained()).unwrap();
    spec.time = TimeControl::Transient { dt: 1.0, horizon: 400.0 };
    let run = run_transient(&spec, &constrained()).unwrap();
    let last = run.levels.last().unwrap();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    let err = diff(&last.f.values, &steady.f.values).max(diff(&last.g.values, &steady.g.values));
    let active = steady.qp_f.as_ref().unwrap().active_lower();
    let ok = err <= 1e-6;
    report(9, "transient-steady consistency", ok, &format!("max difference {err:.2e} after 400 steps; {active} active bounds in F"));
    assert!(ok);
}
