//! Bound-constrained convex quadratic programs
//!
//! ```text
//! minimize   ½⟨c, H c⟩ − ⟨c, g⟩
//! subject to lower ⪯ c ⪯ upper
//! ```
//!
//! for symmetric positive-definite `H`. Three stages, each handing its best
//! point to the next:
//!
//! 1. primal–dual active-set passes from the warm start: pin the predicted
//!    active bounds, solve the free block exactly by sparse Cholesky, and
//!    re-partition every index at once. Few passes when the start is close,
//!    as in time stepping;
//! 2. if those do not settle, a Mehrotra interior-point iteration whose
//!    final partition seeds another round of active-set passes;
//! 3. a globalized projected Newton iteration (Armijo search along the
//!    projection arc) that finishes whatever the passes leave.
//!
//! Once the partition is right the free-block solve is exact, so
//! complementarity holds to rounding and the multipliers are read off the
//! gradient.
//!
//! Unbounded sides are `±∞`; they never activate.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::cholesky::{nested_dissection, Cholesky};
use crate::error::{Error, Result};
use crate::sparse::{norm_inf, CsrMatrix};

/// 100 machine epsilons, relative to `max(1, ‖g‖∞)`.
pub const DEFAULT_TOL: f64 = 100.0 * f64::EPSILON;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const REFINEMENT_STEPS: usize = 2;
const WARM_PASSES: usize = 8;
const CROSSOVER_PASSES: usize = 30;
const IPM_MAX_ITERATIONS: usize = 100;
const IPM_TOL: f64 = 1e-11;
const IPM_STEP_FRACTION: f64 = 0.995;

#[derive(Debug, Clone)]
pub struct BoxQp {
    pub hessian: CsrMatrix,
    pub linear: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxQp {
    pub fn new(hessian: CsrMatrix, linear: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = linear.len();
        if hessian.nrows() != n || hessian.ncols() != n || lower.len() != n || upper.len() != n {
            return Err(Error::InvalidInput(format!(
                "box QP dimensions disagree: H {}x{}, g {n}, lower {}, upper {}",
                hessian.nrows(),
                hessian.ncols(),
                lower.len(),
                upper.len()
            )));
        }
        if linear.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("linear term must be finite".into()));
        }
        for i in 0..n {
            let (l, u) = (lower[i], upper[i]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
                return Err(Error::InvalidInput(format!("invalid bounds [{l}, {u}] at index {i}")));
            }
        }
        Ok(Self { hessian, linear, lower, upper })
    }

    /// Same bounds on every variable.
    pub fn uniform(hessian: CsrMatrix, linear: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        let n = linear.len();
        Self::new(hessian, linear, vec![lower; n], vec![upper; n])
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn objective(&self, c: &[f64]) -> f64 {
        let hc = self.hessian.mul_vec(c);
        c.iter().zip(&hc).zip(&self.linear).map(|((ci, hci), gi)| 0.5 * ci * hci - ci * gi).sum()
    }

    pub fn project(&self, c: &mut [f64]) {
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = ci.clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower.iter().all(|l| *l == f64::NEG_INFINITY) && self.upper.iter().all(|u| *u == f64::INFINITY)
    }

    /// `max(1, ‖g‖∞)`, the scale for relative tolerances.
    pub fn scale(&self) -> f64 {
        norm_inf(&self.linear).max(1.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `‖H c − g − λ_min + λ_max‖∞`
    pub stationarity: f64,
    pub primal_feasibility: f64,
    pub dual_feasibility: f64,
    pub complementarity: f64,
    /// `max(1, ‖g‖∞)`
    pub scale: f64,
}

impl KktResiduals {
    /// Largest residual divided by the scale.
    pub fn max_relative(&self) -> f64 {
        self.stationarity.max(self.primal_feasibility).max(self.dual_feasibility).max(self.complementarity)
            / self.scale
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QpSolution {
    pub c: Vec<f64>,
    pub lambda_min: Vec<f64>,
    pub lambda_max: Vec<f64>,
    pub iterations: usize,
    pub kkt: KktResiduals,
}

impl QpSolution {
    pub fn active_lower(&self) -> usize {
        self.lambda_min.iter().filter(|&&l| l > 0.0).count()
    }

    pub fn active_upper(&self) -> usize {
        self.lambda_max.iter().filter(|&&l| l > 0.0).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QpOptions {
    /// Relative stopping tolerance on the projected gradient.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iterations: 500 }
    }
}

/// Multipliers read from the gradient `r = H c − g` at bound-active entries.
fn multipliers(problem: &BoxQp, c: &[f64], r: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = c.len();
    let mut lmin = vec![0.0; n];
    let mut lmax = vec![0.0; n];
    for i in 0..n {
        if c[i] == problem.lower[i] && r[i] > 0.0 {
            lmin[i] = r[i];
        } else if c[i] == problem.upper[i] && r[i] < 0.0 {
            lmax[i] = -r[i];
        }
    }
    (lmin, lmax)
}

/// Residuals of the first-order optimality system.
pub fn kkt_residuals(problem: &BoxQp, c: &[f64], lambda_min: &[f64], lambda_max: &[f64]) -> KktResiduals {
    let r = problem.hessian.mul_vec(c);
    let mut out = KktResiduals { scale: problem.scale(), ..Default::default() };
    let mut comp_lo = 0.0;
    let mut comp_hi = 0.0;
    for i in 0..c.len() {
        let s = r[i] - problem.linear[i] - lambda_min[i] + lambda_max[i];
        out.stationarity = out.stationarity.max(s.abs());
        out.primal_feasibility =
            out.primal_feasibility.max(problem.lower[i] - c[i]).max(c[i] - problem.upper[i]);
        out.dual_feasibility = out.dual_feasibility.max(-lambda_min[i]).max(-lambda_max[i]);
        if problem.lower[i].is_finite() {
            comp_lo += (c[i] - problem.lower[i]) * lambda_min[i];
        }
        if problem.upper[i].is_finite() {
            comp_hi += (problem.upper[i] - c[i]) * lambda_max[i];
        }
    }
    out.complementarity = f64::abs(comp_lo).max(f64::abs(comp_hi));
    out
}

/// `c = H⁻¹ g` by sparse Cholesky with iterative refinement.
pub fn solve_unconstrained(h: &CsrMatrix, g: &[f64]) -> Result<Vec<f64>> {
    if h.nrows() != g.len() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    if g.is_empty() {
        return Ok(Vec::new());
    }
    let chol = Cholesky::factor(h)?;
    Ok(chol.solve_refined(h, g, REFINEMENT_STEPS))
}

/// Cached factorization of the free block for the last free set.
struct FreeBlock {
    free: Vec<usize>,
    matrix: CsrMatrix,
    chol: Cholesky,
}

fn factor_free<'a>(h: &CsrMatrix, free: &[usize], block: &'a mut Option<FreeBlock>) -> Result<&'a FreeBlock> {
    if !block.as_ref().is_some_and(|b| b.free == free) {
        let matrix = h.submatrix(free, free);
        let chol = Cholesky::factor(&matrix)?;
        *block = Some(FreeBlock { free: free.to_vec(), matrix, chol });
    }
    Ok(block.as_ref().expect("factorized above"))
}

fn gradient(problem: &BoxQp, c: &[f64], r: &mut [f64]) {
    problem.hessian.mul_vec_into(c, r);
    for (ri, gi) in r.iter_mut().zip(&problem.linear) {
        *ri -= gi;
    }
}

pub fn solve(problem: &BoxQp, warm_start: Option<&[f64]>, opts: &QpOptions) -> Result<QpSolution> {
    let n = problem.dim();
    let mut c = match warm_start {
        Some(w) if w.len() == n => w.to_vec(),
        Some(w) => {
            return Err(Error::InvalidInput(format!("warm start has length {}, expected {n}", w.len())));
        }
        None => vec![0.0; n],
    };
    problem.project(&mut c);

    if n == 0 {
        return Ok(QpSolution {
            c,
            lambda_min: vec![],
            lambda_max: vec![],
            iterations: 0,
            kkt: KktResiduals { scale: problem.scale(), ..Default::default() },
        });
    }
    if problem.is_unbounded() {
        let c = solve_unconstrained(&problem.hessian, &problem.linear)?;
        let zeros = vec![0.0; n];
        let kkt = kkt_residuals(problem, &c, &zeros, &zeros);
        return Ok(QpSolution { c, lambda_min: zeros.clone(), lambda_max: zeros, iterations: 1, kkt });
    }

    let diag = problem.hessian.diagonal();
    if let Some(i) = diag.iter().position(|&d| d <= 0.0 || !d.is_finite()) {
        return Err(Error::NotPositiveDefinite { pivot: i, value: diag[i] });
    }
    let mut block: Option<FreeBlock> = None;
    let mut r = vec![0.0; n];
    let mut iterations = 0;

    // Cheap when the warm start is close (time stepping); otherwise hand
    // over to the interior-point phase, whose partition the active-set
    // passes then polish to exact complementarity.
    gradient(problem, &c, &mut r);
    let slots: Vec<Slot> = (0..n).map(|i| classify(problem, &diag, i, c[i], r[i])).collect();
    let budget = opts.max_iterations.min(iterations + WARM_PASSES);
    let mut outcome = active_set_phase(problem, slots, &diag, &mut block, budget, &mut iterations, &c)?;
    if let Phase::Stalled(best) = &outcome {
        if iterations < opts.max_iterations {
            let (point, slots) = interior_point(problem, best, opts.max_iterations, &mut iterations)?;
            let budget = opts.max_iterations.min(iterations + CROSSOVER_PASSES);
            outcome = active_set_phase(problem, slots, &diag, &mut block, budget, &mut iterations, &point)?;
        }
    }
    c = match outcome {
        Phase::Converged(c) | Phase::Stalled(c) => c,
    };
    projected_newton(problem, c, &diag, &mut block, opts, iterations, &mut r)
}

/// Globalized projected Newton iteration, the fallback when the active-set
/// passes do not settle: variables ε-close to a bound with an outward
/// gradient take a diagonally scaled step, the rest an exact Newton step on
/// the free block, with an Armijo search along the projection arc.
fn projected_newton(
    problem: &BoxQp,
    mut c: Vec<f64>,
    diag: &[f64],
    block: &mut Option<FreeBlock>,
    opts: &QpOptions,
    mut iterations: usize,
    r: &mut [f64],
) -> Result<QpSolution> {
    let n = c.len();
    let h = &problem.hessian;
    let tol_abs = opts.tol * problem.scale();
    loop {
        gradient(problem, &c, r);
        let pg = projected_gradient_norm(problem, &c, r);
        if pg <= tol_abs {
            break;
        }
        if iterations >= opts.max_iterations {
            let (lambda_min, lambda_max) = multipliers(problem, &c, r);
            let kkt = kkt_residuals(problem, &c, &lambda_min, &lambda_max);
            return Err(Error::QpIterationLimit {
                best: Box::new(QpSolution { c, lambda_min, lambda_max, iterations, kkt }),
            });
        }
        iterations += 1;

        let xnorm = norm_inf(&c).max(1.0);
        let mut w: f64 = 0.0;
        for i in 0..n {
            let step = (c[i] - r[i] / diag[i]).clamp(problem.lower[i], problem.upper[i]);
            w = w.max((c[i] - step).abs());
        }
        let eps_active = w.min(1e-2 * xnorm);
        let binding: Vec<bool> = (0..n)
            .map(|i| {
                (c[i] - problem.lower[i] <= eps_active && r[i] > 0.0)
                    || (problem.upper[i] - c[i] <= eps_active && r[i] < 0.0)
            })
            .collect();
        let free: Vec<usize> = (0..n).filter(|&i| !binding[i]).collect();

        let mut d = vec![0.0; n];
        for i in 0..n {
            if binding[i] {
                d[i] = -r[i] / diag[i];
            }
        }
        if !free.is_empty() {
            let fb = factor_free(h, &free, block)?;
            let rhs: Vec<f64> = free.iter().map(|&i| -r[i]).collect();
            let df = fb.chol.solve_refined(&fb.matrix, &rhs, REFINEMENT_STEPS);
            for (k, &i) in free.iter().enumerate() {
                d[i] = df[k];
            }
        }

        // f(c + Δ) − f(c) = ⟨r, Δ⟩ + ½⟨Δ, H Δ⟩
        let newton_decrease: f64 = free.iter().map(|&i| -r[i] * d[i]).sum();
        let mut alpha = 1.0;
        let mut accepted: Option<Vec<f64>> = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial: Vec<f64> = c.iter().zip(&d).map(|(ci, di)| ci + alpha * di).collect();
            problem.project(&mut trial);
            let delta: Vec<f64> = trial.iter().zip(&c).map(|(t, ci)| t - ci).collect();
            let hd = h.mul_vec(&delta);
            let change: f64 =
                delta.iter().zip(r.iter()).zip(&hd).map(|((di, ri), hdi)| ri * di + 0.5 * di * hdi).sum();
            let binding_decrease: f64 = (0..n).filter(|&i| binding[i]).map(|i| -r[i] * delta[i]).sum();
            let predicted = ARMIJO * (alpha * newton_decrease + binding_decrease);
            if -change >= predicted {
                accepted = Some(trial);
                break;
            }
            alpha *= 0.5;
        }
        let Some(next) = accepted else {
            // No representable decrease left along the arc.
            break;
        };
        let moved = next.iter().zip(&c).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        c = next;
        if moved <= 16.0 * f64::EPSILON * xnorm {
            gradient(problem, &c, r);
            break;
        }
    }

    let (lambda_min, lambda_max) = multipliers(problem, &c, r);
    let kkt = kkt_residuals(problem, &c, &lambda_min, &lambda_max);
    Ok(QpSolution { c, lambda_min, lambda_max, iterations, kkt })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Slot {
    Free,
    Lower,
    Upper,
}

/// Partition rule of the primal–dual active-set iteration; `mu` is the
/// bound multiplier estimate (zero on free variables).
fn classify(problem: &BoxQp, diag: &[f64], i: usize, c: f64, mu: f64) -> Slot {
    let (l, u) = (problem.lower[i], problem.upper[i]);
    if l == u || (l.is_finite() && mu + diag[i] * (l - c) > 0.0) {
        Slot::Lower
    } else if u.is_finite() && -mu + diag[i] * (c - u) > 0.0 {
        Slot::Upper
    } else {
        Slot::Free
    }
}

enum Phase {
    Converged(Vec<f64>),
    /// Best feasible point seen.
    Stalled(Vec<f64>),
}

/// Primal–dual active-set (semismooth Newton) passes: pin the predicted
/// active set, solve the free block exactly, re-partition every index at
/// once. Stops when the partition repeats itself; a cycle or an exhausted
/// budget reports the best projected iterate instead.
fn active_set_phase(
    problem: &BoxQp,
    mut slots: Vec<Slot>,
    diag: &[f64],
    block: &mut Option<FreeBlock>,
    budget: usize,
    iterations: &mut usize,
    start: &[f64],
) -> Result<Phase> {
    let n = slots.len();
    let h = &problem.hessian;
    let mut best = start.to_vec();
    let mut best_obj = problem.objective(start);
    let mut seen = HashSet::new();
    let mut c = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut trial = vec![0.0; n];

    while *iterations < budget && seen.insert(slots.clone()) {
        *iterations += 1;
        let mut free = Vec::new();
        for i in 0..n {
            c[i] = match slots[i] {
                Slot::Lower => problem.lower[i],
                Slot::Upper => problem.upper[i],
                Slot::Free => {
                    free.push(i);
                    0.0
                }
            };
        }
        if !free.is_empty() {
            h.mul_vec_into(&c, &mut r);
            let rhs: Vec<f64> = free.iter().map(|&i| problem.linear[i] - r[i]).collect();
            let fb = factor_free(h, &free, block)?;
            let cf = fb.chol.solve_refined(&fb.matrix, &rhs, REFINEMENT_STEPS);
            for (k, &i) in free.iter().enumerate() {
                c[i] = cf[k];
            }
        }
        gradient(problem, &c, &mut r);

        let next: Vec<Slot> = (0..n)
            .map(|i| {
                let mu = if slots[i] == Slot::Free { 0.0 } else { r[i] };
                classify(problem, diag, i, c[i], mu)
            })
            .collect();
        if next == slots {
            return Ok(Phase::Converged(c));
        }
        trial.copy_from_slice(&c);
        problem.project(&mut trial);
        let obj = problem.objective(&trial);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&trial);
        }
        slots = next;
    }
    Ok(Phase::Stalled(best))
}

/// Mehrotra predictor–corrector interior-point iteration on the non-fixed
/// variables. Returns the projected final point and the partition it
/// identifies (a bound is active where `Hᵢᵢ·slack` is below its multiplier).
fn interior_point(
    problem: &BoxQp,
    start: &[f64],
    limit: usize,
    iterations: &mut usize,
) -> Result<(Vec<f64>, Vec<Slot>)> {
    let n = start.len();
    let idx: Vec<usize> = (0..n).filter(|&i| problem.lower[i] != problem.upper[i]).collect();
    if idx.is_empty() {
        return Ok((problem.lower.clone(), vec![Slot::Lower; n]));
    }
    // Eliminate fixed variables.
    let h_full = &problem.hessian;
    let mut fixed = vec![0.0; n];
    for i in 0..n {
        if problem.lower[i] == problem.upper[i] {
            fixed[i] = problem.lower[i];
        }
    }
    let hf = h_full.mul_vec(&fixed);
    let h = h_full.submatrix(&idx, &idx);
    let g: Vec<f64> = idx.iter().map(|&i| problem.linear[i] - hf[i]).collect();
    let lo: Vec<f64> = idx.iter().map(|&i| problem.lower[i]).collect();
    let hi: Vec<f64> = idx.iter().map(|&i| problem.upper[i]).collect();
    let m = idx.len();
    let has_lo: Vec<bool> = lo.iter().map(|l| l.is_finite()).collect();
    let has_hi: Vec<bool> = hi.iter().map(|u| u.is_finite()).collect();
    let sides = has_lo.iter().filter(|&&b| b).count() + has_hi.iter().filter(|&&b| b).count();
    let scale = norm_inf(&g).max(1.0);

    // Interior start: a quarter of the box width, or unit distance from a
    // lone bound.
    let mut c: Vec<f64> = idx.iter().map(|&i| start[i]).collect();
    for k in 0..m {
        let (l, u) = (lo[k], hi[k]);
        c[k] = match (has_lo[k], has_hi[k]) {
            (true, true) => {
                let margin = 0.25 * (u - l);
                c[k].clamp(l + margin, u - margin)
            }
            (true, false) => c[k].max(l + 1.0),
            (false, true) => c[k].min(u - 1.0),
            (false, false) => c[k],
        };
    }
    let mut r = h.mul_vec(&c);
    for (rk, gk) in r.iter_mut().zip(&g) {
        *rk -= gk;
    }
    let kappa = 1e-2 * norm_inf(&r).max(1.0);
    let mut z: Vec<f64> = (0..m).map(|k| if has_lo[k] { r[k].max(0.0) + kappa } else { 0.0 }).collect();
    let mut w: Vec<f64> = (0..m).map(|k| if has_hi[k] { (-r[k]).max(0.0) + kappa } else { 0.0 }).collect();

    let ordering = nested_dissection(&h);
    let slack = |c: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let s = (0..m).map(|k| if has_lo[k] { c[k] - lo[k] } else { 1.0 }).collect();
        let t = (0..m).map(|k| if has_hi[k] { hi[k] - c[k] } else { 1.0 }).collect();
        (s, t)
    };
    let max_step = |x: &[f64], dx: &[f64], on: &[bool]| -> f64 {
        let mut a: f64 = 1.0;
        for k in 0..m {
            if on[k] && dx[k] < 0.0 {
                a = a.min(-x[k] / dx[k]);
            }
        }
        a
    };

    for _ in 0..IPM_MAX_ITERATIONS {
        if *iterations >= limit {
            break;
        }
        *iterations += 1;
        let (s, t) = slack(&c);
        h.mul_vec_into(&c, &mut r);
        let rd: Vec<f64> = (0..m).map(|k| r[k] - g[k] - z[k] + w[k]).collect();
        let gap: f64 = (0..m).map(|k| s[k] * z[k] + t[k] * w[k]).sum::<f64>();
        let mu = gap / sides as f64;
        if norm_inf(&rd) <= IPM_TOL * scale && mu <= IPM_TOL * scale {
            break;
        }
        let d: Vec<f64> = (0..m).map(|k| z[k] / s[k] + w[k] / t[k]).collect();
        let kmat = h.plus_diagonal(&d)?;
        let chol = Cholesky::factor_with_ordering(&kmat, ordering.clone())?;

        // Complementarity targets ρ_z, ρ_w give the step
        // (H + Z/S + W/T) Δc = −r_d + ρ_z/s − ρ_w/t.
        let direction = |rho_z: &[f64], rho_w: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            let rhs: Vec<f64> = (0..m)
                .map(|k| {
                    let mut v = -rd[k];
                    if has_lo[k] {
                        v += rho_z[k] / s[k];
                    }
                    if has_hi[k] {
                        v -= rho_w[k] / t[k];
                    }
                    v
                })
                .collect();
            let dc = chol.solve_refined(&kmat, &rhs, 1);
            let dz = (0..m).map(|k| if has_lo[k] { (rho_z[k] - z[k] * dc[k]) / s[k] } else { 0.0 }).collect();
            let dw = (0..m).map(|k| if has_hi[k] { (rho_w[k] + w[k] * dc[k]) / t[k] } else { 0.0 }).collect();
            (dc, dz, dw)
        };
        let steps = |dc: &[f64], dz: &[f64], dw: &[f64]| -> f64 {
            let neg: Vec<f64> = dc.iter().map(|v| -v).collect();
            max_step(&s, dc, &has_lo).min(max_step(&t, &neg, &has_hi)).min(max_step(&z, dz, &has_lo)).min(max_step(
                &w, dw, &has_hi,
            ))
        };

        let rho_z: Vec<f64> = (0..m).map(|k| -s[k] * z[k]).collect();
        let rho_w: Vec<f64> = (0..m).map(|k| -t[k] * w[k]).collect();
        let (dc, dz, dw) = direction(&rho_z, &rho_w);
        let a = steps(&dc, &dz, &dw);
        let mu_aff: f64 = (0..m)
            .map(|k| {
                let lo_term = if has_lo[k] { (s[k] + a * dc[k]) * (z[k] + a * dz[k]) } else { 0.0 };
                let hi_term = if has_hi[k] { (t[k] - a * dc[k]) * (w[k] + a * dw[k]) } else { 0.0 };
                lo_term + hi_term
            })
            .sum::<f64>()
            / sides as f64;
        let sigma = (mu_aff / mu).powi(3).min(1.0);

        let rho_z: Vec<f64> = (0..m).map(|k| sigma * mu - s[k] * z[k] - dc[k] * dz[k]).collect();
        let rho_w: Vec<f64> = (0..m).map(|k| sigma * mu - t[k] * w[k] + dc[k] * dw[k]).collect();
        let (dc, dz, dw) = direction(&rho_z, &rho_w);
        let a = (IPM_STEP_FRACTION * steps(&dc, &dz, &dw)).min(1.0);
        for k in 0..m {
            c[k] += a * dc[k];
            z[k] += a * dz[k];
            w[k] += a * dw[k];
        }
    }

    let (s, t) = slack(&c);
    let hd = h.diagonal();
    let mut point = fixed;
    let mut slots = vec![Slot::Lower; n];
    for (k, &i) in idx.iter().enumerate() {
        point[i] = c[k];
        slots[i] = if has_lo[k] && hd[k] * s[k] < z[k] {
            Slot::Lower
        } else if has_hi[k] && hd[k] * t[k] < w[k] {
            Slot::Upper
        } else {
            Slot::Free
        };
    }
    problem.project(&mut point);
    Ok((point, slots))
}

fn projected_gradient_norm(problem: &BoxQp, c: &[f64], r: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..c.len() {
        let g = if c[i] <= problem.lower[i] {
            r[i].min(0.0)
        } else if c[i] >= problem.upper[i] {
            r[i].max(0.0)
        } else {
            r[i]
        };
        m = m.max(g.abs());
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(h: f64, g: f64, lo: f64, hi: f64) -> QpSolution {
        let p = BoxQp::new(CsrMatrix::from_diagonal(&[h]), vec![g], vec![lo], vec![hi]).unwrap();
        solve(&p, None, &QpOptions::default()).unwrap()
    }

    #[test]
    fn lower_bound_active() {
        let s = scalar(1.0, -1.0, 0.0, 1.0);
        assert_eq!(s.c, vec![0.0]);
        assert_eq!(s.lambda_min, vec![1.0]);
        assert_eq!(s.lambda_max, vec![0.0]);
    }

    #[test]
    fn upper_bound_active() {
        let s = scalar(1.0, 2.0, 0.0, 1.0);
        assert_eq!(s.c, vec![1.0]);
        assert_eq!(s.lambda_min, vec![0.0]);
        assert_eq!(s.lambda_max, vec![1.0]);
    }

    #[test]
    fn interior_optimum_matches_unconstrained() {
        let h = CsrMatrix::from_diagonal(&[2.0, 2.0]);
        let p = BoxQp::uniform(h.clone(), vec![2.0, 2.0], 0.0, 10.0).unwrap();
        let s = solve(&p, None, &QpOptions::default()).unwrap();
        assert_eq!(s.c, vec![1.0, 1.0]);
        assert_eq!(s.lambda_min, vec![0.0, 0.0]);
        assert_eq!(s.lambda_max, vec![0.0, 0.0]);
        assert_eq!(solve_unconstrained(&h, &[2.0, 2.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn identity_unconstrained_returns_rhs() {
        let g = vec![0.5, -3.0, 7.25];
        assert_eq!(solve_unconstrained(&CsrMatrix::identity(3), &g).unwrap(), g);
    }

    #[test]
    fn rejects_crossed_bounds_and_bad_hessian() {
        assert!(BoxQp::new(CsrMatrix::identity(1), vec![0.0], vec![1.0], vec![0.0]).is_err());
        assert!(BoxQp::new(CsrMatrix::identity(2), vec![0.0], vec![0.0], vec![1.0]).is_err());
        let p = BoxQp::uniform(CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]), vec![1.0, 1.0], 0.0, 1.0)
            .unwrap();
        assert!(matches!(solve(&p, None, &QpOptions::default()), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn iteration_cap_carries_best_iterate() {
        let h = CsrMatrix::from_dense(&[vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]]);
        let p = BoxQp::uniform(h, vec![1.0, -5.0, 1.0], 0.0, f64::INFINITY).unwrap();
        let err = solve(&p, None, &QpOptions { max_iterations: 0, ..Default::default() }).unwrap_err();
        match err {
            Error::QpIterationLimit { best } => assert_eq!(best.c.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn warm_start_is_clamped() {
        let p = BoxQp::uniform(CsrMatrix::identity(2), vec![0.5, 0.5], 0.0, 1.0).unwrap();
        let s = solve(&p, Some(&[-4.0, 9.0]), &QpOptions::default()).unwrap();
        assert_eq!(s.c, vec![0.5, 0.5]);
    }

    #[test]
    fn fixed_variable() {
        let h = CsrMatrix::from_dense(&[vec![2.0, -1.0], vec![-1.0, 2.0]]);
        let p = BoxQp::new(h, vec![1.0, 1.0], vec![0.3, 0.0], vec![0.3, 5.0]).unwrap();
        let s = solve(&p, None, &QpOptions::default()).unwrap();
        assert_eq!(s.c[0], 0.3);
        assert!((s.c[1] - 0.65).abs() < 1e-15);
        assert!(s.kkt.max_relative() < 1e-14);
    }

    fn laplacian_1d(n: usize, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn oscillating_problem() -> BoxQp {
        let n = 40;
        let g: Vec<f64> = (0..n).map(|i| if i % 10 < 4 { 1.0 } else { -3.0 }).collect();
        BoxQp::uniform(laplacian_1d(n, 0.05), g, 0.0, 4.0).unwrap()
    }

    #[test]
    fn warm_start_at_solution_needs_one_pass() {
        let p = oscillating_problem();
        let first = solve(&p, None, &QpOptions::default()).unwrap();
        assert!(first.active_lower() > 0);
        let again = solve(&p, Some(&first.c), &QpOptions::default()).unwrap();
        assert_eq!(again.iterations, 1);
        assert_eq!(again.c, first.c);
    }

    #[test]
    fn interior_point_identifies_active_set() {
        let p = oscillating_problem();
        let exact = solve(&p, None, &QpOptions::default()).unwrap();
        let mut its = 0;
        let (point, slots) = interior_point(&p, &vec![0.0; p.dim()], 200, &mut its).unwrap();
        assert!(its < 60, "{its} interior-point iterations");
        for i in 0..p.dim() {
            assert!((point[i] - exact.c[i]).abs() < 1e-8);
            let expected = if exact.lambda_min[i] > 0.0 { Slot::Lower } else { Slot::Free };
            assert_eq!(slots[i], expected, "index {i}");
        }
    }

    #[test]
    fn fixed_variables_skip_the_interior_point_phase() {
        let p = BoxQp::new(laplacian_1d(3, 0.0), vec![1.0, 1.0, 1.0], vec![0.5; 3], vec![0.5; 3]).unwrap();
        let mut its = 0;
        let (point, slots) = interior_point(&p, &[0.0; 3], 10, &mut its).unwrap();
        assert_eq!(its, 0);
        assert_eq!(point, vec![0.5; 3]);
        assert!(slots.iter().all(|&s| s == Slot::Lower));
    }
}
