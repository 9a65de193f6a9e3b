//! Maximize `λ` subject to nonnegative leading minors of the Gram matrix and
//! `α >= 0`, by a log-barrier interior-point loop with quasi-Newton inner
//! steps and finite-difference gradients. Solutions are then checked for
//! positive semidefiniteness and, if rejected, backed off.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{leading_minors, log_minor_sum, min_eigenvalue, solve, Matrix};
use crate::poly::VarId;
use crate::sos::GramProblem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NlpError {
    #[error("gram entry ({row}, {col}) is not affine in the multipliers")]
    NotAffine { row: usize, col: usize },
    #[error("gram entry ({row}, {col}) depends on a non-decision variable")]
    ForeignVariable { row: usize, col: usize },
    #[error("decision vector has length {got}, expected {expected}")]
    DecisionLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NlpOptions {
    /// Budget of quasi-Newton iterations across all barrier stages.
    pub max_iter: usize,
    pub inner_max_iter: usize,
    /// Stop once `λ` moves less than this between barrier stages.
    pub outer_tol: f64,
    pub mu0: f64,
    pub mu_factor: f64,
    pub mu_min: f64,
    pub lambda0: f64,
    pub alpha_init_single: f64,
    pub alpha_init_multi: f64,
    pub alpha_max: f64,
    pub lambda_max: f64,
    pub psd_tol: f64,
    pub backoff_rounds: usize,
    pub backoff_factor: f64,
    pub seed: u64,
}

impl Default for NlpOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            inner_max_iter: 400,
            outer_tol: 1e-8,
            mu0: 1.0,
            mu_factor: 0.2,
            mu_min: 1e-12,
            lambda0: 1e-3,
            alpha_init_single: 0.1,
            alpha_init_multi: 0.01,
            alpha_max: 1e4,
            lambda_max: 1.0,
            psd_tol: 1e-8,
            backoff_rounds: 10,
            backoff_factor: 0.95,
            seed: 0,
        }
    }
}

impl NlpOptions {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let pos = [
            ("outer_tol", self.outer_tol),
            ("mu0", self.mu0),
            ("mu_min", self.mu_min),
            ("lambda0", self.lambda0),
            ("alpha_init_single", self.alpha_init_single),
            ("alpha_init_multi", self.alpha_init_multi),
            ("alpha_max", self.alpha_max),
            ("lambda_max", self.lambda_max),
            ("psd_tol", self.psd_tol),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                errs.push(format!("solver.{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("mu_factor", self.mu_factor), ("backoff_factor", self.backoff_factor)] {
            if !(v > 0.0 && v < 1.0) {
                errs.push(format!("solver.{name} must lie in (0, 1), got {v}"));
            }
        }
        if self.max_iter == 0 || self.inner_max_iter == 0 {
            errs.push("solver iteration limits must be positive".to_string());
        }
        if self.lambda0 >= self.lambda_max {
            errs.push("solver.lambda0 must be below solver.lambda_max".to_string());
        }
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlpSolution {
    pub lambda: f64,
    /// One value per multiplier, in cone order.
    pub alphas: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    /// `λ` at the end of every barrier stage.
    pub objective_trace: Vec<f64>,
    pub backoff_rounds: usize,
    pub min_eigenvalue: Option<f64>,
    /// Gram rows removed because they are forced to zero.
    pub dropped_rows: usize,
    /// Multipliers forced to zero before solving.
    pub fixed_multipliers: usize,
}

impl NlpSolution {
    fn infeasible(n_alpha: usize, iterations: usize) -> Self {
        Self {
            lambda: 0.0,
            alphas: vec![0.0; n_alpha],
            status: SolveStatus::Infeasible,
            iterations,
            objective_trace: Vec::new(),
            backoff_rounds: 0,
            min_eigenvalue: None,
            dropped_rows: 0,
            fixed_multipliers: 0,
        }
    }

    /// Decision vector `[λ, α…]`.
    pub fn decision(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(1 + self.alphas.len());
        d.push(self.lambda);
        d.extend_from_slice(&self.alphas);
        d
    }
}

/// `coef · λ^lambda_pow · α_alpha` (or without the multiplier factor).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    alpha: Option<usize>,
    lambda_pow: u32,
    coef: f64,
}

/// Gram entries as flat term lists over the decision vector.
#[derive(Debug, Clone)]
struct CompiledGram {
    size: usize,
    n_alpha: usize,
    entries: Vec<Vec<Vec<Term>>>,
}

impl CompiledGram {
    fn new(problem: &GramProblem) -> Result<Self, NlpError> {
        let n = problem.size();
        let slot = |v: VarId| problem.alphas.iter().position(|&a| a == v);
        let mut entries = vec![vec![Vec::new(); n]; n];
        for (i, row) in problem.gram.entries.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                for (m, coef) in e.terms() {
                    let mut alpha = None;
                    let mut lambda_pow = 0;
                    for &(v, p) in m.powers() {
                        if v == problem.lambda {
                            lambda_pow = p;
                        } else if let Some(k) = slot(v) {
                            if p != 1 || alpha.is_some() {
                                return Err(NlpError::NotAffine { row: i, col: j });
                            }
                            alpha = Some(k);
                        } else {
                            return Err(NlpError::ForeignVariable { row: i, col: j });
                        }
                    }
                    entries[i][j].push(Term { alpha, lambda_pow, coef });
                }
            }
        }
        Ok(Self { size: n, n_alpha: problem.alphas.len(), entries })
    }

    fn entry(&self, i: usize, j: usize, lambda: f64, alphas: &[f64]) -> f64 {
        self.entries[i][j]
            .iter()
            .map(|t| {
                let a = t.alpha.map_or(1.0, |k| alphas[k]);
                t.coef * lambda.powi(t.lambda_pow as i32) * a
            })
            .sum()
    }

    fn matrix(&self, rows: &[usize], lambda: f64, alphas: &[f64], shift: f64) -> Matrix {
        let mut m = vec![vec![0.0; rows.len()]; rows.len()];
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in rows.iter().enumerate().skip(a) {
                let v = self.entry(i, j, lambda, alphas);
                m[a][b] = v;
                m[b][a] = v;
            }
            m[a][a] += shift;
        }
        m
    }
}

/// Outcome of the structural pre-pass.
#[derive(Debug, Clone, PartialEq)]
struct Reduction {
    rows: Vec<usize>,
    fixed: Vec<bool>,
    infeasible: bool,
}

/// With `λ >= 0` and `α >= 0` every term has the sign of its coefficient.
/// A diagonal entry whose terms are all nonpositive must vanish, which pins
/// its multipliers to zero; a zero diagonal forces its row to vanish, which
/// pins multipliers of single-signed off-diagonal entries. Rows that end up
/// identically zero are dropped. Unused multipliers are pinned too.
fn reduce(c: &CompiledGram) -> Reduction {
    let mut fixed = vec![false; c.n_alpha];
    let mut active = vec![true; c.size];
    let mut infeasible = false;
    let live = |t: &Term, fixed: &[bool]| t.coef != 0.0 && t.alpha.is_none_or(|k| !fixed[k]);
    loop {
        let mut changed = false;
        for i in 0..c.size {
            if !active[i] {
                continue;
            }
            let diag: Vec<Term> = c.entries[i][i].iter().filter(|t| live(t, &fixed)).copied().collect();
            if !diag.is_empty() {
                if diag.iter().all(|t| t.coef < 0.0) {
                    if diag.iter().any(|t| t.alpha.is_none()) {
                        infeasible = true;
                    }
                    for t in &diag {
                        if let Some(k) = t.alpha {
                            fixed[k] = true;
                        }
                    }
                    changed = true;
                }
                continue;
            }
            // zero diagonal: the whole row has to vanish
            let mut row_zero = true;
            for j in 0..c.size {
                if j == i || !active[j] {
                    continue;
                }
                let off: Vec<Term> = c.entries[i][j].iter().filter(|t| live(t, &fixed)).copied().collect();
                if off.is_empty() {
                    continue;
                }
                let same_sign = off.iter().all(|t| t.coef > 0.0) || off.iter().all(|t| t.coef < 0.0);
                if same_sign {
                    if off.iter().any(|t| t.alpha.is_none()) {
                        infeasible = true;
                    }
                    for t in &off {
                        if let Some(k) = t.alpha {
                            fixed[k] = true;
                        }
                    }
                    changed = true;
                } else {
                    row_zero = false;
                }
            }
            if row_zero {
                active[i] = false;
                changed = true;
            }
        }
        if !changed || infeasible {
            break;
        }
    }
    let rows: Vec<usize> = (0..c.size).filter(|&i| active[i]).collect();
    for (k, f) in fixed.iter_mut().enumerate() {
        let used = rows.iter().any(|&i| {
            rows.iter()
                .any(|&j| c.entries[i][j].iter().any(|t| t.alpha == Some(k) && t.coef != 0.0))
        });
        if !used {
            *f = true;
        }
    }
    Reduction { rows, fixed, infeasible }
}

/// Central differences with step `1e-6 · (1 + |x_i|)`, shrunk while a probe
/// leaves the barrier domain.
fn fd_gradient<F>(f: &F, x: &[f64]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let coord = |i: usize| {
        let mut h = 1e-6 * (1.0 + x[i].abs());
        let mut probe = x.to_vec();
        for _ in 0..12 {
            probe[i] = x[i] + h;
            let fp = f(&probe);
            probe[i] = x[i] - h;
            let fm = f(&probe);
            if fp.is_finite() && fm.is_finite() {
                return (fp - fm) / (2.0 * h);
            }
            h *= 0.1;
        }
        0.0
    };
    crate::par::par_map(x.len(), coord)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quasi-Newton (BFGS inverse update) descent with backtracking. `done` is
/// polled after every accepted step.
fn bfgs<F, D>(f: &F, x0: Vec<f64>, max_iter: usize, done: D) -> (Vec<f64>, usize)
where
    F: Fn(&[f64]) -> f64 + Sync,
    D: Fn(&[f64]) -> bool,
{
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = fd_gradient(f, &x);
    let identity = |s: f64| -> Matrix {
        (0..n).map(|i| (0..n).map(|j| if i == j { s } else { 0.0 }).collect()).collect()
    };
    let mut h = identity(1.0);
    let mut fresh = true;
    let mut iters = 0;
    while iters < max_iter {
        if g.iter().all(|v| v.abs() <= 1e-13) {
            break;
        }
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&h[i], &g)).collect();
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            h = identity(1.0);
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        iters += 1;
        let Some((xn, fxn)) = accepted else {
            if fresh {
                break;
            }
            h = identity(1.0);
            fresh = true;
            continue;
        };
        let gn = fd_gradient(f, &xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() && sy > 0.0 {
            if fresh {
                h = identity(sy / dot(&yv, &yv));
            }
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], &yv)).collect();
            let yhy = dot(&yv, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
            fresh = false;
        }
        let small_move = s.iter().zip(&xn).all(|(si, xi)| si.abs() <= 1e-15 * (1.0 + xi.abs()));
        let small_gain = (fx - fxn).abs() <= 1e-15 * (1.0 + fx.abs());
        x = xn;
        fx = fxn;
        g = gn;
        if done(&x) || (small_move && small_gain) {
            break;
        }
    }
    (x, iters)
}

fn log_box(v: f64, hi: f64) -> f64 {
    if v > 0.0 && v < hi {
        v.ln() + (hi - v).ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Shared state for the barrier subproblems of one Gram problem.
struct Barrier<'a> {
    c: &'a CompiledGram,
    red: &'a Reduction,
    free: Vec<usize>,
    opts: &'a NlpOptions,
}

impl<'a> Barrier<'a> {
    fn new(c: &'a CompiledGram, red: &'a Reduction, opts: &'a NlpOptions) -> Self {
        let free = (0..c.n_alpha).filter(|&k| !red.fixed[k]).collect();
        Self { c, red, free, opts }
    }

    fn expand(&self, free_vals: &[f64]) -> Vec<f64> {
        let mut a = vec![0.0; self.c.n_alpha];
        for (&k, &v) in self.free.iter().zip(free_vals) {
            a[k] = v;
        }
        a
    }

    fn alpha_barrier(&self, free_vals: &[f64]) -> f64 {
        free_vals.iter().map(|&a| log_box(a, self.opts.alpha_max)).sum()
    }

    /// `t − μ (Σ ln det minors(Q + tI) + Σ box terms)`, `z = [t, α_free…]`.
    fn phase1(&self, lambda: f64, mu: f64, z: &[f64]) -> f64 {
        let alphas = self.expand(&z[1..]);
        let m = self.c.matrix(&self.red.rows, lambda, &alphas, z[0]);
        let Some(logdet) = log_minor_sum(&m) else {
            return f64::INFINITY;
        };
        let b = self.alpha_barrier(&z[1..]);
        if !b.is_finite() {
            return f64::INFINITY;
        }
        z[0] - mu * (logdet + b)
    }

    /// `−λ − μ (Σ ln det minors(Q) + Σ box terms)`, `z = [λ, α_free…]`.
    fn main(&self, mu: f64, z: &[f64]) -> f64 {
        let lb = log_box(z[0], self.opts.lambda_max);
        let b = self.alpha_barrier(&z[1..]);
        if !lb.is_finite() || !b.is_finite() {
            return f64::INFINITY;
        }
        let alphas = self.expand(&z[1..]);
        let m = self.c.matrix(&self.red.rows, z[0], &alphas, 0.0);
        match log_minor_sum(&m) {
            Some(logdet) => -z[0] - mu * (logdet + lb + b),
            None => f64::INFINITY,
        }
    }

    fn min_eig(&self, lambda: f64, free_vals: &[f64]) -> f64 {
        let alphas = self.expand(free_vals);
        min_eigenvalue(&self.c.matrix(&self.red.rows, lambda, &alphas, 0.0))
    }

    /// Finds multipliers making the reduced Gram matrix positive definite at
    /// a fixed `λ`.
    fn find_interior(&self, lambda: f64, start: Vec<f64>, budget: &mut usize) -> Option<Vec<f64>> {
        let t0 = (-self.min_eig(lambda, &start)).max(0.0) + 1.0;
        if self.red.rows.is_empty() {
            return Some(start);
        }
        let mut z = Vec::with_capacity(1 + start.len());
        z.push(t0);
        z.extend(start);
        let mut mu = self.opts.mu0;
        while mu >= self.opts.mu_min && *budget > 0 {
            let f = |v: &[f64]| self.phase1(lambda, mu, v);
            let cap = self.opts.inner_max_iter.min(*budget);
            let (zn, it) = bfgs(&f, z, cap, |v| v[0] < 0.0);
            *budget = budget.saturating_sub(it.max(1));
            z = zn;
            if z[0] < 0.0 {
                return Some(z[1..].to_vec());
            }
            mu *= self.opts.mu_factor;
        }
        None
    }
}

fn initial_alphas(problem: &GramProblem, free: &[usize], opts: &NlpOptions) -> Vec<f64> {
    free.iter()
        .map(|&k| match problem.subsets.get(k) {
            Some(s) if s.len() >= 2 => opts.alpha_init_multi,
            _ => opts.alpha_init_single,
        })
        .collect()
}

/// Solves the barrier program for one Gram problem.
pub fn solve_nlp(problem: &GramProblem, opts: &NlpOptions) -> Result<NlpSolution, NlpError> {
    let compiled = CompiledGram::new(problem)?;
    let red = reduce(&compiled);
    let n_alpha = problem.alphas.len();
    let fixed_count = red.fixed.iter().filter(|&&f| f).count();
    let dropped = compiled.size - red.rows.len();
    let finish = |mut s: NlpSolution| {
        s.dropped_rows = dropped;
        s.fixed_multipliers = fixed_count;
        s
    };
    if red.infeasible {
        return Ok(finish(NlpSolution::infeasible(n_alpha, 0)));
    }
    let barrier = Barrier::new(&compiled, &red, opts);
    let mut budget = opts.max_iter;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut lambda0 = opts.lambda0;
    let mut start = None;
    for attempt in 0..3 {
        let mut init = initial_alphas(problem, &barrier.free, opts);
        if attempt > 0 {
            for a in init.iter_mut() {
                *a *= 1.0 + 0.5 * rng.gen::<f64>();
            }
        }
        if let Some(a) = barrier.find_interior(lambda0, init, &mut budget) {
            start = Some(a);
            break;
        }
        lambda0 *= 0.1;
    }
    let Some(alpha_start) = start else {
        return Ok(finish(NlpSolution::infeasible(n_alpha, opts.max_iter - budget)));
    };

    let mut z = Vec::with_capacity(1 + alpha_start.len());
    z.push(lambda0);
    z.extend(alpha_start);
    let mut mu = opts.mu0;
    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxIter;
    let mut prev = f64::NAN;
    while budget > 0 {
        let f = |v: &[f64]| barrier.main(mu, v);
        let cap = opts.inner_max_iter.min(budget);
        let (zn, it) = bfgs(&f, z, cap, |_| false);
        budget = budget.saturating_sub(it.max(1));
        z = zn;
        trace.push(z[0]);
        if (z[0] - prev).abs() < opts.outer_tol || mu < opts.mu_min {
            status = SolveStatus::Converged;
            break;
        }
        prev = z[0];
        mu *= opts.mu_factor;
    }
    Ok(finish(NlpSolution {
        lambda: z[0],
        alphas: barrier.expand(&z[1..]),
        status,
        iterations: opts.max_iter - budget,
        objective_trace: trace,
        backoff_rounds: 0,
        min_eigenvalue: None,
        dropped_rows: 0,
        fixed_multipliers: 0,
    }))
}

/// Leading minors of the numeric Gram matrix at a decision vector `[λ, α…]`.
pub fn eval_minors(problem: &GramProblem, decision: &[f64]) -> Result<Vec<f64>, NlpError> {
    if decision.len() != problem.decision_len() {
        return Err(NlpError::DecisionLength { expected: problem.decision_len(), got: decision.len() });
    }
    Ok(leading_minors(&problem.eval_matrix(decision)))
}

/// Directional derivative of every leading minor along `direction`
/// (Jacobi's formula `d det A = det A · tr(A⁻¹ dA)`), for invertible minors.
pub fn minor_directional_derivatives(
    problem: &GramProblem,
    decision: &[f64],
    direction: &[f64],
) -> Result<Vec<f64>, NlpError> {
    for v in [decision, direction] {
        if v.len() != problem.decision_len() {
            return Err(NlpError::DecisionLength { expected: problem.decision_len(), got: v.len() });
        }
    }
    let values = problem.assignment(decision);
    let q = problem.eval_matrix(decision);
    let n = problem.size();
    let vars: Vec<VarId> = std::iter::once(problem.lambda).chain(problem.alphas.iter().copied()).collect();
    let mut dq = vec![vec![0.0; n]; n];
    for (i, row) in problem.gram.entries.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            dq[i][j] = vars
                .iter()
                .zip(direction)
                .filter(|(_, d)| **d != 0.0)
                .map(|(&v, d)| d * e.derivative(v).eval_dense(&values).expect("decision variables only"))
                .sum();
        }
    }
    let minors = leading_minors(&q);
    Ok((1..=n)
        .map(|k| {
            let a: Matrix = q[..k].iter().map(|r| r[..k].to_vec()).collect();
            let b: Matrix = dq[..k].iter().map(|r| r[..k].to_vec()).collect();
            match solve(&a, &b) {
                Some(x) => minors[k - 1] * (0..k).map(|i| x[i][i]).sum::<f64>(),
                None => f64::NAN,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PsdCheck {
    Certified { min_eigenvalue: f64 },
    Rejected { min_eigenvalue: f64 },
}

impl PsdCheck {
    pub fn is_certified(&self) -> bool {
        matches!(self, PsdCheck::Certified { .. })
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match *self {
            PsdCheck::Certified { min_eigenvalue } | PsdCheck::Rejected { min_eigenvalue } => min_eigenvalue,
        }
    }
}

/// Smallest eigenvalue of the full Gram matrix at the solution.
pub fn post_check_psd(problem: &GramProblem, solution: &NlpSolution, tol: f64) -> PsdCheck {
    psd_check_matrix(&problem.eval_matrix(&solution.decision()), tol)
}

pub fn psd_check_matrix(q: &[Vec<f64>], tol: f64) -> PsdCheck {
    let min_eigenvalue = min_eigenvalue(q);
    if min_eigenvalue >= -tol {
        PsdCheck::Certified { min_eigenvalue }
    } else {
        PsdCheck::Rejected { min_eigenvalue }
    }
}

/// Returns the solution once its Gram matrix passes the eigenvalue check,
/// shrinking `λ` and re-solving the multipliers with `λ` frozen otherwise.
pub fn certify_with_backoff(
    problem: &GramProblem,
    solution: &NlpSolution,
    opts: &NlpOptions,
) -> Result<NlpSolution, NlpError> {
    let mut sol = solution.clone();
    if sol.status == SolveStatus::Infeasible {
        return Ok(sol);
    }
    let first = post_check_psd(problem, &sol, opts.psd_tol);
    sol.min_eigenvalue = Some(first.min_eigenvalue());
    if first.is_certified() {
        return Ok(sol);
    }
    let compiled = CompiledGram::new(problem)?;
    let red = reduce(&compiled);
    let barrier = Barrier::new(&compiled, &red, opts);
    let mut budget = opts.max_iter;
    let mut lambda = sol.lambda;
    for round in 1..=opts.backoff_rounds {
        lambda *= opts.backoff_factor;
        let start: Vec<f64> = barrier
            .free
            .iter()
            .map(|&k| sol.alphas[k].clamp(1e-6 * opts.alpha_max, (1.0 - 1e-6) * opts.alpha_max))
            .collect();
        if red.infeasible {
            break;
        }
        if let Some(a) = barrier.find_interior(lambda, start, &mut budget) {
            let candidate = NlpSolution {
                lambda,
                alphas: barrier.expand(&a),
                backoff_rounds: round,
                ..sol.clone()
            };
            let check = post_check_psd(problem, &candidate, opts.psd_tol);
            if check.is_certified() {
                return Ok(NlpSolution { min_eigenvalue: Some(check.min_eigenvalue()), ..candidate });
            }
        }
    }
    let mut out = NlpSolution::infeasible(problem.alphas.len(), sol.iterations);
    out.backoff_rounds = opts.backoff_rounds;
    out.min_eigenvalue = sol.min_eigenvalue;
    Ok(out)
}
