//! End-to-end run over every constraint of a problem.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::ProblemSpec;
use crate::kinematics::{eval_constraint, lower_bound_poly, HalfPlaneConstraint, SMALL_ANGLE_LIMIT};
use crate::nlp::{certify_with_backoff, solve_nlp, SolveStatus};
use crate::par::par_map;
use crate::sos::{assemble_p0, build_gram, build_refute_generators, enumerate_cone_terms, GramProblem};
use crate::verify::{
    check_model, combine_constraints, oracle_lambda, sample_check, OracleEstimate, OracleOptions, SampleOptions,
    SampleReport,
};

/// Slack allowed when comparing a certified bound with the oracle bracket.
pub const ORACLE_SLACK: f64 = 1e-3;
/// Largest `g − f` treated as rounding noise.
pub const MODEL_GAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Record one line per pipeline stage.
    pub trace: bool,
    /// Leave wall-clock fields empty so reports are reproducible.
    pub omit_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResult {
    pub name: String,
    /// True clearance at the reference pose.
    pub reference_clearance: f64,
    /// Certified tolerance (0 when nothing could be certified).
    pub lambda: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub backoff_rounds: usize,
    pub min_eigenvalue: Option<f64>,
    pub gram_size: usize,
    pub active_rows: usize,
    pub multipliers: usize,
    pub fixed_multipliers: usize,
    pub bounded_terms: usize,
    pub seconds: Option<f64>,
    pub verification: Option<SampleReport>,
    pub oracle: Option<OracleEstimate>,
    /// Largest sampled `g − f` over the certified box.
    pub model_gap: Option<f64>,
    pub error: Option<String>,
}

impl ConstraintResult {
    pub fn certified(&self) -> bool {
        self.error.is_none() && self.status != SolveStatus::Infeasible && self.lambda > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceReport {
    pub name: String,
    pub dof: usize,
    pub cone_order: usize,
    pub reference: Vec<f64>,
    pub constraints: Vec<ConstraintResult>,
    /// Tolerance valid for all constraints together.
    pub lambda_min: f64,
    /// Sampling check of all constraints at `lambda_min`.
    pub combined: Option<SampleReport>,
    pub warnings: Vec<String>,
    pub seconds: Option<f64>,
}

impl ToleranceReport {
    /// 3 when no constraint was certified, 2 with warnings, 0 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.constraints.iter().all(|c| !c.certified()) {
            3
        } else if !self.warnings.is_empty() {
            2
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub report: ToleranceReport,
    pub trace: Vec<String>,
}

struct Solved {
    result: ConstraintResult,
    trace: Vec<String>,
}

fn failed(c: &HalfPlaneConstraint, f_ref: f64, message: String) -> ConstraintResult {
    ConstraintResult {
        name: c.name.clone(),
        reference_clearance: f_ref,
        lambda: 0.0,
        status: SolveStatus::Infeasible,
        iterations: 0,
        backoff_rounds: 0,
        min_eigenvalue: None,
        gram_size: 0,
        active_rows: 0,
        multipliers: 0,
        fixed_multipliers: 0,
        bounded_terms: 0,
        seconds: None,
        verification: None,
        oracle: None,
        model_gap: None,
        error: Some(message),
    }
}

fn solve_one(spec: &ProblemSpec, c: &HalfPlaneConstraint, opts: RunOptions) -> Solved {
    let mut trace = Vec::new();
    let mut log = |line: String| {
        if opts.trace {
            trace.push(format!("[{}] {line}", c.name));
        }
    };
    let f_ref = eval_constraint(c, &spec.robot, &spec.reference).unwrap_or(f64::NAN);
    let start = Instant::now();

    let certified = (|| -> Result<_, String> {
        let lb = lower_bound_poly(c, &spec.robot, &spec.reference, &spec.model).map_err(|e| e.to_string())?;
        log(format!(
            "lower_bound_poly: {} terms, {} high-degree terms bounded",
            lb.poly.len(),
            lb.bounded_terms
        ));
        let gens = build_refute_generators(&lb.poly, &lb.y);
        log(format!("build_refute_generators: {} generators", gens.gammas.len()));
        let mut vars = lb.vars.clone();
        let terms = enumerate_cone_terms(&gens, spec.cone_order, &mut vars).map_err(|e| e.to_string())?;
        log(format!("enumerate_cone_terms: {} products up to order {}", terms.len(), spec.cone_order));
        let p0 = assemble_p0(&terms).map_err(|e| e.to_string())?;
        log(format!("assemble_p0: {} terms", p0.len()));
        let gram = build_gram(&p0, &lb.y).map_err(|e| e.to_string())?;
        log(format!("build_gram: basis of {} monomials", gram.basis.len()));
        let mut problem = GramProblem {
            vars,
            y: lb.y.clone(),
            lambda: lb.lambda,
            alphas: terms.iter().map(|t| t.alpha).collect(),
            subsets: terms.into_iter().map(|t| t.subset).collect(),
            p0,
            gram,
        };
        let pruned = problem.prune();
        log(format!(
            "prune: {} multipliers fixed, {} rows zero, {} entries relocated{}",
            pruned.fixed.len(),
            pruned.zero_rows.len(),
            pruned.relocated,
            if pruned.infeasible { ", infeasible" } else { "" }
        ));
        let solution = solve_nlp(&problem, &spec.solver).map_err(|e| e.to_string())?;
        log(format!(
            "solve_nlp: {:?} after {} iterations, lambda = {:.6}",
            solution.status, solution.iterations, solution.lambda
        ));
        let checked = certify_with_backoff(&problem, &solution, &spec.solver).map_err(|e| e.to_string())?;
        log(format!(
            "certify_with_backoff: lambda = {:.6}, min eigenvalue {}, {} backoff rounds",
            checked.lambda,
            checked.min_eigenvalue.map_or("n/a".into(), |v| format!("{v:.3e}")),
            checked.backoff_rounds
        ));
        Ok((lb, problem, checked))
    })();
    let seconds = (!opts.omit_timing).then(|| start.elapsed().as_secs_f64());

    let (lb, problem, sol) = match certified {
        Ok(v) => v,
        Err(e) => {
            log(format!("error: {e}"));
            let mut result = failed(c, f_ref, e);
            result.seconds = seconds;
            return Solved { result, trace };
        }
    };
    let mut result = ConstraintResult {
        name: c.name.clone(),
        reference_clearance: f_ref,
        lambda: sol.lambda,
        status: sol.status,
        iterations: sol.iterations,
        backoff_rounds: sol.backoff_rounds,
        min_eigenvalue: sol.min_eigenvalue,
        gram_size: problem.size(),
        active_rows: problem.size() - sol.dropped_rows,
        multipliers: problem.alphas.len(),
        fixed_multipliers: sol.fixed_multipliers,
        bounded_terms: lb.bounded_terms,
        seconds,
        verification: None,
        oracle: None,
        model_gap: None,
        error: None,
    };

    let v = &spec.verification;
    let sampling = SampleOptions { samples: v.samples, seed: v.seed, corner_bias: v.corner_bias };
    if v.samples > 0 {
        match sample_check(std::slice::from_ref(c), &spec.robot, &spec.reference, sol.lambda, &sampling) {
            Ok(r) => {
                log(format!("sample_check: {} of {} samples violate", r.violations, r.samples));
                result.verification = Some(r);
            }
            Err(e) => log(format!("sample_check: {e}")),
        }
        if v.lower_bound_check {
            match check_model(&lb, c, &spec.robot, &spec.reference, sol.lambda, &sampling) {
                Ok(gap) => {
                    log(format!("check_lower_bound: max g - f = {gap:.3e}"));
                    result.model_gap = Some(gap);
                }
                Err(e) => log(format!("check_lower_bound: {e}")),
            }
        }
    }
    if v.oracle {
        let oo = OracleOptions { grid_per_axis: v.grid_per_axis, tol: v.oracle_tol, lambda_max: v.lambda_max };
        match oracle_lambda(c, &spec.robot, &spec.reference, &oo) {
            Ok(o) => {
                log(format!("oracle_lambda: {:.6} in [{:.6}, {:.6}]", o.lambda_hat, o.lo, o.hi));
                result.oracle = Some(o);
            }
            Err(e) => log(format!("oracle_lambda: {e}")),
        }
    }
    Solved { result, trace }
}

fn warnings_for(r: &ConstraintResult) -> Vec<String> {
    let mut w = Vec::new();
    let name = &r.name;
    if let Some(e) = &r.error {
        w.push(format!("{name}: {e}"));
        return w;
    }
    match r.status {
        SolveStatus::Infeasible => w.push(format!("{name}: no certificate found, contributes lambda = 0")),
        SolveStatus::MaxIter => w.push(format!("{name}: iteration limit reached before convergence")),
        SolveStatus::Converged => {}
    }
    if r.backoff_rounds > 0 && r.status != SolveStatus::Infeasible {
        w.push(format!("{name}: semidefinite check needed {} backoff round(s)", r.backoff_rounds));
    }
    if r.lambda >= SMALL_ANGLE_LIMIT {
        w.push(format!(
            "{name}: lambda = {:.4} rad is outside the small-angle range (< {SMALL_ANGLE_LIMIT})",
            r.lambda
        ));
    }
    if let Some(gap) = r.model_gap {
        if gap > MODEL_GAP_TOL {
            w.push(format!("{name}: model exceeds the true clearance by up to {gap:.3e} m"));
        }
    }
    if let Some(s) = &r.verification {
        if s.violations > 0 {
            w.push(format!("{name}: {} of {} samples violate the constraint", s.violations, s.samples));
        }
    }
    if let Some(o) = &r.oracle {
        if r.lambda > o.hi + ORACLE_SLACK {
            w.push(format!("{name}: lambda = {:.6} exceeds the grid upper bound {:.6}", r.lambda, o.hi));
        }
    }
    w
}

/// Certifies every constraint (in parallel), verifies each bound and
/// combines them.
pub fn run_pipeline(spec: &ProblemSpec, opts: RunOptions) -> PipelineOutput {
    let start = Instant::now();
    let solved = par_map(spec.constraints.len(), |i| solve_one(spec, &spec.constraints[i], opts));
    let mut trace = Vec::new();
    let mut constraints = Vec::with_capacity(solved.len());
    for s in solved {
        trace.extend(s.trace);
        constraints.push(s.result);
    }
    let mut warnings: Vec<String> = constraints.iter().flat_map(warnings_for).collect();

    let bounds: Vec<f64> = constraints.iter().map(|c| c.lambda).collect();
    let lambda_min = match combine_constraints(&bounds) {
        Ok(l) => l,
        Err(e) => {
            warnings.push(format!("combine_constraints: {e}"));
            0.0
        }
    };
    if opts.trace {
        trace.push(format!("combine_constraints: lambda_min = {lambda_min:.6}"));
    }
    let v = &spec.verification;
    let combined = if v.samples > 0 {
        let sampling = SampleOptions { samples: v.samples, seed: v.seed, corner_bias: v.corner_bias };
        match sample_check(&spec.constraints, &spec.robot, &spec.reference, lambda_min, &sampling) {
            Ok(r) => {
                if r.violations > 0 {
                    warnings.push(format!(
                        "combined: {} of {} samples violate some constraint",
                        r.violations, r.samples
                    ));
                }
                if opts.trace {
                    trace.push(format!("sample_check (all constraints): {} violations", r.violations));
                }
                Some(r)
            }
            Err(e) => {
                warnings.push(format!("combined: {e}"));
                None
            }
        }
    } else {
        None
    };
    let report = ToleranceReport {
        name: spec.name.clone(),
        dof: spec.robot.dof(),
        cone_order: spec.cone_order,
        reference: spec.reference.clone(),
        constraints,
        lambda_min,
        combined,
        warnings,
        seconds: (!opts.omit_timing).then(|| start.elapsed().as_secs_f64()),
    };
    PipelineOutput { report, trace }
}
