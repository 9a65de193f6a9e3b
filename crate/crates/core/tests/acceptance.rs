//! One pass/fail line per acceptance criterion; exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use jte_core::config::{load_config, ProblemSpec};
use jte_core::kinematics::{lower_bound_poly, LowerBound, LowerBoundOptions, RobotModel, HalfPlaneConstraint, SMALL_ANGLE_LIMIT};
use jte_core::linalg::leading_minors;
use jte_core::nlp::{
    certify_with_backoff, eval_minors, post_check_psd, solve_nlp, NlpOptions, NlpSolution, SolveStatus,
};
use jte_core::pipeline::{run_pipeline, RunOptions, ToleranceReport};
use jte_core::poly::{Monomial, Polynomial, VarKind, VarTable};
use jte_core::sos::{GramDecomposition, GramProblem};
use jte_core::verify::{check_lower_bound, check_model, sample_check, SampleOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLES: usize = 10_000;
const ORACLE_SLACK: f64 = 1e-3;

struct Instance {
    file: String,
    spec: ProblemSpec,
    report: ToleranceReport,
}

struct Outcome {
    failures: usize,
}

impl Outcome {
    fn line(&mut self, id: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("criterion {id:>2} [{}] {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shipped() -> Vec<Instance> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(config_dir())
        .expect("configs directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .filter(|p| !p.file_stem().unwrap().to_string_lossy().ends_with("_robot"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|path| {
            let mut spec = load_config(&path).expect("shipped config loads");
            spec.verification.samples = SAMPLES;
            let report = run_pipeline(&spec, RunOptions::default()).report;
            Instance { file: path.file_stem().unwrap().to_string_lossy().into_owned(), spec, report }
        })
        .collect()
}

fn find<'a>(all: &'a [Instance], file: &str) -> &'a Instance {
    all.iter().find(|i| i.file == file).unwrap_or_else(|| panic!("missing config {file}"))
}

/// Largest `λ` for which the minimum of the model over a fine `y` grid stays
/// nonnegative (bisection).
fn model_root(lb: &LowerBound) -> f64 {
    let grid = 201;
    let min_over_cube = |lambda: f64| {
        let mut m = f64::INFINITY;
        for i in 0..grid {
            for j in 0..grid {
                let y = [-1.0 + 2.0 * i as f64 / (grid - 1) as f64, -1.0 + 2.0 * j as f64 / (grid - 1) as f64];
                m = m.min(lb.eval(&y, lambda));
            }
        }
        m
    };
    let (mut lo, mut hi) = (0.0, 0.5);
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if min_over_cube(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn planar_case(out: &mut Outcome, all: &[Instance], id: &str, file: &str, window: (f64, f64), runtime_cap: Option<f64>) {
    let inst = find(all, file);
    let c = &inst.report.constraints[0];
    let lb = lower_bound_poly(&inst.spec.constraints[0], &inst.spec.robot, &inst.spec.reference, &inst.spec.model)
        .unwrap();
    let root = model_root(&lb);
    let secs = c.seconds.unwrap_or(f64::NAN);
    let in_window = c.lambda >= window.0 && c.lambda <= window.1;
    let below_root = c.lambda <= root + 1e-6;
    let fast = runtime_cap.is_none_or(|cap| secs < cap);
    let oracle = c.oracle.map_or(f64::NAN, |o| o.lambda_hat);
    let timing = runtime_cap.map_or(String::new(), |cap| format!(", {secs:.3} s < {cap} s"));
    out.line(
        id,
        c.certified() && in_window && below_root && fast,
        format!(
            "{}: λ* = {:.6} in [{}, {}], model root {root:.6}, oracle {oracle:.6}{timing}",
            c.name, c.lambda, window.0, window.1
        ),
    );
}

fn soundness(out: &mut Outcome, all: &[Instance]) {
    let mut worst = 0;
    let mut count = 0;
    for inst in all {
        for (c, r) in inst.spec.constraints.iter().zip(&inst.report.constraints) {
            let opts = SampleOptions { samples: SAMPLES, seed: 11, corner_bias: 0.0 };
            let s = sample_check(std::slice::from_ref(c), &inst.spec.robot, &inst.spec.reference, r.lambda, &opts)
                .unwrap();
            worst = worst.max(s.violations);
            count += 1;
        }
    }
    out.line("4", worst == 0, format!("{count} constraint instances, max violations {worst} of {SAMPLES}"));
}

fn ordering(out: &mut Outcome, all: &[Instance]) {
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    for inst in all {
        for r in &inst.report.constraints {
            match r.oracle {
                Some(o) => {
                    worst = worst.max(r.lambda - o.hi);
                    ok &= r.lambda <= o.hi + ORACLE_SLACK;
                }
                None => ok = false,
            }
        }
    }
    out.line("5", ok, format!("max λ* − λ̂_hi = {worst:.3e} (allowed {ORACLE_SLACK:e})"));
}

fn spatial(out: &mut Outcome, all: &[Instance]) {
    let inst = find(all, "gp50_walls");
    let psd_tol = inst.spec.solver.psd_tol;
    let mut parts = Vec::new();
    let mut ok = inst.report.constraints.len() == 4 && inst.spec.cone_order == 2;
    for r in &inst.report.constraints {
        let hi = r.oracle.map_or(f64::NAN, |o| o.hi);
        let viol = r.verification.as_ref().map_or(usize::MAX, |v| v.violations);
        let psd = r.min_eigenvalue.is_some_and(|e| e >= -psd_tol);
        let secs = r.seconds.unwrap_or(f64::INFINITY);
        ok &= r.certified()
            && r.lambda > 0.005
            && psd
            && viol == 0
            && r.lambda <= hi
            && r.lambda < SMALL_ANGLE_LIMIT
            && secs < 120.0;
        parts.push(format!("{} {:.4} (hi {hi:.4}, {secs:.2} s)", r.name, r.lambda));
    }
    out.line("6", ok, format!("6-DOF: {}", parts.join(", ")));
}

fn random_planar(rng: &mut ChaCha8Rng, links: usize) -> (RobotModel, Vec<f64>, HalfPlaneConstraint) {
    let robot = RobotModel::planar((0..links).map(|_| rng.gen_range(0.5..1.5)).collect()).unwrap();
    let reference: Vec<f64> = (0..links).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let heading: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let normal = vec![heading.cos(), heading.sin()];
    let p = jte_core::kinematics::fk_position(&robot, &reference).unwrap();
    let offset = normal[0] * p[0] + normal[1] * p[1] + rng.gen_range(0.02..0.5);
    (robot, reference, HalfPlaneConstraint::new("c", normal, offset))
}

fn gram_identity(out: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let links = 1 + k % 3;
        let order = 1 + (k / 3) % (links + 1).min(3);
        let (robot, reference, c) = random_planar(&mut rng, links);
        let lb = lower_bound_poly(&c, &robot, &reference, &LowerBoundOptions::default()).unwrap();
        let mut prob = GramProblem::from_lower_bound(&lb, order).unwrap();
        worst = worst.max((&prob.gram.reconstruct() - &prob.p0).max_abs_coeff());
        prob.prune();
        worst = worst.max((&prob.gram.reconstruct() - &prob.p0).max_abs_coeff());
    }
    out.line("7", worst <= 1e-12, format!("50 instances, max |Yᵀ Q Y − p0| coefficient {worst:.2e} ≤ 1e-12"));
}

fn cofactor_det(a: &[Vec<f64>]) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    (0..a.len())
        .map(|c| {
            let minor: Vec<Vec<f64>> = a[1..]
                .iter()
                .map(|r| r.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, v)| *v).collect())
                .collect();
            let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
            sign * a[0][c] * cofactor_det(&minor)
        })
        .sum()
}

/// Gram problem whose entries are `c + r·α + s·λ` with random coefficients.
fn affine_problem(rng: &mut ChaCha8Rng, n: usize) -> (GramProblem, Vec<Vec<[f64; 3]>>) {
    let mut vars = VarTable::new();
    let y = vars.add("y1", VarKind::Deviation).unwrap();
    let lambda = vars.add("lambda", VarKind::Tolerance).unwrap();
    let alpha = vars.add("alpha_1", VarKind::Multiplier).unwrap();
    let mut coef = vec![vec![[0.0; 3]; n]; n];
    let mut entries = vec![vec![Polynomial::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let c = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let e = Polynomial::from_terms([
                (Monomial::one(), c[0]),
                (Monomial::var(alpha), c[1]),
                (Monomial::var(lambda), c[2]),
            ]);
            coef[i][j] = c;
            coef[j][i] = c;
            entries[i][j] = e.clone();
            entries[j][i] = e;
        }
    }
    let basis = (0..n as u32).map(|k| Monomial::pow(y, k)).collect();
    let gram = GramDecomposition { basis, entries };
    let prob = GramProblem {
        p0: gram.reconstruct(),
        vars,
        y: vec![y],
        lambda,
        alphas: vec![alpha],
        subsets: vec![vec![]],
        gram,
    };
    (prob, coef)
}

fn minor_equivalence(out: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for n in 1..=6 {
        for _ in 0..30 {
            let (prob, coef) = affine_problem(&mut rng, n);
            let lambda: f64 = rng.gen_range(0.0..0.3);
            let alpha: f64 = rng.gen_range(0.0..2.0);
            let q: Vec<Vec<f64>> = coef
                .iter()
                .map(|row| row.iter().map(|c| c[0] + c[1] * alpha + c[2] * lambda).collect())
                .collect();
            let minors = eval_minors(&prob, &[lambda, alpha]).unwrap();
            for k in 1..=n {
                let sub: Vec<Vec<f64>> = q[..k].iter().map(|r| r[..k].to_vec()).collect();
                let want = cofactor_det(&sub);
                worst = worst.max((minors[k - 1] - want).abs() / want.abs());
                checked += 1;
            }
        }
    }
    out.line("8", worst <= 1e-9, format!("{checked} minors up to 6×6, max relative error {worst:.2e} ≤ 1e-9"));
}

fn psd_counterexample(out: &mut Outcome, all: &[Instance]) {
    let mut vars = VarTable::new();
    let y = vars.add("y1", VarKind::Deviation).unwrap();
    let lambda = vars.add("lambda", VarKind::Tolerance).unwrap();
    let entries = vec![
        vec![Polynomial::zero(), Polynomial::zero()],
        vec![Polynomial::zero(), Polynomial::constant(-1.0)],
    ];
    let gram = GramDecomposition { basis: vec![Monomial::one(), Monomial::var(y)], entries };
    let prob = GramProblem { p0: gram.reconstruct(), vars, y: vec![y], lambda, alphas: vec![], subsets: vec![], gram };
    let minors = leading_minors(&[vec![0.0, 0.0], vec![0.0, -1.0]]);
    let minors_ok = minors.iter().all(|&d| d >= 0.0);
    let claimed = NlpSolution {
        lambda: 0.05,
        alphas: vec![],
        status: SolveStatus::Converged,
        iterations: 1,
        objective_trace: vec![],
        backoff_rounds: 0,
        min_eigenvalue: None,
        dropped_rows: 0,
        fixed_multipliers: 0,
    };
    let opts = NlpOptions::default();
    let rejected = !post_check_psd(&prob, &claimed, opts.psd_tol).is_certified();
    let backed = certify_with_backoff(&prob, &claimed, &opts).unwrap();
    let mut never_rejected = backed.status == SolveStatus::Infeasible && backed.lambda == 0.0;

    // every shipped problem, re-solved and checked with an independent eigen solver
    let mut checked = 0;
    for inst in all {
        for c in &inst.spec.constraints {
            let lb = lower_bound_poly(c, &inst.spec.robot, &inst.spec.reference, &inst.spec.model).unwrap();
            let mut p = GramProblem::from_lower_bound(&lb, inst.spec.cone_order).unwrap();
            p.prune();
            let sol = solve_nlp(&p, &inst.spec.solver).unwrap();
            let sol = certify_with_backoff(&p, &sol, &inst.spec.solver).unwrap();
            if sol.status != SolveStatus::Infeasible {
                let q = p.eval_matrix(&sol.decision());
                let n = q.len();
                let min = nalgebra::DMatrix::from_fn(n, n, |i, j| q[i][j]).symmetric_eigenvalues().min();
                never_rejected &= min >= -inst.spec.solver.psd_tol;
            }
            checked += 1;
        }
    }
    out.line(
        "9",
        minors_ok && rejected && never_rejected,
        format!(
            "minors {minors:?} ≥ 0 yet rejected: {rejected}; backoff result {:?} λ = {}; {checked} shipped certificates semidefinite: {never_rejected}",
            backed.status, backed.lambda
        ),
    );
}

/// `g` with the sign of its `y1·λ` coefficient flipped.
fn mutate(lb: &LowerBound) -> LowerBound {
    let target = Monomial::from_powers([(lb.y[0], 1), (lb.lambda, 1)]);
    let c = lb.poly.coeff(&target);
    assert!(c != 0.0, "model has a linear term to flip");
    let mut m = lb.clone();
    m.poly.add_term(target, -2.0 * c);
    m
}

fn lower_bound_suite(out: &mut Outcome, all: &[Instance]) {
    let opts = SampleOptions { samples: SAMPLES, seed: 3, corner_bias: 0.0 };
    let mut worst = f64::NEG_INFINITY;
    let mut worst_name = String::new();
    for inst in all {
        for (c, r) in inst.spec.constraints.iter().zip(&inst.report.constraints) {
            let gap = check_lower_bound(c, &inst.spec.robot, &inst.spec.reference, r.lambda, &opts, &inst.spec.model)
                .unwrap();
            if gap > worst {
                worst = gap;
                worst_name = format!("{}/{}", inst.file, c.name);
            }
        }
    }
    let inst = find(all, "planar2_xwall");
    let c = &inst.spec.constraints[0];
    let lb = lower_bound_poly(c, &inst.spec.robot, &inst.spec.reference, &inst.spec.model).unwrap();
    let mutated = mutate(&lb);
    let mutant_gap =
        check_model(&mutated, c, &inst.spec.robot, &inst.spec.reference, inst.report.constraints[0].lambda, &opts)
            .unwrap();
    let detected = mutant_gap > 0.0;
    out.line(
        "10",
        worst <= 0.0 && detected,
        format!(
            "max g − f = {worst:.3e} at {worst_name} (required ≤ 0); sign-flipped mutant gap {mutant_gap:.3e}, detected: {detected}"
        ),
    );
}

fn combiner(out: &mut Outcome, all: &[Instance]) {
    let mut parts = Vec::new();
    let mut ok = true;
    for inst in all {
        let lambdas: Vec<f64> = inst.report.constraints.iter().map(|r| r.lambda).collect();
        let min = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
        let opts = SampleOptions { samples: SAMPLES, seed: 5, corner_bias: 0.0 };
        let s = sample_check(&inst.spec.constraints, &inst.spec.robot, &inst.spec.reference, inst.report.lambda_min, &opts)
            .unwrap();
        ok &= inst.report.lambda_min == min && s.violations == 0;
        if inst.spec.constraints.len() > 1 {
            parts.push(format!("{} λ_min {:.4}: {} violations", inst.file, inst.report.lambda_min, s.violations));
        }
    }
    out.line("11", ok, format!("all constraints active at λ_min; {}", parts.join("; ")));
}

fn main() {
    let start = Instant::now();
    let all = shipped();
    let mut out = Outcome { failures: 0 };
    planar_case(&mut out, &all, "1", "planar2_xwall", (0.060, 0.0682), Some(5.0));
    planar_case(&mut out, &all, "2", "planar2_ywall", (0.033, 0.0373), None);
    planar_case(&mut out, &all, "3", "planar2_general", (0.10, 0.120), None);
    soundness(&mut out, &all);
    ordering(&mut out, &all);
    spatial(&mut out, &all);
    gram_identity(&mut out);
    minor_equivalence(&mut out);
    psd_counterexample(&mut out, &all);
    lower_bound_suite(&mut out, &all);
    combiner(&mut out, &all);
    println!(
        "acceptance: {} of 11 criteria passed ({:.1} s)",
        11 - out.failures,
        start.elapsed().as_secs_f64()
    );
    if out.failures > 0 {
        std::process::exit(1);
    }
}
