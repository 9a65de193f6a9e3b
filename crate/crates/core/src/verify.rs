//! Sampling checks, a grid-bisection estimate of the true tolerance, the
//! empirical model-versus-constraint check, and the multi-constraint combiner.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::par_map;
use crate::kinematics::{
    eval_constraint, lower_bound_poly, HalfPlaneConstraint, KinematicsError, LowerBound, LowerBoundOptions,
    RobotModel, SMALL_ANGLE_LIMIT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("reference configuration violates constraint `{name}` (f = {value})")]
    InfeasibleReference { name: String, value: f64 },
    #[error("no constraint bounds to combine")]
    Empty,
    #[error("invalid tolerance bound {0}")]
    InvalidBound(f64),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleOptions {
    pub samples: usize,
    pub seed: u64,
    /// Probability that a draw is snapped to the nearest hypercube corner.
    pub corner_bias: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { samples: 10_000, seed: 0, corner_bias: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub samples: usize,
    pub violations: usize,
    pub min_f: f64,
    pub argmin: Vec<f64>,
    pub seed: u64,
}

/// Configurations drawn uniformly from `‖x − x^r‖∞ <= λ`.
pub fn draw_samples(xr: &[f64], lambda: f64, opts: &SampleOptions) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    (0..opts.samples)
        .map(|_| {
            let mut u: Vec<f64> = xr.iter().map(|_| rng.gen_range(-1.0..=1.0)).collect();
            if opts.corner_bias > 0.0 && rng.gen::<f64>() < opts.corner_bias {
                for v in u.iter_mut() {
                    *v = if *v < 0.0 { -1.0 } else { 1.0 };
                }
            }
            xr.iter().zip(&u).map(|(x, d)| x + lambda * d).collect()
        })
        .collect()
}

/// Smallest clearance over all constraints at each configuration.
pub fn min_clearances(
    constraints: &[HalfPlaneConstraint],
    robot: &RobotModel,
    configs: &[Vec<f64>],
) -> Result<Vec<f64>, VerifyError> {
    par_map(configs.len(), |i| {
        constraints
            .iter()
            .map(|c| eval_constraint(c, robot, &configs[i]))
            .try_fold(f64::INFINITY, |m, f| f.map(|v| m.min(v)))
    })
    .into_iter()
    .map(|r| r.map_err(VerifyError::from))
    .collect()
}

/// Counts configurations in the tolerance box where any constraint is
/// violated.
pub fn sample_check(
    constraints: &[HalfPlaneConstraint],
    robot: &RobotModel,
    xr: &[f64],
    lambda: f64,
    opts: &SampleOptions,
) -> Result<SampleReport, VerifyError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(VerifyError::InvalidBound(lambda));
    }
    let configs = draw_samples(xr, lambda, opts);
    let f = min_clearances(constraints, robot, &configs)?;
    Ok(summarize(&configs, &f, opts.seed))
}

pub fn summarize(configs: &[Vec<f64>], f: &[f64], seed: u64) -> SampleReport {
    let violations = f.iter().filter(|&&v| v < 0.0).count();
    let (idx, min_f) = f
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    SampleReport {
        samples: configs.len(),
        violations,
        min_f,
        argmin: configs.get(idx).cloned().unwrap_or_default(),
        seed,
    }
}

/// Per-sample CSV: `sample_id, x_1 … x_n, f_min_over_constraints`.
pub fn write_samples_csv<W: Write>(mut out: W, configs: &[Vec<f64>], f: &[f64]) -> std::io::Result<()> {
    let n = configs.first().map_or(0, |c| c.len());
    let mut header = vec!["sample_id".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.push("f_min_over_constraints".to_string());
    writeln!(out, "{}", header.join(","))?;
    for (i, (x, v)) in configs.iter().zip(f).enumerate() {
        write!(out, "{i}")?;
        for xi in x {
            write!(out, ",{xi:?}")?;
        }
        writeln!(out, ",{v:?}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleOptions {
    /// Points per joint axis; `None` picks a size from the joint count.
    pub grid_per_axis: Option<usize>,
    pub tol: f64,
    pub lambda_max: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { grid_per_axis: None, tol: 1e-6, lambda_max: SMALL_ANGLE_LIMIT }
    }
}

/// `max(3, min(101, ⌊200000^(1/n)⌋))` points per axis.
pub fn default_grid(dof: usize) -> usize {
    let per = (200_000f64).powf(1.0 / dof.max(1) as f64).floor() as usize;
    per.clamp(3, 101)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub lambda_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub grid_per_axis: usize,
}

/// Minimum true clearance over a regular grid on the box of half-width
/// `lambda` (corners included).
pub fn grid_min(
    c: &HalfPlaneConstraint,
    robot: &RobotModel,
    xr: &[f64],
    lambda: f64,
    grid: usize,
) -> Result<f64, VerifyError> {
    let n = xr.len();
    let grid = grid.max(2);
    let total = grid.checked_pow(n as u32).expect("grid size overflow");
    let step = 2.0 / (grid - 1) as f64;
    let vals = par_map(total, |mut idx| {
        let mut x = xr.to_vec();
        for xi in x.iter_mut() {
            let k = idx % grid;
            idx /= grid;
            let u = if k == grid - 1 { 1.0 } else { -1.0 + k as f64 * step };
            *xi += lambda * u;
        }
        eval_constraint(c, robot, &x)
    });
    vals.into_iter()
        .try_fold(f64::INFINITY, |m, v| v.map(|f| m.min(f)))
        .map_err(VerifyError::from)
}

/// Bisection on `λ` using [`grid_min`] as the feasibility test. `hi` is a
/// true upper bound on the tolerance whenever it is below `lambda_max`,
/// because an infeasible grid point is a genuine violation.
pub fn oracle_lambda(
    c: &HalfPlaneConstraint,
    robot: &RobotModel,
    xr: &[f64],
    opts: &OracleOptions,
) -> Result<OracleEstimate, VerifyError> {
    let f0 = eval_constraint(c, robot, xr)?;
    if !(f0 > 0.0) {
        return Err(VerifyError::InfeasibleReference { name: c.name.clone(), value: f0 });
    }
    let grid = opts.grid_per_axis.unwrap_or_else(|| default_grid(xr.len()));
    let feasible = |l: f64| grid_min(c, robot, xr, l, grid).map(|m| m >= 0.0);
    if feasible(opts.lambda_max)? {
        return Ok(OracleEstimate { lambda_hat: opts.lambda_max, lo: opts.lambda_max, hi: opts.lambda_max, grid_per_axis: grid });
    }
    let (mut lo, mut hi) = (0.0, opts.lambda_max);
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(OracleEstimate { lambda_hat: 0.5 * (lo + hi), lo, hi, grid_per_axis: grid })
}

/// Largest `g − f` over random `(y, λ')` with `‖y‖∞ <= 1`, `λ' ∈ [0, λ]`.
/// A nonpositive result means the model stayed below the true clearance.
pub fn check_lower_bound(
    c: &HalfPlaneConstraint,
    robot: &RobotModel,
    xr: &[f64],
    lambda: f64,
    opts: &SampleOptions,
    model: &LowerBoundOptions,
) -> Result<f64, VerifyError> {
    let lb = lower_bound_poly(c, robot, xr, model)?;
    check_model(&lb, c, robot, xr, lambda, opts)
}

/// [`check_lower_bound`] for a given model polynomial.
pub fn check_model(
    lb: &LowerBound,
    c: &HalfPlaneConstraint,
    robot: &RobotModel,
    xr: &[f64],
    lambda: f64,
    opts: &SampleOptions,
) -> Result<f64, VerifyError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(VerifyError::InvalidBound(lambda));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let draws: Vec<(Vec<f64>, f64)> = (0..opts.samples)
        .map(|_| {
            let y: Vec<f64> = xr.iter().map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let l = rng.gen_range(0.0..=lambda);
            (y, l)
        })
        .collect();
    let gaps = par_map(draws.len(), |i| {
        let (y, l) = &draws[i];
        let x: Vec<f64> = xr.iter().zip(y).map(|(r, d)| r + l * d).collect();
        eval_constraint(c, robot, &x).map(|f| lb.eval(y, *l) - f)
    });
    gaps.into_iter()
        .try_fold(f64::NEG_INFINITY, |m, v| v.map(|d| m.max(d)))
        .map_err(VerifyError::from)
}

/// The smallest per-constraint bound is a bound for all constraints at once.
pub fn combine_constraints(bounds: &[f64]) -> Result<f64, VerifyError> {
    if bounds.is_empty() {
        return Err(VerifyError::Empty);
    }
    let mut out = f64::INFINITY;
    for &b in bounds {
        if !(b >= 0.0) || !b.is_finite() {
            return Err(VerifyError::InvalidBound(b));
        }
        out = out.min(b);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Monomial;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_6};

    const XR: [f64; 2] = [FRAC_PI_3, FRAC_PI_6];

    fn arm() -> RobotModel {
        RobotModel::planar(vec![1.0, 1.0]).unwrap()
    }

    fn xwall() -> HalfPlaneConstraint {
        HalfPlaneConstraint::new("x", vec![1.0, 0.0], 1.456)
    }

    #[test]
    fn zero_tolerance_samples_reference() {
        let r = sample_check(&[xwall()], &arm(), &XR, 0.0, &SampleOptions { samples: 50, ..Default::default() }).unwrap();
        assert_eq!(r.violations, 0);
        assert_eq!(r.min_f, eval_constraint(&xwall(), &arm(), &XR).unwrap());
        assert_eq!(r.argmin, XR.to_vec());
    }

    #[test]
    fn corner_bias_finds_violations_beyond_tolerance() {
        // f(x^r + 0.1·(−1, −1)) < 0 directly
        let corner = [XR[0] - 0.1, XR[1] - 0.1];
        assert!(eval_constraint(&xwall(), &arm(), &corner).unwrap() < 0.0);
        let opts = SampleOptions { samples: 2000, seed: 1, corner_bias: 0.5 };
        let r = sample_check(&[xwall()], &arm(), &XR, 0.10, &opts).unwrap();
        assert!(r.violations > 0);
        assert!(r.min_f < 0.0);
        let f = eval_constraint(&xwall(), &arm(), &r.argmin).unwrap();
        assert_eq!(f, r.min_f);
    }

    #[test]
    fn sampling_is_reproducible() {
        let opts = SampleOptions { samples: 500, seed: 9, corner_bias: 0.0 };
        let a = sample_check(&[xwall()], &arm(), &XR, 0.05, &opts).unwrap();
        let b = sample_check(&[xwall()], &arm(), &XR, 0.05, &opts).unwrap();
        assert_eq!(a, b);
    }

    fn bisect_root(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn oracle_brackets_planar_roots() {
        let est = oracle_lambda(&xwall(), &arm(), &XR, &OracleOptions::default()).unwrap();
        let root = bisect_root(|l| 1.456 - (FRAC_PI_3 - l).cos() - (FRAC_PI_6 - l).cos(), 0.0, 0.2);
        assert!(est.lo <= est.lambda_hat && est.lambda_hat <= est.hi);
        assert!(est.hi - est.lo <= 1e-6);
        assert!(est.lambda_hat >= 0.066 && est.lambda_hat <= 0.069);
        assert!((est.lambda_hat - root).abs() < 2e-6);
        assert_eq!(est.grid_per_axis, 101);

        let plane = HalfPlaneConstraint::new("g", vec![1.0, 1.0], 2.8);
        let est = oracle_lambda(&plane, &arm(), &XR, &OracleOptions::default()).unwrap();
        let root = bisect_root(
            |l| 2.8 - (FRAC_PI_3 - l).cos() - (FRAC_PI_6 + l).cos() - (FRAC_PI_3 - l).sin() - (FRAC_PI_6 + l).sin(),
            0.0,
            0.3,
        );
        assert!((est.lambda_hat - root).abs() < 2e-6);
        assert!(est.lambda_hat > 0.119 && est.lambda_hat < 0.120);
    }

    #[test]
    fn oracle_caps_inactive_constraints() {
        let far = HalfPlaneConstraint::new("far", vec![1.0, 0.0], 1.36603 + 10.0);
        let opts = OracleOptions { lambda_max: 0.2, ..Default::default() };
        let est = oracle_lambda(&far, &arm(), &XR, &opts).unwrap();
        assert_eq!(est.lambda_hat, 0.2);
        let bad = HalfPlaneConstraint::new("bad", vec![1.0, 0.0], 1.0);
        assert!(matches!(
            oracle_lambda(&bad, &arm(), &XR, &opts),
            Err(VerifyError::InfeasibleReference { .. })
        ));
    }

    #[test]
    fn grid_feasibility_is_monotone() {
        for c in [xwall(), HalfPlaneConstraint::new("g", vec![1.0, 1.0], 2.8)] {
            let mut prev = f64::INFINITY;
            for k in 0..40 {
                let m = grid_min(&c, &arm(), &XR, k as f64 * 0.005, 21).unwrap();
                assert!(m <= prev + 1e-15);
                prev = m;
            }
        }
    }

    #[test]
    fn model_gap_vanishes_at_zero_tolerance() {
        let opts = SampleOptions { samples: 200, ..Default::default() };
        let gap = check_lower_bound(&xwall(), &arm(), &XR, 0.0, &opts, &LowerBoundOptions::default()).unwrap();
        assert!(gap.abs() <= 1e-15);
    }

    #[test]
    fn corrupted_model_is_flagged() {
        let mut lb = lower_bound_poly(&xwall(), &arm(), &XR, &LowerBoundOptions::default()).unwrap();
        // flipping a quadratic term here only lowers g, so flip the linear one
        let lin = Monomial::from_powers([(lb.y[0], 1), (lb.lambda, 1)]);
        let c = lb.poly.coeff(&lin);
        lb.poly.add_term(lin, -2.0 * c);
        let opts = SampleOptions::default();
        let honest = check_lower_bound(&xwall(), &arm(), &XR, 0.067, &opts, &LowerBoundOptions::default()).unwrap();
        let corrupted = check_model(&lb, &xwall(), &arm(), &XR, 0.067, &opts).unwrap();
        assert!(corrupted > 0.0);
        assert!(corrupted > honest);
    }

    #[test]
    fn combiner_examples() {
        assert_eq!(combine_constraints(&[0.0346, 0.0265, 0.035, 0.0302]).unwrap(), 0.0265);
        assert_eq!(combine_constraints(&[0.07]).unwrap(), 0.07);
        assert_eq!(combine_constraints(&[0.1, 0.1, 0.1]).unwrap(), 0.1);
        assert_eq!(combine_constraints(&[]), Err(VerifyError::Empty));
        assert!(combine_constraints(&[0.1, -0.1]).is_err());
    }

    #[test]
    fn csv_layout() {
        let configs = vec![vec![0.5, 0.25], vec![1.0, -1.0]];
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &configs, &[0.125, -0.5]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "sample_id,x_1,x_2,f_min_over_constraints\n0,0.5,0.25,0.125\n1,1.0,-1.0,-0.5\n");
    }

    #[test]
    fn default_grid_sizes() {
        assert_eq!(default_grid(1), 101);
        assert_eq!(default_grid(2), 101);
        assert_eq!(default_grid(6), 7);
    }
}
