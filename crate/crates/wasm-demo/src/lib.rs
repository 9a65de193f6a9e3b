//! Browser bindings for exploring a planar arm next to a wall.
//!
//! Every export takes plain numbers or `Float64Array`s and returns either a
//! number or a JSON string, so the page needs no generated TypeScript types.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use jte_core::kinematics::{
    eval_constraint, fk_point, lower_bound_poly, BodyPoint, HalfPlaneConstraint, LowerBoundOptions, RobotModel,
};
use jte_core::nlp::{certify_with_backoff, solve_nlp, NlpOptions, SolveStatus};
use jte_core::sos::GramProblem;
use jte_core::verify::{draw_samples, oracle_lambda, OracleOptions, SampleOptions};

#[derive(Debug, Serialize, PartialEq)]
pub struct Certificate {
    pub lambda: f64,
    pub certified: bool,
    pub reference_clearance: f64,
    pub oracle: Option<f64>,
    pub iterations: usize,
    pub gram_size: usize,
    pub error: Option<String>,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct CloudPoint {
    pub x: f64,
    pub y: f64,
    pub clearance: f64,
}

fn scene(links: &[f64], normal: &[f64], offset: f64) -> Result<(RobotModel, HalfPlaneConstraint), String> {
    let robot = RobotModel::planar(links.to_vec()).map_err(|e| e.to_string())?;
    Ok((robot, HalfPlaneConstraint::new("wall", normal.to_vec(), offset)))
}

/// Certified tolerance for one wall, plus the grid estimate of the true one.
pub fn certify(links: &[f64], reference: &[f64], normal: &[f64], offset: f64, cone_order: usize) -> Certificate {
    let failed = |reference_clearance: f64, e: String| Certificate {
        lambda: 0.0,
        certified: false,
        reference_clearance,
        oracle: None,
        iterations: 0,
        gram_size: 0,
        error: Some(e),
    };
    let (robot, wall) = match scene(links, normal, offset) {
        Ok(s) => s,
        Err(e) => return failed(f64::NAN, e),
    };
    let f_ref = match eval_constraint(&wall, &robot, reference) {
        Ok(f) => f,
        Err(e) => return failed(f64::NAN, e.to_string()),
    };
    if f_ref.is_nan() || f_ref <= 0.0 {
        return failed(f_ref, "the reference pose touches or crosses the wall".into());
    }
    let run = || -> Result<_, String> {
        let lb = lower_bound_poly(&wall, &robot, reference, &LowerBoundOptions::default()).map_err(|e| e.to_string())?;
        let mut problem = GramProblem::from_lower_bound(&lb, cone_order).map_err(|e| e.to_string())?;
        problem.prune();
        let opts = NlpOptions::default();
        let sol = solve_nlp(&problem, &opts).map_err(|e| e.to_string())?;
        let sol = certify_with_backoff(&problem, &sol, &opts).map_err(|e| e.to_string())?;
        Ok((sol, problem.size()))
    };
    match run() {
        Ok((sol, gram_size)) => {
            let grid = OracleOptions { grid_per_axis: Some(41), tol: 1e-5, ..OracleOptions::default() };
            Certificate {
                lambda: sol.lambda,
                certified: sol.status != SolveStatus::Infeasible && sol.lambda > 0.0,
                reference_clearance: f_ref,
                oracle: oracle_lambda(&wall, &robot, reference, &grid).ok().map(|o| o.lambda_hat),
                iterations: sol.iterations,
                gram_size,
                error: None,
            }
        }
        Err(e) => failed(f_ref, e),
    }
}

/// End-effector positions of random poses in the tolerance box.
pub fn cloud(
    links: &[f64],
    reference: &[f64],
    normal: &[f64],
    offset: f64,
    lambda: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<CloudPoint>, String> {
    let (robot, wall) = scene(links, normal, offset)?;
    let opts = SampleOptions { samples: count, seed, corner_bias: 0.0 };
    draw_samples(reference, lambda, &opts)
        .iter()
        .map(|x| {
            let p = fk_point(&robot, x, BodyPoint::EndEffector).map_err(|e| e.to_string())?;
            let clearance = eval_constraint(&wall, &robot, x).map_err(|e| e.to_string())?;
            Ok(CloudPoint { x: p[0], y: p[1], clearance })
        })
        .collect()
}

/// Clearance over a `cells x cells` grid of the first two joints, each
/// spanning `reference ± half_width`; row-major with joint 2 varying
/// slowest.
pub fn clearance_map(
    links: &[f64],
    reference: &[f64],
    normal: &[f64],
    offset: f64,
    half_width: f64,
    cells: usize,
) -> Result<Vec<f64>, String> {
    let (robot, wall) = scene(links, normal, offset)?;
    if reference.len() < 2 || cells < 2 {
        return Err("need at least two joints and two cells".into());
    }
    let step = 2.0 * half_width / (cells - 1) as f64;
    let mut out = Vec::with_capacity(cells * cells);
    let mut x = reference.to_vec();
    for j in 0..cells {
        x[1] = reference[1] - half_width + j as f64 * step;
        for i in 0..cells {
            x[0] = reference[0] - half_width + i as f64 * step;
            out.push(eval_constraint(&wall, &robot, &x).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

/// Joint and tip positions `[x0, y0, x1, y1, …]` starting at the base.
pub fn arm_outline(links: &[f64], pose: &[f64]) -> Result<Vec<f64>, String> {
    let robot = RobotModel::planar(links.to_vec()).map_err(|e| e.to_string())?;
    let mut out = vec![0.0, 0.0];
    for k in 1..=links.len() {
        let p = fk_point(&robot, pose, BodyPoint::LinkTip(k)).map_err(|e| e.to_string())?;
        out.extend_from_slice(&p);
    }
    Ok(out)
}

fn to_js<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).unwrap_or_else(|e| format!("{{\"error\":\"{e}\"}}"))
}

#[wasm_bindgen]
pub fn solve_planar(links: &[f64], reference: &[f64], normal: &[f64], offset: f64, cone_order: usize) -> String {
    to_js(&certify(links, reference, normal, offset, cone_order))
}

#[wasm_bindgen]
pub fn sample_cloud(
    links: &[f64],
    reference: &[f64],
    normal: &[f64],
    offset: f64,
    lambda: f64,
    count: usize,
    seed: u32,
) -> Result<String, JsError> {
    let points = cloud(links, reference, normal, offset, lambda, count, u64::from(seed)).map_err(|e| JsError::new(&e))?;
    Ok(to_js(&points))
}

#[wasm_bindgen]
pub fn joint_clearance_map(
    links: &[f64],
    reference: &[f64],
    normal: &[f64],
    offset: f64,
    half_width: f64,
    cells: usize,
) -> Result<Vec<f64>, JsError> {
    clearance_map(links, reference, normal, offset, half_width, cells).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn arm_points(links: &[f64], pose: &[f64]) -> Result<Vec<f64>, JsError> {
    arm_outline(links, pose).map_err(|e| JsError::new(&e))
}
