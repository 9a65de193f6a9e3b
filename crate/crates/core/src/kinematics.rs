//! Serial-arm forward kinematics, half-plane clearance constraints, and the
//! small-angle polynomial model of a constraint around a reference pose.
//!
//! Both robot kinds reduce to polynomials over per-joint trig atoms
//! `cos x_i`, `sin x_i` (see [`symbolic_point`]), so the polynomial model has a
//! single construction path.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{Monomial, PolyError, Polynomial, VarId, VarKind, VarTable};

/// Relative error of the small-angle substitution stays under 1% below this
/// deviation (radians).
pub const SMALL_ANGLE_LIMIT: f64 = 0.244;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid robot model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),
    #[error("constraint `{0}` has a zero normal")]
    ZeroNormal(String),
    #[error("unsupported constraint: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Two-link-style planar arm whose joint angles are measured in the world
/// frame: the end effector sits at `(Σ L_i cos x_i, Σ L_i sin x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanarArm {
    pub link_lengths: Vec<f64>,
}

/// One revolute joint of a spatial chain: a fixed transform from the previous
/// frame, followed by a rotation about `axis` (expressed in the new frame).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialJoint {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    pub axis: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialArm {
    pub joints: Vec<SpatialJoint>,
    /// Tool point in the last joint frame (meters).
    #[serde(default)]
    pub tool: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RobotModel {
    Planar(PlanarArm),
    Spatial(SpatialArm),
}

/// Body point a constraint is enforced on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyPoint {
    #[default]
    EndEffector,
    /// Far end of link `k` (1-based); for spatial chains, the origin of the
    /// frame following joint `k` (the tool point when `k == n`).
    LinkTip(usize),
}

/// Safe iff `normal · p <= offset` for the constrained body point `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfPlaneConstraint {
    pub name: String,
    pub normal: Vec<f64>,
    pub offset: f64,
    #[serde(default)]
    pub point: BodyPoint,
}

impl HalfPlaneConstraint {
    pub fn new(name: impl Into<String>, normal: Vec<f64>, offset: f64) -> Self {
        Self {
            name: name.into(),
            normal,
            offset,
            point: BodyPoint::EndEffector,
        }
    }

    fn unit(&self) -> Result<(Vec<f64>, f64), KinematicsError> {
        let norm = self.normal.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(KinematicsError::ZeroNormal(self.name.clone()));
        }
        Ok((self.normal.iter().map(|a| a / norm).collect(), self.offset / norm))
    }
}

impl RobotModel {
    pub fn planar(link_lengths: Vec<f64>) -> Result<Self, KinematicsError> {
        let m = RobotModel::Planar(PlanarArm { link_lengths });
        m.check()?;
        Ok(m)
    }

    pub fn spatial(joints: Vec<SpatialJoint>, tool: [f64; 3]) -> Result<Self, KinematicsError> {
        let m = RobotModel::Spatial(SpatialArm { joints, tool });
        m.check()?;
        Ok(m)
    }

    pub fn dof(&self) -> usize {
        match self {
            RobotModel::Planar(a) => a.link_lengths.len(),
            RobotModel::Spatial(a) => a.joints.len(),
        }
    }

    /// Dimension of the Cartesian workspace (2 or 3).
    pub fn workspace_dim(&self) -> usize {
        match self {
            RobotModel::Planar(_) => 2,
            RobotModel::Spatial(_) => 3,
        }
    }

    /// Lists every violated model invariant.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.dof() == 0 {
            errs.push("robot needs at least one joint".to_string());
        }
        match self {
            RobotModel::Planar(a) => {
                for (i, l) in a.link_lengths.iter().enumerate() {
                    if !(l.is_finite() && *l > 0.0) {
                        errs.push(format!("link {} length must be positive, got {l}", i + 1));
                    }
                }
            }
            RobotModel::Spatial(a) => {
                for (i, j) in a.joints.iter().enumerate() {
                    let r = &j.rotation;
                    for p in 0..3 {
                        for q in 0..3 {
                            let dot: f64 = (0..3).map(|k| r[k][p] * r[k][q]).sum();
                            let want = if p == q { 1.0 } else { 0.0 };
                            if !((dot - want).abs() <= 1e-9) {
                                errs.push(format!("joint {} rotation is not orthonormal", i + 1));
                            }
                        }
                    }
                    let n = j.axis.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if !(n.is_finite() && n > 0.0) {
                        errs.push(format!("joint {} axis must be nonzero", i + 1));
                    }
                    if j.translation.iter().any(|v| !v.is_finite()) {
                        errs.push(format!("joint {} translation must be finite", i + 1));
                    }
                }
                if a.tool.iter().any(|v| !v.is_finite()) {
                    errs.push("tool offset must be finite".to_string());
                }
            }
        }
        errs.dedup();
        errs
    }

    fn check(&self) -> Result<(), KinematicsError> {
        let errs = self.validate();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(KinematicsError::InvalidModel(errs))
        }
    }

    fn check_point(&self, point: BodyPoint) -> Result<usize, KinematicsError> {
        let n = self.dof();
        match point {
            BodyPoint::EndEffector => Ok(n),
            BodyPoint::LinkTip(k) if (1..=n).contains(&k) => Ok(k),
            BodyPoint::LinkTip(k) => Err(KinematicsError::Unsupported(format!(
                "link tip {k} outside 1..={n}"
            ))),
        }
    }

    fn check_dims(&self, x: &[f64]) -> Result<(), KinematicsError> {
        if x.len() != self.dof() {
            return Err(KinematicsError::DimensionMismatch {
                expected: self.dof(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

type Mat3 = [[f64; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn mat_vec(a: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = (0..3).map(|k| a[i][k] * v[k]).sum();
    }
    out
}

fn unit_axis(axis: &[f64; 3]) -> [f64; 3] {
    let n = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
    [axis[0] / n, axis[1] / n, axis[2] / n]
}

/// Rotation about a unit axis written as `A + cos θ · B + sin θ · C`.
fn rotation_parts(axis: &[f64; 3]) -> (Mat3, Mat3, Mat3) {
    let k = unit_axis(axis);
    let mut outer = [[0.0; 3]; 3];
    let mut rest = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            outer[i][j] = k[i] * k[j];
            rest[i][j] = if i == j { 1.0 } else { 0.0 } - k[i] * k[j];
        }
    }
    let cross = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
    (outer, rest, cross)
}

fn axis_rotation(axis: &[f64; 3], theta: f64) -> Mat3 {
    let (a, b, c) = rotation_parts(axis);
    let (ct, st) = (theta.cos(), theta.sin());
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][j] + ct * b[i][j] + st * c[i][j];
        }
    }
    out
}

/// End-effector position.
pub fn fk_position(robot: &RobotModel, x: &[f64]) -> Result<Vec<f64>, KinematicsError> {
    fk_point(robot, x, BodyPoint::EndEffector)
}

/// Position of a body point. Planar arms use the direct angle sums; spatial
/// arms multiply the transform chain numerically.
pub fn fk_point(robot: &RobotModel, x: &[f64], point: BodyPoint) -> Result<Vec<f64>, KinematicsError> {
    robot.check_dims(x)?;
    let upto = robot.check_point(point)?;
    match robot {
        RobotModel::Planar(arm) => {
            let (mut px, mut py) = (0.0, 0.0);
            for (l, xi) in arm.link_lengths.iter().zip(x).take(upto) {
                px += l * xi.cos();
                py += l * xi.sin();
            }
            Ok(vec![px, py])
        }
        RobotModel::Spatial(arm) => {
            let mut r: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            let mut p = [0.0; 3];
            for (j, xi) in arm.joints.iter().zip(x).take(upto) {
                let t = mat_vec(&r, &j.translation);
                p = [p[0] + t[0], p[1] + t[1], p[2] + t[2]];
                r = mat_mul(&r, &j.rotation);
                r = mat_mul(&r, &axis_rotation(&j.axis, *xi));
            }
            let tip = if upto == arm.joints.len() {
                arm.tool
            } else {
                arm.joints[upto].translation
            };
            let t = mat_vec(&r, &tip);
            Ok(vec![p[0] + t[0], p[1] + t[1], p[2] + t[2]])
        }
    }
}

/// Same position computed by a different route: planar arms chain relative
/// rigid transforms, spatial arms evaluate the expanded trig-atom polynomial.
pub fn fk_point_alt(robot: &RobotModel, x: &[f64], point: BodyPoint) -> Result<Vec<f64>, KinematicsError> {
    robot.check_dims(x)?;
    let upto = robot.check_point(point)?;
    match robot {
        RobotModel::Planar(arm) => {
            // homogeneous 2D chain, joint angle relative to the previous link
            let mut t = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
            let mut prev = 0.0;
            for (l, xi) in arm.link_lengths.iter().zip(x).take(upto) {
                let rel = xi - prev;
                prev = *xi;
                let (c, s) = (rel.cos(), rel.sin());
                let step = [[c, -s, l * c], [s, c, l * s], [0.0, 0.0, 1.0]];
                t = mat_mul(&t, &step);
            }
            Ok(vec![t[0][2], t[1][2]])
        }
        RobotModel::Spatial(_) => {
            let atoms = symbolic_point(robot, point)?;
            let values: Vec<f64> = x.iter().flat_map(|xi| [xi.cos(), xi.sin()]).collect();
            atoms
                .iter()
                .map(|p| p.eval_dense(&values).map_err(KinematicsError::from))
                .collect()
        }
    }
}

/// Trig atom ids used by [`symbolic_point`]: `cos x_i` is `VarId(2i)` and
/// `sin x_i` is `VarId(2i + 1)` (0-based joints).
pub fn cos_atom(i: usize) -> VarId {
    VarId(2 * i as u32)
}

pub fn sin_atom(i: usize) -> VarId {
    VarId(2 * i as u32 + 1)
}

type PolyMat = Vec<Vec<Polynomial>>;

fn const_mat(m: &Mat3) -> PolyMat {
    m.iter()
        .map(|row| row.iter().map(|&v| Polynomial::constant(v)).collect())
        .collect()
}

fn poly_mat_mul(a: &PolyMat, b: &PolyMat) -> PolyMat {
    (0..3)
        .map(|i| {
            (0..3)
                .map(|j| {
                    let mut acc = Polynomial::zero();
                    for k in 0..3 {
                        if a[i][k].is_zero() || b[k][j].is_zero() {
                            continue;
                        }
                        acc += &(&a[i][k] * &b[k][j]);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn poly_mat_vec(a: &PolyMat, v: &[f64; 3]) -> Vec<Polynomial> {
    (0..3)
        .map(|i| {
            let mut acc = Polynomial::zero();
            for k in 0..3 {
                acc += &a[i][k].scale(v[k]);
            }
            acc
        })
        .collect()
}

/// Cartesian coordinates of `point` as polynomials in the trig atoms.
pub fn symbolic_point(robot: &RobotModel, point: BodyPoint) -> Result<Vec<Polynomial>, KinematicsError> {
    let upto = robot.check_point(point)?;
    match robot {
        RobotModel::Planar(arm) => {
            let mut px = Polynomial::zero();
            let mut py = Polynomial::zero();
            for (i, l) in arm.link_lengths.iter().enumerate().take(upto) {
                px += &Polynomial::var(cos_atom(i)).scale(*l);
                py += &Polynomial::var(sin_atom(i)).scale(*l);
            }
            Ok(vec![px, py])
        }
        RobotModel::Spatial(arm) => {
            let mut r = const_mat(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
            let mut p = vec![Polynomial::zero(), Polynomial::zero(), Polynomial::zero()];
            for (i, j) in arm.joints.iter().enumerate().take(upto) {
                for (pk, tk) in p.iter_mut().zip(poly_mat_vec(&r, &j.translation)) {
                    *pk += &tk;
                }
                r = poly_mat_mul(&r, &const_mat(&j.rotation));
                let (a, b, c) = rotation_parts(&j.axis);
                let cos = Polynomial::var(cos_atom(i));
                let sin = Polynomial::var(sin_atom(i));
                let joint: PolyMat = (0..3)
                    .map(|p| {
                        (0..3)
                            .map(|q| {
                                let mut e = Polynomial::constant(a[p][q]);
                                e += &cos.scale(b[p][q]);
                                e += &sin.scale(c[p][q]);
                                e
                            })
                            .collect()
                    })
                    .collect();
                r = poly_mat_mul(&r, &joint);
            }
            let tip = if upto == arm.joints.len() {
                arm.tool
            } else {
                arm.joints[upto].translation
            };
            for (pk, tk) in p.iter_mut().zip(poly_mat_vec(&r, &tip)) {
                *pk += &tk;
            }
            Ok(p)
        }
    }
}

/// Signed clearance `(offset − a·p) / ‖a‖` in meters; positive means safe.
pub fn eval_constraint(
    c: &HalfPlaneConstraint,
    robot: &RobotModel,
    x: &[f64],
) -> Result<f64, KinematicsError> {
    if c.normal.len() != robot.workspace_dim() {
        return Err(KinematicsError::DimensionMismatch {
            expected: robot.workspace_dim(),
            got: c.normal.len(),
        });
    }
    let (unit, offset) = c.unit()?;
    let p = fk_point(robot, x, c.point)?;
    Ok(offset - unit.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>())
}

/// Options for building the polynomial model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowerBoundOptions {
    /// Terms whose degree in the deviation variables exceeds this cap are
    /// replaced by a constant-in-`y` bound that is never larger on the unit
    /// cube. `None` keeps every product term.
    pub max_y_degree: Option<u32>,
}

impl Default for LowerBoundOptions {
    fn default() -> Self {
        Self { max_y_degree: Some(2) }
    }
}

/// Polynomial model `g(y, λ)` of a constraint around a reference pose.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBound {
    pub vars: VarTable,
    pub y: Vec<VarId>,
    pub lambda: VarId,
    pub poly: Polynomial,
    /// Number of high-degree terms replaced by cube bounds.
    pub bounded_terms: usize,
}

impl LowerBound {
    pub fn eval(&self, y: &[f64], lambda: f64) -> f64 {
        let mut values = vec![0.0; self.vars.len()];
        for (v, yi) in self.y.iter().zip(y) {
            values[v.index()] = *yi;
        }
        values[self.lambda.index()] = lambda;
        self.poly.eval_dense(&values).expect("all model variables assigned")
    }
}

/// Builds `g(y, λ)` by expanding each joint angle `x_i^r + y_i λ` with the
/// angle-sum identities and substituting `cos(y_i λ) → 1 − y_i² λ² / 2`,
/// `sin(y_i λ) → y_i λ`.
pub fn lower_bound_poly(
    c: &HalfPlaneConstraint,
    robot: &RobotModel,
    xr: &[f64],
    opts: &LowerBoundOptions,
) -> Result<LowerBound, KinematicsError> {
    robot.check_dims(xr)?;
    if c.normal.len() != robot.workspace_dim() {
        return Err(KinematicsError::Unsupported(format!(
            "constraint `{}` has a {}-D normal for a {}-D workspace",
            c.name,
            c.normal.len(),
            robot.workspace_dim()
        )));
    }
    let (unit, offset) = c.unit()?;
    let coords = symbolic_point(robot, c.point)?;
    let mut f_atoms = Polynomial::constant(offset);
    for (a, p) in unit.iter().zip(&coords) {
        f_atoms += &p.scale(-a);
    }

    let n = robot.dof();
    let mut vars = VarTable::new();
    let y: Vec<VarId> = (1..=n)
        .map(|i| vars.add(format!("y{i}"), VarKind::Deviation))
        .collect::<Result<_, _>>()?;
    let lambda = vars.add("lambda", VarKind::Tolerance)?;

    let mut subs = BTreeMap::new();
    for (i, (&yi, xi)) in y.iter().zip(xr).enumerate() {
        let s = Polynomial::term(Monomial::from_powers([(yi, 1), (lambda, 1)]), 1.0);
        let c = &Polynomial::constant(1.0)
            - &Polynomial::term(Monomial::from_powers([(yi, 2), (lambda, 2)]), 0.5);
        let (cr, sr) = (xi.cos(), xi.sin());
        subs.insert(cos_atom(i), &c.scale(cr) - &s.scale(sr));
        subs.insert(sin_atom(i), &c.scale(sr) + &s.scale(cr));
    }
    let full = f_atoms.substitute(&subs);

    let (poly, bounded_terms) = match opts.max_y_degree {
        Some(cap) => bound_high_degree(&full, &y, lambda, cap),
        None => (full, 0),
    };
    Ok(LowerBound {
        vars,
        y,
        lambda,
        poly,
        bounded_terms,
    })
}

/// Replaces each term `c · m(y) · λ^k` with `deg_y(m) > cap` by its minimum
/// over `|y_i| <= 1`, `λ >= 0`: `0` for positive even terms, `c · λ^k` for
/// negative even terms, `−|c| · λ^k` otherwise.
fn bound_high_degree(p: &Polynomial, y: &[VarId], lambda: VarId, cap: u32) -> (Polynomial, usize) {
    let yset: BTreeSet<VarId> = y.iter().copied().collect();
    let mut out = Polynomial::zero();
    let mut count = 0;
    for (m, c) in p.terms() {
        if m.degree_in(&yset) <= cap {
            out.add_term(m.clone(), c);
            continue;
        }
        count += 1;
        let (ym, rest) = m.split(&yset);
        debug_assert!(rest.powers().iter().all(|&(v, _)| v == lambda));
        let even = ym.sqrt().is_some();
        let replacement = if even && c > 0.0 {
            0.0
        } else if even {
            c
        } else {
            -c.abs()
        };
        out.add_term(rest, replacement);
    }
    (out, count)
}
