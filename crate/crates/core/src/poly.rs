//! Sparse multivariate polynomials with real coefficients.
//!
//! Variables are small integer handles ([`VarId`]) registered in a
//! [`VarTable`] that carries their display names and roles. Monomials are
//! kept in graded lexicographic order, with lower variable ids ranking as the
//! "larger" variables, so a basis over `y1, y2` enumerates as
//! `1, y1, y2, y1^2, y1*y2, y2^2`.
//!
//! Coefficients equal to exactly `0.0` are never stored.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("variable name `{0}` is already registered")]
    DuplicateVariable(String),
    #[error("no value assigned to variable #{0}")]
    MissingVariable(u32),
}

/// Handle of a polynomial variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Role a variable plays in a tolerance problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    /// Normalized joint deviation `y_i` with `|y_i| <= 1`.
    Deviation,
    /// The tolerance radius.
    Tolerance,
    /// Scalar cone multiplier.
    Multiplier,
}

/// Registry of variable names and kinds. Ids are assigned densely from zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarTable {
    entries: Vec<(String, VarKind)>,
    by_name: HashMap<String, VarId>,
}

impl VarTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, kind: VarKind) -> Result<VarId, PolyError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(PolyError::DuplicateVariable(name));
        }
        let id = VarId(self.entries.len() as u32);
        self.by_name.insert(name.clone(), id);
        self.entries.push((name, kind));
        Ok(id)
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.entries[id.index()].0
    }

    pub fn kind(&self, id: VarId) -> VarKind {
        self.entries[id.index()].1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids_of_kind(&self, kind: VarKind) -> Vec<VarId> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, (_, k))| *k == kind)
            .map(|(i, _)| VarId(i as u32))
            .collect()
    }
}

/// Product of variable powers. The empty product is the unit monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial {
    // sorted by variable id, exponents > 0
    powers: Vec<(VarId, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn var(v: VarId) -> Self {
        Self::pow(v, 1)
    }

    pub fn pow(v: VarId, exp: u32) -> Self {
        if exp == 0 {
            Self::one()
        } else {
            Self { powers: vec![(v, exp)] }
        }
    }

    /// Builds a monomial from unsorted `(variable, exponent)` pairs; repeated
    /// variables have their exponents summed.
    pub fn from_powers(powers: impl IntoIterator<Item = (VarId, u32)>) -> Self {
        let mut acc: BTreeMap<VarId, u32> = BTreeMap::new();
        for (v, e) in powers {
            *acc.entry(v).or_insert(0) += e;
        }
        Self {
            powers: acc.into_iter().filter(|&(_, e)| e > 0).collect(),
        }
    }

    pub fn powers(&self) -> &[(VarId, u32)] {
        &self.powers
    }

    pub fn is_one(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.powers.iter().map(|&(_, e)| e).sum()
    }

    pub fn degree_in(&self, vars: &BTreeSet<VarId>) -> u32 {
        self.powers
            .iter()
            .filter(|(v, _)| vars.contains(v))
            .map(|&(_, e)| e)
            .sum()
    }

    pub fn exponent(&self, v: VarId) -> u32 {
        self.powers
            .binary_search_by_key(&v, |&(w, _)| w)
            .map(|i| self.powers[i].1)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.powers.len() + other.powers.len());
        let (mut i, mut j) = (0, 0);
        while i < self.powers.len() && j < other.powers.len() {
            let (a, ea) = self.powers[i];
            let (b, eb) = other.powers[j];
            match a.cmp(&b) {
                Ordering::Less => {
                    out.push((a, ea));
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((b, eb));
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a, ea + eb));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.powers[i..]);
        out.extend_from_slice(&other.powers[j..]);
        Monomial { powers: out }
    }

    /// `self / other` if `other` divides `self`.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.powers.len());
        let mut j = 0;
        for &(v, e) in &self.powers {
            if j < other.powers.len() && other.powers[j].0 < v {
                return None;
            }
            if j < other.powers.len() && other.powers[j].0 == v {
                let d = other.powers[j].1;
                j += 1;
                match e.cmp(&d) {
                    Ordering::Less => return None,
                    Ordering::Equal => {}
                    Ordering::Greater => out.push((v, e - d)),
                }
            } else {
                out.push((v, e));
            }
        }
        if j < other.powers.len() {
            return None;
        }
        Some(Monomial { powers: out })
    }

    /// Square root if every exponent is even.
    pub fn sqrt(&self) -> Option<Monomial> {
        if self.powers.iter().all(|&(_, e)| e % 2 == 0) {
            Some(Monomial {
                powers: self.powers.iter().map(|&(v, e)| (v, e / 2)).collect(),
            })
        } else {
            None
        }
    }

    /// Splits into the factor over `vars` and the factor over everything else.
    pub fn split(&self, vars: &BTreeSet<VarId>) -> (Monomial, Monomial) {
        let (inside, outside): (Vec<_>, Vec<_>) =
            self.powers.iter().partition(|(v, _)| vars.contains(v));
        (Monomial { powers: inside }, Monomial { powers: outside })
    }

    fn eval_with<F>(&self, value: &F) -> Result<f64, PolyError>
    where
        F: Fn(VarId) -> Option<f64>,
    {
        let mut acc = 1.0;
        for &(v, e) in &self.powers {
            let x = value(v).ok_or(PolyError::MissingVariable(v.0))?;
            acc *= x.powi(e as i32);
        }
        Ok(acc)
    }
}

impl Ord for Monomial {
    /// Graded lexicographic: total degree first, then the monomial with the
    /// larger exponent on the lowest-id variable sorts first.
    fn cmp(&self, other: &Self) -> Ordering {
        let by_degree = self.degree().cmp(&other.degree());
        if by_degree != Ordering::Equal {
            return by_degree;
        }
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.powers.get(i), other.powers.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Less,
                (None, Some(_)) => return Ordering::Greater,
                (Some(&(a, ea)), Some(&(b, eb))) => {
                    if a != b {
                        // the side that mentions the smaller id has a positive
                        // exponent where the other has zero
                        return if a < b { Ordering::Less } else { Ordering::Greater };
                    }
                    if ea != eb {
                        return eb.cmp(&ea);
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse polynomial: monomial → coefficient, zero coefficients pruned.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::term(Monomial::one(), c)
    }

    pub fn var(v: VarId) -> Self {
        Self::term(Monomial::var(v), 1.0)
    }

    pub fn term(m: Monomial, c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    /// Adds `c * m`, dropping the entry if the merged coefficient is exactly zero.
    pub fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = *e.get() + c;
                if s == 0.0 {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coeff(&Monomial::one())
    }

    /// Total degree; `0` for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn degree_in(&self, vars: &BTreeSet<VarId>) -> u32 {
        self.terms.keys().map(|m| m.degree_in(vars)).max().unwrap_or(0)
    }

    pub fn variables(&self) -> BTreeSet<VarId> {
        self.terms
            .keys()
            .flat_map(|m| m.powers().iter().map(|&(v, _)| v))
            .collect()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(m, &c)| (m.clone(), c * s)))
    }

    pub fn pow(&self, exp: u32) -> Polynomial {
        let mut acc = Polynomial::constant(1.0);
        for _ in 0..exp {
            acc = &acc * self;
        }
        acc
    }

    pub fn evaluate(&self, assignment: &HashMap<VarId, f64>) -> Result<f64, PolyError> {
        self.eval_with(|v| assignment.get(&v).copied())
    }

    /// Evaluates with `values[v.index()]` as the value of `v`.
    pub fn eval_dense(&self, values: &[f64]) -> Result<f64, PolyError> {
        self.eval_with(|v| values.get(v.index()).copied())
    }

    pub fn eval_with<F>(&self, value: F) -> Result<f64, PolyError>
    where
        F: Fn(VarId) -> Option<f64>,
    {
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            acc += c * m.eval_with(&value)?;
        }
        Ok(acc)
    }

    pub fn derivative(&self, v: VarId) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, &c) in &self.terms {
            let e = m.exponent(v);
            if e == 0 {
                continue;
            }
            let reduced = m.div(&Monomial::var(v)).expect("exponent checked");
            out.add_term(reduced, c * e as f64);
        }
        out
    }

    /// Replaces each variable in `subs` by the given polynomial.
    pub fn substitute(&self, subs: &BTreeMap<VarId, Polynomial>) -> Polynomial {
        let mut cache: HashMap<(VarId, u32), Polynomial> = HashMap::new();
        let mut out = Polynomial::zero();
        for (m, &c) in &self.terms {
            let mut kept = Vec::new();
            let mut factor = Polynomial::constant(c);
            for &(v, e) in m.powers() {
                match subs.get(&v) {
                    Some(s) => {
                        let p = cache.entry((v, e)).or_insert_with(|| s.pow(e));
                        factor = &factor * &*p;
                    }
                    None => kept.push((v, e)),
                }
            }
            let rest = Polynomial::term(Monomial::from_powers(kept), 1.0);
            out += &(&factor * &rest);
        }
        out
    }

    /// Groups terms by their factor over `vars`: `p = Σ key · value`, where
    /// each value only involves variables outside `vars`.
    pub fn collect_by(&self, vars: &BTreeSet<VarId>) -> BTreeMap<Monomial, Polynomial> {
        let mut out: BTreeMap<Monomial, Polynomial> = BTreeMap::new();
        for (m, &c) in &self.terms {
            let (inside, outside) = m.split(vars);
            out.entry(inside).or_default().add_term(outside, c);
        }
        out.retain(|_, p| !p.is_zero());
        out
    }

    /// Inverse of [`Polynomial::collect_by`].
    pub fn from_collected(parts: &BTreeMap<Monomial, Polynomial>) -> Polynomial {
        let mut out = Polynomial::zero();
        for (key, value) in parts {
            for (m, c) in value.terms() {
                out.add_term(key.mul(m), c);
            }
        }
        out
    }

    pub fn display<'a>(&'a self, vars: &'a VarTable) -> PolyDisplay<'a> {
        PolyDisplay { poly: self, vars }
    }
}

pub struct PolyDisplay<'a> {
    poly: &'a Polynomial,
    vars: &'a VarTable,
}

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.is_zero() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.poly.terms().enumerate() {
            if k > 0 {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            let a = c.abs();
            if m.is_one() {
                write!(f, "{a}")?;
                continue;
            }
            if a != 1.0 {
                write!(f, "{a}*")?;
            }
            for (i, &(v, e)) in m.powers().iter().enumerate() {
                if i > 0 {
                    write!(f, "*")?;
                }
                let name = if v.index() < self.vars.len() {
                    self.vars.name(v).to_string()
                } else {
                    format!("v{}", v.0)
                };
                if e == 1 {
                    write!(f, "{name}")?;
                } else {
                    write!(f, "{name}^{e}")?;
                }
            }
        }
        Ok(())
    }
}

impl AddAssign<&Polynomial> for Polynomial {
    fn add_assign(&mut self, rhs: &Polynomial) {
        for (m, &c) in &rhs.terms {
            self.add_term(m.clone(), c);
        }
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(mut self, rhs: Polynomial) -> Polynomial {
        self += &rhs;
        self
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, &c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: Polynomial) -> Polynomial {
        &self - &rhs
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        &self * &rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vars() -> (VarTable, VarId, VarId, VarId) {
        let mut t = VarTable::new();
        let y1 = t.add("y1", VarKind::Deviation).unwrap();
        let y2 = t.add("y2", VarKind::Deviation).unwrap();
        let lam = t.add("lambda", VarKind::Tolerance).unwrap();
        (t, y1, y2, lam)
    }

    #[test]
    fn duplicate_names_rejected() {
        let (mut t, ..) = vars();
        assert_eq!(
            t.add("y1", VarKind::Multiplier),
            Err(PolyError::DuplicateVariable("y1".into()))
        );
        assert_eq!(t.kind(VarId(2)), VarKind::Tolerance);
        assert_eq!(t.ids_of_kind(VarKind::Deviation), vec![VarId(0), VarId(1)]);
    }

    #[test]
    fn add_cancels_and_merges() {
        let (_, y1, ..) = vars();
        let p = &Polynomial::var(y1) + &Polynomial::constant(1.0);
        let q = -&Polynomial::var(y1);
        assert_eq!(&p + &q, Polynomial::constant(1.0));
        assert_eq!(&p + &Polynomial::zero(), p);

        let sq = Monomial::pow(y1, 2);
        let a = Polynomial::term(sq.clone(), 0.5);
        let b = Polynomial::term(sq.clone(), 0.25);
        assert_eq!(&a + &b, Polynomial::term(sq, 0.75));
    }

    #[test]
    fn mul_expands_binomials() {
        let (_, y1, y2, lam) = vars();
        let one = Polynomial::constant(1.0);
        let g1 = &one - &Polynomial::term(Monomial::pow(y1, 2), 1.0);
        let g2 = &one - &Polynomial::term(Monomial::pow(y2, 2), 1.0);
        let expected = Polynomial::from_terms([
            (Monomial::one(), 1.0),
            (Monomial::pow(y1, 2), -1.0),
            (Monomial::pow(y2, 2), -1.0),
            (Monomial::from_powers([(y1, 2), (y2, 2)]), 1.0),
        ]);
        assert_eq!(&g1 * &g2, expected);
        assert_eq!(&g1 * &one, g1);

        let yl = Polynomial::term(Monomial::from_powers([(y1, 1), (lam, 1)]), 1.0);
        assert_eq!(
            &yl * &yl,
            Polynomial::term(Monomial::from_powers([(y1, 2), (lam, 2)]), 1.0)
        );
    }

    #[test]
    fn evaluate_examples() {
        let (_, y1, _, lam) = vars();
        let p = &Polynomial::constant(1.0) - &Polynomial::term(Monomial::pow(y1, 2), 1.0);
        let at = HashMap::from([(y1, 1.0)]);
        assert_eq!(p.evaluate(&at).unwrap(), 0.0);

        let q = Polynomial::from_terms([
            (Monomial::one(), 0.08997),
            (Monomial::from_powers([(y1, 1), (lam, 1)]), 0.86603),
        ]);
        let v = q.evaluate(&HashMap::from([(y1, -1.0), (lam, 0.067)])).unwrap();
        assert!((v - (0.08997 - 0.86603 * 0.067)).abs() < 1e-15);
        assert!((v - 0.03195).abs() < 1e-5);

        let zeros = HashMap::from([(y1, 0.0), (lam, 0.0)]);
        assert_eq!(q.evaluate(&zeros).unwrap(), 0.08997);

        assert_eq!(
            q.evaluate(&HashMap::from([(y1, 1.0)])),
            Err(PolyError::MissingVariable(lam.0))
        );
    }

    #[test]
    fn graded_lex_order() {
        let (_, y1, y2, _) = vars();
        let mut ms = vec![
            Monomial::pow(y2, 2),
            Monomial::from_powers([(y1, 1), (y2, 1)]),
            Monomial::var(y2),
            Monomial::one(),
            Monomial::pow(y1, 2),
            Monomial::var(y1),
        ];
        ms.sort();
        assert_eq!(
            ms,
            vec![
                Monomial::one(),
                Monomial::var(y1),
                Monomial::var(y2),
                Monomial::pow(y1, 2),
                Monomial::from_powers([(y1, 1), (y2, 1)]),
                Monomial::pow(y2, 2),
            ]
        );
    }

    #[test]
    fn monomial_division_and_roots() {
        let (_, y1, y2, lam) = vars();
        let m = Monomial::from_powers([(y1, 2), (y2, 1), (lam, 3)]);
        assert_eq!(
            m.div(&Monomial::from_powers([(y1, 1), (lam, 3)])),
            Some(Monomial::from_powers([(y1, 1), (y2, 1)]))
        );
        assert_eq!(m.div(&Monomial::pow(y2, 2)), None);
        assert_eq!(m.sqrt(), None);
        assert_eq!(
            Monomial::from_powers([(y1, 2), (y2, 4)]).sqrt(),
            Some(Monomial::from_powers([(y1, 1), (y2, 2)]))
        );
    }

    #[test]
    fn collect_by_groups() {
        let mut t = VarTable::new();
        let y1 = t.add("y1", VarKind::Deviation).unwrap();
        let lam = t.add("lambda", VarKind::Tolerance).unwrap();
        let a1 = t.add("alpha_1", VarKind::Multiplier).unwrap();
        let p = Polynomial::from_terms([
            (Monomial::from_powers([(a1, 1), (y1, 2)]), 1.0),
            (Monomial::from_powers([(lam, 1), (y1, 1)]), 1.0),
        ]);
        let set = BTreeSet::from([y1]);
        let c = p.collect_by(&set);
        assert_eq!(c.len(), 2);
        assert_eq!(c[&Monomial::pow(y1, 2)], Polynomial::var(a1));
        assert_eq!(c[&Monomial::var(y1)], Polynomial::var(lam));

        let k = Polynomial::constant(3.5).collect_by(&set);
        assert_eq!(k[&Monomial::one()], Polynomial::constant(3.5));
    }

    #[test]
    fn derivative_and_substitute() {
        let (t, y1, _, lam) = vars();
        // p = 3 y1^2 lambda + y1
        let p = Polynomial::from_terms([
            (Monomial::from_powers([(y1, 2), (lam, 1)]), 3.0),
            (Monomial::var(y1), 1.0),
        ]);
        let dp = p.derivative(y1);
        assert_eq!(
            dp,
            Polynomial::from_terms([
                (Monomial::from_powers([(y1, 1), (lam, 1)]), 6.0),
                (Monomial::one(), 1.0)
            ])
        );
        // y1 -> 2 + lambda
        let subs = BTreeMap::from([(y1, &Polynomial::constant(2.0) + &Polynomial::var(lam))]);
        let s = p.substitute(&subs);
        // 3 (2+l)^2 l + 2 + l = 12 l + 12 l^2 + 3 l^3 + 2 + l
        let expected = Polynomial::from_terms([
            (Monomial::one(), 2.0),
            (Monomial::var(lam), 13.0),
            (Monomial::pow(lam, 2), 12.0),
            (Monomial::pow(lam, 3), 3.0),
        ]);
        assert_eq!(s, expected);
        assert_eq!(
            format!("{}", expected.display(&t)),
            "2 + 13*lambda + 12*lambda^2 + 3*lambda^3"
        );
    }

    fn arb_poly() -> impl Strategy<Value = Polynomial> {
        prop::collection::vec(
            (0u32..3, 0u32..3, 0u32..3, -4.0f64..4.0),
            0..6,
        )
        .prop_map(|ts| {
            Polynomial::from_terms(ts.into_iter().map(|(a, b, c, k)| {
                (
                    Monomial::from_powers([(VarId(0), a), (VarId(1), b), (VarId(2), c)]),
                    k,
                )
            }))
        })
    }

    // integer coefficients keep every product and sum exact
    fn arb_int_poly() -> impl Strategy<Value = Polynomial> {
        prop::collection::vec((0u32..3, 0u32..3, 0u32..3, -4i32..4), 0..6).prop_map(|ts| {
            Polynomial::from_terms(ts.into_iter().map(|(a, b, c, k)| {
                (
                    Monomial::from_powers([(VarId(0), a), (VarId(1), b), (VarId(2), c)]),
                    k as f64,
                )
            }))
        })
    }

    proptest! {
        #[test]
        fn ring_axioms_by_evaluation(
            p in arb_poly(), q in arb_poly(), r in arb_poly(),
            pts in prop::collection::vec(prop::array::uniform3(-1.5f64..1.5), 100),
        ) {
            let lhs = &p * &(&q + &r);
            let rhs = &(&p * &q) + &(&p * &r);
            for x in &pts {
                let a = lhs.eval_dense(x).unwrap();
                let b = rhs.eval_dense(x).unwrap();
                let scale = 1.0 + p.max_abs_coeff() * (q.max_abs_coeff() + r.max_abs_coeff()) * 100.0;
                prop_assert!((a - b).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn collect_round_trip_is_exact(p in arb_poly(), mask in 0u8..8) {
            let vars: BTreeSet<VarId> = (0..3).filter(|i| mask & (1 << i) != 0).map(VarId).collect();
            let parts = p.collect_by(&vars);
            prop_assert_eq!(Polynomial::from_collected(&parts), p);
        }

        #[test]
        fn canonical_form_is_order_independent(p in arb_int_poly(), q in arb_int_poly(), r in arb_int_poly()) {
            prop_assert_eq!(&(&p * &q) * &r, &p * &(&r * &q));
            prop_assert_eq!(&p * &q, &q * &p);
            prop_assert_eq!(&p + &q, &q + &p);
        }
    }
}
