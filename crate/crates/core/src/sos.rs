//! Refute generators, the truncated cone with scalar multipliers, and the
//! Gram-matrix layout of the resulting certificate polynomial.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::kinematics::LowerBound;
use crate::poly::{Monomial, PolyError, Polynomial, VarId, VarKind, VarTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SosError {
    #[error("cone order must lie in 1..={max}, got {got}")]
    ConeOrder { got: usize, max: usize },
    #[error("certificate polynomial has odd degree {0} in the deviation variables")]
    OddDegree(u32),
    #[error("no basis pair produces monomial of degree {0}")]
    Unassignable(u32),
    #[error("empty cone")]
    EmptyCone,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// `γ0 = −g` and `γi = 1 − y_i²`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefuteGenerators {
    pub gammas: Vec<Polynomial>,
}

impl RefuteGenerators {
    pub fn gamma0(&self) -> &Polynomial {
        &self.gammas[0]
    }

    pub fn dof(&self) -> usize {
        self.gammas.len() - 1
    }
}

pub fn build_refute_generators(g: &Polynomial, y: &[VarId]) -> RefuteGenerators {
    let mut gammas = Vec::with_capacity(y.len() + 1);
    gammas.push(-g);
    for &yi in y {
        gammas.push(&Polynomial::constant(1.0) - &Polynomial::term(Monomial::pow(yi, 2), 1.0));
    }
    RefuteGenerators { gammas }
}

/// One product `Π_{j∈S} γj` with its scalar multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeTerm {
    pub subset: Vec<usize>,
    pub alpha: VarId,
    pub product: Polynomial,
}

/// Every nonempty subset of generator indices up to `order` elements, by size
/// and then lexicographically. Multipliers are registered in `vars`.
pub fn enumerate_cone_terms(
    gens: &RefuteGenerators,
    order: usize,
    vars: &mut VarTable,
) -> Result<Vec<ConeTerm>, SosError> {
    let count = gens.gammas.len();
    if order == 0 || order > count {
        return Err(SosError::ConeOrder { got: order, max: count });
    }
    let wide = count > 10;
    let mut terms = Vec::new();
    for size in 1..=order {
        let mut subset: Vec<usize> = (0..size).collect();
        loop {
            let name = if wide {
                let parts: Vec<String> = subset.iter().map(|s| s.to_string()).collect();
                format!("alpha_{}", parts.join("_"))
            } else {
                let digits: String = subset.iter().map(|s| s.to_string()).collect();
                format!("alpha_{digits}")
            };
            let alpha = vars.add(name, VarKind::Multiplier)?;
            let mut product = Polynomial::constant(1.0);
            for &j in &subset {
                product = &product * &gens.gammas[j];
            }
            terms.push(ConeTerm { subset: subset.clone(), alpha, product });
            // next combination
            let mut i = size;
            while i > 0 && subset[i - 1] == count - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            subset[i - 1] += 1;
            for k in i..size {
                subset[k] = subset[k - 1] + 1;
            }
        }
    }
    Ok(terms)
}

/// `p0 = −Σ α_S Π_{j∈S} γj − 1`.
pub fn assemble_p0(terms: &[ConeTerm]) -> Result<Polynomial, SosError> {
    if terms.is_empty() {
        return Err(SosError::EmptyCone);
    }
    let mut p0 = Polynomial::constant(-1.0);
    for t in terms {
        p0 += &(&Polynomial::var(t.alpha) * &t.product).scale(-1.0);
    }
    Ok(p0)
}

/// All monomials in `y` of total degree `<= d`, graded-lex ordered.
pub fn monomial_basis(y: &[VarId], d: u32) -> Vec<Monomial> {
    fn rec(y: &[VarId], left: u32, acc: &mut Vec<(VarId, u32)>, out: &mut Vec<Monomial>) {
        match y.split_first() {
            None => out.push(Monomial::from_powers(acc.iter().copied())),
            Some((&v, rest)) => {
                for e in 0..=left {
                    acc.push((v, e));
                    rec(rest, left - e, acc, out);
                    acc.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    rec(y, d, &mut Vec::new(), &mut out);
    out.sort();
    out
}

/// Basis and symmetric coefficient matrix with `Yᵀ Q Y = p0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramDecomposition {
    pub basis: Vec<Monomial>,
    pub entries: Vec<Vec<Polynomial>>,
}

/// Squares of basis monomials go on the diagonal; every other monomial is
/// split evenly over the first basis pair `(i, j)`, `i < j`, producing it.
pub fn build_gram(p0: &Polynomial, y: &[VarId]) -> Result<GramDecomposition, SosError> {
    let yset: BTreeSet<VarId> = y.iter().copied().collect();
    let deg = p0.degree_in(&yset);
    if deg % 2 == 1 {
        return Err(SosError::OddDegree(deg));
    }
    let basis = monomial_basis(y, deg / 2);
    let index: HashMap<&Monomial, usize> = basis.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let n = basis.len();
    let mut entries = vec![vec![Polynomial::zero(); n]; n];
    for (m, w) in p0.collect_by(&yset) {
        if let Some(i) = m.sqrt().as_ref().and_then(|r| index.get(r)) {
            entries[*i][*i] += &w;
            continue;
        }
        let pair = basis.iter().enumerate().find_map(|(i, bi)| {
            let rest = m.div(bi)?;
            let j = *index.get(&rest)?;
            (j > i).then_some((i, j))
        });
        let (i, j) = pair.ok_or(SosError::Unassignable(m.degree()))?;
        let half = w.scale(0.5);
        entries[i][j] += &half;
        entries[j][i] += &half;
    }
    Ok(GramDecomposition { basis, entries })
}

impl GramDecomposition {
    /// `Yᵀ Q Y` expanded back into a polynomial.
    pub fn reconstruct(&self) -> Polynomial {
        let mut out = Polynomial::zero();
        for (i, bi) in self.basis.iter().enumerate() {
            for (j, bj) in self.basis.iter().enumerate() {
                let e = &self.entries[i][j];
                if e.is_zero() {
                    continue;
                }
                let m = bi.mul(bj);
                for (mono, c) in e.terms() {
                    out.add_term(mono.mul(&m), c);
                }
            }
        }
        out
    }
}

/// Everything the solver needs: the Gram layout plus which variables form the
/// decision vector `[λ, α…]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramProblem {
    pub vars: VarTable,
    pub y: Vec<VarId>,
    pub lambda: VarId,
    pub alphas: Vec<VarId>,
    /// Generator subset behind each multiplier (empty for hand-built problems).
    pub subsets: Vec<Vec<usize>>,
    pub p0: Polynomial,
    pub gram: GramDecomposition,
}

/// What [`GramProblem::prune`] changed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PruneReport {
    /// Multipliers pinned to zero, by position in `alphas`.
    pub fixed: Vec<usize>,
    /// Basis rows that became identically zero.
    pub zero_rows: Vec<usize>,
    /// Off-diagonal monomials moved to another factor pair.
    pub relocated: usize,
    /// Some entry can never satisfy semidefiniteness.
    pub infeasible: bool,
}

/// Sign of every term when all decision variables are nonnegative.
fn single_signed(p: &Polynomial) -> Option<f64> {
    let mut sign = None;
    for (_, c) in p.terms() {
        let s = c.signum();
        match sign {
            None => sign = Some(s),
            Some(prev) if prev != s => return None,
            _ => {}
        }
    }
    sign
}

impl GramProblem {
    /// Removes structure that positive semidefiniteness rules out, assuming
    /// `λ >= 0` and `α >= 0` so every term carries the sign of its
    /// coefficient.
    ///
    /// A diagonal entry with only negative terms must vanish, pinning its
    /// multipliers to zero. A row with a zero diagonal must vanish entirely:
    /// each of its off-diagonal monomials moves to the first other factor
    /// pair whose rows have live diagonals, or pins its multipliers when no
    /// such pair exists. The identity `Yᵀ Q Y = p0` is kept, with `p0`
    /// updated for the pinned multipliers.
    pub fn prune(&mut self) -> PruneReport {
        let n = self.size();
        let mut report = PruneReport::default();
        let mut zero = vec![false; n];
        let products: Vec<Vec<Monomial>> = self
            .gram
            .basis
            .iter()
            .map(|a| self.gram.basis.iter().map(|b| a.mul(b)).collect())
            .collect();
        loop {
            let mut pin: BTreeSet<VarId> = BTreeSet::new();
            let mut changed = false;
            for i in 0..n {
                if zero[i] {
                    continue;
                }
                let diag = &self.gram.entries[i][i];
                if !diag.is_zero() {
                    if single_signed(diag) == Some(-1.0) {
                        self.collect_pins(diag, &mut pin, &mut report);
                    }
                    continue;
                }
                for j in 0..n {
                    if j == i || self.gram.entries[i][j].is_zero() {
                        continue;
                    }
                    let target = (0..n).find_map(|k| {
                        if k == i || zero[k] || self.gram.entries[k][k].is_zero() {
                            return None;
                        }
                        ((k + 1)..n).find(|&l| {
                            l != i
                                && !zero[l]
                                && !self.gram.entries[l][l].is_zero()
                                && products[k][l] == products[i][j]
                        })
                        .map(|l| (k, l))
                    });
                    let e = std::mem::replace(&mut self.gram.entries[i][j], Polynomial::zero());
                    if let Some((k, l)) = target {
                        self.gram.entries[j][i] = Polynomial::zero();
                        self.gram.entries[k][l] += &e;
                        self.gram.entries[l][k] += &e;
                        report.relocated += 1;
                        changed = true;
                    } else {
                        if single_signed(&e).is_some() {
                            self.collect_pins(&e, &mut pin, &mut report);
                        }
                        self.gram.entries[i][j] = e;
                    }
                }
                if (0..n).all(|j| self.gram.entries[i][j].is_zero()) {
                    zero[i] = true;
                    report.zero_rows.push(i);
                    changed = true;
                }
            }
            if report.infeasible {
                break;
            }
            if !pin.is_empty() {
                let subs = pin.iter().map(|&v| (v, Polynomial::zero())).collect();
                for row in self.gram.entries.iter_mut() {
                    for e in row.iter_mut() {
                        if !e.is_zero() {
                            *e = e.substitute(&subs);
                        }
                    }
                }
                self.p0 = self.p0.substitute(&subs);
                changed = true;
            }
            if !changed {
                break;
            }
        }
        report.fixed.sort_unstable();
        report.zero_rows.sort_unstable();
        report
    }

    fn collect_pins(&self, forced_zero: &Polynomial, pin: &mut BTreeSet<VarId>, report: &mut PruneReport) {
        for (m, _) in forced_zero.terms() {
            let alpha = m
                .powers()
                .iter()
                .find_map(|&(v, _)| self.alphas.iter().position(|&a| a == v));
            match alpha {
                Some(k) => {
                    if pin.insert(self.alphas[k]) {
                        report.fixed.push(k);
                    }
                }
                None => report.infeasible = true,
            }
        }
    }

    /// Runs generators → cone → `p0` → Gram for a polynomial model.
    pub fn from_lower_bound(lb: &LowerBound, order: usize) -> Result<Self, SosError> {
        let mut vars = lb.vars.clone();
        let gens = build_refute_generators(&lb.poly, &lb.y);
        let terms = enumerate_cone_terms(&gens, order, &mut vars)?;
        let p0 = assemble_p0(&terms)?;
        let gram = build_gram(&p0, &lb.y)?;
        Ok(Self {
            vars,
            y: lb.y.clone(),
            lambda: lb.lambda,
            alphas: terms.iter().map(|t| t.alpha).collect(),
            subsets: terms.into_iter().map(|t| t.subset).collect(),
            p0,
            gram,
        })
    }

    pub fn size(&self) -> usize {
        self.gram.basis.len()
    }

    /// Length of the decision vector `[λ, α…]`.
    pub fn decision_len(&self) -> usize {
        1 + self.alphas.len()
    }

    /// Dense variable assignment for a decision vector (`y` left at zero).
    pub fn assignment(&self, decision: &[f64]) -> Vec<f64> {
        let mut values = vec![0.0; self.vars.len()];
        values[self.lambda.index()] = decision[0];
        for (a, v) in self.alphas.iter().zip(&decision[1..]) {
            values[a.index()] = *v;
        }
        values
    }

    /// Numeric Gram matrix at a decision vector.
    pub fn eval_matrix(&self, decision: &[f64]) -> Vec<Vec<f64>> {
        let values = self.assignment(decision);
        self.gram
            .entries
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| e.eval_dense(&values).expect("gram entries use decision variables only"))
                    .collect()
            })
            .collect()
    }
}
