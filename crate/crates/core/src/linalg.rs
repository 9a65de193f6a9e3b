//! Small dense symmetric-matrix routines: leading minors, determinants and the
//! smallest eigenvalue.

/// Row-major dense matrix.
pub type Matrix = Vec<Vec<f64>>;

fn max_abs(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Determinant of the top-left `k x k` block by partially pivoted elimination.
pub fn det_pivoted(a: &[Vec<f64>], k: usize) -> f64 {
    let mut m: Matrix = a[..k].iter().map(|r| r[..k].to_vec()).collect();
    let mut det = 1.0;
    for c in 0..k {
        let p = (c..k)
            .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
            .unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        let pivot = m[c][c];
        det *= pivot;
        for r in c + 1..k {
            let f = m[r][c] / pivot;
            if f != 0.0 {
                for j in c..k {
                    m[r][j] -= f * m[c][j];
                }
            }
        }
    }
    det
}

/// All leading principal minors `det(A_1) … det(A_n)` from one elimination
/// pass without pivoting (running product of pivots). When a pivot becomes
/// negligible the remaining minors are computed individually with pivoting.
pub fn leading_minors(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let scale = max_abs(a);
    let mut minors = Vec::with_capacity(n);
    if scale == 0.0 {
        minors.resize(n, 0.0);
        return minors;
    }
    let mut m: Matrix = a.to_vec();
    let mut prod = 1.0;
    for k in 0..n {
        let pivot = m[k][k];
        if !(pivot.abs() > 1e-12 * scale) {
            for size in k + 1..=n {
                minors.push(det_pivoted(a, size));
            }
            return minors;
        }
        prod *= pivot;
        minors.push(prod);
        for r in k + 1..n {
            let f = m[r][k] / pivot;
            if f != 0.0 {
                for j in k..n {
                    m[r][j] -= f * m[k][j];
                }
            }
        }
    }
    minors
}

/// `Σ_k ln det(A_k)` over all leading minors, written as `Σ_j (n − j) ln p_j`
/// with the unpivoted elimination pivots `p_j`. `None` unless every pivot is
/// strictly positive.
pub fn log_minor_sum(a: &[Vec<f64>]) -> Option<f64> {
    let n = a.len();
    let mut m: Matrix = a.to_vec();
    let mut acc = 0.0;
    for k in 0..n {
        let pivot = m[k][k];
        if !(pivot > 0.0) || !pivot.is_finite() {
            return None;
        }
        acc += (n - k) as f64 * pivot.ln();
        for r in k + 1..n {
            let f = m[r][k] / pivot;
            if f != 0.0 {
                for j in k..n {
                    m[r][j] -= f * m[k][j];
                }
            }
        }
    }
    Some(acc)
}

/// Solves `A X = B` for square `A` by partially pivoted elimination.
pub fn solve(a: &[Vec<f64>], b: &[Vec<f64>]) -> Option<Matrix> {
    let n = a.len();
    let cols = b.first().map_or(0, |r| r.len());
    let mut m: Matrix = a.to_vec();
    let mut x: Matrix = b.to_vec();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
            .unwrap();
        if m[p][c] == 0.0 {
            return None;
        }
        m.swap(p, c);
        x.swap(p, c);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            if f != 0.0 {
                for j in c..n {
                    m[r][j] -= f * m[c][j];
                }
                for j in 0..cols {
                    x[r][j] -= f * x[c][j];
                }
            }
        }
    }
    for c in (0..n).rev() {
        for j in 0..cols {
            let mut s = x[c][j];
            for k in c + 1..n {
                s -= m[c][k] * x[k][j];
            }
            x[c][j] = s / m[c][c];
        }
    }
    Some(x)
}

/// Householder reduction of a symmetric matrix to tridiagonal form; returns
/// the diagonal and the sub-diagonal.
fn tridiagonalize(a: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    let mut m: Matrix = a.to_vec();
    for k in 0..n.saturating_sub(2) {
        let alpha_sq: f64 = (k + 1..n).map(|i| m[i][k] * m[i][k]).sum();
        if alpha_sq == 0.0 {
            continue;
        }
        let x0 = m[k + 1][k];
        let alpha = if x0 >= 0.0 { -alpha_sq.sqrt() } else { alpha_sq.sqrt() };
        let mut v = vec![0.0; n];
        v[k + 1] = x0 - alpha;
        for i in k + 2..n {
            v[i] = m[i][k];
        }
        let vnorm_sq: f64 = v.iter().map(|x| x * x).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        // A ← H A H with H = I − 2 v vᵀ / (vᵀ v)
        let p: Vec<f64> = (0..n)
            .map(|i| 2.0 * (0..n).map(|j| m[i][j] * v[j]).sum::<f64>() / vnorm_sq)
            .collect();
        let kc: f64 = (0..n).map(|i| v[i] * p[i]).sum::<f64>() / vnorm_sq;
        let w: Vec<f64> = (0..n).map(|i| p[i] - kc * v[i]).collect();
        for i in 0..n {
            for j in 0..n {
                m[i][j] -= v[i] * w[j] + w[i] * v[j];
            }
        }
    }
    let diag = (0..n).map(|i| m[i][i]).collect();
    let off = (1..n).map(|i| m[i][i - 1]).collect();
    (diag, off)
}

/// Number of eigenvalues strictly below `x` (Sturm sequence of the
/// tridiagonal form).
fn count_below(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let e2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue of a symmetric matrix (tridiagonalization followed by
/// Sturm bisection). `+∞` for an empty matrix.
pub fn min_eigenvalue(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    if n == 0 {
        return f64::INFINITY;
    }
    let (diag, off) = tridiagonalize(a);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let width = (hi - lo).max(f64::MIN_POSITIVE);
    lo -= 1e-12 * width + f64::MIN_POSITIVE;
    hi += 1e-12 * width + f64::MIN_POSITIVE;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(&diag, &off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
