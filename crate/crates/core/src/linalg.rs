//! Small dense linear algebra helpers shared by the symbolic and numeric layers.

use num_rational::BigRational;
use num_traits::One;

use crate::symexpr::Poly;

/// Determinant of a square polynomial matrix by expansion over column subsets.
///
/// Runs in `O(2^m · m)` polynomial operations and skips zero entries, which
/// keeps sparse matrices of size up to ~16 cheap.
pub fn poly_determinant(a: &[Vec<Poly>]) -> Poly {
    let m = a.len();
    if m == 0 {
        return Poly::constant(BigRational::one());
    }
    let mut dp: Vec<Option<Poly>> = vec![None; 1 << m];
    dp[0] = Some(Poly::constant(BigRational::one()));
    for mask in 0usize..(1 << m) {
        let Some(cur) = dp[mask].take() else { continue };
        let row = mask.count_ones() as usize;
        if row == m {
            dp[mask] = Some(cur);
            continue;
        }
        for (c, entry) in a[row].iter().enumerate() {
            if mask & (1 << c) != 0 || entry.is_zero() {
                continue;
            }
            let above = (mask >> (c + 1)).count_ones();
            let mut term = cur.mul(entry);
            if above % 2 == 1 {
                term = term.neg();
            }
            let next = mask | (1 << c);
            dp[next] = Some(match dp[next].take() {
                Some(acc) => acc.add(&term),
                None => term,
            });
        }
    }
    dp[(1 << m) - 1].take().unwrap_or_else(Poly::zero)
}

/// Adjugate matrix: `adj[i][j] = (-1)^{i+j} det(minor(j, i))`.
pub fn poly_adjugate(a: &[Vec<Poly>]) -> Vec<Vec<Poly>> {
    let m = a.len();
    let mut adj = vec![vec![Poly::zero(); m]; m];
    for r in 0..m {
        for c in 0..m {
            let minor: Vec<Vec<Poly>> = (0..m)
                .filter(|&i| i != r)
                .map(|i| (0..m).filter(|&j| j != c).map(|j| a[i][j].clone()).collect())
                .collect();
            let d = poly_determinant(&minor);
            adj[c][r] = if (r + c) % 2 == 1 { d.neg() } else { d };
        }
    }
    adj
}

/// Numeric rank by Gaussian elimination with full pivoting.
///
/// Pivots below `rel_tol` times the largest entry of the input count as zero.
pub fn numeric_rank(a: &[Vec<f64>], rel_tol: f64) -> usize {
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    if scale == 0.0 {
        return 0;
    }
    let tol = rel_tol * scale;
    let mut rank = 0;
    for step in 0..rows.min(cols) {
        let mut best = (step, step, 0.0);
        for (i, row) in m.iter().enumerate().skip(step) {
            for (j, &x) in row.iter().enumerate().skip(step) {
                if x.abs() > best.2 {
                    best = (i, j, x.abs());
                }
            }
        }
        if best.2 <= tol {
            break;
        }
        m.swap(step, best.0);
        for row in m.iter_mut() {
            row.swap(step, best.1);
        }
        let pivot = m[step][step];
        for i in step + 1..rows {
            let f = m[i][step] / pivot;
            if f != 0.0 {
                for j in step..cols {
                    m[i][j] -= f * m[step][j];
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Cholesky test for symmetric positive definiteness.
pub fn is_positive_definite(a: &[Vec<f64>]) -> bool {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|p| l[i][p] * l[j][p]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 1e-14 * a[i][i].abs().max(1.0) {
                    return false;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    true
}

/// Solves a small dense system by partial pivoting; `None` if singular.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, &x)| {
        let mut r = r.clone();
        r.push(x);
        r
    }).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())?;
        if m[p][c].abs() < 1e-300 {
            return None;
        }
        m.swap(c, p);
        for i in 0..n {
            if i != c {
                let f = m[i][c] / m[c][c];
                if f != 0.0 {
                    for j in c..=n {
                        m[i][j] -= f * m[c][j];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}
