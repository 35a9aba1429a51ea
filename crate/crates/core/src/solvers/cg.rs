/// Result of a preconditioned conjugate-gradient solve.
#[derive(Clone, Debug, PartialEq)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// `‖b - A x‖ / ‖b‖` at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned CG for a symmetric positive-definite operator.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    diagonal: &[f64],
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return CgOutcome { solution: x, iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diagonal).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for it in 0..max_iter {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= rtol {
            return CgOutcome { solution: x, iterations: it + 1, relative_residual: rel, converged: true };
        }
        for i in 0..n {
            z[i] = r[i] / diagonal[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgOutcome { solution: x, iterations: max_iter, relative_residual: rel, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..3 {
                y[i] = (0..3).map(|j| a[i][j] * x[j]).sum();
            }
        };
        let out = conjugate_gradient(apply, &[4.0, 3.0, 2.0], &[1.0, 2.0, 3.0], 1e-12, 30);
        assert!(out.converged);
        let mut check = [0.0; 3];
        apply(&out.solution, &mut check);
        for (c, b) in check.iter().zip([1.0, 2.0, 3.0]) {
            assert!((c - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rhs_returns_immediately() {
        let out = conjugate_gradient(|_, y| y.fill(0.0), &[1.0], &[0.0], 1e-10, 5);
        assert_eq!(out.iterations, 0);
        assert_eq!(out.solution, vec![0.0]);
    }
}
