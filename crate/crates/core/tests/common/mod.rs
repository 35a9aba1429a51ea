#![allow(dead_code)]

use std::path::PathBuf;

use kfield::equations::{ConstraintSet, PdeRow, RowKind};
use kfield::mechanics::LagrangianProblem;
use kfield::symexpr::{parse_with, Expr};

pub const NAVIER_L: &str =
    "(lam/2+mu)*(v[1,1]^2+v[2,2]^2)+mu/2*(v[1,2]^2+v[2,1]^2)+(lam+mu)*v[1,1]*v[2,2]";

pub const COSSERAT_L: &str = "rho/2*(v[1,1]^2+v[2,1]^2)+alpha/2*v[3,1]^2\
    -1/2*(beta*v[3,2]^2+kk*(v[4,2]^2+v[5,2]^2))+q[6]*(q[4]-v[1,2])+q[7]*(q[5]-v[2,2])";

pub fn navier() -> LagrangianProblem {
    LagrangianProblem::parse(2, 2, NAVIER_L).unwrap().with_param("lam", 1.0).with_param("mu", 1.0)
}

pub fn cosserat() -> LagrangianProblem {
    let items = vec![
        ("v[1,1]+rr*v[3,1]*v[2,2]".to_string(), vec!["dq[1]+rr*v[2,2]*dq[3]".to_string(), "0".to_string()]),
        ("v[2,1]-rr*v[3,1]*v[1,2]".to_string(), vec!["dq[2]-rr*v[1,2]*dq[3]".to_string(), "0".to_string()]),
    ];
    let mut p = LagrangianProblem::parse(7, 2, COSSERAT_L).unwrap();
    for name in ["rho", "alpha", "beta", "kk", "rr"] {
        p = p.with_param(name, 1.0);
    }
    p.with_constraints(ConstraintSet::parse(7, 2, &items).unwrap()).unwrap()
}

/// `∂²φ^i/∂x^a∂x^b` in parser syntax.
pub fn d2(i: usize, a: usize, b: usize) -> String {
    format!("d/dx[{a}](d/dx[{b}](phi[{i}]))")
}

pub fn row(kind: RowKind, index: Vec<usize>, lhs: &str, rhs: &str, n: usize, k: usize) -> PdeRow {
    PdeRow::new(kind, index, parse_with(lhs, n, k).unwrap(), parse_with(rhs, n, k).unwrap())
}

/// Hand-written Navier equations
/// `(λ+2μ)∂₁₁u + (λ+μ)∂₁₂v + μ∂₂₂u = 0`, `μ∂₁₁v + (λ+2μ)∂₂₂v + (λ+μ)∂₁₂u = 0`.
pub fn navier_reference() -> Vec<PdeRow> {
    vec![
        row(
            RowKind::Balance,
            vec![1],
            &format!("(lam+2*mu)*{}+(lam+mu)*{}+mu*{}", d2(1, 1, 1), d2(2, 1, 2), d2(1, 2, 2)),
            "0",
            2,
            2,
        ),
        row(
            RowKind::Balance,
            vec![2],
            &format!("mu*{}+(lam+2*mu)*{}+(lam+mu)*{}", d2(2, 1, 1), d2(2, 2, 2), d2(1, 1, 2)),
            "0",
            2,
            2,
        ),
    ]
}

pub fn parse(text: &str, n: usize, k: usize) -> Expr {
    parse_with(text, n, k).unwrap()
}

/// Determinant by cofactor expansion along the first row.
pub fn cofactor_determinant(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let mut terms = Vec::new();
    for j in 0..n {
        if m[0][j].is_zero() {
            continue;
        }
        let minor: Vec<Vec<Expr>> = m[1..]
            .iter()
            .map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, e)| e.clone()).collect())
            .collect();
        let t = m[0][j].clone() * cofactor_determinant(&minor);
        terms.push(if j % 2 == 0 { t } else { -t });
    }
    Expr::add_all(terms)
}

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn reference_problem(name: &str) -> PathBuf {
    repo_root().join("problems").join(name)
}

/// Random polynomial Lagrangian of degree at most 3 with at least one
/// quadratic velocity term, as `(n, k, text)`.
pub fn random_lagrangian(seed: u64) -> (usize, usize, String) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=3);
    let k = rng.gen_range(1..=3);
    let mut vars: Vec<String> = (1..=n).map(|i| format!("q[{i}]")).collect();
    for i in 1..=n {
        for a in 1..=k {
            vars.push(format!("v[{i},{a}]"));
        }
    }
    let (i, a) = (rng.gen_range(1..=n), rng.gen_range(1..=k));
    let mut terms = vec![format!("v[{i},{a}]^2/2")];
    for _ in 0..rng.gen_range(2..=5) {
        let mut coef = rng.gen_range(1..=4);
        if rng.gen_bool(0.5) {
            coef = -coef;
        }
        let den = rng.gen_range(1..=3);
        let factors: Vec<&str> =
            (0..rng.gen_range(1..=3)).map(|_| vars[rng.gen_range(0..vars.len())].as_str()).collect();
        terms.push(format!("({coef}/{den})*{}", factors.join("*")));
    }
    (n, k, terms.join("+"))
}
