use std::collections::{BTreeMap, HashMap};

use super::cg::conjugate_gradient;
use super::SolveReport;
use crate::equations::{derive_el, substitute_field};
use crate::geometry::{Bundle, Chart, DiscreteField, Grid};
use crate::linalg::is_positive_definite;
use crate::mechanics::{velocity_hessian, LagrangianProblem};
use crate::symexpr::{differentiate_sym, evaluate, Assignment, Expr, FieldBase, Sym, VarRef};
use crate::{Error, Result};

/// Dirichlet problem for a constant-coefficient quadratic Lagrangian.
#[derive(Clone, Debug)]
pub struct EllipticProblem {
    pub problem: LagrangianProblem,
    pub grid: Grid,
    /// Boundary values of `φ^i`, expressions in `x` and parameters.
    pub boundary: Vec<Expr>,
    /// Optional exact solution used to report the discretization error.
    pub exact: Option<Vec<Expr>>,
    pub rtol: f64,
}

impl EllipticProblem {
    pub fn new(problem: LagrangianProblem, grid: Grid, boundary: Vec<Expr>) -> Self {
        EllipticProblem { problem, grid, boundary, exact: None, rtol: 1e-10 }
    }
}

/// Body force `f` for which `exact` solves the Euler-Lagrange equations of `L + f·q`.
pub fn manufactured_body_force(p: &LagrangianProblem, exact: &[Expr]) -> Result<Vec<Expr>> {
    if exact.len() != p.n {
        return Err(Error::Problem(format!("expected {} exact components, got {}", p.n, exact.len())));
    }
    let mut bare = p.clone();
    bare.body_force = None;
    let sys = derive_el(&bare);
    sys.rows
        .iter()
        .map(|row| {
            let r = substitute_field(&row.residual(), &|b| match b {
                FieldBase::Phi(j) => Some(exact[j - 1].clone()),
                _ => None,
            })?;
            Ok(r.simplify())
        })
        .collect()
}

/// Constant second-order operator `Σ c[i][j][(a,b)] ∂_a∂_b φ^j + s_i(x)`.
struct Operator {
    coefs: Vec<Vec<(usize, usize, usize, f64)>>,
    sources: Vec<Expr>,
}

fn extract_operator(p: &LagrangianProblem, params: &Assignment) -> Result<Operator> {
    let sys = derive_el(p);
    let mut coefs = Vec::with_capacity(p.n);
    let mut sources = Vec::with_capacity(p.n);
    for row in &sys.rows {
        let r = row.residual();
        let mut zero_second = BTreeMap::new();
        let mut terms = Vec::new();
        for s in r.symbols() {
            let Sym::Field(fs) = &s else { continue };
            match (&fs.base, fs.derivs.as_slice()) {
                (FieldBase::Phi(j), [a, b]) => {
                    let c = differentiate_sym(&r, &s).simplify();
                    if c.symbols().iter().any(|t| !matches!(t, Sym::Param(_))) {
                        return Err(Error::UnsupportedForm(format!(
                            "coefficient of `{fs}` is not constant: {c}"
                        )));
                    }
                    terms.push((*j, *a - 1, *b - 1, evaluate(&c, params)?));
                    zero_second.insert(s.clone(), Expr::zero());
                }
                _ => {
                    return Err(Error::UnsupportedForm(format!(
                        "`{fs}` appears outside the second-order principal part"
                    )))
                }
            }
        }
        let rest = r.substitute(&zero_second).simplify();
        if rest.symbols().iter().any(|t| matches!(t, Sym::Field(_))) {
            return Err(Error::UnsupportedForm("operator is not linear with constant coefficients".into()));
        }
        coefs.push(terms);
        sources.push(rest);
    }
    Ok(Operator { coefs, sources })
}

/// Solves the Dirichlet problem by CG on the centered-difference system.
pub fn solve_navier(ep: &EllipticProblem) -> Result<SolveReport> {
    let p = &ep.problem;
    let grid = &ep.grid;
    if grid.dims() != p.k {
        return Err(Error::ChartMismatch(format!("grid has {} axes but k = {}", grid.dims(), p.k)));
    }
    if ep.boundary.len() != p.n {
        return Err(Error::Problem(format!("expected {} boundary expressions, got {}", p.n, ep.boundary.len())));
    }
    let params = p.param_assignment();
    let hess = velocity_hessian(p, None)?;
    let numeric = hess
        .hessian
        .iter()
        .map(|row| {
            row.iter()
                .map(|e| {
                    if e.vars().is_empty() {
                        evaluate(e, &params)
                    } else {
                        Err(Error::UnsupportedForm(format!("velocity Hessian entry `{e}` is not constant")))
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    if !is_positive_definite(&numeric) {
        return Err(Error::NotElliptic(format!(
            "velocity Hessian is not positive definite at the given parameters (det = {})",
            hess.determinant_text()
        )));
    }
    let op = extract_operator(p, &params)?;
    let n = p.n;
    let chart = Chart::new(n, p.k, Bundle::Base)?;

    let position_asg = |node: usize| {
        let mut a = params.clone();
        for (axis, x) in grid.position(node).iter().enumerate() {
            a.set_var(VarRef::X(axis + 1), *x);
        }
        a
    };
    let mut lifted = vec![0.0; grid.len() * n];
    for node in (0..grid.len()).filter(|&m| grid.is_boundary(m)) {
        let asg = position_asg(node);
        for (i, e) in ep.boundary.iter().enumerate() {
            lifted[node * n + i] = evaluate(e, &asg)?;
        }
    }
    let interior: Vec<usize> = grid.interior_nodes().collect();
    let slot: HashMap<usize, usize> = interior.iter().enumerate().map(|(s, &m)| (m, s)).collect();
    let principal = |data: &dyn Fn(usize, usize) -> f64, node: usize, i: usize| -> f64 {
        op.coefs[i]
            .iter()
            .map(|&(j, a, b, c)| c * grid.second_derivative(|m| data(m, j - 1), node, a, b))
            .sum()
    };

    let mut rhs = vec![0.0; interior.len() * n];
    for (s, &node) in interior.iter().enumerate() {
        let asg = position_asg(node);
        for i in 0..n {
            let src = evaluate(&op.sources[i], &asg)?;
            rhs[s * n + i] = src + principal(&|m, j| lifted[m * n + j], node, i);
        }
    }
    let mut diagonal = vec![0.0; interior.len() * n];
    for s in 0..interior.len() {
        for i in 0..n {
            diagonal[s * n + i] = op.coefs[i]
                .iter()
                .filter(|&&(j, a, b, _)| j == i + 1 && a == b)
                .map(|&(_, a, _, c)| 2.0 * c / (grid.spacings[a] * grid.spacings[a]))
                .sum();
        }
    }
    if diagonal.iter().any(|d| *d <= 0.0) {
        return Err(Error::NotElliptic("discrete operator has a non-positive diagonal".into()));
    }
    let apply = |u: &[f64], out: &mut [f64]| {
        let data = |m: usize, j: usize| slot.get(&m).map_or(0.0, |s| u[s * n + j]);
        for (s, &node) in interior.iter().enumerate() {
            for i in 0..n {
                out[s * n + i] = -principal(&data, node, i);
            }
        }
    };
    let max_iter = 10 * rhs.len();
    let out = conjugate_gradient(apply, &diagonal, &rhs, ep.rtol, max_iter);
    if !out.converged {
        return Err(Error::NonConvergence(format!(
            "CG stopped after {} iterations at relative residual {:.3e}",
            out.iterations, out.relative_residual
        )));
    }
    for (s, &node) in interior.iter().enumerate() {
        for i in 0..n {
            lifted[node * n + i] = out.solution[s * n + i];
        }
    }
    let field = DiscreteField::new(chart, grid.clone(), lifted)?;
    let mut metrics = BTreeMap::new();
    metrics.insert("unknowns".to_string(), rhs.len() as f64);
    if let Some(exact) = &ep.exact {
        let mut err = 0.0f64;
        for node in 0..grid.len() {
            let asg = position_asg(node);
            for (i, e) in exact.iter().enumerate() {
                err = err.max((field.values[node * n + i] - evaluate(e, &asg)?).abs());
            }
        }
        metrics.insert("error_max".to_string(), err);
    }
    Ok(SolveReport {
        field,
        multipliers: None,
        iterations: out.iterations,
        linear_residual: out.relative_residual,
        constraint_violation: Vec::new(),
        metrics,
    })
}
