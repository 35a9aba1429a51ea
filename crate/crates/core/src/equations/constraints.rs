use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{read_table, write_table, Grid};
use crate::linalg::numeric_rank;
use crate::symexpr::{differentiate_sym, evaluate, parse_with, Assignment, Expr, FieldBase, Sym, VarRef};
use crate::{Error, Result};

/// Relative pivot threshold of the constraint rank test.
pub const CONSTRAINT_RANK_RTOL: f64 = 1e-10;
const RANK_PROBES: usize = 5;

/// Nonholonomic constraints `Φ_A(q, v) = 0` with constraint forms
/// `η_A = ((η^1_A)_i dq^i, …, (η^k_A)_i dq^i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSet {
    pub phi: Vec<Expr>,
    /// `eta[A-1][a-1][i-1] = (η^a_A)_i`.
    pub eta: Vec<Vec<Vec<Expr>>>,
}

impl ConstraintSet {
    pub fn new(phi: Vec<Expr>, eta: Vec<Vec<Vec<Expr>>>) -> Result<Self> {
        if phi.len() != eta.len() {
            return Err(Error::Problem("each constraint needs one constraint form".into()));
        }
        Ok(ConstraintSet { phi, eta })
    }

    pub fn empty() -> Self {
        ConstraintSet { phi: Vec::new(), eta: Vec::new() }
    }

    pub fn m(&self) -> usize {
        self.phi.len()
    }

    /// Parses constraints given as `phi` strings and `k` semi-basic form strings
    /// in `dq[i]` notation per constraint.
    pub fn parse(n: usize, k: usize, items: &[(String, Vec<String>)]) -> Result<Self> {
        let mut phi = Vec::new();
        let mut eta = Vec::new();
        for (p, forms) in items {
            phi.push(parse_with(p, n, k)?);
            if forms.len() != k {
                return Err(Error::Problem(format!("a constraint needs {k} eta entries, got {}", forms.len())));
            }
            let mut slots = Vec::new();
            for f in forms {
                slots.push(semibasic_coefficients(&parse_with(f, n, k)?, n)?);
            }
            eta.push(slots);
        }
        let cs = ConstraintSet { phi, eta };
        cs.check_shape(n, k)?;
        Ok(cs)
    }

    pub fn check_shape(&self, n: usize, k: usize) -> Result<()> {
        if self.phi.len() != self.eta.len() {
            return Err(Error::Problem("each constraint needs one constraint form".into()));
        }
        for (idx, (p, e)) in self.phi.iter().zip(&self.eta).enumerate() {
            if e.len() != k || e.iter().any(|s| s.len() != n) {
                return Err(Error::Problem(format!("constraint {} has a malformed form", idx + 1)));
            }
            for expr in std::iter::once(p).chain(e.iter().flatten()) {
                for v in expr.vars() {
                    v.check_bounds(n, k)?;
                    if !matches!(v, VarRef::Q(_) | VarRef::V(..)) {
                        return Err(Error::VariableRole(format!(
                            "constraint {} depends on `{v}`; only q and v are allowed",
                            idx + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies `f` to every expression.
    pub fn map_exprs(&self, f: &dyn Fn(&Expr) -> Expr) -> ConstraintSet {
        ConstraintSet {
            phi: self.phi.iter().map(f).collect(),
            eta: self
                .eta
                .iter()
                .map(|s| s.iter().map(|c| c.iter().map(f).collect()).collect())
                .collect(),
        }
    }

    /// Checks that the `m × nk` matrix `(η^a_A)_i` has rank `m` at seeded probe points.
    pub fn check_rank(&self, n: usize, k: usize, params: &Assignment, seed: u64) -> Result<()> {
        let m = self.m();
        if m == 0 {
            return Ok(());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for probe in 0..RANK_PROBES {
            let mut a = params.clone();
            for i in 1..=n {
                a.set_var(VarRef::Q(i), rng.gen_range(-2.0..=2.0));
                for al in 1..=k {
                    a.set_var(VarRef::V(i, al), rng.gen_range(-2.0..=2.0));
                }
            }
            let mut rows = Vec::with_capacity(m);
            for form in &self.eta {
                let mut row = Vec::with_capacity(n * k);
                for slot in form {
                    for c in slot {
                        row.push(evaluate(c, &a)?);
                    }
                }
                rows.push(row);
            }
            let r = numeric_rank(&rows, CONSTRAINT_RANK_RTOL);
            if r < m {
                return Err(Error::RankDeficient(format!(
                    "rank {r} < {m} at probe point {}",
                    probe + 1
                )));
            }
        }
        Ok(())
    }
}

/// Coefficients of a 1-form written with `dq[i]` symbols; rejects other differentials.
fn semibasic_coefficients(form: &Expr, n: usize) -> Result<Vec<Expr>> {
    for p in form.params() {
        if p.starts_with("d") && p.contains('[') && !p.starts_with("dq[") {
            return Err(Error::UnsupportedForm(format!("constraint form uses `{p}`; only dq[i] is allowed")));
        }
    }
    let mut coefs = Vec::with_capacity(n);
    let mut rest = form.clone();
    for i in 1..=n {
        let s = Sym::Param(format!("dq[{i}]"));
        let c = differentiate_sym(form, &s).simplify();
        if c.params().iter().any(|p| p.starts_with("dq[")) {
            return Err(Error::UnsupportedForm("constraint form is not linear in dq".into()));
        }
        rest = rest - c.clone() * Expr::sym(s);
        coefs.push(c);
    }
    if !crate::symexpr::equivalent(&rest, &Expr::zero())?.equal {
        return Err(Error::UnsupportedForm(format!("constraint form `{form}` has a non-dq part")));
    }
    Ok(coefs)
}

/// Linear constraints `Φ^a_l = (ψ̄^a_l)_i v^i_a` from 1-forms on `Q`.
///
/// `one_forms[a-1]` lists the coefficient vectors of the forms annihilating the
/// `a`-th velocity; the constraint form of each is nonzero only in slot `a`.
pub fn distribution_constraints(n: usize, k: usize, one_forms: &[Vec<Vec<Expr>>]) -> Result<ConstraintSet> {
    if one_forms.len() != k {
        return Err(Error::Problem(format!("need {k} lists of forms, got {}", one_forms.len())));
    }
    let mut phi = Vec::new();
    let mut eta = Vec::new();
    for (a0, forms) in one_forms.iter().enumerate() {
        for coef in forms {
            if coef.len() != n {
                return Err(Error::Problem(format!("a form on Q needs {n} coefficients")));
            }
            if let Some(v) = coef.iter().flat_map(|c| c.vars()).find(|v| !matches!(v, VarRef::Q(_))) {
                return Err(Error::VariableRole(format!("distribution form depends on `{v}`")));
            }
            let a = a0 + 1;
            phi.push(
                Expr::add_all(
                    coef.iter()
                        .enumerate()
                        .map(|(i, c)| c.clone() * Expr::var(VarRef::V(i + 1, a)))
                        .collect(),
                )
                .simplify(),
            );
            let mut slots = vec![vec![Expr::zero(); n]; k];
            slots[a0] = coef.clone();
            eta.push(slots);
        }
    }
    ConstraintSet::new(phi, eta)
}

/// Lagrange multiplier values `λ^A_a` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierField {
    pub m: usize,
    pub k: usize,
    pub grid: Grid,
    /// `values[node * m * k + (A-1) * k + (a-1)]`.
    pub values: Vec<f64>,
}

impl MultiplierField {
    pub fn zeros(m: usize, k: usize, grid: Grid) -> Self {
        let len = grid.len() * m * k;
        MultiplierField { m, k, grid, values: vec![0.0; len] }
    }

    pub fn get(&self, node: usize, a_idx: usize, a: usize) -> f64 {
        self.values[node * self.m * self.k + (a_idx - 1) * self.k + (a - 1)]
    }

    pub fn set(&mut self, node: usize, a_idx: usize, a: usize, value: f64) {
        let i = node * self.m * self.k + (a_idx - 1) * self.k + (a - 1);
        self.values[i] = value;
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.k).map(|a| format!("x[{a}]")).collect();
        for a_idx in 1..=self.m {
            for a in 1..=self.k {
                header.push(format!("mult[{a_idx},{a}]"));
            }
        }
        let mk = self.m * self.k;
        let rows = (0..self.grid.len()).map(|node| {
            let mut row = self.grid.position(node);
            row.extend_from_slice(&self.values[node * mk..(node + 1) * mk]);
            row
        });
        write_table(w, &header, rows)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<MultiplierField> {
        let table = read_table(r)?;
        let k = table.grid.dims();
        let m = table.columns.len() / k;
        let mut expected = Vec::new();
        for a_idx in 1..=m {
            for a in 1..=k {
                expected.push((a_idx, a));
            }
        }
        let got: Vec<(usize, usize)> = table
            .columns
            .iter()
            .map(|c| match c {
                Sym::Field(fs) if fs.derivs.is_empty() => match fs.base {
                    FieldBase::Mult(a_idx, a) => Ok((a_idx, a)),
                    _ => Err(Error::ChartMismatch(format!("unexpected column `{c}`"))),
                },
                _ => Err(Error::ChartMismatch(format!("unexpected column `{c}`"))),
            })
            .collect::<Result<_>>()?;
        if got != expected {
            return Err(Error::ChartMismatch("multiplier columns must be mult[A,a] in order".into()));
        }
        Ok(MultiplierField { m, k, grid: table.grid, values: table.values })
    }
}
