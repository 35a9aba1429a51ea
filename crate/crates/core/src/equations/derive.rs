use std::collections::BTreeMap;

use super::{along_field, phi, Along, PdeRow, PdeSystem, RowKind, SystemKind};
use crate::mechanics::{hamiltonian_from_lagrangian, LagrangianProblem, LegendreMap};
use crate::symexpr::{differentiate, differentiate_sym, Expr, FieldBase, FieldSym, Sym, VarRef};
use crate::{Error, Result};

/// Seed of the probe points used by the constraint rank test.
pub const RANK_PROBE_SEED: u64 = 0;

/// Total derivative `D_a` of an expression in field symbols and base coordinates.
pub fn total_derivative(e: &Expr, a: usize) -> Result<Expr> {
    let mut terms = Vec::new();
    for s in e.symbols() {
        match &s {
            Sym::Field(fs) => {
                if fs.derivs.len() >= 2 {
                    return Err(Error::UnsupportedForm(format!(
                        "total derivative of `{fs}` would exceed second order"
                    )));
                }
                terms.push(differentiate_sym(e, &s) * Expr::field(fs.derive(a)));
            }
            Sym::Var(VarRef::X(b)) => {
                if *b == a {
                    terms.push(differentiate_sym(e, &s));
                }
            }
            Sym::Var(v) => {
                return Err(Error::VariableRole(format!(
                    "total derivative of an expression containing chart variable `{v}`"
                )))
            }
            Sym::Param(_) => {}
        }
    }
    Ok(Expr::add_all(terms))
}

/// Replaces field symbols whose base is mapped by `repl`, differentiating the
/// replacement for every total derivative carried by the symbol.
pub fn substitute_field(e: &Expr, repl: &dyn Fn(&FieldBase) -> Option<Expr>) -> Result<Expr> {
    let mut map = BTreeMap::new();
    for s in e.symbols() {
        if let Sym::Field(fs) = &s {
            if let Some(mut r) = repl(&fs.base) {
                for a in &fs.derivs {
                    r = total_derivative(&r, *a)?;
                }
                map.insert(s.clone(), r);
            }
        }
    }
    Ok(e.substitute(&map))
}

fn second_jet(j: usize, a: usize, b: usize) -> Expr {
    Expr::field(phi(j).derive(a).derive(b))
}

/// Euler-Lagrange field equations `Σ_a D_a(∂L/∂v^i_a) = ∂L/∂q^i`.
pub fn derive_el(p: &LagrangianProblem) -> PdeSystem {
    let l = p.full_lagrangian();
    let mut rows = Vec::with_capacity(p.n);
    for i in 1..=p.n {
        let mut lhs = Vec::new();
        for a in 1..=p.k {
            let dl = differentiate(&l, VarRef::V(i, a));
            for j in 1..=p.n {
                let by_q = differentiate(&dl, VarRef::Q(j));
                if !by_q.is_zero() {
                    lhs.push(along_field(&by_q, Along::Jet) * Expr::field(phi(j).derive(a)));
                }
                for b in 1..=p.k {
                    let by_v = differentiate(&dl, VarRef::V(j, b));
                    if !by_v.is_zero() {
                        lhs.push(along_field(&by_v, Along::Jet) * second_jet(j, a, b));
                    }
                }
            }
            let by_x = differentiate(&dl, VarRef::X(a));
            lhs.push(along_field(&by_x, Along::Jet));
        }
        let rhs = along_field(&differentiate(&l, VarRef::Q(i)), Along::Jet);
        rows.push(PdeRow::new(RowKind::Balance, vec![i], Expr::add_all(lhs), rhs));
    }
    PdeSystem::new(SystemKind::El, p.n, p.k, rows)
}

fn implicit_rows(p: &LagrangianProblem) -> Vec<PdeRow> {
    let l = p.full_lagrangian();
    let mut rows = Vec::new();
    for i in 1..=p.n {
        for a in 1..=p.k {
            rows.push(PdeRow::new(
                RowKind::VelocityDefinition,
                vec![i, a],
                Expr::field(FieldSym::new(FieldBase::PhiVel(i, a))),
                Expr::field(phi(i).derive(a)),
            ));
            rows.push(PdeRow::new(
                RowKind::MomentumDefinition,
                vec![a, i],
                Expr::field(FieldSym::new(FieldBase::Psi(a, i))),
                along_field(&differentiate(&l, VarRef::V(i, a)), Along::Independent),
            ));
        }
        let div: Expr = (1..=p.k)
            .map(|a| Expr::field(FieldSym::new(FieldBase::Psi(a, i)).derive(a)))
            .sum();
        rows.push(PdeRow::new(
            RowKind::Balance,
            vec![i],
            div,
            along_field(&differentiate(&l, VarRef::Q(i)), Along::Independent),
        ));
    }
    rows
}

/// Implicit Euler-Lagrange equations on the Pontryagin bundle.
pub fn derive_implicit_el(p: &LagrangianProblem) -> PdeSystem {
    PdeSystem::new(SystemKind::ImplicitEl, p.n, p.k, implicit_rows(p))
}

fn constraints_of(p: &LagrangianProblem) -> Result<&crate::equations::ConstraintSet> {
    let cs = p
        .constraints
        .as_ref()
        .ok_or_else(|| Error::Problem("the problem declares no constraints".into()))?;
    cs.check_rank(p.n, p.k, &p.param_assignment(), RANK_PROBE_SEED)?;
    Ok(cs)
}

/// Nonholonomic implicit Euler-Lagrange equations.
pub fn derive_nh_implicit_el(p: &LagrangianProblem) -> Result<PdeSystem> {
    let cs = constraints_of(p)?;
    let mut rows = implicit_rows(p);
    for row in rows.iter_mut().filter(|r| r.kind == RowKind::Balance) {
        let i = row.index[0];
        for (a_idx, form) in cs.eta.iter().enumerate() {
            for (a0, slot) in form.iter().enumerate() {
                let c = along_field(&slot[i - 1], Along::Independent).simplify();
                if !c.is_zero() {
                    row.multipliers.push(((a_idx + 1, a0 + 1), c));
                }
            }
        }
    }
    for (a_idx, f) in cs.phi.iter().enumerate() {
        rows.push(PdeRow::new(
            RowKind::Constraint,
            vec![a_idx + 1],
            along_field(f, Along::Independent),
            Expr::zero(),
        ));
    }
    Ok(PdeSystem::new(SystemKind::NhImplicitEl, p.n, p.k, rows))
}

fn hdw_rows(h: &Expr, n: usize, k: usize) -> Result<Vec<PdeRow>> {
    for v in h.vars() {
        v.check_bounds(n, k)?;
        if !matches!(v, VarRef::Q(_) | VarRef::P(..)) {
            return Err(Error::VariableRole(format!("the Hamiltonian may depend on q and p only, found `{v}`")));
        }
    }
    let mut rows = Vec::new();
    for i in 1..=n {
        for a in 1..=k {
            rows.push(PdeRow::new(
                RowKind::HdwPosition,
                vec![i, a],
                Expr::field(phi(i).derive(a)),
                along_field(&differentiate(h, VarRef::P(a, i)), Along::Independent),
            ));
        }
        let div: Expr = (1..=k)
            .map(|a| Expr::field(FieldSym::new(FieldBase::Psi(a, i)).derive(a)))
            .sum();
        rows.push(PdeRow::new(
            RowKind::HdwMomentum,
            vec![i],
            div,
            -along_field(&differentiate(h, VarRef::Q(i)), Along::Independent),
        ));
    }
    Ok(rows)
}

/// Hamilton-De Donder-Weyl equations of `H(q, p)`.
pub fn derive_hdw(h: &Expr, n: usize, k: usize) -> Result<PdeSystem> {
    Ok(PdeSystem::new(SystemKind::Hdw, n, k, hdw_rows(h, n, k)?))
}

/// Nonholonomic HdDW equations for a hyperregular constrained Lagrangian.
pub fn derive_nh_hdw(p: &LagrangianProblem) -> Result<PdeSystem> {
    let cs = constraints_of(p)?;
    let h = hamiltonian_from_lagrangian(p)?;
    let mut inverse = BTreeMap::new();
    for i in 1..=p.n {
        for a in 1..=p.k {
            inverse.insert(Sym::Var(VarRef::V(i, a)), differentiate(&h, VarRef::P(a, i)).simplify());
        }
    }
    let on_momenta = |e: &Expr| along_field(&e.substitute(&inverse), Along::Independent).simplify();
    let mut rows = hdw_rows(&h, p.n, p.k)?;
    for row in rows.iter_mut().filter(|r| r.kind == RowKind::HdwMomentum) {
        let i = row.index[0];
        for (a_idx, form) in cs.eta.iter().enumerate() {
            for (a0, slot) in form.iter().enumerate() {
                let c = on_momenta(&slot[i - 1]);
                if !c.is_zero() {
                    row.multipliers.push(((a_idx + 1, a0 + 1), c));
                }
            }
        }
    }
    for (a_idx, f) in cs.phi.iter().enumerate() {
        rows.push(PdeRow::new(RowKind::Constraint, vec![a_idx + 1], on_momenta(f), Expr::zero()));
    }
    Ok(PdeSystem::new(SystemKind::NhHdw, p.n, p.k, rows))
}

fn map_row(row: &PdeRow, kind: RowKind, f: &dyn Fn(&Expr) -> Result<Expr>) -> Result<PdeRow> {
    let mut out = PdeRow::new(kind, row.index.clone(), f(&row.lhs)?, f(&row.rhs)?);
    for (m, c) in &row.multipliers {
        out.multipliers.push((*m, f(c)?.simplify()));
    }
    Ok(out)
}

/// Eliminates velocity and momentum definitions from an implicit system,
/// leaving balance rows in the second jet of `phi` plus any constraint rows.
pub fn eliminate_implicit(sys: &PdeSystem) -> Result<Vec<PdeRow>> {
    let mut momenta = BTreeMap::new();
    for r in sys.rows_of(RowKind::MomentumDefinition) {
        momenta.insert((r.index[0], r.index[1]), r.rhs.clone());
    }
    let velocity = |b: &FieldBase| match b {
        FieldBase::PhiVel(i, a) => Some(Expr::field(phi(*i).derive(*a))),
        _ => None,
    };
    let momentum = |b: &FieldBase| match b {
        FieldBase::Psi(a, i) => momenta.get(&(*a, *i)).cloned(),
        _ => None,
    };
    let reduce = |e: &Expr| -> Result<Expr> {
        let e = substitute_field(e, &momentum)?;
        substitute_field(&e, &velocity)
    };
    sys.rows
        .iter()
        .filter(|r| matches!(r.kind, RowKind::Balance | RowKind::Constraint))
        .map(|r| map_row(r, r.kind, &reduce))
        .collect()
}

/// Maps `psi ↦ FL(j¹phi)` in an HdDW system. Position rows must reduce to
/// identities; momentum rows become balance rows.
pub fn eliminate_hdw(sys: &PdeSystem, fl: &LegendreMap) -> Result<Vec<PdeRow>> {
    let momentum = |b: &FieldBase| match b {
        FieldBase::Psi(a, i) => Some(along_field(fl.get(*a, *i), Along::Jet)),
        _ => None,
    };
    let reduce = |e: &Expr| substitute_field(e, &momentum);
    let mut out = Vec::new();
    for r in &sys.rows {
        match r.kind {
            RowKind::HdwPosition => {
                let reduced = map_row(r, r.kind, &reduce)?;
                if !crate::symexpr::equivalent(&reduced.residual(), &Expr::zero())?.equal {
                    return Err(Error::Domain(format!(
                        "hdw-position row {:?} is not an identity under the Legendre map",
                        r.index
                    )));
                }
            }
            RowKind::HdwMomentum => out.push(map_row(r, RowKind::Balance, &reduce)?),
            RowKind::Constraint => out.push(map_row(r, RowKind::Constraint, &reduce)?),
            _ => {}
        }
    }
    Ok(out)
}
