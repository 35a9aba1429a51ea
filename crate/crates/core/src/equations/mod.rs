//! Field equations derived from Lagrangians and Hamiltonians, and the
//! intrinsic one-form residuals evaluated on discrete fields.

mod constraints;
mod derive;
mod render;
mod residual;

use std::collections::BTreeMap;

pub use constraints::{distribution_constraints, ConstraintSet, MultiplierField};
pub use derive::{
    derive_el, derive_hdw, derive_implicit_el, derive_nh_hdw, derive_nh_implicit_el, eliminate_hdw,
    eliminate_implicit, substitute_field, total_derivative,
};
pub use render::{parse_system_text, ParsedRow};
pub use residual::{
    intrinsic_residual, legendre_field, pontryagin_field, ResidualKind, ResidualReport, ResidualSource,
};

use crate::symexpr::{Expr, FieldBase, FieldSym, Sym, VarRef};

/// Classification of a row of a PDE system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowKind {
    VelocityDefinition,
    MomentumDefinition,
    Balance,
    Constraint,
    HdwPosition,
    HdwMomentum,
}

impl RowKind {
    pub fn name(&self) -> &'static str {
        match self {
            RowKind::VelocityDefinition => "velocity-definition",
            RowKind::MomentumDefinition => "momentum-definition",
            RowKind::Balance => "balance",
            RowKind::Constraint => "constraint",
            RowKind::HdwPosition => "hdw-position",
            RowKind::HdwMomentum => "hdw-momentum",
        }
    }

    pub fn from_name(s: &str) -> Option<RowKind> {
        Some(match s {
            "velocity-definition" => RowKind::VelocityDefinition,
            "momentum-definition" => RowKind::MomentumDefinition,
            "balance" => RowKind::Balance,
            "constraint" => RowKind::Constraint,
            "hdw-position" => RowKind::HdwPosition,
            "hdw-momentum" => RowKind::HdwMomentum,
            _ => return None,
        })
    }
}

/// One equation `lhs = rhs + Σ mult[A,a] · coefficient`.
#[derive(Clone, Debug, PartialEq)]
pub struct PdeRow {
    pub kind: RowKind,
    /// `[i]` for balance rows, `[i,a]` for velocities, `[a,i]` for momenta, `[A]` for constraints.
    pub index: Vec<usize>,
    pub lhs: Expr,
    pub rhs: Expr,
    /// `((A, a), coefficient)`.
    pub multipliers: Vec<((usize, usize), Expr)>,
}

impl PdeRow {
    pub fn new(kind: RowKind, index: Vec<usize>, lhs: Expr, rhs: Expr) -> Self {
        PdeRow { kind, index, lhs: lhs.simplify(), rhs: rhs.simplify(), multipliers: Vec::new() }
    }

    /// `lhs - rhs - Σ mult · coefficient`.
    pub fn residual(&self) -> Expr {
        let mut terms = vec![self.lhs.clone(), -self.rhs.clone()];
        for ((a_idx, a), c) in &self.multipliers {
            terms.push(-(mult(*a_idx, *a) * c.clone()));
        }
        Expr::add_all(terms).simplify()
    }
}

/// Which family of equations a system belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    El,
    ImplicitEl,
    NhImplicitEl,
    Hdw,
    NhHdw,
}

impl SystemKind {
    pub fn name(&self) -> &'static str {
        match self {
            SystemKind::El => "el",
            SystemKind::ImplicitEl => "implicit-el",
            SystemKind::NhImplicitEl => "nh-el",
            SystemKind::Hdw => "hdw",
            SystemKind::NhHdw => "nh-hdw",
        }
    }

    pub fn from_name(s: &str) -> Option<SystemKind> {
        Some(match s {
            "el" => SystemKind::El,
            "implicit-el" => SystemKind::ImplicitEl,
            "nh-el" => SystemKind::NhImplicitEl,
            "hdw" => SystemKind::Hdw,
            "nh-hdw" => SystemKind::NhHdw,
            _ => return None,
        })
    }
}

/// Classified list of field equations.
#[derive(Clone, Debug, PartialEq)]
pub struct PdeSystem {
    pub kind: SystemKind,
    pub n: usize,
    pub k: usize,
    pub rows: Vec<PdeRow>,
}

impl PdeSystem {
    pub fn new(kind: SystemKind, n: usize, k: usize, mut rows: Vec<PdeRow>) -> Self {
        rows.sort_by(|a, b| (a.kind, &a.index).cmp(&(b.kind, &b.index)));
        PdeSystem { kind, n, k, rows }
    }

    pub fn rows_of(&self, kind: RowKind) -> impl Iterator<Item = &PdeRow> {
        self.rows.iter().filter(move |r| r.kind == kind)
    }

    pub fn row(&self, kind: RowKind, index: &[usize]) -> Option<&PdeRow> {
        self.rows.iter().find(|r| r.kind == kind && r.index == index)
    }

    pub fn count(&self, kind: RowKind) -> usize {
        self.rows_of(kind).count()
    }

    /// Text rendering, one row per line.
    pub fn to_text(&self) -> String {
        render::to_text(self)
    }

    /// Key-value tree rendering.
    pub fn to_tree(&self) -> serde_json::Value {
        render::to_tree(self)
    }
}

pub(crate) fn phi(i: usize) -> FieldSym {
    FieldSym::new(FieldBase::Phi(i))
}

pub(crate) fn mult(a_idx: usize, a: usize) -> Expr {
    Expr::field(FieldSym::new(FieldBase::Mult(a_idx, a)))
}

/// Kind of substitution from chart variables to field symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Along {
    /// `v^i_a ↦ d/dx[a](phi[i])`.
    Jet,
    /// `v^i_a ↦ phi[i,a]`.
    Independent,
}

/// Evaluates a chart expression along a field: `q ↦ phi`, `v ↦ ...`, `p ↦ psi`.
pub(crate) fn along_field(e: &Expr, how: Along) -> Expr {
    e.map_syms(&|s| match s {
        Sym::Var(VarRef::Q(i)) => Some(Expr::field(phi(*i))),
        Sym::Var(VarRef::V(i, a)) => Some(match how {
            Along::Jet => Expr::field(phi(*i).derive(*a)),
            Along::Independent => Expr::field(FieldSym::new(FieldBase::PhiVel(*i, *a))),
        }),
        Sym::Var(VarRef::P(a, i)) => Some(Expr::field(FieldSym::new(FieldBase::Psi(*a, *i)))),
        _ => None,
    })
}

/// Rows matched by kind and index; returns the first mismatching row label.
pub fn compare_systems(a: &[PdeRow], b: &[PdeRow]) -> crate::Result<Option<String>> {
    let key = |r: &PdeRow| (r.kind, r.index.clone());
    let bm: BTreeMap<_, _> = b.iter().map(|r| (key(r), r)).collect();
    if a.len() != b.len() {
        return Ok(Some(format!("row counts differ: {} vs {}", a.len(), b.len())));
    }
    for r in a {
        let Some(other) = bm.get(&key(r)) else {
            return Ok(Some(format!("{}{:?} missing", r.kind.name(), r.index)));
        };
        if !crate::symexpr::equivalent(&r.residual(), &other.residual())?.equal {
            return Ok(Some(format!("{}{:?} differs", r.kind.name(), r.index)));
        }
    }
    Ok(None)
}
