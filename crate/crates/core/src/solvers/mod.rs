//! Finite-difference solvers for the elasticity and rod examples, and
//! evaluation of derived PDE rows on sampled fields.

mod cg;
mod cosserat;
mod navier;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

pub use cg::{conjugate_gradient, CgOutcome};
pub use cosserat::{solve_cosserat, CosseratInitial, CosseratProblem, CosseratRun};
pub use navier::{manufactured_body_force, solve_navier, EllipticProblem};

use crate::equations::{MultiplierField, PdeSystem};
use crate::geometry::DiscreteField;
use crate::symexpr::{evaluate, Assignment, FieldBase, FieldSym, Sym, VarRef};
use crate::{Error, Result};

/// Outcome of a solver run.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub field: DiscreteField,
    pub multipliers: Option<MultiplierField>,
    pub iterations: usize,
    /// Final relative residual of the linear solver.
    pub linear_residual: f64,
    /// Per-step maximum constraint violation.
    pub constraint_violation: Vec<f64>,
    /// Named scalar metrics in insertion-independent order.
    pub metrics: BTreeMap<String, f64>,
}

impl SolveReport {
    /// Flat `key = value` text with 17 significant digits.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "iterations = {}", self.iterations);
        let _ = writeln!(out, "linear_residual = {}", fmt17(self.linear_residual));
        if !self.constraint_violation.is_empty() {
            let worst = self.constraint_violation.iter().cloned().fold(0.0, f64::max);
            let _ = writeln!(out, "steps = {}", self.constraint_violation.len());
            let _ = writeln!(out, "constraint_violation_max = {}", fmt17(worst));
        }
        for (k, v) in &self.metrics {
            let _ = writeln!(out, "{k} = {}", fmt17(*v));
        }
        out
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Interior norms of one row of a system.
#[derive(Clone, Debug, PartialEq)]
pub struct RowNorm {
    pub label: String,
    pub max: f64,
    pub rms: f64,
}

fn coordinate_of(base: &FieldBase) -> Option<VarRef> {
    match *base {
        FieldBase::Phi(i) => Some(VarRef::Q(i)),
        FieldBase::PhiVel(i, a) => Some(VarRef::V(i, a)),
        FieldBase::Psi(a, i) => Some(VarRef::P(a, i)),
        FieldBase::Mult(..) => None,
    }
}

/// Evaluates every row residual `lhs - rhs - Σ mult·coef` at interior nodes,
/// replacing total derivatives by centered differences.
pub fn evaluate_residual_field(
    sys: &PdeSystem,
    field: &DiscreteField,
    multipliers: Option<&MultiplierField>,
    params: &Assignment,
) -> Result<Vec<RowNorm>> {
    let values = row_values(sys, field, multipliers, params)?;
    let count = values.len().max(1) as f64;
    let mut max = vec![0.0f64; sys.rows.len()];
    let mut sumsq = vec![0.0f64; sys.rows.len()];
    for (_, row) in &values {
        for (r, v) in row.iter().enumerate() {
            max[r] = max[r].max(v.abs());
            sumsq[r] += v * v;
        }
    }
    Ok(sys
        .rows
        .iter()
        .enumerate()
        .map(|(r, row)| RowNorm { label: row_label(row), max: max[r], rms: (sumsq[r] / count).sqrt() })
        .collect())
}

/// Row residuals at every interior node, as `(node, values in row order)`.
pub(crate) fn row_values(
    sys: &PdeSystem,
    field: &DiscreteField,
    multipliers: Option<&MultiplierField>,
    params: &Assignment,
) -> Result<Vec<(usize, Vec<f64>)>> {
    if field.chart.n != sys.n || field.chart.k != sys.k {
        return Err(Error::ChartMismatch(format!(
            "system has n={}, k={} but the field lives on {}",
            sys.n, sys.k, field.chart
        )));
    }
    let residuals: Vec<_> = sys.rows.iter().map(|r| r.residual()).collect();
    let mut symbols = BTreeSet::new();
    for r in &residuals {
        for s in r.symbols() {
            if let Sym::Field(fs) = s {
                symbols.insert(fs);
            }
        }
    }
    let grid = &field.grid;
    let mut nodal: Vec<(FieldSym, Vec<f64>)> = Vec::new();
    for fs in &symbols {
        if let FieldBase::Mult(a_idx, a) = fs.base {
            let mf = multipliers.ok_or_else(|| Error::MissingMultipliers(sys.kind.name().into()))?;
            if mf.grid != *grid || a_idx > mf.m || a > mf.k || !fs.derivs.is_empty() {
                return Err(Error::ChartMismatch(format!("multiplier field cannot supply `{fs}`")));
            }
            nodal.push((fs.clone(), (0..grid.len()).map(|n| mf.get(n, a_idx, a)).collect()));
            continue;
        }
        let coord = coordinate_of(&fs.base).expect("non-multiplier base");
        let data = field.component(&coord).map_err(|_| {
            Error::ChartMismatch(format!("`{fs}` needs coordinate {coord} missing from {}", field.chart))
        })?;
        let values = match fs.derivs.as_slice() {
            [] => data,
            [a] => (0..grid.len()).map(|n| grid.derivative(|m| data[m], n, a - 1)).collect(),
            [a, b] => (0..grid.len())
                .map(|n| {
                    if grid.is_boundary(n) {
                        f64::NAN
                    } else {
                        grid.second_derivative(|m| data[m], n, a - 1, b - 1)
                    }
                })
                .collect(),
            _ => return Err(Error::UnsupportedForm(format!("`{fs}` has more than two derivatives"))),
        };
        nodal.push((fs.clone(), values));
    }
    let interior: Vec<usize> = grid.interior_nodes().collect();
    crate::parallel::map_ordered(&interior, |node| {
        let mut asg = field.assignment(node);
        asg.extend(params);
        for (fs, vals) in &nodal {
            asg.set(Sym::Field(fs.clone()), vals[node]);
        }
        let row = residuals.iter().map(|e| evaluate(e, &asg)).collect::<Result<Vec<_>>>()?;
        Ok((node, row))
    })
}

fn row_label(row: &crate::equations::PdeRow) -> String {
    let idx: Vec<String> = row.index.iter().map(|i| i.to_string()).collect();
    format!("{}[{}]", row.kind.name(), idx.join(","))
}
