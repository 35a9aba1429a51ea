use std::collections::BTreeMap;

use super::MultiplierField;
use crate::calculus::{build_chi, build_lambda, CoordForm};
use crate::geometry::{Bundle, Chart, DiscreteField, Stencil};
use crate::mechanics::{generalized_energy, legendre_map, EnergyFlavor, LagrangianProblem};
use crate::symexpr::{evaluate, Assignment, Expr, FieldBase, FieldSym, Sym, VarRef};
use crate::{Error, Result};

/// Which intrinsic one-form difference to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualKind {
    /// `λ - (T¹ₖπ)*dL` on a field in `(T¹ₖ)*Q`.
    LambdaEl,
    /// `χ - dE` on a field in the Pontryagin bundle.
    ChiImplicit,
    /// `χ - dE + λ^A_a η^a_A` on a field in the Pontryagin bundle.
    ChiNonholonomic,
    /// `χ - dH` on a field in `(T¹ₖ)*Q`.
    ChiHdw,
}

impl ResidualKind {
    pub fn name(&self) -> &'static str {
        match self {
            ResidualKind::LambdaEl => "lambda-el",
            ResidualKind::ChiImplicit => "chi-implicit",
            ResidualKind::ChiNonholonomic => "chi-nonholonomic",
            ResidualKind::ChiHdw => "chi-hdw",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "lambda-el" => ResidualKind::LambdaEl,
            "chi-implicit" => ResidualKind::ChiImplicit,
            "chi-nonholonomic" => ResidualKind::ChiNonholonomic,
            "chi-hdw" => ResidualKind::ChiHdw,
            _ => return None,
        })
    }

    fn field_bundle(&self) -> Bundle {
        match self {
            ResidualKind::LambdaEl | ResidualKind::ChiHdw => Bundle::Cotangent,
            _ => Bundle::Pontryagin,
        }
    }
}

/// Where the energy function of a residual comes from.
#[derive(Clone, Copy, Debug)]
pub enum ResidualSource<'a> {
    Lagrangian(&'a LagrangianProblem),
    Hamiltonian { h: &'a Expr, n: usize, k: usize, params: &'a Assignment },
}

impl ResidualSource<'_> {
    fn dims(&self) -> (usize, usize) {
        match self {
            ResidualSource::Lagrangian(p) => (p.n, p.k),
            ResidualSource::Hamiltonian { n, k, .. } => (*n, *k),
        }
    }

    fn params(&self) -> Assignment {
        match self {
            ResidualSource::Lagrangian(p) => p.param_assignment(),
            ResidualSource::Hamiltonian { params, .. } => (*params).clone(),
        }
    }
}

/// Per-node coefficients of a residual one-form and their interior norms.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub kind: ResidualKind,
    /// Covector label of every reported coefficient, e.g. `dq[1]`.
    pub labels: Vec<String>,
    /// Group of every coefficient: `balance`, `momentum`, `velocity`, `position`, `constraint`.
    pub groups: Vec<String>,
    /// `table[node][coefficient]` over all grid nodes.
    pub table: Vec<Vec<f64>>,
    pub interior_max: Vec<f64>,
    pub interior_rms: Vec<f64>,
    pub group_max: BTreeMap<String, f64>,
    pub group_rms: BTreeMap<String, f64>,
    pub max_norm: f64,
    pub rms: f64,
}

fn group_of(kind: ResidualKind, basis: &VarRef) -> &'static str {
    match (kind, basis) {
        (_, VarRef::Q(_)) => "balance",
        (ResidualKind::LambdaEl, VarRef::W(..)) => "momentum",
        (ResidualKind::ChiHdw, VarRef::P(..)) => "position",
        (_, VarRef::P(..)) => "velocity",
        (_, VarRef::V(..)) => "momentum",
        _ => "other",
    }
}

fn expected_roles(kind: ResidualKind) -> &'static [char] {
    match kind {
        ResidualKind::LambdaEl => &['q', 'w'],
        ResidualKind::ChiHdw => &['q', 'p'],
        _ => &['q', 'v', 'p'],
    }
}

fn energy_form(kind: ResidualKind, src: &ResidualSource, target: Chart) -> Result<CoordForm> {
    let energy = match (kind, src) {
        (ResidualKind::LambdaEl, ResidualSource::Lagrangian(p)) => {
            let to_w: BTreeMap<Sym, Expr> = p
                .velocities()
                .into_iter()
                .map(|v| {
                    let VarRef::V(i, a) = v else { unreachable!() };
                    (Sym::Var(v), Expr::var(VarRef::W(i, a)))
                })
                .collect();
            p.full_lagrangian().substitute(&to_w)
        }
        (ResidualKind::ChiImplicit | ResidualKind::ChiNonholonomic, ResidualSource::Lagrangian(p)) => {
            generalized_energy(p, EnergyFlavor::Pontryagin)
        }
        (ResidualKind::ChiHdw, ResidualSource::Hamiltonian { h, .. }) => (*h).clone(),
        (kind, _) => {
            return Err(Error::Problem(format!(
                "residual `{}` needs a {}",
                kind.name(),
                if kind == ResidualKind::ChiHdw { "Hamiltonian" } else { "Lagrangian" }
            )))
        }
    };
    CoordForm::function(target, energy).d()
}

/// Evaluates an intrinsic residual one-form along the discrete prolongation of `field`.
pub fn intrinsic_residual(
    kind: ResidualKind,
    src: ResidualSource,
    field: &DiscreteField,
    multipliers: Option<&MultiplierField>,
) -> Result<ResidualReport> {
    let (n, k) = src.dims();
    if field.chart.bundle != kind.field_bundle() || field.chart.n != n || field.chart.k != k {
        return Err(Error::ChartMismatch(format!(
            "`{}` needs a field on {}(n={n}, k={k}), got {}",
            kind.name(),
            kind.field_bundle(),
            field.chart
        )));
    }
    let target = field.chart.prolonged()?;
    let canonical = match kind {
        ResidualKind::LambdaEl => build_lambda(n, k)?,
        _ => build_chi(n, k)?,
    }
    .rechart(target)?;
    let mut form = canonical.sub(&energy_form(kind, &src, target)?)?;
    let mut constraint_rows = Vec::new();
    if kind == ResidualKind::ChiNonholonomic {
        let ResidualSource::Lagrangian(p) = src else { unreachable!() };
        let mf = multipliers.ok_or_else(|| Error::MissingMultipliers(kind.name().into()))?;
        let cs = p
            .constraints
            .as_ref()
            .ok_or_else(|| Error::Problem("the problem declares no constraints".into()))?;
        if mf.m != cs.m() || mf.k != k || mf.grid != field.grid {
            return Err(Error::ChartMismatch("multiplier field does not match the problem and grid".into()));
        }
        let mut extra = CoordForm::zero(target, 1);
        for (a_idx, slots) in cs.eta.iter().enumerate() {
            for (a0, coefs) in slots.iter().enumerate() {
                let lam = Expr::field(FieldSym::new(FieldBase::Mult(a_idx + 1, a0 + 1)));
                for (i0, c) in coefs.iter().enumerate() {
                    extra.add_term(vec![VarRef::Q(i0 + 1)], lam.clone() * c.clone());
                }
            }
        }
        form = form.add(&extra)?;
        constraint_rows = cs.phi.clone();
    }

    let roles = expected_roles(kind);
    let mut labels = Vec::new();
    let mut groups = Vec::new();
    let mut coefs = Vec::new();
    for y in target.coords() {
        let c = form.coefficient(&[y]);
        if roles.contains(&y.role()) || !c.is_zero() {
            labels.push(format!("d{y}"));
            groups.push(group_of(kind, &y).to_string());
            coefs.push(c);
        }
    }
    for (a_idx, phi) in constraint_rows.into_iter().enumerate() {
        labels.push(format!("Phi[{}]", a_idx + 1));
        groups.push("constraint".to_string());
        coefs.push(phi);
    }

    let prolonged = field.prolong(Stencil::Centered)?;
    let params = src.params();
    let nodes: Vec<usize> = (0..field.grid.len()).collect();
    let table = crate::parallel::map_ordered(&nodes, |node| {
        let mut asg = prolonged.assignment(node);
        asg.extend(&params);
        if let Some(mf) = multipliers {
            for a_idx in 1..=mf.m {
                for a in 1..=mf.k {
                    let s = Sym::Field(FieldSym::new(FieldBase::Mult(a_idx, a)));
                    asg.set(s, mf.get(node, a_idx, a));
                }
            }
        }
        coefs.iter().map(|c| evaluate(c, &asg)).collect::<Result<Vec<_>>>()
    })?;
    Ok(summarize(kind, labels, groups, table, &field.grid))
}

fn summarize(
    kind: ResidualKind,
    labels: Vec<String>,
    groups: Vec<String>,
    table: Vec<Vec<f64>>,
    grid: &crate::geometry::Grid,
) -> ResidualReport {
    let interior: Vec<usize> = grid.interior_nodes().collect();
    let count = interior.len().max(1) as f64;
    let ncoef = labels.len();
    let mut interior_max = vec![0.0f64; ncoef];
    let mut sumsq = vec![0.0f64; ncoef];
    for &node in &interior {
        for (c, v) in table[node].iter().enumerate() {
            interior_max[c] = interior_max[c].max(v.abs());
            sumsq[c] += v * v;
        }
    }
    let interior_rms: Vec<f64> = sumsq.iter().map(|s| (s / count).sqrt()).collect();
    let mut group_max = BTreeMap::new();
    let mut group_sq: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (c, g) in groups.iter().enumerate() {
        let e = group_max.entry(g.clone()).or_insert(0.0f64);
        *e = e.max(interior_max[c]);
        let s = group_sq.entry(g.clone()).or_insert((0.0, 0));
        s.0 += sumsq[c];
        s.1 += 1;
    }
    let group_rms = group_sq
        .into_iter()
        .map(|(g, (s, m))| (g, (s / (count * m as f64)).sqrt()))
        .collect();
    let max_norm = interior_max.iter().cloned().fold(0.0, f64::max);
    let rms = (sumsq.iter().sum::<f64>() / (count * ncoef.max(1) as f64)).sqrt();
    ResidualReport { kind, labels, groups, table, interior_max, interior_rms, group_max, group_rms, max_norm, rms }
}

fn check_base(p: &LagrangianProblem, base: &DiscreteField) -> Result<()> {
    if base.chart.bundle != Bundle::Base || base.chart.n != p.n || base.chart.k != p.k {
        return Err(Error::ChartMismatch(format!(
            "expected a field on base(n={}, k={}), got {}",
            p.n, p.k, base.chart
        )));
    }
    Ok(())
}

/// `ψ = FL ∘ φ^(1)`: a `(T¹ₖ)*Q` field from a field on `Q`.
pub fn legendre_field(p: &LagrangianProblem, base: &DiscreteField) -> Result<DiscreteField> {
    build_mapped(p, base, Bundle::Cotangent)
}

/// `(φ, φ^(1), FL ∘ φ^(1))`: a Pontryagin field from a field on `Q`.
pub fn pontryagin_field(p: &LagrangianProblem, base: &DiscreteField) -> Result<DiscreteField> {
    build_mapped(p, base, Bundle::Pontryagin)
}

fn build_mapped(p: &LagrangianProblem, base: &DiscreteField, bundle: Bundle) -> Result<DiscreteField> {
    check_base(p, base)?;
    let tangent = base.prolong(Stencil::Centered)?;
    let fl = legendre_map(p);
    let chart = base.chart.with_bundle(bundle);
    let mut out = DiscreteField::zeros(chart, base.grid.clone())?;
    let params = p.param_assignment();
    for node in 0..base.grid.len() {
        let mut asg = tangent.assignment(node);
        asg.extend(&params);
        for y in chart.coords() {
            let value = match y {
                VarRef::P(a, i) => evaluate(fl.get(a, i), &asg)?,
                other => tangent.get(node, &other)?,
            };
            out.set(node, &y, value)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;
    use crate::mechanics::hamiltonian_from_lagrangian;
    use crate::symexpr::parse_with;

    const NAVIER: &str = "(lam/2+mu)*(v[1,1]^2+v[2,2]^2)+mu/2*(v[1,2]^2+v[2,1]^2)+(lam+mu)*v[1,1]*v[2,2]";

    fn navier() -> LagrangianProblem {
        LagrangianProblem::parse(2, 2, NAVIER).unwrap().with_param("lam", 1.0).with_param("mu", 1.0)
    }

    fn linear_field(p: &LagrangianProblem) -> DiscreteField {
        let chart = Chart::new(2, 2, Bundle::Base).unwrap();
        let exprs = vec![
            (VarRef::Q(1), parse_with("x[1]+2*x[2]", 2, 2).unwrap()),
            (VarRef::Q(2), parse_with("3*x[1]-x[2]", 2, 2).unwrap()),
        ];
        DiscreteField::from_exprs(chart, Grid::unit(2, 9).unwrap(), &exprs, &p.param_assignment()).unwrap()
    }

    #[test]
    fn linear_solution_has_zero_residual_in_every_form() {
        let p = navier();
        let base = linear_field(&p);
        let cot = legendre_field(&p, &base).unwrap();
        let rep = intrinsic_residual(ResidualKind::LambdaEl, ResidualSource::Lagrangian(&p), &cot, None).unwrap();
        assert!(rep.max_norm < 1e-12, "{}", rep.max_norm);
        assert_eq!(rep.labels, vec!["dq[1]", "dq[2]", "dw[1,1]", "dw[2,1]", "dw[1,2]", "dw[2,2]"]);
        let pont = pontryagin_field(&p, &base).unwrap();
        let rep = intrinsic_residual(ResidualKind::ChiImplicit, ResidualSource::Lagrangian(&p), &pont, None).unwrap();
        assert!(rep.max_norm < 1e-12);
        assert_eq!(rep.group_max.keys().collect::<Vec<_>>(), vec!["balance", "momentum", "velocity"]);
        let h = hamiltonian_from_lagrangian(&p).unwrap();
        let params = p.param_assignment();
        let src = ResidualSource::Hamiltonian { h: &h, n: 2, k: 2, params: &params };
        let rep = intrinsic_residual(ResidualKind::ChiHdw, src, &cot, None).unwrap();
        assert!(rep.max_norm < 1e-12);
    }

    #[test]
    fn wrong_bundle_is_a_chart_mismatch() {
        let p = navier();
        let base = linear_field(&p);
        let res = intrinsic_residual(ResidualKind::LambdaEl, ResidualSource::Lagrangian(&p), &base, None);
        assert!(matches!(res, Err(Error::ChartMismatch(_))));
    }

    #[test]
    fn nonholonomic_residual_needs_multipliers() {
        let items = vec![("v[1,1]".to_string(), vec!["dq[1]".to_string()])];
        let p = LagrangianProblem::parse(1, 1, "v[1,1]^2/2")
            .unwrap()
            .with_constraints(crate::equations::ConstraintSet::parse(1, 1, &items).unwrap())
            .unwrap();
        let chart = Chart::new(1, 1, Bundle::Base).unwrap();
        let base = DiscreteField::zeros(chart, Grid::unit(1, 5).unwrap()).unwrap();
        let pont = pontryagin_field(&p, &base).unwrap();
        let res = intrinsic_residual(ResidualKind::ChiNonholonomic, ResidualSource::Lagrangian(&p), &pont, None);
        assert!(matches!(res, Err(Error::MissingMultipliers(_))));
    }

    #[test]
    fn quadratic_field_has_the_expected_balance_defect() {
        // φ = x²/2 for L = v²/2: D(∂L/∂v) = 1, so the balance coefficient is -1.
        let p = LagrangianProblem::parse(1, 1, "v[1,1]^2/2").unwrap();
        let chart = Chart::new(1, 1, Bundle::Base).unwrap();
        let exprs = vec![(VarRef::Q(1), parse_with("x[1]^2/2", 1, 1).unwrap())];
        let base = DiscreteField::from_exprs(chart, Grid::unit(1, 11).unwrap(), &exprs, &Default::default()).unwrap();
        let cot = legendre_field(&p, &base).unwrap();
        let rep = intrinsic_residual(ResidualKind::LambdaEl, ResidualSource::Lagrangian(&p), &cot, None).unwrap();
        assert!((rep.group_max["balance"] - 1.0).abs() < 1e-10);
        assert!(rep.group_max["momentum"] < 1e-12);
    }
}
