//! Lagrangian problems, the Legendre map, regularity and energies.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::Zero;

use crate::equations::ConstraintSet;
use crate::geometry::{Bundle, Chart};
use crate::linalg::{numeric_rank, poly_adjugate, poly_determinant};
use crate::symexpr::{differentiate, evaluate, parse_with, Assignment, Expr, Poly, Sym, VarRef};
use crate::{Error, Result};

/// Relative pivot threshold of the numeric regularity test.
pub const RANK_RTOL: f64 = 1e-10;

/// A first-order Lagrangian field theory with `n` fields over `k` parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianProblem {
    pub n: usize,
    pub k: usize,
    /// Default parameter values.
    pub params: BTreeMap<String, f64>,
    /// `L(q, v)`.
    pub lagrangian: Expr,
    /// Optional forcing `f_i(x, q)` entering the Lagrangian as `Σ f_i q^i`.
    pub body_force: Option<Vec<Expr>>,
    pub constraints: Option<ConstraintSet>,
}

impl LagrangianProblem {
    pub fn new(n: usize, k: usize, lagrangian: Expr) -> Result<Self> {
        Chart::new(n, k, Bundle::Tangent)?;
        for v in lagrangian.vars() {
            v.check_bounds(n, k)?;
            if !matches!(v, VarRef::Q(_) | VarRef::V(..)) {
                return Err(Error::VariableRole(format!(
                    "the Lagrangian may depend on q and v only, found `{v}`"
                )));
            }
        }
        if lagrangian.symbols().iter().any(|s| matches!(s, Sym::Field(_))) {
            return Err(Error::VariableRole("the Lagrangian contains field symbols".into()));
        }
        Ok(LagrangianProblem {
            n,
            k,
            params: BTreeMap::new(),
            lagrangian,
            body_force: None,
            constraints: None,
        })
    }

    /// Parses the Lagrangian from text.
    pub fn parse(n: usize, k: usize, lagrangian: &str) -> Result<Self> {
        LagrangianProblem::new(n, k, parse_with(lagrangian, n, k)?)
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn with_body_force(mut self, force: Vec<Expr>) -> Result<Self> {
        if force.len() != self.n {
            return Err(Error::Problem(format!("body force needs {} components", self.n)));
        }
        for f in &force {
            if let Some(v) = f.vars().into_iter().find(|v| !matches!(v, VarRef::Q(_) | VarRef::X(_))) {
                return Err(Error::VariableRole(format!("body force depends on `{v}`")));
            }
        }
        self.body_force = Some(force);
        Ok(self)
    }

    pub fn with_constraints(mut self, cs: ConstraintSet) -> Result<Self> {
        cs.check_shape(self.n, self.k)?;
        self.constraints = Some(cs);
        Ok(self)
    }

    pub fn tangent_chart(&self) -> Chart {
        Chart { n: self.n, k: self.k, bundle: Bundle::Tangent }
    }

    /// Velocity variables `v^i_a` in chart order.
    pub fn velocities(&self) -> Vec<VarRef> {
        let mut out = Vec::new();
        for a in 1..=self.k {
            for i in 1..=self.n {
                out.push(VarRef::V(i, a));
            }
        }
        out
    }

    /// `L + Σ f_i q^i`.
    pub fn full_lagrangian(&self) -> Expr {
        match &self.body_force {
            None => self.lagrangian.clone(),
            Some(f) => {
                let mut terms = vec![self.lagrangian.clone()];
                terms.extend(f.iter().enumerate().map(|(i, fi)| fi.clone() * Expr::var(VarRef::Q(i + 1))));
                Expr::add_all(terms)
            }
        }
    }

    pub fn param_assignment(&self) -> Assignment {
        let mut a = Assignment::new();
        for (k, v) in &self.params {
            a.set_param(k, *v);
        }
        a
    }

    /// Substitutes numeric parameter values as exact constants.
    ///
    /// Parameters missing from `values` fall back to the defaults.
    pub fn specialize(&self, values: &BTreeMap<String, f64>) -> Result<LagrangianProblem> {
        let mut map = BTreeMap::new();
        for (name, default) in &self.params {
            let v = values.get(name).copied().unwrap_or(*default);
            let r = BigRational::from_float(v)
                .ok_or_else(|| Error::Domain(format!("parameter `{name}` is not finite")))?;
            map.insert(Sym::Param(name.clone()), Expr::Const(r));
        }
        for (name, v) in values {
            if !self.params.contains_key(name) {
                let r = BigRational::from_float(*v)
                    .ok_or_else(|| Error::Domain(format!("parameter `{name}` is not finite")))?;
                map.insert(Sym::Param(name.clone()), Expr::Const(r));
            }
        }
        let sub = |e: &Expr| e.substitute(&map).simplify();
        Ok(LagrangianProblem {
            n: self.n,
            k: self.k,
            params: BTreeMap::new(),
            lagrangian: sub(&self.lagrangian),
            body_force: self.body_force.as_ref().map(|f| f.iter().map(sub).collect()),
            constraints: self.constraints.as_ref().map(|c| c.map_exprs(&sub)),
        })
    }
}

/// Momenta `P^a_i = ∂L/∂v^i_a`.
#[derive(Clone, Debug, PartialEq)]
pub struct LegendreMap {
    pub n: usize,
    pub k: usize,
    momenta: BTreeMap<(usize, usize), Expr>,
}

impl LegendreMap {
    /// `P^a_i`.
    pub fn get(&self, a: usize, i: usize) -> &Expr {
        &self.momenta[&(a, i)]
    }

    /// Entries keyed by the momentum coordinate `p[a,i]`, in chart order.
    pub fn entries(&self) -> Vec<(VarRef, &Expr)> {
        let mut out = Vec::new();
        for a in 1..=self.k {
            for i in 1..=self.n {
                out.push((VarRef::P(a, i), self.get(a, i)));
            }
        }
        out
    }
}

pub fn legendre_map(p: &LagrangianProblem) -> LegendreMap {
    let l = p.full_lagrangian();
    let mut momenta = BTreeMap::new();
    for a in 1..=p.k {
        for i in 1..=p.n {
            momenta.insert((a, i), differentiate(&l, VarRef::V(i, a)).simplify());
        }
    }
    LegendreMap { n: p.n, k: p.k, momenta }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regularity {
    Regular,
    Singular,
}

/// Velocity Hessian with its determinant and an optional pointwise verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularityReport {
    /// Row and column order of the Hessian.
    pub variables: Vec<VarRef>,
    pub hessian: Vec<Vec<Expr>>,
    /// Exact determinant, `None` when some entry is not polynomial.
    pub determinant: Option<Expr>,
    pub verdict: Option<Regularity>,
    pub rank: Option<usize>,
}

impl RegularityReport {
    /// Determinant text with the common monomial factored out, or `non-polynomial`.
    pub fn determinant_text(&self) -> String {
        match &self.determinant {
            Some(d) => Poly::from_expr(d)
                .map(|p| p.to_factored_expr().to_string())
                .unwrap_or_else(|| d.to_string()),
            None => "non-polynomial".into(),
        }
    }
}

pub fn velocity_hessian(p: &LagrangianProblem, at: Option<&Assignment>) -> Result<RegularityReport> {
    let l = p.full_lagrangian();
    let vars = p.velocities();
    let first: Vec<Expr> = vars.iter().map(|v| differentiate(&l, *v)).collect();
    let hessian: Vec<Vec<Expr>> = first
        .iter()
        .map(|d| vars.iter().map(|w| differentiate(d, *w).simplify()).collect())
        .collect();
    let polys: Option<Vec<Vec<Poly>>> = hessian
        .iter()
        .map(|row| row.iter().map(Poly::from_expr).collect())
        .collect();
    let determinant = polys.map(|m| poly_determinant(&m).to_expr());
    let (verdict, rank) = match at {
        None => (None, None),
        Some(point) => {
            let mut asg = p.param_assignment();
            asg.extend(point);
            let numeric = hessian
                .iter()
                .map(|row| row.iter().map(|e| evaluate(e, &asg)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let r = numeric_rank(&numeric, RANK_RTOL);
            let v = if r == vars.len() { Regularity::Regular } else { Regularity::Singular };
            (Some(v), Some(r))
        }
    };
    Ok(RegularityReport { variables: vars, hessian, determinant, verdict, rank })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyFlavor {
    /// `E = p^a_i v^i_a - L` on the Pontryagin bundle.
    Pontryagin,
    /// `E_L = ∂L/∂v^i_a v^i_a - L` on `T¹ₖQ`.
    Lagrangian,
}

pub fn generalized_energy(p: &LagrangianProblem, flavor: EnergyFlavor) -> Expr {
    let l = p.full_lagrangian();
    let mut terms: Vec<Expr> = Vec::new();
    for v in p.velocities() {
        let VarRef::V(i, a) = v else { unreachable!() };
        let momentum = match flavor {
            EnergyFlavor::Pontryagin => Expr::var(VarRef::P(a, i)),
            EnergyFlavor::Lagrangian => differentiate(&l, v),
        };
        terms.push(momentum * Expr::var(v));
    }
    terms.push(-l);
    Expr::add_all(terms).simplify()
}

/// `H = E_L ∘ FL⁻¹` for Lagrangians whose velocity Hessian is `v`-free.
pub fn hamiltonian_from_lagrangian(p: &LagrangianProblem) -> Result<Expr> {
    let report = velocity_hessian(p, None)?;
    let vars = &report.variables;
    for row in &report.hessian {
        for e in row {
            if e.any_var(|v| matches!(v, VarRef::V(..))) {
                return Err(Error::UnsupportedForm(
                    "the momentum-velocity relation is not linear; only v-quadratic Lagrangians are inverted".into(),
                ));
            }
        }
    }
    let polys: Vec<Vec<Poly>> = report
        .hessian
        .iter()
        .map(|row| row.iter().map(Poly::from_expr).collect::<Option<Vec<_>>>())
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::UnsupportedForm("velocity Hessian entries are not polynomial".into()))?;
    let det = poly_determinant(&polys);
    if det.is_zero() {
        return Err(Error::NotHyperregular("the velocity Hessian is singular".into()));
    }
    if let Some(c) = det.as_constant() {
        if c.is_zero() {
            return Err(Error::NotHyperregular("the velocity Hessian is singular".into()));
        }
    } else if det.terms.keys().all(|m| m.0.iter().all(|(s, _)| matches!(s, Sym::Param(_)))) {
        let asg = p.param_assignment();
        if let Ok(value) = evaluate(&det.to_expr(), &asg) {
            if value == 0.0 {
                return Err(Error::NotHyperregular(
                    "the velocity Hessian is singular at the default parameters".into(),
                ));
            }
        }
    }
    let adj = poly_adjugate(&polys);
    let l = p.full_lagrangian();
    let zero_v: BTreeMap<Sym, Expr> = vars.iter().map(|v| (Sym::Var(*v), Expr::zero())).collect();
    // p - b with b = ∂L/∂v at v = 0
    let shifted: Vec<Expr> = vars
        .iter()
        .map(|v| {
            let VarRef::V(i, a) = *v else { unreachable!() };
            Expr::var(VarRef::P(a, i)) - differentiate(&l, *v).substitute(&zero_v)
        })
        .collect();
    let mut quad = Vec::new();
    for (r, sr) in shifted.iter().enumerate() {
        for (c, sc) in shifted.iter().enumerate() {
            if !adj[r][c].is_zero() {
                quad.push(Expr::mul_all(vec![sr.clone(), adj[r][c].to_expr(), sc.clone()]));
            }
        }
    }
    let quad = Expr::add_all(quad);
    let rest = l.substitute(&zero_v);
    let h = match det.as_constant() {
        Some(d) => Expr::Const(d.recip() / BigRational::from_integer(2.into())) * quad - rest,
        None => quad / (Expr::int(2) * det.to_expr()) - rest,
    };
    Ok(h.simplify())
}
