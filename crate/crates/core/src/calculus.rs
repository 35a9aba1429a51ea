//! Coordinate differential forms, the canonical forms `Θ^a`, `Ω^a`, the
//! Tulczyjew derivations and the one-forms `λ`, `χ`.

use std::collections::BTreeMap;
use std::fmt;

use crate::geometry::{lift_var, Bundle, Chart};
use crate::symexpr::{differentiate, equivalent, Expr, Poly, VarRef};
use crate::{Error, Result};

/// Differential form written in the coordinate differentials of a chart.
///
/// Basis keys are strictly increasing lists of coordinates, so `dq∧dp` and
/// `-dp∧dq` share one stored coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordForm {
    pub chart: Chart,
    pub degree: usize,
    pub terms: BTreeMap<Vec<VarRef>, Expr>,
}

/// Sorts `basis` in place and returns the permutation sign, or `None` if a
/// coordinate repeats.
fn canonical(basis: &mut [VarRef]) -> Option<bool> {
    let mut negative = false;
    for i in 1..basis.len() {
        let mut j = i;
        while j > 0 && basis[j - 1] > basis[j] {
            basis.swap(j - 1, j);
            negative = !negative;
            j -= 1;
        }
    }
    if basis.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(negative)
    }
}

impl CoordForm {
    pub fn zero(chart: Chart, degree: usize) -> Self {
        CoordForm { chart, degree, terms: BTreeMap::new() }
    }

    pub fn function(chart: Chart, f: Expr) -> Self {
        let mut out = CoordForm::zero(chart, 0);
        out.add_term(Vec::new(), f);
        out
    }

    /// Adds `coef · dy^{basis[0]} ∧ …`, normalizing the basis order.
    pub fn add_term(&mut self, mut basis: Vec<VarRef>, coef: Expr) {
        assert_eq!(basis.len(), self.degree, "basis length must equal the degree");
        let Some(negative) = canonical(&mut basis) else { return };
        let coef = if negative { -coef } else { coef };
        if coef.is_zero() {
            return;
        }
        let entry = self.terms.remove(&basis).map(|old| old + coef.clone()).unwrap_or(coef);
        let entry = entry.simplify();
        if !entry.is_zero() {
            self.terms.insert(basis, entry);
        }
    }

    /// Coefficient on the (unnormalized) basis element.
    pub fn coefficient(&self, basis: &[VarRef]) -> Expr {
        let mut b = basis.to_vec();
        match canonical(&mut b) {
            None => Expr::zero(),
            Some(neg) => {
                let c = self.terms.get(&b).cloned().unwrap_or_else(Expr::zero);
                if neg {
                    -c
                } else {
                    c
                }
            }
        }
    }

    pub fn scalar(&self) -> Expr {
        self.coefficient(&[])
    }

    fn same_shape(&self, other: &CoordForm) -> Result<()> {
        if self.degree != other.degree || self.chart.n != other.chart.n || self.chart.k != other.chart.k {
            return Err(Error::ChartMismatch(format!(
                "cannot combine a {}-form on {} with a {}-form on {}",
                self.degree, self.chart, other.degree, other.chart
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &CoordForm) -> Result<CoordForm> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (b, c) in &other.terms {
            out.add_term(b.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &CoordForm) -> Result<CoordForm> {
        self.add(&other.scale(&Expr::int(-1)))
    }

    pub fn scale(&self, f: &Expr) -> CoordForm {
        let mut out = CoordForm::zero(self.chart, self.degree);
        for (b, c) in &self.terms {
            out.add_term(b.clone(), f.clone() * c.clone());
        }
        out
    }

    /// Reinterprets the form on another chart containing all its coordinates.
    pub fn rechart(&self, target: Chart) -> Result<CoordForm> {
        for (b, c) in &self.terms {
            for v in b.iter().chain(c.vars().iter()) {
                if !matches!(v, VarRef::X(_)) && !target.contains(v) {
                    return Err(Error::ChartMismatch(format!("`{v}` is not a coordinate of {target}")));
                }
            }
        }
        Ok(CoordForm { chart: target, degree: self.degree, terms: self.terms.clone() })
    }

    /// True when every coefficient vanishes identically.
    pub fn is_zero(&self) -> Result<bool> {
        for c in self.terms.values() {
            if !equivalent(c, &Expr::zero())?.equal {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Coefficientwise equivalence.
    pub fn equivalent_to(&self, other: &CoordForm) -> Result<bool> {
        self.sub(other)?.is_zero()
    }

    /// Exterior derivative over the chart coordinates.
    pub fn d(&self) -> Result<CoordForm> {
        let coords = self.chart.coords();
        let mut out = CoordForm::zero(self.chart, self.degree + 1);
        for (b, c) in &self.terms {
            for v in c.vars() {
                if !matches!(v, VarRef::X(_)) && !coords.contains(&v) {
                    return Err(Error::ChartMismatch(format!("`{v}` is not a coordinate of {}", self.chart)));
                }
            }
            for y in c.vars().into_iter().filter(|v| coords.contains(v)) {
                let mut basis = vec![y];
                basis.extend(b.iter().copied());
                out.add_term(basis, differentiate(c, y));
            }
        }
        Ok(out)
    }
}

impl fmt::Display for CoordForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (b, c)) in self.terms.iter().enumerate() {
            if idx > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for (j, v) in b.iter().enumerate() {
                write!(f, "{}d{v}", if j == 0 { "*" } else { "^" })?;
            }
        }
        Ok(())
    }
}

fn cotangent(n: usize, k: usize) -> Result<Chart> {
    Chart::new(n, k, Bundle::Cotangent)
}

fn check_alpha(k: usize, a: usize) -> Result<()> {
    if (1..=k).contains(&a) {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { var: format!("alpha={a}"), msg: format!("k={k}") })
    }
}

/// `Θ^a = p^a_i dq^i` and `Ω^a = dq^i ∧ dp^a_i` on `(T¹ₖ)*Q`.
pub fn canonical_theta_omega(n: usize, k: usize, a: usize) -> Result<(CoordForm, CoordForm)> {
    let chart = cotangent(n, k)?;
    check_alpha(k, a)?;
    let mut theta = CoordForm::zero(chart, 1);
    let mut omega = CoordForm::zero(chart, 2);
    for i in 1..=n {
        theta.add_term(vec![VarRef::Q(i)], Expr::var(VarRef::P(a, i)));
        omega.add_term(vec![VarRef::Q(i), VarRef::P(a, i)], Expr::one());
    }
    Ok((theta, omega))
}

fn iterated_target(mu: &CoordForm) -> Result<Chart> {
    match mu.chart.bundle {
        Bundle::Cotangent => Ok(mu.chart.with_bundle(Bundle::Iterated)),
        Bundle::Pontryagin => Ok(mu.chart.with_bundle(Bundle::IteratedM)),
        other => Err(Error::ChartMismatch(format!(
            "Tulczyjew derivations act on forms over the cotangent or Pontryagin chart, not {other}"
        ))),
    }
}

fn lifted(y: VarRef, a: usize) -> Result<Expr> {
    lift_var(y, a)
        .map(Expr::var)
        .ok_or_else(|| Error::ChartMismatch(format!("`{y}` has no lifted velocity")))
}

/// Degree −1 derivation `i_{T_a}`: a form on `(T¹ₖ)*Q` becomes a form of one
/// lower degree on `T¹ₖ((T¹ₖ)*Q)`, with the lifted velocity in the first slot.
pub fn tulczyjew_it(mu: &CoordForm, a: usize) -> Result<CoordForm> {
    let target = iterated_target(mu)?;
    check_alpha(mu.chart.k, a)?;
    match mu.degree {
        0 => Ok(CoordForm::zero(target, 0)),
        1 => {
            let mut out = CoordForm::zero(target, 0);
            for (b, c) in &mu.terms {
                out.add_term(Vec::new(), c.clone() * lifted(b[0], a)?);
            }
            Ok(out)
        }
        2 => {
            let mut out = CoordForm::zero(target, 1);
            for (b, c) in &mu.terms {
                let (yi, yj) = (b[0], b[1]);
                out.add_term(vec![yj], c.clone() * lifted(yi, a)?);
                out.add_term(vec![yi], -(c.clone() * lifted(yj, a)?));
            }
            Ok(out)
        }
        d => Err(Error::UnsupportedForm(format!("i_T is implemented for degrees up to 2, got {d}"))),
    }
}

/// Degree 0 derivation `d_{T_a} = i_{T_a} d + d i_{T_a}`.
pub fn tulczyjew_dt(mu: &CoordForm, a: usize) -> Result<CoordForm> {
    if mu.degree > 1 {
        return Err(Error::UnsupportedForm(format!(
            "d_T is implemented for degrees up to 1, got {}",
            mu.degree
        )));
    }
    let target = iterated_target(mu)?;
    let first = tulczyjew_it(&mu.d()?, a)?;
    if mu.degree == 0 {
        return Ok(first);
    }
    let second = tulczyjew_it(mu, a)?.rechart(target)?.d()?;
    first.add(&second)
}

/// `λ = Σ_a u(i,a,a) dq^i + p^a_i dw(i,a)` on `T¹ₖ((T¹ₖ)*Q)`.
pub fn build_lambda(n: usize, k: usize) -> Result<CoordForm> {
    let chart = Chart::new(n, k, Bundle::Iterated)?;
    let mut out = CoordForm::zero(chart, 1);
    for i in 1..=n {
        let trace: Expr = (1..=k).map(|a| Expr::var(VarRef::U(i, a, a))).sum();
        out.add_term(vec![VarRef::Q(i)], trace);
        for a in 1..=k {
            out.add_term(vec![VarRef::W(i, a)], Expr::var(VarRef::P(a, i)));
        }
    }
    Ok(out)
}

/// `χ = w(i,a) dp^a_i - Σ_a u(i,a,a) dq^i` on `T¹ₖ((T¹ₖ)*Q)`.
pub fn build_chi(n: usize, k: usize) -> Result<CoordForm> {
    let chart = Chart::new(n, k, Bundle::Iterated)?;
    let mut out = CoordForm::zero(chart, 1);
    for i in 1..=n {
        let trace: Expr = (1..=k).map(|a| Expr::var(VarRef::U(i, a, a))).sum();
        out.add_term(vec![VarRef::Q(i)], -trace);
        for a in 1..=k {
            out.add_term(vec![VarRef::P(a, i)], Expr::var(VarRef::W(i, a)));
        }
    }
    Ok(out)
}

/// `Σ_a d_{T_a} Θ^a`.
pub fn lambda_from_derivations(n: usize, k: usize) -> Result<CoordForm> {
    let mut acc = CoordForm::zero(Chart::new(n, k, Bundle::Iterated)?, 1);
    for a in 1..=k {
        let (theta, _) = canonical_theta_omega(n, k, a)?;
        acc = acc.add(&tulczyjew_dt(&theta, a)?)?;
    }
    Ok(acc)
}

/// `Σ_a i_{T_a} Ω^a`.
pub fn chi_from_derivations(n: usize, k: usize) -> Result<CoordForm> {
    let mut acc = CoordForm::zero(Chart::new(n, k, Bundle::Iterated)?, 1);
    for a in 1..=k {
        let (_, omega) = canonical_theta_omega(n, k, a)?;
        acc = acc.add(&tulczyjew_it(&omega, a)?)?;
    }
    Ok(acc)
}

/// Coefficients compared through polynomial normal forms when possible.
pub fn forms_equal(a: &CoordForm, b: &CoordForm) -> Result<bool> {
    if a.degree != b.degree {
        return Ok(false);
    }
    let keys: std::collections::BTreeSet<_> = a.terms.keys().chain(b.terms.keys()).collect();
    for key in keys {
        let ca = a.coefficient(key);
        let cb = b.coefficient(key);
        let same = match (Poly::from_expr(&ca), Poly::from_expr(&cb)) {
            (Some(p), Some(q)) => p == q,
            _ => equivalent(&ca, &cb)?.equal,
        };
        if !same {
            return Ok(false);
        }
    }
    Ok(true)
}
