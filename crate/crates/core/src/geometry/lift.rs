use super::{Bundle, Chart};
use crate::symexpr::{differentiate, Expr, VarRef};
use crate::{Error, Result};

/// Vector field `Z = Z^i ∂/∂q^i` on `Q`.
///
/// Components may depend on `q`, parameters and, for localized perturbations,
/// on the base coordinates `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldOnQ {
    pub components: Vec<Expr>,
}

impl VectorFieldOnQ {
    pub fn new(components: Vec<Expr>) -> Result<Self> {
        for (i, c) in components.iter().enumerate() {
            if let Some(v) = c.vars().into_iter().find(|v| !matches!(v, VarRef::Q(_) | VarRef::X(_))) {
                return Err(Error::VariableRole(format!(
                    "component {} of the vector field depends on `{v}`",
                    i + 1
                )));
            }
        }
        Ok(VectorFieldOnQ { components })
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    fn velocity_slot(&self, j: usize, a: usize) -> Expr {
        let zj = &self.components[j - 1];
        let mut terms: Vec<Expr> = (1..=self.n())
            .map(|i| Expr::var(VarRef::V(i, a)) * differentiate(zj, VarRef::Q(i)))
            .collect();
        terms.push(differentiate(zj, VarRef::X(a)));
        Expr::add_all(terms).simplify()
    }

    fn momentum_slot(&self, a: usize, l: usize) -> Expr {
        let terms: Vec<Expr> = (1..=self.n())
            .map(|j| Expr::var(VarRef::P(a, j)) * differentiate(&self.components[j - 1], VarRef::Q(l)))
            .collect();
        (-Expr::add_all(terms)).simplify()
    }
}

/// Complete lift of `Z` to the tangent, cotangent or Pontryagin bundle,
/// listed in the coordinate order of `target`.
pub fn complete_lift(z: &VectorFieldOnQ, target: &Chart) -> Result<Vec<Expr>> {
    if z.n() != target.n {
        return Err(Error::ChartMismatch(format!(
            "vector field has {} components but the chart has n={}",
            z.n(),
            target.n
        )));
    }
    if !matches!(target.bundle, Bundle::Tangent | Bundle::Cotangent | Bundle::Pontryagin) {
        return Err(Error::ChartMismatch(format!("no complete lift to the {} chart", target.bundle)));
    }
    Ok(target
        .coords()
        .iter()
        .map(|c| match *c {
            VarRef::Q(i) => z.components[i - 1].clone(),
            VarRef::V(j, a) => z.velocity_slot(j, a),
            VarRef::P(a, l) => z.momentum_slot(a, l),
            _ => unreachable!("lift targets only carry q, v, p"),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::{equivalent, parse_with};

    fn field(n: usize, comps: &[&str]) -> VectorFieldOnQ {
        VectorFieldOnQ::new(comps.iter().map(|c| parse_with(c, n, 2).unwrap()).collect()).unwrap()
    }

    #[test]
    fn constant_field_has_vertical_zero() {
        let z = field(2, &["1", "0"]);
        let c = Chart::new(2, 2, Bundle::Pontryagin).unwrap();
        let lift = complete_lift(&z, &c).unwrap();
        assert!(lift[2..].iter().all(Expr::is_zero));
    }

    #[test]
    fn scaling_field_on_pontryagin() {
        let z = VectorFieldOnQ::new(vec![parse_with("q[1]", 1, 1).unwrap()]).unwrap();
        let c = Chart::new(1, 1, Bundle::Pontryagin).unwrap();
        let lift = complete_lift(&z, &c).unwrap();
        let want = ["q[1]", "v[1,1]", "-p[1,1]"];
        for (l, w) in lift.iter().zip(want) {
            assert!(equivalent(l, &parse_with(w, 1, 1).unwrap()).unwrap().equal);
        }
    }

    #[test]
    fn shear_field_on_tangent() {
        let z = field(2, &["q[2]", "0"]);
        let c = Chart::new(2, 2, Bundle::Tangent).unwrap();
        let lift = complete_lift(&z, &c).unwrap();
        for a in 1..=2 {
            let slot = c.index_of(&VarRef::V(1, a)).unwrap();
            assert_eq!(lift[slot], Expr::var(VarRef::V(2, a)));
        }
    }

    #[test]
    fn pontryagin_lift_projects_to_the_other_lifts() {
        let z = field(2, &["q[1]*q[2]", "q[1]^2-3*q[2]"]);
        let m = Chart::new(2, 2, Bundle::Pontryagin).unwrap();
        let full = complete_lift(&z, &m).unwrap();
        for b in [Bundle::Tangent, Bundle::Cotangent] {
            let c = m.with_bundle(b);
            let part = complete_lift(&z, &c).unwrap();
            for (v, e) in c.coords().iter().zip(&part) {
                assert_eq!(&full[m.index_of(v).unwrap()], e);
            }
        }
    }

    #[test]
    fn rejects_non_base_dependence() {
        let e = parse_with("v[1,1]", 1, 1).unwrap();
        assert!(VectorFieldOnQ::new(vec![e]).is_err());
    }

    #[test]
    fn base_dependence_enters_velocity_slots() {
        let z = field(1, &["x[1]*(1-x[1])"]);
        let c = Chart::new(1, 2, Bundle::Tangent).unwrap();
        let lift = complete_lift(&z, &c).unwrap();
        assert!(equivalent(&lift[1], &parse_with("1-2*x[1]", 1, 2).unwrap()).unwrap().equal);
        assert!(lift[2].is_zero());
    }
}
