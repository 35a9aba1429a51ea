use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::{Expr, Sym};

/// Monomial as a sorted list of (symbol, positive exponent).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Monomial(pub Vec<(Sym, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn exponent(&self, s: &Sym) -> u32 {
        self.0
            .iter()
            .find(|(t, _)| t == s)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut out: Vec<(Sym, u32)> = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() || j < other.0.len() {
            let ord = match (self.0.get(i), other.0.get(j)) {
                (Some(a), Some(b)) => a.0.cmp(&b.0),
                (Some(_), None) => Ordering::Less,
                _ => Ordering::Greater,
            };
            match ord {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        Monomial(out)
    }

    /// Divides by `other` if it divides exactly.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::new();
        for (s, e) in &self.0 {
            let d = other.exponent(s);
            if d > *e {
                return None;
            }
            if e - d > 0 {
                out.push((s.clone(), e - d));
            }
        }
        if other.0.iter().any(|(s, _)| self.exponent(s) == 0) {
            return None;
        }
        Some(Monomial(out))
    }

    /// Greatest common divisor of two monomials.
    pub fn gcd(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .filter_map(|(s, e)| {
                    let m = (*e).min(other.exponent(s));
                    (m > 0).then(|| (s.clone(), m))
                })
                .collect(),
        )
    }

    pub fn to_expr(&self) -> Expr {
        Expr::mul_all(
            self.0
                .iter()
                .map(|(s, e)| Expr::powi(Expr::Sym(s.clone()), *e as i64))
                .collect(),
        )
    }
}

impl Ord for Monomial {
    /// Graded lexicographic order; earlier symbols rank higher.
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            o => return o,
        }
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.0.get(i), other.0.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some(a), Some(b)) => match a.0.cmp(&b.0) {
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => {
                        if a.1 != b.1 {
                            return a.1.cmp(&b.1);
                        }
                        i += 1;
                        j += 1;
                    }
                },
            }
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse multivariate polynomial with rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Poly {
    pub terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(Monomial::one(), c);
        }
        p
    }

    pub fn symbol(s: Sym) -> Self {
        let mut p = Poly::zero();
        p.terms.insert(Monomial(vec![(s, 1)]), BigRational::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The constant value if the polynomial has no symbols.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, d)| (m.clone(), d * c)).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut acc = Poly::constant(BigRational::one());
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Converts an expression; `None` if it contains functions or non-constant divisors.
    pub fn from_expr(e: &Expr) -> Option<Poly> {
        Some(match e {
            Expr::Const(c) => Poly::constant(c.clone()),
            Expr::Sym(s) => Poly::symbol(s.clone()),
            Expr::Add(v) => {
                let mut acc = Poly::zero();
                for t in v {
                    acc = acc.add(&Poly::from_expr(t)?);
                }
                acc
            }
            Expr::Mul(v) => {
                let mut acc = Poly::constant(BigRational::one());
                for t in v {
                    acc = acc.mul(&Poly::from_expr(t)?);
                }
                acc
            }
            Expr::Neg(b) => Poly::from_expr(b)?.neg(),
            Expr::Pow(b, n) => {
                let pb = Poly::from_expr(b)?;
                if *n >= 0 {
                    pb.pow(*n as u32)
                } else {
                    let c = pb.as_constant()?;
                    if c.is_zero() {
                        return None;
                    }
                    Poly::constant(super::rational_pow(&c, *n))
                }
            }
            Expr::Func(..) => return None,
        })
    }

    /// Canonical expression: terms in descending graded-lex order.
    pub fn to_expr(&self) -> Expr {
        let terms: Vec<Expr> = self
            .terms
            .iter()
            .rev()
            .map(|(m, c)| Expr::mul_all(vec![Expr::Const(c.clone()), m.to_expr()]))
            .collect();
        Expr::add_all(terms)
    }

    /// Canonical expression with the common monomial and sign pulled out,
    /// so `2*a^3*b + 3*a^4` prints as `a^3*(3*a + 2*b)`.
    pub fn to_factored_expr(&self) -> Expr {
        let Some(first) = self.terms.keys().next() else {
            return Expr::zero();
        };
        let common = self.terms.keys().fold(first.clone(), |g, m| g.gcd(m));
        if common.0.is_empty() || self.terms.len() == 1 {
            return self.to_expr();
        }
        let rest = Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.div(&common).expect("gcd divides"), c.clone()))
                .collect(),
        };
        let lead_negative = rest.terms.values().next_back().is_some_and(|c| c.is_negative());
        let rest = if lead_negative { rest.neg() } else { rest };
        let body = Expr::mul_all(vec![common.to_expr(), rest.to_expr()]);
        if lead_negative {
            Expr::negate(body)
        } else {
            body
        }
    }

    /// Coefficient polynomial of `s^d`, treating other symbols as coefficients.
    pub fn coefficient_of(&self, s: &Sym, d: u32) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            if m.exponent(s) == d {
                let rest = Monomial(m.0.iter().filter(|(t, _)| t != s).cloned().collect());
                out.add_term(rest, c.clone());
            }
        }
        out
    }

    pub fn degree_in(&self, s: &Sym) -> u32 {
        self.terms.keys().map(|m| m.exponent(s)).max().unwrap_or(0)
    }
}
