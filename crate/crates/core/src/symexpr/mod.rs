//! Symbolic expressions over bundle coordinates, parameters and field symbols.

mod diff;
mod equiv;
mod eval;
mod parse;
mod poly;
mod print;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub use diff::{differentiate, differentiate_sym};
pub use equiv::{equivalent, Certificate, Equivalence};
pub use eval::{evaluate, Assignment};
pub use parse::{parse, parse_with};
pub use poly::{Monomial, Poly};

/// Coordinate variable of a bundle chart.
///
/// The variant order fixes the polynomial variable order:
/// base `x`, then `q`, `v`, `p`, `w`, `u`, `y`, each lexicographic in its indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarRef {
    /// Base coordinate `x^a`.
    X(usize),
    /// Position `q^i`.
    Q(usize),
    /// Velocity `v^i_a`, written `v[i,a]`.
    V(usize, usize),
    /// Momentum `p^a_i`, written `p[a,i]`.
    P(usize, usize),
    /// Second velocity `(v_a)^i`, written `w[i,a]`.
    W(usize, usize),
    /// Mixed second velocity `(v_a)^b_i` of a momentum, written `u[i,a,b]`.
    U(usize, usize, usize),
    /// Mixed second velocity `(v_a)^i_b` of a velocity, written `y[i,a,b]`.
    Y(usize, usize, usize),
}

impl VarRef {
    /// Single-letter role name used by the grammar.
    pub fn role(&self) -> char {
        match self {
            VarRef::X(_) => 'x',
            VarRef::Q(_) => 'q',
            VarRef::V(..) => 'v',
            VarRef::P(..) => 'p',
            VarRef::W(..) => 'w',
            VarRef::U(..) => 'u',
            VarRef::Y(..) => 'y',
        }
    }

    /// Checks the indices against a chart with `n` fields and `k` parameters.
    pub fn check_bounds(&self, n: usize, k: usize) -> crate::Result<()> {
        let ok_i = |i: usize| (1..=n).contains(&i);
        let ok_a = |a: usize| (1..=k).contains(&a);
        let ok = match *self {
            VarRef::X(a) => ok_a(a),
            VarRef::Q(i) => ok_i(i),
            VarRef::V(i, a) | VarRef::W(i, a) => ok_i(i) && ok_a(a),
            VarRef::P(a, i) => ok_i(i) && ok_a(a),
            VarRef::U(i, a, b) | VarRef::Y(i, a, b) => ok_i(i) && ok_a(a) && ok_a(b),
        };
        if ok {
            Ok(())
        } else {
            Err(crate::Error::IndexOutOfRange {
                var: self.to_string(),
                msg: format!("chart has n={n}, k={k}"),
            })
        }
    }
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarRef::X(a) => write!(f, "x[{a}]"),
            VarRef::Q(i) => write!(f, "q[{i}]"),
            VarRef::V(i, a) => write!(f, "v[{i},{a}]"),
            VarRef::P(a, i) => write!(f, "p[{a},{i}]"),
            VarRef::W(i, a) => write!(f, "w[{i},{a}]"),
            VarRef::U(i, a, b) => write!(f, "u[{i},{a},{b}]"),
            VarRef::Y(i, a, b) => write!(f, "y[{i},{a},{b}]"),
        }
    }
}

/// Base symbol of a field quantity evaluated along a map from parameter space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FieldBase {
    /// `phi[i]`, the position component of the field.
    Phi(usize),
    /// `phi[i,a]`, the velocity component of the field.
    PhiVel(usize, usize),
    /// `psi[a,i]`, the momentum component of the field.
    Psi(usize, usize),
    /// `mult[A,a]`, a Lagrange multiplier.
    Mult(usize, usize),
}

/// A field symbol with up to two total derivatives applied, stored sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldSym {
    pub base: FieldBase,
    pub derivs: Vec<usize>,
}

impl FieldSym {
    pub fn new(base: FieldBase) -> Self {
        FieldSym { base, derivs: Vec::new() }
    }

    /// The same symbol with one more derivative along `x^a`.
    pub fn derive(&self, a: usize) -> Self {
        let mut derivs = self.derivs.clone();
        derivs.push(a);
        derivs.sort_unstable();
        FieldSym { base: self.base, derivs }
    }
}

impl fmt::Display for FieldSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.derivs {
            write!(f, "d/dx[{a}](")?;
        }
        match self.base {
            FieldBase::Phi(i) => write!(f, "phi[{i}]")?,
            FieldBase::PhiVel(i, a) => write!(f, "phi[{i},{a}]")?,
            FieldBase::Psi(a, i) => write!(f, "psi[{a},{i}]")?,
            FieldBase::Mult(m, a) => write!(f, "mult[{m},{a}]")?,
        }
        for _ in &self.derivs {
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// Leaf symbol of an expression.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sym {
    Var(VarRef),
    Param(String),
    Field(FieldSym),
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sym::Var(v) => v.fmt(f),
            Sym::Param(p) => f.write_str(p),
            Sym::Field(s) => s.fmt(f),
        }
    }
}

impl From<VarRef> for Sym {
    fn from(v: VarRef) -> Self {
        Sym::Var(v)
    }
}

impl From<FieldSym> for Sym {
    fn from(s: FieldSym) -> Self {
        Sym::Field(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// Immutable expression tree with exact rational constants.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(BigRational),
    Sym(Sym),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, i64),
    Neg(Box<Expr>),
    Func(Func, Box<Expr>),
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Const(BigRational::zero())
    }

    pub fn one() -> Expr {
        Expr::Const(BigRational::one())
    }

    pub fn int(n: i64) -> Expr {
        Expr::Const(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn rational(num: i64, den: i64) -> Expr {
        Expr::Const(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn var(v: VarRef) -> Expr {
        Expr::Sym(Sym::Var(v))
    }

    pub fn param(name: &str) -> Expr {
        Expr::Sym(Sym::Param(name.to_string()))
    }

    pub fn field(s: FieldSym) -> Expr {
        Expr::Sym(Sym::Field(s))
    }

    pub fn sym(s: Sym) -> Expr {
        Expr::Sym(s)
    }

    pub fn as_const(&self) -> Option<&BigRational> {
        match self {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_one())
    }

    /// Sum with flattening and constant folding.
    pub fn add_all(terms: Vec<Expr>) -> Expr {
        let mut out = Vec::with_capacity(terms.len());
        let mut c = BigRational::zero();
        for t in terms {
            match t {
                Expr::Const(v) => c += v,
                Expr::Add(inner) => {
                    for s in inner {
                        match s {
                            Expr::Const(v) => c += v,
                            other => out.push(other),
                        }
                    }
                }
                other => out.push(other),
            }
        }
        if !c.is_zero() {
            out.push(Expr::Const(c));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::Add(out),
        }
    }

    /// Product with flattening, constant folding and sign extraction.
    pub fn mul_all(factors: Vec<Expr>) -> Expr {
        let mut out = Vec::with_capacity(factors.len());
        let mut c = BigRational::one();
        let mut stack: Vec<Expr> = factors.into_iter().rev().collect();
        while let Some(f) = stack.pop() {
            match f {
                Expr::Const(v) => c *= v,
                Expr::Neg(inner) => {
                    c = -c;
                    stack.push(*inner);
                }
                Expr::Mul(inner) => stack.extend(inner.into_iter().rev()),
                other => out.push(other),
            }
        }
        if c.is_zero() {
            return Expr::zero();
        }
        let negative = c.is_negative();
        let mag = c.abs();
        if !mag.is_one() {
            out.insert(0, Expr::Const(mag));
        }
        let body = match out.len() {
            0 => Expr::one(),
            1 => out.pop().unwrap(),
            _ => Expr::Mul(out),
        };
        if negative {
            Expr::negate(body)
        } else {
            body
        }
    }

    pub fn negate(e: Expr) -> Expr {
        match e {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    /// Integer power; folds exact constants except division by zero.
    pub fn powi(base: Expr, n: i64) -> Expr {
        if n == 0 {
            return Expr::one();
        }
        if n == 1 {
            return base;
        }
        match base {
            Expr::Const(c) if !(c.is_zero() && n < 0) => Expr::Const(rational_pow(&c, n)),
            Expr::Pow(b, m) if m.checked_mul(n).is_some() => Expr::powi(*b, m * n),
            Expr::Neg(inner) if n % 2 == 0 => Expr::powi(*inner, n),
            Expr::Neg(inner) => Expr::negate(Expr::powi(*inner, n)),
            other => Expr::Pow(Box::new(other), n),
        }
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        Expr::Func(f, Box::new(arg))
    }

    pub fn recip(e: Expr) -> Expr {
        Expr::powi(e, -1)
    }

    /// All symbols occurring in the expression.
    pub fn symbols(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Sym>) {
        match self {
            Expr::Const(_) => {}
            Expr::Sym(s) => {
                out.insert(s.clone());
            }
            Expr::Add(v) | Expr::Mul(v) => v.iter().for_each(|e| e.collect_symbols(out)),
            Expr::Pow(b, _) | Expr::Neg(b) | Expr::Func(_, b) => b.collect_symbols(out),
        }
    }

    /// Chart variables occurring in the expression.
    pub fn vars(&self) -> BTreeSet<VarRef> {
        self.symbols()
            .into_iter()
            .filter_map(|s| match s {
                Sym::Var(v) => Some(v),
                _ => None,
            })
            .collect()
    }

    /// Parameter names occurring in the expression.
    pub fn params(&self) -> BTreeSet<String> {
        self.symbols()
            .into_iter()
            .filter_map(|s| match s {
                Sym::Param(p) => Some(p),
                _ => None,
            })
            .collect()
    }

    pub fn depends_on(&self, s: &Sym) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Sym(t) => t == s,
            Expr::Add(v) | Expr::Mul(v) => v.iter().any(|e| e.depends_on(s)),
            Expr::Pow(b, _) | Expr::Neg(b) | Expr::Func(_, b) => b.depends_on(s),
        }
    }

    /// True if some chart variable satisfies `pred`.
    pub fn any_var(&self, pred: impl Fn(&VarRef) -> bool) -> bool {
        self.vars().iter().any(pred)
    }

    /// Simultaneous substitution of symbols by expressions.
    pub fn substitute(&self, map: &BTreeMap<Sym, Expr>) -> Expr {
        if map.is_empty() {
            return self.clone();
        }
        self.map_syms(&|s| map.get(s).cloned())
    }

    /// Rebuilds the tree, replacing each symbol for which `f` returns a value.
    pub fn map_syms(&self, f: &dyn Fn(&Sym) -> Option<Expr>) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Sym(s) => f(s).unwrap_or_else(|| self.clone()),
            Expr::Add(v) => Expr::add_all(v.iter().map(|e| e.map_syms(f)).collect()),
            Expr::Mul(v) => Expr::mul_all(v.iter().map(|e| e.map_syms(f)).collect()),
            Expr::Pow(b, n) => Expr::powi(b.map_syms(f), *n),
            Expr::Neg(b) => Expr::negate(b.map_syms(f)),
            Expr::Func(g, b) => Expr::func(*g, b.map_syms(f)),
        }
    }

    /// Polynomial normal form when available, otherwise a structurally rebuilt tree
    /// whose polynomial subtrees are normalized.
    pub fn simplify(&self) -> Expr {
        if let Some(p) = Poly::from_expr(self) {
            return p.to_expr();
        }
        match self {
            Expr::Const(_) | Expr::Sym(_) => self.clone(),
            Expr::Add(v) => Expr::add_all(v.iter().map(|e| e.simplify()).collect()),
            Expr::Mul(v) => Expr::mul_all(v.iter().map(|e| e.simplify()).collect()),
            Expr::Pow(b, n) => Expr::powi(b.simplify(), *n),
            Expr::Neg(b) => Expr::negate(b.simplify()),
            Expr::Func(g, b) => Expr::func(*g, b.simplify()),
        }
    }

    pub fn is_polynomial(&self) -> bool {
        Poly::from_expr(self).is_some()
    }
}

pub(crate) fn rational_pow(c: &BigRational, n: i64) -> BigRational {
    let mag = n.unsigned_abs();
    let mut acc = BigRational::one();
    for _ in 0..mag {
        acc *= c;
    }
    if n < 0 {
        acc.recip()
    } else {
        acc
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add_all(vec![self, rhs])
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::add_all(vec![self, Expr::negate(rhs)])
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul_all(vec![self, rhs])
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::mul_all(vec![self, Expr::recip(rhs)])
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::negate(self)
    }
}

impl std::iter::Sum for Expr {
    fn sum<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        Expr::add_all(iter.collect())
    }
}

impl std::iter::Product for Expr {
    fn product<I: Iterator<Item = Expr>>(iter: I) -> Expr {
        Expr::mul_all(iter.collect())
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Expr {
        Expr::int(n)
    }
}

impl From<VarRef> for Expr {
    fn from(v: VarRef) -> Expr {
        Expr::var(v)
    }
}
