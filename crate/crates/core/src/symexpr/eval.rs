use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::{Expr, Func, Sym, VarRef};
use crate::{Error, Result};

/// Numeric values for the free symbols of an expression.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assignment {
    values: HashMap<Sym, f64>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, s: Sym, value: f64) -> &mut Self {
        self.values.insert(s, value);
        self
    }

    pub fn set_var(&mut self, v: VarRef, value: f64) -> &mut Self {
        self.set(Sym::Var(v), value)
    }

    pub fn set_param(&mut self, name: &str, value: f64) -> &mut Self {
        self.set(Sym::Param(name.to_string()), value)
    }

    pub fn with_var(mut self, v: VarRef, value: f64) -> Self {
        self.set_var(v, value);
        self
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.set_param(name, value);
        self
    }

    pub fn get(&self, s: &Sym) -> Option<f64> {
        self.values.get(s).copied()
    }

    pub fn extend(&mut self, other: &Assignment) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), *v);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sym, &f64)> {
        self.values.iter()
    }
}

/// Evaluates `e`; exact constant subtrees are rounded only once.
pub fn evaluate(e: &Expr, a: &Assignment) -> Result<f64> {
    match eval_guarded(e, a, 0.0) {
        Ok(v) => Ok(v),
        Err(EvalFail::Error(err)) => Err(err),
        Err(EvalFail::NearSingular) => unreachable!("guard disabled"),
    }
}

pub(crate) enum EvalFail {
    Error(Error),
    NearSingular,
}

enum Num {
    Exact(BigRational),
    Float(f64),
}

impl Num {
    fn float(&self) -> f64 {
        match self {
            Num::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Num::Float(f) => *f,
        }
    }
}

/// Evaluates with a guard: divisors or log/sqrt arguments smaller than `guard`
/// in magnitude report `NearSingular` instead of a value.
pub(crate) fn eval_guarded(e: &Expr, a: &Assignment, guard: f64) -> std::result::Result<f64, EvalFail> {
    let v = eval_num(e, a, guard)?.float();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalFail::Error(Error::Domain(format!("non-finite value while evaluating `{e}`"))))
    }
}

fn domain(msg: String) -> EvalFail {
    EvalFail::Error(Error::Domain(msg))
}

fn eval_num(e: &Expr, a: &Assignment, guard: f64) -> std::result::Result<Num, EvalFail> {
    Ok(match e {
        Expr::Const(c) => Num::Exact(c.clone()),
        Expr::Sym(s) => Num::Float(
            a.get(s)
                .ok_or_else(|| EvalFail::Error(Error::MissingSymbol(s.to_string())))?,
        ),
        Expr::Add(terms) => {
            let mut exact = BigRational::zero();
            let mut float = 0.0;
            let mut any_float = false;
            for t in terms {
                match eval_num(t, a, guard)? {
                    Num::Exact(r) => exact += r,
                    Num::Float(f) => {
                        float += f;
                        any_float = true;
                    }
                }
            }
            if any_float {
                Num::Float(float + exact.to_f64().unwrap_or(f64::NAN))
            } else {
                Num::Exact(exact)
            }
        }
        Expr::Mul(factors) => {
            let mut exact = BigRational::from_integer(1.into());
            let mut float = 1.0;
            let mut any_float = false;
            for t in factors {
                match eval_num(t, a, guard)? {
                    Num::Exact(r) => exact *= r,
                    Num::Float(f) => {
                        float *= f;
                        any_float = true;
                    }
                }
            }
            if any_float {
                Num::Float(float * exact.to_f64().unwrap_or(f64::NAN))
            } else {
                Num::Exact(exact)
            }
        }
        Expr::Neg(b) => match eval_num(b, a, guard)? {
            Num::Exact(r) => Num::Exact(-r),
            Num::Float(f) => Num::Float(-f),
        },
        Expr::Pow(b, n) => match eval_num(b, a, guard)? {
            Num::Exact(r) => {
                if r.is_zero() && *n < 0 {
                    return Err(domain(format!("division by zero in `{e}`")));
                }
                Num::Exact(super::rational_pow(&r, *n))
            }
            Num::Float(f) => {
                if *n < 0 {
                    if f == 0.0 {
                        return Err(domain(format!("division by zero in `{e}`")));
                    }
                    if f.abs() < guard {
                        return Err(EvalFail::NearSingular);
                    }
                }
                let n32 = i32::try_from(*n).map_err(|_| domain("exponent too large".into()))?;
                Num::Float(f.powi(n32))
            }
        },
        Expr::Func(g, b) => {
            let x = eval_num(b, a, guard)?.float();
            Num::Float(match g {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Log => {
                    if x <= 0.0 {
                        return Err(domain(format!("log of nonpositive value {x}")));
                    }
                    if x < guard {
                        return Err(EvalFail::NearSingular);
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    if x < 0.0 {
                        return Err(domain(format!("sqrt of negative value {x}")));
                    }
                    if x < guard {
                        return Err(EvalFail::NearSingular);
                    }
                    x.sqrt()
                }
            })
        }
    })
}
