use std::fmt;

use num_traits::{One, Signed};

use super::Expr;

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_ATOM: u8 = 4;

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(_) => PREC_SUM,
            Expr::Neg(_) => PREC_SUM,
            Expr::Mul(_) => PREC_PRODUCT,
            Expr::Const(c) if c.is_negative() => PREC_SUM,
            Expr::Const(c) if !c.is_integer() => PREC_PRODUCT,
            Expr::Pow(_, n) if *n < 0 => PREC_PRODUCT,
            Expr::Pow(..) => PREC_PRODUCT + 1,
            _ => PREC_ATOM,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "(")?;
            self.write_bare(f)?;
            write!(f, ")")
        } else {
            self.write_bare(f)
        }
    }

    fn write_bare(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_integer() {
                    write!(f, "{}", c.numer())
                } else {
                    write!(f, "{}/{}", c.numer(), c.denom())
                }
            }
            Expr::Sym(s) => write!(f, "{s}"),
            Expr::Add(terms) => {
                for (idx, t) in terms.iter().enumerate() {
                    let (negative, body) = split_sign(t);
                    if negative {
                        write!(f, "-")?;
                    } else if idx > 0 {
                        write!(f, "+")?;
                    }
                    body.write_at(f, PREC_PRODUCT)?;
                }
                Ok(())
            }
            Expr::Neg(b) => {
                write!(f, "-")?;
                b.write_at(f, PREC_PRODUCT)
            }
            Expr::Mul(factors) => write_product(f, factors),
            Expr::Pow(b, n) => {
                if *n < 0 {
                    write!(f, "1/")?;
                    write_power(f, b, -n)
                } else {
                    write_power(f, b, *n)
                }
            }
            Expr::Func(g, b) => {
                write!(f, "{}(", g.name())?;
                b.write_bare(f)?;
                write!(f, ")")
            }
        }
    }
}

fn split_sign(e: &Expr) -> (bool, Expr) {
    match e {
        Expr::Neg(b) => (true, (**b).clone()),
        Expr::Const(c) if c.is_negative() => (true, Expr::Const(-c)),
        other => (false, other.clone()),
    }
}

fn write_power(f: &mut fmt::Formatter<'_>, base: &Expr, n: i64) -> fmt::Result {
    base.write_at(f, PREC_ATOM)?;
    if n != 1 {
        write!(f, "^{n}")?;
    }
    Ok(())
}

fn write_product(f: &mut fmt::Formatter<'_>, factors: &[Expr]) -> fmt::Result {
    let mut numer: Vec<&Expr> = Vec::new();
    let mut denom: Vec<(&Expr, i64)> = Vec::new();
    let mut const_den = None;
    for fac in factors {
        match fac {
            Expr::Pow(b, n) if *n < 0 => denom.push((b, -n)),
            Expr::Const(c) if !c.is_integer() && !c.is_negative() => {
                if !c.numer().is_one() {
                    numer.push(fac);
                }
                const_den = Some(c.denom().clone());
            }
            other => numer.push(other),
        }
    }
    if numer.is_empty() {
        write!(f, "1")?;
    }
    for (idx, fac) in numer.iter().enumerate() {
        if idx > 0 {
            write!(f, "*")?;
        }
        match fac {
            Expr::Const(c) if !c.is_integer() => write!(f, "{}", c.numer())?,
            _ => fac.write_at(f, PREC_PRODUCT + 1)?,
        }
    }
    for (b, n) in denom {
        write!(f, "/")?;
        write_power(f, b, n)?;
    }
    if let Some(d) = const_den {
        write!(f, "/{d}")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_bare(f)
    }
}

#[cfg(test)]
mod tests {
    use crate::symexpr::{equivalent, parse_with};

    fn roundtrip(s: &str) {
        let e = parse_with(s, 3, 3).unwrap();
        let printed = e.to_string();
        let again = parse_with(&printed, 3, 3).unwrap();
        assert_eq!(again.to_string(), printed, "printer is not a fixpoint for {s}");
        assert!(equivalent(&e, &again).unwrap().equal, "{s} -> {printed}");
    }

    #[test]
    fn printing_round_trips() {
        for s in [
            "v[1,1]^2/2",
            "(lam/2+mu)*(v[1,1]^2+v[2,2]^2)",
            "-q[1]^2",
            "a-(b-c)",
            "a/(b*c)",
            "1/q[1]^2",
            "(-3/2)^2*q[1]",
            "sin(q[1])^2+cos(q[1])^2",
            "a/3/2",
            "-(a+b)*c",
            "q[1]^-2",
            "(a*b)^3",
            "2*x[1]-3/4",
            "d/dx[1](phi[2])*psi[1,2]+mult[1,2]",
        ] {
            roundtrip(s);
        }
    }

    #[test]
    fn quotients_print_compactly() {
        assert_eq!(parse_with("v[1,1]^2/2", 1, 1).unwrap().to_string(), "v[1,1]^2/2");
        assert_eq!(parse_with("a/b", 1, 1).unwrap().to_string(), "a/b");
        assert_eq!(parse_with("-a+b", 1, 1).unwrap().to_string(), "-a+b");
    }
}
