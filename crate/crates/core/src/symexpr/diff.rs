use super::{Expr, Func, Sym, VarRef};

/// Exact partial derivative with respect to a chart variable.
pub fn differentiate(e: &Expr, v: VarRef) -> Expr {
    differentiate_sym(e, &Sym::Var(v))
}

/// Exact partial derivative with respect to any symbol.
pub fn differentiate_sym(e: &Expr, s: &Sym) -> Expr {
    if !e.depends_on(s) {
        return Expr::zero();
    }
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Sym(t) => {
            if t == s {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Add(terms) => Expr::add_all(terms.iter().map(|t| differentiate_sym(t, s)).collect()),
        Expr::Mul(factors) => {
            let mut terms = Vec::new();
            for (i, f) in factors.iter().enumerate() {
                let df = differentiate_sym(f, s);
                if df.is_zero() {
                    continue;
                }
                let mut prod: Vec<Expr> = factors
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, g)| g.clone())
                    .collect();
                prod.push(df);
                terms.push(Expr::mul_all(prod));
            }
            Expr::add_all(terms)
        }
        Expr::Neg(b) => Expr::negate(differentiate_sym(b, s)),
        Expr::Pow(b, n) => Expr::mul_all(vec![
            Expr::int(*n),
            Expr::powi((**b).clone(), n - 1),
            differentiate_sym(b, s),
        ]),
        Expr::Func(g, b) => {
            let inner = differentiate_sym(b, s);
            let arg = (**b).clone();
            let outer = match g {
                Func::Sin => Expr::func(Func::Cos, arg),
                Func::Cos => Expr::negate(Expr::func(Func::Sin, arg)),
                Func::Exp => Expr::func(Func::Exp, arg),
                Func::Log => Expr::recip(arg),
                Func::Sqrt => Expr::recip(Expr::int(2) * Expr::func(Func::Sqrt, arg)),
            };
            outer * inner
        }
    }
}
