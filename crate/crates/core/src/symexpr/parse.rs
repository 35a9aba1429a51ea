use num_bigint::BigInt;
use num_rational::BigRational;

use super::{Expr, FieldBase, FieldSym, Func, Sym, VarRef};
use crate::geometry::Chart;
use crate::{Error, Result};

/// Parses an expression, checking variable indices against the chart bounds.
pub fn parse(text: &str, chart: &Chart) -> Result<Expr> {
    parse_with(text, chart.n, chart.k)
}

/// Parses an expression for a problem with `n` fields and `k` parameters.
///
/// Besides chart variables the grammar accepts field symbols `phi[i]`,
/// `phi[i,a]`, `psi[a,i]`, `mult[A,a]`, total derivatives `d/dx[a](...)` of
/// field symbols, and coordinate differentials such as `dq[i]`, which parse to
/// parameters of the same name.
pub fn parse_with(text: &str, n: usize, k: usize) -> Result<Expr> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, n, k };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    n: usize,
    k: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { offset: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat(b'+') {
                terms.push(self.term()?);
            } else if self.eat(b'-') {
                terms.push(Expr::negate(self.term()?));
            } else {
                break;
            }
        }
        Ok(Expr::add_all(terms))
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        loop {
            if self.eat(b'*') {
                acc = Expr::mul_all(vec![acc, self.factor()?]);
            } else if self.peek() == Some(b'/') {
                self.pos += 1;
                acc = Expr::mul_all(vec![acc, Expr::recip(self.factor()?)]);
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr> {
        let negative = self.eat(b'-');
        let mut base = self.atom()?;
        if self.eat(b'^') {
            let n = self.exponent()?;
            base = Expr::powi(base, n);
        }
        Ok(if negative { Expr::negate(base) } else { base })
    }

    fn exponent(&mut self) -> Result<i64> {
        let paren = self.eat(b'(');
        let negative = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer exponent"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let mag: i64 = digits.parse().map_err(|_| self.err("exponent too large"))?;
        if paren {
            self.expect(b')')?;
        }
        Ok(if negative { -mag } else { mag })
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let mut digits = String::new();
        let mut scale: i64 = 0;
        let mut seen_dot = false;
        while let Some(&c) = self.src.get(self.pos) {
            if c.is_ascii_digit() {
                digits.push(c as char);
                if seen_dot {
                    scale -= 1;
                }
            } else if c == b'.' && !seen_dot {
                seen_dot = true;
            } else {
                break;
            }
            self.pos += 1;
        }
        if digits.is_empty() {
            self.pos = start;
            return Err(self.err("malformed number"));
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            let mut sign = 1;
            match self.src.get(self.pos) {
                Some(b'-') => {
                    sign = -1;
                    self.pos += 1;
                }
                Some(b'+') => self.pos += 1,
                _ => {}
            }
            let es = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if es == self.pos {
                self.pos = save;
            } else {
                let e: i64 = std::str::from_utf8(&self.src[es..self.pos])
                    .unwrap()
                    .parse()
                    .map_err(|_| self.err("exponent too large"))?;
                scale += sign * e;
            }
        }
        let mantissa: BigInt = digits.parse().map_err(|_| self.err("malformed number"))?;
        let ten = BigRational::from_integer(BigInt::from(10));
        let mut value = BigRational::from_integer(mantissa);
        if scale != 0 {
            value *= super::rational_pow(&ten, scale);
        }
        Ok(Expr::Const(value))
    }

    fn word(&mut self) -> &'a str {
        let start = self.pos;
        while let Some(&c) = self.src.get(self.pos) {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap()
    }

    fn index_list(&mut self) -> Result<Vec<usize>> {
        self.expect(b'[')?;
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("expected index"));
            }
            let idx = std::str::from_utf8(&self.src[start..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| self.err("index too large"))?;
            out.push(idx);
            if self.eat(b']') {
                return Ok(out);
            }
            self.expect(b',')?;
        }
    }

    fn identifier(&mut self) -> Result<Expr> {
        let start = self.pos;
        let name = self.word();
        if name == "d" && self.src[self.pos..].starts_with(b"/dx[") {
            self.pos += 3;
            return self.total_derivative(start);
        }
        if let Some(f) = Func::from_name(name) {
            if self.peek() == Some(b'(') {
                self.pos += 1;
                let arg = self.expr()?;
                self.expect(b')')?;
                return Ok(Expr::func(f, arg));
            }
        }
        if self.peek() != Some(b'[') {
            return Ok(Expr::param(name));
        }
        let idx = self.index_list()?;
        if let Some(v) = self.varref(name, &idx, start)? {
            v.check_bounds(self.n, self.k)?;
            return Ok(Expr::var(v));
        }
        if let Some(fs) = self.field_base(name, &idx, start)? {
            return Ok(Expr::field(FieldSym::new(fs)));
        }
        if let Some(stripped) = name.strip_prefix('d') {
            if let Some(v) = self.varref(stripped, &idx, start)? {
                v.check_bounds(self.n, self.k)?;
                return Ok(Expr::Sym(Sym::Param(format!("d{v}"))));
            }
        }
        Err(Error::Parse { offset: start, msg: format!("unknown indexed symbol `{name}`") })
    }

    fn arity_err(&self, name: &str, want: usize, start: usize) -> Error {
        Error::Parse {
            offset: start,
            msg: format!("`{name}` takes {want} indices"),
        }
    }

    fn varref(&self, name: &str, idx: &[usize], start: usize) -> Result<Option<VarRef>> {
        let want = match name {
            "x" | "q" => 1,
            "v" | "w" | "p" => 2,
            "u" | "y" => 3,
            _ => return Ok(None),
        };
        if idx.len() != want {
            return Err(self.arity_err(name, want, start));
        }
        Ok(Some(match name {
            "x" => VarRef::X(idx[0]),
            "q" => VarRef::Q(idx[0]),
            "v" => VarRef::V(idx[0], idx[1]),
            "w" => VarRef::W(idx[0], idx[1]),
            "p" => VarRef::P(idx[0], idx[1]),
            "u" => VarRef::U(idx[0], idx[1], idx[2]),
            _ => VarRef::Y(idx[0], idx[1], idx[2]),
        }))
    }

    fn field_base(&self, name: &str, idx: &[usize], start: usize) -> Result<Option<FieldBase>> {
        let (n, k) = (self.n, self.k);
        let bad = |what: &str| Error::IndexOutOfRange {
            var: format!("{name}{idx:?}"),
            msg: format!("{what} out of range for n={n}, k={k}"),
        };
        let in_n = |i: usize| (1..=n).contains(&i);
        let in_k = |a: usize| (1..=k).contains(&a);
        let base = match (name, idx.len()) {
            ("phi", 1) => {
                if !in_n(idx[0]) {
                    return Err(bad("field index"));
                }
                FieldBase::Phi(idx[0])
            }
            ("phi", 2) => {
                if !in_n(idx[0]) || !in_k(idx[1]) {
                    return Err(bad("index"));
                }
                FieldBase::PhiVel(idx[0], idx[1])
            }
            ("psi", 2) => {
                if !in_k(idx[0]) || !in_n(idx[1]) {
                    return Err(bad("index"));
                }
                FieldBase::Psi(idx[0], idx[1])
            }
            ("mult", 2) => {
                if idx[0] == 0 || !in_k(idx[1]) {
                    return Err(bad("index"));
                }
                FieldBase::Mult(idx[0], idx[1])
            }
            ("phi", _) => return Err(self.arity_err(name, 2, start)),
            ("psi", _) | ("mult", _) => return Err(self.arity_err(name, 2, start)),
            _ => return Ok(None),
        };
        Ok(Some(base))
    }

    fn total_derivative(&mut self, start: usize) -> Result<Expr> {
        let idx = self.index_list()?;
        if idx.len() != 1 || !(1..=self.k).contains(&idx[0]) {
            return Err(Error::IndexOutOfRange {
                var: format!("d/dx{idx:?}"),
                msg: format!("derivative direction must be in 1..={}", self.k),
            });
        }
        self.expect(b'(')?;
        let inner = self.expr()?;
        self.expect(b')')?;
        match inner {
            Expr::Sym(Sym::Field(fs)) if fs.derivs.len() < 2 => Ok(Expr::field(fs.derive(idx[0]))),
            _ => Err(Error::Parse {
                offset: start,
                msg: "d/dx applies to a field symbol with at most one prior derivative".into(),
            }),
        }
    }
}
