//! The drift/diffusion expression DSL: rational-exact literals, one variable,
//! unary neg/sin/cos/exp, binary + - *. Every node has an interval evaluator
//! and a symbolic derivative; polynomial expressions also evaluate exactly
//! over the rationals.

use crate::error::ExprError;
use crate::exactnum::{parse_rational, rat_to_string, Rational};
use crate::fint::{cos as fcos, exp as fexp, sin as fsin, FInterval};
use num_traits::{One, Zero};

#[derive(Clone, Debug, PartialEq)]
pub enum ExprAst {
    Const(Rational),
    Var,
    Neg(Box<ExprAst>),
    Sin(Box<ExprAst>),
    Cos(Box<ExprAst>),
    Exp(Box<ExprAst>),
    Add(Box<ExprAst>, Box<ExprAst>),
    Sub(Box<ExprAst>, Box<ExprAst>),
    Mul(Box<ExprAst>, Box<ExprAst>),
}

impl ExprAst {
    /// Interval evaluation over certified f64 intervals.
    pub fn eval_fint(&self, x: &FInterval) -> FInterval {
        match self {
            ExprAst::Const(c) => FInterval::from_rat_point(c),
            ExprAst::Var => *x,
            ExprAst::Neg(a) => a.eval_fint(x).neg(),
            ExprAst::Sin(a) => fsin(&a.eval_fint(x)),
            ExprAst::Cos(a) => fcos(&a.eval_fint(x)),
            ExprAst::Exp(a) => fexp(&a.eval_fint(x)),
            ExprAst::Add(a, b) => a.eval_fint(x).add(&b.eval_fint(x)),
            ExprAst::Sub(a, b) => a.eval_fint(x).sub(&b.eval_fint(x)),
            ExprAst::Mul(a, b) => a.eval_fint(x).mul(&b.eval_fint(x)),
        }
    }

    /// Exact rational evaluation; transcendental nodes have none.
    pub fn eval_rational(&self, x: &Rational) -> Result<Rational, ExprError> {
        match self {
            ExprAst::Const(c) => Ok(c.clone()),
            ExprAst::Var => Ok(x.clone()),
            ExprAst::Neg(a) => Ok(-a.eval_rational(x)?),
            ExprAst::Add(a, b) => Ok(a.eval_rational(x)? + b.eval_rational(x)?),
            ExprAst::Sub(a, b) => Ok(a.eval_rational(x)? - b.eval_rational(x)?),
            ExprAst::Mul(a, b) => Ok(a.eval_rational(x)? * b.eval_rational(x)?),
            ExprAst::Sin(_) | ExprAst::Cos(_) | ExprAst::Exp(_) => Err(ExprError::NoRationalEval {
                node: self.head_name().into(),
            }),
        }
    }

    pub fn is_polynomial(&self) -> bool {
        match self {
            ExprAst::Const(_) | ExprAst::Var => true,
            ExprAst::Neg(a) => a.is_polynomial(),
            ExprAst::Add(a, b) | ExprAst::Sub(a, b) | ExprAst::Mul(a, b) => {
                a.is_polynomial() && b.is_polynomial()
            }
            _ => false,
        }
    }

    fn head_name(&self) -> &'static str {
        match self {
            ExprAst::Const(_) => "const",
            ExprAst::Var => "x",
            ExprAst::Neg(_) => "neg",
            ExprAst::Sin(_) => "sin",
            ExprAst::Cos(_) => "cos",
            ExprAst::Exp(_) => "exp",
            ExprAst::Add(..) => "+",
            ExprAst::Sub(..) => "-",
            ExprAst::Mul(..) => "*",
        }
    }

    /// Symbolic derivative with respect to the variable, lightly simplified
    /// (units and zeros folded) so interval evaluation stays sharp.
    pub fn derivative(&self) -> ExprAst {
        use ExprAst::*;
        match self {
            Const(_) => Const(Rational::zero()),
            Var => Const(Rational::one()),
            Neg(a) => neg_s(a.derivative()),
            Sin(a) => mul_s(Cos(a.clone()), a.derivative()),
            Cos(a) => neg_s(mul_s(Sin(a.clone()), a.derivative())),
            Exp(a) => mul_s(Exp(a.clone()), a.derivative()),
            Add(a, b) => add_s(a.derivative(), b.derivative()),
            Sub(a, b) => sub_s(a.derivative(), b.derivative()),
            Mul(a, b) => add_s(
                mul_s(a.derivative(), (**b).clone()),
                mul_s((**a).clone(), b.derivative()),
            ),
        }
    }

    /// Canonical parenthesized rendering; parses back to the same tree.
    pub fn pretty(&self) -> String {
        match self {
            ExprAst::Const(c) => {
                if c < &Rational::zero() {
                    format!("({})", rat_to_string(c))
                } else {
                    rat_to_string(c)
                }
            }
            ExprAst::Var => "x".into(),
            ExprAst::Neg(a) => format!("-({})", a.pretty()),
            ExprAst::Sin(a) => format!("sin({})", a.pretty()),
            ExprAst::Cos(a) => format!("cos({})", a.pretty()),
            ExprAst::Exp(a) => format!("exp({})", a.pretty()),
            ExprAst::Add(a, b) => format!("({} + {})", a.pretty(), b.pretty()),
            ExprAst::Sub(a, b) => format!("({} - {})", a.pretty(), b.pretty()),
            ExprAst::Mul(a, b) => format!("({} * {})", a.pretty(), b.pretty()),
        }
    }
}

fn is_zero(e: &ExprAst) -> bool {
    matches!(e, ExprAst::Const(c) if c.is_zero())
}

fn is_one(e: &ExprAst) -> bool {
    matches!(e, ExprAst::Const(c) if c.is_one())
}

fn neg_s(a: ExprAst) -> ExprAst {
    if let ExprAst::Const(c) = &a {
        return ExprAst::Const(-c.clone());
    }
    ExprAst::Neg(Box::new(a))
}

fn add_s(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_zero(&a) {
        return b;
    }
    if is_zero(&b) {
        return a;
    }
    ExprAst::Add(Box::new(a), Box::new(b))
}

fn sub_s(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_zero(&b) {
        return a;
    }
    ExprAst::Sub(Box::new(a), Box::new(b))
}

fn mul_s(a: ExprAst, b: ExprAst) -> ExprAst {
    if is_zero(&a) || is_zero(&b) {
        return ExprAst::Const(Rational::zero());
    }
    if is_one(&a) {
        return b;
    }
    if is_one(&b) {
        return a;
    }
    ExprAst::Mul(Box::new(a), Box::new(b))
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn err(&self, msg: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.pos,
            msg: msg.into(),
        }
    }

    fn expr(&mut self) -> Result<ExprAst, ExprError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = ExprAst::Add(Box::new(acc), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = ExprAst::Sub(Box::new(acc), Box::new(self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<ExprAst, ExprError> {
        let mut acc = self.factor()?;
        while let Some(b'*') = self.peek() {
            self.pos += 1;
            acc = ExprAst::Mul(Box::new(acc), Box::new(self.factor()?));
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<ExprAst, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(ExprAst::Neg(Box::new(self.factor()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() => self.literal(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.err("expected a factor")),
        }
    }

    fn literal(&mut self) -> Result<ExprAst, ExprError> {
        let start = self.pos;
        while self
            .src
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_digit() || *c == b'.')
        {
            self.pos += 1;
        }
        // rational form p/q: the grammar has no division, so `/` after a
        // number always separates a literal's denominator
        if self.src.get(self.pos) == Some(&b'/') {
            self.pos += 1;
            if !self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                return Err(self.err("expected a denominator"));
            }
            while self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let q = parse_rational(text).ok_or(ExprError::Syntax {
            offset: start,
            msg: format!("bad numeric literal `{text}`"),
        })?;
        Ok(ExprAst::Const(q))
    }

    fn ident(&mut self) -> Result<ExprAst, ExprError> {
        let start = self.pos;
        while self
            .src
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        match name {
            "x" => Ok(ExprAst::Var),
            "sin" | "cos" | "exp" => {
                if self.peek() != Some(b'(') {
                    return Err(self.err("expected `(` after function name"));
                }
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(match name {
                    "sin" => ExprAst::Sin(Box::new(inner)),
                    "cos" => ExprAst::Cos(Box::new(inner)),
                    _ => ExprAst::Exp(Box::new(inner)),
                })
            }
            _ => Err(ExprError::UnknownIdent {
                name: name.into(),
                offset: start,
            }),
        }
    }
}

/// Parses with standard precedence (unary > `*` > `+`/`-`); errors carry
/// byte offsets.
pub fn parse_expr(src: &str) -> Result<ExprAst, ExprError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(ExprError::Syntax {
            offset: p.pos,
            msg: "trailing input".into(),
        });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::{rat, rat_int};

    #[test]
    fn parse_shapes() {
        assert_eq!(
            parse_expr("-1*x").unwrap(),
            ExprAst::Mul(
                Box::new(ExprAst::Neg(Box::new(ExprAst::Const(rat_int(1))))),
                Box::new(ExprAst::Var)
            )
        );
        // exact decimal conversion
        assert_eq!(
            parse_expr("0.2*x").unwrap(),
            ExprAst::Mul(
                Box::new(ExprAst::Const(rat(1, 5))),
                Box::new(ExprAst::Var)
            )
        );
        assert_eq!(parse_expr("3/4").unwrap(), ExprAst::Const(rat(3, 4)));
        // precedence: unary > * > +
        let e = parse_expr("1 + 2 * x").unwrap();
        assert_eq!(
            e,
            ExprAst::Add(
                Box::new(ExprAst::Const(rat_int(1))),
                Box::new(ExprAst::Mul(
                    Box::new(ExprAst::Const(rat_int(2))),
                    Box::new(ExprAst::Var)
                ))
            )
        );
    }

    #[test]
    fn parse_errors_carry_offsets() {
        match parse_expr("sin(x") {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("{other:?}"),
        }
        match parse_expr("2 * y") {
            Err(ExprError::UnknownIdent { name, offset }) => {
                assert_eq!(name, "y");
                assert_eq!(offset, 4);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip_pretty() {
        for src in [
            "-1*x",
            "0.2*x",
            "sin(x)*cos(x) - exp(-(x))",
            "1/2 + x*x*x",
            "-(x - 3/8)",
        ] {
            let e = parse_expr(src).unwrap();
            let printed = e.pretty();
            let back = parse_expr(&printed).unwrap();
            assert_eq!(back, e, "{src} -> {printed}");
        }
    }

    #[test]
    fn evaluation_exact_and_interval() {
        let e = parse_expr("x*x - 1/2").unwrap();
        assert_eq!(e.eval_rational(&rat(3, 4)).unwrap(), rat(1, 16));
        let iv = e.eval_fint(&FInterval::new(0.5, 1.0));
        assert!(iv.contains(-0.25) && iv.contains(0.5));
        assert!(parse_expr("sin(x)").unwrap().eval_rational(&rat_int(0)).is_err());
        let s = parse_expr("sin(x)").unwrap().eval_fint(&FInterval::point(1.0));
        assert!(s.contains(1.0f64.sin()));
    }

    #[test]
    fn derivatives() {
        let e = parse_expr("x*x").unwrap();
        let d = e.derivative();
        let at2 = d.eval_rational(&rat_int(2)).unwrap();
        assert_eq!(at2, rat_int(4));

        let s = parse_expr("sin(x)").unwrap().derivative();
        let v = s.eval_fint(&FInterval::point(0.0));
        assert!(v.contains(1.0));

        let ex = parse_expr("exp(-(x))").unwrap().derivative();
        let v = ex.eval_fint(&FInterval::point(0.0));
        assert!(v.contains(-1.0));
    }
}
