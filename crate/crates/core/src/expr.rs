//! Tiny arithmetic-expression language for user-declared systems and
//! Lyapunov data.
//!
//! Grammar (usual precedence, `^` right-associative and binding tighter than
//! unary minus):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | var | func '(' expr ')' | '(' expr ')' | '‖x‖' | 'norm(x)'
//! var    := 'x' digits | 'x[' digits ']' | 'r'
//! ```
//!
//! State components are 1-based. `r` is only accepted when the caller allows
//! it (comparison functions of a scalar argument).

use alloc::boxed::Box;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => libm::sin(v),
            Func::Cos => libm::cos(v),
            Func::Tanh => libm::tanh(v),
            Func::Exp => libm::exp(v),
            Func::Log => libm::log(v),
            Func::Sqrt => libm::sqrt(v),
            Func::Abs => v.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based state component.
    State(usize),
    /// Scalar argument `r`.
    Radius,
    /// Euclidean norm of the state.
    Norm,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Which variables an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scope {
    pub state_dim: usize,
    pub allow_radius: bool,
}

impl Scope {
    pub fn state(state_dim: usize) -> Self {
        Scope { state_dim, allow_radius: false }
    }

    pub fn radius() -> Self {
        Scope { state_dim: 0, allow_radius: true }
    }
}

impl Expr {
    pub fn parse(src: &str, scope: Scope) -> Result<Expr, Error> {
        let mut p = Parser { src: src.as_bytes(), pos: 0, scope };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(Error::Parse { position: p.pos, message: "unexpected trailing input" });
        }
        Ok(e)
    }

    /// Evaluates with state `x` and scalar argument `r`.
    pub fn eval(&self, x: &[f64], r: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::State(i) => x[*i],
            Expr::Radius => r,
            Expr::Norm => libm::sqrt(x.iter().map(|v| v * v).sum()),
            Expr::Neg(e) => -e.eval(x, r),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(x, r), b.eval(x, r));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
            Expr::Call(f, e) => f.apply(e.eval(x, r)),
        }
    }

    pub fn eval_state(&self, x: &[f64]) -> f64 {
        self.eval(x, 0.0)
    }

    pub fn eval_radius(&self, r: f64) -> f64 {
        self.eval(&[], r)
    }
}

fn pow(a: f64, b: f64) -> f64 {
    // Integer exponents via repeated multiplication so negative bases work.
    if b == libm::trunc(b) && b.abs() <= 64.0 {
        let mut result = 1.0;
        for _ in 0..(b.abs() as u32) {
            result *= a;
        }
        if b < 0.0 {
            1.0 / result
        } else {
            result
        }
    } else {
        libm::pow(a, b)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    scope: Scope,
}

const NORM_BAR: &[u8] = "‖".as_bytes();

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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_str(&mut self, s: &[u8]) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8, message: &'static str) -> Result<(), Error> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::Parse { position: self.pos, message })
        }
    }

    fn expr(&mut self) -> Result<Expr, Error> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat(b'+') {
                BinOp::Add
            } else if self.eat(b'-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, Error> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat(b'*') {
                BinOp::Mul
            } else if self.eat(b'/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, Error> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, Error> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, Error> {
        let start = match self.peek() {
            Some(_) => self.pos,
            None => return Err(Error::Parse { position: self.pos, message: "unexpected end of input" }),
        };
        if self.eat(b'(') {
            let e = self.expr()?;
            self.expect(b')', "expected ')'")?;
            return Ok(e);
        }
        if self.eat_str(NORM_BAR) {
            self.norm_argument()?;
            if !self.eat_str(NORM_BAR) {
                return Err(Error::Parse { position: self.pos, message: "expected closing '‖'" });
            }
            return Ok(Expr::Norm);
        }
        let c = self.src[start];
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            let ident = self.ident();
            return self.identifier(ident, start);
        }
        Err(Error::Parse { position: start, message: "unexpected character" })
    }

    fn norm_argument(&mut self) -> Result<(), Error> {
        let at = self.pos;
        if self.eat(b'x') && self.scope.state_dim > 0 {
            Ok(())
        } else {
            Err(Error::Parse { position: at, message: "norm only applies to the state x" })
        }
    }

    fn ident(&mut self) -> &'a str {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        let src: &'a [u8] = self.src;
        core::str::from_utf8(&src[start..self.pos]).unwrap_or("")
    }

    fn digits(&mut self) -> Option<usize> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        core::str::from_utf8(&self.src[start..self.pos]).ok()?.parse().ok()
    }

    fn identifier(&mut self, ident: &str, start: usize) -> Result<Expr, Error> {
        match ident {
            "x" => {
                let bracket = self.src.get(self.pos) == Some(&b'[');
                if bracket {
                    self.pos += 1;
                }
                let idx = self.digits().ok_or(Error::Parse { position: self.pos, message: "expected component index" })?;
                if bracket {
                    self.expect(b']', "expected ']'")?;
                }
                if idx == 0 || idx > self.scope.state_dim {
                    return Err(Error::UnknownVariable { position: start });
                }
                Ok(Expr::State(idx - 1))
            }
            "r" if self.scope.allow_radius => Ok(Expr::Radius),
            "pi" => Ok(Expr::Const(core::f64::consts::PI)),
            "norm" => {
                self.expect(b'(', "expected '(' after norm")?;
                self.norm_argument()?;
                self.expect(b')', "expected ')'")?;
                Ok(Expr::Norm)
            }
            name => {
                let f = Func::from_name(name).ok_or(Error::UnknownVariable { position: start })?;
                self.expect(b'(', "expected '(' after function name")?;
                let arg = self.expr()?;
                self.expect(b')', "expected ')'")?;
                Ok(Expr::Call(f, Box::new(arg)))
            }
        }
    }

    fn number(&mut self) -> Result<Expr, Error> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        self.pos = i;
        core::str::from_utf8(&s[start..i])
            .ok()
            .and_then(|t| t.parse::<f64>().ok())
            .map(Expr::Const)
            .ok_or(Error::Parse { position: start, message: "malformed number" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: &[f64]) -> f64 {
        Expr::parse(src, Scope::state(x.len())).unwrap().eval_state(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[0.0]), 7.0);
        assert_eq!(ev("(1 + 2) * 3", &[0.0]), 9.0);
        assert_eq!(ev("2 ^ 3 ^ 2", &[0.0]), 512.0);
        assert_eq!(ev("-2 ^ 2", &[0.0]), -4.0);
        assert_eq!(ev("8 / 4 / 2", &[0.0]), 1.0);
        assert_eq!(ev("10 - 4 - 3", &[0.0]), 3.0);
        assert_eq!(ev("1.5e1 + 2E-1", &[0.0]), 15.2);
    }

    #[test]
    fn state_components_and_norms() {
        let x = [3.0, 4.0];
        assert_eq!(ev("x1 + x[2]", &x), 7.0);
        assert_eq!(ev("‖x‖", &x), 5.0);
        assert_eq!(ev("norm(x)^2", &x), 25.0);
        assert_eq!(ev("x1^3", &[-2.0, 0.0]), -8.0);
        // Kellett first component.
        let k = ev("(‖x‖^2 - 1) * x1 / 8 - x2 / 8", &[1.0, 0.0]);
        assert_eq!(k, 0.0);
    }

    #[test]
    fn radius_scope() {
        let e = Expr::parse("7 * r^2 / 32", Scope::radius()).unwrap();
        assert_eq!(e.eval_radius(2.0), 7.0 / 8.0);
        assert!(Expr::parse("r", Scope::state(2)).is_err());
    }

    #[test]
    fn functions() {
        assert!((ev("sin(pi / 2) + cos(0) + exp(0) + sqrt(4) + abs(-1)", &[0.0]) - 6.0).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(Expr::parse("x3", Scope::state(2)), Err(Error::UnknownVariable { position: 0 }));
        assert_eq!(Expr::parse("x0", Scope::state(2)), Err(Error::UnknownVariable { position: 0 }));
        assert!(matches!(Expr::parse("1 +", Scope::state(1)), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("(1", Scope::state(1)), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("1 2", Scope::state(1)), Err(Error::Parse { position: 2, .. })));
        assert!(matches!(Expr::parse("foo(1)", Scope::state(1)), Err(Error::UnknownVariable { .. })));
        assert!(matches!(Expr::parse("‖y‖", Scope::state(1)), Err(Error::Parse { .. })));
    }
}
