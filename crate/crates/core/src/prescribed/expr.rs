//! Expression language for user-defined prescriptions `H(y)`.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?            right associative
//! atom   := number | 'y' | '(' expr ')' | func '(' args ')'
//! func   := abs | exp | log | sqrt | pow
//! ```
//!
//! `^` binds tighter than unary minus, so `-y^2` is `-(y^2)`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Exp,
    Log,
    Sqrt,
    Pow,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        match name {
            "abs" => Some(Func::Abs),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            "pow" => Some(Func::Pow),
            _ => None,
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Pow => "pow",
        }
    }
}

/// Parsed expression tree in the single variable `y`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Value together with its derivative in `y` (forward-mode).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dual {
    v: f64,
    d: f64,
}

impl Dual {
    fn constant(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }
}

fn powd(a: Dual, b: Dual) -> Dual {
    let v = a.v.powf(b.v);
    // d(a^b) = b a^(b-1) a' + a^b ln(a) b'; each term is dropped when its
    // factor a' or b' vanishes so that 0 * inf never appears.
    let mut d = 0.0;
    if a.d != 0.0 {
        d += b.v * a.v.powf(b.v - 1.0) * a.d;
    }
    if b.d != 0.0 {
        d += v * a.v.ln() * b.d;
    }
    Dual { v, d }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut parser = Parser { tokens, pos: 0, len: src.len() };
        let expr = parser.expr()?;
        match parser.peek() {
            None => Ok(expr),
            Some(tok) => Err(Error::Parse {
                position: tok.pos,
                message: format!("unexpected token {}", tok.kind),
            }),
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.eval_dual(y).v
    }

    pub fn derivative(&self, y: f64) -> f64 {
        self.eval_dual(y).d
    }

    fn eval_dual(&self, y: f64) -> Dual {
        match self {
            Expr::Num(c) => Dual::constant(*c),
            Expr::Var => Dual { v: y, d: 1.0 },
            Expr::Neg(e) => {
                let a = e.eval_dual(y);
                Dual { v: -a.v, d: -a.d }
            }
            Expr::Bin(op, l, r) => {
                let a = l.eval_dual(y);
                let b = r.eval_dual(y);
                match op {
                    BinOp::Add => Dual { v: a.v + b.v, d: a.d + b.d },
                    BinOp::Sub => Dual { v: a.v - b.v, d: a.d - b.d },
                    BinOp::Mul => Dual { v: a.v * b.v, d: a.d * b.v + a.v * b.d },
                    BinOp::Div => Dual {
                        v: a.v / b.v,
                        d: (a.d * b.v - a.v * b.d) / (b.v * b.v),
                    },
                    BinOp::Pow => powd(a, b),
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval_dual(y);
                match f {
                    Func::Abs => Dual { v: a.v.abs(), d: a.d * a.v.signum() },
                    Func::Exp => {
                        let v = a.v.exp();
                        Dual { v, d: v * a.d }
                    }
                    Func::Log => Dual { v: a.v.ln(), d: a.d / a.v },
                    Func::Sqrt => {
                        let v = a.v.sqrt();
                        Dual { v, d: if a.d == 0.0 { 0.0 } else { a.d / (2.0 * v) } }
                    }
                    Func::Pow => powd(a, args[1].eval_dual(y)),
                }
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Var => write!(f, "y"),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Bin(op, l, r) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({l} {sym} {r})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Num(v) => write!(f, "number {v}"),
            TokenKind::Ident(s) => write!(f, "'{s}'"),
            TokenKind::Plus => write!(f, "'+'"),
            TokenKind::Minus => write!(f, "'-'"),
            TokenKind::Star => write!(f, "'*'"),
            TokenKind::Slash => write!(f, "'/'"),
            TokenKind::Caret => write!(f, "'^'"),
            TokenKind::LParen => write!(f, "'('"),
            TokenKind::RParen => write!(f, "')'"),
            TokenKind::Comma => write!(f, "','"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    pos: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = match c {
            '+' => TokenKind::Plus,
            '-' => TokenKind::Minus,
            '*' => TokenKind::Star,
            '/' => TokenKind::Slash,
            '^' => TokenKind::Caret,
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            ',' => TokenKind::Comma,
            c if c.is_ascii_digit() || c == '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // exponent part: 1e-3, 2.5E+4
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| Error::Parse {
                    position: start,
                    message: format!("malformed number '{text}'"),
                })?;
                out.push(Token { kind: TokenKind::Num(v), pos: start });
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(Token {
                    kind: TokenKind::Ident(src[start..i].to_string()),
                    pos: start,
                });
                continue;
            }
            other => {
                return Err(Error::Parse {
                    position: start,
                    message: format!("unexpected character '{other}'"),
                })
            }
        };
        out.push(Token { kind, pos: start });
        i += 1;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek().map(|t| &t.kind) == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<()> {
        match self.next() {
            Some(t) if t.kind == kind => Ok(()),
            Some(t) => Err(Error::Parse {
                position: t.pos,
                message: format!("expected {kind}, found {}", t.kind),
            }),
            None => Err(Error::Parse {
                position: self.len,
                message: format!("expected {kind}, found end of input"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat(&TokenKind::Plus) {
                BinOp::Add
            } else if self.eat(&TokenKind::Minus) {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat(&TokenKind::Star) {
                BinOp::Mul
            } else if self.eat(&TokenKind::Slash) {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(&TokenKind::Minus) {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(&TokenKind::Caret) {
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self.next().ok_or(Error::Parse {
            position: self.len,
            message: "unexpected end of input".into(),
        })?;
        match tok.kind {
            TokenKind::Num(v) => Ok(Expr::Num(v)),
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::Ident(name) if name == "y" => Ok(Expr::Var),
            TokenKind::Ident(name) => {
                let func = Func::from_name(&name).ok_or_else(|| Error::Parse {
                    position: tok.pos,
                    message: format!("unknown identifier '{name}'"),
                })?;
                self.expect(TokenKind::LParen)?;
                let mut args = vec![self.expr()?];
                while self.eat(&TokenKind::Comma) {
                    args.push(self.expr()?);
                }
                self.expect(TokenKind::RParen)?;
                if args.len() != func.arity() {
                    return Err(Error::Parse {
                        position: tok.pos,
                        message: format!(
                            "{} takes {} argument(s), got {}",
                            func.name(),
                            func.arity(),
                            args.len()
                        ),
                    });
                }
                Ok(Expr::Call(func, args))
            }
            other => Err(Error::Parse {
                position: tok.pos,
                message: format!("unexpected token {other}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, y: f64) -> f64 {
        Expr::parse(src).unwrap().eval(y)
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(ev("2 ^ 3 ^ 2", 0.0), 512.0);
        assert_eq!(ev("-y^2", 3.0), -9.0);
        assert_eq!(ev("-2 * 3", 0.0), -6.0);
        assert_eq!(ev("2^-1", 0.0), 0.5);
        assert_eq!(ev("(1 - y)*(1 + y)", 0.5), 0.75);
        assert_eq!(ev("8 / 4 / 2", 0.0), 1.0);
        assert_eq!(ev("1 - 2 - 3", 0.0), -4.0);
    }

    #[test]
    fn functions() {
        assert_eq!(ev("abs(y)", -2.0), 2.0);
        assert!((ev("exp(log(y))", 2.5) - 2.5).abs() < 1e-15);
        assert_eq!(ev("sqrt(4)", 0.0), 2.0);
        assert_eq!(ev("pow(y, 3)", 2.0), 8.0);
        assert_eq!(ev("1.5e1 + 2E-1", 0.0), 15.2);
    }

    #[test]
    fn example_prescription() {
        let e = Expr::parse("-(1 - y^2)^2 * (2 - y^2)").unwrap();
        assert_eq!(e.eval(0.0), -2.0);
        assert_eq!(e.eval(1.0), 0.0);
        // d/dy at y = 0.5: -(0.75)^2 * 1.75 differentiated analytically
        let y: f64 = 0.5;
        let w = 1.0 - y * y;
        let expected = 4.0 * y * w * (2.0 - y * y) + 2.0 * y * w * w;
        assert!((e.derivative(y) - expected).abs() < 1e-14);
    }

    #[test]
    fn derivative_at_zero_base() {
        let e = Expr::parse("-(1-y^2)^2").unwrap();
        assert_eq!(e.derivative(1.0), 0.0);
        assert!(e.derivative(1.0).is_finite());
    }

    #[test]
    fn errors_carry_position() {
        match Expr::parse("1 + * 2") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 4),
            other => panic!("unexpected {other:?}"),
        }
        match Expr::parse("(1 + y") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 6),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(Expr::parse("z + 1"), Err(Error::Parse { position: 0, .. })));
        assert!(matches!(Expr::parse("pow(y)"), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("1 $ 2"), Err(Error::Parse { position: 2, .. })));
        assert!(matches!(Expr::parse(""), Err(Error::Parse { .. })));
    }

    #[test]
    fn whitespace_insensitive() {
        assert_eq!(ev("  -( 1-y ^2 ) ^ 2", 0.5), ev("-(1-y^2)^2", 0.5));
    }
}
