//! Rate expressions: a tiny real-valued language in one variable `t`.
//!
//! Grammar (highest precedence first):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 't' | 'pi' | 'e' | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | tan | exp | log | sqrt | abs
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so
//! `-t^2 = -(t^2)` and `2^-1 = 0.5`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at column {column}")]
pub struct ParseError {
    pub message: String,
    /// 1-based character column.
    pub column: usize,
}

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
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
        }
    }
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Time,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Expr::Num(x) => *x,
            Expr::Time => t,
            Expr::Neg(a) => -a.eval(t),
            Expr::Bin(op, a, b) => {
                let (x, y) = (a.eval(t), b.eval(t));
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => x.powf(y),
                }
            }
            Expr::Call(f, a) => f.apply(a.eval(t)),
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Time => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant(),
            Expr::Bin(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Symbolic derivative with respect to `t`.
    pub fn derivative(&self) -> Expr {
        use Expr::*;
        let bx = Box::new;
        match self {
            Num(_) => Num(0.0),
            Time => Num(1.0),
            Neg(a) => Neg(bx(a.derivative())),
            Bin(BinOp::Add, a, b) => Bin(BinOp::Add, bx(a.derivative()), bx(b.derivative())),
            Bin(BinOp::Sub, a, b) => Bin(BinOp::Sub, bx(a.derivative()), bx(b.derivative())),
            Bin(BinOp::Mul, a, b) => Bin(
                BinOp::Add,
                bx(Bin(BinOp::Mul, bx(a.derivative()), b.clone())),
                bx(Bin(BinOp::Mul, a.clone(), bx(b.derivative()))),
            ),
            Bin(BinOp::Div, a, b) => Bin(
                BinOp::Div,
                bx(Bin(
                    BinOp::Sub,
                    bx(Bin(BinOp::Mul, bx(a.derivative()), b.clone())),
                    bx(Bin(BinOp::Mul, a.clone(), bx(b.derivative()))),
                )),
                bx(Bin(BinOp::Pow, b.clone(), bx(Num(2.0)))),
            ),
            Bin(BinOp::Pow, a, b) if b.is_constant() => Bin(
                BinOp::Mul,
                bx(Bin(
                    BinOp::Mul,
                    b.clone(),
                    bx(Bin(BinOp::Pow, a.clone(), bx(Bin(BinOp::Sub, b.clone(), bx(Num(1.0)))))),
                )),
                bx(a.derivative()),
            ),
            // d(a^b) = a^b (b' ln a + b a'/a)
            Bin(BinOp::Pow, a, b) => Bin(
                BinOp::Mul,
                bx(self.clone()),
                bx(Bin(
                    BinOp::Add,
                    bx(Bin(BinOp::Mul, bx(b.derivative()), bx(Call(Func::Log, a.clone())))),
                    bx(Bin(BinOp::Div, bx(Bin(BinOp::Mul, b.clone(), bx(a.derivative()))), a.clone())),
                )),
            ),
            Call(f, a) => {
                let inner = a.derivative();
                let outer = match f {
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => Neg(bx(Call(Func::Sin, a.clone()))),
                    Func::Tan => Bin(
                        BinOp::Div,
                        bx(Num(1.0)),
                        bx(Bin(BinOp::Pow, bx(Call(Func::Cos, a.clone())), bx(Num(2.0)))),
                    ),
                    Func::Exp => Call(Func::Exp, a.clone()),
                    Func::Log => Bin(BinOp::Div, bx(Num(1.0)), a.clone()),
                    Func::Sqrt => Bin(
                        BinOp::Div,
                        bx(Num(0.5)),
                        bx(Call(Func::Sqrt, a.clone())),
                    ),
                    Func::Abs => Bin(BinOp::Div, a.clone(), bx(Call(Func::Abs, a.clone()))),
                };
                Bin(BinOp::Mul, bx(outer), bx(inner))
            }
        }
    }
}

/// Fully parenthesized rendering; re-parses to an identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x:?}"),
            Expr::Time => write!(f, "t"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

fn lex(src: &str) -> Result<Lexer, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        let col = i + 1;
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| ParseError {
                message: format!("malformed number '{text}'"),
                column: col,
            })?;
            if !value.is_finite() {
                return Err(ParseError {
                    message: format!("number '{text}' is out of range"),
                    column: col,
                });
            }
            toks.push((Tok::Num(value), col));
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else {
            let tok = match ch {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(ch),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    return Err(ParseError {
                        message: format!("unexpected character '{ch}'"),
                        column: col,
                    })
                }
            };
            toks.push((tok, col));
            i += 1;
        }
    }
    toks.push((Tok::End, chars.len() + 1));
    Ok(Lexer { toks })
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn column(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            message: message.into(),
            column: self.column(),
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Tok::Op('-') = self.peek() {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if let Tok::Op('^') = self.peek() {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(Expr::Num(x))
            }
            Tok::Ident(name) => {
                let col = self.column();
                self.bump();
                match name.as_str() {
                    "t" => Ok(Expr::Time),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => Ok(Expr::Num(std::f64::consts::E)),
                    _ => {
                        let Some(func) = Func::from_name(&name) else {
                            return Err(ParseError {
                                message: format!("unknown identifier '{name}'"),
                                column: col,
                            });
                        };
                        if *self.peek() != Tok::LParen {
                            return self.error(format!("expected '(' after '{name}'"));
                        }
                        self.bump();
                        let arg = self.expr()?;
                        if *self.peek() != Tok::RParen {
                            return self.error("expected ')'");
                        }
                        self.bump();
                        Ok(Expr::Call(func, Box::new(arg)))
                    }
                }
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return self.error("expected ')'");
                }
                self.bump();
                Ok(inner)
            }
            Tok::End => self.error("unexpected end of expression"),
            Tok::RParen => self.error("unexpected ')'"),
            Tok::Op(op) => self.error(format!("unexpected operator '{op}'")),
        }
    }
}

/// Parses a rate expression; errors carry the 1-based column of the offending token.
pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    let lexer = lex(text)?;
    let mut p = Parser {
        toks: lexer.toks,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.error("unexpected trailing input");
    }
    Ok(e)
}
