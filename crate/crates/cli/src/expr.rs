//! Arithmetic expressions over grid coordinates.
//!
//! Grammar: numbers, `pi`, coordinates `x1..x4` (or `x_1..x_4`), the
//! functions `sin`, `cos`, `exp`, parentheses, unary minus and the binary
//! operators `+ - * / ^`. `^` binds tightest and associates to the right, so
//! `-x1^2` is `-(x1^2)`.

use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct ExprError {
    /// Zero-based character offset into the source text.
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at position {}: {}", self.position, self.message)
    }
}

impl std::error::Error for ExprError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Call(Func, Box<Node>),
    /// Operator position is kept for evaluation errors.
    Bin(BinOp, usize, Box<Node>, Box<Node>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
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
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| ExprError {
                position: start,
                message: format!("malformed number '{text}'"),
            })?;
            out.push((start, Tok::Num(value)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
        } else if "+-*/^".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else if c == '(' {
            out.push((i, Tok::LParen));
            i += 1;
        } else if c == ')' {
            out.push((i, Tok::RParen));
            i += 1;
        } else {
            return Err(ExprError {
                position: i,
                message: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    dims: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError {
            position: self.offset(),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            let at = self.offset();
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, at, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            let at = self.offset();
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, at, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            let at = self.offset();
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, at, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let at = self.offset();
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of expression");
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => self.ident(&name, at),
            Tok::RParen => Err(ExprError {
                position: at,
                message: "unexpected ')'".into(),
            }),
            Tok::Op(c) => Err(ExprError {
                position: at,
                message: format!("unexpected operator '{c}'"),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err("expected ')'"),
        }
    }

    fn ident(&mut self, name: &str, at: usize) -> Result<Node, ExprError> {
        let func = match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            _ => None,
        };
        if let Some(func) = func {
            if self.peek() != Some(&Tok::LParen) {
                return self.err(format!("expected '(' after {name}"));
            }
            self.pos += 1;
            let arg = self.expr()?;
            self.expect_rparen()?;
            return Ok(Node::Call(func, Box::new(arg)));
        }
        if name == "pi" {
            return Ok(Node::Num(std::f64::consts::PI));
        }
        let digits = name
            .strip_prefix("x_")
            .or_else(|| name.strip_prefix('x'))
            .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()));
        if let Some(axis) = digits.and_then(|d| d.parse::<usize>().ok()) {
            if axis == 0 || axis > self.dims {
                return Err(ExprError {
                    position: at,
                    message: format!(
                        "coordinate {name} out of range for a {}-dimensional grid",
                        self.dims
                    ),
                });
            }
            return Ok(Node::Var(axis - 1));
        }
        Err(ExprError {
            position: at,
            message: format!("unknown identifier '{name}'"),
        })
    }
}

impl Expr {
    /// Parses `src` for use on a grid of dimension `dims`.
    pub fn parse(src: &str, dims: usize) -> Result<Self, ExprError> {
        let toks = tokenize(src)?;
        let mut p = Parser {
            toks,
            pos: 0,
            end: src.chars().count(),
            dims,
        };
        let root = p.expr()?;
        if p.pos != p.toks.len() {
            return p.err("unexpected trailing input");
        }
        Ok(Self {
            root,
            source: src.to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        let v = eval(&self.root, x)?;
        if !v.is_finite() {
            return Err(ExprError {
                position: 0,
                message: format!("expression evaluates to {v} at {x:?}"),
            });
        }
        Ok(v)
    }
}

fn eval(node: &Node, x: &[f64]) -> Result<f64, ExprError> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Var(i) => x[*i],
        Node::Neg(a) => -eval(a, x)?,
        Node::Call(f, a) => {
            let v = eval(a, x)?;
            match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
            }
        }
        Node::Bin(op, at, a, b) => {
            let (l, r) = (eval(a, x)?, eval(b, x)?);
            match op {
                BinOp::Add => l + r,
                BinOp::Sub => l - r,
                BinOp::Mul => l * r,
                BinOp::Div => {
                    if r.abs() < 1e-300 {
                        return Err(ExprError {
                            position: *at,
                            message: format!("division by {r:e} at {x:?}"),
                        });
                    }
                    l / r
                }
                BinOp::Pow => l.powf(r),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: &[f64]) -> f64 {
        Expr::parse(src, x.len()).unwrap().eval(x).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[0.0]), 7.0);
        assert_eq!(ev("(1 + 2) * 3", &[0.0]), 9.0);
        assert_eq!(ev("2^3^2", &[0.0]), 512.0);
        assert_eq!(ev("-2^2", &[0.0]), -4.0);
        assert_eq!(ev("8 / 4 / 2", &[0.0]), 1.0);
        assert_eq!(ev("1 - 2 - 3", &[0.0]), -4.0);
        assert_eq!(ev("2 * -3", &[0.0]), -6.0);
        assert_eq!(ev("1.5e2 + 2E-1", &[0.0]), 150.2);
    }

    #[test]
    fn functions_and_coordinates() {
        let x = [0.3, 1.1];
        assert_eq!(ev("sin(x1) + cos(x_2)", &x), 0.3f64.sin() + 1.1f64.cos());
        assert_eq!(ev("exp(-x2) * pi", &x), (-1.1f64).exp() * std::f64::consts::PI);
        assert_eq!(ev("sin(x1)^2", &x), 0.3f64.sin().powf(2.0));
    }

    #[test]
    fn errors_carry_positions() {
        let e = Expr::parse("1 + x3", 2).unwrap_err();
        assert_eq!(e.position, 4);
        let e = Expr::parse("sin x1", 1).unwrap_err();
        assert_eq!(e.position, 4);
        let e = Expr::parse("(1 + 2", 1).unwrap_err();
        assert_eq!(e.position, 6);
        let e = Expr::parse("1 $ 2", 1).unwrap_err();
        assert_eq!(e.position, 2);
        let e = Expr::parse("tan(x1)", 1).unwrap_err();
        assert_eq!(e.position, 0);
        let e = Expr::parse("1 2", 1).unwrap_err();
        assert_eq!(e.position, 2);
    }

    #[test]
    fn tiny_divisors_are_rejected() {
        let e = Expr::parse("1 / sin(x1)", 1).unwrap();
        assert!(e.eval(&[0.0]).is_err());
        assert!(e.eval(&[1.0]).is_ok());
        let e = Expr::parse("exp(1000)", 1).unwrap();
        assert!(e.eval(&[0.0]).is_err());
    }
}
