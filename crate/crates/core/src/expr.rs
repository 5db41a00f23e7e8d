//! Closed expressions in the observation index `i`, used for parameters that
//! vary along the sequence, e.g. `1/log(i+1)` or `2 + 1/sqrt(i)`.
//!
//! Grammar: numbers, `i`, `+ - * /`, unary minus, parentheses, `log(·)` (natural)
//! and `sqrt(·)`. `·` is accepted as a synonym for `*`.

use std::fmt;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Index,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Log(Box<Expr>),
    Sqrt(Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.sum()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Config(format!("unexpected trailing input in `{src}`")));
        }
        Ok(e)
    }

    /// Evaluates at index `i` (1-based).
    pub fn eval(&self, i: usize) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Index => i as f64,
            Expr::Neg(a) => -a.eval(i),
            Expr::Add(a, b) => a.eval(i) + b.eval(i),
            Expr::Sub(a, b) => a.eval(i) - b.eval(i),
            Expr::Mul(a, b) => a.eval(i) * b.eval(i),
            Expr::Div(a, b) => a.eval(i) / b.eval(i),
            Expr::Log(a) => a.eval(i).ln(),
            Expr::Sqrt(a) => a.eval(i).sqrt(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Index => false,
            Expr::Neg(a) | Expr::Log(a) | Expr::Sqrt(a) => a.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Index => write!(f, "i"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Index,
    Func(Func),
    Op(char),
    LParen,
    RParen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Log,
    Sqrt,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        match c {
            ' ' | '\t' => k += 1,
            '+' | '-' | '*' | '/' => {
                out.push(Token::Op(c));
                k += 1;
            }
            '·' | '×' => {
                out.push(Token::Op('*'));
                k += 1;
            }
            '−' => {
                out.push(Token::Op('-'));
                k += 1;
            }
            '(' => {
                out.push(Token::LParen);
                k += 1;
            }
            ')' => {
                out.push(Token::RParen);
                k += 1;
            }
            '0'..='9' | '.' => {
                let start = k;
                while k < chars.len() && (chars[k].is_ascii_digit() || chars[k] == '.') {
                    k += 1;
                }
                // exponent part
                if k < chars.len() && (chars[k] == 'e' || chars[k] == 'E') {
                    let save = k;
                    k += 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                    } else {
                        k = save;
                    }
                }
                let text: String = chars[start..k].iter().collect();
                let v = text
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number `{text}` in `{src}`")))?;
                out.push(Token::Num(v));
            }
            c if c.is_ascii_alphabetic() => {
                let start = k;
                while k < chars.len() && chars[k].is_ascii_alphanumeric() {
                    k += 1;
                }
                let word: String = chars[start..k].iter().collect();
                out.push(match word.as_str() {
                    "i" => Token::Index,
                    "log" | "ln" => Token::Func(Func::Log),
                    "sqrt" => Token::Func(Func::Sqrt),
                    _ => return Err(Error::Config(format!("unknown identifier `{word}` in `{src}`"))),
                });
            }
            other => return Err(Error::Config(format!("unexpected character `{other}` in `{src}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
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

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.product()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().cloned() {
                Some(Token::Op(op @ ('*' | '/'))) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = if op == '*' {
                        Expr::Mul(Box::new(lhs), Box::new(rhs))
                    } else {
                        Expr::Div(Box::new(lhs), Box::new(rhs))
                    };
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Token::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::Index) => Ok(Expr::Index),
            Some(Token::LParen) => {
                let e = self.sum()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Some(Token::Func(f)) => {
                if self.next() != Some(Token::LParen) {
                    return Err(Error::Config("expected `(` after function name".into()));
                }
                let arg = Box::new(self.sum()?);
                self.expect_rparen()?;
                Ok(match f {
                    Func::Log => Expr::Log(arg),
                    Func::Sqrt => Expr::Sqrt(arg),
                })
            }
            other => Err(Error::Config(format!("unexpected token {other:?} in expression"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.next() {
            Some(Token::RParen) => Ok(()),
            _ => Err(Error::Config("missing `)` in expression".into())),
        }
    }
}
