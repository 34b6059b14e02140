//! Lexer and precedence-climbing parser for the expression language.
//!
//! Precedence, tightest first: `^` (right associative), unary minus, `* /`,
//! `+ -`. Whitespace is insignificant; comments are handled by the caller.

use super::ast::{BinOp, Expr, Func, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
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

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    column: usize,
}

fn lex(line: usize, text: &str) -> Result<Vec<Spanned>> {
    let bytes: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let column = i + 1;
        match c {
            ' ' | '\t' => {
                i += 1;
            }
            '+' => {
                out.push(Spanned { tok: Tok::Plus, column });
                i += 1;
            }
            '-' => {
                out.push(Spanned { tok: Tok::Minus, column });
                i += 1;
            }
            '*' => {
                out.push(Spanned { tok: Tok::Star, column });
                i += 1;
            }
            '/' => {
                out.push(Spanned { tok: Tok::Slash, column });
                i += 1;
            }
            '^' => {
                out.push(Spanned { tok: Tok::Caret, column });
                i += 1;
            }
            '(' => {
                out.push(Spanned { tok: Tok::LParen, column });
                i += 1;
            }
            ')' => {
                out.push(Spanned { tok: Tok::RParen, column });
                i += 1;
            }
            ',' => {
                out.push(Spanned { tok: Tok::Comma, column });
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == '.') {
                    i += 1;
                }
                // optional exponent
                if i < bytes.len() && (bytes[i] == 'e' || bytes[i] == 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == '+' || bytes[j] == '-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit: String = bytes[start..i].iter().collect();
                let value = lit.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    column,
                    message: format!("invalid number literal `{lit}`"),
                })?;
                out.push(Spanned {
                    tok: Tok::Num(value),
                    column,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                out.push(Spanned {
                    tok: Tok::Ident(bytes[start..i].iter().collect()),
                    column,
                });
            }
            other => {
                return Err(Error::Parse {
                    line,
                    column,
                    message: format!("unexpected character `{other}`"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    line: usize,
    end_column: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn column(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|s| s.column)
            .unwrap_or(self.end_column)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            column: self.column(),
            message: message.into(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn parse_expr(&mut self) -> Result<Expr> {
        self.parse_binary(0)
    }

    fn parse_binary(&mut self, min_prec: u8) -> Result<Expr> {
        let mut lhs = self.parse_unary()?;
        loop {
            let (op, prec) = match self.peek() {
                Some(Tok::Plus) => (BinOp::Add, 1),
                Some(Tok::Minus) => (BinOp::Sub, 1),
                Some(Tok::Star) => (BinOp::Mul, 2),
                Some(Tok::Slash) => (BinOp::Div, 2),
                _ => break,
            };
            if prec < min_prec {
                break;
            }
            self.pos += 1;
            let rhs = self.parse_binary(prec + 1)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.parse_unary()?)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr> {
        let base = self.parse_primary()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.pos += 1;
            // right associative; exponent may start with a unary minus
            let exponent = self.parse_unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn parse_primary(&mut self) -> Result<Expr> {
        let column = self.column();
        match self.bump() {
            Some(Tok::Num(x)) => Ok(Expr::Num(x)),
            Some(Tok::LParen) => {
                let inner = self.parse_expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => self.parse_ident(name, column),
            _ => Err(Error::Parse {
                line: self.line,
                column,
                message: "expected a number, identifier or `(`".into(),
            }),
        }
    }

    fn parse_ident(&mut self, name: String, column: usize) -> Result<Expr> {
        match name.as_str() {
            "t" => return Ok(Expr::Var(Var::T)),
            "u" => return Ok(Expr::Var(Var::U)),
            "v" => return Ok(Expr::Var(Var::V)),
            "w" => return Ok(Expr::Var(Var::W)),
            "eval" => return self.parse_eval(),
            "integ" => return self.parse_integ(),
            _ => {}
        }
        if let Some(func) = Func::from_name(&name) {
            self.expect(Tok::LParen, "`(` after function name")?;
            let arg = self.parse_expr()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        Err(Error::Parse {
            line: self.line,
            column,
            message: format!("unknown identifier `{name}`"),
        })
    }

    fn parse_order(&mut self) -> Result<u8> {
        let column = self.column();
        match self.bump() {
            Some(Tok::Num(x)) if x == 0.0 || x == 1.0 || x == 2.0 => Ok(x as u8),
            _ => Err(Error::Parse {
                line: self.line,
                column,
                message: "derivative order must be 0, 1 or 2".into(),
            }),
        }
    }

    fn parse_eval(&mut self) -> Result<Expr> {
        self.expect(Tok::LParen, "`(` after `eval`")?;
        let order = self.parse_order()?;
        self.expect(Tok::Comma, "`,`")?;
        let column = self.column();
        let negate = if matches!(self.peek(), Some(Tok::Minus)) {
            self.pos += 1;
            true
        } else {
            false
        };
        let tau = match self.bump() {
            Some(Tok::Num(x)) => {
                if negate {
                    -x
                } else {
                    x
                }
            }
            _ => {
                return Err(Error::Parse {
                    line: self.line,
                    column,
                    message: "eval expects a numeric evaluation point".into(),
                })
            }
        };
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Parse {
                line: self.line,
                column,
                message: format!("evaluation point {tau} outside [0, 1]"),
            });
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(Expr::Eval { order, tau })
    }

    fn parse_integ(&mut self) -> Result<Expr> {
        self.expect(Tok::LParen, "`(` after `integ`")?;
        let order = self.parse_order()?;
        self.expect(Tok::Comma, "`,`")?;
        let column = self.column();
        let weight = self.parse_expr()?;
        self.expect(Tok::RParen, "`)`")?;
        let mut vars = Vec::new();
        weight.free_vars(&mut vars);
        if vars.iter().any(|v| *v != Var::T) || weight.contains_functional_term() {
            return Err(Error::Parse {
                line: self.line,
                column,
                message: "integ weight must be an expression in t only".into(),
            });
        }
        Ok(Expr::Integ {
            order,
            weight: Box::new(weight),
        })
    }
}

/// Parse one expression occupying an entire line fragment.
pub fn parse_expression(line: usize, column_offset: usize, text: &str) -> Result<Expr> {
    let mut toks = lex(line, text)?;
    for t in &mut toks {
        t.column += column_offset;
    }
    if toks.is_empty() {
        return Err(Error::Parse {
            line,
            column: column_offset + 1,
            message: "empty expression".into(),
        });
    }
    let end_column = column_offset + text.chars().count() + 1;
    let mut parser = Parser {
        toks,
        pos: 0,
        line,
        end_column,
    };
    let expr = parser.parse_expr()?;
    if parser.pos != parser.toks.len() {
        return Err(parser.err("trailing input after expression"));
    }
    Ok(expr)
}
