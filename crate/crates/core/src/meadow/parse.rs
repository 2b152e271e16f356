//! Surface syntax for meadow terms.
//!
//! ```text
//! expr    := or
//! or      := and ("or" and)*
//! and     := unary (("and" | "sand") unary)*
//! unary   := "not" unary | cmp
//! cmp     := sum (cmpop sum)*  |  sum "in" "{" rational ("," rational)* "}"
//! sum     := product (("+" | "-") product)*
//! product := neg (("*" | "/") neg)*
//! neg     := "-" neg | atom
//! atom    := integer | ident | "true" | "false" | "inv" "(" sum ")" | "(" expr ")"
//! ```
//!
//! Chained comparisons such as `0 <= X <= 2` read as the classical
//! conjunction of the adjacent pairs.

use super::{CmpOp, Expr, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message} at column {column}")]
pub struct ParseError {
    pub message: String,
    /// 1-based character column.
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(String),
    Ident(String),
    Sym(&'static str),
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

impl Lexer {
    fn lex(src: &str) -> Result<Lexer, ParseError> {
        let chars: Vec<char> = src.chars().collect();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                toks.push((Tok::Int(chars[start..i].iter().collect()), col));
                continue;
            }
            if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[start..i].iter().collect()), col));
                continue;
            }
            let next = chars.get(i + 1).copied();
            let (sym, len) = match (c, next) {
                ('<', Some('=')) => ("<=", 2),
                ('>', Some('=')) => (">=", 2),
                ('!', Some('=')) => ("!=", 2),
                ('=', Some('=')) => ("=", 2),
                ('<', _) => ("<", 1),
                ('>', _) => (">", 1),
                ('=', _) => ("=", 1),
                ('≤', _) => ("<=", 1),
                ('≥', _) => (">=", 1),
                ('≠', _) => ("!=", 1),
                ('+', _) => ("+", 1),
                ('-', _) => ("-", 1),
                ('*', _) => ("*", 1),
                ('·', _) => ("*", 1),
                ('/', _) => ("/", 1),
                ('(', _) => ("(", 1),
                (')', _) => (")", 1),
                ('{', _) => ("{", 1),
                ('}', _) => ("}", 1),
                (',', _) => (",", 1),
                _ => {
                    return Err(ParseError {
                        message: format!("unexpected character `{c}`"),
                        column: col,
                    })
                }
            };
            toks.push((Tok::Sym(sym), col));
            i += len;
        }
        toks.push((Tok::End, chars.len() + 1));
        Ok(Lexer { toks })
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

const KEYWORDS: &[&str] = &["and", "sand", "or", "not", "in", "true", "false", "inv"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn column(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
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

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{s}`"))
        }
    }

    fn or(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and()?;
        while self.is_kw("or") {
            self.bump();
            let rhs = self.and()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let short = if self.is_kw("and") {
                false
            } else if self.is_kw("sand") {
                true
            } else {
                break;
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = if short {
                Expr::AndThen(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::And(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.is_kw("not") {
            self.bump();
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        self.comparison()
    }

    fn cmp_op(&self) -> Option<(CmpOp, bool)> {
        match self.peek() {
            Tok::Sym("=") => Some((CmpOp::Eq, false)),
            Tok::Sym("!=") => Some((CmpOp::Ne, false)),
            Tok::Sym("<") => Some((CmpOp::Lt, false)),
            Tok::Sym("<=") => Some((CmpOp::Le, false)),
            Tok::Sym(">") => Some((CmpOp::Lt, true)),
            Tok::Sym(">=") => Some((CmpOp::Le, true)),
            _ => None,
        }
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let first = self.sum()?;
        if self.is_kw("in") {
            self.bump();
            return Ok(Expr::In(Box::new(first), self.rational_set()?));
        }
        let mut links = Vec::new();
        let mut prev = first.clone();
        while let Some((op, swapped)) = self.cmp_op() {
            self.bump();
            let next = self.sum()?;
            let (l, r) = if swapped {
                (next.clone(), prev)
            } else {
                (prev, next.clone())
            };
            links.push(Expr::Cmp(op, Box::new(l), Box::new(r)));
            prev = next;
        }
        let mut links = links.into_iter();
        match links.next() {
            None => Ok(first),
            Some(head) => Ok(links.fold(head, |acc, c| Expr::And(Box::new(acc), Box::new(c)))),
        }
    }

    fn rational_set(&mut self) -> Result<Vec<Rational>, ParseError> {
        self.expect_sym("{")?;
        let mut out = Vec::new();
        if self.is_sym("}") {
            self.bump();
            return Ok(out);
        }
        loop {
            let column = self.column();
            let term = self.sum()?;
            if !term.is_closed() {
                return Err(ParseError {
                    message: "set elements must be closed rational terms".into(),
                    column,
                });
            }
            let v = super::eval_arith(&term, &super::Env::new()).map_err(|e| ParseError {
                message: e.to_string(),
                column,
            })?;
            if !out.contains(&v) {
                out.push(v);
            }
            if self.is_sym(",") {
                self.bump();
                continue;
            }
            self.expect_sym("}")?;
            break;
        }
        out.sort();
        Ok(out)
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            if self.is_sym("+") {
                self.bump();
                lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
            } else if self.is_sym("-") {
                self.bump();
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.neg()?;
        loop {
            if self.is_sym("*") {
                self.bump();
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.neg()?));
            } else if self.is_sym("/") {
                self.bump();
                lhs = Expr::Div(Box::new(lhs), Box::new(self.neg()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn neg(&mut self) -> Result<Expr, ParseError> {
        if self.is_sym("-") {
            self.bump();
            return Ok(match self.neg()? {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let column = self.column();
        match self.bump() {
            Tok::Int(digits) => {
                let v: Rational = digits.parse().map_err(|_| ParseError {
                    message: format!("bad integer `{digits}`"),
                    column,
                })?;
                Ok(Expr::Const(v))
            }
            Tok::Ident(word) => match word.as_str() {
                "true" => Ok(Expr::Bool(true)),
                "false" => Ok(Expr::Bool(false)),
                "inv" => {
                    self.expect_sym("(")?;
                    let inner = self.sum()?;
                    self.expect_sym(")")?;
                    Ok(Expr::Inv(Box::new(inner)))
                }
                w if KEYWORDS.contains(&w) => Err(ParseError {
                    message: format!("unexpected keyword `{w}`"),
                    column,
                }),
                _ => Ok(Expr::Var(word)),
            },
            Tok::Sym("(") => {
                let inner = self.or()?;
                self.expect_sym(")")?;
                Ok(inner)
            }
            Tok::Sym(s) => Err(ParseError {
                message: format!("unexpected `{s}`"),
                column,
            }),
            Tok::End => Err(ParseError {
                message: "unexpected end of expression".into(),
                column,
            }),
        }
    }
}

/// Parses a meadow term or proposition.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let lexer = Lexer::lex(src)?;
    let mut p = Parser {
        toks: lexer.toks,
        pos: 0,
    };
    let e = p.or()?;
    if *p.peek() != Tok::End {
        return p.error("trailing input");
    }
    Ok(e)
}
