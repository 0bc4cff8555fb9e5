use super::lexer::{tokenize, Spanned, Tok};
use super::{BinOp, CmpOp, Condition, Constant, Expr, Func};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownFunction,
    UnknownIdentifier,
    Arity,
}

/// Parse diagnostic: byte offset into the source plus what was expected there.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{message} at byte {offset}{}", fmt_expected(.expected))]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
    pub message: String,
    pub expected: Vec<String>,
}

fn fmt_expected(expected: &[String]) -> String {
    if expected.is_empty() {
        String::new()
    } else {
        format!(" (expected one of: {})", expected.join(", "))
    }
}

/// Parses an expression source into a tree.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let toks = tokenize(src).map_err(|e| ParseError {
        kind: ParseErrorKind::Syntax,
        offset: e.offset,
        message: e.message,
        expected: vec![],
    })?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    p.expect(Tok::Eof, &["operator", "end of input"])?;
    Ok(e)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

const OPERAND: &[&str] = &["number", "`x`", "`pi`", "`e`", "function call", "`if`", "`(`", "`-`"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].offset
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, expected: &[&str]) -> ParseError {
        ParseError {
            kind: ParseErrorKind::Syntax,
            offset: self.offset(),
            message: format!("unexpected {}", self.peek().describe()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &[&str]) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(expected))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::pow(base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, &["`)`", "operator"])?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.offset();
                self.bump();
                if *self.peek() == Tok::LParen {
                    self.bump();
                    if name == "if" {
                        return self.conditional(at);
                    }
                    let Some(func) = Func::from_name(&name) else {
                        return Err(ParseError {
                            kind: ParseErrorKind::UnknownFunction,
                            offset: at,
                            message: format!("unknown function `{name}`"),
                            expected: Func::ALL.iter().map(|f| f.name().to_string()).chain(["if".into()]).collect(),
                        });
                    };
                    let arg = self.expr()?;
                    if *self.peek() == Tok::Comma {
                        let extra = self.count_remaining_args()?;
                        return Err(arity_error(&name, at, 1, 1 + extra));
                    }
                    self.expect(Tok::RParen, &["`)`", "operator"])?;
                    return Ok(Expr::call(func, arg));
                }
                match name.as_str() {
                    "x" => Ok(Expr::Var),
                    "pi" => Ok(Expr::Const(Constant::Pi)),
                    "e" => Ok(Expr::Const(Constant::E)),
                    _ if Func::from_name(&name).is_some() || name == "if" => Err(ParseError {
                        kind: ParseErrorKind::Syntax,
                        offset: self.offset(),
                        message: format!("function `{name}` must be called"),
                        expected: vec!["`(`".into()],
                    }),
                    _ => Err(ParseError {
                        kind: ParseErrorKind::UnknownIdentifier,
                        offset: at,
                        message: format!("unknown identifier `{name}`"),
                        expected: vec!["`x`".into(), "`pi`".into(), "`e`".into()],
                    }),
                }
            }
            _ => Err(self.syntax(OPERAND)),
        }
    }

    fn conditional(&mut self, at: usize) -> Result<Expr, ParseError> {
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            _ => return Err(self.syntax(&["comparison operator", "operator"])),
        };
        self.bump();
        let rhs = self.expr()?;
        let mut args = 1;
        if *self.peek() == Tok::RParen {
            return Err(arity_error("if", at, 3, args));
        }
        self.expect(Tok::Comma, &["`,`", "operator"])?;
        let then = self.expr()?;
        args += 1;
        if *self.peek() == Tok::RParen {
            return Err(arity_error("if", at, 3, args));
        }
        self.expect(Tok::Comma, &["`,`", "operator"])?;
        let otherwise = self.expr()?;
        args += 1;
        if *self.peek() == Tok::Comma {
            let extra = self.count_remaining_args()?;
            return Err(arity_error("if", at, 3, args + extra));
        }
        self.expect(Tok::RParen, &["`)`", "operator"])?;
        let cond = Condition { op, lhs, rhs };
        debug_assert!(matches!(cond.op, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge | CmpOp::Eq | CmpOp::Ne));
        Ok(Expr::If(Box::new(cond), Box::new(then), Box::new(otherwise)))
    }

    /// Consumes `, arg, arg ... )` and returns how many extra arguments were seen.
    fn count_remaining_args(&mut self) -> Result<usize, ParseError> {
        let mut n = 0;
        while *self.peek() == Tok::Comma {
            self.bump();
            self.expr()?;
            n += 1;
        }
        self.expect(Tok::RParen, &["`)`", "`,`"])?;
        Ok(n)
    }
}

fn arity_error(name: &str, offset: usize, expected: usize, found: usize) -> ParseError {
    ParseError {
        kind: ParseErrorKind::Arity,
        offset,
        message: format!("`{name}` takes {expected} argument(s), found {found}"),
        expected: vec![],
    }
}
