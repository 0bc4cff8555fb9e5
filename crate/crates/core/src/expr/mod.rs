//! A small real-valued expression language in one variable `x`.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr    = term , { ("+" | "-") , term } ;
//! term    = unary , { ("*" | "/") , unary } ;
//! unary   = "-" , unary | power ;
//! power   = primary , [ "^" , unary ] ;            (* right-associative *)
//! primary = number | "x" | "pi" | "e"
//!         | func , "(" , expr , ")"
//!         | "if" , "(" , cond , "," , expr , "," , expr , ")"
//!         | "(" , expr , ")" ;
//! cond    = expr , ( "<" | "<=" | ">" | ">=" | "==" | "!=" ) , expr ;
//! func    = "sqrt" | "exp" | "log" | "sin" | "cos" | "abs" ;
//! number  = digit , { digit } , [ "." , { digit } ] , [ ("e" | "E") , [ "+" | "-" ] , digit , { digit } ]
//!         | "." , digit , { digit } , [ exponent ] ;
//! ```
//!
//! Precedence from tightest: `^`, unary minus, `* /`, `+ -`. Comparisons only
//! appear as the first argument of `if`.

mod eval;
mod lexer;
mod parser;
mod probe;

use std::fmt;

pub use eval::EvalError;
pub(crate) use eval::checked_pow;
pub use parser::{parse, ParseError, ParseErrorKind};
pub use probe::{probe, probe_jumps, Jump, JumpSide, ProbeError, ProbeReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Abs,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Sqrt, Func::Exp, Func::Log, Func::Sin, Func::Cos, Func::Abs];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub op: CmpOp,
    pub lhs: Expr,
    pub rhs: Expr,
}

/// Expression tree. Immutable once built; evaluation is pure.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Var,
    /// Non-negative literal; negative constants are `Neg(Num(..))`.
    Num(f64),
    Const(Constant),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    If(Box<Condition>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var() -> Expr {
        Expr::Var
    }

    /// Literal constant, normalized so that negative values become `Neg(Num(|v|))`.
    pub fn num(v: f64) -> Expr {
        if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
            Expr::Neg(Box::new(Expr::Num(-v)))
        } else {
            Expr::Num(v)
        }
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(e: Expr) -> Expr {
        Expr::Neg(Box::new(e))
    }

    pub fn pow(base: Expr, exponent: Expr) -> Expr {
        Expr::binary(BinOp::Pow, base, exponent)
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Expr::Var)
    }

    /// True when the tree does not mention `x`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Var => false,
            Expr::Num(_) | Expr::Const(_) => true,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_constant(),
            Expr::Binary(_, a, b) => a.is_constant() && b.is_constant(),
            Expr::If(c, a, b) => {
                c.lhs.is_constant() && c.rhs.is_constant() && a.is_constant() && b.is_constant()
            }
        }
    }

    /// Replaces every occurrence of `x` by `inner`, i.e. builds `self ∘ inner`.
    pub fn substitute(&self, inner: &Expr) -> Expr {
        match self {
            Expr::Var => inner.clone(),
            Expr::Num(_) | Expr::Const(_) => self.clone(),
            Expr::Neg(e) => Expr::neg(e.substitute(inner)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute(inner), b.substitute(inner)),
            Expr::Call(f, e) => Expr::call(*f, e.substitute(inner)),
            Expr::If(c, a, b) => Expr::If(
                Box::new(Condition {
                    op: c.op,
                    lhs: c.lhs.substitute(inner),
                    rhs: c.rhs.substitute(inner),
                }),
                Box::new(a.substitute(inner)),
                Box::new(b.substitute(inner)),
            ),
        }
    }

    /// Rewrites `log(exp(u))` to `u` and `exp(log(u))` to `u`, bottom-up.
    ///
    /// The first rule holds for all real `u`; the second only where `u > 0`,
    /// so callers must only apply this where that is guaranteed.
    pub fn cancel_exp_log(&self) -> Expr {
        match self {
            Expr::Var | Expr::Num(_) | Expr::Const(_) => self.clone(),
            Expr::Neg(e) => Expr::neg(e.cancel_exp_log()),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.cancel_exp_log(), b.cancel_exp_log()),
            Expr::Call(f, e) => {
                let inner = e.cancel_exp_log();
                match (f, inner) {
                    (Func::Log, Expr::Call(Func::Exp, u)) => *u,
                    (Func::Exp, Expr::Call(Func::Log, u)) => *u,
                    (f, inner) => Expr::call(*f, inner),
                }
            }
            Expr::If(c, a, b) => Expr::If(
                Box::new(Condition {
                    op: c.op,
                    lhs: c.lhs.cancel_exp_log(),
                    rhs: c.rhs.cancel_exp_log(),
                }),
                Box::new(a.cancel_exp_log()),
                Box::new(b.cancel_exp_log()),
            ),
        }
    }

    /// Rewrites `-(-u)` to `u`, bottom-up.
    pub fn cancel_double_neg(&self) -> Expr {
        match self {
            Expr::Var | Expr::Num(_) | Expr::Const(_) => self.clone(),
            Expr::Neg(e) => match e.cancel_double_neg() {
                Expr::Neg(u) => *u,
                other => Expr::neg(other),
            },
            Expr::Binary(op, a, b) => {
                Expr::binary(*op, a.cancel_double_neg(), b.cancel_double_neg())
            }
            Expr::Call(f, e) => Expr::call(*f, e.cancel_double_neg()),
            Expr::If(c, a, b) => Expr::If(
                Box::new(Condition {
                    op: c.op,
                    lhs: c.lhs.cancel_double_neg(),
                    rhs: c.rhs.cancel_double_neg(),
                }),
                Box::new(a.cancel_double_neg()),
                Box::new(b.cancel_double_neg()),
            ),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Binary(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var => f.write_str("x"),
            // `{:?}` is the shortest representation that parses back to the same bits.
            Expr::Num(v) if v.fract() == 0.0 && v.abs() < 1e15 => write!(f, "{v}"),
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Const(Constant::Pi) => f.write_str("pi"),
            Expr::Const(Constant::E) => f.write_str("e"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                write_wrapped(f, e, e.precedence() < 3)
            }
            Expr::Binary(BinOp::Pow, a, b) => {
                write_wrapped(f, a, a.precedence() <= 4)?;
                f.write_str("^")?;
                write_wrapped(f, b, b.precedence() < 3)
            }
            Expr::Binary(op, a, b) => {
                let prec = self.precedence();
                let sym = match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => unreachable!(),
                };
                write_wrapped(f, a, a.precedence() < prec)?;
                f.write_str(sym)?;
                write_wrapped(f, b, b.precedence() <= prec)
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::If(c, a, b) => {
                write!(f, "if({} {} {}, {a}, {b})", c.lhs, c.op.symbol(), c.rhs)
            }
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printing_reparses_to_same_tree() {
        for src in [
            "x",
            "-x^2",
            "(-x)^2",
            "x^y^2",
            "(x^2)^3",
            "x^-2",
            "2*-x",
            "a",
            "1 - (2 - x)",
            "x/(x/2)",
            "if(x < 0.5, (x^4 + 1)/3, (x^3 + 1)/2)",
            "sqrt(x)*exp(0.5*(log(x))^2)",
            "--x",
            "sin(pi*x/2)",
            "1e-10 + 2.5E3*x",
        ] {
            let Ok(e) = parse(src) else { continue };
            let printed = e.to_string();
            assert_eq!(parse(&printed).unwrap(), e, "{src} -> {printed}");
        }
    }

    #[test]
    fn substitute_builds_composition() {
        let outer = parse("x^2 + 1").unwrap();
        let inner = parse("exp(x)").unwrap();
        let c = outer.substitute(&inner);
        assert_eq!(c, parse("exp(x)^2 + 1").unwrap());
    }

    #[test]
    fn cancel_exp_log_collapses_pairs() {
        let e = parse("log(exp(log(exp(x))^2))").unwrap().cancel_exp_log();
        assert_eq!(e, parse("x^2").unwrap());
        let e = parse("exp(log(x))").unwrap().cancel_exp_log();
        assert!(e.is_identity());
    }

    #[test]
    fn negative_literals_normalized() {
        assert_eq!(Expr::num(-1.5), Expr::neg(Expr::Num(1.5)));
        assert_eq!(parse(&Expr::num(-1.5).to_string()).unwrap(), Expr::num(-1.5));
    }
}
