use super::{BinOp, CmpOp, Constant, Expr, Func};
use crate::Scalar;

/// Domain failure while evaluating an expression. Never silently NaN.
#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("log of non-positive argument {arg}")]
    LogNonPositive { arg: f64 },
    #[error("sqrt of negative argument {arg}")]
    SqrtNegative { arg: f64 },
    #[error("non-integer power {exponent} of negative base {base}")]
    NegativeBase { base: f64, exponent: f64 },
    #[error("zero raised to non-positive power {exponent}")]
    ZeroPower { exponent: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
}

fn finite<T: Scalar>(v: T, op: &'static str) -> Result<T, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite { op })
    }
}

/// `base^exponent` with the language's domain rules.
pub(crate) fn checked_pow<T: Scalar>(base: T, exponent: T) -> Result<T, EvalError> {
    if base < T::zero() && exponent.fract() != T::zero() {
        return Err(EvalError::NegativeBase { base: base.as_f64(), exponent: exponent.as_f64() });
    }
    if base == T::zero() && exponent <= T::zero() {
        if exponent == T::zero() {
            return Ok(T::one());
        }
        return Err(EvalError::ZeroPower { exponent: exponent.as_f64() });
    }
    finite(base.powf(exponent), "^")
}

impl Expr {
    /// Evaluates the tree at `x`.
    pub fn eval<T: Scalar>(&self, x: T) -> Result<T, EvalError> {
        match self {
            Expr::Var => Ok(x),
            Expr::Num(v) => Ok(T::lit(*v)),
            Expr::Const(Constant::Pi) => Ok(T::lit(std::f64::consts::PI)),
            Expr::Const(Constant::E) => Ok(T::lit(std::f64::consts::E)),
            Expr::Neg(e) => Ok(-e.eval(x)?),
            Expr::Binary(op, a, b) => {
                let a = a.eval(x)?;
                let b = b.eval(x)?;
                match op {
                    BinOp::Add => finite(a + b, "+"),
                    BinOp::Sub => finite(a - b, "-"),
                    BinOp::Mul => finite(a * b, "*"),
                    BinOp::Div => {
                        if b == T::zero() {
                            Err(EvalError::DivisionByZero)
                        } else {
                            finite(a / b, "/")
                        }
                    }
                    BinOp::Pow => checked_pow(a, b),
                }
            }
            Expr::Call(f, e) => {
                let v = e.eval(x)?;
                match f {
                    Func::Sqrt if v < T::zero() => Err(EvalError::SqrtNegative { arg: v.as_f64() }),
                    Func::Sqrt => Ok(v.sqrt()),
                    Func::Log if v <= T::zero() => Err(EvalError::LogNonPositive { arg: v.as_f64() }),
                    Func::Log => Ok(v.ln()),
                    Func::Exp => finite(v.exp(), "exp"),
                    Func::Sin => Ok(v.sin()),
                    Func::Cos => Ok(v.cos()),
                    Func::Abs => Ok(v.abs()),
                }
            }
            Expr::If(c, then, otherwise) => {
                let l = c.lhs.eval(x)?;
                let r = c.rhs.eval(x)?;
                let holds = match c.op {
                    CmpOp::Lt => l < r,
                    CmpOp::Le => l <= r,
                    CmpOp::Gt => l > r,
                    CmpOp::Ge => l >= r,
                    CmpOp::Eq => l == r,
                    CmpOp::Ne => l != r,
                };
                if holds {
                    then.eval(x)
                } else {
                    otherwise.eval(x)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    use super::*;

    #[test]
    fn spec_values() {
        assert_eq!(parse("(x^2+1)/2").unwrap().eval(0.0f64).unwrap(), 0.5);
        assert_eq!(parse("x").unwrap().eval(0.7f64).unwrap(), 0.7);
        // branch x >= 1/2: (1/8 + 1)/2
        let g = parse("if(x<0.5,(x^4+1)/3,(x^3+1)/2)").unwrap();
        assert_eq!(g.eval(0.5f64).unwrap(), 0.5625);
        assert_eq!(g.eval(0.0f64).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn generic_over_f32() {
        let e = parse("sqrt(x)*2").unwrap();
        assert_eq!(e.eval(4.0f32).unwrap(), 4.0f32);
    }

    #[test]
    fn domain_errors_are_hard() {
        assert!(matches!(parse("log(x)").unwrap().eval(0.0f64), Err(EvalError::LogNonPositive { .. })));
        assert!(matches!(parse("sqrt(x)").unwrap().eval(-1.0f64), Err(EvalError::SqrtNegative { .. })));
        assert!(matches!(parse("x^0.5").unwrap().eval(-1.0f64), Err(EvalError::NegativeBase { .. })));
        assert!(matches!(parse("1/x").unwrap().eval(0.0f64), Err(EvalError::DivisionByZero)));
        assert!(matches!(parse("x^-1").unwrap().eval(0.0f64), Err(EvalError::ZeroPower { .. })));
        assert!(matches!(parse("exp(x)").unwrap().eval(1000.0f64), Err(EvalError::NonFinite { .. })));
    }

    #[test]
    fn integer_power_of_negative_base() {
        assert_eq!(parse("x^3").unwrap().eval(-2.0f64).unwrap(), -8.0);
        assert_eq!(parse("x^-1").unwrap().eval(-2.0f64).unwrap(), -0.5);
    }

    #[test]
    fn evaluation_is_bitwise_repeatable() {
        let e = parse("sqrt(x)*exp(0.5*(log(x))^2)").unwrap();
        let a = e.eval(1.7f64).unwrap();
        let b = e.eval(1.7f64).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
