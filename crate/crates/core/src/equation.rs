//! Product-form and sum-form equations and their residuals.

use serde::Serialize;

use crate::expr::{EvalError, Expr};
use crate::funcrep::{GridError, GridFunction, Interval};
use crate::{refine, Scalar};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EquationError {
    #[error("equation needs n >= 1 terms")]
    NoTerms,
    #[error("{what} has {found} entries, expected n = {n}")]
    Arity { what: &'static str, n: usize, found: usize },
    #[error("evaluating {what} at x = {x}: {source}")]
    Eval { what: String, x: f64, source: EvalError },
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn eval_named<T: Scalar>(e: &Expr, x: T, what: impl Fn() -> String) -> Result<T, EquationError> {
    e.eval(x).map_err(|source| EquationError::Eval { what: what(), x: x.as_f64(), source })
}

/// `∏_k Ξ_k( g^k( ψ_k(x) ) )^{λ_k} = G(x)` on `J`, with floor `δ` for the
/// order-preserving route.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductEquationSpec<T> {
    pub interval: Interval<T>,
    /// `λ_1 … λ_n`.
    pub exponents: Vec<T>,
    /// `G`.
    pub rhs: Expr,
    /// `Ξ_1 … Ξ_n`; `Ψ_k = Ξ_k^{λ_k}`.
    pub factor_maps: Vec<Expr>,
    /// `ψ_1 … ψ_n`.
    pub arg_maps: Vec<Expr>,
    /// `δ`.
    pub floor: T,
}

/// `Σ_k λ_k Υ_k( f^k( φ_k(x) ) ) = F(x)` on `I`.
#[derive(Clone, Debug, PartialEq)]
pub struct SumEquationSpec<T> {
    pub interval: Interval<T>,
    pub weights: Vec<T>,
    /// `F`.
    pub rhs: Expr,
    /// `Υ_1 … Υ_n`; `Φ_k = λ_k Υ_k`.
    pub term_maps: Vec<Expr>,
    /// `φ_1 … φ_n`.
    pub arg_maps: Vec<Expr>,
}

/// Sup-norm residual and where it is attained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Residual<T> {
    pub sup: T,
    pub argmax: T,
    pub points: usize,
}

fn check_arity(n: usize, lens: [(&'static str, usize); 2]) -> Result<(), EquationError> {
    if n == 0 {
        return Err(EquationError::NoTerms);
    }
    for (what, found) in lens {
        if found != n {
            return Err(EquationError::Arity { what, n, found });
        }
    }
    Ok(())
}

fn iterate_with<T: Scalar>(
    unknown: &dyn Fn(T) -> Result<T, EquationError>,
    mut y: T,
    k: usize,
) -> Result<T, EquationError> {
    for _ in 0..k {
        y = unknown(y)?;
    }
    Ok(y)
}

impl<T: Scalar> ProductEquationSpec<T> {
    pub fn n(&self) -> usize {
        self.exponents.len()
    }

    pub fn validate(&self) -> Result<(), EquationError> {
        check_arity(self.n(), [("factor maps", self.factor_maps.len()), ("argument maps", self.arg_maps.len())])
    }

    /// `λ = Σ λ_k`.
    pub fn exponent_sum(&self) -> T {
        self.exponents.iter().fold(T::zero(), |a, &b| a + b)
    }

    /// Left-hand side at `x` for an arbitrary unknown map.
    pub fn lhs_at(&self, x: T, unknown: &dyn Fn(T) -> Result<T, EquationError>) -> Result<T, EquationError> {
        let mut prod = T::one();
        for k in 0..self.n() {
            let arg = eval_named(&self.arg_maps[k], x, || format!("psi.{}", k + 1))?;
            let inner = iterate_with(unknown, arg, k + 1)?;
            let factor = eval_named(&self.factor_maps[k], inner, || format!("Xi.{}", k + 1))?;
            let term = crate::expr::checked_pow(factor, self.exponents[k]).map_err(|source| {
                EquationError::Eval { what: format!("Xi.{}^lambda.{}", k + 1, k + 1), x: x.as_f64(), source }
            })?;
            prod = prod * term;
        }
        Ok(prod)
    }

    pub fn rhs_at(&self, x: T) -> Result<T, EquationError> {
        eval_named(&self.rhs, x, || "G".into())
    }

    /// `sup |LHS - G|` over the given points.
    pub fn residual_at_points(
        &self,
        points: &[T],
        unknown: &dyn Fn(T) -> Result<T, EquationError>,
    ) -> Result<Residual<T>, EquationError> {
        let mut best = Residual { sup: T::zero(), argmax: points.first().copied().unwrap_or_else(T::zero), points: points.len() };
        for &x in points {
            let r = (self.lhs_at(x, unknown)? - self.rhs_at(x)?).abs();
            if r > best.sup {
                best.sup = r;
                best.argmax = x;
            }
        }
        Ok(best)
    }

    /// Residual of a grid function on its nodes refined `refine_factor` times.
    pub fn residual(&self, g: &GridFunction<T>, refine_factor: usize) -> Result<Residual<T>, EquationError> {
        let points = refine(g.nodes(), refine_factor);
        let unknown = |y: T| g.eval(y).map_err(EquationError::from);
        self.residual_at_points(&points, &unknown)
    }
}

impl<T: Scalar> SumEquationSpec<T> {
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<(), EquationError> {
        check_arity(self.n(), [("term maps", self.term_maps.len()), ("argument maps", self.arg_maps.len())])
    }

    pub fn lhs_at(&self, x: T, unknown: &dyn Fn(T) -> Result<T, EquationError>) -> Result<T, EquationError> {
        let mut sum = T::zero();
        for k in 0..self.n() {
            let arg = eval_named(&self.arg_maps[k], x, || format!("phi.{}", k + 1))?;
            let inner = iterate_with(unknown, arg, k + 1)?;
            let term = eval_named(&self.term_maps[k], inner, || format!("Upsilon.{}", k + 1))?;
            sum = sum + self.weights[k] * term;
        }
        Ok(sum)
    }

    pub fn rhs_at(&self, x: T) -> Result<T, EquationError> {
        eval_named(&self.rhs, x, || "F".into())
    }

    pub fn residual_at_points(
        &self,
        points: &[T],
        unknown: &dyn Fn(T) -> Result<T, EquationError>,
    ) -> Result<Residual<T>, EquationError> {
        let mut best = Residual { sup: T::zero(), argmax: points.first().copied().unwrap_or_else(T::zero), points: points.len() };
        for &x in points {
            let r = (self.lhs_at(x, unknown)? - self.rhs_at(x)?).abs();
            if r > best.sup {
                best.sup = r;
                best.argmax = x;
            }
        }
        Ok(best)
    }

    pub fn residual(&self, f: &GridFunction<T>, refine_factor: usize) -> Result<Residual<T>, EquationError> {
        let points = refine(f.nodes(), refine_factor);
        let unknown = |y: T| f.eval(y).map_err(EquationError::from);
        self.residual_at_points(&points, &unknown)
    }
}
