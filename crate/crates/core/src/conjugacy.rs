//! Logarithmic conjugacy between product and sum form, and reflection
//! between positive and negative intervals.
//!
//! Conjugated expressions are built by substitution on the tree, so they stay
//! exact at every grid resolution.

use crate::equation::{EquationError, ProductEquationSpec, SumEquationSpec};
use crate::expr::{probe, Expr, Func, ProbeError};
use crate::funcrep::{EvalMode, GridError, GridFunction, Interval};
use crate::Scalar;

const POSITIVITY_SAMPLES: usize = 1025;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ConjugacyError {
    #[error("interval [{lo}, {hi}] does not lie in (0, inf): log 0 is not a real number")]
    ZeroProblem { lo: f64, hi: f64 },
    #[error("reflection needs 0 outside the interval, got [{lo}, {hi}]")]
    StraddlesZero { lo: f64, hi: f64 },
    #[error("{what} must be positive on {range}; sampled minimum {min}")]
    NotPositive { what: String, range: String, min: f64 },
    #[error("probing {what}: {source}")]
    Probe { what: String, source: ProbeError },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Equation(#[from] EquationError),
}

fn log_of(e: &Expr) -> Expr {
    Expr::call(Func::Log, e.clone())
}

fn exp_of(e: &Expr) -> Expr {
    Expr::call(Func::Exp, e.clone())
}

/// `x ↦ log e(exp x)`.
pub fn log_conjugate_expr(e: &Expr) -> Expr {
    log_of(&e.substitute(&exp_of(&Expr::Var))).cancel_exp_log()
}

/// `x ↦ exp e(log x)`.
pub fn exp_conjugate_expr(e: &Expr) -> Expr {
    exp_of(&e.substitute(&log_of(&Expr::Var))).cancel_exp_log()
}

/// `x ↦ -e(-x)`.
pub fn reflect_expr(e: &Expr) -> Expr {
    Expr::neg(e.substitute(&Expr::neg(Expr::Var))).cancel_double_neg()
}

fn require_positive<T: Scalar>(what: String, e: &Expr, lo: T, hi: T) -> Result<(), ConjugacyError> {
    let report = probe(e, lo, hi, POSITIVITY_SAMPLES)
        .and_then(|r| r.ensure_total().cloned())
        .map_err(|source| ConjugacyError::Probe { what: what.clone(), source })?;
    if report.min <= T::zero() {
        return Err(ConjugacyError::NotPositive {
            what,
            range: format!("[{lo}, {hi}]"),
            min: report.min.as_f64(),
        });
    }
    Ok(())
}

/// Product form on `J ⊂ (0, ∞)` to sum form on `I = log J`.
pub fn log_conjugate_spec<T: Scalar>(spec: &ProductEquationSpec<T>) -> Result<SumEquationSpec<T>, ConjugacyError> {
    spec.validate()?;
    let (c, d) = (spec.interval.lo(), spec.interval.hi());
    if c <= T::zero() {
        return Err(ConjugacyError::ZeroProblem { lo: c.as_f64(), hi: d.as_f64() });
    }
    require_positive("G".into(), &spec.rhs, c, d)?;
    for (k, xi) in spec.factor_maps.iter().enumerate() {
        require_positive(format!("Xi.{}", k + 1), xi, c, d)?;
    }
    Ok(SumEquationSpec {
        interval: Interval::new(c.ln(), d.ln())?,
        weights: spec.exponents.clone(),
        rhs: log_conjugate_expr(&spec.rhs),
        term_maps: spec.factor_maps.iter().map(log_conjugate_expr).collect(),
        arg_maps: spec.arg_maps.iter().map(log_conjugate_expr).collect(),
    })
}

/// Inverse of [`log_conjugate_spec`]; the sum form carries no floor, so it is supplied.
pub fn exp_conjugate_spec<T: Scalar>(spec: &SumEquationSpec<T>, floor: T) -> Result<ProductEquationSpec<T>, ConjugacyError> {
    spec.validate()?;
    Ok(ProductEquationSpec {
        interval: Interval::new(spec.interval.lo().exp(), spec.interval.hi().exp())?,
        exponents: spec.weights.clone(),
        rhs: exp_conjugate_expr(&spec.rhs),
        factor_maps: spec.term_maps.iter().map(exp_conjugate_expr).collect(),
        arg_maps: spec.arg_maps.iter().map(exp_conjugate_expr).collect(),
        floor,
    })
}

/// `g = exp ∘ f ∘ log`: nodes `e^{x_i}`, values `e^{f(x_i)}`.
pub fn exp_conjugate_function<T: Scalar>(f: &GridFunction<T>) -> Result<GridFunction<T>, ConjugacyError> {
    let nodes: Vec<T> = f.nodes().iter().map(|x| x.exp()).collect();
    let values: Vec<T> = f.values().iter().map(|v| v.exp()).collect();
    let domain = Interval::new(nodes[0], nodes[nodes.len() - 1])?;
    Ok(GridFunction::new(domain, nodes.into(), values, f.mode(), f.floor().map(|v| v.exp()))?)
}

/// `f = log ∘ g ∘ exp`: nodes `log x_i`, values `log g(x_i)`.
pub fn log_conjugate_function<T: Scalar>(g: &GridFunction<T>) -> Result<GridFunction<T>, ConjugacyError> {
    let dom = g.domain();
    if dom.lo() <= T::zero() {
        return Err(ConjugacyError::ZeroProblem { lo: dom.lo().as_f64(), hi: dom.hi().as_f64() });
    }
    let nodes: Vec<T> = g.nodes().iter().map(|x| x.ln()).collect();
    let values: Vec<T> = g.values().iter().map(|v| v.ln()).collect();
    let domain = Interval::new(nodes[0], nodes[nodes.len() - 1])?;
    Ok(GridFunction::new(domain, nodes.into(), values, g.mode(), g.floor().map(|v| v.ln()))?)
}

/// A reflected spec together with whether solutions correspond.
#[derive(Clone, Debug)]
pub struct ReflectedSpec<T> {
    pub spec: ProductEquationSpec<T>,
    /// True when every exponent is an integer and their sum is odd: then
    /// `∏ (-Ξ_k(-y))^{λ_k} = -∏ Ξ_k(y)^{λ_k}` and `g ↦ -g(-x)` maps
    /// solutions to solutions.
    pub solutions_correspond: bool,
    pub notes: Vec<String>,
}

/// Conjugates by `h(x) = -x`: `J̃ = -J`, `G̃(x) = -G(-x)`, `Ξ̃_k(x) = -Ξ_k(-x)`,
/// `ψ̃_k(x) = -ψ_k(-x)`, floor `-δ`. An involution on specs.
pub fn reflect_spec<T: Scalar>(spec: &ProductEquationSpec<T>) -> Result<ReflectedSpec<T>, ConjugacyError> {
    spec.validate()?;
    let (c, d) = (spec.interval.lo(), spec.interval.hi());
    if c <= T::zero() && d >= T::zero() {
        return Err(ConjugacyError::StraddlesZero { lo: c.as_f64(), hi: d.as_f64() });
    }
    let mut notes = Vec::new();
    let integral = spec.exponents.iter().all(|l| l.fract() == T::zero());
    if !integral {
        notes.push("non-integer exponent: real powers of negative values are undefined on the reflected side".into());
    }
    let sum = spec.exponent_sum();
    let odd = integral && (sum.as_f64().rem_euclid(2.0) == 1.0);
    if integral && !odd {
        notes.push(format!("exponent sum {sum} is even: reflected product has the wrong sign"));
    }
    let reflected = ProductEquationSpec {
        interval: Interval::new(-d, -c)?,
        exponents: spec.exponents.clone(),
        rhs: reflect_expr(&spec.rhs),
        factor_maps: spec.factor_maps.iter().map(reflect_expr).collect(),
        arg_maps: spec.arg_maps.iter().map(reflect_expr).collect(),
        floor: -spec.floor,
    };
    Ok(ReflectedSpec { spec: reflected, solutions_correspond: integral && odd, notes })
}

/// `g̃(x) = -g(-x)`. Step modes swap, since reflection exchanges right and
/// left continuity.
pub fn reflect_function<T: Scalar>(g: &GridFunction<T>) -> Result<GridFunction<T>, ConjugacyError> {
    let nodes: Vec<T> = g.nodes().iter().rev().map(|&x| -x).collect();
    let values: Vec<T> = g.values().iter().rev().map(|&v| -v).collect();
    let mode = match g.mode() {
        EvalMode::StepUsc => EvalMode::StepLsc,
        EvalMode::StepLsc => EvalMode::StepUsc,
        EvalMode::PiecewiseLinear => EvalMode::PiecewiseLinear,
    };
    let domain = Interval::new(-g.domain().hi(), -g.domain().lo())?;
    Ok(GridFunction::new(domain, nodes.into(), values, mode, None)?)
}
