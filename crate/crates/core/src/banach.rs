//! Continuous solutions by contraction iteration.
//!
//! The sum form `Σ λ_k Υ_k(f^k(φ_k x)) = F(x)` is solved for its first term:
//!
//! ```text
//!     (L f)(x) = Υ₁⁻¹( (F(x) − Σ_{k≥2} λ_k Υ_k(f^k(φ_k x))) / λ₁ )
//! ```
//!
//! and `L` is iterated from `f₀ = id` on a uniform grid with piecewise-linear
//! evaluation. Product-form problems on `J ⊂ (0, ∞)` go through the
//! logarithmic conjugacy and back; residuals are always recomputed on the
//! original equation.

use rayon::prelude::*;
use serde::Serialize;

use crate::classes::{derived_constants, in_f_class, in_g_class, ClassError, ClassParams, DerivedConstants, MembershipVerdict};
use crate::conjugacy::{exp_conjugate_function, log_conjugate_spec, ConjugacyError};
use crate::equation::{EquationError, ProductEquationSpec, Residual, SumEquationSpec};
use crate::expr::{probe, Expr};
use crate::funcrep::{EvalMode, GridError, GridFunction, Interval};
use crate::{refine, Scalar};

/// Bisection tolerance for `Υ₁⁻¹`.
const INVERSE_TOL: f64 = 1e-13;

/// Allowed drift of a computed endpoint before it is pinned.
const ENDPOINT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BanachConfig<T> {
    /// Number of grid cells `m`; the grid has `m + 1` nodes.
    pub grid: usize,
    /// Stop once the sup-norm Picard step falls below this.
    pub tol: T,
    pub max_iter: usize,
    /// Target class `δ, M` and the Lipschitz data `l, L` of the term maps.
    pub class: ClassParams<T>,
    /// Verification grid refinement factor.
    pub refine: usize,
}

impl<T: Scalar> BanachConfig<T> {
    pub fn new(grid: usize, tol: T, max_iter: usize, class: ClassParams<T>) -> Self {
        Self { grid, tol, max_iter, class, refine: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum BanachError {
    #[error("lambda.1 must be positive, got {0}")]
    LeadingWeight(f64),
    #[error("the first term map must be strictly increasing on the interval")]
    NotInvertible,
    #[error("phi.1 must be the identity, got `{0}`")]
    FirstArgument(String),
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("iterate moved endpoint {endpoint} to {value}")]
    EndpointDrift { endpoint: f64, value: f64 },
    #[error("start function is not sampled on the solver grid")]
    StartGrid,
    #[error(transparent)]
    Equation(#[from] EquationError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Conjugacy(#[from] ConjugacyError),
    #[error(transparent)]
    Class(#[from] ClassError),
}

impl From<crate::expr::ProbeError> for BanachError {
    fn from(_: crate::expr::ProbeError) -> Self {
        BanachError::NotInvertible
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport<T> {
    pub iterations: usize,
    /// Sup distance of the last Picard step.
    pub final_step: T,
    pub converged: bool,
    /// Residual of the equation that was posed, on the refined grid.
    pub residual: Residual<T>,
    pub class_verdict: MembershipVerdict<T>,
    /// Largest observed ratio of consecutive step sizes.
    pub contraction_estimate: T,
    /// Nodes whose `Υ₁⁻¹` argument left the range of `Υ₁`, summed over steps.
    pub clamp_count: usize,
    pub steps: Vec<T>,
}

impl<T: Scalar> SolveReport<T> {
    /// Converged, clamp-free and inside the target class.
    pub fn is_clean(&self) -> bool {
        self.converged && self.clamp_count == 0 && self.class_verdict.member
    }
}

#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub function: GridFunction<T>,
    pub report: SolveReport<T>,
}

/// Monotone inverse of a strictly increasing expression on `[lo, hi]`.
struct Inverse<'a, T> {
    map: &'a Expr,
    lo: T,
    hi: T,
    range_lo: T,
    range_hi: T,
    identity: bool,
}

impl<'a, T: Scalar> Inverse<'a, T> {
    fn new(map: &'a Expr, interval: &Interval<T>) -> Result<Self, BanachError> {
        let (lo, hi) = (interval.lo(), interval.hi());
        if map.is_identity() {
            return Ok(Self { map, lo, hi, range_lo: lo, range_hi: hi, identity: true });
        }
        let report = probe(map, lo, hi, 4097)?;
        report.ensure_total()?;
        if !report.strictly_increasing {
            return Err(BanachError::NotInvertible);
        }
        let eval = |x: T| map.eval(x).map_err(|source| EquationError::Eval { what: "Upsilon.1".into(), x: x.as_f64(), source });
        Ok(Self { map, lo, hi, range_lo: eval(lo)?, range_hi: eval(hi)?, identity: false })
    }

    /// Returns the preimage and whether `y` had to be clamped into range.
    fn solve(&self, y: T) -> Result<(T, bool), BanachError> {
        let slack = T::lit(8.0) * T::epsilon() * self.range_lo.abs().max(self.range_hi.abs()).max(T::one());
        let clamped = y < self.range_lo - slack || y > self.range_hi + slack;
        let y = y.max(self.range_lo).min(self.range_hi);
        if self.identity {
            return Ok((y, clamped));
        }
        let (mut a, mut b) = (self.lo, self.hi);
        let tol = T::lit(INVERSE_TOL);
        while b - a > tol {
            let mid = a + (b - a) / T::lit(2.0);
            if !(mid > a && mid < b) {
                break;
            }
            let v = self.map.eval(mid).map_err(|source| EquationError::Eval {
                what: "Upsilon.1".into(),
                x: mid.as_f64(),
                source,
            })?;
            if v < y {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok((a + (b - a) / T::lit(2.0), clamped))
    }
}

fn eval_expr<T: Scalar>(e: &Expr, x: T, what: &str) -> Result<T, EquationError> {
    e.eval(x).map_err(|source| EquationError::Eval { what: what.to_string(), x: x.as_f64(), source })
}

fn check_first_argument<T: Scalar>(spec: &SumEquationSpec<T>) -> Result<(), BanachError> {
    let phi = &spec.arg_maps[0];
    if phi.is_identity() {
        return Ok(());
    }
    let (lo, hi) = (spec.interval.lo(), spec.interval.hi());
    let samples = crate::linspace(lo, hi, 256);
    let ok = samples.iter().all(|&x| matches!(phi.eval(x), Ok(v) if (v - x).abs() <= T::lit(1e-12) * x.abs().max(T::one())));
    if ok {
        Ok(())
    } else {
        Err(BanachError::FirstArgument(phi.to_string()))
    }
}

/// One application of the Picard operator. Returns the new iterate and the
/// number of clamped nodes.
pub fn picard_step<T: Scalar>(f: &GridFunction<T>, spec: &SumEquationSpec<T>) -> Result<(GridFunction<T>, usize), BanachError> {
    spec.validate()?;
    check_first_argument(spec)?;
    let inverse = Inverse::new(&spec.term_maps[0], &spec.interval)?;
    picard_apply(f, spec, &inverse)
}

fn picard_apply<T: Scalar>(
    f: &GridFunction<T>,
    spec: &SumEquationSpec<T>,
    inverse: &Inverse<'_, T>,
) -> Result<(GridFunction<T>, usize), BanachError> {
    let lead = spec.weights[0];
    let node_value = |x: T| -> Result<(T, bool), BanachError> {
        let mut rest = eval_expr(&spec.rhs, x, "F")?;
        for k in 1..spec.n() {
            let arg = eval_expr(&spec.arg_maps[k], x, "phi")?;
            let inner = f.eval_iterate(arg, k + 1)?;
            rest = rest - spec.weights[k] * eval_expr(&spec.term_maps[k], inner, "Upsilon")?;
        }
        inverse.solve(rest / lead)
    };
    let computed: Vec<(T, bool)> = f.nodes().par_iter().map(|&x| node_value(x)).collect::<Result<_, _>>()?;
    let clamps = computed.iter().filter(|(_, c)| *c).count();
    let mut values: Vec<T> = computed.into_iter().map(|(v, _)| v).collect();
    let (a, b) = (spec.interval.lo(), spec.interval.hi());
    let scale = a.abs().max(b.abs()).max(T::one());
    let last = values.len() - 1;
    for (i, endpoint) in [(0, a), (last, b)] {
        if (values[i] - endpoint).abs() > T::lit(ENDPOINT_TOL) * scale {
            return Err(BanachError::EndpointDrift { endpoint: endpoint.as_f64(), value: values[i].as_f64() });
        }
        values[i] = endpoint;
    }
    Ok((f.with_values(values)?, clamps))
}

/// `max(a + δ(x − a), b − M(b − x))`, the lower envelope of `𝓕(I;δ,M)`.
pub fn class_lower_envelope<T: Scalar>(interval: Interval<T>, m: usize, delta: T, big_m: T) -> Result<GridFunction<T>, GridError> {
    let (a, b) = (interval.lo(), interval.hi());
    let mut g = GridFunction::from_fn(interval, m, EvalMode::PiecewiseLinear, |x| {
        (a + delta * (x - a)).max(b - big_m * (b - x)).max(a).min(b)
    })?;
    let mut values = g.values().to_vec();
    let last = values.len() - 1;
    values[0] = a;
    values[last] = b;
    g = g.with_values(values)?;
    Ok(g)
}

fn validate_config<T: Scalar>(cfg: &BanachConfig<T>) -> Result<(), BanachError> {
    if cfg.grid == 0 {
        return Err(BanachError::Config("grid must have at least one cell"));
    }
    if !(cfg.tol > T::zero()) {
        return Err(BanachError::Config("tol must be positive"));
    }
    if cfg.refine == 0 {
        return Err(BanachError::Config("refine factor must be positive"));
    }
    Ok(())
}

/// Picard iteration on the sum form from `f₀ = id`.
pub fn solve_sum<T: Scalar>(spec: &SumEquationSpec<T>, cfg: &BanachConfig<T>) -> Result<Solution<T>, BanachError> {
    validate_config(cfg)?;
    let nodes = GridFunction::uniform_nodes(&spec.interval, cfg.grid);
    let start = GridFunction::identity(spec.interval, nodes, EvalMode::PiecewiseLinear)?;
    solve_sum_from(spec, cfg, start)
}

/// Picard iteration on the sum form from a given start.
pub fn solve_sum_from<T: Scalar>(
    spec: &SumEquationSpec<T>,
    cfg: &BanachConfig<T>,
    start: GridFunction<T>,
) -> Result<Solution<T>, BanachError> {
    validate_config(cfg)?;
    spec.validate()?;
    check_first_argument(spec)?;
    if !(spec.weights[0] > T::zero()) {
        return Err(BanachError::LeadingWeight(spec.weights[0].as_f64()));
    }
    if start.domain() != spec.interval {
        return Err(BanachError::StartGrid);
    }
    let inverse = Inverse::new(&spec.term_maps[0], &spec.interval)?;
    let mut f = start;
    let mut steps = Vec::new();
    let mut clamp_count = 0;
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let (next, clamps) = picard_apply(&f, spec, &inverse)?;
        clamp_count += clamps;
        let step = next.sup_distance(&f)?;
        steps.push(step);
        f = next;
        if step < cfg.tol {
            converged = true;
            break;
        }
    }
    let contraction_estimate = steps
        .windows(2)
        .filter(|w| w[0] > T::zero())
        .map(|w| w[1] / w[0])
        .fold(T::zero(), |a, r| a.max(r));
    let residual = spec.residual(&f, cfg.refine)?;
    let class_verdict = in_f_class(&f, &spec.interval, cfg.class.delta, cfg.class.m);
    let report = SolveReport {
        iterations: steps.len(),
        final_step: steps.last().copied().unwrap_or_else(T::zero),
        converged,
        residual,
        class_verdict,
        contraction_estimate,
        clamp_count,
        steps,
    };
    Ok(Solution { function: f, report })
}

/// Continuous solution of the product form: log-conjugate, solve, and map
/// back. Residual and class verdict refer to the product equation.
pub fn solve_product_continuous<T: Scalar>(
    spec: &ProductEquationSpec<T>,
    cfg: &BanachConfig<T>,
) -> Result<Solution<T>, BanachError> {
    let sum = log_conjugate_spec(spec)?;
    let Solution { function: f, report } = solve_sum(&sum, cfg)?;
    let g = exp_conjugate_function(&f)?;
    let residual = spec.residual(&g, cfg.refine)?;
    let class_verdict = in_g_class(&g, &spec.interval, cfg.class.delta, cfg.class.m)?;
    Ok(Solution { function: g, report: SolveReport { residual, class_verdict, ..report } })
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport<T> {
    /// `‖g − g₁‖` on the verification points.
    pub solution_distance: T,
    /// `‖G − G₁‖` on the same points.
    pub data_distance: T,
    /// `d / (cK)`, or `1/K` in sum form.
    pub factor: T,
    pub bound: T,
    pub holds: bool,
}

/// Checks `‖g − g₁‖ ≤ (d/(cK)) ‖G − G₁‖ + eps` on the refined grid of `g`.
pub fn stability_check<T: Scalar>(
    spec: &ProductEquationSpec<T>,
    perturbed: &ProductEquationSpec<T>,
    g: &GridFunction<T>,
    g1: &GridFunction<T>,
    constants: &DerivedConstants<T>,
    refine_factor: usize,
    eps: T,
) -> Result<StabilityReport<T>, BanachError> {
    let factor = spec.interval.hi() / (spec.interval.lo() * constants.k);
    distance_bound(&spec.rhs, &perturbed.rhs, g, g1, factor, refine_factor, eps)
}

/// Checks `‖f − f₁‖ ≤ (1/K) ‖F − F₁‖ + eps` on the refined grid of `f`.
pub fn stability_check_sum<T: Scalar>(
    spec: &SumEquationSpec<T>,
    perturbed: &SumEquationSpec<T>,
    f: &GridFunction<T>,
    f1: &GridFunction<T>,
    constants: &DerivedConstants<T>,
    refine_factor: usize,
    eps: T,
) -> Result<StabilityReport<T>, BanachError> {
    distance_bound(&spec.rhs, &perturbed.rhs, f, f1, T::one() / constants.k, refine_factor, eps)
}

fn distance_bound<T: Scalar>(
    rhs: &Expr,
    rhs1: &Expr,
    g: &GridFunction<T>,
    g1: &GridFunction<T>,
    factor: T,
    refine_factor: usize,
    eps: T,
) -> Result<StabilityReport<T>, BanachError> {
    let points = refine(g.nodes(), refine_factor.max(1));
    let mut solution_distance = T::zero();
    let mut data_distance = T::zero();
    for &x in &points {
        solution_distance = solution_distance.max((g.eval(x)? - g1.eval(x)?).abs());
        data_distance = data_distance.max((eval_expr(rhs, x, "G")? - eval_expr(rhs1, x, "G")?).abs());
    }
    let bound = factor * data_distance;
    Ok(StabilityReport { solution_distance, data_distance, factor, bound, holds: solution_distance <= bound + eps })
}

/// Existence constants for a spec, after checking arity.
pub fn constants_for<T: Scalar>(lambda: &[T], class: &ClassParams<T>) -> Result<DerivedConstants<T>, BanachError> {
    Ok(derived_constants(lambda, class)?)
}
