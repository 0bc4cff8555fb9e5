//! Minimum and maximum order-preserving solutions by Kleene iteration.
//!
//! With `λ = Σλ_k > 0`, `α = λ`, `α₁ = 1 − λ₁`, `α_k = −λ_k` and
//! `H = G^{1/λ}`, the product equation is equivalent to `g = Tg` for
//!
//! ```text
//!     (Tg)(x) = g(x)^{α₁} · ∏_{k≥2} Ξ_k(g^k(ψ_k x))^{α_k} · H(x)^α.
//! ```
//!
//! All exponents are non-negative and sum to one, so `T` maps monotone
//! functions with values in `[δ, d]` to monotone functions with values in
//! `[δ, d]`, and is order-preserving. The solver works on the finite lattice
//! of nondecreasing level vectors: node values drawn from `p + 1` levels
//! spanning `[δ, d]`. The min path rounds `Tg` down and climbs from `δ`; the
//! max path rounds up and descends from `d`. Both stop at a fixed point of
//! the rounded operator, and by construction
//!
//! ```text
//!     ĝ_min ⊴ T(ĝ_min)        T(ĝ_max) ⊴ ĝ_max
//! ```
//!
//! so `ĝ_min` is a sub-solution and `ĝ_max` a super-solution.

use rayon::prelude::*;
use serde::Serialize;

use crate::classes::{check_tarski_hypotheses, HypothesisReport, PROBE_SAMPLES};
use crate::equation::{EquationError, ProductEquationSpec, Residual};
use crate::expr::{checked_pow, probe, probe_jumps, Expr, JumpSide};
use crate::funcrep::{EvalMode, GridError, GridFunction, PointwiseOrder, Rounding, ValueGrid};
use crate::lattice::{kleene, Direction, KleeneError};
use crate::Scalar;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TarskiError {
    #[error("hypotheses not satisfied:\n{0}")]
    Hypotheses(HypothesisReport),
    #[error("exponents alpha sum to {sum}, expected 1")]
    Exponents { sum: f64 },
    #[error("{what} has a jump at x = {x} on the wrong side for {mode:?} mode")]
    SemiContinuity { what: String, x: f64, mode: EvalMode },
    #[error("{path} path: {message}")]
    Kleene { path: &'static str, message: String },
    #[error("{path} path limit failed certification")]
    Certification { path: &'static str },
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Equation(#[from] EquationError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// The operator `T` of the order-preserving route.
#[derive(Clone, Debug)]
pub struct TOperator<T> {
    /// `α = λ`.
    pub alpha: T,
    /// `α₁ = 1 − λ₁`, `α_k = −λ_k`.
    pub alphas: Vec<T>,
    /// `H = G^{1/λ}`.
    pub h: Expr,
    spec: ProductEquationSpec<T>,
}

impl<T: Scalar> TOperator<T> {
    pub fn spec(&self) -> &ProductEquationSpec<T> {
        &self.spec
    }

    pub fn floor(&self) -> T {
        self.spec.floor
    }

    pub fn ceiling(&self) -> T {
        self.spec.interval.hi()
    }

    /// `α + Σ α_k`.
    pub fn exponent_total(&self) -> T {
        self.alphas.iter().fold(self.alpha, |a, &b| a + b)
    }
}

/// Builds `T` after checking the hypotheses of the existence theorem.
pub fn build_t<T: Scalar>(spec: &ProductEquationSpec<T>) -> Result<TOperator<T>, TarskiError> {
    let report = check_tarski_hypotheses(spec);
    if !report.all_passed() {
        return Err(TarskiError::Hypotheses(report));
    }
    build_t_unchecked(spec)
}

/// Builds `T` without the hypothesis probe.
pub fn build_t_unchecked<T: Scalar>(spec: &ProductEquationSpec<T>) -> Result<TOperator<T>, TarskiError> {
    spec.validate()?;
    let lambda = spec.exponent_sum();
    let mut alphas = Vec::with_capacity(spec.n());
    alphas.push(T::one() - spec.exponents[0]);
    alphas.extend(spec.exponents.iter().skip(1).map(|&l| -l));
    let h = Expr::pow(spec.rhs.clone(), Expr::num((T::one() / lambda).as_f64()));
    let op = TOperator { alpha: lambda, alphas, h, spec: spec.clone() };
    let total = op.exponent_total();
    let tol = T::lit(8.0) * T::epsilon() * T::from_usize_lossy(spec.n() + 1);
    if (total - T::one()).abs() > tol {
        return Err(TarskiError::Exponents { sum: total.as_f64() });
    }
    Ok(op)
}

fn eval_named<T: Scalar>(e: &Expr, x: T, what: impl Fn() -> String) -> Result<T, EquationError> {
    e.eval(x).map_err(|source| EquationError::Eval { what: what(), x: x.as_f64(), source })
}

fn power<T: Scalar>(base: T, exponent: T, x: T, what: impl Fn() -> String) -> Result<T, EquationError> {
    checked_pow(base, exponent).map_err(|source| EquationError::Eval { what: what(), x: x.as_f64(), source })
}

/// `(Tg)(x)` for an arbitrary unknown.
fn t_at<T: Scalar>(op: &TOperator<T>, g: &GridFunction<T>, i: usize) -> Result<T, TarskiError> {
    let x = g.nodes()[i];
    let spec = &op.spec;
    let mut v = power(g.values()[i], op.alphas[0], x, || "g^alpha.1".into())?;
    for k in 1..spec.n() {
        let arg = eval_named(&spec.arg_maps[k], x, || format!("psi.{}", k + 1))?;
        let inner = g.eval_iterate(arg, k + 1)?;
        let xi = eval_named(&spec.factor_maps[k], inner, || format!("Xi.{}", k + 1))?;
        v = v * power(xi, op.alphas[k], x, || format!("Xi.{}^alpha.{}", k + 1, k + 1))?;
    }
    let h = eval_named(&op.h, x, || "H".into())?;
    Ok(v * power(h, op.alpha, x, || "H^alpha".into())?)
}

/// Node values of `Tg` without clamping.
pub fn apply_t_raw<T: Scalar>(op: &TOperator<T>, g: &GridFunction<T>) -> Result<Vec<T>, TarskiError> {
    (0..g.len()).into_par_iter().map(|i| t_at(op, g, i)).collect()
}

/// `Tg` on `g`'s nodes and mode, clamped into `[δ, d]`. Returns the number
/// of clamped nodes alongside.
pub fn apply_t<T: Scalar>(op: &TOperator<T>, g: &GridFunction<T>) -> Result<(GridFunction<T>, usize), TarskiError> {
    let (lo, hi) = (op.floor(), op.ceiling());
    let mut clamps = 0;
    let values = apply_t_raw(op, g)?
        .into_iter()
        .map(|v| {
            if v < lo || v > hi {
                clamps += 1;
            }
            v.max(lo).min(hi)
        })
        .collect();
    let tg = GridFunction::new(g.domain(), g.shared_nodes(), values, g.mode(), Some(lo))?;
    Ok((tg, clamps))
}

/// `sup |Tg − g|` over nodes.
pub fn fixed_point_defect<T: Scalar>(op: &TOperator<T>, g: &GridFunction<T>) -> Result<T, TarskiError> {
    let raw = apply_t_raw(op, g)?;
    Ok(raw.iter().zip(g.values()).fold(T::zero(), |a, (&t, &v)| a.max((t - v).abs())))
}

/// Product-equation residual on the grid refined `refine_factor` times.
pub fn residual<T: Scalar>(spec: &ProductEquationSpec<T>, g: &GridFunction<T>, refine_factor: usize) -> Result<Residual<T>, TarskiError> {
    Ok(spec.residual(g, refine_factor)?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TarskiConfig<T> {
    /// Number of grid cells `m`; the grid has `m + 1` nodes.
    pub grid: usize,
    /// Number of level intervals `p`; there are `p + 1` levels on `[δ, d]`.
    pub levels: usize,
    pub mode: EvalMode,
    /// Tolerance used by uniqueness verdicts on solved pairs.
    pub tol: T,
    /// Defaults to `(m + 1)·p + 1`, enough for any chain of level vectors.
    pub max_sweeps: Option<usize>,
    pub refine: usize,
}

impl<T: Scalar> TarskiConfig<T> {
    pub fn new(grid: usize, levels: usize, mode: EvalMode) -> Self {
        Self { grid, levels, mode, tol: T::lit(1e-2), max_sweeps: None, refine: 4 }
    }

    pub fn sweep_bound(&self) -> usize {
        (self.grid + 1) * self.levels + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Path {
    Min,
    Max,
}

impl Path {
    pub fn name(self) -> &'static str {
        match self {
            Path::Min => "min",
            Path::Max => "max",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PathResult<T> {
    #[serde(skip)]
    pub g: GridFunction<T>,
    pub path: Path,
    pub sweeps: usize,
    /// Sub-solution (min) or super-solution (max) property of the limit.
    /// Always false in piecewise-linear mode.
    pub certified: bool,
    pub residual: Residual<T>,
    pub fixed_point_defect: T,
    pub clamp_count: usize,
    pub monotone: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TarskiResult<T> {
    pub mode: EvalMode,
    pub grid: usize,
    pub levels: usize,
    pub min: Option<PathResult<T>>,
    pub max: Option<PathResult<T>>,
    /// `ĝ_min ⊴ ĝ_max` when both paths ran.
    pub ordered: Option<bool>,
    /// Largest node gap between the two limits when both ran.
    pub gap: Option<T>,
}

impl<T: Scalar> TarskiResult<T> {
    pub fn g_min(&self) -> Option<&GridFunction<T>> {
        self.min.as_ref().map(|p| &p.g)
    }

    pub fn g_max(&self) -> Option<&GridFunction<T>> {
        self.max.as_ref().map(|p| &p.g)
    }

    /// Every path that ran is certified and the pair, if any, is ordered.
    pub fn certified(&self) -> bool {
        self.min.iter().chain(&self.max).all(|p| p.certified) && self.ordered != Some(false)
    }
}

fn check_semicontinuity<T: Scalar>(spec: &ProductEquationSpec<T>, mode: EvalMode) -> Result<(), TarskiError> {
    let wrong = match mode {
        EvalMode::StepUsc => JumpSide::Left,
        EvalMode::StepLsc => JumpSide::Right,
        EvalMode::PiecewiseLinear => return Ok(()),
    };
    let (c, d) = (spec.interval.lo(), spec.interval.hi());
    let delta = spec.floor;
    let mut exprs: Vec<(String, &Expr, T, T)> = vec![("G".into(), &spec.rhs, c, d)];
    for (k, psi) in spec.arg_maps.iter().enumerate().skip(1) {
        exprs.push((format!("psi.{}", k + 1), psi, c, d));
    }
    for (k, xi) in spec.factor_maps.iter().enumerate().skip(1) {
        exprs.push((format!("Xi.{}", k + 1), xi, delta, d));
    }
    for (what, e, lo, hi) in exprs {
        if e.is_constant() || !(lo < hi) {
            continue;
        }
        let jumps = probe_jumps(e, lo, hi, PROBE_SAMPLES).map_err(|err| {
            TarskiError::Equation(EquationError::Eval {
                what: what.clone(),
                x: lo.as_f64(),
                source: match err {
                    crate::expr::ProbeError::Domain { source, .. } => source,
                    _ => crate::expr::EvalError::NonFinite { op: "probe" },
                },
            })
        })?;
        if let Some(j) = jumps.iter().find(|j| j.side == wrong) {
            return Err(TarskiError::SemiContinuity { what, x: j.right.as_f64(), mode });
        }
    }
    Ok(())
}

/// The lattice the solver works in: nodes, levels and the two extreme elements.
pub struct QuantizedLattice<T> {
    pub levels: ValueGrid<T>,
    pub bottom: GridFunction<T>,
    pub top: GridFunction<T>,
}

pub fn quantized_lattice<T: Scalar>(op: &TOperator<T>, cfg: &TarskiConfig<T>) -> Result<QuantizedLattice<T>, TarskiError> {
    if cfg.grid == 0 || cfg.levels == 0 {
        return Err(TarskiError::Config("grid and levels must be positive"));
    }
    if cfg.refine == 0 {
        return Err(TarskiError::Config("refine factor must be positive"));
    }
    let (lo, hi) = (op.floor(), op.ceiling());
    let levels = ValueGrid::uniform(lo, hi, cfg.levels)?;
    let domain = op.spec.interval;
    let nodes = GridFunction::uniform_nodes(&domain, cfg.grid);
    let bottom = GridFunction::constant(domain, nodes.clone(), lo, cfg.mode, Some(lo))?;
    let top = GridFunction::constant(domain, nodes, hi, cfg.mode, Some(lo))?;
    Ok(QuantizedLattice { levels, bottom, top })
}

/// `Q(Tg)` with `Q` the directional rounding onto the level grid.
pub fn apply_quantized<T: Scalar>(
    op: &TOperator<T>,
    g: &GridFunction<T>,
    levels: &ValueGrid<T>,
    rounding: Rounding,
) -> Result<(GridFunction<T>, usize), TarskiError> {
    let (tg, clamps) = apply_t(op, g)?;
    Ok((tg.quantize(levels, rounding)?, clamps))
}

fn run_path<T: Scalar>(
    op: &TOperator<T>,
    cfg: &TarskiConfig<T>,
    lattice: &QuantizedLattice<T>,
    path: Path,
) -> Result<PathResult<T>, TarskiError> {
    let (start, rounding, direction) = match path {
        Path::Min => (lattice.bottom.clone(), Rounding::Down, Direction::Ascending),
        Path::Max => (lattice.top.clone(), Rounding::Up, Direction::Descending),
    };
    let mut clamp_count = 0;
    let outcome = kleene(
        start,
        |g| {
            let (next, clamps) = apply_quantized(op, g, &lattice.levels, rounding)?;
            clamp_count += clamps;
            Ok::<_, TarskiError>(next)
        },
        |a, b| a.le(b).unwrap_or(false),
        direction,
        cfg.max_sweeps.unwrap_or_else(|| cfg.sweep_bound()),
    )
    .map_err(|e| match e {
        KleeneError::Step { source, .. } => source,
        KleeneError::NotMonotone { iteration, .. } => TarskiError::Kleene {
            path: path.name(),
            message: format!("sweep {iteration} broke monotonicity"),
        },
        KleeneError::Exhausted { steps } => TarskiError::Kleene {
            path: path.name(),
            message: format!("no fixed point within {steps} sweeps"),
        },
    })?;
    let g = outcome.limit;
    let raw = apply_t_raw(op, &g)?;
    let bracket = match path {
        Path::Min => g.values().iter().zip(&raw).all(|(&v, &t)| v <= t),
        Path::Max => g.values().iter().zip(&raw).all(|(&v, &t)| t <= v),
    };
    if cfg.mode.is_step() && !bracket {
        return Err(TarskiError::Certification { path: path.name() });
    }
    let defect = raw.iter().zip(g.values()).fold(T::zero(), |a, (&t, &v)| a.max((t - v).abs()));
    Ok(PathResult {
        residual: residual(&op.spec, &g, cfg.refine)?,
        monotone: g.is_monotone(),
        certified: cfg.mode.is_step() && bracket,
        fixed_point_defect: defect,
        sweeps: outcome.steps,
        clamp_count,
        path,
        g,
    })
}

fn solve_paths<T: Scalar>(
    spec: &ProductEquationSpec<T>,
    cfg: &TarskiConfig<T>,
    min: bool,
    max: bool,
) -> Result<TarskiResult<T>, TarskiError> {
    let op = build_t(spec)?;
    check_semicontinuity(spec, cfg.mode)?;
    let lattice = quantized_lattice(&op, cfg)?;
    let (lo_path, hi_path) = rayon::join(
        || min.then(|| run_path(&op, cfg, &lattice, Path::Min)).transpose(),
        || max.then(|| run_path(&op, cfg, &lattice, Path::Max)).transpose(),
    );
    let (lo_path, hi_path) = (lo_path?, hi_path?);
    let (ordered, gap) = match (&lo_path, &hi_path) {
        (Some(a), Some(b)) => (Some(a.g.le(&b.g)?), Some(a.g.sup_distance(&b.g)?)),
        _ => (None, None),
    };
    Ok(TarskiResult { mode: cfg.mode, grid: cfg.grid, levels: cfg.levels, min: lo_path, max: hi_path, ordered, gap })
}

pub fn solve_min<T: Scalar>(spec: &ProductEquationSpec<T>, cfg: &TarskiConfig<T>) -> Result<TarskiResult<T>, TarskiError> {
    solve_paths(spec, cfg, true, false)
}

pub fn solve_max<T: Scalar>(spec: &ProductEquationSpec<T>, cfg: &TarskiConfig<T>) -> Result<TarskiResult<T>, TarskiError> {
    solve_paths(spec, cfg, false, true)
}

pub fn solve_both<T: Scalar>(spec: &ProductEquationSpec<T>, cfg: &TarskiConfig<T>) -> Result<TarskiResult<T>, TarskiError> {
    solve_paths(spec, cfg, true, true)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum UniquenessVerdict<T> {
    /// Hypotheses hold and the two functions agree within tolerance.
    Equal { distance: T },
    /// Hypotheses hold but the functions differ; `at` is the worst node.
    Distinct { distance: T, at: T },
    NotApplicable { reason: String, witness: Option<T> },
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport<T> {
    pub verdict: UniquenessVerdict<T>,
    pub residual_first: T,
    pub residual_second: T,
    /// `Ψ₁` strictly increasing on `[δ, d]` at the probe density below.
    pub lead_strict: bool,
    pub probe_samples: usize,
}

fn uniqueness_common<T: Scalar>(
    spec: &ProductEquationSpec<T>,
    g1: &GridFunction<T>,
    g2: &GridFunction<T>,
    residual_tol: T,
    refine_factor: usize,
) -> Result<(UniquenessReport<T>, bool), TarskiError> {
    let r1 = spec.residual(g1, refine_factor)?.sup;
    let r2 = spec.residual(g2, refine_factor)?.sup;
    let lead_strict = spec.exponents[0] > T::zero()
        && spec.floor < spec.interval.hi()
        && probe(&spec.factor_maps[0], spec.floor, spec.interval.hi(), PROBE_SAMPLES)
            .map(|r| r.strictly_increasing && r.domain_errors.is_empty())
            .unwrap_or(false);
    let mut rep = UniquenessReport {
        verdict: UniquenessVerdict::NotApplicable { reason: String::new(), witness: None },
        residual_first: r1,
        residual_second: r2,
        lead_strict,
        probe_samples: PROBE_SAMPLES,
    };
    if !g1.same_nodes(g2) {
        return Err(GridError::NodeMismatch.into());
    }
    let reason = if r1 > residual_tol || r2 > residual_tol {
        Some("residual too large")
    } else if !lead_strict {
        Some("Psi.1 not strictly increasing on [delta, d]")
    } else {
        None
    };
    if let Some(reason) = reason {
        rep.verdict = UniquenessVerdict::NotApplicable { reason: reason.into(), witness: None };
        return Ok((rep, false));
    }
    Ok((rep, true))
}

fn distance_verdict<T: Scalar>(g1: &GridFunction<T>, g2: &GridFunction<T>, tol: T) -> UniquenessVerdict<T> {
    let (mut distance, mut at) = (T::zero(), g1.nodes()[0]);
    for ((&x, &a), &b) in g1.nodes().iter().zip(g1.values()).zip(g2.values()) {
        if (a - b).abs() > distance {
            distance = (a - b).abs();
            at = x;
        }
    }
    if distance <= tol {
        UniquenessVerdict::Equal { distance }
    } else {
        UniquenessVerdict::Distinct { distance, at }
    }
}

/// Two comparable solutions coincide when `Ψ₁` is strictly increasing.
pub fn uniqueness_comparable<T: Scalar>(
    spec: &ProductEquationSpec<T>,
    g1: &GridFunction<T>,
    g2: &GridFunction<T>,
    residual_tol: T,
    tol: T,
    refine_factor: usize,
) -> Result<UniquenessReport<T>, TarskiError> {
    let (mut rep, ok) = uniqueness_common(spec, g1, g2, residual_tol, refine_factor)?;
    if !ok {
        return Ok(rep);
    }
    rep.verdict = match g1.pointwise_order(g2)? {
        PointwiseOrder::Incomparable => {
            UniquenessVerdict::NotApplicable { reason: "solutions are not comparable".into(), witness: None }
        }
        _ => distance_verdict(g1, g2, tol),
    };
    Ok(rep)
}

/// Two commuting solutions coincide when `Ψ₁` is strictly increasing.
/// Commutation is checked on nodes, exactly in step modes.
pub fn uniqueness_commuting<T: Scalar>(
    spec: &ProductEquationSpec<T>,
    g1: &GridFunction<T>,
    g2: &GridFunction<T>,
    residual_tol: T,
    tol: T,
    refine_factor: usize,
) -> Result<UniquenessReport<T>, TarskiError> {
    let (mut rep, ok) = uniqueness_common(spec, g1, g2, residual_tol, refine_factor)?;
    if !ok {
        return Ok(rep);
    }
    let slack = if g1.mode().is_step() && g2.mode().is_step() { T::zero() } else { tol };
    let mut witness = None;
    for &x in g1.nodes() {
        let a = g1.eval(g2.eval(x)?)?;
        let b = g2.eval(g1.eval(x)?)?;
        if (a - b).abs() > slack {
            witness = Some(x);
            break;
        }
    }
    rep.verdict = match witness {
        Some(x) => UniquenessVerdict::NotApplicable { reason: "commutation fails".into(), witness: Some(x) },
        None => distance_verdict(g1, g2, tol),
    };
    Ok(rep)
}
