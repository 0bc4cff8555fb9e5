//! Solution classes, the existence constants `K₀, K₁, K`, and itemized
//! hypothesis checks for both solvers.
//!
//! `𝓕(I;δ,M)`: self-maps of `I = [a,b]` fixing `a` and `b` with
//! `δ(x−y) ≤ f(x)−f(y) ≤ M(x−y)` for `x ≥ y`.
//!
//! `𝒢(J;δ,M)`: self-maps of `J = [c,d] ⊂ (0,∞)` fixing `c` and `d` with
//! `(x/y)^δ ≤ g(x)/g(y) ≤ (x/y)^M` for `x ≥ y`, checked in log form.

use num_traits::Num;
use rayon::prelude::*;
use serde::Serialize;

use crate::equation::ProductEquationSpec;
use crate::expr::{probe, Expr};
use crate::funcrep::{GridFunction, Interval};
use crate::{linspace, Scalar};

/// Tolerance on endpoint equalities and on the two-point inequalities.
pub const CLASS_EPS: f64 = 1e-9;

/// Samples used when probing expressions.
pub const PROBE_SAMPLES: usize = 4097;

/// Node pairs used when probing class membership of an expression.
const CLASS_PROBE_SAMPLES: usize = 1025;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassParams<T> {
    pub delta: T,
    #[serde(rename = "M")]
    pub m: T,
    pub l: Vec<T>,
    #[serde(rename = "L")]
    pub big_l: Vec<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DerivedConstants<T> {
    pub lambda_sum: T,
    #[serde(rename = "K0")]
    pub k0: T,
    #[serde(rename = "K1")]
    pub k1: T,
    #[serde(rename = "K")]
    pub k: T,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ClassError {
    #[error("lambda, l and L must have the same length n >= 1 (got {lambda}, {l}, {big_l})")]
    Arity { lambda: usize, l: usize, big_l: usize },
    #[error("exponents sum to zero and cannot be normalized")]
    ZeroSum,
    #[error("log-form membership needs positive nodes and values; found {value} at x = {x}")]
    NonPositive { x: f64, value: f64 },
}

/// `K₀ = Σ λ_k l_k δ^{k−1}`, `K₁ = Σ λ_k L_k M^{k−1}` and
/// `K = λ₁l₁ − Σ_{k≥2} λ_k (L_k (M^{k−1}−1)/(M−1) − l_k δ^{k−1})`.
///
/// `(M^{k−1}−1)/(M−1)` is evaluated as `1 + M + … + M^{k−2}`, so the result is
/// exact for rational scalars and well defined at `M = 1`.
pub fn derived_constants<T: Num + Clone>(lambda: &[T], cp: &ClassParams<T>) -> Result<DerivedConstants<T>, ClassError> {
    let n = lambda.len();
    if n == 0 || cp.l.len() != n || cp.big_l.len() != n {
        return Err(ClassError::Arity { lambda: n, l: cp.l.len(), big_l: cp.big_l.len() });
    }
    let mut lambda_sum = T::zero();
    let mut k0 = T::zero();
    let mut k1 = T::zero();
    let mut k = lambda[0].clone() * cp.l[0].clone();
    // delta^{k-1}, M^{k-1}, and 1 + M + ... + M^{k-2}
    let mut dpow = T::one();
    let mut mpow = T::one();
    let mut geo = T::zero();
    for (i, lam) in lambda.iter().take(n).cloned().enumerate() {
        lambda_sum = lambda_sum + lam.clone();
        k0 = k0 + lam.clone() * cp.l[i].clone() * dpow.clone();
        k1 = k1 + lam.clone() * cp.big_l[i].clone() * mpow.clone();
        if i > 0 {
            let inner = cp.big_l[i].clone() * geo.clone() - cp.l[i].clone() * dpow.clone();
            k = k - lam * inner;
        }
        geo = geo + mpow.clone();
        dpow = dpow * cp.delta.clone();
        mpow = mpow * cp.m.clone();
    }
    Ok(DerivedConstants { lambda_sum, k0, k1, k })
}

/// Divides each exponent by their sum.
pub fn normalize_lambdas<T: Scalar>(lambda: &[T]) -> Result<Vec<T>, ClassError> {
    let sum = lambda.iter().fold(T::zero(), |a, &b| a + b);
    if sum == T::zero() {
        return Err(ClassError::ZeroSum);
    }
    if sum == T::one() {
        return Ok(lambda.to_vec());
    }
    Ok(lambda.iter().map(|&l| l / sum).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    /// An endpoint is not fixed.
    Endpoint,
    /// Growth over a pair falls below the `δ` bound.
    BelowLower,
    /// Growth over a pair exceeds the `M` bound.
    AboveUpper,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MembershipVerdict<T> {
    pub member: bool,
    pub violation: Option<Violation>,
    /// `(x, y)` with `x > y` for pair violations, `(x, g(x))` for endpoints.
    pub witness: Option<(T, T)>,
    pub pairs_checked: usize,
}

impl<T> MembershipVerdict<T> {
    fn pass(pairs_checked: usize) -> Self {
        Self { member: true, violation: None, witness: None, pairs_checked }
    }
}

/// Pairwise scan in difference form. Returns the first violation as node
/// indices; endpoint violations carry the same index twice.
fn difference_scan<T: Scalar>(xs: &[T], vs: &[T], lo: T, hi: T, delta: T, m: T) -> Option<(Violation, usize, usize)> {
    let n = xs.len();
    let scale = lo.abs().max(hi.abs()).max(T::one());
    let eps = T::lit(CLASS_EPS) * scale;
    for (i, target) in [(0, lo), (n - 1, hi)] {
        if (vs[i] - target).abs() > eps {
            return Some((Violation::Endpoint, i, i));
        }
    }
    (1..n).into_par_iter().find_map_first(|i| {
        (0..i).find_map(|j| {
            let dx = xs[i] - xs[j];
            let dv = vs[i] - vs[j];
            if dv < delta * dx - eps {
                Some((Violation::BelowLower, i, j))
            } else if dv > m * dx + eps {
                Some((Violation::AboveUpper, i, j))
            } else {
                None
            }
        })
    })
}

fn verdict<T: Scalar>(xs: &[T], vs: &[T], found: Option<(Violation, usize, usize)>) -> MembershipVerdict<T> {
    let n = xs.len();
    match found {
        None => MembershipVerdict::pass(n * (n - 1) / 2),
        Some((Violation::Endpoint, i, _)) => MembershipVerdict {
            member: false,
            violation: Some(Violation::Endpoint),
            witness: Some((xs[i], vs[i])),
            pairs_checked: 0,
        },
        Some((v, i, j)) => MembershipVerdict {
            member: false,
            violation: Some(v),
            witness: Some((xs[i], xs[j])),
            pairs_checked: n * (n - 1) / 2,
        },
    }
}

/// `f ∈ 𝓕(I;δ,M)` over all node pairs.
pub fn in_f_class<T: Scalar>(f: &GridFunction<T>, interval: &Interval<T>, delta: T, m: T) -> MembershipVerdict<T> {
    let (xs, vs) = (f.nodes(), f.values());
    verdict(xs, vs, difference_scan(xs, vs, interval.lo(), interval.hi(), delta, m))
}

fn ratio_class<T: Scalar>(xs: &[T], vs: &[T], lo: T, hi: T, delta: T, m: T) -> Result<MembershipVerdict<T>, ClassError> {
    if !(lo > T::zero()) {
        return Err(ClassError::NonPositive { x: lo.as_f64(), value: lo.as_f64() });
    }
    let mut lx = Vec::with_capacity(xs.len());
    let mut lv = Vec::with_capacity(xs.len());
    for (&x, &v) in xs.iter().zip(vs) {
        if !(x > T::zero() && v > T::zero()) {
            return Err(ClassError::NonPositive { x: x.as_f64(), value: v.as_f64() });
        }
        lx.push(x.ln());
        lv.push(v.ln());
    }
    Ok(verdict(xs, vs, difference_scan(&lx, &lv, lo.ln(), hi.ln(), delta, m)))
}

/// `g ∈ 𝒢(J;δ,M)` over all node pairs, in log form.
pub fn in_g_class<T: Scalar>(
    g: &GridFunction<T>,
    interval: &Interval<T>,
    delta: T,
    m: T,
) -> Result<MembershipVerdict<T>, ClassError> {
    ratio_class(g.nodes(), g.values(), interval.lo(), interval.hi(), delta, m)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    /// Evidence comes from dense sampling rather than an exact check.
    pub sampled: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub items: Vec<HypothesisItem>,
}

impl HypothesisReport {
    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>, sampled: bool) {
        self.items.push(HypothesisItem { name: name.into(), passed, detail: detail.into(), sampled });
    }

    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisItem> {
        self.items.iter().filter(|i| !i.passed)
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisItem> {
        self.items.iter().find(|i| i.name == name)
    }
}

impl std::fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for item in &self.items {
            let mark = if item.passed { "ok  " } else { "FAIL" };
            let how = if item.sampled { " (sampled)" } else { "" };
            writeln!(f, "[{mark}] {}{how}: {}", item.name, item.detail)?;
        }
        Ok(())
    }
}

fn sample_expr<T: Scalar>(e: &Expr, lo: T, hi: T, segments: usize) -> Result<(Vec<T>, Vec<T>), String> {
    let xs = linspace(lo, hi, segments);
    let vs = xs
        .iter()
        .map(|&x| e.eval(x).map_err(|err| format!("x = {x}: {err}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((xs, vs))
}

/// Structural identity, or sampled agreement with `x` to 1e-12.
fn is_identity_map<T: Scalar>(e: &Expr, lo: T, hi: T) -> (bool, bool) {
    if e.is_identity() {
        return (true, false);
    }
    let ok = match sample_expr(e, lo, hi, PROBE_SAMPLES - 1) {
        Ok((xs, vs)) => {
            let scale = lo.abs().max(hi.abs()).max(T::one());
            xs.iter().zip(&vs).all(|(&x, &v)| (x - v).abs() <= T::lit(1e-12) * scale)
        }
        Err(_) => false,
    };
    (ok, true)
}

/// Probed: nondecreasing and mapping `[lo, hi]` into `[tlo, thi]`.
fn monotone_into<T: Scalar>(e: &Expr, lo: T, hi: T, tlo: T, thi: T) -> (bool, String) {
    match probe(e, lo, hi, PROBE_SAMPLES) {
        Ok(r) => {
            if let Some((x, err)) = r.domain_errors.first() {
                return (false, format!("undefined at x = {x}: {err}"));
            }
            let inside = r.min >= tlo && r.max <= thi;
            let detail = format!(
                "range [{}, {}] on [{lo}, {hi}], target [{tlo}, {thi}], {}",
                r.min,
                r.max,
                if r.monotone { "nondecreasing" } else { "not monotone" }
            );
            (r.monotone && inside, detail)
        }
        Err(e) => (false, e.to_string()),
    }
}

/// Hypotheses of the continuous-solution theorem.
pub fn check_banach_hypotheses<T: Scalar>(spec: &ProductEquationSpec<T>, cp: &ClassParams<T>) -> HypothesisReport {
    let mut rep = HypothesisReport::default();
    if let Err(e) = spec.validate() {
        rep.push("arity", false, e.to_string(), false);
        return rep;
    }
    let n = spec.n();
    let lam = &spec.exponents;
    let (c, d) = (spec.interval.lo(), spec.interval.hi());
    rep.push("c > 0", c > T::zero(), format!("J = [{c}, {d}]"), false);
    rep.push("0 < lambda.1 < 1", lam[0] > T::zero() && lam[0] < T::one(), format!("lambda.1 = {}", lam[0]), false);
    let bad = lam.iter().skip(1).position(|&l| l < T::zero());
    rep.push(
        "lambda.k >= 0 (k >= 2)",
        bad.is_none(),
        match bad {
            Some(i) => format!("lambda.{} = {}", i + 2, lam[i + 1]),
            None => format!("{n} exponents"),
        },
        false,
    );
    let sum = spec.exponent_sum();
    rep.push(
        "sum lambda = 1",
        (sum - T::one()).abs() <= T::lit(1e-12),
        format!("sum = {sum}"),
        false,
    );
    rep.push(
        "0 < delta < 1 < M",
        cp.delta > T::zero() && cp.delta < T::one() && cp.m > T::one(),
        format!("delta = {}, M = {}", cp.delta, cp.m),
        false,
    );
    let arity_ok = cp.l.len() == n && cp.big_l.len() == n;
    rep.push(
        "l, L have n entries",
        arity_ok,
        format!("n = {n}, |l| = {}, |L| = {}", cp.l.len(), cp.big_l.len()),
        false,
    );
    if !arity_ok {
        return rep;
    }
    let lip_ok = cp.l.iter().zip(&cp.big_l).all(|(&l, &u)| u >= l && l >= T::zero());
    rep.push("L.k >= l.k >= 0", lip_ok, format!("l = {:?}, L = {:?}", cp.l, cp.big_l), false);
    for (k, psi) in spec.arg_maps.iter().enumerate() {
        let (ok, sampled) = is_identity_map(psi, c, d);
        rep.push(format!("psi.{} = id", k + 1), ok, psi.to_string(), sampled);
    }
    let positive = c > T::zero();
    for (k, xi) in spec.factor_maps.iter().enumerate() {
        let name = format!("Xi.{} in G(J; l.{}, L.{})", k + 1, k + 1, k + 1);
        if !positive {
            rep.push(name, false, "J must lie in (0, inf)", true);
            continue;
        }
        rep.push_expr_class(name, xi, c, d, cp.l[k], cp.big_l[k]);
    }
    let Ok(dc) = derived_constants(lam, cp) else {
        return rep;
    };
    rep.push(
        "K > 0",
        dc.k > T::zero(),
        format!("K0 = {}, K1 = {}, K = {}", dc.k0, dc.k1, dc.k),
        false,
    );
    let (lo, hi) = (dc.k1 * cp.delta, dc.k0 * cp.m);
    if positive {
        rep.push_expr_class(format!("G in G(J; K1*delta, K0*M) = G(J; {lo}, {hi})"), &spec.rhs, c, d, lo, hi);
    } else {
        rep.push("G in G(J; K1*delta, K0*M)", false, "J must lie in (0, inf)", true);
    }
    rep
}

impl HypothesisReport {
    fn push_expr_class<T: Scalar>(&mut self, name: String, e: &Expr, c: T, d: T, lo: T, hi: T) {
        match sample_expr(e, c, d, CLASS_PROBE_SAMPLES - 1) {
            Err(err) => self.push(name, false, err, true),
            Ok((xs, vs)) => match ratio_class(&xs, &vs, c, d, lo, hi) {
                Err(err) => self.push(name, false, err.to_string(), true),
                Ok(v) if v.member => self.push(name, true, format!("{} node pairs", v.pairs_checked), true),
                Ok(v) => self.push(
                    name,
                    false,
                    format!("{:?} at {:?}", v.violation.expect("failed verdict"), v.witness.expect("failed verdict")),
                    true,
                ),
            },
        }
    }
}

/// Hypotheses of the order-preserving-solution theorem.
pub fn check_tarski_hypotheses<T: Scalar>(spec: &ProductEquationSpec<T>) -> HypothesisReport {
    let mut rep = HypothesisReport::default();
    if let Err(e) = spec.validate() {
        rep.push("arity", false, e.to_string(), false);
        return rep;
    }
    let (c, d) = (spec.interval.lo(), spec.interval.hi());
    let delta = spec.floor;
    let lam = &spec.exponents;
    rep.push("delta > 0", delta > T::zero(), format!("delta = {delta}"), false);
    rep.push("c <= delta <= d", c <= delta && delta <= d, format!("J = [{c}, {d}], delta = {delta}"), false);
    let lambda = spec.exponent_sum();
    rep.push("lambda > 0", lambda > T::zero(), format!("lambda = {lambda}"), false);
    rep.push("lambda.1 <= 1", lam[0] <= T::one(), format!("lambda.1 = {}", lam[0]), false);
    let bad = lam.iter().skip(1).position(|&l| l > T::zero());
    rep.push(
        "lambda.k <= 0 (k >= 2)",
        bad.is_none(),
        match bad {
            Some(i) => format!("lambda.{} = {}", i + 2, lam[i + 1]),
            None => format!("{} exponents", lam.len()),
        },
        false,
    );
    let (ok, sampled) = is_identity_map(&spec.arg_maps[0], c, d);
    rep.push("psi.1 = id", ok, spec.arg_maps[0].to_string(), sampled);
    for (k, psi) in spec.arg_maps.iter().enumerate().skip(1) {
        let (ok, detail) = monotone_into(psi, c, d, c, d);
        rep.push(format!("psi.{} order-preserving self-map of J", k + 1), ok, detail, true);
    }
    let floor_ok = delta > T::zero() && delta < d;
    if floor_ok {
        let (ok, sampled) = is_identity_map(&spec.factor_maps[0], delta, d);
        rep.push("Xi.1 = id on [delta, d]", ok, spec.factor_maps[0].to_string(), sampled);
        for (k, xi) in spec.factor_maps.iter().enumerate().skip(1) {
            let (ok, detail) = monotone_into(xi, delta, d, delta, d);
            rep.push(format!("Xi.{} order-preserving self-map of [delta, d]", k + 1), ok, detail, true);
        }
    } else {
        rep.push("Xi.k order-preserving on [delta, d]", false, "needs 0 < delta < d", false);
    }
    let (ok, detail) = monotone_into(&spec.rhs, c, d, delta.max(c), d);
    rep.push("G order-preserving self-map of J with G >= delta", ok, detail, true);
    match (spec.rhs.eval(c), spec.rhs.eval(d)) {
        (Ok(gc), Ok(gd)) if lambda > T::zero() => {
            let root = gc.powf(T::one() / lambda);
            rep.push(
                "G(c) >= delta^lambda",
                gc >= delta.powf(lambda),
                format!("G(c)^(1/lambda) = {root} vs delta = {delta}"),
                false,
            );
            rep.push(
                "G(d) <= d^lambda",
                gd <= d.powf(lambda),
                format!("G(d) = {gd} vs d^lambda = {}", d.powf(lambda)),
                false,
            );
        }
        (Ok(_), Ok(_)) => rep.push("G(c) >= delta^lambda", false, "needs lambda > 0", false),
        (Err(e), _) | (_, Err(e)) => rep.push("G defined at the endpoints", false, e.to_string(), false),
    }
    rep
}
