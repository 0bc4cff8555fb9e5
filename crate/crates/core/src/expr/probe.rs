use serde::Serialize;

use super::{EvalError, Expr};
use crate::{linspace, Scalar};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ProbeError {
    #[error("probe interval must satisfy lo < hi")]
    EmptyInterval,
    #[error("probe needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("evaluation failed at x = {x}: {source}")]
    Domain { x: f64, source: EvalError },
}

/// Sampled evidence about an expression on an interval. Never a proof.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport<T> {
    pub lo: T,
    pub hi: T,
    pub samples: usize,
    pub min: T,
    pub max: T,
    pub argmin: T,
    pub argmax: T,
    /// `v_{i+1} >= v_i` over consecutive successful samples.
    pub monotone: bool,
    /// `v_{i+1} > v_i` over consecutive successful samples.
    pub strictly_increasing: bool,
    #[serde(skip)]
    pub domain_errors: Vec<(T, EvalError)>,
}

impl<T: Scalar> ProbeReport<T> {
    /// Fails with the first offending sample if any evaluation failed.
    pub fn ensure_total(&self) -> Result<&Self, ProbeError> {
        match self.domain_errors.first() {
            Some((x, e)) => Err(ProbeError::Domain { x: x.as_f64(), source: *e }),
            None => Ok(self),
        }
    }
}

/// Evaluates `e` on `samples` equispaced points of `[lo, hi]`.
pub fn probe<T: Scalar>(e: &Expr, lo: T, hi: T, samples: usize) -> Result<ProbeReport<T>, ProbeError> {
    if !(lo < hi) {
        return Err(ProbeError::EmptyInterval);
    }
    if samples < 2 {
        return Err(ProbeError::TooFewSamples(samples));
    }
    let xs = linspace(lo, hi, samples - 1);
    let mut domain_errors = Vec::new();
    let mut ok: Vec<(T, T)> = Vec::with_capacity(xs.len());
    for &x in &xs {
        match e.eval(x) {
            Ok(v) => ok.push((x, v)),
            Err(err) => domain_errors.push((x, err)),
        }
    }
    let Some(&(x0, v0)) = ok.first() else {
        let (x, source) = domain_errors[0];
        return Err(ProbeError::Domain { x: x.as_f64(), source });
    };
    let (mut min, mut max, mut argmin, mut argmax) = (v0, v0, x0, x0);
    for &(x, v) in &ok[1..] {
        if v < min {
            min = v;
            argmin = x;
        }
        if v > max {
            max = v;
            argmax = x;
        }
    }
    let monotone = ok.windows(2).all(|w| w[1].1 >= w[0].1);
    let strictly_increasing = ok.windows(2).all(|w| w[1].1 > w[0].1);
    Ok(ProbeReport { lo, hi, samples, min, max, argmin, argmax, monotone, strictly_increasing, domain_errors })
}

/// Which side a located jump point belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum JumpSide {
    /// Value at the jump equals the right limit (right-continuous, USC when nondecreasing).
    Right,
    /// Value at the jump equals the left limit (left-continuous, LSC when nondecreasing).
    Left,
    /// Jump point not identifiable at sampling resolution.
    Undetermined,
}

#[derive(Clone, Debug, Serialize)]
pub struct Jump<T> {
    /// Adjacent (or nearly adjacent) floats bracketing the discontinuity.
    pub left: T,
    pub right: T,
    pub lower: T,
    pub upper: T,
    pub side: JumpSide,
}

/// Locates jump discontinuities of a sampled nondecreasing expression.
///
/// Candidate cells are those whose increment exceeds 20× the median increment;
/// each is bisected down to adjacent floats. A cell is reported only if the
/// value gap survives the bisection. The side is decided by identifying the
/// jump point with the 12-significant-digit rounding of the bracket, which
/// resolves jumps placed at short decimals (e.g. `if(x < 0.5, ..)`).
pub fn probe_jumps<T: Scalar>(e: &Expr, lo: T, hi: T, samples: usize) -> Result<Vec<Jump<T>>, ProbeError> {
    let report = probe(e, lo, hi, samples)?;
    report.ensure_total()?;
    let xs = linspace(lo, hi, samples - 1);
    let vals: Vec<T> = xs.iter().map(|&x| e.eval(x).expect("checked total")).collect();
    let mut incs: Vec<T> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let mut sorted = incs.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let median = sorted[sorted.len() / 2];
    let scale = (report.max - report.min).abs().max(T::one());
    let gap_floor = T::lit(1e-9) * scale;
    let mut jumps = Vec::new();
    for (i, inc) in incs.drain(..).enumerate() {
        if inc <= T::lit(20.0) * median || inc <= gap_floor {
            continue;
        }
        let (mut l, mut r) = (xs[i], xs[i + 1]);
        let (mut fl, mut fr) = (vals[i], vals[i + 1]);
        for _ in 0..2200 {
            let mid = l + (r - l) / T::lit(2.0);
            if !(mid > l && mid < r) {
                break;
            }
            let fm = e.eval(mid).map_err(|source| ProbeError::Domain { x: mid.as_f64(), source })?;
            if (fm - fl).abs() >= (fr - fm).abs() {
                r = mid;
                fr = fm;
            } else {
                l = mid;
                fl = fm;
            }
        }
        if (fr - fl).abs() <= gap_floor {
            continue;
        }
        let side = match format!("{:.11e}", r.as_f64()).parse::<f64>() {
            Ok(p) if p == r.as_f64() => JumpSide::Right,
            Ok(p) if p == l.as_f64() => JumpSide::Left,
            _ => JumpSide::Undetermined,
        };
        jumps.push(Jump { left: l, right: r, lower: fl, upper: fr, side });
    }
    Ok(jumps)
}
