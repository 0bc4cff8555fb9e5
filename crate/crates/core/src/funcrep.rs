//! Grid-sampled self-maps of a compact interval.
//!
//! A [`GridFunction`] stores node values and one of three evaluation rules:
//! piecewise-linear interpolation, right-continuous steps (upper
//! semi-continuous when nondecreasing) or left-continuous steps (lower
//! semi-continuous when nondecreasing). Step modes evaluate exactly, so
//! compositions of step functions on a shared node set are exact as well.

use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{linspace, Scalar};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("interval requires lo < hi, got [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("grid needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("nodes must be strictly increasing and span the domain")]
    BadNodes,
    #[error("{nodes} nodes but {values} values")]
    LengthMismatch { nodes: usize, values: usize },
    #[error("value {value} at node {index} leaves [{lo}, {hi}]")]
    NotSelfMap { index: usize, value: f64, lo: f64, hi: f64 },
    #[error("value {value} at node {index} is below the floor {floor}")]
    BelowFloor { index: usize, value: f64, floor: f64 },
    #[error("point {x} outside domain [{lo}, {hi}]")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },
    #[error("grid functions are sampled on different nodes")]
    NodeMismatch,
    #[error("value {value} lies below the lowest level {lowest}")]
    BelowLowestLevel { value: f64, lowest: f64 },
    #[error("value grid needs strictly increasing levels, at least 2")]
    BadLevels,
    #[error("csv: {0}")]
    Csv(String),
}

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    lo: T,
    hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self, GridError> {
        if lo < hi && lo.is_finite() && hi.is_finite() {
            Ok(Self { lo, hi })
        } else {
            Err(GridError::EmptyInterval { lo: lo.as_f64(), hi: hi.as_f64() })
        }
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Slack allowed when a computed point should lie in the interval but
    /// picked up rounding error (a few ulps at the interval's scale).
    pub fn slack(&self) -> T {
        let scale = self.lo.abs().max(self.hi.abs()).max(T::one());
        T::lit(8.0) * T::epsilon() * scale
    }

    /// Clamps `x` into the interval if it is outside by at most [`Self::slack`].
    pub fn snap(&self, x: T) -> Result<T, GridError> {
        if self.contains(x) {
            return Ok(x);
        }
        let s = self.slack();
        if x < self.lo && self.lo - x <= s {
            Ok(self.lo)
        } else if x > self.hi && x - self.hi <= s {
            Ok(self.hi)
        } else {
            Err(GridError::OutsideDomain { x: x.as_f64(), lo: self.lo.as_f64(), hi: self.hi.as_f64() })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalMode {
    PiecewiseLinear,
    /// `v_i` on `[x_i, x_{i+1})`, `v_m` at `hi`.
    StepUsc,
    /// `v_i` on `(x_{i-1}, x_i]`, `v_0` at `lo`.
    StepLsc,
}

impl EvalMode {
    pub fn is_step(self) -> bool {
        !matches!(self, EvalMode::PiecewiseLinear)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PointwiseOrder {
    Equal,
    LessEq,
    GreaterEq,
    Incomparable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rounding {
    Down,
    Up,
    /// Ties go to the lower level.
    Nearest,
}

/// A function `J -> J` sampled on a node set, with an evaluation rule.
#[derive(Clone, Debug)]
pub struct GridFunction<T> {
    domain: Interval<T>,
    nodes: Arc<[T]>,
    values: Vec<T>,
    mode: EvalMode,
    floor: Option<T>,
}

impl<T: Scalar> PartialEq for GridFunction<T> {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain
            && self.same_nodes(other)
            && self.values == other.values
            && self.mode == other.mode
            && self.floor == other.floor
    }
}

impl<T: Scalar> GridFunction<T> {
    /// `m + 1` uniform nodes on the domain.
    pub fn uniform_nodes(domain: &Interval<T>, m: usize) -> Arc<[T]> {
        linspace(domain.lo, domain.hi, m.max(1)).into()
    }

    pub fn new(
        domain: Interval<T>,
        nodes: Arc<[T]>,
        values: Vec<T>,
        mode: EvalMode,
        floor: Option<T>,
    ) -> Result<Self, GridError> {
        if nodes.len() < 2 {
            return Err(GridError::TooFewNodes(nodes.len()));
        }
        if nodes[0] != domain.lo
            || nodes[nodes.len() - 1] != domain.hi
            || !nodes.windows(2).all(|w| w[0] < w[1])
        {
            return Err(GridError::BadNodes);
        }
        if nodes.len() != values.len() {
            return Err(GridError::LengthMismatch { nodes: nodes.len(), values: values.len() });
        }
        let g = Self { domain, nodes, values, mode, floor };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<(), GridError> {
        for (index, &v) in self.values.iter().enumerate() {
            if !self.domain.contains(v) {
                return Err(GridError::NotSelfMap {
                    index,
                    value: v.as_f64(),
                    lo: self.domain.lo.as_f64(),
                    hi: self.domain.hi.as_f64(),
                });
            }
            if let Some(floor) = self.floor {
                if v < floor {
                    return Err(GridError::BelowFloor { index, value: v.as_f64(), floor: floor.as_f64() });
                }
            }
        }
        Ok(())
    }

    /// Samples `f` on `m + 1` uniform nodes.
    pub fn from_fn(
        domain: Interval<T>,
        m: usize,
        mode: EvalMode,
        f: impl Fn(T) -> T,
    ) -> Result<Self, GridError> {
        let nodes = Self::uniform_nodes(&domain, m);
        let values = nodes.iter().map(|&x| f(x)).collect();
        Self::new(domain, nodes, values, mode, None)
    }

    pub fn identity(domain: Interval<T>, nodes: Arc<[T]>, mode: EvalMode) -> Result<Self, GridError> {
        let values = nodes.to_vec();
        Self::new(domain, nodes, values, mode, None)
    }

    pub fn constant(
        domain: Interval<T>,
        nodes: Arc<[T]>,
        value: T,
        mode: EvalMode,
        floor: Option<T>,
    ) -> Result<Self, GridError> {
        let values = vec![value; nodes.len()];
        Self::new(domain, nodes, values, mode, floor)
    }

    /// Same domain, nodes, mode and floor with new values (re-validated).
    pub fn with_values(&self, values: Vec<T>) -> Result<Self, GridError> {
        Self::new(self.domain, self.nodes.clone(), values, self.mode, self.floor)
    }

    pub fn with_mode(&self, mode: EvalMode) -> Self {
        Self { mode, ..self.clone() }
    }

    pub fn with_floor(&self, floor: Option<T>) -> Result<Self, GridError> {
        Self::new(self.domain, self.nodes.clone(), self.values.clone(), self.mode, floor)
    }

    pub fn domain(&self) -> Interval<T> {
        self.domain
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn shared_nodes(&self) -> Arc<[T]> {
        self.nodes.clone()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn floor(&self) -> Option<T> {
        self.floor
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Nondecreasing node values.
    pub fn is_monotone(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn same_nodes(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.nodes, &other.nodes) || self.nodes[..] == other.nodes[..]
    }

    /// Evaluates at `x` according to the mode. Points outside the domain by
    /// a few ulps are snapped onto it.
    pub fn eval(&self, x: T) -> Result<T, GridError> {
        let x = self.domain.snap(x)?;
        let nodes = &self.nodes;
        let m = nodes.len() - 1;
        Ok(match self.mode {
            EvalMode::StepUsc => {
                // largest i with x_i <= x
                let i = nodes.partition_point(|&n| n <= x).saturating_sub(1);
                self.values[i.min(m)]
            }
            EvalMode::StepLsc => {
                // smallest i with x <= x_i
                let i = nodes.partition_point(|&n| n < x);
                self.values[i.min(m)]
            }
            EvalMode::PiecewiseLinear => {
                let j = nodes.partition_point(|&n| n <= x);
                if j == 0 {
                    return Ok(self.values[0]);
                }
                if j > m {
                    return Ok(self.values[m]);
                }
                let i = j - 1;
                let (x0, x1) = (nodes[i], nodes[i + 1]);
                let (v0, v1) = (self.values[i], self.values[i + 1]);
                if x == x0 {
                    return Ok(v0);
                }
                let t = (x - x0) / (x1 - x0);
                let v = v0 + t * (v1 - v0);
                // Keep the interpolant inside the bracketing values.
                v.max(v0.min(v1)).min(v0.max(v1))
            }
        })
    }

    /// Evaluates the k-th iterate at `x` by repeated evaluation.
    pub fn eval_iterate(&self, x: T, k: usize) -> Result<T, GridError> {
        let mut y = x;
        for _ in 0..k {
            y = self.eval(y)?;
        }
        Ok(y)
    }

    /// `self ∘ inner`, sampled on `inner`'s nodes with `inner`'s mode.
    pub fn compose(&self, inner: &Self) -> Result<Self, GridError> {
        let values = inner.values.iter().map(|&v| self.eval(v)).collect::<Result<Vec<_>, _>>()?;
        Self::new(inner.domain, inner.nodes.clone(), values, inner.mode, self.floor)
    }

    /// `self^k`; `self^0` is the identity on the same nodes.
    pub fn iterate(&self, k: usize) -> Result<Self, GridError> {
        let mut acc = Self::identity(self.domain, self.nodes.clone(), self.mode)?;
        for _ in 0..k {
            acc = self.compose(&acc)?;
        }
        Ok(acc)
    }

    /// Max over nodes of `|self_i - other_i|`.
    pub fn sup_distance(&self, other: &Self) -> Result<T, GridError> {
        if !self.same_nodes(other) {
            return Err(GridError::NodeMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs())))
    }

    /// Node-wise comparison in the pointwise order.
    pub fn pointwise_order(&self, other: &Self) -> Result<PointwiseOrder, GridError> {
        if !self.same_nodes(other) {
            return Err(GridError::NodeMismatch);
        }
        let (mut le, mut ge) = (true, true);
        for (&a, &b) in self.values.iter().zip(&other.values) {
            le &= a <= b;
            ge &= a >= b;
        }
        Ok(match (le, ge) {
            (true, true) => PointwiseOrder::Equal,
            (true, false) => PointwiseOrder::LessEq,
            (false, true) => PointwiseOrder::GreaterEq,
            (false, false) => PointwiseOrder::Incomparable,
        })
    }

    /// `self ⊴ other` on nodes.
    pub fn le(&self, other: &Self) -> Result<bool, GridError> {
        Ok(matches!(self.pointwise_order(other)?, PointwiseOrder::Equal | PointwiseOrder::LessEq))
    }

    /// Snaps every value to a level of `grid`.
    pub fn quantize(&self, grid: &ValueGrid<T>, rounding: Rounding) -> Result<Self, GridError> {
        let values = self
            .values
            .iter()
            .map(|&v| grid.round(v, rounding).map(|i| grid.levels[i]))
            .collect::<Result<Vec<_>, _>>()?;
        self.with_values(values)
    }

    /// Writes `x,g` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GridError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| GridError::Csv(e.to_string());
        w.write_record(["x", "g"]).map_err(err)?;
        for (x, v) in self.nodes.iter().zip(&self.values) {
            w.write_record([format!("{:.16e}", x.as_f64()), format!("{:.16e}", v.as_f64())])
                .map_err(err)?;
        }
        w.flush().map_err(|e| GridError::Csv(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }

    /// Reads an `x,g` table; the domain is taken from the first and last `x`.
    pub fn read_csv<R: Read>(input: R, mode: EvalMode, floor: Option<T>) -> Result<Self, GridError> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers().map_err(|e| GridError::Csv(e.to_string()))?;
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "g" {
            return Err(GridError::Csv("expected header `x,g`".into()));
        }
        let (mut xs, mut vs) = (Vec::new(), Vec::new());
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| GridError::Csv(e.to_string()))?;
            let parse = |s: &str| -> Result<T, GridError> {
                let v: f64 = s.trim().parse().map_err(|_| GridError::Csv(format!("row {}: bad number `{s}`", line + 2)))?;
                T::from_f64(v).ok_or_else(|| GridError::Csv(format!("row {}: {s} not representable", line + 2)))
            };
            if rec.len() != 2 {
                return Err(GridError::Csv(format!("row {}: expected 2 fields", line + 2)));
            }
            xs.push(parse(&rec[0])?);
            vs.push(parse(&rec[1])?);
        }
        if xs.len() < 2 {
            return Err(GridError::TooFewNodes(xs.len()));
        }
        let domain = Interval::new(xs[0], xs[xs.len() - 1])?;
        Self::new(domain, xs.into(), vs, mode, floor)
    }
}

/// Finite set of admissible values `w_0 < w_1 < ... < w_p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValueGrid<T> {
    levels: Vec<T>,
}

impl<T: Scalar> ValueGrid<T> {
    pub fn new(levels: Vec<T>) -> Result<Self, GridError> {
        if levels.len() < 2 || !levels.windows(2).all(|w| w[0] < w[1]) {
            return Err(GridError::BadLevels);
        }
        Ok(Self { levels })
    }

    /// `p + 1` uniform levels spanning `[lo, hi]`.
    pub fn uniform(lo: T, hi: T, p: usize) -> Result<Self, GridError> {
        if !(lo < hi) || p == 0 {
            return Err(GridError::BadLevels);
        }
        Self::new(linspace(lo, hi, p))
    }

    pub fn levels(&self) -> &[T] {
        &self.levels
    }

    /// Number of intervals `p` (there are `p + 1` levels).
    pub fn intervals(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn lowest(&self) -> T {
        self.levels[0]
    }

    pub fn highest(&self) -> T {
        self.levels[self.levels.len() - 1]
    }

    /// Index of the level `v` rounds to. Values above the top level round to it.
    pub fn round(&self, v: T, rounding: Rounding) -> Result<usize, GridError> {
        let top = self.levels.len() - 1;
        // first index with level > v
        let above = self.levels.partition_point(|&w| w <= v);
        if above == 0 {
            return match rounding {
                Rounding::Up | Rounding::Nearest => Ok(0),
                Rounding::Down => Err(GridError::BelowLowestLevel {
                    value: v.as_f64(),
                    lowest: self.levels[0].as_f64(),
                }),
            };
        }
        let below = above - 1;
        if self.levels[below] == v || below == top {
            return Ok(below);
        }
        Ok(match rounding {
            Rounding::Down => below,
            Rounding::Up => above,
            Rounding::Nearest => {
                if v - self.levels[below] <= self.levels[above] - v {
                    below
                } else {
                    above
                }
            }
        })
    }

    pub fn index_of(&self, v: T) -> Option<usize> {
        let i = self.levels.partition_point(|&w| w < v);
        (i < self.levels.len() && self.levels[i] == v).then_some(i)
    }
}
