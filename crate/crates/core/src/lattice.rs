//! Finite complete lattices, order-preserving maps, and Kleene iteration.
//!
//! On a finite lattice the ascending chain `⊥ ⪯ T⊥ ⪯ T²⊥ ⪯ …` of a monotone
//! `T` stabilizes after at most `|L|` steps at the least fixed point, and
//! dually from `⊤`. [`kleene`] is generic over the element type so the same
//! loop drives the grid-function solver in [`crate::tarski`].

use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Direction {
    /// From below: each step must satisfy `x ⪯ T(x)`.
    Ascending,
    /// From above: each step must satisfy `T(x) ⪯ x`.
    Descending,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum KleeneError<E, S> {
    #[error("step {iteration} failed: {source}")]
    Step { iteration: usize, source: S },
    /// The map broke the expected chain direction, so it is not monotone.
    #[error("step {iteration} left the {direction:?} chain: the map is not order-preserving")]
    NotMonotone { iteration: usize, direction: Direction, previous: E, next: E },
    #[error("no fixed point after {steps} steps")]
    Exhausted { steps: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct KleeneOutcome<E> {
    pub limit: E,
    /// Applications of the map, including the final one that confirmed the limit.
    pub steps: usize,
}

/// Iterates `step` from `start` until a fixed point, checking that every step
/// moves in `direction` under `leq`.
pub fn kleene<E, S>(
    start: E,
    mut step: impl FnMut(&E) -> Result<E, S>,
    leq: impl Fn(&E, &E) -> bool,
    direction: Direction,
    max_steps: usize,
) -> Result<KleeneOutcome<E>, KleeneError<E, S>>
where
    E: PartialEq,
{
    let mut cur = start;
    for iteration in 1..=max_steps {
        let next = step(&cur).map_err(|source| KleeneError::Step { iteration, source })?;
        if next == cur {
            return Ok(KleeneOutcome { limit: cur, steps: iteration });
        }
        let ordered = match direction {
            Direction::Ascending => leq(&cur, &next),
            Direction::Descending => leq(&next, &cur),
        };
        if !ordered {
            return Err(KleeneError::NotMonotone { iteration, direction, previous: cur, next });
        }
        cur = next;
    }
    Err(KleeneError::Exhausted { steps: max_steps })
}

/// First failure of each axiom, as element indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LatticeReport {
    pub reflexive: Option<usize>,
    pub antisymmetric: Option<(usize, usize)>,
    pub transitive: Option<(usize, usize, usize)>,
    /// A pair without a least upper bound.
    pub join: Option<(usize, usize)>,
    /// A pair without a greatest lower bound.
    pub meet: Option<(usize, usize)>,
    pub has_bottom: bool,
    pub has_top: bool,
}

impl LatticeReport {
    pub fn is_partial_order(&self) -> bool {
        self.reflexive.is_none() && self.antisymmetric.is_none() && self.transitive.is_none()
    }

    pub fn is_lattice(&self) -> bool {
        self.is_partial_order() && self.join.is_none() && self.meet.is_none() && self.has_bottom && self.has_top
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LatticeError {
    #[error("relation is not a finite lattice: {0:?}")]
    NotALattice(Box<LatticeReport>),
    #[error("lattice has no elements")]
    Empty,
    #[error("map has {found} images for {expected} elements")]
    Arity { expected: usize, found: usize },
    #[error("image index {0} out of range")]
    OutOfRange(usize),
    #[error("map is not order-preserving: {0} ⪯ {1} but their images are not ordered")]
    NotOrderPreserving(usize, usize),
}

/// Checks the partial-order axioms and the existence of binary joins and
/// meets for a relation on `0..n`.
pub fn verify_relation(n: usize, leq: &(dyn Fn(usize, usize) -> bool + Sync)) -> LatticeReport {
    let reflexive = (0..n).find(|&i| !leq(i, i));
    let antisymmetric = (0..n)
        .into_par_iter()
        .find_map_first(|a| (0..n).find(|&b| a != b && leq(a, b) && leq(b, a)).map(|b| (a, b)));
    let transitive = (0..n).into_par_iter().find_map_first(|a| {
        (0..n).filter(|&b| leq(a, b)).find_map(|b| (0..n).find(|&c| leq(b, c) && !leq(a, c)).map(|c| (a, b, c)))
    });
    let has_bottom = (0..n).any(|b| (0..n).all(|x| leq(b, x)));
    let has_top = (0..n).any(|t| (0..n).all(|x| leq(x, t)));
    let (join, meet) = if reflexive.is_none() && antisymmetric.is_none() && transitive.is_none() {
        let missing = |upward: bool| {
            (0..n).into_par_iter().find_map_first(|a| {
                (a..n).find(|&b| bound(n, leq, a, b, upward).is_none()).map(|b| (a, b))
            })
        };
        (missing(true), missing(false))
    } else {
        (None, None)
    };
    LatticeReport { reflexive, antisymmetric, transitive, join, meet, has_bottom, has_top }
}

/// Least upper bound (`upward`) or greatest lower bound of `{a, b}`.
fn bound(n: usize, leq: &(dyn Fn(usize, usize) -> bool + Sync), a: usize, b: usize, upward: bool) -> Option<usize> {
    let rel = |x: usize, y: usize| if upward { leq(x, y) } else { leq(y, x) };
    let candidates: Vec<usize> = (0..n).filter(|&z| rel(a, z) && rel(b, z)).collect();
    candidates.iter().copied().find(|&z| candidates.iter().all(|&w| rel(z, w)))
}

/// A finite lattice with tabulated order, joins and meets.
#[derive(Clone, Debug)]
pub struct FiniteLattice<E> {
    elements: Vec<E>,
    leq: Vec<bool>,
    join: Vec<usize>,
    meet: Vec<usize>,
    bottom: usize,
    top: usize,
}

impl<E> FiniteLattice<E> {
    /// Tabulates `leq` on `elements` and verifies the lattice axioms.
    pub fn new(elements: Vec<E>, leq: impl Fn(&E, &E) -> bool + Sync) -> Result<Self, LatticeError>
    where
        E: Sync,
    {
        let n = elements.len();
        if n == 0 {
            return Err(LatticeError::Empty);
        }
        let table: Vec<bool> = (0..n * n)
            .into_par_iter()
            .map(|ij| leq(&elements[ij / n], &elements[ij % n]))
            .collect();
        let rel = |i: usize, j: usize| table[i * n + j];
        let report = verify_relation(n, &rel);
        if !report.is_lattice() {
            return Err(LatticeError::NotALattice(Box::new(report)));
        }
        let pairs: Vec<(usize, usize)> = (0..n * n)
            .into_par_iter()
            .map(|ij| {
                let (a, b) = (ij / n, ij % n);
                (
                    bound(n, &rel, a, b, true).expect("verified"),
                    bound(n, &rel, a, b, false).expect("verified"),
                )
            })
            .collect();
        let (join, meet) = pairs.into_iter().unzip();
        let bottom = (0..n).find(|&b| (0..n).all(|x| rel(b, x))).expect("verified");
        let top = (0..n).find(|&t| (0..n).all(|x| rel(x, t))).expect("verified");
        Ok(Self { elements, leq: table, join, meet, bottom, top })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[E] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &E {
        &self.elements[i]
    }

    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.leq[a * self.len() + b]
    }

    pub fn join(&self, a: usize, b: usize) -> usize {
        self.join[a * self.len() + b]
    }

    pub fn meet(&self, a: usize, b: usize) -> usize {
        self.meet[a * self.len() + b]
    }

    pub fn bottom(&self) -> usize {
        self.bottom
    }

    pub fn top(&self) -> usize {
        self.top
    }

    pub fn index_of(&self, e: &E) -> Option<usize>
    where
        E: PartialEq,
    {
        self.elements.iter().position(|x| x == e)
    }

    /// Re-verifies the stored order plus the absorption laws.
    pub fn verify(&self) -> LatticeReport {
        let n = self.len();
        let table = &self.leq;
        let rel = |i: usize, j: usize| table[i * n + j];
        let mut report = verify_relation(n, &rel);
        if report.join.is_none() {
            report.join = (0..n)
                .flat_map(|a| (0..n).map(move |b| (a, b)))
                .find(|&(a, b)| self.join(a, self.meet(a, b)) != a || self.meet(a, self.join(a, b)) != a);
        }
        report
    }

    /// `inf` of a set; the empty set has infimum `⊤`.
    pub fn inf(&self, set: &[usize]) -> usize {
        set.iter().fold(self.top, |acc, &x| self.meet(acc, x))
    }

    /// `sup` of a set; the empty set has supremum `⊥`.
    pub fn sup(&self, set: &[usize]) -> usize {
        set.iter().fold(self.bottom, |acc, &x| self.join(acc, x))
    }
}

impl FiniteLattice<Vec<u8>> {
    /// Nondecreasing vectors of length `len` over `0..levels`, ordered
    /// pointwise. This is the discretized lattice of monotone step functions.
    pub fn monotone_vectors(len: usize, levels: u8) -> Result<Self, LatticeError> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(len);
        fn rec(len: usize, levels: u8, lo: u8, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
            if cur.len() == len {
                out.push(cur.clone());
                return;
            }
            for v in lo..levels {
                cur.push(v);
                rec(len, levels, v, cur, out);
                cur.pop();
            }
        }
        rec(len, levels, 0, &mut cur, &mut out);
        Self::new(out, |a, b| a.iter().zip(b).all(|(x, y)| x <= y))
    }
}

/// A self-map given by its table of images.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonotoneMap {
    image: Vec<usize>,
    verified_monotone: bool,
}

impl MonotoneMap {
    /// Accepts the table after an exhaustive pair scan.
    pub fn verified<E>(lattice: &FiniteLattice<E>, image: Vec<usize>) -> Result<Self, LatticeError> {
        let map = Self::unchecked(lattice, image)?;
        if let Some((a, b)) = order_violation(lattice, &map.image) {
            return Err(LatticeError::NotOrderPreserving(a, b));
        }
        Ok(Self { verified_monotone: true, ..map })
    }

    /// Accepts the table without checking monotonicity; Kleene iteration
    /// still detects violations along its chain.
    pub fn unchecked<E>(lattice: &FiniteLattice<E>, image: Vec<usize>) -> Result<Self, LatticeError> {
        if image.len() != lattice.len() {
            return Err(LatticeError::Arity { expected: lattice.len(), found: image.len() });
        }
        if let Some(&bad) = image.iter().find(|&&i| i >= lattice.len()) {
            return Err(LatticeError::OutOfRange(bad));
        }
        Ok(Self { image, verified_monotone: false })
    }

    pub fn identity<E>(lattice: &FiniteLattice<E>) -> Self {
        Self { image: (0..lattice.len()).collect(), verified_monotone: true }
    }

    pub fn constant<E>(lattice: &FiniteLattice<E>, c: usize) -> Self {
        Self { image: vec![c; lattice.len()], verified_monotone: true }
    }

    pub fn apply(&self, x: usize) -> usize {
        self.image[x]
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn is_verified_monotone(&self) -> bool {
        self.verified_monotone
    }
}

fn order_violation<E>(lattice: &FiniteLattice<E>, image: &[usize]) -> Option<(usize, usize)> {
    let n = lattice.len();
    let table = &lattice.leq[..];
    let leq = |a: usize, b: usize| table[a * n + b];
    (0..n).into_par_iter().find_map_first(|a| (0..n).find(|&b| leq(a, b) && !leq(image[a], image[b])).map(|b| (a, b)))
}

/// `None` if order-preserving, otherwise a pair `a ⪯ b` with `T(a) ⋠ T(b)`.
pub fn is_order_preserving<E>(lattice: &FiniteLattice<E>, map: &MonotoneMap) -> Option<(usize, usize)> {
    order_violation(lattice, &map.image)
}

pub type LatticeKleeneError = KleeneError<usize, std::convert::Infallible>;

/// Least fixed point by ascending Kleene iteration from `⊥`.
pub fn knaster_tarski_min<E>(lattice: &FiniteLattice<E>, map: &MonotoneMap) -> Result<usize, LatticeKleeneError> {
    kleene(
        lattice.bottom(),
        |&x| Ok(map.apply(x)),
        |&a, &b| lattice.leq(a, b),
        Direction::Ascending,
        lattice.len() + 1,
    )
    .map(|o| o.limit)
}

/// Greatest fixed point by descending Kleene iteration from `⊤`.
pub fn knaster_tarski_max<E>(lattice: &FiniteLattice<E>, map: &MonotoneMap) -> Result<usize, LatticeKleeneError> {
    kleene(
        lattice.top(),
        |&x| Ok(map.apply(x)),
        |&a, &b| lattice.leq(a, b),
        Direction::Descending,
        lattice.len() + 1,
    )
    .map(|o| o.limit)
}

pub fn fixed_point_set<E>(lattice: &FiniteLattice<E>, map: &MonotoneMap) -> Vec<usize> {
    (0..lattice.len()).filter(|&x| map.apply(x) == x).collect()
}

/// `inf {x : T(x) ⪯ x}`.
pub fn inf_of_prefixed<E>(lattice: &FiniteLattice<E>, map: &MonotoneMap) -> usize {
    let pre: Vec<usize> = (0..lattice.len()).filter(|&x| lattice.leq(map.apply(x), x)).collect();
    lattice.inf(&pre)
}

/// `sup {x : x ⪯ T(x)}`.
pub fn sup_of_postfixed<E>(lattice: &FiniteLattice<E>, map: &MonotoneMap) -> usize {
    let post: Vec<usize> = (0..lattice.len()).filter(|&x| lattice.leq(x, map.apply(x))).collect();
    lattice.sup(&post)
}

/// Every non-empty subset of `set` has its supremum and infimum, taken in
/// the whole lattice, inside `set`. On a finite lattice this reduces to
/// closure under binary joins and meets.
pub fn is_complete_sublattice<E>(lattice: &FiniteLattice<E>, set: &[usize]) -> Option<(usize, usize)> {
    let mut member = vec![false; lattice.len()];
    for &x in set {
        member[x] = true;
    }
    set.iter().find_map(|&a| {
        set.iter()
            .find(|&&b| !member[lattice.join(a, b)] || !member[lattice.meet(a, b)])
            .map(|&b| (a, b))
    })
}

/// Every non-empty subset of `set` has a least upper bound and a greatest
/// lower bound within `set` under the induced order. Returns a pair without
/// one on failure.
pub fn is_complete_lattice_in_induced_order<E>(lattice: &FiniteLattice<E>, set: &[usize]) -> Option<(usize, usize)> {
    if set.is_empty() {
        return None;
    }
    let has_bound = |a: usize, b: usize, upward: bool| {
        let rel = |x: usize, y: usize| if upward { lattice.leq(x, y) } else { lattice.leq(y, x) };
        let cands: Vec<usize> = set.iter().copied().filter(|&z| rel(a, z) && rel(b, z)).collect();
        cands.iter().any(|&z| cands.iter().all(|&w| rel(z, w)))
    };
    let bottom_ok = set.iter().any(|&b| set.iter().all(|&x| lattice.leq(b, x)));
    let top_ok = set.iter().any(|&t| set.iter().all(|&x| lattice.leq(x, t)));
    if !(bottom_ok && top_ok) {
        return Some((set[0], set[0]));
    }
    set.iter().find_map(|&a| {
        set.iter().find(|&&b| !has_bound(a, b, true) || !has_bound(a, b, false)).map(|&b| (a, b))
    })
}

/// The four-element lattice `x₁ ⪯ x₂ ⪯ x₄`, `x₁ ⪯ x₃ ⪯ x₄` with the
/// order-reversing map swapping `x₁ ↔ x₄` and `x₂ ↔ x₃`. It has no fixed
/// points, so Knaster–Tarski fails without monotonicity.
pub fn order_reversing_counterexample() -> (FiniteLattice<&'static str>, MonotoneMap) {
    let elements = vec!["x1", "x2", "x3", "x4"];
    let lattice = FiniteLattice::new(elements, |a, b| a == b || *a == "x1" || *b == "x4").expect("diamond");
    let map = MonotoneMap::unchecked(&lattice, vec![3, 2, 1, 0]).expect("four images");
    (lattice, map)
}
