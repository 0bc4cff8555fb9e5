use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used by every numerical routine in the crate.
///
/// Implemented for `f32` and `f64`. Exact arithmetic (rationals) is only
/// needed for the class constants, which take the weaker
/// [`num_traits::Num`] bound instead.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant, panicking only if the type cannot hold it.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Uniform partition `lo + (hi - lo) * i / m`, with the last point pinned to `hi`.
pub fn linspace<T: Scalar>(lo: T, hi: T, m: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(m + 1);
    if m == 0 {
        out.push(lo);
        return out;
    }
    let span = hi - lo;
    let mf = T::from_usize_lossy(m);
    for i in 0..m {
        out.push(lo + span * T::from_usize_lossy(i) / mf);
    }
    out.push(hi);
    out
}

/// Subdivides every cell of a strictly increasing partition into `factor` equal parts.
pub fn refine<T: Scalar>(nodes: &[T], factor: usize) -> Vec<T> {
    let factor = factor.max(1);
    let mut out = Vec::with_capacity(nodes.len().saturating_sub(1) * factor + 1);
    let ff = T::from_usize_lossy(factor);
    for w in nodes.windows(2) {
        let (a, b) = (w[0], w[1]);
        out.push(a);
        for j in 1..factor {
            out.push(a + (b - a) * T::from_usize_lossy(j) / ff);
        }
    }
    if let Some(&last) = nodes.last() {
        out.push(last);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_pins_endpoints() {
        let xs = linspace(0.0f64, 1.0, 10);
        assert_eq!(xs.len(), 11);
        assert_eq!(xs[0], 0.0);
        assert_eq!(xs[10], 1.0);
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn refine_quadruples_cells() {
        let xs = linspace(1.0f32, 2.0, 4);
        let fine = refine(&xs, 4);
        assert_eq!(fine.len(), 17);
        assert_eq!(fine[4], xs[1]);
        assert_eq!(*fine.last().unwrap(), 2.0);
    }
}
