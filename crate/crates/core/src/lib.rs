//! Solvers for iterative functional equations of product form
//!
//! ```text
//!     prod_{k=1..n} Xi_k( g^k( psi_k(x) ) )^{lambda_k} = G(x),   x in J = [c, d]
//! ```
//!
//! where `g^k` is the k-th iterate of the unknown self-map `g`. Two routes are
//! provided:
//!
//! * [`banach`]: continuous solutions on `J ⊂ (0, ∞)`. The equation is moved to
//!   sum form by logarithmic conjugacy ([`conjugacy`]) and solved by Picard
//!   iteration in a class of bi-Lipschitz maps ([`classes`]).
//! * [`tarski`]: minimum and maximum order-preserving (and semi-continuous)
//!   solutions, computed by Kleene iteration of a monotone operator on a finite
//!   lattice of monotone step functions ([`lattice`], [`funcrep`]).
//!
//! Everything numerical is generic over [`Scalar`] (`f32`/`f64`); the aliases
//! at the crate root fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banach;
pub mod classes;
pub mod conjugacy;
pub mod equation;
pub mod expr;
pub mod funcrep;
pub mod lattice;
mod scalar;
pub mod tarski;

pub use equation::{ProductEquationSpec, SumEquationSpec};
pub use expr::Expr;
pub use funcrep::{EvalMode, GridFunction, Interval, PointwiseOrder, Rounding, ValueGrid};
pub use scalar::{linspace, refine, Scalar};

/// `f64` grid function, the type used by the command-line front end.
pub type Grid = GridFunction<f64>;
pub type Interval64 = Interval<f64>;
pub type ValueGrid64 = ValueGrid<f64>;
pub type ProductSpec = ProductEquationSpec<f64>;
pub type SumSpec = SumEquationSpec<f64>;
pub type BanachConfig64 = banach::BanachConfig<f64>;
pub type TarskiConfig64 = tarski::TarskiConfig<f64>;
pub type TarskiResult64 = tarski::TarskiResult<f64>;
pub type ClassParams64 = classes::ClassParams<f64>;
pub type DerivedConstants64 = classes::DerivedConstants<f64>;

/// Crate-level error, wrapping the per-module errors.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] expr::ParseError),
    #[error(transparent)]
    Eval(#[from] expr::EvalError),
    #[error(transparent)]
    Grid(#[from] funcrep::GridError),
    #[error(transparent)]
    Equation(#[from] equation::EquationError),
    #[error(transparent)]
    Class(#[from] classes::ClassError),
    #[error(transparent)]
    Conjugacy(#[from] conjugacy::ConjugacyError),
    #[error(transparent)]
    Banach(#[from] banach::BanachError),
    #[error(transparent)]
    Tarski(#[from] tarski::TarskiError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
