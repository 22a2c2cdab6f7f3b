//! Scalar abstraction shared by the solver and the network model.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type the planner can run on: `f32` or `f64`.
///
/// Tolerances live on the trait because they depend on the precision of the
/// underlying type; `f32` gets looser values than `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Primal feasibility tolerance, applied as `tol * (1 + |bound|)`.
    fn primal_tol() -> Self;
    /// Reduced-cost tolerance, scaled by the largest objective coefficient.
    fn dual_tol() -> Self;
    /// Smallest tableau entry accepted as a pivot.
    fn pivot_tol() -> Self;
    /// Distance from 0/1 below which a binary counts as integral.
    fn integrality_tol() -> Self;

    /// Lossless-enough conversion of a literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn primal_tol() -> Self {
        1e-7
    }
    fn dual_tol() -> Self {
        1e-9
    }
    fn pivot_tol() -> Self {
        1e-9
    }
    fn integrality_tol() -> Self {
        1e-6
    }
}

impl Real for f32 {
    fn primal_tol() -> Self {
        1e-4
    }
    fn dual_tol() -> Self {
        1e-5
    }
    fn pivot_tol() -> Self {
        1e-5
    }
    fn integrality_tol() -> Self {
        1e-4
    }
}
