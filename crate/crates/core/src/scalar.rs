use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type usable by the numerical solvers.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Residual tolerance for the bracketing root finders.
    const SOLVER_TOL: Self;
    /// Largest number of bisection steps before a solver gives up.
    const MAX_BISECTIONS: usize;

    /// Lossless-enough conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal fits every Scalar")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("integer fits every Scalar")
    }
}

impl Scalar for f64 {
    const SOLVER_TOL: Self = 1e-12;
    const MAX_BISECTIONS: usize = 400;
}

impl Scalar for f32 {
    const SOLVER_TOL: Self = 1e-5;
    const MAX_BISECTIONS: usize = 200;
}
