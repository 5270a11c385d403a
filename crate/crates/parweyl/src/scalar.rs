//! Scalar abstraction: the whole geometric core is generic over `Real`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar for all geometric computations: f32 or f64.
pub trait Real:
    num_traits::Float + num_traits::FromPrimitive + Debug + Display + Sum + 'static
{
    /// Lossy conversion from an f64 literal (tolerances, rational constants).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal must convert into the scalar type")
    }

    /// Conversion from a small integer count (dimensions, multiplicities).
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize must convert into the scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
