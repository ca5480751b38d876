//! Scalar abstraction: every numeric kernel in this crate is generic over a
//! floating-point type implementing [`Real`]. The crate root exports `f64`
//! aliases for the common case.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Sum
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`. Random draws and pinned constants are
    /// produced in `f64` and narrowed here, so the draw sequence does not
    /// depend on the scalar type.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Real")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Compensated (Neumaier) summation. Keeps long reductions accurate enough
/// that axiom-level identities hold to well below 1e-9.
pub fn stable_sum<F: Real>(values: impl IntoIterator<Item = F>) -> F {
    let mut sum = F::zero();
    let mut comp = F::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp = comp + ((sum - t) + v);
        } else {
            comp = comp + ((v - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

pub fn stable_mean<F: Real>(values: &[F]) -> F {
    if values.is_empty() {
        return F::zero();
    }
    stable_sum(values.iter().copied()) / F::of(values.len() as f64)
}
