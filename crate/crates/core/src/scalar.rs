use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable for activations, importances and scores.
pub trait Scalar:
    Float + FromPrimitive + Debug + Display + Default + Serialize + DeserializeOwned + Send + Sync + 'static
{
    fn from_ratio(num: usize, den: usize) -> Self {
        Self::from_usize(num).unwrap_or_else(Self::zero) / Self::from_usize(den).unwrap_or_else(Self::one)
    }

    fn unit_interval_contains(self) -> bool {
        self >= Self::zero() && self <= Self::one()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
