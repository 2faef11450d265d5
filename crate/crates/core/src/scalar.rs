//! Scalar abstraction: the whole simulator is generic over the floating
//! point type. `f64` is what the CLI and the shipped configs use; `f32`
//! works for quick, low-precision experiments.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

/// Floating point scalar usable throughout the simulator.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Convert an `f64` literal/config value, panicking on overflow.
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("literal not representable")
    }

    /// Lossy view as `f64`, used for reporting and export.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }

    /// One standard normal draw.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One uniform draw on `[0, 1)`.
    fn standard_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f64 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
    fn standard_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random()
    }
}

impl Scalar for f32 {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
    fn standard_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random()
    }
}
