//! Scalar abstraction: all numerics are generic over a floating-point type.
//!
//! `f64` is the type used by the CLI and the experiment harness; `f32` is
//! supported for the deterministic linear-algebra and distribution kernels.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// Floating-point scalar usable throughout the crate.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum<Self>
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Shorthand for embedding an `f64` constant.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("constant not representable")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// One standard normal draw.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One central chi-square draw with `df` degrees of freedom.
    fn chi_square<R: Rng + ?Sized>(df: Self, rng: &mut R) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn chi_square<R: Rng + ?Sized>(df: Self, rng: &mut R) -> Self {
        ChiSquared::new(df).expect("df > 0").sample(rng)
    }
}

impl Scalar for f32 {
    #[inline]
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn chi_square<R: Rng + ?Sized>(df: Self, rng: &mut R) -> Self {
        ChiSquared::new(df).expect("df > 0").sample(rng)
    }
}
