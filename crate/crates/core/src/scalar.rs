//! Exact scalar types used for objective values, edge weights and flows.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Num, Signed, ToPrimitive, Zero};

/// An exact, totally ordered, signed number.
///
/// Everything on the solve path (objective values, linearized weights,
/// rotation deltas, flow capacities) is generic over this trait. Only exact
/// types implement it: the min-cut step and the weight identities compare
/// values for equality, which binary floating point cannot honour.
pub trait Scalar:
    Num + Signed + Clone + Ord + Debug + Display + Send + Sync + 'static
{
    fn from_i64(v: i64) -> Self;

    /// Lossless conversion to an arbitrary-precision rational.
    fn to_rational(&self) -> BigRational;

    /// Exact conversion from a rational; `None` when not representable.
    fn from_rational(r: &BigRational) -> Option<Self>;
}

impl Scalar for i64 {
    fn from_i64(v: i64) -> Self {
        v
    }

    fn to_rational(&self) -> BigRational {
        BigRational::from_integer(BigInt::from(*self))
    }

    fn from_rational(r: &BigRational) -> Option<Self> {
        if r.is_integer() {
            r.to_integer().to_i64()
        } else {
            None
        }
    }
}

impl Scalar for BigInt {
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }

    fn to_rational(&self) -> BigRational {
        BigRational::from_integer(self.clone())
    }

    fn from_rational(r: &BigRational) -> Option<Self> {
        r.is_integer().then(|| r.to_integer())
    }
}

impl Scalar for Rational64 {
    fn from_i64(v: i64) -> Self {
        Rational64::from_integer(v)
    }

    fn to_rational(&self) -> BigRational {
        BigRational::new(BigInt::from(*self.numer()), BigInt::from(*self.denom()))
    }

    fn from_rational(r: &BigRational) -> Option<Self> {
        Some(Rational64::new(r.numer().to_i64()?, r.denom().to_i64()?))
    }
}

impl Scalar for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn to_rational(&self) -> BigRational {
        self.clone()
    }

    fn from_rational(r: &BigRational) -> Option<Self> {
        Some(r.clone())
    }
}

/// Converts a count to a scalar.
pub fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_i64(n as i64)
}

/// `max(0, x)`
pub fn positive_part<T: Scalar>(x: T) -> T {
    if x.is_negative() {
        T::zero()
    } else {
        x
    }
}

/// Least common multiple of the denominators of `values` (1 for an empty
/// slice or all-integer input).
pub fn denominator_lcm<'a, T: Scalar>(values: impl IntoIterator<Item = &'a T>) -> BigInt {
    use num_integer::Integer;
    let mut acc = BigInt::from(1);
    for v in values {
        let r = v.to_rational();
        acc = acc.lcm(r.denom());
    }
    if acc.is_zero() {
        BigInt::from(1)
    } else {
        acc
    }
}
