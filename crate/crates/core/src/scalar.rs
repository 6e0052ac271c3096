use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Numeric element type of an associative array.
///
/// The algebra only needs `+`, `-`, `*`, a total-enough order for min/max and
/// thresholds, and a canonical text form that round-trips through `FromStr`.
/// Implemented for `f32` and `f64`.
pub trait Scalar:
    Num + Copy + PartialOrd + Debug + Display + FromStr + ToPrimitive + FromPrimitive + Send + Sync + 'static
{
    /// Whether the value may be stored (no NaN or infinities).
    fn is_storable(self) -> bool;

    /// Text form that parses back to the identical value.
    fn to_canonical(self) -> String {
        format!("{}", self)
    }
}

macro_rules! impl_float_scalar {
    ($($t:ty),*) => {$(
        impl Scalar for $t {
            #[inline]
            fn is_storable(self) -> bool {
                self.is_finite()
            }
        }
    )*};
}

impl_float_scalar!(f32, f64);

#[inline]
pub(crate) fn min<T: Scalar>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

#[inline]
pub(crate) fn max<T: Scalar>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        for x in [0.1f64, 47.0, -3.25, 1e300, 5e-324, 123456789.0123] {
            let s = x.to_canonical();
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        for x in [0.1f32, 47.0, 1e-40] {
            assert_eq!(x.to_canonical().parse::<f32>().unwrap(), x);
        }
        assert_eq!(47.0f64.to_canonical(), "47");
    }

    #[test]
    fn non_finite_is_rejected() {
        assert!(!f64::NAN.is_storable());
        assert!(!f64::INFINITY.is_storable());
        assert!(f64::MAX.is_storable());
    }
}
