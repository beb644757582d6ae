//! Scalar fields used throughout the crate.
//!
//! Every algebraic routine is generic over [`Scalar`], so the same forward maps
//! run in double precision (estimators), over exact rationals and a prime field
//! (rank computations), and over first-order dual numbers (Jacobians).

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// A field element.
pub trait Scalar:
    Clone
    + PartialEq
    + fmt::Debug
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// `true` when arithmetic has no rounding (rationals, prime fields).
    const EXACT: bool;

    fn from_i64(v: i64) -> Self;

    /// Absolute value as a float; only used to choose pivots and to report
    /// magnitudes. Exact fields without an order return 0 or 1.
    fn magnitude(&self) -> f64;

    /// Exactly zero for exact fields; below `1e-12` in absolute value for floats.
    fn is_negligible(&self) -> bool {
        if Self::EXACT {
            self.is_zero()
        } else {
            self.magnitude() < 1e-12
        }
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }

    fn powi(&self, exp: u32) -> Self {
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            e >>= 1;
        }
        acc
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn magnitude(&self) -> f64 {
        self.abs().to_f64().unwrap_or(f64::INFINITY)
    }
}

/// Converts an exact rational to the nearest double.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Builds `num/den` as an exact rational.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Integer modulo the Mersenne prime `2^61 - 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Fp(u64);

impl Fp {
    pub const MODULUS: u64 = (1 << 61) - 1;

    pub fn new(v: u64) -> Self {
        Fp(v % Self::MODULUS)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    fn reduce(x: u128) -> u64 {
        let p = Self::MODULUS as u128;
        let folded = (x & p) + (x >> 61);
        let folded = (folded & p) + (folded >> 61);
        let r = folded as u64;
        if r >= Self::MODULUS {
            r - Self::MODULUS
        } else {
            r
        }
    }

    pub fn pow(self, mut e: u64) -> Self {
        let mut acc = Fp(1);
        let mut base = self;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inverse(self) -> Option<Self> {
        if self.0 == 0 {
            None
        } else {
            Some(self.pow(Self::MODULUS - 2))
        }
    }
}

impl fmt::Debug for Fp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fp({})", self.0)
    }
}

impl Add for Fp {
    type Output = Fp;
    fn add(self, rhs: Fp) -> Fp {
        let s = self.0 + rhs.0;
        Fp(if s >= Self::MODULUS { s - Self::MODULUS } else { s })
    }
}

impl Sub for Fp {
    type Output = Fp;
    fn sub(self, rhs: Fp) -> Fp {
        if self.0 >= rhs.0 {
            Fp(self.0 - rhs.0)
        } else {
            Fp(self.0 + Self::MODULUS - rhs.0)
        }
    }
}

impl Mul for Fp {
    type Output = Fp;
    fn mul(self, rhs: Fp) -> Fp {
        Fp(Self::reduce(self.0 as u128 * rhs.0 as u128))
    }
}

impl Div for Fp {
    type Output = Fp;
    fn div(self, rhs: Fp) -> Fp {
        self * rhs.inverse().expect("division by zero in Fp")
    }
}

impl Neg for Fp {
    type Output = Fp;
    fn neg(self) -> Fp {
        if self.0 == 0 {
            self
        } else {
            Fp(Self::MODULUS - self.0)
        }
    }
}

impl Zero for Fp {
    fn zero() -> Self {
        Fp(0)
    }
    fn is_zero(&self) -> bool {
        self.0 == 0
    }
}

impl One for Fp {
    fn one() -> Self {
        Fp(1)
    }
}

impl Scalar for Fp {
    const EXACT: bool = true;

    fn from_i64(v: i64) -> Self {
        let r = v.rem_euclid(Self::MODULUS as i64);
        Fp(r as u64)
    }

    fn magnitude(&self) -> f64 {
        if self.0 == 0 {
            0.0
        } else {
            1.0
        }
    }
}

/// First-order dual number `value + tangent·ε` with `ε² = 0`.
///
/// Evaluating a polynomial map on duals seeded with a unit tangent yields the
/// directional derivative in the tangent part.
#[derive(Clone, PartialEq, Debug)]
pub struct Dual<S> {
    pub value: S,
    pub tangent: S,
}

impl<S: Scalar> Dual<S> {
    pub fn constant(value: S) -> Self {
        Dual { value, tangent: S::zero() }
    }

    pub fn variable(value: S) -> Self {
        Dual { value, tangent: S::one() }
    }
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Dual { value: self.value + rhs.value, tangent: self.tangent + rhs.tangent }
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Dual { value: self.value - rhs.value, tangent: self.tangent - rhs.tangent }
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let tangent = self.value.clone() * rhs.tangent + self.tangent * rhs.value.clone();
        Dual { value: self.value * rhs.value, tangent }
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let denom = rhs.value.clone() * rhs.value.clone();
        let tangent =
            (self.tangent * rhs.value.clone() - self.value.clone() * rhs.tangent) / denom;
        Dual { value: self.value / rhs.value, tangent }
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual { value: -self.value, tangent: -self.tangent }
    }
}

impl<S: Scalar> Zero for Dual<S> {
    fn zero() -> Self {
        Dual::constant(S::zero())
    }
    fn is_zero(&self) -> bool {
        self.value.is_zero() && self.tangent.is_zero()
    }
}

impl<S: Scalar> One for Dual<S> {
    fn one() -> Self {
        Dual::constant(S::one())
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    const EXACT: bool = S::EXACT;

    fn from_i64(v: i64) -> Self {
        Dual::constant(S::from_i64(v))
    }

    fn magnitude(&self) -> f64 {
        self.value.magnitude()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fp_inverse_round_trip() {
        let x = Fp::from_i64(-12345);
        assert_eq!(x * x.inverse().unwrap(), Fp::one());
        assert_eq!(Fp::from_i64(-1) + Fp::one(), Fp::zero());
        assert!(Fp::zero().inverse().is_none());
    }

    #[test]
    fn dual_derivative_of_cube() {
        let x = Dual::variable(3.0);
        let y = x.clone() * x.clone() * x;
        assert_eq!(y.value, 27.0);
        assert_eq!(y.tangent, 27.0);
    }

    #[test]
    fn dual_quotient_rule() {
        // d/dx (1 / x) at x = 2 is -1/4
        let x = Dual::variable(ratio(2, 1));
        let y = Dual::constant(ratio(1, 1)) / x;
        assert_eq!(y.tangent, ratio(-1, 4));
    }

    proptest! {
        #[test]
        fn fp_matches_i128_arithmetic(a in -1_000_000_000i64..1_000_000_000, b in -1_000_000_000i64..1_000_000_000) {
            let p = Fp::MODULUS as i128;
            let prod = ((a as i128 * b as i128) % p + p) % p;
            prop_assert_eq!((Fp::from_i64(a) * Fp::from_i64(b)).value() as i128, prod);
            let diff = (((a - b) as i128) % p + p) % p;
            prop_assert_eq!((Fp::from_i64(a) - Fp::from_i64(b)).value() as i128, diff);
        }
    }
}
