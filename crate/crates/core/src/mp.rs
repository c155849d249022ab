//! Configurable-precision real and complex numbers for the series engine.
//!
//! Working precision is a per-thread setting (see [`with_digits`]); every
//! value created through [`MpReal::from_f64`] or the [`Scalar`] constructors
//! picks it up, and arithmetic keeps the larger precision of its operands.

use std::cell::Cell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;

use crate::scalar::Scalar;

type Float = FBig<HalfEven, 2>;

/// Default working precision in significant decimal digits.
pub const DEFAULT_DIGITS: u32 = 40;

thread_local! {
    static BITS: Cell<usize> = const { Cell::new(digits_to_bits(DEFAULT_DIGITS)) };
}

const fn digits_to_bits(digits: u32) -> usize {
    // log2(10) ~ 3.3219; a few guard bits on top
    (digits as usize * 33220).div_ceil(10000) + 8
}

/// Current working precision in bits.
pub fn precision_bits() -> usize {
    BITS.with(|b| b.get())
}

/// Runs `f` with the working precision set to `digits` decimal digits,
/// restoring the previous setting afterwards.
pub fn with_digits<R>(digits: u32, f: impl FnOnce() -> R) -> R {
    struct Restore(usize);
    impl Drop for Restore {
        fn drop(&mut self) {
            BITS.with(|b| b.set(self.0));
        }
    }
    let _restore = Restore(precision_bits());
    BITS.with(|b| b.set(digits_to_bits(digits.max(1))));
    f()
}

/// Real number with configurable precision.
#[derive(Clone, PartialEq)]
pub struct MpReal(Float);

impl MpReal {
    pub fn from_f64(x: f64) -> Self {
        let f = Float::try_from(x).expect("finite f64");
        MpReal(f.with_precision(precision_bits()).value())
    }

    pub fn zero() -> Self {
        Self::from_f64(0.0)
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }

    pub fn is_zero(&self) -> bool {
        self.0.partial_cmp(&Float::ZERO) == Some(Ordering::Equal)
    }

    pub fn is_negative(&self) -> bool {
        self.0 < Float::ZERO
    }

    pub fn abs(&self) -> Self {
        if self.is_negative() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    /// Square root of a non-negative value.
    pub fn sqrt(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        assert!(!self.is_negative(), "square root of a negative MpReal");
        MpReal(self.0.sqrt())
    }

    pub fn precision(&self) -> usize {
        self.0.precision()
    }
}

impl fmt::Debug for MpReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.to_f64())
    }
}

impl fmt::Display for MpReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

impl PartialOrd for MpReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

macro_rules! forward_binop {
    ($ty:ty, $tr:ident, $m:ident) => {
        impl $tr for $ty {
            type Output = $ty;
            fn $m(self, rhs: $ty) -> $ty {
                MpReal($tr::$m(self.0, rhs.0))
            }
        }
        impl<'a> $tr<&'a $ty> for &'a $ty {
            type Output = $ty;
            fn $m(self, rhs: &'a $ty) -> $ty {
                MpReal($tr::$m(&self.0, &rhs.0))
            }
        }
    };
}

forward_binop!(MpReal, Add, add);
forward_binop!(MpReal, Sub, sub);
forward_binop!(MpReal, Mul, mul);
forward_binop!(MpReal, Div, div);

impl Neg for MpReal {
    type Output = MpReal;
    fn neg(self) -> MpReal {
        MpReal(-self.0)
    }
}

/// Complex number over [`MpReal`].
#[derive(Clone, PartialEq)]
pub struct MpComplex {
    pub re: MpReal,
    pub im: MpReal,
}

impl MpComplex {
    pub fn new(re: MpReal, im: MpReal) -> Self {
        MpComplex { re, im }
    }

    pub fn from_f64s(re: f64, im: f64) -> Self {
        MpComplex { re: MpReal::from_f64(re), im: MpReal::from_f64(im) }
    }

    pub fn from_c64(z: num_complex::Complex64) -> Self {
        Self::from_f64s(z.re, z.im)
    }

    pub fn to_c64(&self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn norm_sqr(&self) -> MpReal {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn norm(&self) -> MpReal {
        self.norm_sqr().sqrt()
    }

    pub fn conj(&self) -> Self {
        MpComplex { re: self.re.clone(), im: -self.im.clone() }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    /// Principal square root (branch cut on the negative real axis, where
    /// `sqrt(-a) = +i sqrt(a)`).
    pub fn sqrt_principal(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let r = self.norm();
        let two = MpReal::from_f64(2.0);
        if !self.re.is_negative() {
            let t = ((&r + &self.re) / two.clone()).sqrt();
            let im = &self.im / &(&t * &two);
            MpComplex { re: t, im }
        } else {
            let t = ((&r - &self.re) / two.clone()).sqrt();
            let re = self.im.abs() / (&t * &two);
            let im = if self.im.is_negative() { -t } else { t };
            MpComplex { re, im }
        }
    }
}

impl fmt::Debug for MpComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:e}{:+e}i)", self.re.to_f64(), self.im.to_f64())
    }
}

impl Add for MpComplex {
    type Output = MpComplex;
    fn add(self, o: MpComplex) -> MpComplex {
        MpComplex { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for MpComplex {
    type Output = MpComplex;
    fn sub(self, o: MpComplex) -> MpComplex {
        MpComplex { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Mul for MpComplex {
    type Output = MpComplex;
    fn mul(self, o: MpComplex) -> MpComplex {
        if self.im.is_zero() && o.im.is_zero() {
            let re = &self.re * &o.re;
            let im = MpReal::zero();
            return MpComplex { re, im };
        }
        let re = &self.re * &o.re - &self.im * &o.im;
        let im = &self.re * &o.im + &self.im * &o.re;
        MpComplex { re, im }
    }
}

impl Div for MpComplex {
    type Output = MpComplex;
    fn div(self, o: MpComplex) -> MpComplex {
        if o.im.is_zero() {
            return MpComplex { re: &self.re / &o.re, im: &self.im / &o.re };
        }
        let d = o.norm_sqr();
        let re = (&self.re * &o.re + &self.im * &o.im) / d.clone();
        let im = (&self.im * &o.re - &self.re * &o.im) / d;
        MpComplex { re, im }
    }
}

impl Neg for MpComplex {
    type Output = MpComplex;
    fn neg(self) -> MpComplex {
        MpComplex { re: -self.re, im: -self.im }
    }
}

impl Scalar for MpComplex {
    fn from_f64(x: f64) -> Self {
        MpComplex::from_f64s(x, 0.0)
    }

    fn sqrt(&self) -> Self {
        self.sqrt_principal()
    }

    /// Only integer and half-integer exponents are supported at full
    /// precision.
    fn powf(&self, p: f64) -> Self {
        let twice = 2.0 * p;
        assert!(
            twice.fract() == 0.0,
            "MpComplex::powf supports integer and half-integer exponents only"
        );
        let n = twice as i32;
        if n % 2 == 0 {
            self.powi(n / 2)
        } else {
            self.sqrt_principal() * self.powi((n - 1).div_euclid(2))
        }
    }

    fn magnitude(&self) -> f64 {
        self.re.to_f64().hypot(self.im.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_controls_accuracy() {
        let third = with_digits(50, || MpReal::from_f64(1.0) / MpReal::from_f64(3.0));
        let back = with_digits(50, || third.clone() * MpReal::from_f64(3.0) - MpReal::from_f64(1.0));
        assert!(back.to_f64().abs() < 1e-49);
        assert!(third.precision() >= 166);
        assert_eq!(precision_bits(), digits_to_bits(DEFAULT_DIGITS));
    }

    #[test]
    fn sqrt_two_to_forty_digits() {
        let r = with_digits(45, || MpReal::from_f64(2.0).sqrt());
        let sq = with_digits(45, || &r * &r - MpReal::from_f64(2.0));
        assert!(sq.to_f64().abs() < 1e-43);
    }

    #[test]
    fn principal_complex_sqrt() {
        let z = MpComplex::from_f64s(-9.0, 0.0).sqrt_principal().to_c64();
        assert!((z - num_complex::Complex64::new(0.0, 3.0)).norm() < 1e-30);
        let w = MpComplex::from_f64s(-3.0, -4.0).sqrt_principal().to_c64();
        assert!((w - num_complex::Complex64::new(1.0, -2.0)).norm() < 1e-15);
        let u = MpComplex::from_f64s(3.0, 4.0).sqrt_principal().to_c64();
        assert!((u - num_complex::Complex64::new(2.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn complex_division_round_trip() {
        let a = MpComplex::from_f64s(1.5, -2.25);
        let b = MpComplex::from_f64s(-0.75, 3.0);
        let q = a.clone() / b.clone();
        let back = q * b - a;
        assert!(back.magnitude() < 1e-35);
    }
}
